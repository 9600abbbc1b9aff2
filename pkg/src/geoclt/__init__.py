"""Central limit experiments for random polytopes inscribed in convex bodies.

Modules: ``bodies`` (support-function bodies and polytopes), ``geometries``
(Euclidean, Riemannian and Finsler weights), ``hull`` (hulls and half-space
intersections), ``measure`` (weighted, dual and mean-width functionals),
``sampling`` (seed streams and boundary samplers), ``diagnostics``
(surface bodies, visibility, difference moments) and ``experiments``.
"""
from .errors import ConfigError, DataError, DomainError, GeoCLTError, InputError, ModelError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "DomainError", "GeoCLTError", "InputError", "ModelError", "NumericalError",
           "__version__"]
