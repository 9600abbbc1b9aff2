"""Acceptance criteria AC1-AC10, each at its stated tolerance.

Every test records one ``ACk PASS|FAIL`` line, printed in the pytest
terminal summary.  Runs standalone with ``python3 tests/test_acceptance.py``.
"""
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from geoclt.bodies import Ball
from geoclt.diagnostics import run_diagnostic
from geoclt.experiments import ExperimentConfig, emit_report, run_experiment, tomllib
from geoclt.geometries import (FinslerNorm, VolumeDefinition, finsler_distance, hilbert_distance_closed_form,
                               klein_density, volume_density)
from geoclt.hull import convex_hull, divergence_volume
from geoclt.measure import QuadratureSpec, dual_volume, mean_width, mean_width_dual_from_halfspaces
from geoclt.model import Model, default_window
from geoclt.sampling import SeedStream

from conftest import ACCEPTANCE_LINES

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
KS_MAX = 0.08


def load(name, **overrides):
    with open(CONFIGS / name, "rb") as fh:
        data = tomllib.load(fh)
    for key, value in overrides.items():
        data.setdefault(key.split(".")[0], {})
        table, _, field = key.partition(".")
        data[table][field] = value
    return data


@contextmanager
def criterion(label):
    """Record ``label PASS|FAIL  detail``; the body stores its summary in ``info['detail']``."""
    info = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield info
    except AssertionError:
        ACCEPTANCE_LINES.append(f"{label} FAIL  {info['detail']}  ({time.perf_counter() - t0:.0f} s)")
        raise
    ACCEPTANCE_LINES.append(f"{label} PASS  {info['detail']}  ({time.perf_counter() - t0:.0f} s)")


def clt_distance(config_name):
    cfg = ExperimentConfig.from_dict(load(config_name))
    assert cfg.n_list == (2000,) and cfg.reps == 2000
    s = run_experiment(cfg).summary(2000)
    assert s.failures == 0
    return s.kolmogorov


# -- AC1-AC3: CLT at n = 2000 -------------------------------------------------------------


def test_ac1_clt_euclidean():
    with criterion("AC1") as info:
        k = clt_distance("clt_disc.toml")
        info["detail"] = f"Euclidean disc: d_Kol = {k:.4f} (limit {KS_MAX})"
        assert k <= KS_MAX


def test_ac2_clt_hyperbolic():
    with criterion("AC2") as info:
        k = clt_distance("clt_klein.toml")
        info["detail"] = f"Klein, K = disc r 0.5: d_Kol = {k:.4f} (limit {KS_MAX})"
        assert k <= KS_MAX


def test_ac3_clt_spherical_and_finsler():
    with criterion("AC3") as info:
        kg = clt_distance("clt_gnomonic.toml")
        kh = clt_distance("clt_hilbert.toml")
        info["detail"] = f"gnomonic d_Kol = {kg:.4f}, Hilbert-Busemann d_Kol = {kh:.4f} (limit {KS_MAX})"
        assert kg <= KS_MAX and kh <= KS_MAX


# -- AC4: variance scaling ------------------------------------------------------------------


def test_ac4_variance_scaling():
    with criterion("AC4") as info:
        slopes = {}
        for name, d in (("variance_disc.toml", 2), ("variance_ball.toml", 3)):
            cfg = ExperimentConfig.from_dict(load(name))
            assert cfg.n_list == (50, 100, 200, 400, 800, 1600) and cfg.reps >= 5000
            fit = run_experiment(cfg).variance_fit
            slopes[d] = fit.slope
        info["detail"] = (f"d=2 slope {slopes[2]:.3f} (target -5 +- 0.3), "
                          f"d=3 slope {slopes[3]:.3f} (target -3 +- 0.3)")
        assert abs(slopes[2] + 5) <= 0.3
        assert abs(slopes[3] + 3) <= 0.3


# -- AC5: mean width duality ------------------------------------------------------------------


def test_ac5_mean_width_duality():
    with criterion("AC5") as info:
        q = QuadratureSpec(sphere_nodes=20000)
        cfg = ExperimentConfig.from_dict(load("mean_width_disc.toml"))
        model = Model.from_config(cfg)
        L = default_window(model.K)
        worst = 0.0
        for r in range(100):
            n = (20, 50, 100, 200)[r % 4]
            bp = model.sample(SeedStream(555, (r,)), n)
            A, b = model.halfspaces(bp)
            direct = mean_width(model.polytope(bp), q)
            dual = mean_width_dual_from_halfspaces(A, b, L, q)
            worst = max(worst, abs(direct - dual))
        info["detail"] = f"max |W - C_d V_-1| over 100 instances = {worst:.2e} (limit 1e-4)"
        assert worst < 1e-4


# -- AC6: dual-volume identities ------------------------------------------------------------------


def test_ac6_dual_volume_identities():
    with criterion("AC6") as info:
        rng = np.random.default_rng(6)
        vol_err = scale_err = 0.0
        count = 0
        for d in (2, 3):
            for _ in range(15):
                P = None
                while P is None or not P.contains_origin:
                    m = int(rng.integers(4 * d, 40))
                    U = rng.standard_normal((m, d))
                    P = convex_hull(U / np.linalg.norm(U, axis=1)[:, None] * rng.uniform(0.5, 1.5, (m, 1)))
                vol_err = max(vol_err, abs(dual_volume(P, d) - divergence_volume(P)))
                for j in (-1.0, 1.0, 2.0, float(d)):
                    base = dual_volume(P, j)
                    for lam in (0.5, 2.0):
                        scale_err = max(scale_err, abs(dual_volume(P.scaled(lam), j) - lam ** j * base)
                                        / (lam ** j * base))
                count += 1
        info["detail"] = (f"{count} polytopes: max |V~_d - Vol| = {vol_err:.1e}, "
                          f"max scaling rel. error = {scale_err:.1e} (limit 1e-8)")
        assert vol_err <= 1e-8 and scale_err <= 1e-8


# -- AC7: geometry oracles --------------------------------------------------------------------------


def test_ac7_geometry_oracles():
    with criterion("AC7") as info:
        klein_err = abs(klein_density(np.array([[0.5, 0.0]]))[0] - 0.75 ** -1.5)
        disc = Ball(2, 1.0)
        F = FinslerNorm(disc, "hilbert")
        x, y = np.zeros(2), np.array([0.5, 0.0])
        line_err = abs(finsler_distance(F, x, y) - math.atanh(0.5))
        cross_err = abs(hilbert_distance_closed_form(disc, x, y) - math.atanh(0.5))
        dens_err = 0.0
        for d in (2, 3):
            Fd = FinslerNorm(Ball(d, 1.0), "hilbert")
            for kind in ("busemann", "holmes_thompson"):
                dens_err = max(dens_err, abs(volume_density(Fd, VolumeDefinition(kind), np.zeros((1, d)))[0] - 1))
        info["detail"] = (f"Klein {klein_err:.1e} (1e-12), Hilbert line {line_err:.1e} / cross-ratio "
                          f"{cross_err:.1e} (1e-8), Bus/HT at Euclidean norm {dens_err:.1e} (1e-6)")
        assert klein_err <= 1e-12
        assert line_err <= 1e-8 and cross_err <= 1e-8
        assert dens_err <= 1e-6


# -- AC8: visibility and overlap scaling --------------------------------------------------------------


def test_ac8_surface_body_scaling():
    with criterion("AC8") as info:
        vis = run_diagnostic(load("diagnose_visibility.toml"))
        ovl = run_diagnostic(load("diagnose_overlap.toml"))
        ts = [r[0] for r in vis.rows]
        assert min(ts) == 0.002 and max(ts) == 0.05
        info["detail"] = f"visibility slope {vis.slope:.3f} (>= 2.7), overlap slope {ovl.slope:.3f} (1 +- 0.3)"
        assert vis.slope >= 2.7
        assert abs(ovl.slope - 1.0) <= 0.3


# -- AC9: containment ---------------------------------------------------------------------------------------


def test_ac9_containment():
    with criterion("AC9") as info:
        strong = run_diagnostic(load("diagnose_containment.toml"))
        assert [r[0] for r in strong.rows] == [200, 400, 800]
        weak = run_diagnostic(load("diagnose_containment.toml", **{"diagnose.c": 0.1, "diagnose.ns": [200]}))
        fails = [r[1] for r in strong.rows]
        info["detail"] = (f"c=8 failure rates {fails} over 2000 reps each; "
                          f"c=0.1, n=200 failure rate {weak.rows[0][1]:.3f} (> 0.2)")
        assert all(f == 0.0 for f in fails)
        assert weak.rows[0][1] > 0.2


# -- AC10: determinism ---------------------------------------------------------------------------------------


def test_ac10_determinism(tmp_path):
    with criterion("AC10") as info:
        cases = ["clt_disc.toml", "clt_klein.toml", "clt_hilbert.toml", "dual_volume_ellipse.toml",
                 "mean_width_disc.toml"]
        checked = []
        for name in cases:
            data = load(name, **{"experiment.reps": 40, "experiment.n_list": [50, 100]})
            cfg = ExperimentConfig.from_dict(data)
            outs = []
            for k, threads in enumerate((1, 1, 2)):
                out = tmp_path / f"{name}-{k}"
                emit_report(run_experiment(cfg, threads=threads), out)
                outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            same = outs[0] == outs[1] == outs[2]
            checked.append(f"{name}:{'identical' if same else 'DIFFERENT'}")
            assert same, name
        info["detail"] = "CSV/JSON/SVG bytes at threads 1, 1, 2: " + ", ".join(checked)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
