from __future__ import annotations

import math

import numpy as np
import pytest

from artifact.fitting import crossing_points, fit_threshold, scaling_law, wilson_interval

TRUE = dict(c=0.11, p_th=0.00268, alpha=0.679)
GRID = [(p, d) for d in (3, 5, 7) for p in (3e-4, 5e-4, 7e-4, 1e-3, 1.5e-3)]


def _points(noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for p, d in GRID:
        pl = float(scaling_law(p, d, **TRUE))
        out.append((p, d, pl * (1 + noise * rng.uniform(-1, 1))))
    return out


def test_exact_recovery_without_noise():
    f = fit_threshold(_points())
    assert f.identifiable and f.points_used == len(GRID)
    assert math.isclose(f.c, TRUE["c"], rel_tol=1e-6)
    assert math.isclose(f.p_th, TRUE["p_th"], rel_tol=1e-6)
    assert math.isclose(f.alpha, TRUE["alpha"], rel_tol=1e-6)
    assert np.abs(f.residuals).max() < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_recovery_under_one_percent_noise(seed):
    f = fit_threshold(_points(0.01, seed))
    for key in TRUE:
        assert abs(getattr(f, key) / TRUE[key] - 1) < 0.05
    assert np.isfinite([f.c_err, f.p_th_err, f.alpha_err]).all()


def test_window_restricts_points():
    f = fit_threshold(_points(), window=(4e-4, 1.1e-3))
    assert f.points_used == 9 and f.window == (4e-4, 1.1e-3)


def test_zero_rates_dropped_with_warning():
    pts = _points() + [(2e-4, 7, 0.0)]
    with pytest.warns(RuntimeWarning, match="zero logical error"):
        f = fit_threshold(pts)
    assert f.points_used == len(GRID)


def test_single_p_is_not_identifiable():
    pts = [(1e-3, d, float(scaling_law(1e-3, d, **TRUE))) for d in (3, 5, 7)]
    f = fit_threshold(pts)
    assert not f.identifiable and math.isnan(f.p_th) and math.isnan(f.alpha)
    assert math.isclose(f.c, TRUE["c"], rel_tol=1e-9)


def test_too_few_points_rejected():
    with pytest.raises(ValueError):
        fit_threshold([(1e-3, 3, 0.01)])
    with pytest.raises(ValueError):
        fit_threshold([(1e-3, 3, 0.01), (2e-3, 3, 0.03)])


def test_two_p_values_warn():
    pts = [(p, d, float(scaling_law(p, d, **TRUE))) for d in (3, 5) for p in (5e-4, 1e-3)]
    with pytest.warns(RuntimeWarning, match="fewer than three"):
        fit_threshold(pts)


def test_wilson_interval_matches_formula():
    for k, n in [(0, 100), (7, 1000), (500, 1000), (1000, 1000)]:
        z = 1.959963984540054
        ph = k / n
        centre = (ph + z * z / (2 * n)) / (1 + z * z / n)
        half = z / (1 + z * z / n) * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n))
        lo, hi = wilson_interval(k, n)
        assert math.isclose(lo, max(centre - half, 0.0), abs_tol=1e-12)
        assert math.isclose(hi, min(centre + half, 1.0), abs_tol=1e-12)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_crossing_points_found():
    series = {3: [(1e-3, 1e-3), (1e-2, 1e-1)], 5: [(1e-3, 1e-4), (1e-2, 1.0)]}
    (d1, d2, p), = crossing_points(series)
    assert (d1, d2) == (3, 5) and 1e-3 < p < 1e-2
