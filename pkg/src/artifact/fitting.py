"""Confidence intervals and the below-threshold scaling fit.

The scaling law ``p_L = c (p / p_th) ** (alpha (d + 1) / 2)`` is linear in
``(ln c, alpha, alpha ln p_th)`` after taking logarithms, so the fit first
solves that linear least-squares problem and then refines ``(ln c, ln p_th,
alpha)`` with a nonlinear solver to obtain standard errors.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

__all__ = ["wilson_interval", "FitResult", "fit_threshold", "scaling_law", "crossing_points"]

log = logging.getLogger(__name__)


def wilson_interval(failures: int, shots: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial rate."""
    if shots <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(failures), int(shots)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def scaling_law(p, d, c: float, p_th: float, alpha: float):
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    return c * (p / p_th) ** (alpha * (d + 1.0) / 2.0)


@dataclass
class FitResult:
    c: float
    p_th: float
    alpha: float
    c_err: float = float("nan")
    p_th_err: float = float("nan")
    alpha_err: float = float("nan")
    window: tuple[float, float] = (0.0, 1.0)
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    points_used: int = 0
    identifiable: bool = True
    note: str = ""


def fit_threshold(points, window: tuple[float, float] | None = None) -> FitResult:
    """Fit ``(c, p_th, alpha)`` to logical error rates.

    Parameters
    ----------
    points : iterable of (p, d, p_L)
    window : (p_min, p_max), optional
        Only points with ``p_min <= p <= p_max`` are used.

    Notes
    -----
    Points with ``p_L <= 0`` are dropped with a warning.  When all points share
    one physical error rate, ``alpha`` and ``p_th`` cannot be separated; the
    result then carries ``identifiable=False`` with ``c`` still fitted.
    """
    arr = np.array([(float(p), float(d), float(pl)) for p, d, pl in points], dtype=float).reshape(-1, 3)
    if window is not None:
        lo, hi = window
        arr = arr[(arr[:, 0] >= lo) & (arr[:, 0] <= hi)]
    else:
        window = (float(arr[:, 0].min()), float(arr[:, 0].max())) if len(arr) else (0.0, 1.0)
    zero = arr[:, 2] <= 0
    if zero.any():
        warnings.warn(f"dropping {int(zero.sum())} point(s) with zero logical error rate", RuntimeWarning)
        arr = arr[~zero]
    if len(arr) < 2:
        raise ValueError("need at least two usable points")
    if len(np.unique(arr[:, 1])) < 2:
        raise ValueError("need at least two distances")
    p, d, pl = arr.T
    if 1 < len(np.unique(p)) < 3:
        warnings.warn("fewer than three physical error rates in the fit window", RuntimeWarning)
    k = (d + 1.0) / 2.0
    y = np.log(pl)
    lp = np.log(p)

    if np.ptp(lp) == 0.0:
        # y = ln c + k * g with g = alpha ln(p / p_th): only c and g are identifiable
        design = np.column_stack([np.ones_like(k), k])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        res = y - design @ coef
        return FitResult(float(np.exp(coef[0])), float("nan"), float("nan"), window=tuple(window),
                         residuals=res, points_used=len(arr), identifiable=False,
                         note="all points share one physical error rate; alpha and p_th are not identifiable")

    # linear stage: y = A + alpha * k * lp - k * B with A = ln c, B = alpha ln p_th
    design = np.column_stack([np.ones_like(k), k * lp, -k])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a0, alpha0, b0 = coef
    theta0 = np.array([a0, b0 / alpha0, alpha0])

    def resid(theta):
        ln_c, ln_pth, alpha = theta
        return ln_c + alpha * k * (lp - ln_pth) - y

    sol = optimize.least_squares(resid, theta0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    ln_c, ln_pth, alpha = sol.x
    r = sol.fun
    dof = max(len(arr) - 3, 0)
    errs = np.full(3, np.nan)
    if dof > 0:
        jac = sol.jac
        s2 = float(r @ r) / dof
        try:
            cov = np.linalg.inv(jac.T @ jac) * s2
            errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        except np.linalg.LinAlgError:
            pass
    c, p_th = float(np.exp(ln_c)), float(np.exp(ln_pth))
    return FitResult(c, p_th, float(alpha), c * errs[0], p_th * errs[1], float(errs[2]), tuple(window),
                     r, len(arr), True)


def crossing_points(series: dict[int, list[tuple[float, float]]]) -> list[tuple[int, int, float]]:
    """Physical error rates where curves of consecutive distances cross.

    ``series`` maps distance to sorted (p, p_L) pairs.  Crossings are found by
    linear interpolation of ``ln p_L - ln p_L'`` in ``ln p``; informational only.
    """
    out = []
    ds = sorted(series)
    for d1, d2 in zip(ds, ds[1:]):
        a = dict(series[d1])
        b = dict(series[d2])
        common = sorted(set(a) & set(b))
        pts = [(np.log(q), np.log(b[q]) - np.log(a[q])) for q in common if a[q] > 0 and b[q] > 0]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if y0 == 0:
                out.append((d1, d2, float(np.exp(x0))))
            elif y0 * y1 < 0:
                out.append((d1, d2, float(np.exp(x0 - y0 * (x1 - x0) / (y1 - y0)))))
    for d1, d2, pc in out:
        log.info("curves d=%d and d=%d cross near p=%.3g", d1, d2, pc)
    return out
