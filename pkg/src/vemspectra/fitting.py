"""Power-law convergence fits and extrapolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class ConvergenceFit:
    order: float
    limit: float
    constant: float
    residual: float  # 2-norm of the fit residuals

    def predict(self, h):
        return self.limit + self.constant * np.asarray(h, dtype=float) ** self.order


def fit_convergence(h, values) -> ConvergenceFit:
    """Least-squares fit of ``values ~ limit + C * h**order``.

    ``h`` is the mesh parameter (decreasing towards the limit; pass
    ``N**-0.5`` for DOF-indexed data). The order is first estimated from
    log-ratios of successive differences, then all three parameters are
    refined jointly.
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(h) < 3 or len(h) != len(v):
        raise FitError("need at least three (h, value) pairs")
    order = np.argsort(-h)
    h, v = h[order], v[order]
    if np.any(np.diff(h) >= 0):
        raise FitError("mesh parameter must be strictly monotone")
    d = np.diff(v)
    if np.any(d == 0) or np.any(np.sign(d) != np.sign(d[0])):
        raise FitError("values do not converge monotonically")

    rates = np.log(d[:-1] / d[1:]) / np.log(h[:-2] / h[1:-1])
    t0 = float(np.clip(np.median(rates), 0.1, 10.0))
    c0 = d[-1] / (h[-1] ** t0 - h[-2] ** t0)
    lim0 = v[-1] - c0 * h[-1] ** t0

    scale = max(abs(v).max(), 1e-300)

    def resid(p):
        lim, c, t = p
        return (lim + c * h**t - v) / scale

    sol = least_squares(
        resid, x0=[lim0, c0, t0], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000
    )
    lim, c, t = sol.x
    return ConvergenceFit(
        order=float(t),
        limit=float(lim),
        constant=float(c),
        residual=float(np.linalg.norm(sol.fun) * scale),
    )


def loglog_slope(n, err) -> tuple[float, float]:
    """Slope and intercept of the least-squares line through ``(log n, log err)``."""
    n = np.asarray(n, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(n) < 2:
        raise FitError("need at least two points")
    if np.any(err <= 0):
        raise FitError("errors must be positive")
    slope, icpt = np.polyfit(np.log(n), np.log(err), 1)
    return float(slope), float(icpt)
