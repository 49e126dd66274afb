"""Grid-seeded minimization over the inverse-temperature axis beta = p - 1."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

GRID_POINTS = 256


def beta_grid(beta_hi: float, points: int = GRID_POINTS, beta_lo: float = 1e-4) -> np.ndarray:
    """0 followed by a geometric grid on [beta_lo, beta_hi]."""
    beta_hi = max(beta_hi, 10 * beta_lo)
    return np.concatenate(([0.0], np.geomspace(beta_lo, beta_hi, points - 1)))


def grid_minimize(f, betas: np.ndarray, refine: int = 6) -> tuple[float, float]:
    """Minimize ``f`` (vectorized in beta) over the grid, then polish local minima.

    The objective need not be unimodal, so every grid local minimum among the
    ``refine`` lowest is refined with a bounded Brent search between its grid
    neighbours.
    """
    values = np.asarray(f(betas), dtype=float)
    n = len(betas)
    local = [
        i
        for i in range(n)
        if (i == 0 or values[i] <= values[i - 1]) and (i == n - 1 or values[i] <= values[i + 1])
    ]
    local.sort(key=lambda i: values[i])
    best = int(np.argmin(values))
    best_val, best_beta = float(values[best]), float(betas[best])
    for i in local[:refine]:
        lo = betas[max(i - 1, 0)]
        hi = betas[min(i + 1, n - 1)]
        if hi <= lo:
            continue
        res = minimize_scalar(
            lambda x: float(f(np.array([x]))[0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12 * max(1.0, hi)},
        )
        if res.fun < best_val:
            best_val, best_beta = float(res.fun), float(res.x)
    return best_val, best_beta
