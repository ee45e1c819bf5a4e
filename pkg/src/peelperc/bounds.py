"""Certified brackets on the percolation threshold from the drift bounds.

``p_upper`` is a point where the lower drift bound is positive and
``p_lower`` a point where the upper drift bound is negative.  Both are
re-evaluated after bisection, never inferred from bisection state.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chain import alpha_bounds

LOWER_QUARTIC = (189, 378, -596, -575, 396)
UPPER_QUARTIC = (81, 162, -251, -232, 176)


class InfeasibleBracket(RuntimeError):
    pass


@dataclass
class BoundsResult:
    K: int
    p_lower: float
    p_upper: float
    tolerance: float
    grid_step: float
    alpha_ub_at_lower: float
    alpha_lb_at_upper: float
    sign_changes: dict = field(default_factory=dict)  # "alpha_lb"/"alpha_ub" -> [[a, b], ...]
    p_lower_6dp: str = ""
    p_upper_6dp: str = ""

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "p_lower_6dp": self.p_lower_6dp or floor_dp(self.p_lower, 6),
            "p_upper_6dp": self.p_upper_6dp or ceil_dp(self.p_upper, 6),
            "tolerance": self.tolerance,
            "grid_step": self.grid_step,
            "alpha_ub_at_lower": self.alpha_ub_at_lower,
            "alpha_lb_at_upper": self.alpha_lb_at_upper,
            "sign_changes": self.sign_changes,
        }


def floor_dp(x: float, digits: int) -> str:
    """Round down to ``digits`` decimals, so a printed lower bound stays valid."""
    scale = 10**digits
    return f"{math.floor(x * scale + 1e-9) / scale:.{digits}f}"


def ceil_dp(x: float, digits: int) -> str:
    scale = 10**digits
    return f"{math.ceil(x * scale - 1e-9) / scale:.{digits}f}"


def _printed(x: float, f: Callable[[float], float], upper: bool, tol: float,
             digits: int = 6) -> str:
    """Tightest ``digits``-decimal value within ``tol`` of ``x`` that ``f`` still certifies.

    Starts from the outward rounding of ``x`` and moves inward one unit at a
    time while ``f`` keeps the required sign there.
    """
    unit = 10.0**-digits
    text = ceil_dp(x, digits) if upper else floor_dp(x, digits)
    while True:
        nxt = float(text) + (-unit if upper else unit)
        if abs(nxt - x) > tol + unit or not (f(nxt) > 0 if upper else f(nxt) < 0):
            return text
        text = f"{nxt:.{digits}f}"


def _sign_changes(grid: np.ndarray, vals: np.ndarray) -> list[list[float]]:
    pos = vals > 0
    idx = np.nonzero(pos[1:] != pos[:-1])[0]
    return [[float(grid[i]), float(grid[i + 1])] for i in idx]


def bisect_sign(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` with ``f(lo) <= 0 < f(hi)`` to width ``tol``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def pc_bracket(K: int, tolerance: float = 1e-7, grid_step: float = 1e-3,
               cutoff: Optional[int] = None) -> BoundsResult:
    """Bracket the threshold with the K-truncated chain.

    The whole unit interval is scanned on a grid, since the drift bounds
    are not known to have a single root.  ``p_upper`` refines the first
    grid crossing of the lower drift bound into positive values and
    ``p_lower`` the last grid point where the upper drift bound is negative.
    """
    if tolerance < 1e-9:
        raise ValueError("tolerance must be >= 1e-9")
    if grid_step > 1e-3 or grid_step <= 0:
        raise ValueError("grid_step must be in (0, 1e-3]")
    n = int(round(1 / grid_step))
    grid = np.linspace(0.0, 1.0, n + 1)
    lb = np.empty(n + 1)
    ub = np.empty(n + 1)
    for i, p in enumerate(grid):
        a = alpha_bounds(float(p), K, cutoff)
        lb[i], ub[i] = a.alpha_lb, a.alpha_ub
    changes = {"alpha_lb": _sign_changes(grid, lb), "alpha_ub": _sign_changes(grid, ub)}

    def f_lb(p: float) -> float:
        return alpha_bounds(p, K, cutoff).alpha_lb

    def f_ub(p: float) -> float:
        return alpha_bounds(p, K, cutoff).alpha_ub

    up_idx = np.nonzero(lb > 0)[0]
    neg_idx = np.nonzero(ub < 0)[0]
    if len(up_idx) == 0 or len(neg_idx) == 0:
        raise InfeasibleBracket(f"no sign change of the drift bounds on [0, 1] for K={K}")

    i = int(up_idx[0])
    if i == 0:
        p_upper = 0.0
    else:
        _, p_upper = bisect_sign(f_lb, float(grid[i - 1]), float(grid[i]), tolerance)
    while f_lb(p_upper) <= 0:
        p_upper = min(1.0, p_upper + tolerance)

    j = int(neg_idx[-1])
    if j == n:
        p_lower = 1.0
    else:
        # f_ub(grid[j]) < 0 <= f_ub(grid[j + 1])
        p_lower, _ = bisect_sign(f_ub, float(grid[j]), float(grid[j + 1]), tolerance)
    while f_ub(p_lower) >= 0:
        p_lower = max(0.0, p_lower - tolerance)

    return BoundsResult(K, p_lower, p_upper, tolerance, grid_step,
                        f_ub(p_lower), f_lb(p_upper), changes,
                        _printed(p_lower, f_ub, False, tolerance),
                        _printed(p_upper, f_lb, True, tolerance))


@dataclass
class SeriesResult:
    rows: list[BoundsResult]
    violations: list[str]

    def to_csv(self, digits: int = 4) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["K", "lower", "upper"])
        for r in self.rows:
            w.writerow([r.K, floor_dp(r.p_lower, digits), ceil_dp(r.p_upper, digits)])
        return buf.getvalue()


def bracket_series(K_max: int, tolerance: float = 1e-7, grid_step: float = 1e-3,
                   Ks: Optional[list[int]] = None) -> SeriesResult:
    """One bracket per K; monotonicity violations are flagged, not raised."""
    if K_max > 20:
        raise ValueError("K_max above 20 exceeds the default budget")
    Ks = list(range(1, K_max + 1)) if Ks is None else sorted(Ks)
    rows = [pc_bracket(K, tolerance, grid_step) for K in Ks]
    violations = []
    for a, b in zip(rows, rows[1:]):
        if b.p_lower < a.p_lower:
            violations.append(f"lower bound decreases from K={a.K} to K={b.K}: "
                              f"{a.p_lower:.8f} -> {b.p_lower:.8f}")
        if b.p_upper > a.p_upper:
            violations.append(f"upper bound increases from K={a.K} to K={b.K}: "
                              f"{a.p_upper:.8f} -> {b.p_upper:.8f}")
    return SeriesResult(rows, violations)


@dataclass(frozen=True)
class QuarticReport:
    p_lower: float
    p_upper: float
    lower_value: float
    upper_value: float
    ok: bool


def verify_quartic(result: Optional[BoundsResult] = None, atol: float = 1e-4) -> QuarticReport:
    """Evaluate the two K=2 quartics at the K=2 bracket endpoints."""
    result = result or pc_bracket(2)
    lo = float(np.polyval(LOWER_QUARTIC, result.p_lower))
    hi = float(np.polyval(UPPER_QUARTIC, result.p_upper))
    return QuarticReport(result.p_lower, result.p_upper, lo, hi,
                         abs(lo) <= atol and abs(hi) <= atol)
