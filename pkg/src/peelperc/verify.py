"""Identity and oracle checks behind the ``verify`` command.

Each check takes its inputs explicitly so tests can feed perturbed tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .bounds import pc_bracket, verify_quartic
from .chain import build_transition_matrix, enumerate_states, stationary
from .events import mass_report, moment_checks
from .weights import (
    ODD_TOTAL,
    PAIR_TOTAL,
    QPRIME_TOTAL,
    WeightTable,
    build_weight_table,
    float_tables,
    q_value,
)

FAR = 2**20


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _powerlaw_remainder(x: np.ndarray) -> float:
    """Mass beyond the last entry of a sequence decaying like ``j^{-5/2}``."""
    J = len(x)
    c = x[-1] * J**2.5
    return c * (2 / 3) * (J + 0.5) ** -1.5


def _far_tails(n: int) -> dict[str, float]:
    """Masses beyond ``n`` summed in floating point out to 2^20, plus a power-law remainder.

    Independent of the closed-form totals, so the identity checks are not circular.
    """
    ft = float_tables(FAR)
    j0 = (n + 1) // 2  # first j with 2j+1 > n
    odd = math.fsum(ft.q_odd[j0:]) + _powerlaw_remainder(ft.q_odd)
    h0 = n // 2  # qprime_even[h] is q'_{2h+2}
    qp = math.fsum(ft.qprime_even[h0:]) + _powerlaw_remainder(ft.qprime_even)
    return {"odd": odd, "qprime": qp}


def check_q_sums(table: WeightTable, n: int | None = None, atol: float = 1e-9) -> CheckResult:
    """Exact partial sums up to ``n`` plus an independent float tail must hit
    1/8 (odd and even q), 1/24 (pairs) and 1/18 (q')."""
    n = min(table.cutoff, 64) if n is None else n
    far = _far_tails(n)
    odd_part = sum((table.qk(k) for k in range(1, n + 1, 2)), Fraction(0))
    even_part = sum((table.qk(k) for k in range(0, n + 1, 2)), Fraction(0))
    qp_part = sum((table.qprime(k) for k in range(2, n + 1, 2)), Fraction(0))
    pair_part = Fraction(8, 3) * odd_part * odd_part
    # q_{2j} = q_{2j+1}, so even k > n pair with odd k+1 > n+1
    even_far = far["odd"] - (float(q_value(n + 1)) if n % 2 == 0 else 0.0)
    o = float(odd_part)
    errs = {
        "odd": o + far["odd"] - float(ODD_TOTAL),
        "even": float(even_part) + even_far - float(ODD_TOTAL),
        "pairs": float(pair_part) + (8 / 3) * (2 * o + far["odd"]) * far["odd"] - float(PAIR_TOTAL),
        "qprime": float(qp_part) + far["qprime"] - float(QPRIME_TOTAL),
    }
    strict = (odd_part < ODD_TOTAL and even_part < ODD_TOTAL and pair_part < PAIR_TOTAL
              and qp_part < QPRIME_TOTAL)
    ok = strict and all(abs(v) <= atol for v in errs.values())
    detail = ", ".join(f"{k} err={v:.1e}" for k, v in errs.items())
    return CheckResult("q-sum identities (1/8, 1/8, 1/24, 1/18)", ok, detail)


def check_exact_tails(table: WeightTable) -> CheckResult:
    """Exact tails are positive, non-increasing and match identity minus partial sums."""
    n = table.cutoff
    ok = True
    prev_o, prev_q = None, None
    for m in range(1, n + 3):
        t_o = table.tail_odd(m)
        direct = ODD_TOTAL - sum((table.qk(k) for k in range(1, min(m, n + 1), 2)), Fraction(0))
        if m <= n + 1 and t_o != direct:
            ok = False
        if t_o <= 0 or (prev_o is not None and t_o > prev_o):
            ok = False
        prev_o = t_o
        if m >= 2:
            t_q = table.tail_qprime(m)
            if t_q <= 0 or (prev_q is not None and t_q > prev_q):
                ok = False
            prev_q = t_q
    return CheckResult("exact tails positive and monotone", ok, f"cutoff={n}")


def check_normalization(table: WeightTable) -> CheckResult:
    rep = mass_report(table)
    ok = rep.total == 1 and rep.mean_exposed == 2
    return CheckResult("event mass = 1 and E(E) = 2 (exact)", ok,
                       f"total={rep.total}, E(E)={rep.mean_exposed}")


def check_recurrence(kmax: int = 40) -> CheckResult:
    t = build_weight_table(kmax)
    bad = [k for k in range(-1, kmax + 1) if t.qk(k) != q_value(k)]
    return CheckResult("ratio recurrence equals factorial closed form", not bad,
                       f"k <= {kmax}, mismatches={bad}")


def check_moments(n: int) -> CheckResult:
    try:
        rep = moment_checks(build_weight_table(n), n)
    except AssertionError as exc:
        return CheckResult("E(R+) partial sums", False, str(exc))
    # the (0.49, 0.5) window is the N = 10^4 oracle; smaller N rely on the gap bound alone
    ok = n < 10_000 or 0.49 < rep.mean_right_partial < 0.5
    return CheckResult("E(R+) partial sums", ok,
                       f"N={n}, partial={float(rep.mean_right_partial):.6f}, "
                       f"gap={float(rep.mean_right_gap):.2e} <= {rep.gap_bound:.2e}")


K2_ROWS = {
    # (from, to): (c0, c1, c2) of the transition mass c0 + c1 p + c2 p^2
    ("b", "bb"): (Fraction(1, 2), Fraction(-1, 2), Fraction(0)),
    ("b", "bo"): (Fraction(0), Fraction(3, 8), Fraction(-3, 8)),
    ("bb", "b"): (Fraction(1, 9), Fraction(1, 9), Fraction(0)),
    ("bb", "bo"): (Fraction(0), Fraction(3, 8), Fraction(-3, 8)),
    ("bo", "b"): (Fraction(1, 9), Fraction(1, 9), Fraction(0)),
    ("bo", "bb"): (Fraction(1, 2), Fraction(-1, 2), Fraction(0)),
}


def k2_closed_form(p: float) -> dict[str, float]:
    den = -27 * p * p - p + 44
    pb = 8 * (1 + p) / den
    po = 27 * p * (1 - p) / den
    return {"b": pb, "bo": po, "bb": 1 - pb - po}


def check_k2_rows(ps=(Fraction(1, 7), Fraction(1, 2), Fraction(5, 9), Fraction(6, 7))) -> CheckResult:
    bad = []
    for p in ps:
        T = build_transition_matrix(2, p)
        for (a, b), c in K2_ROWS.items():
            want = c[0] + c[1] * p + c[2] * p * p
            if T.entry(a, b) != want:
                bad.append((a, b, str(p)))
    return CheckResult("K=2 transition rows (exact)", not bad, f"mismatches={bad}")


def check_k2_stationary(atol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for i in range(1, 10):
        p = i / 10
        d = stationary(build_transition_matrix(2, p))
        cf = k2_closed_form(p)
        worst = max(worst, *(abs(d[w] - cf[w]) for w in cf))
    exact = stationary(build_transition_matrix(2, Fraction(1, 2)), exact=True)
    space = enumerate_states(2)
    pio = exact.exact[space.index["bo"]]
    ok = worst <= atol and pio == Fraction(9, 49)
    return CheckResult("K=2 stationary closed forms", ok,
                       f"max err={worst:.1e} over p=0.1..0.9, pi(bo) at 1/2 = {pio}")


def check_k1_algebraic(tol: float = 1e-6) -> CheckResult:
    r = pc_bracket(1)
    lo = (math.sqrt(493) - 13) / 18
    hi = (math.sqrt(73) - 5) / 6
    ok = abs(r.p_lower - lo) <= tol and abs(r.p_upper - hi) <= tol
    return CheckResult("K=1 algebraic bounds", ok,
                       f"[{r.p_lower:.8f}, {r.p_upper:.8f}] vs [{lo:.8f}, {hi:.8f}]")


def check_k2_bounds(tol: float = 1e-6) -> CheckResult:
    r = pc_bracket(2)
    q = verify_quartic(r)
    ok = abs(r.p_lower - 0.523599) <= tol and abs(r.p_upper - 0.572542) <= tol and q.ok
    return CheckResult("K=2 bounds and quartics", ok,
                       f"[{r.p_lower:.7f}, {r.p_upper:.7f}], quartics {q.lower_value:.1e}, "
                       f"{q.upper_value:.1e}")


def check_row_stochastic(K_max: int = 8, ps=(Fraction(0), Fraction(1, 3), Fraction(5, 9), Fraction(1))) -> CheckResult:
    for K in range(1, K_max + 1):
        for p in ps:
            T = build_transition_matrix(K, p)  # raises on a bad row
            if any(s != 1 for s in T.row_sums()):
                return CheckResult("row-stochastic (exact)", False, f"K={K}, p={p}")
    return CheckResult("row-stochastic (exact)", True, f"K <= {K_max}")


def all_checks(table: WeightTable | None = None, moment_cutoff: int = 10_000) -> list[Callable[[], CheckResult]]:
    table = table or build_weight_table(64)
    return [
        lambda: check_q_sums(table),
        lambda: check_exact_tails(table),
        lambda: check_normalization(table),
        check_recurrence,
        lambda: check_moments(moment_cutoff),
        check_k2_rows,
        check_k2_stationary,
        check_k1_algebraic,
        check_k2_bounds,
        check_row_stochastic,
    ]


def run_checks(table: WeightTable | None = None, moment_cutoff: int = 10_000) -> list[CheckResult]:
    return [c() for c in all_checks(table, moment_cutoff)]
