"""Truncated boundary chain on admissible words of length at most K.

Transition masses are quadratic polynomials in ``p`` with exact rational
coefficients.  :func:`chain_structure` builds them once per ``K``; a
matrix at a particular ``p`` is then either exact (``Fraction`` p) or a
scipy sparse matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .events import (
    BLACK,
    WHITE,
    ColourDraw,
    Kind,
    PeelEvent,
    boundary_update,
    colour_draws,
)
from .weights import ODD_TOTAL, Q_MINUS_ONE, QPRIME_TOTAL, SELF_PARALLEL, WeightTable, build_weight_table

K_MAX = 25

Poly = tuple[Fraction, Fraction, Fraction]  # c0 + c1 p + c2 p^2
Number = Union[float, Fraction]


class NumericalFailure(RuntimeError):
    pass


def admissible_words(length: int) -> list[str]:
    """Admissible words of a given length, lexicographic with b < o."""
    out = []
    for tail in itertools.product(BLACK + WHITE, repeat=length - 1):
        w = BLACK + "".join(tail)
        if "oo" not in w:
            out.append(w)
    return out


@dataclass(frozen=True)
class StateSpace:
    K: int
    states: tuple[str, ...]
    index: dict

    def __len__(self) -> int:
        return len(self.states)


def enumerate_states(K: int) -> StateSpace:
    """All admissible words with ``1 <= len <= K``, ordered by length then lexicographically."""
    if not 1 <= K <= K_MAX:
        raise ValueError(f"K must be in 1..{K_MAX}, got {K}")
    states = tuple(w for n in range(1, K + 1) for w in admissible_words(n))
    return StateSpace(K, states, {w: i for i, w in enumerate(states)})


def _draw_poly(e: PeelEvent, d: ColourDraw) -> Poly:
    one, zero = Fraction(1), Fraction(0)
    if e.kind is Kind.THREE_FRESH:
        if d.zeta == 2:
            return (zero, zero, one)
        if d.zeta == 1 or d.inner == WHITE:
            return (zero, one, -one)
        return (one, -2 * one, one)
    if e.kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        return (zero, one, zero) if d.chi else (one, -one, zero)
    return (one, zero, zero)


def _row(w: str, K: int, table: WeightTable) -> dict[str, list[Fraction]]:
    """Outgoing masses of ``w`` as polynomials, keyed by target word."""
    row: dict[str, list[Fraction]] = {}

    def add(event: PeelEvent, mass: Fraction) -> None:
        for d in colour_draws(event):
            target = boundary_update(w, event, d, K)
            poly = _draw_poly(event, d)
            acc = row.setdefault(target, [Fraction(0)] * 3)
            for i in range(3):
                acc[i] += mass * poly[i]

    W = len(w)
    add(PeelEvent(Kind.THREE_FRESH), Q_MINUS_ONE)
    add(PeelEvent(Kind.SELF_PARALLEL), SELF_PARALLEL)
    # right-only swallows never touch the word, so their lengths are aggregated
    add(PeelEvent(Kind.RIGHT_ONE_FRESH, 1), ODD_TOTAL)
    add(PeelEvent(Kind.RIGHT_NO_FRESH, 2), QPRIME_TOTAL)
    for k in range(1, W):
        if k % 2:
            add(PeelEvent(Kind.LEFT_ONE_FRESH, k), table.qk(k))
            # two-sided swallows with left length k, summed over the right length
            add(PeelEvent(Kind.BOTH_SIDES, 1, k), table.qk(k) / 3)
        else:
            add(PeelEvent(Kind.LEFT_NO_FRESH, k), table.qprime(k))
    reset = Fraction(4, 3) * table.tail_odd(W) + table.tail_qprime(W)
    acc = row.setdefault(BLACK, [Fraction(0)] * 3)
    acc[0] += reset
    return row


@dataclass(frozen=True)
class ChainStructure:
    """Polynomial transition coefficients of the K-truncated chain."""

    space: StateSpace
    rows: tuple[dict[int, Poly], ...]
    coeff: tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]
    table: WeightTable

    def exact_matrix(self, p: Fraction) -> list[dict[int, Fraction]]:
        return [{j: c[0] + c[1] * p + c[2] * p * p for j, c in row.items()} for row in self.rows]

    def float_matrix(self, p: float) -> sp.csr_matrix:
        c0, c1, c2 = self.coeff
        return (c0 + p * c1 + (p * p) * c2).tocsr()


@lru_cache(maxsize=32)
def chain_structure(K: int, cutoff: int | None = None) -> ChainStructure:
    space = enumerate_states(K)
    table = build_weight_table(max(cutoff or 2 * K, K + 1, 2))
    rows = []
    for w in space.states:
        row = _row(w, K, table)
        rows.append({space.index[t]: tuple(c) for t, c in row.items()})
    n = len(space)
    mats = []
    for i in range(3):
        r, c, v = [], [], []
        for s, row in enumerate(rows):
            for t, poly in row.items():
                if poly[i]:
                    r.append(s)
                    c.append(t)
                    v.append(float(poly[i]))
        mats.append(sp.csr_matrix((v, (r, c)), shape=(n, n)))
    return ChainStructure(space, tuple(rows), tuple(mats), table)


@dataclass(frozen=True)
class TransitionMatrix:
    space: StateSpace
    p: Number
    exact: list | None  # rows as {target index: Fraction} when p is rational
    sparse: sp.csr_matrix

    def row_sums(self):
        if self.exact is not None:
            return [sum(r.values(), Fraction(0)) for r in self.exact]
        return np.asarray(self.sparse.sum(axis=1)).ravel()

    def entry(self, src: str, dst: str) -> Number:
        i, j = self.space.index[src], self.space.index[dst]
        if self.exact is not None:
            return self.exact[i].get(j, Fraction(0))
        return self.sparse[i, j]


class RowSumError(ArithmeticError):
    pass


def build_transition_matrix(space: StateSpace | int, p: Number,
                            table: WeightTable | None = None) -> TransitionMatrix:
    """Transition matrix at ``p``; exact when ``p`` is a Fraction or int."""
    K = space if isinstance(space, int) else space.K
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if table is not None and table.cutoff < K + 1:
        raise ValueError("weight table cutoff must be at least K + 1")
    cs = chain_structure(K, None if table is None else table.cutoff)
    if isinstance(p, (Fraction, int)):
        p = Fraction(p)
        exact = cs.exact_matrix(p)
        for i, r in enumerate(exact):
            total = sum(r.values(), Fraction(0))
            if total != 1 or any(v < 0 for v in r.values()):
                raise RowSumError(f"row {cs.space.states[i]} sums to {total}")
        return TransitionMatrix(cs.space, p, exact, cs.float_matrix(float(p)))
    return TransitionMatrix(cs.space, float(p), None, cs.float_matrix(float(p)))


@dataclass(frozen=True)
class StationaryDist:
    space: StateSpace
    pi: np.ndarray
    residual: float
    exact: tuple[Fraction, ...] | None = None

    def __getitem__(self, word: str) -> float:
        return float(self.pi[self.space.index[word]])


def _exact_solve(rows: list[dict[int, Fraction]], n: int) -> list[Fraction]:
    # pi (P - I) = 0 with sum(pi) = 1, by Gauss-Jordan elimination on the transpose
    a = [[Fraction(0)] * (n + 1) for _ in range(n)]
    for i, r in enumerate(rows):
        for j, v in r.items():
            a[j][i] += v
    for i in range(n):
        a[i][i] -= 1
    a[n - 1] = [Fraction(1)] * n + [Fraction(1)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def _power(P: sp.csr_matrix, tol: float, max_iter: int) -> np.ndarray:
    n = P.shape[0]
    PT = P.T.tocsr()
    x = np.full(n, 1.0 / n)
    avg = np.zeros(n)
    for it in range(1, max_iter + 1):
        x = PT @ x
        avg += (x - avg) / it  # Cesaro mean guards against periodicity
        if it % 50 == 0:
            cand = avg / avg.sum()
            if np.max(np.abs(PT @ cand - cand)) <= tol:
                return cand
    raise NumericalFailure(f"power iteration did not reach residual {tol} in {max_iter} steps")


DIRECT_MAX = 1000


def _pinned_system(P: sp.csr_matrix) -> tuple[sp.csc_matrix, np.ndarray]:
    # fix pi[0] = 1 and solve the remaining balance equations
    n = P.shape[0]
    A = (P.T - sp.identity(n, format="csr")).tocsc()
    return A[1:, 1:].tocsc(), -A[1:, 0].toarray().ravel()


def stationary(matrix: TransitionMatrix, tol: float = 1e-12, exact: bool = False,
               max_iter: int = 200_000) -> StationaryDist:
    """Stationary law of the chain.

    Small chains use a sparse direct solve and large ones BiCGSTAB, both on
    the balance equations with the weight of ``"b"`` pinned.  If the
    residual ``max|pi P - pi|`` misses ``tol`` the result is recomputed by
    power iteration.  ``exact=True`` additionally solves in rational
    arithmetic (rational ``p`` only; meant for small K).
    """
    P = matrix.sparse
    n = P.shape[0]
    if n == 1:
        pi = np.ones(1)
    else:
        B, rhs = _pinned_system(P)
        if n <= DIRECT_MAX:
            x = spla.spsolve(B, rhs)
        else:
            x, _ = spla.bicgstab(B, rhs, rtol=1e-15, atol=0.0, maxiter=20_000)
        pi = np.concatenate([[1.0], np.asarray(x, dtype=float)])
        pi /= pi.sum()
    resid = float(np.max(np.abs(P.T @ pi - pi)))
    if not np.all(np.isfinite(pi)) or resid > tol or pi.min() < -tol:
        pi = _power(P, tol, max_iter)
        resid = float(np.max(np.abs(P.T @ pi - pi)))
        if resid > tol:
            raise NumericalFailure(f"stationary residual {resid} above {tol}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    ex = None
    if exact:
        if matrix.exact is None:
            raise ValueError("exact stationary solve needs a rational p")
        ex = tuple(_exact_solve(matrix.exact, n))
    return StationaryDist(matrix.space, pi, resid, ex)


@dataclass(frozen=True)
class MarginalReport:
    """``m[j]``: probability the word has a white at position j (1-based);
    ``u[j]``: probability the word is shorter than j.  Indices 1..K+1."""

    m: np.ndarray
    u: np.ndarray


@lru_cache(maxsize=32)
def _position_masks(K: int) -> tuple[np.ndarray, np.ndarray]:
    space = enumerate_states(K)
    n = len(space)
    white = np.zeros((K + 2, n))
    short = np.zeros((K + 2, n))
    for s, w in enumerate(space.states):
        for j in range(1, K + 2):
            if j <= len(w):
                white[j, s] = w[j - 1] == WHITE
            else:
                short[j, s] = 1.0
    return white, short


def marginals(dist: StationaryDist) -> MarginalReport:
    white, short = _position_masks(dist.space.K)
    return MarginalReport(white @ dist.pi, short @ dist.pi)


@lru_cache(maxsize=32)
def _drift_coefficients(K: int, cutoff: int) -> tuple[np.ndarray, np.ndarray, float, float]:
    # beta weights per left length k (1..K-1): odd k use q_k, even k use q'_k
    table = build_weight_table(cutoff)
    odd = np.zeros(K + 1)
    even = np.zeros(K + 1)
    for k in range(1, K):
        if k % 2:
            odd[k] = float(table.qk(k))
        else:
            even[k] = float(table.qprime(k))
    return odd, even, float(table.tail_odd(K)), float(table.tail_qprime(K))


def alpha_base(p: float) -> float:
    return 0.375 * p * p + 0.625 * p - 0.5


@dataclass(frozen=True)
class AlphaBounds:
    p: float
    K: int
    alpha_lb: float
    alpha_ub: float
    beta_lb: float
    beta_ub: float
    residual: float


def alpha_bounds(p: float, K: int, cutoff: int | None = None) -> AlphaBounds:
    """Lower and upper drift bounds from the K-truncated chain.

    The lower bound extends stationary words by black letters, the upper
    bound by iid(p) letters.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must be in [0, 1], got {p}")
    cutoff = max(cutoff or 2 * K, K + 1, 2)
    if K == 1:
        m = np.zeros(3)
        u = np.array([0.0, 0.0, 1.0])
        resid = 0.0
    else:
        dist = stationary(build_transition_matrix(K, float(p)))
        rep = marginals(dist)
        m, u, resid = rep.m, rep.u, dist.residual
    odd, even, t_odd, t_qp = _drift_coefficients(K, cutoff)
    coef = (p + 1 / 3) * odd + even  # index k
    ks = np.arange(1, K)
    lower = float(np.dot(coef[ks], m[ks + 1]))
    upper = float(np.dot(coef[ks], m[ks + 1] + p * u[ks + 1]))
    upper += p * ((p + 1 / 3) * t_odd + t_qp)
    base = alpha_base(p)
    return AlphaBounds(float(p), K, base + lower, base + upper, lower, upper, resid)
