"""Exact peeling weights of the half-planar quadrangulation.

All quantities are :class:`fractions.Fraction`. The constants are the
growth rate ``RHO = 12`` and the squared boundary constant ``A2 = 54``.
Floating views are produced only by :func:`float_tables`, used by the
Monte Carlo sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

RHO = 12
A2 = 54

Q_MINUS_ONE = Fraction(3, 8)
ODD_TOTAL = Fraction(1, 8)
PAIR_TOTAL = Fraction(1, 24)
QPRIME_TOTAL = Fraction(1, 18)
SELF_PARALLEL = Fraction(2, 9)


class WeightConsistencyError(RuntimeError):
    """A partial sum reached or exceeded its closed-form total."""


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def partition_Z(m: int) -> Fraction:
    """Boundary partition function ``Z(2m)`` at the critical weight 1/12.

    ``Z(2) = 4/3`` by convention; for ``m >= 2`` the closed form
    ``8^m (3m-4)! / ((m-2)! (2m)!)`` is evaluated exactly.
    """
    if m < 1:
        raise ValueError(f"partition_Z needs m >= 1, got {m}")
    if m == 1:
        return Fraction(4, 3)
    return Fraction(
        8**m * math.factorial(3 * m - 4),
        math.factorial(m - 2) * math.factorial(2 * m),
    )


def z_ratio(m: int) -> Fraction:
    """``Z(2(m+1)) / Z(2m)`` without forming factorials."""
    if m < 1:
        raise ValueError(f"z_ratio needs m >= 1, got {m}")
    if m == 1:
        return Fraction(4)
    return Fraction(
        8 * (3 * m - 1) * (3 * m - 2) * (3 * m - 3),
        (m - 1) * (2 * m + 1) * (2 * m + 2),
    )


def q_value(k: int) -> Fraction:
    """Single-vertex weight ``q_k``; ``q_{-1} = 3/8`` and ``q_{2j} = q_{2j+1}``."""
    if k < -1:
        raise ValueError(f"q_value needs k >= -1, got {k}")
    if k == -1:
        return Q_MINUS_ONE
    j = k // 2
    return partition_Z(j + 1) / (RHO * Fraction(A2) ** j)


def _check_odd(k: int, name: str) -> None:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"{name} must be an odd positive integer, got {k}")


def qq_value(k1: int, k2: int) -> Fraction:
    """Two-sided swallow weight ``q_{k1,k2} = (8/3) q_{k1} q_{k2}`` for odd k1, k2."""
    _check_odd(k1, "k1")
    _check_odd(k2, "k2")
    return Fraction(8, 3) * q_value(k1) * q_value(k2)


def qprime_value(k: int) -> Fraction:
    if k < 2 or k % 2:
        raise ValueError(f"qprime_value needs an even k >= 2, got {k}")
    total = q_value(k)
    for k1 in range(1, k, 2):
        total += qq_value(k1, k - k1)
    return total


class WeightTable:
    """Exact weights ``q_k`` for ``-1 <= k <= cutoff`` and ``q'_k`` for even ``k``.

    Tails are closed-form totals minus exact partial sums: ``tail_odd(m)``
    is the mass of ``q_k`` over odd ``k >= m`` and ``tail_qprime(m)`` the
    mass of ``q'_k`` over even ``k >= m``; both accept ``m <= cutoff + 2``.
    ``q'`` entries and their tails are computed on first use and cached,
    because the pair convolution is quadratic in the cutoff.
    """

    def __init__(self, cutoff: int):
        if cutoff < 2:
            raise ValueError(f"cutoff must be >= 2, got {cutoff}")
        self.cutoff = cutoff
        # even[j] = q_{2j} = q_{2j+1}; one extra entry so q_{cutoff+1} exists
        even = [Fraction(4, 3) / RHO]
        for j in range(1, cutoff // 2 + 2):
            even.append(even[-1] * z_ratio(j) / A2)
        self._even = even
        self.q = (Q_MINUS_ONE, *(even[k // 2] for k in range(cutoff + 1)))
        # _cum_odd[j] = sum of q_{2i+1} for i < j
        cum = [Fraction(0)]
        for x in even:
            cum.append(cum[-1] + x)
        self._cum_odd = cum
        last = cum[(cutoff + 1) // 2 + 1]
        if last >= ODD_TOTAL:
            raise WeightConsistencyError(f"odd partial sum reached 1/8 by k={cutoff + 1}")
        self._qprime: dict[int, Fraction] = {}
        self._tail_qprime: dict[int, Fraction] = {2: QPRIME_TOTAL}

    @property
    def selfparallel_mass(self) -> Fraction:
        return SELF_PARALLEL

    def qk(self, k: int) -> Fraction:
        if not -1 <= k <= self.cutoff:
            raise IndexError(f"q_{k} is outside the table (cutoff {self.cutoff})")
        return self.q[k + 1]

    def qq(self, k1: int, k2: int) -> Fraction:
        _check_odd(k1, "k1")
        _check_odd(k2, "k2")
        return Fraction(8, 3) * self.qk(k1) * self.qk(k2)

    def qprime(self, k: int) -> Fraction:
        if k < 2 or k % 2 or k > self.cutoff + 1:
            raise IndexError(f"q'_{k} is undefined or outside the table")
        if k not in self._qprime:
            half = k // 2
            even = self._even
            conv = sum((even[a] * even[half - 1 - a] for a in range(half)), Fraction(0))
            self._qprime[k] = even[half] + Fraction(8, 3) * conv
        return self._qprime[k]

    def odd_partial(self, m: int) -> Fraction:
        """Sum of ``q_k`` over odd ``k < m``."""
        return self._cum_odd[max(m, 0) // 2]

    def tail_odd(self, m: int) -> Fraction:
        if m > self.cutoff + 2:
            raise IndexError(f"tail_odd({m}) needs a larger cutoff than {self.cutoff}")
        return ODD_TOTAL - self.odd_partial(m)

    def pair_partial(self, m: int) -> Fraction:
        """Sum of ``q_{k1,k2}`` over odd ``k1, k2`` with ``k1 + k2 < m``."""
        total = Fraction(0)
        even, cum = self._even, self._cum_odd
        for a in range(max(m - 1, 0) // 2):
            # k1 = 2a+1, partner k2 < m - k1
            total += even[a] * cum[(m - 2 * a - 1) // 2]
        return Fraction(8, 3) * total

    def tail_qprime(self, m: int) -> Fraction:
        m = max(m, 2)
        if m % 2:
            m += 1
        if m > self.cutoff + 2:
            raise IndexError(f"tail_qprime({m}) needs a larger cutoff than {self.cutoff}")
        if m not in self._tail_qprime:
            # sum_{even k < m} q'_k = sum_{even 2<=k<m} q_k + pairs with k1+k2 < m
            evens = self._cum_odd[m // 2] - self._even[0]
            tail = QPRIME_TOTAL - evens - self.pair_partial(m)
            if tail <= 0:
                raise WeightConsistencyError(f"q' partial sum reached 1/18 below k={m}")
            self._tail_qprime[m] = tail
        return self._tail_qprime[m]


@lru_cache(maxsize=16)
def build_weight_table(cutoff: int) -> WeightTable:
    """Exact table up to ``cutoff``, built with the ``z_ratio`` recurrence."""
    return WeightTable(cutoff)


@dataclass(frozen=True)
class FloatTables:
    """Float64 weights for sampling, indexed by ``j`` with ``k = 2j+1`` / ``k = 2j+2``."""

    cutoff: int
    q_odd: np.ndarray
    qprime_even: np.ndarray
    tail_odd: float  # odd k > cutoff
    tail_qprime: float  # even k > cutoff


def float_tables(cutoff: int) -> FloatTables:
    """Float64 weights up to ``cutoff`` for sampling.

    Computed in log space from the ratio recurrence; the q' convolution is
    evaluated with FFT. Tails use the closed-form totals minus
    compensated partial sums.
    """
    if cutoff < 2:
        raise ValueError(f"cutoff must be >= 2, got {cutoff}")
    jmax = (cutoff - 1) // 2  # largest j with 2j+1 <= cutoff
    j = np.arange(1, jmax + 1, dtype=np.float64)
    # log z_ratio(j)/54 for j >= 2, z_ratio(1) = 4
    logr = np.empty(jmax)
    if jmax:
        logr[0] = math.log(4 / A2)
        jj = j[1:]
        logr[1:] = (
            math.log(8)
            + np.log(3 * jj - 1) + np.log(3 * jj - 2) + np.log(3 * jj - 3)
            - np.log(jj - 1) - np.log(2 * jj + 1) - np.log(2 * jj + 2)
            - math.log(A2)
        )
    logq = np.concatenate([[math.log(1 / 9)], math.log(1 / 9) + np.cumsum(logr)])
    q_odd = np.exp(logq)  # q_{2j+1}, j = 0..jmax

    n_even = cutoff // 2  # k = 2, 4, .., 2*n_even
    # q'_{2h} = q_{2h} + (8/3) sum_{a+b=h-1} q_{2a+1} q_{2b+1}
    size = 1
    while size < 2 * len(q_odd):
        size *= 2
    f = np.fft.rfft(q_odd, size)
    conv = np.fft.irfft(f * f, size)[:n_even]
    conv = np.maximum(conv, 0.0)
    qeven = q_odd[1 : n_even + 1] if n_even <= jmax else np.concatenate(
        [q_odd[1:], [math.exp(logq[-1] + _log_ratio(jmax + 1))]]
    )
    qprime = qeven + (8 / 3) * conv
    tail_odd = max(1 / 8 - math.fsum(q_odd), 0.0)
    tail_qp = max(1 / 18 - math.fsum(qprime), 0.0)
    return FloatTables(cutoff, q_odd, qprime, tail_odd, tail_qp)


def _log_ratio(j: int) -> float:
    return math.log(float(z_ratio(j)) / A2)
