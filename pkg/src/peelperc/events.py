"""One peeling step: event taxonomy, masses, colour draws and boundary effects.

Boundary words are strings over ``"b"`` (black) and ``"o"`` (white), with
index 0 being the vertex nearest the peel edge.  A word is admissible when
it starts with ``"b"`` and contains no ``"oo"``.

The integer-only helpers :func:`update_plan` and :func:`front_delta` are
the single source of the update rules.  The truncated chain calls them
directly and the simulator compiles the same functions with numba.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from .weights import (
    ODD_TOTAL,
    PAIR_TOTAL,
    Q_MINUS_ONE,
    QPRIME_TOTAL,
    SELF_PARALLEL,
    WeightTable,
)

BLACK = "b"
WHITE = "o"


class Kind(enum.IntEnum):
    THREE_FRESH = 0
    SELF_PARALLEL = 1
    RIGHT_ONE_FRESH = 2
    LEFT_ONE_FRESH = 3
    RIGHT_NO_FRESH = 4
    LEFT_NO_FRESH = 5
    BOTH_SIDES = 6


EXPOSED = {
    Kind.THREE_FRESH: 3,
    Kind.SELF_PARALLEL: 1,
    Kind.RIGHT_ONE_FRESH: 2,
    Kind.LEFT_ONE_FRESH: 2,
    Kind.RIGHT_NO_FRESH: 1,
    Kind.LEFT_NO_FRESH: 1,
    Kind.BOTH_SIDES: 1,
}

# prepend codes returned by update_plan
PREPEND = ("", "b", "bo", "bb")


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class PeelEvent:
    """A peeling event.  ``k`` is the right swallow for BOTH_SIDES and the
    single swallow length otherwise; ``k2`` is the left swallow of BOTH_SIDES."""

    kind: Kind
    k: int = 0
    k2: int = 0

    def __post_init__(self):
        kind = self.kind
        if kind in (Kind.THREE_FRESH, Kind.SELF_PARALLEL):
            if self.k or self.k2:
                raise ValueError(f"{kind.name} takes no swallow lengths")
        elif kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
            if self.k < 1 or self.k % 2 == 0 or self.k2:
                raise ValueError(f"{kind.name} needs odd k >= 1, got {self.k}")
        elif kind in (Kind.RIGHT_NO_FRESH, Kind.LEFT_NO_FRESH):
            if self.k < 2 or self.k % 2 or self.k2:
                raise ValueError(f"{kind.name} needs even k >= 2, got {self.k}")
        elif kind is Kind.BOTH_SIDES:
            if min(self.k, self.k2) < 1 or self.k % 2 == 0 or self.k2 % 2 == 0:
                raise ValueError(f"BOTH_SIDES needs odd k1, k2 >= 1, got {self.k}, {self.k2}")

    @property
    def exposed(self) -> int:
        return EXPOSED[self.kind]

    @property
    def r_plus(self) -> int:
        if self.kind in (Kind.RIGHT_ONE_FRESH, Kind.RIGHT_NO_FRESH, Kind.BOTH_SIDES):
            return self.k
        return 0

    @property
    def r_minus(self) -> int:
        if self.kind in (Kind.LEFT_ONE_FRESH, Kind.LEFT_NO_FRESH):
            return self.k
        if self.kind is Kind.BOTH_SIDES:
            return self.k2
        return 0

    @property
    def left_index(self) -> Optional[int]:
        """Left swallow length if the update reads the boundary, else None."""
        return self.r_minus or None


@dataclass(frozen=True)
class ColourDraw:
    """Colours of the fresh vertices.

    ``zeta`` counts consecutive fresh whites from the right (THREE_FRESH),
    ``chi`` is the colour of the single fresh vertex (1 = white), and
    ``inner`` is the colour of the left fresh vertex when ``zeta == 0``.
    """

    zeta: Optional[int] = None
    chi: Optional[int] = None
    inner: Optional[str] = None


def is_admissible(w: str) -> bool:
    return bool(w) and w[0] == BLACK and "oo" not in w and set(w) <= {BLACK, WHITE}


def update_plan(kind: int, zeta: int, chi: int, inner_white: int, next_white: int,
                left: int) -> tuple[int, int]:
    """Number of leading letters to drop and the prepend code (index into PREPEND).

    ``left`` is the left swallow length and ``next_white`` the colour of
    the letter just past it; both are ignored by non-left events.
    """
    if kind == 0:
        if zeta == 2:
            return 0, 0
        if zeta == 1:
            return 0, 1
        return 0, 2 if inner_white else 3
    if kind == 1 or kind == 4:
        return 0, 0
    if kind == 2:
        return 0, 0 if chi else 1
    if kind == 3:
        if chi:
            return left + next_white, 0
        return left, 1
    # LEFT_NO_FRESH and BOTH_SIDES
    return left + next_white, 0


def front_delta(kind: int, right: int, zeta: int, chi: int, next_white: int) -> int:
    """Increment of the unstopped front counter for one step."""
    if kind == 0:
        return zeta
    if kind == 1:
        return 0
    if kind == 2:
        return chi - right
    if kind == 3:
        return chi * (1 + next_white)
    if kind == 4:
        return -right
    if kind == 5:
        return next_white
    return next_white - right


def _draw_ints(e: PeelEvent, d: ColourDraw) -> tuple[int, int, int]:
    kind = e.kind
    if kind is Kind.THREE_FRESH:
        if d.zeta not in (0, 1, 2):
            raise ValueError("THREE_FRESH needs zeta in {0, 1, 2}")
        if d.zeta == 0 and d.inner not in (BLACK, WHITE):
            raise ValueError("THREE_FRESH with zeta=0 needs the inner colour")
        return d.zeta, 0, int(d.inner == WHITE)
    if kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        if d.chi not in (0, 1):
            raise ValueError(f"{kind.name} needs chi in {{0, 1}}")
        return 0, d.chi, 0
    return 0, 0, 0


def boundary_update(w: str, e: PeelEvent, d: ColourDraw = ColourDraw(),
                    K: Optional[int] = None) -> str:
    """Apply one step to a finite word, truncating to ``K`` letters.

    A left swallow reaching past the stored word (``r_minus >= len(w)``)
    resets the word to ``"b"``.
    """
    if not is_admissible(w):
        raise AdmissibilityError(f"inadmissible boundary word {w!r}")
    left = e.r_minus
    if left and left >= len(w):
        return BLACK
    zeta, chi, inner = _draw_ints(e, d)
    nxt = int(left > 0 and w[left] == WHITE)
    drop, pre = update_plan(int(e.kind), zeta, chi, inner, nxt, left)
    out = PREPEND[pre] + w[drop:]
    if not out:
        out = BLACK
    return out[:K] if K is not None else out


def _next_white(w: str, left: int) -> int:
    # beyond the stored word counts as black
    return int(0 < left < len(w) and w[left] == WHITE)


def shat_increment(w: str, e: PeelEvent, d: ColourDraw = ColourDraw()) -> int:
    """Unstopped front increment; letters beyond ``w`` are read as black."""
    zeta, chi, _ = _draw_ints(e, d)
    return front_delta(int(e.kind), e.r_plus, zeta, chi, _next_white(w, e.r_minus))


def s_increment_ground_truth(S: int, w: str, e: PeelEvent, d: ColourDraw = ColourDraw()) -> int:
    """New front size after one step.

    Agrees with ``S + shat_increment`` except that a right swallow of at
    least ``S`` edges closes the cluster (returns 0).
    """
    if S < 1:
        raise ValueError("the front is already closed (S = 0)")
    if e.r_plus and e.r_plus >= S:
        return 0
    return S + shat_increment(w, e, d)


def event_probability(e: PeelEvent, table: WeightTable) -> Fraction:
    kind = e.kind
    if kind is Kind.THREE_FRESH:
        return Q_MINUS_ONE
    if kind is Kind.SELF_PARALLEL:
        return SELF_PARALLEL
    if kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        return table.qk(e.k)
    if kind in (Kind.RIGHT_NO_FRESH, Kind.LEFT_NO_FRESH):
        return table.qprime(e.k)
    return table.qq(e.k, e.k2)


def draw_probability(e: PeelEvent, d: ColourDraw, p) -> object:
    """Probability of the colour draw ``d`` given ``e`` (``p`` may be a Fraction)."""
    kind = e.kind
    if kind is Kind.THREE_FRESH:
        if d.zeta == 2:
            return p * p
        if d.zeta == 1:
            return p * (1 - p)
        return (1 - p) * (p if d.inner == WHITE else 1 - p)
    if kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        return p if d.chi else 1 - p
    return 1


def colour_draws(e: PeelEvent) -> list[ColourDraw]:
    kind = e.kind
    if kind is Kind.THREE_FRESH:
        return [ColourDraw(zeta=2), ColourDraw(zeta=1),
                ColourDraw(zeta=0, inner=WHITE), ColourDraw(zeta=0, inner=BLACK)]
    if kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        return [ColourDraw(chi=1), ColourDraw(chi=0)]
    return [ColourDraw()]


def events_up_to(n: int) -> Iterator[PeelEvent]:
    """All events whose swallow lengths are at most ``n``."""
    yield PeelEvent(Kind.THREE_FRESH)
    yield PeelEvent(Kind.SELF_PARALLEL)
    for k in range(1, n + 1, 2):
        yield PeelEvent(Kind.RIGHT_ONE_FRESH, k)
        yield PeelEvent(Kind.LEFT_ONE_FRESH, k)
    for k in range(2, n + 1, 2):
        yield PeelEvent(Kind.RIGHT_NO_FRESH, k)
        yield PeelEvent(Kind.LEFT_NO_FRESH, k)
    for k1 in range(1, n + 1, 2):
        for k2 in range(1, n + 1, 2):
            yield PeelEvent(Kind.BOTH_SIDES, k1, k2)


@dataclass(frozen=True)
class MassReport:
    explicit: Fraction  # events with all lengths <= n
    tail: Fraction  # everything else, from closed-form tails
    total: Fraction
    mean_exposed: Fraction


def mass_report(table: WeightTable, n: Optional[int] = None) -> MassReport:
    """Total event mass split into explicit events up to ``n`` and exact tails."""
    n = table.cutoff if n is None else n
    odd_in = table.odd_partial(n + 1)
    qp_in = Fraction(1, 18) - table.tail_qprime(n + 1)
    pair_in = Fraction(8, 3) * odd_in * odd_in
    explicit = Q_MINUS_ONE + SELF_PARALLEL + 2 * odd_in + 2 * qp_in + pair_in
    tail = 2 * (ODD_TOTAL - odd_in) + 2 * (QPRIME_TOTAL - qp_in) + (PAIR_TOTAL - pair_in)
    mean_exposed = (3 * Q_MINUS_ONE + SELF_PARALLEL + 2 * 2 * (odd_in + (ODD_TOTAL - odd_in))
                    + 2 * (qp_in + (QPRIME_TOTAL - qp_in)) + pair_in + (PAIR_TOTAL - pair_in))
    return MassReport(explicit, tail, explicit + tail, mean_exposed)


class MomentError(AssertionError):
    pass


@dataclass(frozen=True)
class MomentReport:
    cutoff: int
    total_mass: Fraction
    mean_exposed: Fraction
    mean_right_partial: Fraction
    mean_right_gap: Fraction
    gap_bound: float


def moment_checks(table: WeightTable, n: Optional[int] = None) -> MomentReport:
    """Check total mass, ``E(E) = 2`` and the partial sums of ``E(R+)``.

    The right-swallow mean is summed exactly over events with all lengths
    at most ``n``; its gap to 1/2 must be positive and below
    ``1/sqrt(n)``, a bound from ``q_k k^{5/2} <= 0.2``.
    """
    n = table.cutoff if n is None else n
    rep = mass_report(table, n)
    if rep.total != 1:
        raise MomentError(f"event masses sum to {rep.total}, not 1")
    if rep.mean_exposed != 2:
        raise MomentError(f"E(E) = {rep.mean_exposed}, not 2")
    q = table.qk
    odd_sum = table.odd_partial(n + 1)
    right_one = sum((k * q(k) for k in range(1, n + 1, 2)), Fraction(0))
    # even swallows: q_k part plus pairs (k1 + k2 <= n), symmetric in k1, k2
    even_single = sum((k * q(k) for k in range(2, n + 1, 2)), Fraction(0))
    pairs = sum((k1 * q(k1) * table.odd_partial(n - k1 + 1) for k1 in range(1, n, 2)),
                Fraction(0))
    right_no = even_single + Fraction(16, 3) * pairs
    both = Fraction(8, 3) * right_one * odd_sum
    partial = right_one + right_no + both
    gap = Fraction(1, 2) - partial
    bound = n ** -0.5
    if not 0 < gap <= bound:
        raise MomentError(f"E(R+) partial sum {float(partial)} is not within {bound} below 1/2")
    return MomentReport(n, rep.total, rep.mean_exposed, partial, gap, bound)
