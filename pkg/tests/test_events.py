from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from peelperc.events import (
    AdmissibilityError,
    ColourDraw,
    Kind,
    MomentError,
    PeelEvent,
    boundary_update,
    colour_draws,
    draw_probability,
    event_probability,
    events_up_to,
    is_admissible,
    mass_report,
    moment_checks,
    s_increment_ground_truth,
    shat_increment,
)
from peelperc.weights import build_weight_table

T = build_weight_table(40)
W, B = "o", "b"


def ev(kind, k=0, k2=0):
    return PeelEvent(Kind[kind], k, k2)


@st.composite
def words(draw, max_len=12):
    n = draw(st.integers(1, max_len))
    out = B
    for _ in range(n - 1):
        out += B if out[-1] == W else draw(st.sampled_from([B, W]))
    return out


@st.composite
def event_and_draw(draw, max_k=15):
    kind = draw(st.sampled_from(list(Kind)))
    odd = st.integers(0, (max_k - 1) // 2).map(lambda j: 2 * j + 1)
    even = st.integers(1, max_k // 2).map(lambda j: 2 * j)
    if kind in (Kind.THREE_FRESH, Kind.SELF_PARALLEL):
        e = PeelEvent(kind)
    elif kind in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        e = PeelEvent(kind, draw(odd))
    elif kind in (Kind.RIGHT_NO_FRESH, Kind.LEFT_NO_FRESH):
        e = PeelEvent(kind, draw(even))
    else:
        e = PeelEvent(kind, draw(odd), draw(odd))
    return e, draw(st.sampled_from(colour_draws(e)))


# examples for the update rules
@pytest.mark.parametrize("w, e, d, K, want", [
    ("b", ev("THREE_FRESH"), ColourDraw(zeta=0, inner=W), 2, "bo"),
    ("bo", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=0), 2, "bo"),
    ("bbo", ev("LEFT_NO_FRESH", 2), ColourDraw(), 3, "b"),
    ("bob", ev("THREE_FRESH"), ColourDraw(zeta=2), 5, "bob"),
    ("bob", ev("THREE_FRESH"), ColourDraw(zeta=1), 5, "bbob"),
    ("bob", ev("THREE_FRESH"), ColourDraw(zeta=0, inner=B), 3, "bbb"),
    ("bob", ev("SELF_PARALLEL"), ColourDraw(), 3, "bob"),
    ("bob", ev("RIGHT_ONE_FRESH", 3), ColourDraw(chi=1), 3, "bob"),
    ("bob", ev("RIGHT_ONE_FRESH", 3), ColourDraw(chi=0), 3, "bbo"),
    ("bbob", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=1), 4, "bob"),
    ("bob", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=1), 4, "b"),
    ("bobb", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=1), 4, "bb"),
    ("bob", ev("RIGHT_NO_FRESH", 2), ColourDraw(), 3, "bob"),
    ("bbbob", ev("LEFT_NO_FRESH", 2), ColourDraw(), 5, "bob"),
    ("bbob", ev("BOTH_SIDES", 5, 1), ColourDraw(), 4, "bob"),
    ("bobb", ev("BOTH_SIDES", 1, 1), ColourDraw(), 4, "bb"),
    ("bob", ev("LEFT_NO_FRESH", 4), ColourDraw(), 3, "b"),  # reset
    ("bo", ev("BOTH_SIDES", 1, 3), ColourDraw(), 2, "b"),  # reset
])
def test_update_examples(w, e, d, K, want):
    assert boundary_update(w, e, d, K) == want


def test_inadmissible_input_rejected():
    for w in ("", "o", "boo", "bx"):
        with pytest.raises(AdmissibilityError):
            boundary_update(w, ev("SELF_PARALLEL"))


@pytest.mark.parametrize("kind, k, k2", [
    ("THREE_FRESH", 1, 0), ("RIGHT_ONE_FRESH", 2, 0), ("LEFT_NO_FRESH", 3, 0),
    ("BOTH_SIDES", 2, 1), ("BOTH_SIDES", 1, 0),
])
def test_event_parity_errors(kind, k, k2):
    with pytest.raises(ValueError):
        ev(kind, k, k2)


@given(words(), event_and_draw(), st.integers(1, 12))
def test_update_preserves_admissibility(w, ed, K):
    e, d = ed
    out = boundary_update(w, e, d, K)
    assert is_admissible(out)
    assert len(out) <= K


@given(words(), event_and_draw())
def test_exposed_and_swallow_counts(w, ed):
    e, _ = ed
    assert e.exposed == {0: 3, 2: 2, 3: 2}.get(int(e.kind), 1)
    assert e.r_plus >= 0 and e.r_minus >= 0


def test_front_increments():
    assert shat_increment("b", ev("THREE_FRESH"), ColourDraw(zeta=2)) == 2
    assert shat_increment("b", ev("SELF_PARALLEL")) == 0
    assert shat_increment("b", ev("RIGHT_ONE_FRESH", 3), ColourDraw(chi=1)) == -2
    assert shat_increment("bo", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=1)) == 2
    assert shat_increment("bo", ev("LEFT_ONE_FRESH", 1), ColourDraw(chi=0)) == 0
    assert shat_increment("b", ev("RIGHT_NO_FRESH", 4)) == -4
    assert shat_increment("bbo", ev("LEFT_NO_FRESH", 2)) == 1
    assert shat_increment("bbo", ev("BOTH_SIDES", 3, 1)) == -3
    assert shat_increment("bob", ev("BOTH_SIDES", 3, 1)) == -2
    # letters beyond the stored word read as black
    assert shat_increment("b", ev("LEFT_NO_FRESH", 6)) == 0


@given(words(), event_and_draw(), st.integers(1, 30))
def test_ground_truth_agrees_until_kill(w, ed, S):
    e, d = ed
    new = s_increment_ground_truth(S, w, e, d)
    if e.r_plus >= S and e.r_plus > 0:
        assert new == 0
    else:
        assert new == S + shat_increment(w, e, d)


def test_ground_truth_kill_example():
    assert s_increment_ground_truth(1, "b", ev("RIGHT_NO_FRESH", 2)) == 0
    with pytest.raises(ValueError):
        s_increment_ground_truth(0, "b", ev("SELF_PARALLEL"))


def test_event_probabilities():
    assert event_probability(ev("THREE_FRESH"), T) == F(3, 8)
    assert event_probability(ev("SELF_PARALLEL"), T) == F(2, 9)
    assert event_probability(ev("RIGHT_ONE_FRESH", 1), T) == F(1, 9)
    assert event_probability(ev("LEFT_NO_FRESH", 2), T) == F(10, 243)
    assert event_probability(ev("BOTH_SIDES", 1, 1), T) == F(8, 243)


@pytest.mark.parametrize("p", [F(0), F(1, 3), F(5, 9), F(1)])
def test_draw_probabilities_sum_to_one(p):
    for e in (ev("THREE_FRESH"), ev("LEFT_ONE_FRESH", 1), ev("BOTH_SIDES", 1, 1)):
        assert sum(draw_probability(e, d, p) for d in colour_draws(e)) == 1


def test_explicit_events_match_mass_report():
    n = 12
    explicit = sum((event_probability(e, T) for e in events_up_to(n)), F(0))
    rep = mass_report(T, n)
    # the report counts pairs with k1, k2 <= n as explicit, like events_up_to
    assert explicit == rep.explicit
    assert rep.total == 1
    assert rep.mean_exposed == 2


def test_no_right_swallow_single_edge_mass():
    # P(E = 1, no swallow) = 2/9 + 1/18 reading of the displayed 5/18
    assert F(2, 9) + F(1, 18) == F(5, 18)


def test_moment_partial_sums():
    rep = moment_checks(build_weight_table(2000), 2000)
    assert rep.total_mass == 1 and rep.mean_exposed == 2
    assert 0 < rep.mean_right_gap <= rep.gap_bound
    assert float(rep.mean_right_partial) == pytest.approx(0.4897015048642492, abs=1e-12)


def test_moment_check_rejects_broken_table():
    t = build_weight_table(200)

    class Broken(type(t)):
        pass

    b = Broken(200)
    b.q = (b.q[0], b.q[1], b.q[2] * 2, *b.q[3:])  # doubles q_1
    with pytest.raises(MomentError):
        moment_checks(b, 200)
