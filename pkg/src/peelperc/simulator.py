"""Seeded Monte Carlo simulation of peeling with percolation.

Events are sampled in chunks with numpy and applied by a numba kernel
that compiles :func:`peelperc.events.update_plan` and
:func:`peelperc.events.front_delta`, so the exact chain and the simulator
share one set of update rules.

The boundary is stored as a stack: ``buf[n - j]`` is the colour of
position ``j`` (1 = next to the peel edge).  Positions past the stack are
generated lazily by the extension policy.  Both policies are admissible
Markov sequences: after a white comes a black, after a black a white with
probability ``q`` (``q = 0`` for ``all_black``, ``q = p`` for ``iid``).
A swallow that jumps past the stack samples the colour it lands on from
the ``t``-step law of that sequence, so long swallows cost O(1).

RNG splitting rule: replica ``r`` uses
``Generator(PCG64(SeedSequence(seed).spawn(replicas)[r]))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import events
from .events import ColourDraw, Kind, PeelEvent
from .weights import FloatTables, float_tables

DEFAULT_CUTOFF = 2**20
CHUNK = 1 << 16
BURN_IN = 10_000
MIN_DRIFT_STEPS = 100_000

KIND_MASSES = np.array([3 / 8, 2 / 9, 1 / 8, 1 / 8, 1 / 18, 1 / 18, 1 / 24])

_plan = njit(cache=True)(events.update_plan)
_delta = njit(cache=True)(events.front_delta)

# state vector slots
N_LEN, S_TRUE, S_HAT, STEP, ALIVE, DIVERGE, DEATH, FIRST_MISMATCH, FIRST_KILL = range(9)
STATE_SIZE = 9


@njit(cache=True)
def _white_after(prev_white, t, q, u):
    # colour t steps past a letter of colour prev_white in the admissible chain
    pi = q / (1.0 + q)
    decay = (-q) ** t
    if prev_white:
        pw = pi + (1.0 - pi) * decay
    else:
        pw = pi * (1.0 - decay)
    return 1 if u < pw else 0


@njit(cache=True)
def _extend_bottom(buf, st, upto, q, ext_u, ext_pos):
    # materialise positions n+1 .. upto by shifting the stack up
    n = st[N_LEN]
    extra = upto - n
    if extra <= 0:
        return ext_pos
    for i in range(n - 1, -1, -1):
        buf[i + extra] = buf[i]
    prev = buf[extra]  # colour of old position n
    for i in range(extra - 1, -1, -1):
        c = _white_after(prev, 1, q, ext_u[ext_pos])
        ext_pos += 1
        buf[i] = c
        prev = c
    st[N_LEN] = upto
    return ext_pos


@njit(cache=True)
def _run(kind, kk, kk2, zeta, chi, inner, ext_u, buf, st, q, stop_on_death,
         batch_size, batch_sums, marg_from, marg_sums, marg_batch, marg_batch_sums):
    ext_pos = 0
    m = kind.shape[0]
    nmarg = marg_sums.shape[0]
    for i in range(m):
        if stop_on_death and st[ALIVE] == 0:
            return i, ext_pos
        kd = kind[i]
        left = 0
        right = 0
        if kd == 3 or kd == 5:
            left = kk[i]
        elif kd == 6:
            left = kk2[i]
            right = kk[i]
        elif kd == 2 or kd == 4:
            right = kk[i]
        n = st[N_LEN]
        nw = 0
        jumped = False
        if left > 0:
            if left + 1 <= n:
                nw = buf[n - left - 1]
            else:
                nw = _white_after(buf[0], left + 1 - n, q, ext_u[ext_pos])
                ext_pos += 1
                jumped = True
        drop, pre = _plan(kd, zeta[i], chi[i], inner[i], nw, left)
        if jumped:
            n = 0
            # first surviving letter: position left+1, or the black after it
            buf[0] = nw if drop == left else 0
            n = 1
        elif drop > 0:
            bottom = buf[0]
            n -= drop
            if n == 0:
                buf[0] = _white_after(bottom, 1, q, ext_u[ext_pos])
                ext_pos += 1
                n = 1
        if pre == 1:
            buf[n] = 0
            n += 1
        elif pre == 2:
            buf[n] = 1
            buf[n + 1] = 0
            n += 2
        elif pre == 3:
            buf[n] = 0
            buf[n + 1] = 0
            n += 2
        st[N_LEN] = n

        d = _delta(kd, right, zeta[i], chi[i], nw)
        step = st[STEP]
        st[S_HAT] += d
        if st[ALIVE] == 1:
            if right > 0 and right >= st[S_TRUE]:
                st[S_TRUE] = 0
                st[ALIVE] = 0
                st[DEATH] = step + 1
                if st[FIRST_KILL] < 0:
                    st[FIRST_KILL] = step + 1
            else:
                st[S_TRUE] += d
        if st[FIRST_MISMATCH] < 0 and st[S_TRUE] != st[S_HAT]:
            st[FIRST_MISMATCH] = step + 1
        if (st[S_TRUE] > 0) != (st[S_HAT] > 0):
            st[DIVERGE] += 1
        if batch_size > 0:
            batch_sums[step // batch_size] += d
        if nmarg > 0 and step >= marg_from:
            if n < nmarg + 1:
                ext_pos = _extend_bottom(buf, st, nmarg + 1, q, ext_u, ext_pos)
                n = st[N_LEN]
            b = (step - marg_from) // marg_batch
            for j in range(nmarg):
                w = buf[n - j - 2]  # position j + 2
                marg_sums[j] += w
                marg_batch_sums[b, j] += w
        st[STEP] = step + 1
    return m, ext_pos


class EventSampler:
    """Samples events and colour draws from the exact law.

    Swallow lengths up to ``cutoff`` come from the float weight table; the
    residual mass beyond it keeps its exact total and is spread over
    ``k > cutoff`` with the ``k^{-5/2}`` power-law shape.
    """

    def __init__(self, p: float, cutoff: int = DEFAULT_CUTOFF, tables: Optional[FloatTables] = None):
        self.p = float(p)
        self.cutoff = cutoff
        t = tables or float_tables(cutoff)
        self.tables = t
        self.kind_cdf = np.cumsum(KIND_MASSES)
        self.kind_cdf[-1] = 1.0
        self.odd_cdf = np.cumsum(t.q_odd) * 8.0  # conditional law given an odd swallow
        self.even_cdf = np.cumsum(t.qprime_even) * 18.0
        self.odd_in = float(self.odd_cdf[-1])
        self.even_in = float(self.even_cdf[-1])
        self.max_odd = 2 * (len(t.q_odd) - 1) + 1
        self.max_even = 2 * len(t.qprime_even)

    @property
    def residual_mass(self) -> float:
        """Probability that some swallow length exceeds the cutoff."""
        t_odd, t_qp = self.tables.tail_odd, self.tables.tail_qprime
        pair_in = (8 / 3) * (1 / 8 - t_odd) ** 2
        return 2 * t_odd + 2 * t_qp + (1 / 24 - pair_in)

    def _lengths(self, rng, size, cdf, inside, kmax, odd):
        u = rng.random(size)
        out = np.searchsorted(cdf, u, side="right")
        inner = u < inside
        ks = (2 * out + 1) if odd else (2 * out + 2)
        far = ~inner
        if far.any():
            v = 1.0 - rng.random(int(far.sum()))
            x = (kmax + 1) * v ** (-2.0 / 3.0)
            x = np.minimum(x, 2.0**62)
            kf = x.astype(np.int64)
            kf = np.where(kf % 2 == (0 if odd else 1), kf + 1, kf)
            ks = ks.astype(np.int64)
            ks[far] = np.maximum(kf, kmax + 2)  # kmax already has the right parity
        return ks.astype(np.int64)

    def sample(self, rng: np.random.Generator, size: int):
        """Arrays ``kind, k, k2, zeta, chi, inner`` for ``size`` steps."""
        p = self.p
        kind = np.searchsorted(self.kind_cdf, rng.random(size), side="right").astype(np.int64)
        kind = np.minimum(kind, 6)
        k = np.zeros(size, dtype=np.int64)
        k2 = np.zeros(size, dtype=np.int64)
        odd1 = (kind == 2) | (kind == 3) | (kind == 6)
        even1 = (kind == 4) | (kind == 5)
        both = kind == 6
        if odd1.any():
            k[odd1] = self._lengths(rng, int(odd1.sum()), self.odd_cdf, self.odd_in, self.max_odd, True)
        if even1.any():
            k[even1] = self._lengths(rng, int(even1.sum()), self.even_cdf, self.even_in, self.max_even, False)
        if both.any():
            k2[both] = self._lengths(rng, int(both.sum()), self.odd_cdf, self.odd_in, self.max_odd, True)
        u = rng.random(size)
        zeta = np.where(u < 1 - p, 0, np.where(u < 1 - p * p, 1, 2)).astype(np.int64)
        chi = (rng.random(size) < p).astype(np.int64)
        inner = (rng.random(size) < p).astype(np.int64)
        return kind, k, k2, zeta, chi, inner


def sample_event(rng: np.random.Generator, sampler: EventSampler) -> tuple[PeelEvent, ColourDraw]:
    kind, k, k2, zeta, chi, inner = sampler.sample(rng, 1)
    return _to_event(int(kind[0]), int(k[0]), int(k2[0]), int(zeta[0]), int(chi[0]), int(inner[0]))


def _to_event(kind, k, k2, zeta, chi, inner):
    kd = Kind(kind)
    if kd in (Kind.THREE_FRESH, Kind.SELF_PARALLEL):
        e = PeelEvent(kd)
    elif kd is Kind.BOTH_SIDES:
        e = PeelEvent(kd, k, k2)
    else:
        e = PeelEvent(kd, k)
    if kd is Kind.THREE_FRESH:
        d = ColourDraw(zeta=zeta, inner=(events.WHITE if inner else events.BLACK) if zeta == 0 else None)
    elif kd in (Kind.RIGHT_ONE_FRESH, Kind.LEFT_ONE_FRESH):
        d = ColourDraw(chi=chi)
    else:
        d = ColourDraw()
    return e, d


def _event_arrays(e: PeelEvent, d: ColourDraw):
    one = lambda v: np.array([v], dtype=np.int64)  # noqa: E731
    return (one(int(e.kind)), one(e.k), one(e.k2), one(d.zeta or 0), one(d.chi or 0),
            one(int(d.inner == events.WHITE)))


class SimState:
    """Full simulation state: boundary stack, fronts and step counter."""

    def __init__(self, policy: str = "all_black", p: float = 0.5, initial: str = "b",
                 capacity: int = 1024):
        if policy not in ("all_black", "iid"):
            raise ValueError(f"unknown extension policy {policy!r}")
        if not events.is_admissible(initial):
            raise events.AdmissibilityError(f"inadmissible initial boundary {initial!r}")
        self.policy = policy
        self.q = 0.0 if policy == "all_black" else float(p)
        self.buf = np.zeros(max(capacity, 2 * len(initial) + 8), dtype=np.int64)
        n = len(initial)
        for j, c in enumerate(initial, start=1):
            self.buf[n - j] = c == events.WHITE
        self.st = np.zeros(STATE_SIZE, dtype=np.int64)
        self.st[N_LEN] = n
        self.st[S_TRUE] = 1
        self.st[S_HAT] = 1
        self.st[ALIVE] = 1
        self.st[DEATH] = -1
        self.st[FIRST_MISMATCH] = -1
        self.st[FIRST_KILL] = -1

    @property
    def S(self) -> int:
        return int(self.st[S_TRUE])

    @property
    def S_hat(self) -> int:
        return int(self.st[S_HAT])

    @property
    def n(self) -> int:
        return int(self.st[STEP])

    @property
    def alive(self) -> bool:
        return bool(self.st[ALIVE])

    def materialized(self) -> str:
        n = int(self.st[N_LEN])
        return "".join(events.WHITE if self.buf[n - j] else events.BLACK for j in range(1, n + 1))

    def reserve(self, extra: int) -> None:
        need = int(self.st[N_LEN]) + extra + 8
        if need > len(self.buf):
            grown = np.zeros(max(need, 2 * len(self.buf)), dtype=np.int64)
            grown[: len(self.buf)] = self.buf
            self.buf = grown


def step(state: SimState, e: PeelEvent, d: ColourDraw = ColourDraw(),
         rng: Optional[np.random.Generator] = None) -> SimState:
    """Advance ``state`` in place by one given event; returns it.

    ``rng`` feeds the lazy boundary extension (only needed for the iid
    policy when the event reads past the stored boundary).
    """
    if not state.alive:
        raise RuntimeError("cannot step a dead state (S = 0)")
    state.reserve(8)
    ext = (rng or np.random.default_rng(0)).random(8)
    _run(*_event_arrays(e, d), ext, state.buf, state.st, state.q, False,
         0, np.zeros(1), 0, np.zeros(0), 1, np.zeros((1, 0)))
    return state


@dataclass
class SimConfig:
    p: float
    steps: int
    replicas: int = 1
    seed: int = 0
    policy: str = "all_black"
    cutoff: int = DEFAULT_CUTOFF
    mode: str = "drift"
    batches: int = 20  # per replica
    burn_in: int = BURN_IN
    positions: int = 3  # marginals at positions 2 .. positions+1
    trajectory_stride: int = 0


@dataclass
class SimStats:
    config: dict
    total_steps: int
    drift_mean: Optional[float] = None
    drift_se: Optional[float] = None
    drift_ci_halfwidth: Optional[float] = None
    n_batches: int = 0
    survival_fraction: Optional[float] = None
    death_time_histogram: dict = field(default_factory=dict)
    marginal_freq: dict = field(default_factory=dict)
    marginal_se: dict = field(default_factory=dict)
    event_counts: dict = field(default_factory=dict)
    proxy_divergence_count: int = 0
    proxy_first_mismatch: list = field(default_factory=list)
    proxy_first_kill: list = field(default_factory=list)
    residual_mass: float = 0.0
    batch_sensitivity: dict = field(default_factory=dict)
    trajectory: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def replica_generators(seed: int, replicas: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(replicas)]


def _batch_stats(batch_means: np.ndarray) -> tuple[float, float]:
    b = len(batch_means)
    return float(batch_means.mean()), float(batch_means.std(ddof=1) / math.sqrt(b))


def run(config: SimConfig, sampler: Optional[EventSampler] = None) -> SimStats:
    """Run the configured experiment; deterministic given the config."""
    cfg = config
    if cfg.mode not in ("drift", "survival", "marginals"):
        raise ValueError(f"unknown mode {cfg.mode!r}")
    if cfg.steps < 1 or cfg.replicas < 1:
        raise ValueError("steps and replicas must be positive")
    if cfg.mode == "drift" and cfg.steps < MIN_DRIFT_STEPS:
        raise ValueError(f"drift mode needs at least {MIN_DRIFT_STEPS} steps per replica")
    if cfg.mode == "drift" and cfg.replicas * cfg.batches < 20:
        raise ValueError("drift mode needs at least 20 batches in total")
    if cfg.mode == "marginals" and cfg.steps <= cfg.burn_in:
        raise ValueError("marginals mode needs more steps than the burn-in")
    sampler = sampler or EventSampler(cfg.p, cfg.cutoff)
    if sampler.p != cfg.p or sampler.cutoff != cfg.cutoff:
        raise ValueError("sampler does not match the configuration")
    stats = SimStats(config=asdict(cfg), total_steps=0, residual_mass=sampler.residual_mass)

    kind_counts = np.zeros(7, dtype=np.int64)
    k1_counts = np.zeros((7, 4), dtype=np.int64)  # counts of k = 1..4 per kind
    drift_batches = []
    marg_batches = []
    marg_sum = np.zeros(cfg.positions)
    marg_n = 0
    deaths = []
    alive_end = 0
    divergence = 0
    stop = cfg.mode == "survival"
    batch_size = max(cfg.steps // cfg.batches, 1) if cfg.mode == "drift" else 0
    npos = cfg.positions if cfg.mode == "marginals" else 0
    meas = cfg.steps - cfg.burn_in if npos else 1
    marg_batch = max(meas // cfg.batches, 1)

    for r, rng in enumerate(replica_generators(cfg.seed, cfg.replicas)):
        state = SimState(cfg.policy, cfg.p, capacity=min(2 * cfg.steps + 16, 1 << 26))
        bsums = np.zeros(cfg.batches + 1) if batch_size else np.zeros(1)
        msums = np.zeros(npos)
        mbatch = np.zeros((cfg.batches + 1, npos))
        done = 0
        while done < cfg.steps and not (stop and not state.alive):
            m = min(CHUNK, cfg.steps - done)
            if cfg.trajectory_stride and r == 0:
                m = min(m, cfg.trajectory_stride - done % cfg.trajectory_stride)
            arrs = sampler.sample(rng, m)
            ext = rng.random(m * (npos + 2) + 8)
            state.reserve(2 * m)
            used, _ = _run(*arrs, ext, state.buf, state.st, state.q, stop,
                           batch_size, bsums, cfg.burn_in if npos else 0, msums, marg_batch, mbatch)
            kd = arrs[0][:used]
            kind_counts += np.bincount(kd, minlength=7)
            for kval in range(1, 5):
                k1_counts[:, kval - 1] += np.bincount(kd[arrs[1][:used] == kval], minlength=7)
            if cfg.trajectory_stride and r == 0 and int(state.st[STEP]) % cfg.trajectory_stride == 0:
                stats.trajectory.append([int(state.st[STEP]), int(state.st[S_TRUE]), int(state.st[S_HAT])])
            done += used
            if used < m:
                break
        stats.total_steps += int(state.st[STEP])
        divergence += int(state.st[DIVERGE])
        stats.proxy_first_mismatch.append(int(state.st[FIRST_MISMATCH]))
        stats.proxy_first_kill.append(int(state.st[FIRST_KILL]))
        if batch_size:
            full = cfg.steps // batch_size
            drift_batches.extend((bsums[:full] / batch_size).tolist())
        if npos:
            full = meas // marg_batch
            marg_batches.extend((mbatch[:full] / marg_batch).tolist())
            marg_sum += msums
            marg_n += meas
        if state.alive:
            alive_end += 1
        else:
            deaths.append(int(state.st[DEATH]))

    stats.proxy_divergence_count = divergence
    stats.event_counts = {
        "total": int(kind_counts.sum()),
        "by_kind": {Kind(i).name: int(c) for i, c in enumerate(kind_counts)},
        "by_kind_and_k": {Kind(i).name: {str(k + 1): int(k1_counts[i, k]) for k in range(4)}
                          for i in (2, 3, 4, 5, 6)},
    }
    if batch_size:
        bm = np.array(drift_batches)
        stats.drift_mean, stats.drift_se = _batch_stats(bm)
        stats.drift_ci_halfwidth = 1.96 * stats.drift_se
        stats.n_batches = len(bm)
        # standard error with batches merged in pairs and fours
        for g in (2, 4):
            nb = len(bm) // g
            if nb >= 5:
                merged = bm[: nb * g].reshape(nb, g).mean(axis=1)
                stats.batch_sensitivity[str(nb)] = _batch_stats(merged)[1]
    if cfg.mode == "survival":
        stats.survival_fraction = alive_end / cfg.replicas
        hist: dict[str, int] = {}
        for t in deaths:
            key = str(1 << max(int(t) - 1, 0).bit_length())  # upper edge of power-of-two bin
            hist[key] = hist.get(key, 0) + 1
        stats.death_time_histogram = dict(sorted(hist.items(), key=lambda kv: int(kv[0])))
    if npos:
        mb = np.array(marg_batches)
        stats.n_batches = len(mb)
        for j in range(npos):
            stats.marginal_freq[str(j + 2)] = float(marg_sum[j] / marg_n)
            stats.marginal_se[str(j + 2)] = float(mb[:, j].std(ddof=1) / math.sqrt(len(mb)))
    return stats
