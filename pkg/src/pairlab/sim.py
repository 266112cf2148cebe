"""Monte-Carlo time-tag streams for the two-channel pair and three-channel heralded setups.

Pair emission is a homogeneous Poisson process at ``R P^2``. Each photon of a
pair survives its channel independently with the channel's total
transmittance. Because thinning a Poisson process gives independent Poisson
processes, only pairs with at least one detected photon are drawn, with the
detection pattern chosen from the conditional outcome probabilities.

Delays inside a pair: signal at ``t + jitter``, idler at
``t + Laplace(tau) + jitter + idler_delay`` where ``tau`` is the ring lifetime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import PS_PER_S, ExperimentConfig

DEFAULT_MAX_EVENTS = 10**8

PAIR_CHANNELS = {0: "signal", 1: "idler"}
G2_CHANNELS = {0: "herald_a", 1: "heralded_b", 2: "heralded_c"}


class EventBudgetError(RuntimeError):
    """Raised when a run would exceed the event cap; shorten the duration."""


@dataclass(frozen=True, eq=False)
class TagStream:
    """Time-ordered detection events.

    ``times`` are int64 picoseconds in ``[0, duration_ps]``; ``channels`` are
    uint8 ids present in ``channel_map``.
    """

    channels: np.ndarray
    times: np.ndarray
    duration_ps: int
    channel_map: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        t = np.ascontiguousarray(self.times, dtype=np.int64)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "times", t)
        if ch.shape != t.shape or ch.ndim != 1:
            raise ValueError("channels and times must be 1-d arrays of equal length")
        if t.size:
            if np.any(np.diff(t) < 0):
                raise ValueError("event times must be non-decreasing")
            if t[0] < 0 or t[-1] > self.duration_ps:
                raise ValueError("event times must lie in [0, duration]")
            unknown = set(np.unique(ch).tolist()) - set(self.channel_map)
            if unknown:
                raise ValueError(f"channels {sorted(unknown)} missing from channel_map")

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.duration_ps == other.duration_ps
            and self.channel_map == other.channel_map
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times, other.times)
        )

    @property
    def duration_s(self) -> float:
        return self.duration_ps / PS_PER_S

    def channel_id(self, role: str | int) -> int:
        if isinstance(role, (int, np.integer)):
            return int(role)
        for k, v in self.channel_map.items():
            if v == role:
                return k
        raise KeyError(f"no channel with role {role!r}")

    def channel_times(self, role: str | int) -> np.ndarray:
        return self.times[self.channels == self.channel_id(role)]

    def count_rate(self, role: str | int) -> float:
        return self.channel_times(role).size / self.duration_s

    def to_csv(self, path: str | Path) -> None:
        data = np.column_stack([self.channels.astype(np.int64), self.times])
        np.savetxt(path, data, fmt="%d", delimiter=",", header="channel,time_ps", comments="")


def _empty(duration_ps: int, channel_map) -> TagStream:
    return TagStream(np.zeros(0, np.uint8), np.zeros(0, np.int64), duration_ps, dict(channel_map))


def _assemble(parts, duration_ps, channel_map, dead_time_ps=0) -> TagStream:
    times = [np.rint(t).astype(np.int64) for t, _ in parts]
    chans = [np.full(t.size, c, np.uint8) for t, (_, c) in zip(times, parts)]
    if not times:
        return _empty(duration_ps, channel_map)
    t = np.concatenate(times)
    ch = np.concatenate(chans)
    keep = (t >= 0) & (t <= duration_ps)
    t, ch = t[keep], ch[keep]
    order = np.lexsort((ch, t))
    t, ch = t[order], ch[order]
    if dead_time_ps > 0:
        keep = np.ones(t.size, bool)
        for c in np.unique(ch):
            idx = np.flatnonzero(ch == c)
            keep[idx] = _dead_time_mask(t[idx], dead_time_ps)
        t, ch = t[keep], ch[keep]
    return TagStream(ch, t, duration_ps, dict(channel_map))


def _dead_time_mask(t: np.ndarray, dead_ps: int) -> np.ndarray:
    # non-paralyzable detector: events within dead_ps of the last kept one are lost
    keep = np.zeros(t.size, bool)
    last = None
    for i, ti in enumerate(t.tolist()):
        if last is None or ti - last >= dead_ps:
            keep[i] = True
            last = ti
    return keep


def _check_budget(expected_events: float, max_events: int):
    if expected_events > max_events:
        raise EventBudgetError(
            f"about {expected_events:.3g} events expected, above the cap of {max_events:.3g}; "
            "shorten the acquisition time"
        )


def _pair_times(cfg: ExperimentConfig, rng, duration_ps: int, p_detect: float):
    """Emission times (float ps) of pairs with at least one detected photon.

    Returns ``(times, thinned)``; ``thinned`` says whether the times are
    already restricted to detected pairs (Poisson) or cover every pair
    (isolated mode, where pairs are spaced by at least ``isolation_ps``).
    """
    mu = cfg.pair_rate_hz
    T = duration_ps / PS_PER_S
    if mu <= 0:
        return np.zeros(0), True
    if cfg.source.pair_statistics == "isolated":
        mean_gap = PS_PER_S / mu
        n = int(T * mu) + 16
        gaps = cfg.timing.isolation_ps + rng.exponential(mean_gap, n)
        t = np.cumsum(gaps)
        return t[t < duration_ps], False
    n = rng.poisson(mu * T * p_detect)
    return rng.uniform(0.0, duration_ps, n), True


def _outcomes(rng, probs, n: int, thinned: bool) -> np.ndarray:
    """Detection pattern index per pair; the last entry of ``probs`` is 'nothing detected'."""
    probs = np.asarray(probs, float)
    if thinned:
        p = probs[:-1] / probs[:-1].sum()
        return rng.choice(p.size, size=n, p=p)
    return rng.choice(probs.size, size=n, p=probs / probs.sum())


def _uniform_events(rng, rate_hz: float, duration_ps: int) -> np.ndarray:
    n = rng.poisson(rate_hz * duration_ps / PS_PER_S)
    return rng.uniform(0.0, duration_ps, n)


def simulate_pairs(cfg: ExperimentConfig, *, max_events: int = DEFAULT_MAX_EVENTS) -> TagStream:
    """Two-channel (signal, idler) stream for start-stop coincidence counting."""
    T_ps = int(round(cfg.acquisition_time_s * PS_PER_S))
    src, timing = cfg.source, cfg.timing
    mu = cfg.pair_rate_hz
    ts, ti = cfg.signal_loss.total_transmittance, cfg.idler_loss.total_transmittance
    d = src.dark_count_rate_hz
    expected = cfg.acquisition_time_s * (
        mu * ts * (1 + src.excess_ratio_signal) + mu * ti * (1 + src.excess_ratio_idler) + 2 * d
    )
    _check_budget(expected, max_events)

    ss = np.random.SeedSequence(cfg.rng_seed)
    r_pair, r_exc_s, r_exc_i, r_dark_s, r_dark_i = (np.random.default_rng(s) for s in ss.spawn(5))

    probs = [ts * ti, ts * (1 - ti), (1 - ts) * ti, (1 - ts) * (1 - ti)]
    t0, thinned = _pair_times(cfg, r_pair, T_ps, 1.0 - probs[-1])
    kind = _outcomes(r_pair, probs, t0.size, thinned)
    has_s = (kind == 0) | (kind == 1)
    has_i = (kind == 0) | (kind == 2)
    tau = cfg.resonator.lifetime_ps
    sj = timing.jitter_sigma_ps
    t_sig = t0[has_s] + r_pair.normal(0.0, sj, has_s.sum()) if sj > 0 else t0[has_s]
    n_i = int(has_i.sum())
    t_idl = t0[has_i] + r_pair.laplace(0.0, tau, n_i) + timing.idler_delay_ps
    if sj > 0:
        t_idl = t_idl + r_pair.normal(0.0, sj, n_i)

    parts = [
        (t_sig, 0),
        (t_idl, 1),
        (_uniform_events(r_exc_s, mu * ts * src.excess_ratio_signal, T_ps), 0),
        (_uniform_events(r_exc_i, mu * ti * src.excess_ratio_idler, T_ps), 1),
        (_uniform_events(r_dark_s, d, T_ps), 0),
        (_uniform_events(r_dark_i, d, T_ps), 1),
    ]
    return _assemble(parts, T_ps, PAIR_CHANNELS, timing.dead_time_ps)


def simulate_heralded_g2(cfg: ExperimentConfig, *, max_events: int = DEFAULT_MAX_EVENTS) -> TagStream:
    """Three-channel stream: herald A, and the partner photon split 50/50 onto B and C.

    ``cfg.herald_side`` picks which photon of the pair heralds. Arms are
    synchronized, so no cable delay is applied.
    """
    T_ps = int(round(cfg.acquisition_time_s * PS_PER_S))
    src, timing = cfg.source, cfg.timing
    mu = cfg.pair_rate_hz
    if cfg.herald_side == "idler":
        herald_budget, beta_a, beta_h = cfg.idler_loss, src.excess_ratio_idler, src.excess_ratio_signal
    else:
        herald_budget, beta_a, beta_h = cfg.signal_loss, src.excess_ratio_signal, src.excess_ratio_idler
    tA = herald_budget.total_transmittance
    tB = 0.5 * cfg.herald_split_b_loss.total_transmittance
    tC = 0.5 * cfg.herald_split_c_loss.total_transmittance
    d = src.dark_count_rate_hz
    expected = cfg.acquisition_time_s * (
        mu * tA * (1 + beta_a) + mu * (tB + tC) * (1 + beta_h) + 3 * d
    )
    _check_budget(expected, max_events)

    ss = np.random.SeedSequence(cfg.rng_seed)
    r_pair, r_exc_a, r_exc_h, r_dark_a, r_dark_b, r_dark_c = (
        np.random.default_rng(s) for s in ss.spawn(6)
    )
    lost = 1.0 - tB - tC
    # outcomes: AB, AC, A only, B only, C only, nothing
    probs = [tA * tB, tA * tC, tA * lost, (1 - tA) * tB, (1 - tA) * tC, (1 - tA) * lost]
    t0, thinned = _pair_times(cfg, r_pair, T_ps, 1.0 - probs[-1])
    kind = _outcomes(r_pair, probs, t0.size, thinned)
    tau = cfg.resonator.lifetime_ps
    sj = timing.jitter_sigma_ps
    # the heralded photon carries the ring delay relative to the herald
    partner = t0 + r_pair.laplace(0.0, tau, t0.size)
    if sj > 0:
        jit = r_pair.normal(0.0, sj, (2, t0.size))
        t_h, partner = t0 + jit[0], partner + jit[1]
    else:
        t_h = t0
    in_a = np.isin(kind, (0, 1, 2))
    in_b = np.isin(kind, (0, 3))
    in_c = np.isin(kind, (1, 4))

    exc_h = _uniform_events(r_exc_h, mu * beta_h * (tB + tC), T_ps)
    to_b = r_exc_h.random(exc_h.size) < tB / (tB + tC) if exc_h.size else np.zeros(0, bool)
    parts = [
        (t_h[in_a], 0),
        (partner[in_b], 1),
        (partner[in_c], 2),
        (_uniform_events(r_exc_a, mu * tA * beta_a, T_ps), 0),
        (exc_h[to_b], 1),
        (exc_h[~to_b], 2),
        (_uniform_events(r_dark_a, d, T_ps), 0),
        (_uniform_events(r_dark_b, d, T_ps), 1),
        (_uniform_events(r_dark_c, d, T_ps), 2),
    ]
    return _assemble(parts, T_ps, G2_CHANNELS, timing.dead_time_ps)


def merge_streams(a: TagStream, b: TagStream) -> TagStream:
    """Time-sorted union of two streams with disjoint channel ids; ties ordered by channel."""
    if a.duration_ps != b.duration_ps:
        raise ValueError("streams must have identical duration")
    overlap = set(a.channel_map) & set(b.channel_map)
    if overlap:
        raise ValueError(f"channel ids overlap: {sorted(overlap)}")
    t = np.concatenate([a.times, b.times])
    ch = np.concatenate([a.channels, b.channels])
    order = np.lexsort((ch, t))
    return TagStream(ch[order], t[order], a.duration_ps, {**a.channel_map, **b.channel_map})


def thin_stream(stream: TagStream, channel: str | int, keep_probability: float, seed: int) -> TagStream:
    """Independently keep each event of one channel with the given probability."""
    cid = stream.channel_id(channel)
    rng = np.random.default_rng(seed)
    on = stream.channels == cid
    keep = ~on | (rng.random(len(stream)) < keep_probability)
    return TagStream(stream.channels[keep], stream.times[keep], stream.duration_ps, dict(stream.channel_map))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for a sub-run, e.g. ``derive_seed(seed, 0, k)`` for segment ``k``."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


def iter_chunks(simulate, cfg: ExperimentConfig, chunk_s: float = 1.0, **kwargs):
    """Yield consecutive independent segments covering ``cfg.acquisition_time_s``.

    Segment ``k`` uses seed ``derive_seed(cfg.rng_seed, 0, k)``; the last one is
    shortened to fit. Pairs straddling a boundary are lost, a fraction of
    order (correlation time)/(chunk length). Keeps memory bounded for long or
    bright acquisitions.
    """
    if not chunk_s > 0:
        raise ValueError("chunk length must be positive")
    total = cfg.acquisition_time_s
    n = max(1, math.ceil(total / chunk_s - 1e-9))
    for k in range(n):
        length = min(chunk_s, total - k * chunk_s)
        yield simulate(cfg.with_duration(length).with_seed(derive_seed(cfg.rng_seed, 0, k)), **kwargs)
