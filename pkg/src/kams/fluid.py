"""
Event-driven simulation of superposed on-off fluid sources.

``N`` independent sources alternate between an on period, during which
each pours fluid into a shared buffer at ``peak_rate``, and an off period.
The buffer holds at most ``buffer_size`` packets and drains at
``service_rate``; fluid arriving at a full buffer is discarded.  Because
the net rate is piecewise constant between source transitions, the queue
is advanced exactly from one transition to the next.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .distributions import Constant, ExponentialLaw, HalfNormalLaw, TruncatedNormalParams
from .errors import InvalidParameter, NegativeDt
from .trace import QueueTrace

OFF_CONSTANT = "constant"
OFF_EXPONENTIAL = "exponential"
OFF_LAWS = (OFF_CONSTANT, OFF_EXPONENTIAL)

# burst draws below this (packets) are redrawn so no event has zero length
MIN_BURST = 1e-6
_BLOCK = 256


def bps_to_pps(rate_bps, packet_size=1500):
    """Convert a link speed in bits/s to packets/s."""
    return rate_bps / (8.0 * packet_size)


@dataclass(frozen=True)
class KamsConfig:
    """Fluid experiment parameters.  Rates are packets/s, sizes packets,
    times seconds.  ``off_law`` is ``"constant"`` (off period equals
    ``rtt``), ``"exponential"`` (mean ``rtt``), or an explicit
    :class:`Constant` or :class:`ExponentialLaw`."""

    n_sources: int
    service_rate: float
    peak_rate: float
    buffer_size: float
    rtt: float
    cwnd_law: Union[TruncatedNormalParams, ExponentialLaw, HalfNormalLaw, Constant]
    sim_duration: float
    off_law: Union[str, Constant, ExponentialLaw] = OFF_CONSTANT
    warmup_fraction: float = 0.2
    seed: int = 0
    packet_size: int = 1500

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise InvalidParameter("; ".join(problems))

    def problems(self):
        out = []
        if not (isinstance(self.n_sources, (int, np.integer)) and self.n_sources > 0):
            out.append(f"n_sources must be a positive integer, got {self.n_sources!r}")
        for name in ("service_rate", "peak_rate", "buffer_size", "rtt", "sim_duration"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0, got {v!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            out.append(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction!r}")
        if not (isinstance(self.off_law, (Constant, ExponentialLaw)) or self.off_law in OFF_LAWS):
            out.append(f"off_law must be one of {OFF_LAWS}, got {self.off_law!r}")
        if not isinstance(self.cwnd_law, (TruncatedNormalParams, ExponentialLaw, HalfNormalLaw, Constant)):
            out.append(f"unsupported cwnd_law {self.cwnd_law!r}")
        if not (isinstance(self.packet_size, (int, np.integer)) and self.packet_size > 0):
            out.append(f"packet_size must be a positive integer, got {self.packet_size!r}")
        return out

    @classmethod
    def from_link_speeds(cls, n_sources, service_bps, access_bps, packet_size=1500, **kw):
        return cls(n_sources=n_sources,
                   service_rate=bps_to_pps(service_bps, packet_size),
                   peak_rate=bps_to_pps(access_bps, packet_size),
                   packet_size=packet_size, **kw)

    @property
    def warmup_time(self):
        return self.warmup_fraction * self.sim_duration

    def with_(self, **changes):
        return replace(self, **changes)


def on_duration(cwnd_law, peak_rate, rng):
    """Length of one burst: a window drawn from ``cwnd_law`` sent at ``peak_rate``."""
    if not peak_rate > 0:
        raise InvalidParameter(f"peak_rate must be > 0, got {peak_rate}")
    w = cwnd_law.sample(rng)
    while w < MIN_BURST:
        w = cwnd_law.sample(rng)
    return w / peak_rate


def off_duration(off_law, rtt, rng):
    if not rtt > 0:
        raise InvalidParameter(f"rtt must be > 0, got {rtt}")
    if isinstance(off_law, (Constant, ExponentialLaw)):
        return float(off_law.sample(rng))
    if off_law == OFF_CONSTANT:
        return rtt
    if off_law == OFF_EXPONENTIAL:
        return float(rng.exponential(rtt))
    raise InvalidParameter(f"unknown off law {off_law!r}")


def _advance(q, rate, dt, buffer_size):
    """Return ``(q_end, overflow, t_full)`` for constant net ``rate``.

    ``t_full`` is the offset into the interval at which the buffer became
    full, or ``None`` if it does not end full.
    """
    if rate > 0:
        q_end = q + rate * dt
        if q_end >= buffer_size:
            t_full = (buffer_size - q) / rate
            return buffer_size, q_end - buffer_size, t_full
        return q_end, 0.0, None
    if rate < 0:
        q_end = q + rate * dt
        return (q_end if q_end > 0.0 else 0.0), 0.0, None
    return q, 0.0, (0.0 if q >= buffer_size else None)


def advance_queue(q, k, dt, cfg):
    """Advance the buffer over ``dt`` seconds with ``k`` sources on.

    Returns the new level and the fluid discarded on overflow.
    """
    if dt < 0:
        raise NegativeDt(f"dt must be >= 0, got {dt}")
    q_end, overflow, _ = _advance(q, k * cfg.peak_rate - cfg.service_rate, dt, cfg.buffer_size)
    return q_end, overflow


def source_streams(seed, n_sources):
    """One generator per source, keyed by ``(seed, index)`` so that adding
    sources does not perturb existing ones."""
    return [np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            for i in range(n_sources)]


class _DurationStream:
    """Buffered per-source duration draws."""

    __slots__ = ("rng", "law", "peak_rate", "off_law", "rtt", "_on", "_off", "_i_on", "_i_off")

    def __init__(self, rng, cfg):
        self.rng = rng
        self.law = cfg.cwnd_law
        self.peak_rate = cfg.peak_rate
        self.off_law = cfg.off_law
        self.rtt = cfg.rtt
        if isinstance(self.off_law, Constant):
            self.off_law, self.rtt = OFF_CONSTANT, self.off_law.value
        elif isinstance(self.off_law, ExponentialLaw):
            self.off_law, self.rtt = OFF_EXPONENTIAL, self.off_law.mean_value
        self._on = []
        self._off = []
        self._i_on = 0
        self._i_off = 0

    def next_on(self):
        if self._i_on >= len(self._on):
            w = self.law.sample(self.rng, _BLOCK)
            small = w < MIN_BURST
            while small.any():
                w[small] = self.law.sample(self.rng, int(small.sum()))
                small = w < MIN_BURST
            self._on = (w / self.peak_rate).tolist()
            self._i_on = 0
        self._i_on += 1
        return self._on[self._i_on - 1]

    def next_off(self):
        if self.off_law == OFF_CONSTANT:
            return self.rtt
        if self._i_off >= len(self._off):
            self._off = self.rng.exponential(self.rtt, _BLOCK).tolist()
            self._i_off = 0
        self._i_off += 1
        return self._off[self._i_off - 1]


def run_kams(cfg):
    """Simulate ``cfg`` over ``[0, sim_duration]``.

    All sources start off with a residual silence uniform on ``[0, rtt]``
    and the buffer empty.  A sample is recorded at every source
    transition; consecutive samples therefore bound straight-line
    segments of the trajectory (clamped at 0 and the buffer size).
    The whole run is determined by ``cfg.seed``.
    """
    n = cfg.n_sources
    nu = cfg.peak_rate
    c = cfg.service_rate
    b = float(cfg.buffer_size)
    t_end = cfg.sim_duration

    streams = [_DurationStream(rng, cfg) for rng in source_streams(cfg.seed, n)]
    state = [False] * n
    heap = [(float(s.rng.uniform(0.0, cfg.rtt)), i) for i, s in enumerate(streams)]
    heapq.heapify(heap)

    times = [0.0]
    levels = [0.0]
    active = [0]
    intervals = []
    full_since = None
    discarded = 0.0
    t = 0.0
    q = 0.0
    k = 0

    while heap[0][0] < t_end:
        te, i = heap[0]
        dt = te - t
        rate = k * nu - c
        if full_since is not None and rate < 0:
            intervals.append((full_since, t))
            full_since = None
        q, over, t_full = _advance(q, rate, dt, b)
        discarded += over
        if t_full is not None and full_since is None:
            full_since = t + t_full
        t = te

        if state[i]:
            state[i] = False
            k -= 1
            nxt = te + streams[i].next_off()
        else:
            state[i] = True
            k += 1
            nxt = te + streams[i].next_on()
        heapq.heapreplace(heap, (nxt, i))

        if dt > 0.0:
            times.append(te)
            levels.append(q)
            active.append(k)
        else:
            # simultaneous transitions collapse into one sample
            active[-1] = k

    rate = k * nu - c
    if full_since is not None and rate < 0:
        intervals.append((full_since, t))
        full_since = None
    q, over, t_full = _advance(q, rate, t_end - t, b)
    discarded += over
    if t_full is not None and full_since is None:
        full_since = t + t_full
    if full_since is not None:
        intervals.append((full_since, t_end))

    return QueueTrace(
        times=np.asarray(times),
        levels=np.asarray(levels),
        active=np.asarray(active, dtype=np.int64),
        duration=t_end,
        buffer_size=b,
        service_rate=c,
        peak_rate=nu,
        overflow_intervals=np.asarray(intervals, dtype=float).reshape(-1, 2),
        discarded_fluid=discarded,
        final_level=q,
        kind="fluid",
    )
