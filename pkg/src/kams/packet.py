"""
Packet-level reference: AIMD window flows through a drop-tail bottleneck.

Each flow sends its whole window once per round trip as a back-to-back
burst at the access rate.  The bottleneck serves packets FIFO at a fixed
rate and drops arrivals that find ``buffer_size`` packets already present
(the one in service included).  A flow halves its window once per round
trip in which any of its packets was dropped and otherwise grows it by one
packet.  There is no slow start, timeout or fast recovery: the flows live
permanently in congestion avoidance.

The per-packet loop is compiled with numba; everything else is plain
numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from .distributions import EmpiricalPmf
from .errors import InvalidParameter
from .trace import LossSeries, QueueTrace, aggregate_losses

# queue counts are ceil(workload * C); this keeps a packet that has just
# finished service from being counted through round-off
_EPS = 1e-9


@dataclass(frozen=True)
class PacketSimConfig:
    """Rates in packets/s, sizes in packets, times in seconds.

    With ``ack_clocked`` (the default) each burst starts one round trip
    after the previous burst's first packet cleared the bottleneck, so
    queueing delay shifts the flow's phase; with ``False`` bursts repeat
    exactly every ``rtt`` from the initial phase.  ``jitter`` adds a uniform
    random delay in ``[0, jitter)`` seconds to every burst start, the
    usual remedy for artificial phase effects in packet simulators.
    """

    n_flows: int
    bottleneck_rate: float
    access_rate: float
    buffer_size: int
    rtt: float
    sim_duration: float
    seed: int = 0
    warmup_fraction: float = 0.2
    ai_increment: float = 1.0
    md_factor: float = 0.5
    cwnd_cap: Optional[float] = None
    sample_phase: float = 0.0
    loss_bin_width: Optional[float] = None
    ack_clocked: bool = True
    jitter: float = 0.0
    packet_size: int = 1500

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise InvalidParameter("; ".join(problems))

    def problems(self):
        out = []
        if not (isinstance(self.n_flows, (int, np.integer)) and self.n_flows > 0):
            out.append(f"n_flows must be a positive integer, got {self.n_flows!r}")
        if not (isinstance(self.buffer_size, (int, np.integer)) and self.buffer_size >= 1):
            out.append(f"buffer_size must be an integer >= 1, got {self.buffer_size!r}")
        for name in ("bottleneck_rate", "access_rate", "rtt", "sim_duration", "ai_increment"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be > 0, got {v!r}")
        if not 0.0 < self.md_factor < 1.0:
            out.append(f"md_factor must lie in (0, 1), got {self.md_factor!r}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            out.append(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction!r}")
        if self.cwnd_cap is not None and not self.cwnd_cap >= 1:
            out.append(f"cwnd_cap must be >= 1, got {self.cwnd_cap!r}")
        if self.loss_bin_width is not None and not self.loss_bin_width > 0:
            out.append(f"loss_bin_width must be > 0, got {self.loss_bin_width!r}")
        if not 0.0 <= self.sample_phase < max(self.rtt, 0.0) or not math.isfinite(self.sample_phase):
            out.append(f"sample_phase must lie in [0, rtt), got {self.sample_phase!r}")
        if not (math.isfinite(self.jitter) and self.jitter >= 0):
            out.append(f"jitter must be >= 0, got {self.jitter!r}")
        return out

    @property
    def effective_cwnd_cap(self):
        if self.cwnd_cap is not None:
            return float(self.cwnd_cap)
        return max(1.0, self.access_rate * self.rtt)

    @property
    def warmup_time(self):
        return self.warmup_fraction * self.sim_duration

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class PacketSimResult:
    trace: QueueTrace
    losses: LossSeries
    cwnd_pmf: EmpiricalPmf
    drop_times: np.ndarray
    sent: int
    delivered: int
    dropped: int
    queue_at_end: int
    sent_window: int
    dropped_window: int
    flow_cwnd: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    arrivals: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __iter__(self):
        # allows ``trace, losses = run_packet_sim(cfg)``
        return iter((self.trace, self.losses))

    @property
    def loss_rate(self):
        """Drops per packet sent over the post-warm-up window."""
        return self.dropped_window / self.sent_window if self.sent_window else 0.0

    @property
    def mean_cwnd(self):
        return self.cwnd_pmf.mean() if self.cwnd_pmf.total else math.nan


@numba.njit(cache=True)
def _grow(arr, n):
    if n < arr.shape[0]:
        return arr
    out = np.empty((arr.shape[0] * 2,) + arr.shape[1:], dtype=arr.dtype)
    out[:n] = arr[:n]
    return out


@numba.njit(cache=True)
def _sift_down(ht, hf, size, i):
    while True:
        l = 2 * i + 1
        if l >= size:
            return
        m = l
        r = l + 1
        if r < size and (ht[r] < ht[l] or (ht[r] == ht[l] and hf[r] < hf[l])):
            m = r
        if ht[m] < ht[i] or (ht[m] == ht[i] and hf[m] < hf[i]):
            ht[i], ht[m] = ht[m], ht[i]
            hf[i], hf[m] = hf[m], hf[i]
            i = m
        else:
            return


@numba.njit(cache=True)
def _queue_len(busy_until, t, c):
    if busy_until <= t:
        return 0
    return int(math.ceil((busy_until - t) * c - _EPS))


@numba.njit(cache=True)
def _simulate(c, nu, b, rtt, t_end, t_warm, phases, cwnd0, ai, md, cap,
              ack_clocked, sample_phase, record_flow, record_arrivals, jitter, seed):
    np.random.seed(seed)
    n = phases.shape[0]
    service = 1.0 / c
    spacing = 1.0 / nu

    cwnd = cwnd0.copy()
    remaining = np.zeros(n, np.int64)
    burst_start = np.zeros(n)
    next_start = np.zeros(n)
    lost = np.zeros(n, np.bool_)
    started = np.zeros(n, np.bool_)

    ht = phases.copy()
    hf = np.arange(n)
    for i in range(n // 2 - 1, -1, -1):
        _sift_down(ht, hf, n, i)

    n_samples = 0
    if sample_phase < t_end:
        n_samples = int(math.ceil((t_end - sample_phase) / rtt - 1e-12))
    s_times = np.empty(n_samples)
    s_levels = np.empty(n_samples, np.int64)
    s_active = np.empty(n_samples, np.int64)
    s_next = 0

    hist = np.zeros(int(cap) + 2, np.int64)
    drops = np.empty(1024)
    n_drops = 0
    fl = np.empty((64, 2))
    n_fl = 0
    arr = np.empty((1024 if record_arrivals else 1, 2))
    n_arr = 0

    busy_until = 0.0
    active = 0
    sent = 0
    delivered = 0
    sent_w = 0
    dropped_w = 0

    while True:
        t = ht[0]
        f = hf[0]
        if t >= t_end:
            break
        while s_next < n_samples and sample_phase + s_next * rtt <= t:
            s = sample_phase + s_next * rtt
            s_times[s_next] = s
            s_levels[s_next] = _queue_len(busy_until, s, c)
            s_active[s_next] = active
            s_next += 1

        if remaining[f] == 0:
            # burst start: react to the previous burst's fate
            if started[f]:
                if lost[f]:
                    cwnd[f] = max(1.0, md * cwnd[f])
                else:
                    cwnd[f] = min(cap, cwnd[f] + ai)
            started[f] = True
            w = max(1, int(math.floor(cwnd[f] + 0.5)))
            if t >= t_warm:
                hist[w] += 1
            if f == record_flow:
                fl = _grow(fl, n_fl)
                fl[n_fl, 0] = t
                fl[n_fl, 1] = cwnd[f]
                n_fl += 1
            remaining[f] = w
            lost[f] = False
            burst_start[f] = t
            active += 1
            first = True
        else:
            first = False

        # one packet reaches the bottleneck
        sent += 1
        if t >= t_warm:
            sent_w += 1
        if record_arrivals:
            arr = _grow(arr, n_arr)
            arr[n_arr, 0] = t
            arr[n_arr, 1] = f
            n_arr += 1
        wait = busy_until - t if busy_until > t else 0.0
        if _queue_len(busy_until, t, c) >= b:
            lost[f] = True
            drops = _grow(drops, n_drops)
            drops[n_drops] = t
            n_drops += 1
            if t >= t_warm:
                dropped_w += 1
        else:
            busy_until = t + wait + service
            if busy_until <= t_end:
                delivered += 1
        if first:
            if ack_clocked:
                next_start[f] = t + wait + service + rtt
            else:
                next_start[f] = burst_start[f] + rtt

        remaining[f] -= 1
        if remaining[f] > 0:
            ht[0] = t + spacing
        else:
            active -= 1
            ht[0] = next_start[f]
            if jitter > 0:
                ht[0] += jitter * np.random.random()
        _sift_down(ht, hf, n, 0)

    while s_next < n_samples:
        s = sample_phase + s_next * rtt
        s_times[s_next] = s
        s_levels[s_next] = _queue_len(busy_until, s, c)
        s_active[s_next] = active
        s_next += 1

    q_end = _queue_len(busy_until, t_end, c)
    return (s_times, s_levels, s_active, hist, drops[:n_drops], sent, delivered,
            n_drops, q_end, sent_w, dropped_w, fl[:n_fl], arr[:n_arr])


def initial_state(cfg):
    """Phases uniform on ``[0, rtt)`` and starting windows spread over
    ``[1, 2 * fair share]`` so that no lockstep is imposed at t = 0."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0xB0,)))
    phases = rng.uniform(0.0, cfg.rtt, cfg.n_flows)
    fair = (cfg.bottleneck_rate * cfg.rtt + cfg.buffer_size) / cfg.n_flows
    hi = min(cfg.effective_cwnd_cap, max(1.0, 2.0 * fair))
    cwnd0 = rng.uniform(1.0, hi, cfg.n_flows)
    return phases, cwnd0


def run_packet_sim(cfg, record_flow=-1, record_arrivals=False):
    """Run the packet-level reference.

    Returns a :class:`PacketSimResult`, which also unpacks as
    ``(trace, losses)``.  The queue is sampled once per ``rtt`` at
    ``sample_phase``; the loss series covers the post-warm-up window in
    bins of ``loss_bin_width`` (default ``rtt``).
    """
    phases, cwnd0 = initial_state(cfg)
    t_warm = cfg.warmup_time
    out = _simulate(float(cfg.bottleneck_rate), float(cfg.access_rate), int(cfg.buffer_size),
                    float(cfg.rtt), float(cfg.sim_duration), float(t_warm), phases, cwnd0,
                    float(cfg.ai_increment), float(cfg.md_factor), float(cfg.effective_cwnd_cap),
                    bool(cfg.ack_clocked), float(cfg.sample_phase), int(record_flow),
                    bool(record_arrivals), float(cfg.jitter), int(cfg.seed) % (2**31))
    (s_times, s_levels, s_active, hist, drops, sent, delivered, n_drops, q_end,
     sent_w, dropped_w, fl, arrivals) = out

    trace = QueueTrace(
        times=s_times,
        levels=s_levels.astype(float),
        active=s_active,
        duration=float(cfg.sim_duration),
        buffer_size=float(cfg.buffer_size),
        service_rate=float(cfg.bottleneck_rate),
        peak_rate=None,
        final_level=float(q_end),
        kind="packet",
    )
    width = cfg.loss_bin_width or cfg.rtt
    losses = aggregate_losses(drops, width, (t_warm, cfg.sim_duration))
    return PacketSimResult(
        trace=trace,
        losses=losses,
        cwnd_pmf=EmpiricalPmf.from_array(hist),
        drop_times=drops,
        sent=int(sent),
        delivered=int(delivered),
        dropped=int(n_drops),
        queue_at_end=int(q_end),
        sent_window=int(sent_w),
        dropped_window=int(dropped_w),
        flow_cwnd=fl,
        arrivals=arrivals,
    )
