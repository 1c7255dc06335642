"""
Comparison statistics between a model queue trace and a reference one.

Queue levels are binned into consecutive integer bins and compared as
cumulative distributions; buffer-full probabilities, their multiplicative
error and the loss-synchronisation "spikiness" of the aggregate loss
series complete a :class:`ComparisonReport`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import (
    BinMismatch,
    DegenerateSpectrum,
    EmptyAfterWarmup,
    NoQualifyingPoints,
    ZeroOverflow,
    ZeroReference,
)

REPORT_COLUMNS = (
    "rtt_s", "buffer_pkts", "nrmse", "p_full_model", "p_full_ref", "mult_err",
    "corrected_mult_err", "spikiness", "loss_overflow_ratio",
)


@dataclass(frozen=True)
class EmpiricalCdf:
    """``values[i] = P(queue bin <= bins[i])`` for bins ``0..B``."""

    bins: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.bins) != len(self.values):
            raise BinMismatch("bins and values differ in length")
        if len(self.bins) and not np.array_equal(self.bins, np.arange(self.bins[0], self.bins[0] + len(self.bins))):
            raise BinMismatch("bins must be consecutive integers")

    @property
    def buffer_size(self):
        return int(self.bins[-1])

    @classmethod
    def from_counts(cls, counts):
        """Normalised cumulative sum of a per-bin weight vector."""
        counts = np.asarray(counts, dtype=float)
        cdf = np.cumsum(counts) / counts.sum()
        cdf[-1] = 1.0
        return cls(np.arange(len(counts)), np.minimum(cdf, 1.0))


@dataclass
class ComparisonReport:
    rtt_s: float
    buffer_pkts: int
    nrmse: float
    p_full_model: float
    p_full_ref: float
    mult_err: float
    corrected_mult_err: float
    spikiness: float
    loss_overflow_ratio: float
    loss_rate: float = math.nan
    fitted_mu: float = math.nan
    fitted_sigma: float = math.nan
    nrmse_exponential: float = math.nan
    degenerate: bool = False
    error: str = ""

    def row(self):
        return [getattr(self, c) for c in REPORT_COLUMNS]

    def as_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def warmup_cut(duration, warmup_fraction):
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValueError(f"warmup_fraction must lie in [0, 1), got {warmup_fraction}")
    return warmup_fraction * duration


def build_cdf(times, levels, buffer_size, warmup_fraction=0.2, duration=None):
    """Cumulative distribution of samples taken at or after the warm-up cut.

    Levels are floored to integer bins ``0..floor(buffer_size)``.  The cut
    is ``warmup_fraction * duration``; ``duration`` defaults to the last
    sample time.
    """
    times = np.asarray(times, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if duration is None:
        duration = float(times[-1]) if len(times) else 0.0
    keep = times >= warmup_cut(duration, warmup_fraction)
    if not keep.any():
        raise EmptyAfterWarmup("no samples after warm-up")
    b = int(math.floor(buffer_size + 1e-9))
    idx = np.clip(np.floor(levels[keep] + 1e-9).astype(np.int64), 0, b)
    return EmpiricalCdf.from_counts(np.bincount(idx, minlength=b + 1))


def trace_cdf(trace, warmup_fraction=0.2):
    return build_cdf(trace.times, trace.levels, trace.buffer_size, warmup_fraction, trace.duration)


def nrmse(model, ref, min_qlen=5):
    """Root-mean-square CDF difference over bins ``> min_qlen``, divided by
    the mean of ``ref`` over the same bins.

    The normaliser comes from ``ref`` only, so the statistic is not
    symmetric in its arguments.
    """
    if not np.array_equal(model.bins, ref.bins):
        raise BinMismatch(f"model bins 0..{model.buffer_size} vs reference 0..{ref.buffer_size}")
    sel = ref.bins > min_qlen
    if not sel.any():
        raise BinMismatch(f"no bins above {min_qlen} in a buffer of {ref.buffer_size}")
    diff = model.values[sel] - ref.values[sel]
    return float(np.sqrt(np.mean(diff * diff)) / np.mean(ref.values[sel]))


# -- full-buffer probability ---------------------------------------------------

def full_buffer_probability(trace, buffer_size=None, warmup_fraction=0.2):
    """Fraction of the post-warm-up window spent with a full buffer.

    Fluid traces use the measure of their overflow intervals.  Packet
    traces use the fraction of samples within half a packet of the
    buffer size.
    """
    b = trace.buffer_size if buffer_size is None else buffer_size
    t0 = warmup_cut(trace.duration, warmup_fraction)
    window = trace.duration - t0
    if trace.kind == "fluid":
        if not window > 0:
            raise EmptyAfterWarmup("empty window after warm-up")
        iv = trace.overflow_intervals
        if len(iv) == 0:
            return 0.0
        covered = np.clip(iv[:, 1], t0, None) - np.clip(iv[:, 0], t0, None)
        return float(min(max(covered.sum() / window, 0.0), 1.0))
    keep = trace.times >= t0
    if not keep.any():
        raise EmptyAfterWarmup("no samples after warm-up")
    return float(np.mean(trace.levels[keep] >= b - 0.5))


def correction_factor(pairs, rtt_values, rtt_threshold=0.1):
    """Mean of ``p_model / p_ref`` over points with ``rtt >= rtt_threshold``.

    Raises
    ------
    NoQualifyingPoints
        No point passes the threshold.
    ZeroReference
        A qualifying point has ``p_ref == 0``.
    """
    ratios = []
    for (p_model, p_ref), rtt in zip(pairs, rtt_values):
        if rtt < rtt_threshold - 1e-12:
            continue
        if p_ref <= 0:
            raise ZeroReference(f"reference full-buffer probability is 0 at rtt={rtt}")
        ratios.append(p_model / p_ref)
    if not ratios:
        raise NoQualifyingPoints(f"no test point with rtt >= {rtt_threshold}")
    return float(np.mean(ratios))


def corrected_error(p_model, p_ref, factor):
    """``|p_model / factor / p_ref - 1|``."""
    if p_ref <= 0:
        return math.nan
    return abs(p_model / factor / p_ref - 1.0)


def multiplicative_error(p_model, p_ref):
    return p_model / p_ref if p_ref > 0 else math.nan


# -- loss statistics --------------------------------------------------------------

def spikiness(series, use_modulus=False):
    """Peak-to-mean ratio of the non-DC Fourier coefficients of a loss series.

    ``max_{i>0} |Re w_i|  /  ((1/M) sum_{i>0} |Re w_i|)`` with ``w`` the
    unnormalised DFT and ``M`` the series length.  ``use_modulus``
    replaces ``|Re w_i|`` with ``|w_i|``.
    """
    x = np.asarray(getattr(series, "bins", series), dtype=float)
    m = len(x)
    if m < 2:
        raise DegenerateSpectrum(f"need at least 2 bins, got {m}")
    w = np.fft.fft(x)[1:]
    mag = np.abs(w) if use_modulus else np.abs(w.real)
    total = mag.sum()
    # relative floor: round-off of a constant series leaves ~1e-16*sum(x)
    if total <= 1e-12 * max(np.abs(x).sum(), 1.0) * m:
        raise DegenerateSpectrum("no fluctuating component in the loss series")
    return float(mag.max() / (total / m))


def loss_overflow_ratio(loss_rate, full_buffer_prob):
    if not full_buffer_prob > 0:
        raise ZeroOverflow("full-buffer probability is zero")
    return loss_rate / full_buffer_prob


# -- exact time-weighted distributions of fluid traces ------------------------------

def _segments(trace, t0):
    """Start level, net rate and length of each linear piece after ``t0``."""
    from .fluid import _advance

    t = np.append(trace.times, trace.duration)
    q = trace.levels
    rate = trace.active * trace.peak_rate - trace.service_rate
    start = np.searchsorted(t, t0, side="right") - 1
    start = max(start, 0)
    dt = np.diff(t)[start:].copy()
    q0 = q[start:].copy()
    r = rate[start:]
    # first piece begins mid-segment at t0
    lead = t0 - t[start]
    if lead > 0:
        q0[0], _, _ = _advance(q0[0], r[0], lead, trace.buffer_size)
        dt[0] -= lead
    return q0, r, dt


def time_above(trace, x, warmup_fraction=0.2):
    """Exact time the fluid level spends strictly above each ``x`` after warm-up."""
    q0, r, dt = _segments(trace, warmup_cut(trace.duration, warmup_fraction))
    b = trace.buffer_size
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(len(x))
    up = r > 0
    down = r < 0
    flat = r == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        q_hi = np.minimum(q0 + r * dt, b)
        for j, xv in enumerate(x):
            tot = 0.0
            # rising: above x once past it
            u_q0, u_dt, u_r, u_hi = q0[up], dt[up], r[up], q_hi[up]
            tot += np.where(u_q0 > xv, u_dt,
                            np.where(u_hi > xv, u_dt - (xv - u_q0) / u_r, 0.0)).sum()
            d_q0, d_dt, d_r = q0[down], dt[down], r[down]
            tot += np.where(d_q0 > xv, np.minimum(d_dt, (d_q0 - xv) / -d_r), 0.0).sum()
            tot += dt[flat][q0[flat] > xv].sum()
            out[j] = tot
    return out


def time_weighted_ccdf(trace, x, warmup_fraction=0.2):
    """``P(Q > x)`` as a fraction of post-warm-up time (fluid traces only)."""
    window = trace.duration - warmup_cut(trace.duration, warmup_fraction)
    if not window > 0:
        raise EmptyAfterWarmup("empty window after warm-up")
    return time_above(trace, x, warmup_fraction) / window


def time_weighted_cdf(trace, warmup_fraction=0.2):
    """Integer-binned CDF weighting each level by the time spent there.

    Bin ``k`` collects time with ``floor(level) == k``; the buffer-size bin
    holds time pinned at the top.
    """
    b = int(math.floor(trace.buffer_size + 1e-9))
    # P(level >= k) for k = 1..b; no atoms inside the buffer, so ">" will do
    # except at the top, where a hair below b catches the pinned time
    x = np.arange(1, b + 1, dtype=float)
    x[-1] -= 1e-9 * max(b, 1)
    at_least = time_weighted_ccdf(trace, x, warmup_fraction)
    below_next = np.append(1.0 - at_least, 1.0)
    values = np.minimum(np.maximum.accumulate(below_next), 1.0)
    values[-1] = 1.0
    return EmpiricalCdf(np.arange(b + 1), values)
