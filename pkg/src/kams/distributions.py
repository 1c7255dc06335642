"""
Burst-size and silence laws for on-off fluid sources.

The congestion window of an equilibrium TCP flow is modelled as a normal
variate conditioned on ``[0, inf)``.  This module samples it, evaluates its
density, and recovers its parameters from an empirical window histogram
with a two-step procedure: the location is the mean of the four most
frequent window sizes, then the scale is the least-squares fit of the
log-density to the log of the empirical frequencies.

Exponential, half-normal and constant laws are provided for the
sensitivity experiments and for the off period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np
from scipy import optimize, special

from .errors import FitDiverged, InvalidParameter, TooFewBins

__all__ = [
    "TruncatedNormalParams",
    "HalfNormalLaw",
    "ExponentialLaw",
    "Constant",
    "EmpiricalPmf",
    "tn_sample",
    "tn_pdf",
    "tn_logpdf",
    "tn_cdf",
    "tn_mean",
    "estimate_mode",
    "fit_truncated_normal",
]

# Beyond this many standard deviations below zero the inverse-CDF loses
# precision (Phi underflows), so sampling switches to rejection.
_REJECTION_THRESHOLD = 30.0

SIGMA_BOUNDS = (1e-2, 1e4)


@dataclass(frozen=True)
class TruncatedNormalParams:
    """Normal(mu, sigma**2) conditioned on ``[0, inf)``; units are packets."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidParameter(f"non-finite parameters mu={self.mu}, sigma={self.sigma}")
        if self.sigma <= 0:
            raise InvalidParameter(f"sigma must be > 0, got {self.sigma}")

    def mean(self):
        return tn_mean(self)

    def sample(self, rng, size=None):
        return tn_sample(self, rng, size)


@dataclass(frozen=True)
class HalfNormalLaw:
    """Truncated normal with location pinned at zero."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameter(f"sigma must be > 0, got {self.sigma}")

    @property
    def as_truncated_normal(self):
        return TruncatedNormalParams(0.0, self.sigma)

    def mean(self):
        return self.sigma * math.sqrt(2.0 / math.pi)

    def sample(self, rng, size=None):
        return tn_sample(self.as_truncated_normal, rng, size)


@dataclass(frozen=True)
class ExponentialLaw:
    mean_value: float

    def __post_init__(self):
        if not self.mean_value > 0:
            raise InvalidParameter(f"mean must be > 0, got {self.mean_value}")

    def mean(self):
        return self.mean_value

    def sample(self, rng, size=None):
        return rng.exponential(self.mean_value, size)


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidParameter(f"constant must be > 0, got {self.value}")

    def mean(self):
        return self.value

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))


Law = Union[TruncatedNormalParams, HalfNormalLaw, ExponentialLaw, Constant]


# -- truncated normal ---------------------------------------------------------

def tn_logpdf(params, x):
    x = np.asarray(x, dtype=float)
    z = (x - params.mu) / params.sigma
    log_norm = math.log(params.sigma) + special.log_ndtr(params.mu / params.sigma)
    out = -0.5 * z * z - 0.5 * math.log(2 * math.pi) - log_norm
    out = np.where(x < 0, -np.inf, out)
    return out if out.ndim else float(out)


def tn_pdf(params, x):
    """Density at ``x``; zero on the negative half-line."""
    out = np.exp(tn_logpdf(params, x))
    return out if np.ndim(out) else float(out)


def tn_cdf(params, x):
    x = np.asarray(x, dtype=float)
    a = -params.mu / params.sigma
    z = (np.maximum(x, 0.0) - params.mu) / params.sigma
    # 1 - sf ratio keeps precision when the support starts deep in the tail
    sf = np.exp(special.log_ndtr(-z) - special.log_ndtr(-a))
    out = np.where(x < 0, 0.0, 1.0 - sf)
    return out if out.ndim else float(out)


def tn_mean(params):
    a = -params.mu / params.sigma
    # phi(a) / (1 - Phi(a)) evaluated in log space
    hazard = math.exp(-0.5 * a * a - 0.5 * math.log(2 * math.pi) - special.log_ndtr(-a))
    return params.mu + params.sigma * hazard


def _tail_rejection(a, rng, n):
    """Standard normal conditioned on ``z >= a`` for large ``a`` (Robert, 1995)."""
    lam = 0.5 * (a + math.sqrt(a * a + 4.0))
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 16)
        z = a + rng.exponential(1.0 / lam, m)
        keep = z[rng.random(m) <= np.exp(-0.5 * (z - lam) ** 2)]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def tn_sample(params, rng, size=None):
    """Draw from the truncated normal.

    Inverse-CDF through the normal quantile function, so a block of ``k``
    draws consumes exactly ``k`` uniforms from ``rng`` and replays
    identically whether drawn one at a time or in bulk.
    """
    n = 1 if size is None else int(np.prod(size))
    a = -params.mu / params.sigma
    if a > _REJECTION_THRESHOLD:
        z = _tail_rejection(a, rng, n)
    else:
        v = 1.0 - rng.random(n)  # (0, 1]
        z = -special.ndtri(v * special.ndtr(-a))
    x = np.maximum(params.mu + params.sigma * z, 0.0)
    if size is None:
        return float(x[0])
    return x.reshape(size)


# -- empirical histogram and fitting -------------------------------------------

@dataclass
class EmpiricalPmf:
    """Integer-binned histogram of window sizes (packets)."""

    counts: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, c in self.counts.items():
            if int(k) != k or k < 0:
                raise InvalidParameter(f"bins must be nonnegative integers, got {k!r}")
            if c < 0:
                raise InvalidParameter(f"negative count {c} at bin {k}")
            if c:
                clean[int(k)] = int(c)
        self.counts = dict(sorted(clean.items()))

    @property
    def total(self):
        return sum(self.counts.values())

    @classmethod
    def from_samples(cls, values: Iterable[float]):
        """Round each value to the nearest integer bin."""
        arr = np.rint(np.asarray(list(values) if not isinstance(values, np.ndarray) else values))
        bins, counts = np.unique(arr.astype(np.int64), return_counts=True)
        return cls(dict(zip(bins.tolist(), counts.tolist())))

    @classmethod
    def from_array(cls, counts):
        """Dense count vector indexed by bin."""
        counts = np.asarray(counts)
        nz = np.flatnonzero(counts)
        return cls(dict(zip(nz.tolist(), counts[nz].tolist())))

    def frequencies(self):
        bins = np.fromiter(self.counts.keys(), dtype=float)
        freq = np.fromiter(self.counts.values(), dtype=float) / self.total
        return bins, freq

    def mean(self):
        bins, freq = self.frequencies()
        return float(np.dot(bins, freq))


def estimate_mode(pmf):
    """Mean of the four most frequent bins; ties go to the lower bin."""
    if len(pmf.counts) < 4:
        raise TooFewBins(f"need at least 4 nonzero bins, got {len(pmf.counts)}")
    ranked = sorted(pmf.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return sum(k for k, _ in ranked[:4]) / 4.0


def fit_truncated_normal(pmf, sigma_bounds=SIGMA_BOUNDS):
    """Fit the window law to an empirical histogram.

    The location is fixed at :func:`estimate_mode`.  The scale minimises
    the squared distance between log-density and log-frequency over the
    bins that were observed at least once; empty bins have no logarithm
    and are left out.  The search runs over ``log(sigma)`` so the 1e-6
    tolerance is relative.

    Raises
    ------
    TooFewBins
        Fewer than four observed window sizes.
    FitDiverged
        The optimum sits on either end of ``sigma_bounds``.
    """
    mu = estimate_mode(pmf)
    bins, freq = pmf.frequencies()
    log_freq = np.log(freq)
    z_base = bins - mu

    def objective(log_sigma):
        sigma = math.exp(log_sigma)
        log_norm = log_sigma + special.log_ndtr(mu / sigma) + 0.5 * math.log(2 * math.pi)
        resid = -0.5 * (z_base / sigma) ** 2 - log_norm - log_freq
        return float(np.dot(resid, resid))

    lo, hi = (math.log(b) for b in sigma_bounds)
    # the objective has a spurious shallow basin at very large sigma, so a
    # local search needs to start from the right cell of a coarse scan
    grid = np.linspace(lo, hi, 241)
    i = int(np.argmin([objective(g) for g in grid]))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(objective, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-7})
    if not res.success or not math.isfinite(res.x):
        raise FitDiverged(f"scale search failed: {res.message}")
    if res.x - lo < 1e-4 or hi - res.x < 1e-4:
        raise FitDiverged(f"scale hit search bound: sigma={math.exp(res.x):.4g}")
    return TruncatedNormalParams(mu, math.exp(res.x))
