"""
Stationary overflow probability for exponential on-off sources.

``N`` sources switch off->on at rate ``1/mean_off`` and on->off at rate
``1/mean_on``; with ``k`` of them on the buffer content changes at rate
``k*nu - C``.  For an infinite buffer the joint law of (content, ``k``)
is a finite sum of exponentials whose exponents are the negative
eigenvalues of ``Q D^{-1}`` (``Q`` the birth-death generator, ``D`` the
drift matrix), with coefficients fixed by requiring that no probability
sits at an empty buffer while the input rate exceeds ``C``.

Levels where ``k*nu == C`` have no drift; they are censored out of the
chain before the eigenproblem and restored afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import binom

from .errors import InvalidParameter, NumericalDegeneracy, UnstableSystem

# drift magnitudes below this, relative to C, count as exactly zero
_ZERO_DRIFT = 1e-12


@dataclass(frozen=True)
class ExpOnOffSystem:
    n_sources: int
    peak_rate: float
    service_rate: float
    mean_on: float
    mean_off: float

    def __post_init__(self):
        if not (int(self.n_sources) == self.n_sources and self.n_sources > 0):
            raise InvalidParameter(f"n_sources must be a positive integer, got {self.n_sources}")
        for name in ("peak_rate", "service_rate", "mean_on", "mean_off"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def on_probability(self):
        return self.mean_on / (self.mean_on + self.mean_off)

    @property
    def mean_input_rate(self):
        return self.n_sources * self.peak_rate * self.on_probability

    @property
    def is_stable(self):
        return self.mean_input_rate < self.service_rate


class _Spectral:
    """Coefficients of the spectral expansion, computed once per system."""

    def __init__(self, sys):
        n = int(sys.n_sources)
        up = 1.0 / sys.mean_off
        down = 1.0 / sys.mean_on
        k = np.arange(n + 1)
        drift = k * sys.peak_rate - sys.service_rate
        drift[np.abs(drift) < _ZERO_DRIFT * sys.service_rate] = 0.0

        gen = np.zeros((n + 1, n + 1))
        gen[k[:-1], k[:-1] + 1] = (n - k[:-1]) * up
        gen[k[1:], k[1:] - 1] = k[1:] * down
        gen[k, k] = -gen.sum(axis=1)

        pi = binom.pmf(k, n, sys.on_probability)

        zero = drift == 0.0
        keep = ~zero
        if zero.any():
            # censor zero-drift levels: F_0 = -F_k Q_k0 Q_00^{-1}
            q_kk = gen[np.ix_(keep, keep)]
            q_k0 = gen[np.ix_(keep, zero)]
            q_0k = gen[np.ix_(zero, keep)]
            q_00 = gen[np.ix_(zero, zero)]
            restore = -q_k0 @ np.linalg.inv(q_00)
            reduced = q_kk + restore @ q_0k
        else:
            restore = np.zeros((keep.sum(), 0))
            reduced = gen

        d = drift[keep]
        # left eigenvectors of reduced @ D^{-1}: phi (Q - z D) = 0
        z, vecs = linalg.eig((reduced / d[np.newaxis, :]).T)
        z = z.real
        vecs = vecs.real
        neg = z < -1e-12
        z_neg = z[neg]
        phi = vecs[:, neg].T

        over = d > 0
        if len(z_neg) != over.sum():
            raise NumericalDegeneracy(
                f"found {len(z_neg)} decaying modes for {over.sum()} overload states")
        if len(z_neg) > 1:
            gaps = np.diff(np.sort(z_neg))
            if gaps.min() < 1e-12:
                raise NumericalDegeneracy(f"eigenvalue separation {gaps.min():.3g} below 1e-12")

        # F_k(x) = pi_k + sum_i a_i phi_ik exp(z_i x); F_k(0) = 0 for overload k
        pi_k = pi[keep]
        if over.any():
            a = np.linalg.solve(phi[:, over].T, -pi_k[over])
        else:
            a = np.zeros(0)

        # each mode's contribution to the total mass, zero-drift levels included
        full_phi = phi.sum(axis=1) + (phi @ restore).sum(axis=1)
        self.weights = a * full_phi
        self.exponents = z_neg
        self.dominant = z_neg.max() if len(z_neg) else -np.inf


def ams_overflow_probability(sys, x):
    """``P(Q > x)`` for the stationary infinite-buffer content ``Q``.

    ``x`` may be a scalar or an array (packets).  Systems whose peak
    input never exceeds ``C`` return zero.

    Raises
    ------
    UnstableSystem
        Mean input rate is not below the service rate.
    NumericalDegeneracy
        Decaying modes could not be separated.
    """
    if not sys.is_stable:
        raise UnstableSystem(
            f"mean input {sys.mean_input_rate:.6g} >= service rate {sys.service_rate:.6g}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise InvalidParameter("x must be >= 0")
    if sys.n_sources * sys.peak_rate <= sys.service_rate:
        out = np.zeros_like(x_arr)
    else:
        sp = spectral(sys)
        terms = sp.weights[:, np.newaxis] * np.exp(np.outer(sp.exponents, x_arr.ravel()))
        out = np.clip(-terms.sum(axis=0), 0.0, 1.0).reshape(x_arr.shape)
    return out if out.ndim else float(out)


def dominant_exponent(sys):
    """Slowest decay rate of the overflow tail (a negative number)."""
    return float(spectral(sys).dominant)


_CACHE = {}


def spectral(sys):
    if sys not in _CACHE:
        if len(_CACHE) > 64:
            _CACHE.clear()
        _CACHE[sys] = _Spectral(sys)
    return _CACHE[sys]
