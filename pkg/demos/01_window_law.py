"""
Fitting the congestion-window law
=================================

Burst sizes in the fluid model are drawn from a normal law truncated to
[0, inf).  Its location is the average of the four most frequent window
sizes; its scale comes from a least-squares fit of the log-density to
the log-frequencies.
"""

import numpy as np

from kams import EmpiricalPmf, TruncatedNormalParams, estimate_mode, fit_truncated_normal, tn_pdf, tn_sample

rng = np.random.default_rng(1)
true = TruncatedNormalParams(13.0, 4.0)

# a million windows, rounded to whole packets as a sender would see them
pmf = EmpiricalPmf.from_samples(tn_sample(true, rng, 10**6))
print("four most likely sizes average to", estimate_mode(pmf))

fit = fit_truncated_normal(pmf)
print(f"fitted mu={fit.mu}  sigma={fit.sigma:.3f}   (true 13, 4)")

# the fit is done on logs, so the tails count as much as the peak
bins, freq = pmf.frequencies()
for b in (1, 5, 13, 21, 27):
    i = np.searchsorted(bins, b)
    print(f"  w={b:2d}  empirical {freq[i]:.2e}   fitted {tn_pdf(fit, b):.2e}")
