"""
Checking the fluid engine against the exact solution
====================================================

With exponential on and off periods the stationary buffer content of an
infinite buffer has a closed spectral form.  A long simulation with a
huge buffer should reproduce it wherever the probability is not too
small to estimate.
"""

import time

import numpy as np

from kams import ExpOnOffSystem, ExponentialLaw, KamsConfig, ams_overflow_probability, run_kams, time_weighted_ccdf
from kams.ams import dominant_exponent

system = ExpOnOffSystem(n_sources=50, peak_rate=1.0, service_rate=22.0, mean_on=1.0, mean_off=2.0)
print(f"load {system.mean_input_rate / system.service_rate:.2f}, "
      f"tail decay rate {dominant_exponent(system):.4f} per packet")

cfg = KamsConfig(n_sources=50, service_rate=22.0, peak_rate=1.0, buffer_size=1e4, rtt=2.0,
                 cwnd_law=ExponentialLaw(1.0), sim_duration=1e5, off_law="exponential",
                 warmup_fraction=0.0, seed=1)
t0 = time.perf_counter()
trace = run_kams(cfg)
print(f"{len(trace)} transitions simulated in {time.perf_counter() - t0:.1f} s")

x = np.arange(0.0, 6.0, 0.5)
exact = ams_overflow_probability(system, x)
# time-weighted: transition epochs of exponential sources are not a fair sample
sim = time_weighted_ccdf(trace, x, 0.0)
print("   x   exact      simulated  rel.err")
for xi, p, s in zip(x, exact, sim):
    print(f"{xi:4.1f}  {p:.3e}  {s:.3e}  {s / p - 1:+.3f}")
