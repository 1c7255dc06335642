"""
The desk-scale grid
===================

Six buffer sizes by six round-trip times.  Pass a duration in seconds
as the first argument for a quicker, noisier pass (the full 600 s grid
takes a few minutes on one core).
"""

import sys
from dataclasses import replace

import numpy as np

from kams import preset, run_sweep

spec = preset("desk")
if len(sys.argv) > 1:
    spec = replace(spec, base=replace(spec.base, sim_duration=float(sys.argv[1])))

result = run_sweep(spec, progress=lambda p: print(".", end="", flush=True))
print()


def table(metric, fmt="{:7.3f}"):
    print(f"\n{metric}   (rows: buffer, columns: RTT in ms)")
    print("      " + "".join(f"{int(r * 1000):7d}" for r in spec.rtt_values))
    for b in spec.buffer_values:
        vals = [getattr(result.report_at(b, r), metric) for r in spec.rtt_values]
        print(f"{b:5d} " + "".join(fmt.format(v) for v in vals))


table("nrmse")
table("mult_err", "{:7.1f}")
table("spikiness", "{:7.1f}")
print(f"\ncorrection factor over RTT >= 100 ms: {result.factor:.2f}")
long_rtt = [r.corrected_mult_err for r in result.reports if r.rtt_s >= 0.1]
print(f"corrected error <= 50% at {np.mean(np.array(long_rtt) <= 0.5):.0%} of those points")
