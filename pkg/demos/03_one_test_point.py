"""
One test point: packet flows versus the fluid model
===================================================

A hundred AIMD flows share a 100 Mbps bottleneck through 10 Mbps access
links.  The window histogram of the packet run is fitted, the fitted law
drives the fluid model, and the two queue-length distributions are
compared.
"""

from kams import compare_point, preset
from kams.sweep import point_seeds

spec = preset("desk")
report, cdfs, runs = compare_point(spec, buffer_size=30, rtt=0.2, seeds=point_seeds(0, 2, 3), keep_runs=True)

pk = runs["packet"]
print(f"packet run: {pk.sent} sent, loss rate {pk.loss_rate:.4f}, mean window {pk.mean_cwnd:.2f}")
print(f"fitted window law: {runs['law']}")

print("\nqueue   P(Q<=q) fluid   packet")
for q in range(0, 31, 3):
    print(f"{q:5d}   {cdfs['model'].values[q]:.3f}          {cdfs['ref'].values[q]:.3f}")

print(f"\nNRMSE over q > 5: {report.nrmse:.3f} (exponential law: {report.nrmse_exponential:.3f})")
print(f"full buffer: fluid {report.p_full_model:.4f}, packet {report.p_full_ref:.4f}, "
      f"ratio {report.mult_err:.1f}")
print(f"loss/overflow ratio {report.loss_overflow_ratio:.2f}, spikiness {report.spikiness:.1f}")
