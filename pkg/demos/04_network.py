"""End to end: agents on a directed graph, clustered at the network's phase budget, then simulated."""

import numpy as np

from phasecluster import run_instance

res = run_instance(10, seed=3, record_every=100)
print("essential phase of L: %.4f, clustering at alpha = %.4f" % (res.phi_ess, res.alpha))
print("clusters:", res.partition.member_lists())
print("controllers needed:", len(res.network.controllers), "for", len(res.matrices), "agents")

e = res.trace.sync_error
for t in (0, 1, 5, 10, 25, 50):
    k = np.searchsorted(res.trace.times, t - 1e-9)
    print(f"t={t:>4}s  sync error {e[k]:.3e}")
print("residual ratio:", res.residual_ratio)
print("timings:", {k: round(v, 2) for k, v in res.timings.items()})
