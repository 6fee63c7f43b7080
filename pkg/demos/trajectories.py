"""Embedded orbit sizes under the control policy on both sides of the threshold."""
import numpy as np

from retrial_lab.distributions import Exponential
from retrial_lab.service import IID
from retrial_lab.srs import Chain, PolicyConfig, simulate_chain

horizon = 100_000
for es in (0.4, 0.6):
    cfg = PolicyConfig("control", 1.0, Exponential(1.0), IID(Exponential(1 / es)))
    tr = simulate_chain(cfg, horizon, seed=0)
    print(f"E sigma={es}: Q_N/N = {tr.states[-1] / horizon:.4f}, "
          f"time at 0 = {np.mean(tr.states == 0):.3f}, "
          f"P(orbit wins) = {tr.stats.indicator_rate:.4f}, "
          f"mean increment = {tr.stats.mean_increment:+.4f}")

# the comparison chain without retrials grows at load - 1
cfg = PolicyConfig("control", 1.0, Exponential(1.0), IID(Exponential(1 / 1.2)))
tr = simulate_chain(cfg, 10**6, seed=0, chain=Chain.NORETRIAL, keep_drivers=False)
print(f"no-retrial chain at load 1.2: slope {tr.states[-1] / tr.horizon:.4f}")

# write a short trajectory with its JSON sidecar
out = simulate_chain(cfg, 50, seed=1).write("demo_output")
print("wrote", sorted(p.name for p in out.iterdir()))
