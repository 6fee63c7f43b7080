"""Two chains from different starts, driven by the same random inputs."""
import numpy as np

from retrial_lab.distributions import Exponential
from retrial_lab.service import IID
from retrial_lab.srs import PolicyConfig, coupled_chains, coupling_experiment

stable = PolicyConfig("control", 1.0, Exponential(1.0), IID(Exponential(2.5)))
rep = coupling_experiment(stable, 100_000, seed=0, offset=50, replications=100)
times = np.array([t for t in rep.times if t is not None])
print(f"stable: coupled in {rep.coupled_fraction:.0%} of runs, median time {np.median(times):.0f}")

# above the threshold the gap only closes when the lower chain is clipped at 0
unstable = PolicyConfig("control", 1.0, Exponential(1.0), IID(Exponential(1 / 0.7)))
x, y = coupled_chains(unstable, 10_000, seed=0, starts=(0, 50))
print(f"unstable: gap {y[0] - x[0]} -> {y[-1] - x[-1]} after {len(x) - 1} steps")
