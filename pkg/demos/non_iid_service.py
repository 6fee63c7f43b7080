"""Dependent service sequences: a Markov-modulated rate and a moving average."""
import numpy as np
from scipy import optimize

from retrial_lab.distributions import Exponential
from retrial_lab.harness import classify
from retrial_lab.rng import RngStream
from retrial_lab.service import MarkovModulated, MovingAverage
from retrial_lab.srs import PolicyConfig

mm = MarkovModulated(((0.5, 0.5), (0.5, 0.5)), (1.0, 3.0))
x = mm.start(RngStream(0).generator()).take(10**6)
print(f"Markov-modulated: exact mean {mm.mean():.4f}, sample mean {x.mean():.4f}")

ma = MovingAverage(Exponential(1.0), 4)
y = ma.start(RngStream(0).generator()).take(10**6)
print(f"moving average w=4: lag-1 correlation {np.corrcoef(y[:-1], y[1:])[0, 1]:.3f} (exact 0.75)")

retrial = Exponential(1.0)
for factor in (0.8, 1.2):
    lam = optimize.brentq(lambda l: l * mm.mean() - factor * retrial.laplace(l), 1e-6, 10)
    v = classify(PolicyConfig("control", lam, retrial, mm), seed=0)
    print(f"load = {factor} x threshold (lambda={lam:.4f}): {v.verdict.value}")
