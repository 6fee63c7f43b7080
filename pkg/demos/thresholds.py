"""Stability thresholds on the load lambda * E sigma for each policy.

A configuration is stable when its load is below the printed bound.
"""
from retrial_lab import analytics
from retrial_lab.distributions import Erlang, Exponential, Hyperexponential, Lognormal

lam = 1.0
laws = {
    "exp:1": Exponential(1.0),
    "erlang:2,1": Erlang(2, 1.0),
    "hyperexp:0.3,2": Hyperexponential(0.3, 2.0),
    "lognormal:0,0.5": Lognormal(0.0, 0.5),
}

print(f"lambda = {lam}")
print(f"{'retrial law':18s} {'linear':>8s} {'constant':>9s} {'control':>8s}  route")
for name, law in laws.items():
    reps = [analytics.threshold(p, lam, law) for p in ("linear", "constant", "control")]
    print(f"{name:18s} {reps[0].value:8.4f} {reps[1].value:9.4f} {reps[2].value:8.4f}  {reps[2].route.value}")

# for exponential retrials both one-orbit policies give theta / (lambda + theta)
for theta in (0.5, 1.0, 2.0):
    c = analytics.threshold("constant", lam, Exponential(theta)).value
    print(f"theta={theta}: constant {c:.6f}  theta/(lambda+theta) {theta / (lam + theta):.6f}")

# drift = load - threshold; negative means the orbit drains
for es in (0.4, 0.5, 0.6):
    print(f"control, E sigma={es}: drift {analytics.drift('control', lam, es, Exponential(1.0)):+.3f}")
