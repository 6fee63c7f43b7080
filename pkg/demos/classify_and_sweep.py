"""Replicated classification and a bisection sweep for the critical service mean."""
from retrial_lab.distributions import Erlang, Exponential
from retrial_lab.harness import classify, sweep
from retrial_lab.service import IID
from retrial_lab.srs import PolicyConfig

base = PolicyConfig("control", 1.0, Exponential(1.0), IID(Exponential(1.0)))
for es in (0.4, 0.5, 0.6):
    v = classify(base.with_service_mean(es), seed=0)
    lo, hi = v.slope_ci
    print(f"E sigma={es}: {v.verdict.value:12s} slope {v.slope:+.4f} [{lo:+.4f}, {hi:+.4f}] "
          f"low-set frequency {v.return_frequency:.3f}")

erlang = PolicyConfig("control", 1.0, Erlang(2, 1.0), IID(Exponential(1.0)))
res = sweep(erlang, "service_mean", (0.1, 0.5), 0.01, seed=0)
for x, v in sorted(res.points, key=lambda p: p[0]):
    print(f"  {x:.4f}  {v.verdict.value}")
print(f"critical E sigma {res.critical:.4f} (analytic {res.analytic:.4f}, rel. error {res.relative_error:.3f})")
