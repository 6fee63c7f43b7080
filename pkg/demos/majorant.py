"""Cutoffs for the linear-policy majorant, and the versatile-policy drift."""
from retrial_lab import analytics
from retrial_lab.distributions import Erlang, Exponential

for law in (Exponential(1.0), Erlang(2, 1.0)):
    row = [analytics.min_cutoff(1.0, load, law) for load in (0.3, 0.6, 0.9, 0.99)]
    print(f"{law!r}: least cutoff for load 0.3/0.6/0.9/0.99 -> {row}")

# drift of the majorant falls towards load - 1 as the cutoff grows
for c in (1, 2, 5, 20, 100):
    print(f"C={c:3d}: drift {analytics.drift('linear', 1.0, 0.9, Exponential(1.0), c):+.4f}")

# versatile policy: the double integral alone, and with the region where the
# arrival precedes the orbit residual added
e = Exponential(1.0)
print("versatile drift, integral as written:", round(analytics.drift_versatile(1.0, 0.5, 1, e, e), 6))
print("versatile drift, with pre-orbit region:", round(analytics.drift_versatile(1.0, 0.5, 1, e, e, include_pre_orbit=True), 6))
