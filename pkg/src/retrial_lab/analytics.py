"""Stability thresholds and mean drifts of the embedded orbit chains.

Every threshold is reported as the bound that the load ``lambda * E sigma``
is compared against, so the stability predicate is uniform across
policies: stable iff ``load < threshold``.

* linear:   1
* constant: (1 - r*(lambda)) / (lambda * E r)
* control:  r*(lambda)

Drifts are the mean one-step increments ``E xi`` of the corresponding
recursions; for the linear policy it is the drift of the majorant with
cutoff C, ``load - [1 - int_0^inf lambda e^{-lambda t} Fe_bar(t)^C dt]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

from scipy import integrate, optimize

from .distributions import RetrialSpec
from .errors import ConfigError, HypothesisViolation, NumericalFailure
from .srs import Policy

THRESHOLD_TOL = 1e-10
MAJORANT_TOL = 1e-8
VERSATILE_TOL = 1e-6
MAX_CUTOFF = 1 << 24


class Route(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class ThresholdReport:
    policy: Policy
    arrival_rate: float
    value: float
    route: Route
    error_bound: float

    def is_stable(self, load: float) -> bool:
        return load < self.value

    def to_dict(self):
        d = asdict(self)
        d["policy"] = self.policy.value
        d["route"] = self.route.value
        return d


def _check_rate(lam):
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigError(f"arrival rate must be positive, got {lam!r}")


def _transform(retrial: RetrialSpec, lam: float):
    if retrial.closed_form_laplace:
        return float(retrial.laplace(lam)), Route.CLOSED_FORM, 0.0
    return retrial.laplace_quadrature(lam), Route.QUADRATURE, THRESHOLD_TOL


def threshold(policy, arrival_rate: float, retrial: RetrialSpec) -> ThresholdReport:
    policy = Policy(policy)
    _check_rate(arrival_rate)
    if policy is Policy.LINEAR:
        return ThresholdReport(policy, arrival_rate, 1.0, Route.CLOSED_FORM, 0.0)
    if policy is Policy.CONSTANT and retrial.lattice:
        raise HypothesisViolation("constant policy threshold needs a nonlattice orbit-cycle law")
    rstar, route, err = _transform(retrial, arrival_rate)
    if policy is Policy.CONTROL:
        return ThresholdReport(policy, arrival_rate, rstar, route, err)
    scale = arrival_rate * retrial.mean()
    return ThresholdReport(policy, arrival_rate, (1.0 - rstar) / scale, route, err / scale)


def orbit_win_probability(retrial: RetrialSpec, arrival_rate: float) -> float:
    """P(pi < gamma): an equilibrium residual beats an Exp(lambda) arrival."""
    return threshold(Policy.CONSTANT, arrival_rate, retrial).value


def majorant_integral(retrial: RetrialSpec, arrival_rate: float, cutoff: int, allow_lattice=False) -> float:
    """int_0^inf lambda e^{-lambda t} P(pi >= t)^C dt: no residual out of C beats the arrival."""
    _check_rate(arrival_rate)
    if cutoff < 1:
        raise ConfigError("cutoff must be >= 1")
    retrial._check_lattice(allow_lattice)
    lam = arrival_rate

    def f(t):
        return lam * math.exp(-lam * t) * float(retrial.equilibrium_sf(t, allow_lattice=True)) ** cutoff

    # the integrand decays on the scale 1 / (lambda + C / E r) near the origin
    knee = 1.0 / (lam + cutoff / retrial.mean())
    pieces = [(0.0, knee), (knee, 40 * knee), (40 * knee, math.inf)]
    if retrial.lattice:
        d = retrial.tail_point()
        pieces = [(a, min(b, d)) for a, b in pieces if a < d]
    total, err = 0.0, 0.0
    for a, b in pieces:
        val, e = integrate.quad(f, a, b, epsabs=MAJORANT_TOL / 10, epsrel=1e-12, limit=400)
        total += val
        err += e
    if err > MAJORANT_TOL:
        raise NumericalFailure("majorant integral", err)
    return total


def drift(policy, arrival_rate: float, mean_service: float, retrial: RetrialSpec, cutoff: int | None = None,
          *, allow_lattice: bool = False) -> float:
    """Mean increment of the embedded recursion (majorant for the linear policy)."""
    policy = Policy(policy)
    load = arrival_rate * mean_service
    if policy is Policy.LINEAR:
        if cutoff is None:
            raise ConfigError("linear majorant drift needs a cutoff C")
        return load - (1.0 - majorant_integral(retrial, arrival_rate, cutoff, allow_lattice))
    if cutoff is not None:
        raise ConfigError("cutoff applies to the linear majorant only")
    return load - threshold(policy, arrival_rate, retrial).value


def min_cutoff(arrival_rate: float, mean_service: float, retrial: RetrialSpec, *, allow_lattice=False) -> int:
    """Least C >= 1 whose majorant drift is negative."""
    load = arrival_rate * mean_service
    if load >= 1.0:
        raise HypothesisViolation(f"no cutoff gives negative drift when load = {load} >= 1")

    def neg(c):
        return drift(Policy.LINEAR, arrival_rate, mean_service, retrial, c, allow_lattice=allow_lattice) < 0

    hi = 1
    while not neg(hi):
        hi *= 2
        if hi > MAX_CUTOFF:
            raise NumericalFailure(f"no negative-drift cutoff below {MAX_CUTOFF}", float("nan"))
    lo = hi // 2  # neg(lo) is False, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if neg(mid):
            hi = mid
        else:
            lo = mid
    return hi


def versatile_no_win(arrival_rate, cutoff, orbit_spec: RetrialSpec | None, retrial_spec: RetrialSpec,
                     *, include_pre_orbit=False) -> float:
    """Nested-quadrature double integral inside the versatile-policy drift.

    Computes ``int_0^inf int_0^t lambda e^{-lambda t} P(r >= t-s)^C dG(s) dt``
    with G the equilibrium law of ``orbit_spec`` (``None`` = residual
    degenerate at 0). With ``include_pre_orbit`` the mass of arrivals that
    come before the orbit residual, ``int lambda e^{-lambda t}(1 - G(t)) dt``,
    is added, turning the value into P(min_i(pi + r_i) >= gamma).
    """
    _check_rate(arrival_rate)
    lam = arrival_rate
    C = cutoff

    def s_pow(u):
        return float(retrial_spec.sf(u)) ** C

    if orbit_spec is None:
        val, err = integrate.quad(lambda t: lam * math.exp(-lam * t) * s_pow(t), 0, math.inf,
                                  epsabs=VERSATILE_TOL / 100, limit=400)
        if err > VERSATILE_TOL:
            raise NumericalFailure("versatile drift integral", err)
        return val
    orbit_spec._check_lattice(False)

    def inner(t):
        v, _ = integrate.quad(lambda s: s_pow(t - s) * float(orbit_spec.equilibrium_pdf(s)), 0.0, t,
                              epsabs=VERSATILE_TOL / 100, limit=200)
        return lam * math.exp(-lam * t) * v

    val, err = integrate.quad(inner, 0.0, math.inf, epsabs=VERSATILE_TOL / 10, limit=400)
    if include_pre_orbit:
        pre, e2 = integrate.quad(lambda t: lam * math.exp(-lam * t) * float(orbit_spec.equilibrium_sf(t)),
                                 0.0, math.inf, epsabs=VERSATILE_TOL / 10, limit=400)
        val += pre
        err += e2
    if err > VERSATILE_TOL:
        raise NumericalFailure("versatile drift integral", err)
    return val


def drift_versatile(arrival_rate, mean_service, cutoff, orbit_spec, retrial_spec, *, include_pre_orbit=False) -> float:
    """Majorant drift for the versatile policy: load - [1 - double integral].

    By default the double integral is evaluated exactly as written, over
    the region where the orbit residual precedes the arrival; see
    :func:`versatile_no_win` for the ``include_pre_orbit`` variant.
    """
    load = arrival_rate * mean_service
    inner = versatile_no_win(arrival_rate, cutoff, orbit_spec, retrial_spec, include_pre_orbit=include_pre_orbit)
    return load - (1.0 - inner)


def critical_value(config, axis: str, chain: str = "policy") -> float:
    """Value of the swept parameter where the analytic drift of ``config`` vanishes.

    ``axis`` is ``"arrival_rate"`` or ``"service_mean"``. For the linear
    policy on the SRS engine the majorant (with the configured cutoff) is
    meant when ``chain == "majorant"``; otherwise the linear threshold 1
    applies, as for the no-retrial comparison chain.
    """
    policy = config.policy
    es = config.service.mean()
    lam = config.arrival_rate
    use_majorant = chain == "majorant"
    simple = chain == "noretrial" or (policy is Policy.LINEAR and not use_majorant)

    def g(value):
        if axis == "arrival_rate":
            lam_, es_ = value, es
        else:
            lam_, es_ = lam, value
        if simple:
            return lam_ * es_ - 1.0
        if use_majorant:
            return drift(Policy.LINEAR, lam_, es_, config.retrial, config.cutoff, allow_lattice=True)
        return drift(policy, lam_, es_, config.retrial)

    if axis == "service_mean":
        if simple:
            return 1.0 / lam
        if not use_majorant:
            return threshold(policy, lam, config.retrial).value / lam
    elif axis != "arrival_rate":
        raise ConfigError(f"unknown sweep axis {axis!r}")
    elif simple:
        return 1.0 / es
    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    lo = hi / 2
    while g(lo) >= 0 and lo > 1e-12:
        lo /= 2
    return optimize.brentq(g, lo, hi, xtol=1e-12)
