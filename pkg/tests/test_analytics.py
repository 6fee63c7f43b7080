import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from retrial_lab.analytics import (
    Route,
    critical_value,
    drift,
    drift_versatile,
    majorant_integral,
    min_cutoff,
    orbit_win_probability,
    threshold,
    versatile_no_win,
)
from retrial_lab.distributions import (
    Deterministic,
    Erlang,
    Exponential,
    GeneralHyperexp,
    Hyperexponential,
    Lognormal,
)
from retrial_lab.errors import ConfigError, HypothesisViolation
from retrial_lab.rng import RngStream
from retrial_lab.service import IID
from retrial_lab.srs import PolicyConfig

NONLATTICE = [
    Exponential(1.0),
    Exponential(0.3),
    Hyperexponential(0.3, 2.0),
    GeneralHyperexp((0.5, 0.5), (0.5, 4.0)),
    Erlang(2, 1.0),
    Erlang(4, 3.0),
    Lognormal(0.0, 0.5),
]
RATES = (0.5, 1.0, 2.0)


def test_threshold_examples():
    assert threshold("control", 1.0, Exponential(1.0)).value == pytest.approx(0.5, abs=1e-15)
    assert threshold("control", 1.0, Erlang(2, 1.0)).value == pytest.approx(0.25, abs=1e-15)
    assert threshold("constant", 1.0, Exponential(1.0)).value == pytest.approx(0.5, abs=1e-15)
    for spec in NONLATTICE + [Deterministic(1.0)]:
        assert threshold("linear", 1.3, spec).value == 1.0


def test_threshold_report_fields():
    rep = threshold("control", 1.0, Lognormal(0.0, 0.5))
    assert rep.route is Route.QUADRATURE and 0 < rep.error_bound <= 1e-9
    rep = threshold("control", 1.0, Erlang(2, 1.0))
    assert rep.route is Route.CLOSED_FORM and rep.error_bound == 0.0
    assert rep.is_stable(0.2) and not rep.is_stable(0.25)
    d = rep.to_dict()
    assert d["policy"] == "control" and d["route"] == "closed_form"


def test_threshold_errors():
    with pytest.raises(HypothesisViolation):
        threshold("constant", 1.0, Deterministic(1.0))
    with pytest.raises(ConfigError):
        threshold("control", 0.0, Exponential(1.0))
    # control has no nonlattice hypothesis
    assert threshold("control", 1.0, Deterministic(1.0)).value == pytest.approx(math.exp(-1.0))


@pytest.mark.parametrize("spec", NONLATTICE, ids=repr)
@pytest.mark.parametrize("lam", RATES)
def test_thresholds_strictly_inside_unit_interval(spec, lam):
    for policy in ("constant", "control"):
        assert 0 < threshold(policy, lam, spec).value < 1


@pytest.mark.parametrize("lam,theta", list(itertools.product(RATES, RATES)))
def test_constant_and_control_coincide_for_exponential(lam, theta):
    want = theta / (lam + theta)
    assert threshold("constant", lam, Exponential(theta)).value == pytest.approx(want, abs=1e-12)
    assert threshold("control", lam, Exponential(theta)).value == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("lam,theta", list(itertools.product(RATES, RATES)))
def test_constant_condition_with_exponential_transform(lam, theta):
    # the exponential transform is theta / (s + theta); the swapped form s / (s + theta)
    # does not reduce to theta / (lam + theta) unless lam == theta
    def constant_bound(rstar):
        return (1 - rstar) / (lam * (1 / theta))

    correct = theta / (lam + theta)
    assert Exponential(theta).laplace(lam) == pytest.approx(correct, abs=1e-15)
    assert constant_bound(theta / (lam + theta)) == pytest.approx(correct, abs=1e-12)
    swapped = constant_bound(lam / (lam + theta))
    assert (swapped == pytest.approx(correct, abs=1e-12)) == (lam == theta)


@pytest.mark.parametrize("p,theta,lam", list(itertools.product((0.0, 0.3, 0.7), (0.5, 1.0, 2.0), RATES)))
def test_hyperexponential_threshold_closed_form_vs_quadrature(p, theta, lam):
    h = Hyperexponential(p, theta)
    quad_rstar = h.laplace_quadrature(lam)
    # independent evaluation as a two-component exponential mixture
    mix = p * theta / (lam + theta) + (1 - p) * theta**2 / (lam + theta**2)
    assert threshold("control", lam, h).value == pytest.approx(mix, abs=1e-14)
    assert abs(threshold("control", lam, h).value - quad_rstar) <= 1e-9
    assert abs(threshold("constant", lam, h).value - (1 - quad_rstar) / (lam * h.mean())) <= 1e-9


@pytest.mark.parametrize("n,mu,lam", [(2, 1.0, 1.0), (3, 2.0, 0.5), (5, 4.0, 2.0)])
def test_erlang_control_threshold(n, mu, lam):
    assert threshold("control", lam, Erlang(n, mu)).value == pytest.approx((mu / (lam + mu)) ** n, abs=1e-14)


def test_drift_examples():
    assert drift("control", 1.0, 0.6, Exponential(1.0)) == pytest.approx(0.1, abs=1e-12)
    assert drift("constant", 1.0, 0.4, Exponential(1.0)) == pytest.approx(-0.1, abs=1e-12)
    with pytest.raises(ConfigError):
        drift("linear", 1.0, 0.5, Exponential(1.0))
    with pytest.raises(ConfigError):
        drift("control", 1.0, 0.5, Exponential(1.0), cutoff=3)


@pytest.mark.parametrize("spec", NONLATTICE, ids=repr)
@pytest.mark.parametrize("policy", ["constant", "control"])
def test_drift_sign_matches_threshold_predicate(spec, policy):
    lam = 1.0
    thr = threshold(policy, lam, spec).value
    for es in np.linspace(0.05, 1.5, 30):
        d = drift(policy, lam, es, spec)
        assert (d < 0) == (lam * es < thr)
        assert d == pytest.approx(lam * es - thr, abs=1e-14)


@pytest.mark.parametrize("C", [1, 2, 5, 20])
@pytest.mark.parametrize("lam", RATES)
def test_majorant_integral_exponential(C, lam):
    # Exp(theta) residuals are Exp(theta): integral = lam / (lam + C theta)
    theta = 0.8
    assert majorant_integral(Exponential(theta), lam, C) == pytest.approx(lam / (lam + C * theta), abs=1e-9)


@pytest.mark.parametrize("spec", NONLATTICE + [Deterministic(1.5)], ids=repr)
def test_majorant_integral_against_monte_carlo(spec):
    rng = RngStream(3).generator()
    lam, C, n = 1.0, 3, 400_000
    resid = spec.sample_equilibrium(rng, (n, C), allow_lattice=True).min(axis=1)
    gamma = rng.standard_exponential(n) / lam
    mc = np.mean(resid >= gamma)
    assert abs(majorant_integral(spec, lam, C, allow_lattice=True) - mc) < 4 * math.sqrt(mc * (1 - mc) / n)


def test_majorant_integral_lattice_needs_flag():
    with pytest.raises(HypothesisViolation):
        majorant_integral(Deterministic(1.0), 1.0, 2)


@pytest.mark.parametrize("spec", NONLATTICE, ids=repr)
def test_majorant_cutoff_one_is_constant_drift(spec):
    d1 = drift("linear", 1.0, 0.3, spec, 1)
    assert d1 == pytest.approx(drift("constant", 1.0, 0.3, spec), abs=1e-8)


@pytest.mark.parametrize("spec", NONLATTICE, ids=repr)
def test_majorant_drift_nonincreasing_in_cutoff(spec):
    ds = [drift("linear", 1.0, 0.5, spec, c) for c in range(1, 65)]
    assert all(b <= a + 1e-9 for a, b in zip(ds, ds[1:]))
    # large C: bracket tends to 1
    assert drift("linear", 1.0, 0.5, spec, 10**6) == pytest.approx(0.5 - 1.0, abs=1e-3)


def test_min_cutoff_closed_form():
    # Exp(1), lam = 1: drift(C) = load - C / (C + 1), so load 0.99 needs C = 100
    assert min_cutoff(1.0, 0.99, Exponential(1.0)) == 100
    assert min_cutoff(1.0, 0.3, Exponential(1.0)) == 1


@pytest.mark.parametrize("spec", NONLATTICE, ids=repr)
@pytest.mark.parametrize("load", [0.2, 0.6, 0.9])
def test_min_cutoff_by_scanning(spec, load):
    lam = 1.0
    es = load / lam
    c = min_cutoff(lam, es, spec)
    scan = next(k for k in range(1, 10_000) if drift("linear", lam, es, spec, k) < 0)
    assert c == scan
    assert drift("linear", lam, es, spec, c) < 0
    if c > 1:
        assert drift("linear", lam, es, spec, c - 1) >= 0


def test_min_cutoff_rejects_overload():
    with pytest.raises(HypothesisViolation):
        min_cutoff(1.0, 1.0, Exponential(1.0))


def test_orbit_win_probability_is_constant_threshold():
    for spec in NONLATTICE:
        # oracle: P(pi < gamma) = int lam e^{-lam t} G(t) dt by quadrature
        val, _ = integrate.quad(lambda t: math.exp(-t) * float(spec.equilibrium_cdf(t)), 0, math.inf)
        assert orbit_win_probability(spec, 1.0) == pytest.approx(val, abs=1e-8)


# ------------------------------------------------------------ versatile policy

def test_versatile_degenerate_orbit_residual():
    # no orbit delay: a C-fold race of fresh retrials against the arrival
    lam, C = 1.0, 3
    for spec in (Exponential(1.0), Erlang(2, 1.0)):
        val, _ = integrate.quad(lambda t: lam * math.exp(-lam * t) * float(spec.sf(t)) ** C, 0, math.inf)
        assert versatile_no_win(lam, C, None, spec) == pytest.approx(val, abs=1e-8)


@pytest.mark.parametrize("orbit,retr,lam,C", [
    (Exponential(1.0), Exponential(1.0), 1.0, 1),
    (Erlang(2, 1.0), Exponential(2.0), 0.5, 2),
    (Hyperexponential(0.3, 2.0), Erlang(2, 3.0), 2.0, 3),
])
def test_versatile_double_integral_factorizes(orbit, retr, lam, C):
    # substituting t = s + u separates the integral into
    # (1 - a*(lam)) / (lam E a) * int lam e^{-lam u} P(r >= u)^C du
    head = (1 - orbit.laplace(lam)) / (lam * orbit.mean())
    tail, _ = integrate.quad(lambda u: lam * math.exp(-lam * u) * float(retr.sf(u)) ** C, 0, math.inf)
    assert versatile_no_win(lam, C, orbit, retr) == pytest.approx(head * tail, abs=1e-6)


def test_versatile_exponential_values():
    e = Exponential(1.0)
    assert versatile_no_win(1.0, 1, e, e) == pytest.approx(0.25, abs=1e-6)
    assert versatile_no_win(1.0, 1, e, e, include_pre_orbit=True) == pytest.approx(0.75, abs=1e-6)
    assert drift_versatile(1.0, 0.5, 1, e, e) == pytest.approx(-0.25, abs=1e-6)
    assert drift_versatile(1.0, 0.5, 1, e, e, include_pre_orbit=True) == pytest.approx(0.25, abs=1e-6)


def test_versatile_against_monte_carlo():
    rng = RngStream(4).generator()
    n = 10**6
    e = Exponential(1.0)
    pi = e.sample_equilibrium(rng, n)
    r = e.sample(rng, n)
    gamma = rng.standard_exponential(n)
    # with the pre-orbit region, the bracket is P(pi + r < gamma)
    bracket = 1 - versatile_no_win(1.0, 1, e, e, include_pre_orbit=True)
    assert abs(bracket - np.mean(pi + r < gamma)) < 0.005
    # as written, the double integral covers the event pi <= gamma <= pi + r
    assert abs(versatile_no_win(1.0, 1, e, e) - np.mean((pi <= gamma) & (gamma <= pi + r))) < 0.005


def test_versatile_small_arrival_rate_limit():
    # as lam -> 0 the arrival almost never comes first, so the orbit wins and the drift tends to -1
    e = Exponential(1.0)
    for lam in (1e-2, 1e-3):
        for pre in (False, True):
            d = drift_versatile(lam, 1.0, 2, e, e, include_pre_orbit=pre)
            assert abs(d + 1) < 5 * lam


# ------------------------------------------------------------ critical values

def cfg(policy, lam=1.0, retrial=Exponential(1.0), es=0.4, cutoff=None):
    return PolicyConfig(policy, lam, retrial, IID(Exponential(1 / es)), cutoff)


def test_critical_values():
    assert critical_value(cfg("constant"), "service_mean") == pytest.approx(0.5)
    assert critical_value(cfg("control", retrial=Erlang(2, 1.0)), "service_mean") == pytest.approx(0.25)
    assert critical_value(cfg("linear", es=1.0), "arrival_rate") == pytest.approx(1.0)
    assert critical_value(cfg("control", es=1.0), "arrival_rate", "noretrial") == pytest.approx(1.0)
    # control, Exp(1), Es = 1: lam = 1 / (lam + 1) at the golden ratio conjugate
    assert critical_value(cfg("control", es=1.0), "arrival_rate") == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-10)
    # majorant with Exp(1) residuals, lam = 1: Es * 1 = C / (C + 1)
    assert critical_value(cfg("linear", cutoff=3), "service_mean", "majorant") == pytest.approx(0.75, abs=1e-9)
    with pytest.raises(ConfigError):
        critical_value(cfg("control"), "retrial_rate")
