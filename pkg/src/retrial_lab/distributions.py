"""Positive distributions for retrial, orbit-cycle and service times.

Each kind is a frozen dataclass validated at construction. All kinds
expose moments, cdf/survival/density, the Laplace transform
``E[exp(-s X)]`` and the equilibrium (forward-recurrence) law of the
renewal process they generate, whose cdf is ``(1/E X) * int_0^t (1 - F)``.

Random draws consume a fixed number of variates from the generator:

==========================  ================================================
kind                        draws per sample
==========================  ================================================
Exponential                 1 standard exponential
Hyperexponential            1 uniform + 1 standard exponential
GeneralHyperexp             1 uniform + 1 standard exponential
Erlang(n)                   n standard exponentials
Deterministic               none
Lognormal                   1 standard normal
==========================  ================================================

Equilibrium draws: exponential mixtures use the mixture of the phases
re-weighted by phase mean; Erlang(n) picks a phase count uniformly in
1..n (1 uniform + n exponentials); Deterministic is uniform on [0, d]
(lattice, flagged); Lognormal inverts the closed-form equilibrium cdf by
bisection to 1e-10 in t (1 uniform).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, HypothesisViolation, NumericalFailure

LAPLACE_TOL = 1e-10
INVERSE_CDF_TOL = 1e-10
TAIL_MASS = 1e-12


class RetrialSpec:
    """Common interface; concrete kinds are the dataclasses below."""

    kind: ClassVar[str]
    lattice: ClassVar[bool] = False
    closed_form_laplace: ClassVar[bool] = True

    # -- moments -------------------------------------------------------
    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        m = self.mean()
        return self.second_moment() - m * m

    # -- distribution functions ----------------------------------------
    def cdf(self, t):
        return 1.0 - self.sf(t)

    def sf(self, t):
        raise NotImplementedError

    def pdf(self, t):
        raise NotImplementedError

    def tail_point(self, mass: float = TAIL_MASS) -> float:
        """A time T with P(X > T) <= mass."""
        raise NotImplementedError

    # -- Laplace transform ---------------------------------------------
    def laplace(self, s):
        """E[exp(-s X)] for s >= 0, closed form when the kind has one."""
        if np.any(np.asarray(s) < 0):
            raise ValueError("Laplace argument must be nonnegative")
        if self.closed_form_laplace:
            return self._laplace_closed(s)
        return _vectorize_scalar(self.laplace_quadrature, s)

    def _laplace_closed(self, s):
        raise NotImplementedError

    def laplace_quadrature(self, s: float, tol: float = LAPLACE_TOL) -> float:
        """Adaptive quadrature of int_0^T exp(-s t) r(t) dt, T past the 1e-12 tail."""
        s = float(s)
        if s < 0:
            raise ValueError("Laplace argument must be nonnegative")
        if s == 0.0:
            return 1.0
        upper = self.tail_point()
        breaks = self._breakpoints(upper)
        total, err = 0.0, 0.0
        edges = [0.0, *breaks, upper]
        for a, b in zip(edges[:-1], edges[1:]):
            val, e = integrate.quad(
                lambda t: math.exp(-s * t) * float(self.pdf(t)),
                a, b, epsabs=tol / 10, epsrel=1e-13, limit=500,
            )
            total += val
            err += e
        if err > tol:
            raise NumericalFailure(f"Laplace quadrature for {self!r} at s={s}", err)
        return total

    def _breakpoints(self, upper: float) -> list[float]:
        pts = [p for p in (0.01 * self.mean(), self.mean(), 5 * self.mean()) if 0 < p < upper]
        return pts

    # -- equilibrium (forward recurrence) law --------------------------
    def _check_lattice(self, allow_lattice: bool):
        if self.lattice and not allow_lattice:
            raise HypothesisViolation(
                f"{self.kind} is lattice; the renewal limit needs allow_lattice=True"
            )

    def equilibrium_cdf(self, t, allow_lattice: bool = False):
        self._check_lattice(allow_lattice)
        t = np.asarray(t, dtype=float)
        return np.clip(1.0 - self._eq_sf(np.maximum(t, 0.0)), 0.0, 1.0)

    def equilibrium_sf(self, t, allow_lattice: bool = False):
        self._check_lattice(allow_lattice)
        t = np.asarray(t, dtype=float)
        return np.clip(self._eq_sf(np.maximum(t, 0.0)), 0.0, 1.0)

    def equilibrium_pdf(self, t, allow_lattice: bool = False):
        """(1 - R(t)) / E r."""
        self._check_lattice(allow_lattice)
        return self.sf(np.maximum(np.asarray(t, dtype=float), 0.0)) / self.mean()

    def _eq_sf(self, t):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def sample_equilibrium(self, rng: np.random.Generator, size=None, allow_lattice: bool = False):
        self._check_lattice(allow_lattice)
        return self._sample_eq(rng, size)

    def _sample_eq(self, rng, size):
        u = rng.random(size)
        return _invert_increasing(lambda t: 1.0 - self._eq_sf(t), u, self.mean())

    # -- transformations -----------------------------------------------
    def scaled(self, factor: float) -> "RetrialSpec":
        """Law of ``factor * X``."""
        raise NotImplementedError

    def with_mean(self, mean: float) -> "RetrialSpec":
        return self.scaled(mean / self.mean())

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        params = {}
        for f in fields(self):
            v = getattr(self, f.name)
            params[f.name] = list(v) if isinstance(v, tuple) else v
        return {"kind": self.kind, "params": params}


def _vectorize_scalar(fn, s):
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0:
        return fn(float(arr))
    return np.vectorize(fn, otypes=[float])(arr)


def _invert_increasing(cdf, u, scale, tol=INVERSE_CDF_TOL):
    """Vectorized bisection for cdf(t) = u on t >= 0."""
    u = np.asarray(u, dtype=float)
    lo = np.zeros_like(u)
    hi = np.full_like(u, max(scale, 1e-300))
    for _ in range(2000):
        short = cdf(hi) < u
        if not short.any():
            break
        hi = np.where(short, hi * 2.0, hi)
    else:
        raise NumericalFailure("equilibrium inverse-cdf bracket did not close", float("inf"))
    while True:
        width = np.max(hi - lo) if u.size else 0.0
        if width <= tol:
            break
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(mid == lo) and np.all(mid == hi):
            raise NumericalFailure("equilibrium inverse-cdf bisection stalled", float(width))
    out = 0.5 * (lo + hi)
    return float(out) if out.ndim == 0 else out


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class Exponential(RetrialSpec):
    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def mean(self):
        return 1.0 / self.rate

    def second_moment(self):
        return 2.0 / self.rate**2

    def sf(self, t):
        return np.exp(-self.rate * np.maximum(t, 0.0))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def tail_point(self, mass=TAIL_MASS):
        return -math.log(mass) / self.rate

    def _laplace_closed(self, s):
        val = self.rate / (np.asarray(s, dtype=float) + self.rate)
        return float(val) if val.ndim == 0 else val

    def _eq_sf(self, t):
        return np.exp(-self.rate * t)

    def sample(self, rng, size=None):
        return rng.standard_exponential(size) / self.rate

    def _sample_eq(self, rng, size):
        return rng.standard_exponential(size) / self.rate

    def scaled(self, factor):
        return Exponential(self.rate / factor)


class _ExpMixture(RetrialSpec):
    """Shared machinery for finite mixtures of exponentials."""

    def _phases(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def mean(self):
        w, r = self._phases()
        return float(np.sum(w / r))

    def second_moment(self):
        w, r = self._phases()
        return float(np.sum(2.0 * w / r**2))

    def sf(self, t):
        w, r = self._phases()
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return np.sum(w * np.exp(-np.multiply.outer(t, r)), axis=-1)

    def pdf(self, t):
        w, r = self._phases()
        t = np.asarray(t, dtype=float)
        val = np.sum(w * r * np.exp(-np.multiply.outer(np.maximum(t, 0.0), r)), axis=-1)
        return np.where(t >= 0, val, 0.0)

    def tail_point(self, mass=TAIL_MASS):
        _, r = self._phases()
        return -math.log(mass) / float(np.min(r))

    def _breakpoints(self, upper):
        _, r = self._phases()
        return sorted({float(p) for p in 1.0 / r if 0 < p < upper})

    def _mixture_laplace(self, s):
        w, r = self._phases()
        s = np.asarray(s, dtype=float)
        val = np.sum(w * r / (np.multiply.outer(s, np.ones_like(r)) + r), axis=-1)
        return float(val) if val.ndim == 0 else val

    def _eq_sf(self, t):
        w, r = self._phases()
        v = w / r
        v = v / v.sum()
        return np.sum(v * np.exp(-np.multiply.outer(t, r)), axis=-1)

    def _pick(self, rng, weights, size):
        u = rng.random(size)
        idx = np.searchsorted(np.cumsum(weights)[:-1], u, side="right")
        return idx

    def sample(self, rng, size=None):
        w, r = self._phases()
        idx = self._pick(rng, w, size)
        return rng.standard_exponential(size) / r[idx]

    def _sample_eq(self, rng, size):
        w, r = self._phases()
        v = w / r
        idx = self._pick(rng, v / v.sum(), size)
        return rng.standard_exponential(size) / r[idx]


@dataclass(frozen=True)
class Hyperexponential(_ExpMixture):
    """Two-phase mixture with weight ``p`` on rate ``theta`` and ``1-p`` on ``theta**2``.

    Density ``p*theta*exp(-theta x) + (1-p)*theta**2*exp(-theta**2 x)``.
    """

    p: float
    theta: float
    kind: ClassVar[str] = "hyperexponential"

    def __post_init__(self):
        object.__setattr__(self, "theta", _positive("theta", self.theta))
        p = float(self.p)
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"p must lie in [0, 1), got {self.p!r}")
        object.__setattr__(self, "p", p)

    def _phases(self):
        return np.array([self.p, 1.0 - self.p]), np.array([self.theta, self.theta**2])

    def _laplace_closed(self, s):
        p, th = self.p, self.theta
        s = np.asarray(s, dtype=float)
        val = th * (s * (p + (1 - p) * th) + th**2) / ((s + th) * (s + th**2))
        return float(val) if val.ndim == 0 else val

    def as_mixture(self) -> "GeneralHyperexp":
        w, r = self._phases()
        return GeneralHyperexp(tuple(w), tuple(r))

    def scaled(self, factor):
        return self.as_mixture().scaled(factor)


@dataclass(frozen=True)
class GeneralHyperexp(_ExpMixture):
    weights: tuple
    rates: tuple
    kind: ClassVar[str] = "general_hyperexponential"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        r = tuple(_positive("rate", x) for x in self.rates)
        if len(w) != len(r) or not w:
            raise ConfigError("weights and rates must be nonempty and of equal length")
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
            raise ConfigError(f"weights must be nonnegative and sum to 1, got {w}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "rates", r)

    def _phases(self):
        return np.array(self.weights), np.array(self.rates)

    def _laplace_closed(self, s):
        return self._mixture_laplace(s)

    def scaled(self, factor):
        return GeneralHyperexp(self.weights, tuple(r / factor for r in self.rates))


@dataclass(frozen=True)
class Erlang(RetrialSpec):
    shape: int
    rate: float
    kind: ClassVar[str] = "erlang"

    def __post_init__(self):
        if isinstance(self.shape, bool) or int(self.shape) != self.shape or self.shape < 1:
            raise ConfigError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    @property
    def _frozen(self):
        return stats.gamma(self.shape, scale=1.0 / self.rate)

    def mean(self):
        return self.shape / self.rate

    def second_moment(self):
        return self.shape * (self.shape + 1) / self.rate**2

    def sf(self, t):
        return special.gammaincc(self.shape, self.rate * np.maximum(t, 0.0))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self._frozen.pdf(np.maximum(t, 0.0)), 0.0)

    def tail_point(self, mass=TAIL_MASS):
        return float(self._frozen.isf(mass))

    def _laplace_closed(self, s):
        s = np.asarray(s, dtype=float)
        val = (self.rate / (s + self.rate)) ** self.shape
        return float(val) if val.ndim == 0 else val

    def _eq_sf(self, t):
        # equilibrium law is the uniform mixture of Erlang(k, rate), k = 1..n
        k = np.arange(1, self.shape + 1)
        return np.mean(special.gammaincc(k, np.multiply.outer(self.rate * t, np.ones(self.shape))), axis=-1)

    def sample(self, rng, size=None):
        shape = (self.shape,) if size is None else (*np.atleast_1d(size), self.shape)
        draws = rng.standard_exponential(shape).sum(axis=-1) / self.rate
        return float(draws) if size is None else draws

    def _sample_eq(self, rng, size):
        u = rng.random(size)
        k = np.minimum((np.asarray(u) * self.shape).astype(int), self.shape - 1) + 1
        shape = (self.shape,) if size is None else (*np.atleast_1d(size), self.shape)
        e = rng.standard_exponential(shape)
        partial = np.cumsum(e, axis=-1)
        out = np.take_along_axis(partial, (k - 1)[..., None], axis=-1)[..., 0] / self.rate
        return float(out) if size is None else out

    def scaled(self, factor):
        return Erlang(self.shape, self.rate / factor)


@dataclass(frozen=True)
class Deterministic(RetrialSpec):
    value: float
    kind: ClassVar[str] = "deterministic"
    lattice: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "value", _positive("value", self.value))

    def mean(self):
        return self.value

    def second_moment(self):
        return self.value**2

    def sf(self, t):
        return np.where(np.asarray(t, dtype=float) < self.value, 1.0, 0.0)

    def pdf(self, t):
        raise NotImplementedError("Deterministic has no density")

    def tail_point(self, mass=TAIL_MASS):
        return self.value

    def _laplace_closed(self, s):
        s = np.asarray(s, dtype=float)
        val = np.exp(-s * self.value)
        return float(val) if val.ndim == 0 else val

    def laplace_quadrature(self, s, tol=LAPLACE_TOL):
        # survival form r*(s) = 1 - s * int_0^inf exp(-s t)(1 - R(t)) dt; R jumps at d
        s = float(s)
        if s == 0.0:
            return 1.0
        val, err = integrate.quad(lambda t: math.exp(-s * t), 0.0, self.value, epsabs=tol / 10, epsrel=1e-13)
        if s * err > tol:
            raise NumericalFailure(f"Laplace quadrature for {self!r} at s={s}", s * err)
        return 1.0 - s * val

    def _eq_sf(self, t):
        return np.clip(1.0 - t / self.value, 0.0, 1.0)

    def sample(self, rng, size=None):
        return self.value if size is None else np.full(size, self.value)

    def _sample_eq(self, rng, size):
        return self.value * rng.random(size)

    def scaled(self, factor):
        return Deterministic(self.value * factor)


@dataclass(frozen=True)
class Lognormal(RetrialSpec):
    """``exp(location + scale * Z)``; no closed-form transform, so Laplace goes through quadrature."""

    location: float
    scale: float
    kind: ClassVar[str] = "lognormal"
    closed_form_laplace: ClassVar[bool] = False

    def __post_init__(self):
        loc = float(self.location)
        if not math.isfinite(loc):
            raise ConfigError("lognormal location must be finite")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    @property
    def _frozen(self):
        return stats.lognorm(self.scale, scale=math.exp(self.location))

    def mean(self):
        return math.exp(self.location + 0.5 * self.scale**2)

    def second_moment(self):
        return math.exp(2 * self.location + 2 * self.scale**2)

    def sf(self, t):
        return self._frozen.sf(np.maximum(t, 0.0))

    def pdf(self, t):
        return self._frozen.pdf(t)

    def tail_point(self, mass=TAIL_MASS):
        return float(self._frozen.isf(mass))

    def _breakpoints(self, upper):
        med = math.exp(self.location)
        return sorted({p for p in (med * math.exp(-3 * self.scale), med, med * math.exp(3 * self.scale)) if 0 < p < upper})

    def _eq_sf(self, t):
        # int_t^inf (1 - F) = m * Phi_c(z - s) - t * S(t), with z = (ln t - mu) / s
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(t) - self.location) / self.scale
        return special.ndtr(-(z - self.scale)) - t * special.ndtr(-z) / self.mean()

    def sample(self, rng, size=None):
        return np.exp(self.location + self.scale * rng.standard_normal(size))

    def scaled(self, factor):
        return Lognormal(self.location + math.log(factor), self.scale)


KINDS: dict[str, type[RetrialSpec]] = {
    cls.kind: cls for cls in (Exponential, Hyperexponential, GeneralHyperexp, Erlang, Deterministic, Lognormal)
}

_SHORT = {
    "exp": "exponential",
    "hyperexp": "hyperexponential",
    "mix": "general_hyperexponential",
    "erlang": "erlang",
    "det": "deterministic",
    "lognormal": "lognormal",
}


def from_dict(data: dict) -> RetrialSpec:
    """Inverse of :meth:`RetrialSpec.to_dict`."""
    try:
        cls = KINDS[data["kind"]]
        params = dict(data.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"unknown or malformed distribution {data!r}") from exc
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {cls.kind}: {exc}") from exc


def parse_spec(text: str) -> RetrialSpec:
    """Parse CLI shorthand.

    ``exp:RATE``, ``hyperexp:P,THETA``, ``mix:W@RATE,W@RATE,...``,
    ``erlang:N,RATE``, ``det:VALUE``, ``lognormal:LOC,SCALE``.
    """
    name, _, rest = text.partition(":")
    kind = _SHORT.get(name.strip().lower(), name.strip().lower())
    if kind not in KINDS or not rest:
        raise ConfigError(f"cannot parse distribution {text!r}")
    try:
        if kind == "general_hyperexponential":
            pairs = [item.split("@") for item in rest.split(",")]
            return GeneralHyperexp(tuple(float(w) for w, _ in pairs), tuple(float(r) for _, r in pairs))
        nums = [float(x) for x in rest.split(",")]
        if kind == "erlang":
            return Erlang(int(nums[0]), nums[1])
        return KINDS[kind](*nums)
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"cannot parse distribution {text!r}: {exc}") from exc
