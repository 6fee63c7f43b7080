"""Embedded orbit recursions ``Q[n+1] = max(floor, Q[n] + N[n] - I[n])``.

``N[n]`` counts Poisson(lambda) arrivals during the n-th service and
``I[n]`` says whether the orbit won the race for the idle server against the
next external arrival, whose residual time ``gamma[n]`` is Exp(lambda).
The policy fixes how the orbit's competing time is drawn:

* control:  a fresh retrial time ``r[n]`` from R;
* constant: an equilibrium (forward-recurrence) residual of the orbit clock;
* linear:   the majorant, minimum of ``cutoff`` i.i.d. equilibrium residuals,
  floored at ``cutoff`` instead of 0;
* no-retrial comparison chain: ``I[n] = 1`` always.

None of the drivers depends on the state, so a run draws them in blocks and
solves the recursion in closed form (Lindley's formula), which is exact.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import distributions, service as service_mod
from .distributions import RetrialSpec
from .errors import ConfigError, DivergenceError, HypothesisViolation
from .rng import ARRIVALS, RACE, SERVICE, RngStream
from .service import ServiceModel, ServiceProcess

Q_BOUND = 2**31 - 1
BLOCK = 1 << 15


class Policy(str, enum.Enum):
    LINEAR = "linear"
    CONSTANT = "constant"
    CONTROL = "control"


class Chain(str, enum.Enum):
    POLICY = "policy"
    NORETRIAL = "noretrial"


@dataclass(frozen=True)
class PolicyConfig:
    policy: Policy
    arrival_rate: float
    retrial: RetrialSpec
    service: ServiceModel
    cutoff: int | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "policy", Policy(self.policy))
        except ValueError as exc:
            raise ConfigError(f"unknown policy {self.policy!r}") from exc
        lam = float(self.arrival_rate)
        # lambda = 0 is kept for degenerate runs; the analytic thresholds require lambda > 0
        if not (np.isfinite(lam) and lam >= 0):
            raise ConfigError(f"arrival rate must be finite and >= 0, got {self.arrival_rate!r}")
        object.__setattr__(self, "arrival_rate", lam)
        if self.policy is Policy.CONSTANT and self.retrial.lattice:
            raise HypothesisViolation("constant policy needs a nonlattice orbit-cycle distribution")
        if self.cutoff is not None:
            if int(self.cutoff) != self.cutoff or self.cutoff < 1:
                raise ConfigError("cutoff must be a positive integer")
            object.__setattr__(self, "cutoff", int(self.cutoff))

    @property
    def load(self) -> float:
        """lambda * E sigma."""
        return self.arrival_rate * self.service.mean()

    def with_arrival_rate(self, lam: float) -> "PolicyConfig":
        return replace(self, arrival_rate=lam)

    def with_service_mean(self, mean: float) -> "PolicyConfig":
        return replace(self, service=self.service.with_mean(mean))

    def to_dict(self) -> dict:
        out = {
            "policy": self.policy.value,
            "arrival_rate": self.arrival_rate,
            "retrial": self.retrial.to_dict(),
            "service": self.service.to_dict(),
        }
        if self.cutoff is not None:
            out["cutoff"] = self.cutoff
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        try:
            return cls(
                policy=data["policy"],
                arrival_rate=data["arrival_rate"],
                retrial=distributions.from_dict(data["retrial"]),
                service=service_mod.from_dict(data["service"]),
                cutoff=data.get("cutoff"),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing {exc}") from exc


@dataclass(frozen=True)
class StepDrivers:
    arrivals: int
    retrial_wins: bool
    sigma: float
    gamma: float

    @property
    def increment(self) -> int:
        return self.arrivals - int(self.retrial_wins)


@dataclass
class Drivers:
    """A block of per-step drivers as arrays."""

    sigma: np.ndarray
    arrivals: np.ndarray
    indicator: np.ndarray
    gamma: np.ndarray

    def __len__(self):
        return len(self.sigma)

    def head(self, n: int) -> "Drivers":
        return Drivers(self.sigma[:n], self.arrivals[:n], self.indicator[:n], self.gamma[:n])

    @property
    def increments(self) -> np.ndarray:
        return self.arrivals - self.indicator.astype(np.int64)


@dataclass
class DriverStats:
    """Associative accumulator of driver moments."""

    steps: int = 0
    sum_xi: int = 0
    sum_xi2: int = 0
    indicator_hits: int = 0
    sum_arrivals: int = 0
    sum_sigma: float = 0.0

    def add(self, d: Drivers):
        xi = d.increments
        self.steps += len(d)
        self.sum_xi += int(xi.sum())
        self.sum_xi2 += int((xi * xi).sum())
        self.indicator_hits += int(d.indicator.sum())
        self.sum_arrivals += int(d.arrivals.sum())
        self.sum_sigma += float(d.sigma.sum())

    def merge(self, other: "DriverStats") -> "DriverStats":
        return DriverStats(*(a + b for a, b in zip(self.astuple(), other.astuple())))

    def astuple(self):
        return (self.steps, self.sum_xi, self.sum_xi2, self.indicator_hits, self.sum_arrivals, self.sum_sigma)

    @property
    def mean_increment(self) -> float:
        return self.sum_xi / self.steps

    @property
    def increment_stderr(self) -> float:
        var = self.sum_xi2 / self.steps - self.mean_increment**2
        return float(np.sqrt(max(var, 0.0) / self.steps))

    @property
    def indicator_rate(self) -> float:
        return self.indicator_hits / self.steps

    def to_dict(self):
        return {
            "steps": self.steps,
            "mean_increment": self.mean_increment if self.steps else None,
            "increment_stderr": self.increment_stderr if self.steps else None,
            "indicator_rate": self.indicator_rate if self.steps else None,
            "mean_sigma": self.sum_sigma / self.steps if self.steps else None,
        }


class DriverSource:
    """Draws driver blocks for one replication from three independent substreams."""

    def __init__(self, config: PolicyConfig, stream: RngStream, chain: Chain = Chain.POLICY):
        self.config = config
        self.chain = Chain(chain)
        if self.chain is Chain.POLICY and config.policy is Policy.LINEAR and config.cutoff is None:
            raise ConfigError("linear majorant chain needs a cutoff C")
        self._service = config.service.start(stream.generator(SERVICE))
        self._arr = stream.generator(ARRIVALS)
        self._race = stream.generator(RACE)

    @property
    def floor(self) -> int:
        if self.chain is Chain.POLICY and self.config.policy is Policy.LINEAR:
            return self.config.cutoff
        return 0

    def draw(self, n: int) -> Drivers:
        cfg = self.config
        lam = cfg.arrival_rate
        sigma = self._service.take(n)
        arrivals = self._arr.poisson(lam * sigma).astype(np.int64)
        if lam > 0:
            gamma = self._arr.standard_exponential(n) / lam
        else:
            gamma = np.full(n, np.inf)
        if self.chain is Chain.NORETRIAL:
            indicator = np.ones(n, dtype=bool)
        elif cfg.policy is Policy.CONTROL:
            indicator = cfg.retrial.sample(self._race, n) < gamma
        elif cfg.policy is Policy.CONSTANT:
            indicator = cfg.retrial.sample_equilibrium(self._race, n) < gamma
        else:
            resid = cfg.retrial.sample_equilibrium(self._race, (n, cfg.cutoff), allow_lattice=True)
            indicator = resid.min(axis=1) < gamma
        return Drivers(sigma, arrivals, np.asarray(indicator, dtype=bool), gamma)


def lindley(start: int, increments: np.ndarray, floor: int = 0) -> np.ndarray:
    """States after each increment of ``Q -> max(floor, Q + xi)``, from ``start``.

    Y = Q - floor satisfies Y_n = S_n - min(-Y_0, min_{k<=n} S_k).
    """
    s = np.cumsum(increments, dtype=np.int64)
    low = np.minimum.accumulate(np.minimum(s, -(start - floor)))
    return s - low + floor


def apply_step(q: int, arrivals: int, indicator: bool, floor: int = 0) -> int:
    return max(floor, q + arrivals - int(indicator))


def _single(config, rng, service, chain):
    """One step of drivers from a generator (a single-step view of DriverSource)."""
    lam = config.arrival_rate
    if service is None:
        service = config.service.start(rng)
    sigma = service.next_service()
    n = int(rng.poisson(lam * sigma))
    gamma = float(rng.standard_exponential() / lam) if lam > 0 else float("inf")
    if chain == "noretrial":
        win = True
    elif chain == "control":
        win = bool(config.retrial.sample(rng) < gamma)
    elif chain == "constant":
        win = bool(config.retrial.sample_equilibrium(rng) < gamma)
    else:
        resid = config.retrial.sample_equilibrium(rng, config.cutoff, allow_lattice=True)
        win = bool(np.min(resid) < gamma)
    return StepDrivers(n, win, sigma, gamma)


def _step(q, config, rng, service, chain, floor, arrivals, indicator):
    if arrivals is not None and indicator is not None:
        d = StepDrivers(int(arrivals), bool(indicator), float("nan"), float("nan"))
    else:
        d = _single(config, rng, service, chain)
        if arrivals is not None:
            d = replace(d, arrivals=int(arrivals))
        if indicator is not None:
            d = replace(d, retrial_wins=bool(indicator))
    return apply_step(q, d.arrivals, d.retrial_wins, floor), d


def step_control(q, config, rng=None, service: ServiceProcess | None = None, *, arrivals=None, indicator=None):
    """One control-policy step; a fresh retrial time races the next arrival."""
    return _step(q, config, rng, service, "control", 0, arrivals, indicator)


def step_constant(q, config, rng=None, service: ServiceProcess | None = None, *, arrivals=None, indicator=None):
    """One constant-policy step; the orbit clock's equilibrium residual races the next arrival."""
    if config.retrial.lattice:
        raise HypothesisViolation("constant policy needs a nonlattice orbit-cycle distribution")
    return _step(q, config, rng, service, "constant", 0, arrivals, indicator)


def step_linear_majorant(q, config, rng=None, service: ServiceProcess | None = None, *, arrivals=None, indicator=None):
    """One step of the majorant: min of C equilibrium residuals races the arrival, floor at C."""
    if config.cutoff is None:
        raise ConfigError("linear majorant needs a cutoff C")
    return _step(q, config, rng, service, "linear", config.cutoff, arrivals, indicator)


def step_noretrial(q, config, rng=None, service: ServiceProcess | None = None, *, arrivals=None):
    return _step(q, config, rng, service, "noretrial", 0, arrivals, True)


@dataclass
class Trajectory:
    states: np.ndarray
    config: PolicyConfig
    seed: int
    stream: int
    chain: Chain
    stats: DriverStats
    drivers: Drivers | None = None
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.states) - 1

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "Q", "N", "I", "sigma"])
            w.writerow([0, int(self.states[0]), "", "", ""])
            if self.drivers is None:
                for n, q in enumerate(self.states[1:], start=1):
                    w.writerow([n, int(q), "", "", ""])
            else:
                d = self.drivers
                for n in range(1, len(self.states)):
                    w.writerow([n, int(self.states[n]), int(d.arrivals[n - 1]), int(d.indicator[n - 1]), repr(float(d.sigma[n - 1]))])
        return path

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "chain": self.chain.value,
            "seed": self.seed,
            "stream": self.stream,
            "horizon": self.horizon,
            "initial": int(self.states[0]),
            "final": int(self.states[-1]),
            "fraction_at_floor": float(np.mean(self.states[1:] == self.states.min())) if self.horizon else None,
            "drivers": self.stats.to_dict(),
            **self.meta,
        }

    def write(self, out_dir, stem="trajectory"):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_csv(out / f"{stem}.csv")
        (out / f"{stem}.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return out


def simulate_chain(
    config: PolicyConfig,
    horizon: int,
    seed: int,
    q0: int = 0,
    *,
    chain: Chain | str = Chain.POLICY,
    stream: int = 0,
    keep_drivers: bool = True,
    bound: int = Q_BOUND,
) -> Trajectory:
    """Iterate the policy recursion for ``horizon`` steps.

    Deterministic in (config, seed, stream, q0, horizon). Raises
    :class:`DivergenceError` if the orbit passes ``bound``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if q0 < 0:
        raise ValueError("initial orbit size must be nonnegative")
    src = DriverSource(config, RngStream(seed, stream), chain)
    floor = src.floor
    states = np.empty(horizon + 1, dtype=np.int64)
    states[0] = q0
    stats = DriverStats()
    kept = []
    pos = 0
    while pos < horizon:
        # always draw whole blocks so a run is a prefix of any longer run
        n = min(BLOCK, horizon - pos)
        d = src.draw(BLOCK).head(n)
        stats.add(d)
        if keep_drivers:
            kept.append(d)
        block = lindley(int(states[pos]), d.increments, floor)
        states[pos + 1:pos + 1 + n] = block
        over = np.flatnonzero(block > bound)
        if over.size:
            step = pos + 1 + int(over[0])
            raise DivergenceError(step, bound, partial=states[:step + 1].copy())
        pos += n
    drivers = None
    if keep_drivers:
        drivers = Drivers(*(np.concatenate([getattr(k, a) for k in kept]) for a in ("sigma", "arrivals", "indicator", "gamma")))
    return Trajectory(states, config, seed, stream, Chain(chain), stats, drivers)


@dataclass(frozen=True)
class CouplingReport:
    offset: int
    horizon: int
    times: tuple  # first step with equal states per replication, None if never

    @property
    def coupled_fraction(self) -> float:
        return sum(t is not None for t in self.times) / len(self.times)

    def fraction_before(self, step: int) -> float:
        return sum(t is not None and t < step for t in self.times) / len(self.times)

    def to_dict(self):
        return {
            "offset": self.offset,
            "horizon": self.horizon,
            "replications": len(self.times),
            "coupled_fraction": self.coupled_fraction,
            "times": list(self.times),
        }


def coupled_chains(config, horizon, seed, starts, *, stream=0, chain=Chain.POLICY) -> list[np.ndarray]:
    """Chains from several initial states driven by one common driver stream."""
    src = DriverSource(config, RngStream(seed, stream), chain)
    floor = src.floor
    paths = [[np.array([s], dtype=np.int64)] for s in starts]
    last = list(starts)
    pos = 0
    while pos < horizon:
        n = min(BLOCK, horizon - pos)
        inc = src.draw(BLOCK).increments[:n]
        for i in range(len(starts)):
            block = lindley(int(last[i]), inc, floor)
            paths[i].append(block)
            last[i] = int(block[-1])
        pos += n
    return [np.concatenate(p) for p in paths]


def coupling_experiment(config, horizon, seed, offset, replications=100, *, chain=Chain.POLICY) -> CouplingReport:
    """Run pairs of common-driver chains from the floor and floor + offset; record meeting times."""
    if offset < 0:
        raise ValueError("offset must be >= 0")
    floor = config.cutoff if (Chain(chain) is Chain.POLICY and config.policy is Policy.LINEAR) else 0
    times = []
    for rep in range(replications):
        if offset == 0:
            times.append(0)
            continue
        a, b = coupled_chains(config, horizon, seed, (floor, floor + offset), stream=rep, chain=chain)
        hit = np.flatnonzero(a == b)
        times.append(int(hit[0]) if hit.size else None)
    return CouplingReport(offset, horizon, tuple(times))
