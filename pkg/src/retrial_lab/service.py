"""Stationary ergodic service-time sequences with exact long-run means.

A :class:`ServiceModel` is an immutable description; :meth:`ServiceModel.start`
binds it to a generator and returns a :class:`ServiceProcess`, which owns the
mutable state. Draws are produced in blocks on a fixed size schedule, so the
sequence a process yields does not depend on whether it is consumed one value
at a time (:meth:`ServiceProcess.next_service`) or in batches
(:meth:`ServiceProcess.take`).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.sparse.csgraph import connected_components

from . import distributions
from .distributions import RetrialSpec
from .errors import ConfigError, NumericalFailure

FIRST_BLOCK = 64
BLOCK = 4096
STATIONARY_RESIDUAL = 1e-12


class ServiceModel:
    kind: str

    def mean(self) -> float:
        """Exact long-run mean of the sequence."""
        raise NotImplementedError

    def scaled(self, factor: float) -> "ServiceModel":
        raise NotImplementedError

    def with_mean(self, mean: float) -> "ServiceModel":
        return self.scaled(mean / self.mean())

    def start(self, rng: np.random.Generator) -> "ServiceProcess":
        return ServiceProcess(self, rng)

    def _block(self, rng, n, state):
        """Return (n draws, new state)."""
        raise NotImplementedError

    def _initial_state(self, rng):
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


def long_run_mean(model: ServiceModel) -> float:
    return model.mean()


@dataclass(frozen=True)
class IID(ServiceModel):
    dist: RetrialSpec
    kind = "iid"

    def mean(self):
        return self.dist.mean()

    def scaled(self, factor):
        return IID(self.dist.scaled(factor))

    def _block(self, rng, n, state):
        return np.asarray(self.dist.sample(rng, n), dtype=float), state

    def to_dict(self):
        return {"kind": self.kind, "params": {"distribution": self.dist.to_dict()}}


@dataclass(frozen=True)
class MarkovModulated(ServiceModel):
    """Exponential services whose rate follows a stationary finite Markov chain.

    The modulating state is drawn from the stationary law at start, so the
    sequence is strictly stationary from the first service. The state advances
    once per service.
    """

    transition: tuple
    rates: tuple
    kind = "markov_modulated"

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        k = len(self.rates)
        if P.shape != (k, k) or k == 0:
            raise ConfigError("transition must be a k x k matrix matching len(rates)")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("transition matrix must be row-stochastic")
        if any(not (r > 0 and np.isfinite(r)) for r in self.rates):
            raise ConfigError("service rates must be finite and positive")
        n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
        if n_comp != 1:
            raise ConfigError("modulating chain must be irreducible")
        object.__setattr__(self, "transition", tuple(tuple(float(x) for x in row) for row in P))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

    def stationary(self) -> np.ndarray:
        P = np.array(self.transition)
        k = len(P)
        A = P.T - np.eye(k)
        A[-1, :] = 1.0
        b = np.zeros(k)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
        resid = float(np.max(np.abs(pi @ P - pi)))
        if resid > STATIONARY_RESIDUAL:
            raise NumericalFailure("stationary law of the modulating chain", resid)
        return pi

    def mean(self):
        return float(self.stationary() @ (1.0 / np.array(self.rates)))

    def scaled(self, factor):
        return MarkovModulated(self.transition, tuple(r / factor for r in self.rates))

    def _initial_state(self, rng):
        pi = self.stationary()
        return int(np.searchsorted(np.cumsum(pi)[:-1], rng.random(), side="right"))

    def _block(self, rng, n, state):
        cum = [list(np.cumsum(row)[:-1]) for row in self.transition]
        rates = self.rates
        e = rng.standard_exponential(n)
        u = rng.random(n)
        out = np.empty(n)
        for i in range(n):
            out[i] = e[i] / rates[state]
            state = bisect.bisect_right(cum[state], u[i])
        return out, state

    def to_dict(self):
        return {"kind": self.kind, "params": {"transition": [list(r) for r in self.transition], "rates": list(self.rates)}}


@dataclass(frozen=True)
class MovingAverage(ServiceModel):
    """Average of ``window`` consecutive i.i.d. base draws, windows overlapping.

    Stationary and (window-1)-dependent; lag-k correlation is (w-k)/w for k < w.
    """

    base: RetrialSpec
    window: int
    kind = "moving_average"

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 1:
            raise ConfigError("window must be a positive integer")
        object.__setattr__(self, "window", int(self.window))

    def mean(self):
        return self.base.mean()

    def scaled(self, factor):
        return MovingAverage(self.base.scaled(factor), self.window)

    def _initial_state(self, rng):
        return np.asarray(self.base.sample(rng, self.window - 1), dtype=float)

    def _block(self, rng, n, state):
        fresh = np.asarray(self.base.sample(rng, n), dtype=float)
        full = np.concatenate([state, fresh])
        out = sliding_window_view(full, self.window).mean(axis=1)
        return out, full[len(full) - (self.window - 1):]

    def to_dict(self):
        return {"kind": self.kind, "params": {"base": self.base.to_dict(), "window": self.window}}


class ServiceProcess:
    """Mutable generator of one service sequence."""

    def __init__(self, model: ServiceModel, rng: np.random.Generator):
        self.model = model
        self._rng = rng
        self._state = model._initial_state(rng)
        self._buf = np.empty(0)
        self._pos = 0
        self._next_block = FIRST_BLOCK

    def _refill(self):
        # block sizes double up to BLOCK, so short-lived processes stay cheap
        self._buf, self._state = self.model._block(self._rng, self._next_block, self._state)
        self._next_block = min(2 * self._next_block, BLOCK)
        self._pos = 0

    def next_service(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        val = self._buf[self._pos]
        self._pos += 1
        return float(val)

    def take(self, n: int) -> np.ndarray:
        parts = []
        need = n
        while need > 0:
            if self._pos >= len(self._buf):
                self._refill()
            chunk = self._buf[self._pos:self._pos + need]
            parts.append(chunk)
            self._pos += len(chunk)
            need -= len(chunk)
        return np.concatenate(parts) if parts else np.empty(0)


SERVICE_KINDS = {"iid": IID, "markov_modulated": MarkovModulated, "moving_average": MovingAverage}


def from_dict(data: dict) -> ServiceModel:
    try:
        kind = data["kind"]
        params = dict(data.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed service model {data!r}") from exc
    if kind == "iid":
        dist = params.get("distribution")
        if dist is None:
            raise ConfigError("iid service needs a 'distribution'")
        return IID(distributions.from_dict(dist))
    if kind == "markov_modulated":
        try:
            return MarkovModulated(tuple(map(tuple, params["transition"])), tuple(params["rates"]))
        except KeyError as exc:
            raise ConfigError(f"markov_modulated service missing {exc}") from exc
    if kind == "moving_average":
        try:
            return MovingAverage(distributions.from_dict(params["base"]), params["window"])
        except KeyError as exc:
            raise ConfigError(f"moving_average service missing {exc}") from exc
    # a bare distribution is accepted as shorthand for i.i.d. service
    if kind in distributions.KINDS:
        return IID(distributions.from_dict(data))
    raise ConfigError(f"unknown service kind {kind!r}")
