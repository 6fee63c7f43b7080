"""Continuous-time simulation of the single-server retrial queue.

The run alternates idle and busy phases. At each idle epoch the next
customer to enter service is whoever fires first: the next external arrival
or the orbit, per policy. During a service every external arrival is
blocked and joins the orbit. ``Q[n]`` is the orbit size just after the n-th
service completion.

Policy semantics
----------------
linear
    Every orbit customer carries its own clock; after a failed attempt
    (server busy) the customer redraws a fresh R time. Each customer's
    attempt epochs therefore form a renewal process from its joining time,
    and failed attempts change nothing, so clocks are advanced lazily at idle
    epochs instead of being processed one by one. Failed attempts are not
    written to the event log.
constant
    One orbit clock with i.i.d. R cycles runs regardless of server state.
    A fire with an idle server and a nonempty orbit admits the head of the
    orbit (FIFO); every other fire is a no-op, logged as ``orbit_clock``.
control
    Each service completion starts one fresh R clock. If it fires before the
    next arrival and the orbit is nonempty, the head of the orbit enters
    service; an arrival that finds the server idle takes it and cancels the
    clock. A fire with an empty orbit is a no-op.

Simultaneous events resolve in the order service_end < retrial < orbit_clock
< arrival, which only matters for lattice (deterministic) retrial times.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, RetrialLabError
from .rng import ARRIVALS, RACE, SERVICE, RngStream
from .srs import Policy, PolicyConfig

PRIORITY = {"service_end": 0, "retrial": 1, "orbit_clock": 2, "arrival": 3}
MAX_ORBIT = 10**6
DRAW_BLOCK = 1024


class EmptyLog(RetrialLabError, ValueError):
    """The run had no service completions."""


class _Draws:
    """Scalar draws served from fixed blocks (keeps consumption order deterministic)."""

    def __init__(self, fn):
        self._fn = fn
        self._buf = []

    def __call__(self):
        if not self._buf:
            self._buf = list(self._fn(DRAW_BLOCK))[::-1]
        return self._buf.pop()


@dataclass
class EventLog:
    times: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    orbit: list = field(default_factory=list)
    busy: list = field(default_factory=list)
    arrivals: list = field(default_factory=list)
    completions: list = field(default_factory=list)

    def record(self, t, kind, orbit, busy, arrivals, completions):
        self.times.append(t)
        self.kinds.append(kind)
        self.orbit.append(orbit)
        self.busy.append(busy)
        self.arrivals.append(arrivals)
        self.completions.append(completions)

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "event", "orbit_size", "server_state"])
            for t, k, q, b in zip(self.times, self.kinds, self.orbit, self.busy):
                w.writerow([repr(t), k, q, "busy" if b else "idle"])
        return path


@dataclass
class DesResult:
    config: PolicyConfig
    seed: int
    stream: int
    embedded: np.ndarray
    completion_times: np.ndarray
    log: EventLog | None
    end_time: float
    total_arrivals: int

    def embedded_orbit_sequence(self) -> np.ndarray:
        return embedded_orbit_sequence(self)


def embedded_orbit_sequence(result: DesResult) -> np.ndarray:
    """Orbit sizes just after each service completion."""
    if len(result.embedded) == 0:
        raise EmptyLog("no service completions in this run")
    return result.embedded


class _LinearOrbit:
    """Per-customer next-attempt epochs in a growable array."""

    def __init__(self, retrial, rng):
        self._retrial = retrial
        self._rng = rng
        self.clocks = np.empty(64)
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, epoch):
        if self.size == len(self.clocks):
            self.clocks = np.concatenate([self.clocks, np.empty(len(self.clocks))])
        self.clocks[self.size] = epoch
        self.size += 1

    def first_attempt_after(self, t):
        """Advance stale clocks past t (failed attempts redraw); return (index, epoch)."""
        view = self.clocks[: self.size]
        stale = np.flatnonzero(view < t)
        while stale.size:
            view[stale] += self._retrial.sample(self._rng, stale.size)
            stale = stale[view[stale] < t]
        i = int(np.argmin(view))
        return i, float(view[i])

    def remove(self, i):
        self.size -= 1
        self.clocks[i] = self.clocks[self.size]


def run_des(
    config: PolicyConfig,
    horizon: int,
    seed: int,
    q0: int = 0,
    *,
    stream: int = 0,
    record_log: bool = True,
    max_orbit: int = MAX_ORBIT,
) -> DesResult:
    """Simulate until ``horizon`` service completions or until no event can occur.

    Raises :class:`DivergenceError` when the orbit exceeds ``max_orbit``;
    the partial embedded sequence is attached to the exception.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rs = RngStream(seed, stream)
    policy = config.policy
    lam = config.arrival_rate
    retrial = config.retrial
    service = config.service.start(rs.generator(SERVICE))
    arr_rng = rs.generator(ARRIVALS)
    race_rng = rs.generator(RACE)
    interarrival = _Draws(lambda n: arr_rng.standard_exponential(n) / lam) if lam > 0 else (lambda: math.inf)
    retrial_time = _Draws(lambda n: np.asarray(retrial.sample(race_rng, n), dtype=float))

    log = EventLog() if record_log else None
    embedded = []
    ctimes = []
    t = 0.0
    next_arrival = interarrival()
    arrivals_total = q0
    completions = 0

    if policy is Policy.LINEAR:
        orbit = _LinearOrbit(retrial, race_rng)
        for _ in range(q0):
            orbit.add(retrial_time())
    else:
        orbit = deque(range(q0))  # FIFO of customer ids
    next_fire = retrial_time() if policy is Policy.CONSTANT else math.inf

    def rec(time, kind, busy):
        if log is not None:
            log.record(time, kind, len(orbit), busy, arrivals_total, completions)

    while completions < horizon:
        # ---- idle epoch at time t: who enters service, and when
        from_orbit = False
        if policy is Policy.CONTROL:
            fire = t + retrial_time()
            if len(orbit) and fire <= next_arrival:
                start, from_orbit = fire, True
            else:
                if not len(orbit) and fire <= next_arrival:
                    rec(fire, "retrial", False)
                start = next_arrival
        elif policy is Policy.CONSTANT:
            while next_fire < t:  # fires during the last service
                next_fire += retrial_time()
            if len(orbit):
                if next_fire <= next_arrival:
                    start, from_orbit = next_fire, True
                else:
                    start = next_arrival
            else:
                if math.isinf(next_arrival):
                    break
                while next_fire <= next_arrival:
                    rec(next_fire, "orbit_clock", False)
                    next_fire += retrial_time()
                start = next_arrival
        else:
            if len(orbit):
                idx, fire = orbit.first_attempt_after(t)
                if fire <= next_arrival:
                    start, from_orbit = fire, True
                else:
                    start = next_arrival
            else:
                start = next_arrival
        if math.isinf(start):
            break

        if from_orbit:
            if policy is Policy.LINEAR:
                orbit.remove(idx)
            else:
                orbit.popleft()
            kind = "orbit_clock" if policy is Policy.CONSTANT else "retrial"
            if policy is Policy.CONSTANT:
                next_fire = start + retrial_time()
        else:
            arrivals_total += 1
            next_arrival = start + interarrival()
            kind = "arrival"
        t = start
        rec(t, kind, True)

        # ---- busy period
        end = t + service.next_service()
        while True:
            if policy is Policy.CONSTANT and next_fire < end and next_fire <= next_arrival:
                rec(next_fire, "orbit_clock", True)
                next_fire += retrial_time()
                continue
            if next_arrival < end:
                arrivals_total += 1
                if policy is Policy.LINEAR:
                    orbit.add(next_arrival + retrial_time())
                else:
                    orbit.append(arrivals_total)
                rec(next_arrival, "arrival", True)
                next_arrival += interarrival()
                continue
            break
        t = end
        completions += 1
        q = len(orbit)
        embedded.append(q)
        ctimes.append(t)
        rec(t, "service_end", False)
        if q > max_orbit:
            raise DivergenceError(completions, max_orbit, partial=np.array(embedded, dtype=np.int64))

    return DesResult(
        config, seed, stream,
        np.array(embedded, dtype=np.int64), np.array(ctimes), log, t, arrivals_total,
    )
