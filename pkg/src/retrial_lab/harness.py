"""Replicated stability classification and threshold bisection."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics
from .des import MAX_ORBIT, run_des
from .errors import BadBracket, ConfigError, DivergenceError
from .rng import RngStream
from .srs import Chain, PolicyConfig, simulate_chain

BOOTSTRAP_STREAM = 2**63  # outside any replication index
MIN_REPLICATIONS = 5
MIN_HORIZON = 10_000


class VerdictClass(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    verdict: VerdictClass
    slope: float
    slope_ci: tuple[float, float]
    return_frequency: float
    replications: int
    diverged: int = 0

    @property
    def side(self) -> int:
        """+1 for the unstable side of a sweep, -1 for the stable side."""
        if self.verdict is VerdictClass.UNSTABLE:
            return 1
        if self.verdict is VerdictClass.STABLE:
            return -1
        return 1 if self.slope > 0 else -1

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "return_frequency": self.return_frequency,
            "replications": self.replications,
            "diverged": self.diverged,
        }


@dataclass(frozen=True)
class ClassifierSettings:
    replications: int = 20
    horizon: int = 100_000
    low_set: int = 5
    return_floor: float = 0.01
    confidence: float = 0.99
    resamples: int = 1000
    engine: str = "srs"  # or "des"
    chain: str = "policy"  # or "noretrial"
    max_orbit: int = MAX_ORBIT


def _tail_slope(path: np.ndarray) -> float:
    half = path[len(path) // 2:].astype(float)
    x = np.arange(len(half), dtype=float)
    x -= x.mean()
    return float(x @ (half - half.mean()) / (x @ x))


def _one_path(config, settings, seed, rep):
    if settings.engine == "des":
        # the embedded sequence starts at the first completion; prepend Q0 = 0
        res = run_des(config, settings.horizon, seed, stream=rep, record_log=False, max_orbit=settings.max_orbit)
        return np.concatenate([[0], res.embedded]), 0
    if settings.engine != "srs":
        raise ConfigError(f"unknown engine {settings.engine!r}")
    floor = config.cutoff if (config.policy.value == "linear" and settings.chain == "policy") else 0
    tr = simulate_chain(config, settings.horizon, seed, floor, chain=settings.chain, stream=rep, keep_drivers=False)
    return tr.states, floor


def classify(config: PolicyConfig, replications=None, horizon=None, seed=0, settings: ClassifierSettings | None = None,
             **overrides) -> Verdict:
    """Stable / Unstable / Inconclusive from independent replications.

    The slope is the least-squares slope of Q_n on n over the last half of
    each run, averaged over replications (the pooled estimate, since all
    runs share the same time grid); its confidence interval is a percentile
    bootstrap over replications. Stable needs the interval to contain 0 and
    the fraction of steps with Q <= low_set above return_floor; Unstable
    needs the interval strictly above 0.
    """
    settings = settings or ClassifierSettings()
    if replications is not None:
        overrides["replications"] = replications
    if horizon is not None:
        overrides["horizon"] = horizon
    if overrides:
        settings = ClassifierSettings(**{**settings.__dict__, **overrides})
    if settings.replications < MIN_REPLICATIONS or settings.horizon < MIN_HORIZON:
        raise ConfigError(f"classification needs >= {MIN_REPLICATIONS} replications "
                          f"of >= {MIN_HORIZON} steps")

    slopes, low_hits, low_total, diverged = [], 0, 0, 0
    for rep in range(settings.replications):
        try:
            path, floor = _one_path(config, settings, seed, rep)
        except DivergenceError:
            diverged += 1
            continue
        slopes.append(_tail_slope(path))
        tail = path[len(path) // 2:]
        low_hits += int(np.count_nonzero(tail <= floor + settings.low_set))
        low_total += len(tail)

    freq = low_hits / low_total if low_total else 0.0
    if diverged:
        return Verdict(VerdictClass.UNSTABLE, float(np.mean(slopes)) if slopes else float("inf"),
                       (float("nan"), float("nan")), freq, settings.replications, diverged)

    slopes = np.asarray(slopes)
    boot_rng = RngStream(seed, BOOTSTRAP_STREAM).generator()
    idx = boot_rng.integers(0, len(slopes), size=(settings.resamples, len(slopes)))
    means = slopes[idx].mean(axis=1)
    alpha = 1.0 - settings.confidence
    lo, hi = (float(v) for v in np.quantile(means, [alpha / 2, 1 - alpha / 2]))
    slope = float(slopes.mean())
    if lo > 0:
        cls = VerdictClass.UNSTABLE
    elif lo <= 0 <= hi and freq > settings.return_floor:
        cls = VerdictClass.STABLE
    else:
        cls = VerdictClass.INCONCLUSIVE
    return Verdict(cls, slope, (lo, hi), freq, settings.replications)


AXES = ("arrival_rate", "service_mean")


def _at(config: PolicyConfig, axis: str, value: float) -> PolicyConfig:
    if axis == "arrival_rate":
        return config.with_arrival_rate(value)
    if axis == "service_mean":
        return config.with_service_mean(value)
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


@dataclass
class SweepResult:
    axis: str
    points: list = field(default_factory=list)  # (value, Verdict) in evaluation order
    bracket: tuple = (float("nan"), float("nan"))
    analytic: float = float("nan")

    @property
    def critical(self) -> float:
        return 0.5 * (self.bracket[0] + self.bracket[1])

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    @property
    def relative_error(self) -> float:
        return abs(self.critical - self.analytic) / self.analytic

    def is_monotone(self) -> bool:
        """No Stable point lies above an Unstable one (Inconclusive points exempt)."""
        pts = sorted(self.points, key=lambda p: p[0])
        seen_unstable = False
        for _, v in pts:
            if v.verdict is VerdictClass.UNSTABLE:
                seen_unstable = True
            elif v.verdict is VerdictClass.STABLE and seen_unstable:
                return False
        return True

    def to_dict(self):
        return {
            "axis": self.axis,
            "critical": self.critical,
            "bracket": list(self.bracket),
            "width": self.width,
            "analytic": self.analytic,
            "relative_error": self.relative_error,
            "points": [{"value": x, **v.to_dict()} for x, v in self.points],
        }


def sweep(config: PolicyConfig, axis: str, bracket, resolution: float, seed=0, *, max_steps=12,
          settings: ClassifierSettings | None = None, **overrides) -> SweepResult:
    """Bisect the swept parameter between a stable and an unstable endpoint.

    Every point reuses the same seed (common random numbers), which keeps
    neighbouring verdicts consistent. An Inconclusive midpoint is assigned
    to the side given by the sign of its slope estimate.
    """
    settings = settings or ClassifierSettings(replications=10)
    if overrides:
        settings = ClassifierSettings(**{**settings.__dict__, **overrides})
    lo, hi = (float(b) for b in bracket)
    if not lo < hi:
        raise BadBracket("bracket must satisfy lo < hi")
    result = SweepResult(axis)
    v_lo = classify(_at(config, axis, lo), seed=seed, settings=settings)
    v_hi = classify(_at(config, axis, hi), seed=seed, settings=settings)
    result.points += [(lo, v_lo), (hi, v_hi)]
    if not (v_lo.verdict is VerdictClass.STABLE and v_hi.verdict is VerdictClass.UNSTABLE):
        raise BadBracket(f"endpoints classified {v_lo.verdict.value} / {v_hi.verdict.value}; "
                         "need stable at the low end and unstable at the high end")
    for _ in range(max_steps):
        if hi - lo <= resolution:
            break
        mid = 0.5 * (lo + hi)
        v = classify(_at(config, axis, mid), seed=seed, settings=settings)
        result.points.append((mid, v))
        if v.side > 0:
            hi = mid
        else:
            lo = mid
    result.bracket = (lo, hi)
    chain = settings.chain
    if settings.engine == "srs" and config.policy.value == "linear" and chain == "policy":
        chain = "majorant"
    result.analytic = analytics.critical_value(config, axis, chain)
    return result


# ---------------------------------------------------------------- configs

def load_config_file(path) -> dict:
    """Read a JSON or TOML run configuration into a plain dict."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc


def config_from_sections(data: dict) -> tuple[PolicyConfig, dict]:
    """Build a PolicyConfig from the sectioned file layout.

    Sections: ``policy`` (kind, cutoff), ``arrival`` (lambda), ``retrial``
    (kind, params), ``service`` (kind, params), ``run`` (free-form run
    options, returned separately).
    """
    from . import distributions, service

    try:
        pol = data["policy"]
        policy_kind = pol["kind"] if isinstance(pol, dict) else pol
        cutoff = pol.get("cutoff") if isinstance(pol, dict) else None
        lam = data["arrival"]["lambda"]
        retrial = distributions.from_dict(data["retrial"])
        svc = service.from_dict(data["service"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"config is missing section or field {exc}") from exc
    return PolicyConfig(policy_kind, lam, retrial, svc, cutoff), dict(data.get("run", {}))
