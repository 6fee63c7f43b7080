"""Stability thresholds and simulation of single-server retrial queues.

Three retrial policies are covered (linear, constant, control). For each,
the package evaluates the analytic stability threshold on the load
``lambda * E sigma``, iterates the embedded orbit recursion at service
completions, simulates the queue in continuous time, and classifies
stability empirically.
"""

from .analytics import ThresholdReport, drift, drift_versatile, min_cutoff, threshold
from .des import DesResult, embedded_orbit_sequence, run_des
from .distributions import (
    Deterministic,
    Erlang,
    Exponential,
    GeneralHyperexp,
    Hyperexponential,
    Lognormal,
    RetrialSpec,
    parse_spec,
)
from .errors import (
    BadBracket,
    ConfigError,
    DivergenceError,
    HypothesisViolation,
    NumericalFailure,
    RetrialLabError,
)
from .harness import ClassifierSettings, SweepResult, Verdict, VerdictClass, classify, sweep
from .rng import RngStream
from .service import IID, MarkovModulated, MovingAverage, ServiceModel, long_run_mean
from .srs import (
    Chain,
    PolicyConfig,
    Policy,
    Trajectory,
    coupling_experiment,
    simulate_chain,
    step_constant,
    step_control,
    step_linear_majorant,
    step_noretrial,
)

__version__ = "0.1.0"
