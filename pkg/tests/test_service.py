import json

import numpy as np
import pytest

from retrial_lab.distributions import Erlang, Exponential, Lognormal
from retrial_lab.errors import ConfigError
from retrial_lab.rng import RngStream
from retrial_lab.service import (
    IID,
    MarkovModulated,
    MovingAverage,
    from_dict,
    long_run_mean,
)

SWITCH = MarkovModulated(((0.5, 0.5), (0.5, 0.5)), (1.0, 3.0))
STICKY = MarkovModulated(((0.9, 0.1), (0.3, 0.7)), (2.0, 0.5))
MODELS = [
    IID(Exponential(1.0)),
    IID(Erlang(2, 3.0)),
    SWITCH,
    STICKY,
    MovingAverage(Exponential(1.0), 4),
    MovingAverage(Lognormal(0.0, 0.5), 2),
]


def draws(model, n, seed=0):
    return model.start(RngStream(seed).generator()).take(n)


def test_long_run_means():
    assert long_run_mean(IID(Exponential(2.0))) == 0.5
    assert long_run_mean(SWITCH) == pytest.approx(2 / 3, abs=1e-12)
    assert long_run_mean(MovingAverage(Erlang(3, 1.0), 7)) == 3.0
    # oracle: stationary law by power iteration, independent of the linear solve
    P = np.array(STICKY.transition)
    pi = np.full(2, 0.5)
    for _ in range(2000):
        pi = pi @ P
    assert long_run_mean(STICKY) == pytest.approx(pi @ (1 / np.array(STICKY.rates)), abs=1e-12)


def test_markov_modulated_time_average():
    x = draws(SWITCH, 10**6, seed=1)
    assert abs(x.mean() - 2 / 3) < 0.01


def test_moving_average_lag_one_autocorrelation():
    x = draws(MovingAverage(Exponential(1.0), 4), 10**6, seed=2)
    rho = np.corrcoef(x[:-1], x[1:])[0, 1]
    assert abs(rho - 0.75) < 0.02


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_time_average_within_three_standard_errors(model):
    x = draws(model, 10**6, seed=3)
    # batch means absorb the serial correlation of the dependent models
    batches = x.reshape(1000, -1).mean(axis=1)
    se = batches.std(ddof=1) / np.sqrt(len(batches))
    assert abs(x.mean() - model.mean()) < 3 * se + 1e-12


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_scalar_and_block_consumption_agree(model):
    a = draws(model, 5000, seed=4)
    proc = model.start(RngStream(4).generator())
    b = np.array([proc.next_service() for _ in range(1234)] + list(proc.take(5000 - 1234)))
    assert np.array_equal(a, b)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_positive_and_deterministic(model):
    a, b = draws(model, 3000, seed=5), draws(model, 3000, seed=5)
    assert np.all(a > 0)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draws(model, 3000, seed=6))


def test_markov_chain_starts_stationary():
    # first draw of many independent processes should already follow the stationary mixture
    firsts = np.array([STICKY.start(RngStream(7, i).generator()).next_service() for i in range(20_000)])
    assert abs(firsts.mean() - STICKY.mean()) < 4 * firsts.std() / np.sqrt(len(firsts))


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_with_mean(model):
    assert model.with_mean(0.37).mean() == pytest.approx(0.37, rel=1e-12)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: MarkovModulated(((0.5, 0.4), (0.5, 0.5)), (1, 2)),
        lambda: MarkovModulated(((1.0, 0.0), (0.0, 1.0)), (1, 2)),  # reducible
        lambda: MarkovModulated(((0.5, 0.5), (0.5, 0.5)), (1, -2)),
        lambda: MarkovModulated(((1.0,),), (1, 2)),
        lambda: MovingAverage(Exponential(1.0), 0),
    ],
)
def test_invalid_models_rejected(bad):
    with pytest.raises(ConfigError):
        bad()


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
def test_json_round_trip(model):
    assert from_dict(json.loads(json.dumps(model.to_dict()))) == model


def test_bare_distribution_is_iid():
    assert from_dict({"kind": "exponential", "params": {"rate": 2.0}}) == IID(Exponential(2.0))
    with pytest.raises(ConfigError):
        from_dict({"kind": "nonsense"})
