import json

import numpy as np
import pytest

from retrial_lab.distributions import Erlang, Exponential
from retrial_lab.errors import BadBracket, ConfigError
from retrial_lab.harness import (
    ClassifierSettings,
    SweepResult,
    Verdict,
    VerdictClass,
    classify,
    config_from_sections,
    load_config_file,
    sweep,
)
from retrial_lab.service import IID
from retrial_lab.srs import PolicyConfig


def cfg(policy="control", lam=1.0, retrial=Exponential(1.0), es=0.4, cutoff=None):
    return PolicyConfig(policy, lam, retrial, IID(Exponential(1 / es)), cutoff)


QUICK = ClassifierSettings(replications=10, horizon=20_000)


def test_stable_and_unstable_examples():
    v = classify(cfg(es=0.4), seed=1)
    assert v.verdict is VerdictClass.STABLE
    assert v.return_frequency > 0.01
    assert v.slope_ci[0] <= 0 <= v.slope_ci[1]
    u = classify(cfg(es=0.6), seed=1)
    assert u.verdict is VerdictClass.UNSTABLE
    assert abs(u.slope - 0.1) < 0.02
    assert u.slope_ci[0] <= u.slope <= u.slope_ci[1]


def test_classify_is_deterministic():
    a = classify(cfg(es=0.45), seed=3, settings=QUICK)
    b = classify(cfg(es=0.45), seed=3, settings=QUICK)
    assert a == b
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_overrides():
    v = classify(cfg(es=0.4), replications=5, horizon=10_000, seed=0)
    assert v.replications == 5
    with pytest.raises(ConfigError):
        classify(cfg(), replications=4)
    with pytest.raises(ConfigError):
        classify(cfg(), horizon=9999)
    with pytest.raises(ConfigError):
        classify(cfg(), settings=QUICK, engine="gpu")


def test_linear_majorant_and_des_engines():
    assert classify(cfg("linear", es=0.5, cutoff=3), seed=2, settings=QUICK).verdict is VerdictClass.STABLE
    des = ClassifierSettings(replications=5, horizon=20_000, engine="des", max_orbit=5000)
    for config in (cfg("linear", es=0.5), cfg("constant", es=0.3)):
        v = classify(config, seed=2, settings=des)
        # few replications make the bootstrap interval tight; a stable run may land
        # just below zero, which a sweep still counts on the stable side
        assert v.verdict is not VerdictClass.UNSTABLE
        assert v.side == -1 and v.return_frequency > 0.5


def test_divergence_counts_as_unstable():
    des = ClassifierSettings(replications=5, horizon=50_000, engine="des", max_orbit=200)
    v = classify(cfg("control", es=0.9), seed=4, settings=des)
    assert v.verdict is VerdictClass.UNSTABLE
    assert v.diverged == 5


def test_noretrial_chain_boundary():
    s = ClassifierSettings(replications=10, horizon=50_000, chain="noretrial")
    assert classify(cfg(es=0.9), seed=5, settings=s).verdict is VerdictClass.STABLE
    assert classify(cfg(es=1.1), seed=5, settings=s).verdict is VerdictClass.UNSTABLE


def test_noretrial_sweep_recovers_unit_load():
    res = sweep(cfg(es=1.0), "service_mean", (0.8, 1.2), 0.02, seed=6, chain="noretrial")
    assert res.analytic == 1.0
    # resolution plus the near-threshold band
    assert abs(res.critical - 1.0) <= 0.04
    assert res.is_monotone()


def test_sweep_erlang_control():
    res = sweep(cfg(retrial=Erlang(2, 1.0)), "service_mean", (0.1, 0.5), 0.01, seed=7)
    assert res.analytic == pytest.approx(0.25)
    assert res.relative_error < 0.1
    assert res.width <= 0.01
    assert res.is_monotone()
    d = res.to_dict()
    assert d["points"][0]["value"] == 0.1 and d["points"][1]["value"] == 0.5


def test_sweep_bad_bracket():
    with pytest.raises(BadBracket):
        sweep(cfg(), "service_mean", (0.1, 0.3), 0.01, seed=8, settings=QUICK)
    with pytest.raises(BadBracket):
        sweep(cfg(), "service_mean", (0.5, 0.1), 0.01, seed=8, settings=QUICK)
    with pytest.raises(ConfigError):
        sweep(cfg(), "retrial_rate", (0.1, 0.9), 0.01, seed=8, settings=QUICK)


def _v(kind, slope=0.0):
    return Verdict(VerdictClass(kind), slope, (slope - 1, slope + 1), 0.5, 10)


def test_monotonicity_check():
    ok = SweepResult("x", [(0.1, _v("stable")), (0.9, _v("unstable")), (0.5, _v("inconclusive")), (0.3, _v("stable"))])
    assert ok.is_monotone()
    bad = SweepResult("x", [(0.1, _v("stable")), (0.9, _v("stable")), (0.5, _v("unstable"))])
    assert not bad.is_monotone()


def test_inconclusive_side_follows_slope_sign():
    assert _v("inconclusive", 0.01).side == 1
    assert _v("inconclusive", -0.01).side == -1
    assert _v("stable").side == -1 and _v("unstable").side == 1


SECTIONS = {
    "policy": {"kind": "linear", "cutoff": 4},
    "arrival": {"lambda": 0.8},
    "retrial": {"kind": "erlang", "params": {"shape": 2, "rate": 1.0}},
    "service": {"kind": "iid", "params": {"distribution": {"kind": "exponential", "params": {"rate": 2.0}}}},
    "run": {"horizon": 1000, "replications": 3, "seed": 9},
}

TOML = """
[policy]
kind = "linear"
cutoff = 4

[arrival]
lambda = 0.8

[retrial]
kind = "erlang"
params = { shape = 2, rate = 1.0 }

[service]
kind = "iid"
params = { distribution = { kind = "exponential", params = { rate = 2.0 } } }

[run]
horizon = 1000
replications = 3
seed = 9
"""


def test_config_files(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(SECTIONS))
    (tmp_path / "c.toml").write_text(TOML)
    a = load_config_file(tmp_path / "c.json")
    b = load_config_file(tmp_path / "c.toml")
    assert a == b
    config, run = config_from_sections(a)
    assert config == PolicyConfig("linear", 0.8, Erlang(2, 1.0), IID(Exponential(2.0)), 4)
    assert run == SECTIONS["run"]
    assert PolicyConfig.from_dict(json.loads(json.dumps(config.to_dict()))) == config


def test_config_errors(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "bad.json")
    with pytest.raises(ConfigError):
        config_from_sections({"policy": "control"})


def test_replications_are_independent():
    # distinct substreams per replication: slopes differ
    s = ClassifierSettings(replications=5, horizon=5000)
    from retrial_lab.harness import _one_path

    paths = [_one_path(cfg(es=0.6), s, 0, r)[0] for r in range(3)]
    assert not np.array_equal(paths[0], paths[1])
    assert not np.array_equal(paths[1], paths[2])
