import json
import math

import numpy as np
import pytest

from sparselab.dyadic import Domain
from sparselab.signal import GridFunction, VectorFunction
from sparselab.suites import SUITES, Inputs, Instance, evaluate
from sparselab.verify import (
    ConfigError,
    CorpusSpec,
    ExperimentConfig,
    bucket_analysis,
    buckley_experiment,
    cp_profiles,
    decay_experiment,
    find_instance,
    parse_config,
    run_experiment,
    suite_instances,
    theorem_suite,
)
from sparselab.weights import Weight


def small_cfg(suites, **kw):
    corpus = CorpusSpec(seeds=(0, 1), kinds=("cell", "noise"), kernels=("hilbert",))
    return ExperimentConfig(name="t", suites=tuple(suites), resolutions=(5, 6), corpus=corpus, **kw)


MINIMAL = """{
  "name": "mini",
  "seed": 0,
  "suites": ["tq-sparse"],
  "resolutions": [5]
}
"""


def test_parse_minimal_config():
    cfg = parse_config(MINIMAL, "mini.json")
    assert cfg.name == "mini" and cfg.suites == ("tq-sparse",) and cfg.resolutions == (5,)
    assert cfg.digest == parse_config(MINIMAL, "other.json").digest
    assert len(cfg.digest) == 64


@pytest.mark.parametrize(
    "text, line, needle",
    [
        ('{\n  "name": "x",\n  "suites": ["mq-sparse"],\n  "params": {"q": 1.0}\n}', 4, "q"),
        ('{\n  "name": "x",\n  "bogus": 1\n}', 3, "bogus"),
        ('{\n  "name": "x",\n  "suites": ["no-such-suite"]\n}', 3, "no-such-suite"),
        ('{\n  "name": "x",\n  "suites": ["tq-sparse"],\n  "params": {"p": 1.0}\n}', 4, "p"),
        ('{\n  "name": "x",\n  "suites": ["fs-duality"],\n  "params": {"q": 2.0, "r": 2.5}\n}', 4, "r"),
        ('{\n  "name": "x",\n  "resolutions": [0]\n}', 3, "resolution"),
    ],
)
def test_invalid_configs_are_line_anchored(text, line, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "bad.json")
    msg = str(err.value)
    assert msg.startswith(f"bad.json:{line}:")
    assert needle in msg


def test_malformed_json_reports_position():
    with pytest.raises(ConfigError) as err:
        parse_config('{\n  "name": "x",\n  oops\n}', "bad.json")
    assert str(err.value).startswith("bad.json:3:")


def test_seed_offsets_and_overrides():
    cfg = ExperimentConfig(suites=("tq-sparse",), overrides={"tq-sparse": {"seeds": [0, 2], "resolutions": [5]}})
    assert cfg.suite_seeds("tq-sparse") == (0, 2)
    assert cfg.with_seed(3).suite_seeds("tq-sparse") == (3000, 3002)
    assert cfg.suite_resolutions("tq-sparse") == (5,)
    assert cfg.with_seed(3).digest != cfg.digest


def test_instances_are_sorted_and_unique():
    cfg = small_cfg(["tq-sparse"])
    insts = suite_instances(cfg, "tq-sparse")
    ids = [i.id for i in insts]
    assert len(ids) == len(set(ids)) == 2 * 2 * 2
    assert insts == sorted(insts, key=Instance.sort_key)
    assert find_instance(cfg, ids[3]) == insts[3]
    with pytest.raises(KeyError):
        find_instance(cfg, "tq-sparse/L9/cell/s0")


def test_theorem_suite_tq_sparse_on_cells():
    cfg = ExperimentConfig(
        suites=("tq-sparse",), resolutions=(6,), corpus=CorpusSpec(seeds=(0,), kinds=("cell",), kernels=("hilbert",))
    )
    rep = theorem_suite("tq-sparse", cfg)
    assert rep.passed and rep.finite and rep.structural
    assert math.isfinite(rep.constant) and rep.constant > 0
    assert len(rep.records) == 1


def test_zero_function_gives_zero_ratio():
    dom = Domain(5)
    zero = VectorFunction.from_array(dom, np.zeros((2, 32)))
    inst = Instance("tq-sparse", 5, "cell", 0)
    outs = evaluate(inst, Inputs(zero))
    assert all(o.ratio == 0.0 for o in outs)


def test_mq_weighted_with_unit_weights():
    dom = Domain(6)
    one = Weight(GridFunction.constant(dom, 1.0))
    F = VectorFunction.from_array(dom, np.random.default_rng(0).standard_normal((2, 64)))
    params = json.dumps({"p": 2.0, "q": 1.5}, sort_keys=True)
    inst = Instance("mq-weighted", 6, "noise", 0, params=params)
    outs = evaluate(inst, Inputs(F, w=one, sigma=one))
    assert outs and all(math.isfinite(o.ratio) and o.ok for o in outs)


def test_bucket_analysis():
    recs = [
        {"form": "strong", "extra": {"apws": 1.5}, "weights": "a", "ratio": 1.0},
        {"form": "strong", "extra": {"apws": 1.7}, "weights": "b", "ratio": 2.0},
        {"form": "strong", "extra": {"apws": 5.0}, "weights": "c", "ratio": 1.5},
        {"form": "weak", "extra": {"apws": 5.0}, "weights": "c", "ratio": 99.0},
    ]
    out = bucket_analysis(recs, 3.0)
    assert out["within_bucket_spread"] == {"0": 2.0, "2": 1.0}
    assert out["across_bucket_spread"] == pytest.approx(2.0 / 1.5)
    assert out["ok"]
    recs[1]["ratio"] = 4.0
    assert not bucket_analysis(recs, 3.0)["ok"]


def test_decay_of_maximal_against_itself():
    dom = Domain(8)
    f = GridFunction.indicator(dom, (10, 11))
    rep = decay_experiment("M", f, [0.5, 1.0, 2.0, 4.0])
    assert rep.phi[0] == 1.0
    assert rep.phi[1:] == [0.0, 0.0, 0.0]
    assert rep.designated is None


def test_decay_of_sparse_operator_on_a_cell():
    dom = Domain(8)
    f = GridFunction.indicator(dom, (100, 101))
    t = np.geomspace(1 / 16, 64, 49)
    rep = decay_experiment("A", f, t)
    assert rep.fits["t"]["c2"] > 0
    assert rep.valid("t")
    assert all(a >= b for a, b in zip(rep.phi, rep.phi[1:]))
    with pytest.raises(ValueError):
        decay_experiment("comm", f, t)
    with pytest.raises(ValueError):
        decay_experiment("nope", f, t)


def test_buckley_unweighted_ratio_at_least_one():
    rep = buckley_experiment(2.0, (0.0, 0.5), depth=8)
    assert rep.ap[0] == pytest.approx(1.0)
    assert rep.norm[0] >= 1.0
    assert rep.ap[1] > rep.ap[0]
    assert all(math.isfinite(x) for x in rep.norm)
    with pytest.raises(ValueError):
        buckley_experiment(2.0, (1.5,), depth=6)


def test_cp_profiles_only_for_cp_suites():
    assert cp_profiles(small_cfg(["tq-sparse"])) is None
    prof = cp_profiles(ExperimentConfig(suites=("yabuta",), resolutions=(6,)))
    assert len(prof) == 4
    assert all(p.finite for p in prof)
    trunc = [p for p in prof if p.truncated]
    assert trunc and all(p.a1 > 1e3 for p in trunc)


def test_run_experiment_parallel_matches_serial():
    cfg = small_cfg(["tq-sparse", "fs-duality"])
    a = run_experiment(cfg, 1).to_dict()
    b = run_experiment(cfg, 2).to_dict()
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)


def test_every_registered_suite_runs_at_low_resolution():
    corpus = CorpusSpec(seeds=(0,), kinds=("noise",), kernels=("hilbert",))
    overrides = {"mq-weighted": {"params": {"q": 1.5}}}
    for name in SUITES:
        cfg = ExperimentConfig(suites=(name,), resolutions=(5,), corpus=corpus, overrides=overrides)
        rep = theorem_suite(name, cfg)
        assert rep.records, name
        assert rep.finite and rep.structural, name
