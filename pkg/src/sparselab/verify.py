"""Experiment harness: configs, suite runs, decay curves, Buckley slopes.

Fitted constants are maxima of observed ratios over a finite corpus, hence
lower bounds for the best constants.  Every report says so.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import corpus
from .czo import KERNELS
from .dyadic import Domain
from .maximal import iterated_maximal, maximal, maximal_delta
from .signal import GridFunction, bmo_norm, fit_pointwise, lp_norms
from .sparse import commutator_sparse, extract_czo, sparse_operator
from .suites import DEFAULT_PARAMS, SUITES, Instance, Outcome, build_inputs, evaluate, get_suite, weight_sets
from .weights import ap_constant, cp_functional, power_weight, weight_generators

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InequalityReport",
    "DecayReport",
    "BuckleyReport",
    "fit_pointwise",
    "load_config",
    "parse_config",
    "theorem_suite",
    "decay_experiment",
    "decay_study",
    "buckley_experiment",
    "CpProfile",
    "cp_profiles",
    "run_experiment",
]

LOWER_BOUND_NOTE = (
    "fitted constants are maxima of LHS/RHS over a finite corpus: lower bounds for the best constants"
)

# ---------------------------------------------------------------------------
# configuration


class ConfigError(ValueError):
    """Invalid configuration; the message starts with 'path:line:'."""


@dataclass(frozen=True)
class CorpusSpec:
    seeds: tuple = tuple(range(8))
    kinds: tuple = corpus.FUNCTION_KINDS
    kernels: tuple = ("hilbert", "holder")
    ap_weights: tuple = corpus.AP_WEIGHTS
    cp_weights: tuple = corpus.CP_WEIGHTS


@dataclass(frozen=True)
class DecaySpec:
    depth: int = 10
    t_min: float = 1 / 16
    t_max: float = 64.0
    n_t: int = 97
    check_grid: tuple = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    seeds: tuple = tuple(range(8))
    kinds: tuple = ("interval", "spike", "noise")
    kernel: str = "hilbert"
    r: float = 2.0

    @property
    def t_grid(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n_t)


@dataclass(frozen=True)
class BuckleyRun:
    p: float
    a_grid: tuple
    band: tuple


@dataclass(frozen=True)
class BuckleySpec:
    depth: int = 12
    x0: float = 0.5
    probes: int = 2
    runs: tuple = (
        BuckleyRun(2.0, (0.5, 0.7, 0.8, 0.9, 0.95), (0.85, 1.15)),
        BuckleyRun(3.0, (1.0, 1.4, 1.6, 1.8, 1.9), (0.4, 0.6)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    suites: tuple = ()
    resolutions: tuple = (6, 8, 10)
    corpus: CorpusSpec = CorpusSpec()
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    overrides: dict = field(default_factory=dict)
    stability_factor: float = 3.0
    bucket_factor: float = 3.0
    decay: DecaySpec | None = None
    buckley: BuckleySpec | None = None

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def suite_params(self, name: str) -> dict:
        return {**self.params, **self.overrides.get(name, {}).get("params", {})}

    def suite_resolutions(self, name: str) -> tuple:
        return tuple(self.overrides.get(name, {}).get("resolutions", self.resolutions))

    def suite_seeds(self, name: str) -> tuple:
        base = self.overrides.get(name, {}).get("seeds", self.corpus.seeds)
        return tuple(int(s) + 1000 * self.seed for s in base)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return _replace(self, seed=int(seed))


def _replace(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    d.update(kw)
    return ExperimentConfig(**d)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


_TOP = {
    "name", "seed", "suites", "resolutions", "corpus", "params", "overrides",
    "stability_factor", "bucket_factor", "decay", "buckley",
}
_CORPUS = set(CorpusSpec.__dataclass_fields__)
_DECAY = set(DecaySpec.__dataclass_fields__)
_BUCKLEY = {"depth", "x0", "probes", "runs"}
_BUCKLEY_RUN = {"p", "a_grid", "band"}
_OVERRIDE = {"resolutions", "params", "seeds"}
_KEY_RE = re.compile(r'"((?:[^"\\]|\\.)*)"\s*:')


def _key_line(text: str, path: tuple) -> int:
    """Line of the last key of ``path`` found in order (1 if none)."""
    pos, line = 0, 1
    for key in path:
        if not isinstance(key, str):
            continue
        for m in _KEY_RE.finditer(text, pos):
            if m.group(1) == key:
                pos = m.end()
                line = text.count("\n", 0, m.start()) + 1
                break
        else:
            break
    return line


class _Checker:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def fail(self, path: tuple, msg: str):
        raise ConfigError(f"{self.source}:{_key_line(self.text, path)}: {msg}")

    def keys(self, obj, allowed: set, path: tuple, what: str):
        if not isinstance(obj, dict):
            self.fail(path, f"{what} must be an object")
        for k in obj:
            if k not in allowed:
                self.fail(path + (k,), f"unknown key {k!r} in {what}; allowed: {', '.join(sorted(allowed))}")

    def number(self, v, path, name, lo=None, hi=None, lo_open=True, hi_open=False, integer=False):
        ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok_type:
            self.fail(path, f"{name} must be {'an integer' if integer else 'a number'}")
        if lo is not None and (v <= lo if lo_open else v < lo):
            self.fail(path, f"{name} = {v} out of range: need {name} {'>' if lo_open else '>='} {lo}")
        if hi is not None and (v >= hi if hi_open else v > hi):
            self.fail(path, f"{name} = {v} out of range: need {name} {'<' if hi_open else '<='} {hi}")
        return v

    def int_list(self, v, path, name, lo, hi):
        if not isinstance(v, list) or not v:
            self.fail(path, f"{name} must be a nonempty list")
        return tuple(self.number(x, path, name, lo, hi, lo_open=False, integer=True) for x in v)

    def str_list(self, v, path, name, allowed):
        if not isinstance(v, list):
            self.fail(path, f"{name} must be a list")
        for x in v:
            if x not in allowed:
                self.fail(path, f"unknown {name} entry {x!r}; choose from {', '.join(sorted(allowed))}")
        return tuple(v)


def _check_weights(ck: _Checker, specs, path) -> tuple:
    if not isinstance(specs, list) or not specs:
        ck.fail(path, f"{path[-1]} must be a nonempty list of weight specs")
    for spec in specs:
        if not isinstance(spec, dict) or "kind" not in spec:
            ck.fail(path, "each weight spec needs a 'kind'")
        try:
            corpus.weight(spec, 3)
        except (ValueError, TypeError, KeyError) as e:
            ck.fail(path, f"invalid weight spec {json.dumps(spec, sort_keys=True)}: {e}")
    return tuple(specs)


def _check_params(ck: _Checker, P: dict, path: tuple, suites: tuple, suite_name: str | None = None):
    where = f" (suite {suite_name})" if suite_name else ""
    allowed = set(DEFAULT_PARAMS)
    for k in P:
        if k not in allowed:
            ck.fail(path + (k,), f"unknown key {k!r} in params; allowed: {', '.join(sorted(allowed))}")
    full = {**DEFAULT_PARAMS, **P}

    def at(k):
        return path + (k,)

    ck.number(full["p"], at("p"), "p", 1)
    ck.number(full["q"], at("q"), "q")
    vector = [s for s in suites if SUITES[s].vector]
    if vector and not full["q"] > 1:
        ck.fail(at("q"), f"q = {full['q']}{where}: q ≤ 1 is invalid for vector suites ({', '.join(vector)}); need q > 1")
    ck.number(full["r"], at("r"), "r", 1)
    ck.number(full["s"], at("s"), "s", 1, lo_open=False)
    if "bilinear-sparse" in suites and full["q"] > 1:
        qq = full["q"] / (full["q"] - 1)
        if not full["s"] < (qq + 1) / 2:
            ck.fail(at("s"), f"s = {full['s']}{where}: need 1 <= s < (q'+1)/2 = {(qq + 1) / 2}")
    if "fs-duality" in suites and not full["r"] < full["q"]:
        ck.fail(at("r"), f"r = {full['r']}{where}: the duality suite needs 1 < r < q = {full['q']}")
    ck.number(full["delta"], at("delta"), "delta", 0, 1, hi_open=True)
    ck.number(full["eps"], at("eps"), "eps", 0, full["delta"], hi_open=True)
    ck.number(full["lam"], at("lam"), "lam", 0, 0.125)
    ck.number(full["cp_q"], at("cp_q"), "cp_q", full["p"])
    ck.number(full["J"], at("J"), "J", 1, lo_open=False, integer=True)
    for name, lo, hi in (("d_ps", 0, None), ("sharp_deltas", 0, 1)):
        v = full[name]
        if not isinstance(v, list) or not v:
            ck.fail(at(name), f"{name} must be a nonempty list")
        for x in v:
            ck.number(x, at(name), name, lo, hi)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validate a JSON config; unknown keys and out-of-range values raise ConfigError."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}: invalid JSON: {e.msg}") from None
    ck = _Checker(text, source)
    ck.keys(raw, _TOP, (), "config")
    kw: dict = {}
    if "name" in raw:
        if not isinstance(raw["name"], str) or not raw["name"]:
            ck.fail(("name",), "name must be a nonempty string")
        kw["name"] = raw["name"]
    if "seed" in raw:
        kw["seed"] = ck.number(raw["seed"], ("seed",), "seed", 0, lo_open=False, integer=True)
    suites = ()
    if "suites" in raw:
        suites = ck.str_list(raw["suites"], ("suites",), "suite", set(SUITES))
    kw["suites"] = suites
    if "resolutions" in raw:
        kw["resolutions"] = ck.int_list(raw["resolutions"], ("resolutions",), "resolution", 2, 14)
    cs = CorpusSpec()
    if "corpus" in raw:
        c = raw["corpus"]
        ck.keys(c, _CORPUS, ("corpus",), "corpus")
        ckw = {}
        if "seeds" in c:
            ckw["seeds"] = ck.int_list(c["seeds"], ("corpus", "seeds"), "seed", 0, None)
        if "kinds" in c:
            ckw["kinds"] = ck.str_list(c["kinds"], ("corpus", "kinds"), "kind", set(corpus.FUNCTION_KINDS))
        if "kernels" in c:
            ckw["kernels"] = ck.str_list(c["kernels"], ("corpus", "kernels"), "kernel", set(KERNELS))
        for k in ("ap_weights", "cp_weights"):
            if k in c:
                ckw[k] = _check_weights(ck, c[k], ("corpus", k))
        for k in ("kinds", "kernels"):
            if k in ckw and not ckw[k]:
                ck.fail(("corpus", k), f"corpus.{k} must be nonempty")
        cs = CorpusSpec(**ckw)
    kw["corpus"] = cs
    params = dict(DEFAULT_PARAMS)
    if "params" in raw:
        if not isinstance(raw["params"], dict):
            ck.fail(("params",), "params must be an object")
        _check_params(ck, raw["params"], ("params",), suites)
        params.update(raw["params"])
    kw["params"] = params
    overrides = {}
    if "overrides" in raw:
        ov = raw["overrides"]
        if not isinstance(ov, dict):
            ck.fail(("overrides",), "overrides must be an object")
        for name, o in ov.items():
            if name not in SUITES:
                ck.fail(("overrides", name), f"unknown suite {name!r} in overrides")
            ck.keys(o, _OVERRIDE, ("overrides", name), f"overrides.{name}")
            entry = {}
            if "resolutions" in o:
                entry["resolutions"] = list(ck.int_list(o["resolutions"], ("overrides", name, "resolutions"), "resolution", 2, 14))
            if "seeds" in o:
                entry["seeds"] = list(ck.int_list(o["seeds"], ("overrides", name, "seeds"), "seed", 0, None))
            if "params" in o:
                if not isinstance(o["params"], dict):
                    ck.fail(("overrides", name, "params"), "params must be an object")
                merged = {**params, **o["params"]}
                _check_params(ck, merged, ("overrides", name, "params"), (name,) if name in suites else (), name)
                entry["params"] = dict(o["params"])
            overrides[name] = entry
    kw["overrides"] = overrides
    for k in ("stability_factor", "bucket_factor"):
        if k in raw:
            kw[k] = float(ck.number(raw[k], (k,), k, 1, lo_open=False))
    if raw.get("decay") is not None:
        kw["decay"] = _parse_decay(ck, raw["decay"])
    if raw.get("buckley") is not None:
        kw["buckley"] = _parse_buckley(ck, raw["buckley"])
    return ExperimentConfig(**kw)


def _parse_decay(ck: _Checker, d) -> DecaySpec:
    ck.keys(d, _DECAY, ("decay",), "decay")
    kw = {}
    p = ("decay",)
    if "depth" in d:
        kw["depth"] = ck.number(d["depth"], p + ("depth",), "depth", 4, 14, lo_open=False, integer=True)
    if "t_min" in d:
        kw["t_min"] = float(ck.number(d["t_min"], p + ("t_min",), "t_min", 0))
    if "t_max" in d:
        kw["t_max"] = float(ck.number(d["t_max"], p + ("t_max",), "t_max", kw.get("t_min", DecaySpec.t_min)))
    if "n_t" in d:
        kw["n_t"] = ck.number(d["n_t"], p + ("n_t",), "n_t", 8, lo_open=False, integer=True)
    if "check_grid" in d:
        if not isinstance(d["check_grid"], list) or not d["check_grid"]:
            ck.fail(p + ("check_grid",), "check_grid must be a nonempty list")
        kw["check_grid"] = tuple(float(ck.number(t, p + ("check_grid",), "check_grid", 0)) for t in d["check_grid"])
    if "seeds" in d:
        kw["seeds"] = ck.int_list(d["seeds"], p + ("seeds",), "seed", 0, None)
    if "kinds" in d:
        kw["kinds"] = ck.str_list(d["kinds"], p + ("kinds",), "kind", set(corpus.FUNCTION_KINDS))
        if not kw["kinds"]:
            ck.fail(p + ("kinds",), "decay.kinds must be nonempty")
    if "kernel" in d:
        if d["kernel"] not in KERNELS:
            ck.fail(p + ("kernel",), f"unknown kernel {d['kernel']!r}")
        kw["kernel"] = d["kernel"]
    if "r" in d:
        kw["r"] = float(ck.number(d["r"], p + ("r",), "r", 1))
    return DecaySpec(**kw)


def _parse_buckley(ck: _Checker, d) -> BuckleySpec:
    ck.keys(d, _BUCKLEY, ("buckley",), "buckley")
    kw = {}
    p = ("buckley",)
    if "depth" in d:
        kw["depth"] = ck.number(d["depth"], p + ("depth",), "depth", 4, 14, lo_open=False, integer=True)
    if "x0" in d:
        kw["x0"] = float(ck.number(d["x0"], p + ("x0",), "x0", 0, 1, hi_open=True))
    if "probes" in d:
        kw["probes"] = ck.number(d["probes"], p + ("probes",), "probes", 0, lo_open=False, integer=True)
    if "runs" in d:
        if not isinstance(d["runs"], list) or not d["runs"]:
            ck.fail(p + ("runs",), "buckley.runs must be a nonempty list")
        runs = []
        for run in d["runs"]:
            ck.keys(run, _BUCKLEY_RUN, p + ("runs",), "buckley run")
            for k in _BUCKLEY_RUN:
                if k not in run:
                    ck.fail(p + ("runs",), f"buckley run needs {k!r}")
            pp = float(ck.number(run["p"], p + ("runs", "p"), "p", 1))
            if not isinstance(run["a_grid"], list) or len(run["a_grid"]) < 2:
                ck.fail(p + ("runs", "a_grid"), "a_grid needs at least two exponents")
            grid = tuple(float(ck.number(a, p + ("runs", "a_grid"), "a", -1, pp - 1, hi_open=True)) for a in run["a_grid"])
            band = run["band"]
            if not isinstance(band, list) or len(band) != 2 or not band[0] < band[1]:
                ck.fail(p + ("runs", "band"), "band must be [low, high] with low < high")
            runs.append(BuckleyRun(pp, grid, (float(band[0]), float(band[1]))))
        kw["runs"] = tuple(runs)
    return BuckleySpec(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}:1: cannot read config: {e.strerror}") from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# suite runs


def suite_instances(cfg: ExperimentConfig, name: str) -> list[Instance]:
    suite = get_suite(name)
    P = cfg.suite_params(name)
    params = json.dumps(P, sort_keys=True)
    kernels = cfg.corpus.kernels
    out = []
    for L in cfg.suite_resolutions(name):
        for i, seed in enumerate(cfg.suite_seeds(name)):
            kernel = kernels[seed % len(kernels)]
            for kind in cfg.corpus.kinds:
                for ws in weight_sets(suite, P["p"], cfg.corpus.ap_weights, cfg.corpus.cp_weights):
                    wj = tuple(json.dumps(w, sort_keys=True) for w in ws)
                    out.append(Instance(name, L, kind, seed, kernel, wj, params))
    return sorted(out, key=Instance.sort_key)


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _record(inst: Instance, o: Outcome) -> dict:
    return {
        "id": inst.id,
        "depth": inst.depth,
        "seed": inst.seed,
        "kind": inst.kind,
        "kernel": inst.kernel,
        "weights": "+".join(corpus.weight_label(json.loads(w)) for w in inst.weights),
        "form": o.form,
        "lhs": float(o.lhs),
        "rhs": float(o.rhs),
        "ratio": float(o.ratio),
        "ok": bool(o.ok),
        "extra": _clean(o.extra),
    }


def _evaluate_chunk(instances: list[Instance]) -> list[dict]:
    return [_record(inst, o) for inst in instances for o in evaluate(inst)]


@dataclass
class InequalityReport:
    suite: str
    summary: str
    records: list
    constant: float
    by_resolution: dict
    by_seed: dict
    by_form: dict
    by_weight: dict
    finite: bool
    structural: bool
    spread: float
    stable: bool
    checks: dict
    passed: bool
    first_failure: str | None
    note: str = LOWER_BOUND_NOTE

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def _max_by(records, key) -> dict:
    out: dict = {}
    for r in records:
        k = r[key]
        out[k] = max(out.get(k, 0.0), r["ratio"])
    return {k: out[k] for k in sorted(out, key=lambda x: (str(type(x)), x))}


def _spread(values) -> float:
    vals = [v for v in values]
    if not vals:
        return 1.0
    hi, lo = max(vals), min(vals)
    if hi == 0:
        return 1.0
    if lo == 0 or not math.isfinite(hi):
        return math.inf
    return hi / lo


def bucket_analysis(records: list, factor: float) -> dict:
    """Group strong-form records by floor(log2 [w,sigma]_{A_p}); compare constants."""
    per_pair: dict = {}
    for r in records:
        if r["form"] != "strong":
            continue
        b = int(math.floor(math.log2(r["extra"]["apws"]) + 1e-12))
        key = (b, r["weights"])
        per_pair[key] = max(per_pair.get(key, 0.0), r["ratio"])
    buckets: dict = {}
    for (b, wl), c in per_pair.items():
        buckets.setdefault(b, {})[wl] = c
    within = {str(b): _spread(v.values()) for b, v in sorted(buckets.items())}
    across = _spread(max(v.values()) for v in buckets.values())
    ok = all(s <= factor for s in within.values()) and across <= factor
    return {
        "buckets": {str(b): dict(sorted(v.items())) for b, v in sorted(buckets.items())},
        "within_bucket_spread": within,
        "across_bucket_spread": across,
        "factor": factor,
        "ok": ok,
    }


def build_report(cfg: ExperimentConfig, name: str, records: list) -> InequalityReport:
    suite = get_suite(name)
    ratios = [r["ratio"] for r in records]
    constant = max(ratios, default=0.0)
    finite = all(math.isfinite(x) for x in ratios)
    structural = all(r["ok"] for r in records)
    by_res = _max_by(records, "depth")
    spread = _spread(by_res.values())
    stable = spread <= cfg.stability_factor
    checks = {}
    if name == "mq-weighted":
        checks["buckets"] = bucket_analysis(records, cfg.bucket_factor)
    if suite.weights:
        by_w = _max_by(records, "weights")
        # reported only: constants may legitimately depend on the weight
        checks["cross_weight_spread"] = {"value": _spread(by_w.values()), "asserted": False}
    passed = finite and structural and stable and all(c.get("ok", True) for c in checks.values())
    first = None
    for r in records:
        if not (math.isfinite(r["ratio"]) and r["ok"]):
            first = r["id"]
            break
    if first is None and not passed and records:
        first = max(records, key=lambda r: r["ratio"])["id"]
    return InequalityReport(
        name,
        suite.summary,
        records,
        constant,
        {str(k): v for k, v in by_res.items()},
        {str(k): v for k, v in _max_by(records, "seed").items()},
        _max_by(records, "form"),
        _max_by(records, "weights") if suite.weights else {},
        finite,
        structural,
        spread,
        stable,
        checks,
        passed,
        first,
    )


def _chunks(instances: list, jobs: int) -> list:
    """Contiguous chunks by (suite, depth) so per-process caches are reused."""
    groups: dict = {}
    for inst in instances:
        groups.setdefault((inst.suite, inst.depth), []).append(inst)
    out = []
    for g in groups.values():
        size = max(1, math.ceil(len(g) / max(1, jobs)))
        out.extend(g[i : i + size] for i in range(0, len(g), size))
    return out


def run_suites(cfg: ExperimentConfig, names, jobs: int = 1) -> dict:
    instances = [inst for n in names for inst in suite_instances(cfg, n)]
    chunks = _chunks(instances, jobs)
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_evaluate_chunk, chunks))
    else:
        results = [_evaluate_chunk(c) for c in chunks]
    by_suite: dict = {n: [] for n in names}
    for chunk, recs in zip(chunks, results):
        by_suite[chunk[0].suite].extend(recs)
    order = {inst.id: i for i, inst in enumerate(instances)}
    reports = {}
    for n in names:
        # stable sort keeps per-instance form order
        recs = sorted(by_suite[n], key=lambda r: order[r["id"]])
        reports[n] = build_report(cfg, n, recs)
    return reports


def theorem_suite(name: str, cfg: ExperimentConfig | None = None, jobs: int = 1) -> InequalityReport:
    """Run one registered suite (default corpus unless a config is given)."""
    get_suite(name)
    cfg = cfg if cfg is not None else ExperimentConfig(suites=(name,))
    return run_suites(cfg, [name], jobs)[name]


def find_instance(cfg: ExperimentConfig, instance_id: str) -> Instance:
    name = instance_id.split("/", 1)[0]
    for inst in suite_instances(cfg, name):
        if inst.id == instance_id:
            return inst
    raise KeyError(instance_id)


# ---------------------------------------------------------------------------
# decay curves

SHAPES = ("t", "t^r", "sqrt")
DECAY_OPS = {"A": "t", "A^r": "t^r", "comm": "sqrt", "M": None}


def _shape(name: str, t, r: float):
    t = np.asarray(t, dtype=float)
    if name == "t":
        return t
    if name == "t^r":
        return t**r
    if name == "sqrt":
        return np.sqrt(t)
    raise ValueError(f"unknown shape {name!r}")


@dataclass
class DecayReport:
    op: str
    label: str
    r: float
    t_grid: list
    phi: list
    check_grid: list
    check_phi: list
    fits: dict
    designated: str | None
    degenerate: bool

    def envelope(self, shape: str, t) -> np.ndarray:
        fit = self.fits[shape]
        return fit["c1"] * np.exp(-fit["c2"] * _shape(shape, t, self.r))

    def valid(self, shape: str) -> bool:
        """phi(t) <= c1 exp(-c2 shape(t)) on every check point; recomputed from samples."""
        fit = self.fits[shape]
        if not (math.isfinite(fit["c1"]) and math.isfinite(fit["c2"])):
            return False
        env = self.envelope(shape, self.check_grid)
        return bool(np.all(np.asarray(self.check_phi) <= env * (1 + 1e-9)))

    def to_dict(self) -> dict:
        d = _clean(asdict(self))
        d["valid"] = {s: self.valid(s) for s in self.fits}
        return d


def _fit_shape(t, phi, shape: str, r: float) -> dict:
    t = np.asarray(t)
    phi = np.asarray(phi)
    m = (phi > 0) & (phi <= 0.5)
    if m.sum() < 2:
        return {"c1": math.nan, "c2": math.nan, "residual": math.nan, "n_fit": int(m.sum())}
    x = _shape(shape, t[m], r)
    y = np.log(phi[m])
    slope, icpt = np.polyfit(x, y, 1)
    c2 = -float(slope)
    resid = y - (icpt + slope * x)
    c1 = float(np.max(phi[m] * np.exp(c2 * x)))
    return {"c1": c1, "c2": c2, "residual": float(np.sqrt(np.mean(resid**2))), "n_fit": int(m.sum())}


def decay_experiment(op: str, f: GridFunction, t_grid, check_grid=(1, 2, 4, 8, 16, 32, 64),
                     S=None, b: GridFunction | None = None, r: float = 2.0, kernel: str = "hilbert",
                     label: str = "") -> DecayReport:
    """phi(t) = |{x in Q : Op f > t * comparison}| / |Q| with Q the top cube.

    Ops: ``A`` (A_S f against Mf), ``A^r`` (A^r_S f against M_r f), ``comm``
    (T_{S,b} f + T*_{S,b} f against ||b|| M^2 f) and ``M`` (Mf against itself).
    S defaults to the stopping-time family of f for the given kernel.
    """
    if op not in DECAY_OPS:
        raise ValueError(f"unknown decay operator {op!r}; choose from {sorted(DECAY_OPS)}")
    dom = f.domain
    if op != "M" and S is None:
        S = extract_czo(corpus.operator(kernel, dom.depth), f).cubes
    if op == "M":
        val, cmp = maximal(f).values, maximal(f).values
    elif op == "A":
        val, cmp = sparse_operator(S, f).values, maximal(f).values
    elif op == "A^r":
        val, cmp = sparse_operator(S, f, r).values, maximal_delta(f, r).values
    else:
        if b is None:
            raise ValueError("the commutator form needs a symbol b")
        cs = commutator_sparse(S, b, f)
        val = cs.direct.values + cs.adjoint.values
        cmp = bmo_norm(b, "dyadic0") * iterated_maximal(f, 2).values
    degenerate = not np.any(cmp > 0)

    def phi_of(ts):
        return [float(np.mean(val > t * cmp)) for t in ts]

    t_grid = [float(t) for t in t_grid]
    check_grid = [float(t) for t in check_grid]
    phi = phi_of(t_grid)
    fits = {s: _fit_shape(t_grid, phi, s, r) for s in SHAPES}
    return DecayReport(op, label, r, t_grid, phi, check_grid, phi_of(check_grid), fits, DECAY_OPS[op], degenerate)


@dataclass
class DecayStudy:
    reports: list
    summary: dict
    passed: bool

    def to_dict(self) -> dict:
        return {"reports": [r.to_dict() for r in self.reports], "summary": _clean(self.summary), "passed": self.passed}


def decay_corpus(spec: DecaySpec, seed: int = 0) -> list:
    """f = chi_cell plus one random signal per seed (kinds cycled)."""
    dom = Domain(spec.depth)
    out = [("cell/s0", corpus.corpus_function(dom, "cell", 1000 * seed), 1000 * seed)]
    for i, s in enumerate(spec.seeds):
        kind = spec.kinds[i % len(spec.kinds)]
        s = int(s) + 1000 * seed
        out.append((f"{kind}/s{s}", corpus.corpus_function(dom, kind, s), s))
    return out


def decay_study(spec: DecaySpec, seed: int = 0) -> DecayStudy:
    reports = []
    for label, f, s in decay_corpus(spec, seed):
        S = extract_czo(corpus.operator(spec.kernel, spec.depth), f).cubes
        b = corpus.bmo_symbol(f.domain, s)
        for op in ("A", "A^r", "comm"):
            reports.append(decay_experiment(op, f, spec.t_grid, spec.check_grid, S, b, spec.r, spec.kernel, label))
    summary = {}
    passed = True
    for op in ("A", "A^r", "comm"):
        shape = DECAY_OPS[op]
        rs = [r for r in reports if r.op == op]
        c2_pos = all(r.fits[shape]["c2"] > 0 for r in rs)
        valid = all(r.valid(shape) for r in rs)
        entry = {
            "shape": shape,
            "c2_positive": c2_pos,
            "valid": valid,
            "min_c2": min(r.fits[shape]["c2"] for r in rs),
            "mean_residual": {s: float(np.mean([r.fits[s]["residual"] for r in rs])) for s in SHAPES},
        }
        ok = c2_pos and valid
        if op == "comm":
            mr = entry["mean_residual"]
            entry["sqrt_beats_t"] = bool(mr["sqrt"] < mr["t"])
            entry["per_instance_sqrt_wins"] = sum(r.fits["sqrt"]["residual"] < r.fits["t"]["residual"] for r in rs)
            entry["instances"] = len(rs)
            ok = ok and entry["sqrt_beats_t"]
        entry["ok"] = ok
        summary[op] = entry
        passed = passed and ok
    return DecayStudy(reports, summary, passed)


# ---------------------------------------------------------------------------
# Buckley exponent


@dataclass
class BuckleyReport:
    p: float
    depth: int
    x0: float
    a_grid: list
    ap: list
    norm: list
    witness: list
    slope: float
    expected: float
    band: list
    passed: bool
    note: str = "operator norms are maxima of ||Mf||/||f|| over test functions: lower bounds"

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def _weighted_ratio(f: np.ndarray, dom: Domain, w: np.ndarray, p: float) -> float:
    mf = maximal(GridFunction(f, dom)).values
    return lp_norms(mf, p, w).strong / lp_norms(f, p, w).strong


def buckley_experiment(p: float, a_grid, depth: int = 12, x0: float = 0.5, probes: int = 2,
                       seed: int = 0, band=None) -> BuckleyReport:
    """Slope of log ||M||_{L^p(w)} against log [w]_{A_p} over power weights |x - x0|^a.

    Test functions: w^(1-p') on [x0, x0 + 2^j h) for every j, truncated
    critical powers |x - x0|^(-b) on [x0, 1), and random probes.
    """
    if not p > 1:
        raise ValueError("p must be > 1")
    dom = Domain(depth)
    n = dom.n_cells
    i0 = min(n - 1, int(round(x0 * n)))
    dist = np.abs(dom.midpoints - x0)
    rng = corpus.rng_for("buckley", seed, depth)
    aps, norms, wit = [], [], []
    for a in a_grid:
        if not -1 < a < p - 1:
            raise ValueError(f"need -1 < a < p - 1, got a = {a}")
        w = power_weight(dom, a, x0)
        wv = w.values
        sigma = wv ** (1 - p / (p - 1))
        cands = []
        for j in range(depth):
            f = np.zeros(n)
            f[i0 : i0 + 2**j] = sigma[i0 : i0 + 2**j]
            cands.append((f"sigma_chi[2^{j}]", f))
        crit = (1 + a) / p
        for frac in (1 - 1 / depth, 1 - 4 / depth):
            f = np.where(np.arange(n) >= i0, dist ** (-crit * frac), 0.0)
            cands.append((f"power[b={crit * frac:.4f}]", f))
        for k in range(probes):
            j = int(rng.integers(0, depth))
            f = np.zeros(n)
            f[i0 : i0 + 2**j] = sigma[i0 : i0 + 2**j] * rng.uniform(0.5, 1.5, min(2**j, n - i0))
            cands.append((f"probe[{k}]", f))
        best, arg = 0.0, ""
        for tag, f in cands:
            r = _weighted_ratio(f, dom, wv, p)
            if r > best:
                best, arg = r, tag
        aps.append(ap_constant(w, p, "exact"))
        norms.append(best)
        wit.append(arg)
    slope = float(np.polyfit(np.log(aps), np.log(norms), 1)[0]) if len(a_grid) > 1 else math.nan
    expected = 1 / (p - 1)
    band = list(band) if band is not None else [expected - 0.15 * expected, expected + 0.15 * expected]
    passed = bool(band[0] <= slope <= band[1])
    return BuckleyReport(p, depth, x0, [float(a) for a in a_grid], aps, norms, wit, slope, expected, band, passed)


def buckley_study(spec: BuckleySpec, seed: int = 0) -> list:
    return [buckley_experiment(r.p, r.a_grid, spec.depth, spec.x0, spec.probes, seed, r.band) for r in spec.runs]


# ---------------------------------------------------------------------------
# C_p weights: functional curve against A_1 / A_infinity constants

CP_DELTAS = (0.1, 0.25, 0.5, 0.75, 1.0)
CP_SEPARATION = 1e3


@dataclass
class CpProfile:
    weight: dict
    label: str
    depth: int
    p: float
    deltas: tuple
    curve: tuple
    a1: float
    ainfty: float
    truncated: bool

    @property
    def finite(self) -> bool:
        return all(math.isfinite(v) for v in self.curve)

    @property
    def separated(self) -> bool:
        """A_1 and A_infinity constants both exceed the separation threshold."""
        return self.a1 > CP_SEPARATION and self.ainfty > CP_SEPARATION

    @property
    def passed(self) -> bool:
        return self.finite and (self.separated or not self.truncated)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(finite=self.finite, separated=self.separated, passed=self.passed)
        return d


def cp_profiles(cfg: ExperimentConfig) -> list | None:
    """C_p functional over a delta grid for every C_p corpus weight at the finest resolution."""
    names = [n for n in cfg.suites if SUITES[n].weights == "cp"]
    if not names:
        return None
    p = cfg.suite_params(names[0])["cp_q"]
    depth = max(max(cfg.suite_resolutions(n)) for n in names)
    dom = Domain(depth)
    out = []
    for spec in cfg.corpus.cp_weights:
        w = weight_generators(spec, dom)
        curve = tuple(cp_functional(w, p, d).value for d in CP_DELTAS)
        out.append(
            CpProfile(dict(spec), w.tag, depth, p, CP_DELTAS, curve, w.a1(), w.ainfty(),
                      spec["kind"] == "truncated_power")
        )
    return out


# ---------------------------------------------------------------------------
# full run


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: dict
    decay: DecayStudy | None
    buckley: list | None
    cp: list | None = None

    @property
    def passed(self) -> bool:
        ok = all(r.passed for r in self.reports.values())
        if self.decay is not None:
            ok = ok and self.decay.passed
        if self.buckley is not None:
            ok = ok and all(b.passed for b in self.buckley)
        if self.cp is not None:
            ok = ok and all(c.passed for c in self.cp)
        return ok

    def first_failure(self) -> tuple[str, str] | None:
        """(suite, instance id) of the first failing suite in config order."""
        for name, rep in self.reports.items():
            if not rep.passed and rep.first_failure:
                return name, rep.first_failure
        return None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.digest,
            "note": LOWER_BOUND_NOTE,
            "passed": self.passed,
            "suites": {n: r.to_dict() for n, r in self.reports.items()},
            "decay": None if self.decay is None else self.decay.to_dict(),
            "buckley": None if self.buckley is None else [b.to_dict() for b in self.buckley],
            "cp_profiles": None if self.cp is None else [c.to_dict() for c in self.cp],
        }


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SPARSELAB_JOBS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    reports = run_suites(cfg, list(cfg.suites), jobs) if cfg.suites else {}
    decay = decay_study(cfg.decay, cfg.seed) if cfg.decay is not None else None
    buckley = buckley_study(cfg.buckley, cfg.seed) if cfg.buckley is not None else None
    return RunResult(cfg, reports, decay, buckley, cp_profiles(cfg))


def instance_inputs(inst: Instance):
    return build_inputs(inst)
