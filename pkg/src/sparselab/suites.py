"""Registered inequality suites.

A suite expands a config into instances (resolution, signal kind, seed,
weights) and evaluates one instance into per-form outcomes.  Every outcome is
a ratio LHS/RHS whose maximum over the corpus is the fitted constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import corpus
from .czo import apply, commutator, maximal_truncation, vector_apply, vector_commutator, vector_maximal_truncation
from .dyadic import CubeSet, Domain, DyadicCube, whitney_decomposition
from .maximal import (
    iterated_maximal,
    maximal,
    maximal_of_indicator,
    maximal_delta,
    multilinear_maximal,
    orlicz_maximal,
    sawyer_functional,
    sharp_maximal,
    vector_maximal,
)
from .signal import (
    GridFunction,
    VectorFunction,
    YoungFunction,
    bmo_norm,
    fit_pointwise,
    llogl,
    lp_norms,
    lq_norm,
    power,
    weak_norm,
)
from .sparse import (
    SparseFamily,
    average_stopping_family,
    commutator_sparse,
    extract_bilinear,
    extract_commutator,
    extract_czo,
    extract_mq,
    sparse_operator,
    verify_sparse,
)
from .weights import Weight, two_weight_ap

# the average-stopping family with base 4 is 3/4-sparse
STOPPING_BASE = 4.0
STOPPING_ETA = Fraction(3, 4)

DEFAULT_PARAMS = {
    "p": 2.0,
    "q": 2.0,
    "r": 1.5,
    "s": 1.0,
    "delta": 0.5,
    "eps": 0.25,
    "lam": 0.125,
    "cp_q": 2.5,
    "J": 2,
    "d_ps": [0.7, 1.0, 1.5, 2.0],
    "sharp_deltas": [0.5, 0.75],
}


# ---------------------------------------------------------------------------
# instances, inputs, outcomes


@dataclass(frozen=True)
class Instance:
    suite: str
    depth: int
    kind: str
    seed: int
    kernel: str = "hilbert"
    weights: tuple = ()  # JSON-encoded weight specs (w, sigma)
    params: str = "{}"  # JSON-encoded parameter dict

    @property
    def id(self) -> str:
        parts = [self.suite, f"L{self.depth}", self.kind, f"s{self.seed}"]
        if self.weights:
            parts.append("+".join(corpus.weight_label(json.loads(w)) for w in self.weights))
        return "/".join(parts)

    @property
    def param_dict(self) -> dict:
        return json.loads(self.params)

    def sort_key(self) -> tuple:
        return (self.suite, self.depth, self.kind, self.seed, self.kernel, self.weights)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "depth": self.depth,
            "kind": self.kind,
            "seed": self.seed,
            "kernel": self.kernel,
            "weights": [json.loads(w) for w in self.weights],
            "params": self.param_dict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        return cls(
            str(d["suite"]),
            int(d["depth"]),
            str(d["kind"]),
            int(d["seed"]),
            str(d.get("kernel", "hilbert")),
            tuple(json.dumps(w, sort_keys=True) for w in d.get("weights", ())),
            json.dumps(d.get("params", {}), sort_keys=True),
        )


@dataclass
class Inputs:
    F: VectorFunction
    G: VectorFunction | None = None
    b: GridFunction | None = None
    w: Weight | None = None
    sigma: Weight | None = None

    def functions(self) -> dict:
        """Named grid functions for dumping."""
        out = {f"F{j}": c for j, c in enumerate(self.F.components)}
        if self.G is not None:
            out.update({f"G{j}": c for j, c in enumerate(self.G.components)})
        if self.b is not None:
            out["b"] = self.b
        if self.w is not None:
            out["w"] = self.w.function
        if self.sigma is not None:
            out["sigma"] = self.sigma.function
        return out

    @classmethod
    def from_functions(cls, fns: dict) -> "Inputs":
        def comps(prefix):
            keys = sorted((k for k in fns if k[0] == prefix and k[1:].isdigit()), key=lambda k: int(k[1:]))
            return VectorFunction(tuple(fns[k] for k in keys)) if keys else None

        F = comps("F")
        if F is None:
            raise ValueError("dump has no F components")
        w = Weight(fns["w"], tag="replayed") if "w" in fns else None
        sigma = Weight(fns["sigma"], tag="replayed") if "sigma" in fns else None
        return cls(F, comps("G"), fns.get("b"), w, sigma)


@dataclass
class Outcome:
    form: str
    lhs: float
    rhs: float
    ratio: float
    ok: bool = True
    extra: dict = field(default_factory=dict)
    cells: tuple | None = None  # (lhs, rhs) arrays for pointwise forms
    families: list = field(default_factory=list)  # SparseFamily or CubeSet, for dumps


def scalar_ratio(lhs: float, rhs: float) -> float:
    """lhs/rhs with 0/0 = 0 and x/0 = inf."""
    if rhs < 0:
        raise ValueError("rhs must be nonnegative")
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return float(lhs) / float(rhs)


def scalar(form: str, lhs: float, rhs: float, ok: bool = True, **extra) -> Outcome:
    return Outcome(form, float(lhs), float(rhs), scalar_ratio(lhs, rhs), ok, extra)


def pointwise(form: str, lhs, rhs, ok: bool = True, families=(), **extra) -> Outcome:
    a = np.abs(np.asarray(lhs, dtype=float))
    b = np.asarray(rhs, dtype=float)
    c = fit_pointwise(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(b > 0, a / np.where(b > 0, b, 1.0), np.where(a > 0, np.inf, 0.0))
    i = int(np.argmax(r)) if r.size else 0
    return Outcome(form, float(a[i]), float(b[i]), c, ok, extra, (a, b), list(families))


# ---------------------------------------------------------------------------
# norms and constants


def _vals(g) -> np.ndarray:
    return g.values if isinstance(g, (GridFunction, Weight)) else np.asarray(g, dtype=float)


def lp(g, p: float, w=None) -> float:
    return lp_norms(np.asarray(_vals(g)), p, None if w is None else _vals(w)).strong


def lp_weak(g, p: float, w=None) -> float:
    v = _vals(g)
    h = 1.0 / v.size
    mass = np.full(v.size, h) if w is None else _vals(w) * h
    return weak_norm(v, p, mass)


def integral(g) -> float:
    v = _vals(g)
    return float(v.sum() / v.size)


@lru_cache(maxsize=None)
def young_factor(tag: str, r: float) -> float:
    """int_1^inf phi^-1(t) / (t^2 log(e + t)) dt, integrated in u = log t.

    Cut at u = 700 (float range); the neglected tail is O(1/700) for LlogL
    and negligible for powers.
    """
    phi = young(tag, r)

    def g(u):
        t = math.exp(u)
        return float(phi.inverse(np.array(t))) / (t * math.log(math.e + t))

    return float(quad(g, 0.0, 700.0, limit=400)[0])


def young(tag: str, r: float) -> YoungFunction:
    if tag == "power":
        return power(r)
    if tag == "llogl":
        return llogl(1.0)
    raise ValueError(f"unknown Young function {tag!r}")


def _conj(p: float) -> float:
    return p / (p - 1)


# ---------------------------------------------------------------------------
# sparse domination suites


def _mq_sparse(inst, x: Inputs, P) -> list:
    r = extract_mq(x.F, P["q"], P["lam"])
    return [
        pointwise(
            "domination",
            r.lhs.values,
            r.rhs.values,
            r.ok,
            [c.family for c in r.families if c.family is not None],
            oscillation_ratio=r.oscillation_ratio,
            carleson=[str(c.carleson) for c in r.families],
        )
    ]


def _cz_outcome(r, T) -> Outcome:
    fams = [r.check.family] + [c.family for c in r.mapped]
    return pointwise(
        "domination",
        r.lhs.values,
        r.rhs.values,
        r.ok,
        [f for f in fams if f is not None],
        mapped_constant=r.mapped_constant,
        operator_constant=r.operator_constant,
        max_alpha=r.max_alpha,
        carleson=str(r.check.carleson),
        mapped_carleson=[str(c.carleson) for c in r.mapped],
    )


def _tq_sparse(inst, x: Inputs, P) -> list:
    T = corpus.operator(inst.kernel, inst.depth)
    return [_cz_outcome(extract_czo(T, x.F, q=P["q"]), T)]


def _comm_sparse(inst, x: Inputs, P) -> list:
    T = corpus.operator(inst.kernel, inst.depth)
    return [_cz_outcome(extract_commutator(T, x.b, x.F, q=P["q"]), T)]


def _bilinear_sparse(inst, x: Inputs, P) -> list:
    r = extract_bilinear(x.F, x.G, P["s"], P["q"], 1.0, P["lam"])
    return [
        pointwise(
            "domination",
            r.lhs.values,
            r.rhs.values,
            r.ok,
            [r.check.family] if r.check.family is not None else [],
            scale=r.scale,
            scaled_constant=r.constant / r.scale,
            carleson=str(r.check.carleson),
        )
    ]


# ---------------------------------------------------------------------------
# weighted norm suites


def _pair(x: Inputs, p: float) -> dict:
    return {
        "apws": two_weight_ap(x.w, x.sigma, p, "exact"),
        "ainfty_w": x.w.ainfty(),
        "ainfty_sigma": x.sigma.ainfty(),
    }


def _mixed_forms(lhs_fn, base: float, p: float, q: float, c: dict, scale: float = 1.0) -> list:
    """Strong form [w,s]^(1/p)([w]^((1/q-1/p)+) + [s]^(1/p)) and, for p != q, the weak form."""
    e = max(1 / q - 1 / p, 0.0)
    head = scale * c["apws"] ** (1 / p)
    out = [
        scalar(
            "strong",
            lp(lhs_fn, p, c["w"]),
            head * (c["ainfty_w"] ** e + c["ainfty_sigma"] ** (1 / p)) * base,
            **c["info"],
        )
    ]
    if p != q:
        out.append(scalar("weak", lp_weak(lhs_fn, p, c["w"]), head * c["ainfty_w"] ** e * base, **c["info"]))
    return out


def _mq_weighted(inst, x: Inputs, P) -> list:
    p, q = P["p"], P["q"]
    info = _pair(x, p)
    lhs = vector_maximal(x.F.scale(x.sigma.values), q, "exact")
    base = lp(x.F.norm(q), p, x.sigma)
    return _mixed_forms(lhs, base, p, q, {**info, "w": x.w, "info": info})


def _asr_weighted(inst, x: Inputs, P) -> list:
    p, r = P["p"], P["r"]
    f = x.F.components[0]
    S = average_stopping_family(f, STOPPING_BASE)
    ok = verify_sparse(f.domain, S, STOPPING_ETA).ok
    info = _pair(x, p)
    lhs = sparse_operator(S, f * x.sigma.values, r)
    out = _mixed_forms(lhs, lp(f, p, x.sigma), p, r, {**info, "w": x.w, "info": info})
    for o in out:
        o.ok = ok
        o.families = [S]
    return out


def _tq_weighted(inst, x: Inputs, P) -> list:
    p, q = P["p"], P["q"]
    T = corpus.operator(inst.kernel, inst.depth)
    c = _pair(x, p)
    lhs = vector_apply(T, x.F.scale(x.sigma.values), q)
    base = lp(x.F.norm(q), p, x.sigma)
    head = T.constant * c["apws"] ** (1 / p)
    pp = _conj(p)
    return [
        scalar("strong", lp(lhs, p, x.w), head * (c["ainfty_w"] ** (1 / pp) + c["ainfty_sigma"] ** (1 / p)) * base, **c),
        scalar("weak", lp_weak(lhs, p, x.w), head * c["ainfty_w"] ** (1 / pp) * base, **c),
    ]


def _comm_weighted(inst, x: Inputs, P) -> list:
    p, q = P["p"], P["q"]
    T = corpus.operator(inst.kernel, inst.depth)
    c = _pair(x, p)
    aw, asg = c["ainfty_w"], c["ainfty_sigma"]
    bn = bmo_norm(x.b)
    lhs = vector_commutator(T, x.b, x.F, q)
    rhs = (
        T.constant
        * x.w.ap(p) ** (1 / p)
        * (aw ** (1 / _conj(p)) + asg ** (1 / p))
        * (aw + asg)
        * bn
        * lp(x.F.norm(q), p, x.w)
    )
    return [scalar("strong", lp(lhs, p, x.w), rhs, **c, ap=x.w.ap(p), bmo=bn)]


def _endpoint_young(inst, x: Inputs, P) -> list:
    q, r = P["q"], P["r"]
    T = corpus.operator(inst.kernel, inst.depth)
    tf = vector_apply(T, x.F, q)
    lhs = lp_weak(tf, 1.0, x.w)
    fq = x.F.norm(q).values
    out = []
    for tag in ("power", "llogl"):
        phi = young(tag, r)
        mw = orlicz_maximal(x.w.function, phi, "shifted3").values
        cf = young_factor(tag, r)
        out.append(scalar(f"young={tag}", lhs, T.constant * cf * integral(fq * mw), young_factor=cf))
    return out


def _fs_a1(inst, x: Inputs, P) -> list:
    p, q, r = P["p"], P["q"], P["r"]
    T = corpus.operator(inst.kernel, inst.depth)
    lhs = lp(vector_apply(T, x.F, q), p, x.w)
    mrw = maximal_delta(x.w.function, r, "exact")
    pp, rr = _conj(p), _conj(r)
    rhs = T.constant * p * pp * rr ** (1 / pp) * lp(x.F.norm(q), p, mrw)
    return [scalar("strong", lhs, rhs)]


# ---------------------------------------------------------------------------
# pointwise and unweighted suites


def _cotlar(inst, x: Inputs, P) -> list:
    q, d = P["q"], P["delta"]
    T = corpus.operator(inst.kernel, inst.depth)
    ct = T.constant
    f = x.F.components[0]
    scalar_rhs = maximal_delta(apply(T, f), d).values + ct * maximal(f).values
    arr = np.abs(x.F.array @ T.matrix.T) ** d
    vec_rhs = vector_maximal(VectorFunction.from_array(f.domain, arr), q / d).values ** (1 / d)
    vec_rhs = vec_rhs + ct * vector_maximal(x.F, q).values
    return [
        pointwise("scalar", maximal_truncation(T, f).values, scalar_rhs),
        pointwise("vector", vector_maximal_truncation(T, x.F, q).values, vec_rhs),
    ]


def _sharp_t(inst, x: Inputs, P) -> list:
    T = corpus.operator(inst.kernel, inst.depth)
    f = x.F.components[0]
    tf = apply(T, f)
    rhs = T.constant * maximal(f).values
    return [pointwise(f"delta={d}", sharp_maximal(tf, d).values, rhs) for d in P["sharp_deltas"]]


def _sharp_comm(inst, x: Inputs, P) -> list:
    eps, d = P["eps"], P["delta"]
    T = corpus.operator(inst.kernel, inst.depth)
    f = x.F.components[0]
    bn = bmo_norm(x.b)
    lhs = sharp_maximal(commutator(T, x.b, f), eps).values
    rhs = bn * (maximal_delta(apply(T, f), d).values + T.constant * iterated_maximal(f, 2).values)
    return [pointwise("pointwise", lhs, rhs, bmo=bn)]


def _weak11_tq(inst, x: Inputs, P) -> list:
    q = P["q"]
    T = corpus.operator(inst.kernel, inst.depth)
    tf = vector_apply(T, x.F, q).values
    fq = x.F.norm(q).values
    total = integral(fq)
    lhs = 0.0
    if total > 0:
        for k in range(-2, inst.depth + 1):
            lam = 2.0**k * total
            lhs = max(lhs, lam * float(np.mean(tf > lam)))
    return [scalar("levels", lhs, T.constant * total)]


def _fs_duality(inst, x: Inputs, P) -> list:
    # exponent r in (1, q): with r = 1 the left side grows like log N for point masses
    q, r = P["q"], P["r"]
    g = np.abs(x.G.components[0].values)
    lhs = integral(vector_maximal(x.F, q).values ** r * g)
    rhs = integral(x.F.norm(q).values ** r * maximal(GridFunction(g, x.F.domain)).values)
    return [scalar("integral", lhs, rhs, r=r)]


def _weakpp_mq(inst, x: Inputs, P) -> list:
    p, q = P["p"], P["q"]
    return [scalar("weak", lp_weak(vector_maximal(x.F, q), p), lp_weak(x.F.norm(q), p))]


# ---------------------------------------------------------------------------
# C_p suites


def _cp_parts(x: Inputs):
    f = x.F.components[0]
    S = average_stopping_family(f, STOPPING_BASE)
    ok = verify_sparse(f.domain, S, STOPPING_ETA).ok
    cs = commutator_sparse(S, x.b, f)
    return f, S, ok, cs, bmo_norm(x.b)


def _cp_norms(x: Inputs, P, norm) -> list:
    p = P["p"]
    f, S, ok, cs, bn = _cp_parts(x)
    mf = maximal(f)
    m2f = iterated_maximal(f, 2)
    out = [
        scalar("sparse", norm(sparse_operator(S, f), p, x.w), norm(mf, p, x.w), ok),
        scalar("comm", norm(cs.direct, p, x.w), bn * norm(mf, p, x.w), ok, bmo=bn),
        scalar("comm_adjoint", norm(cs.adjoint, p, x.w), bn * norm(m2f, p, x.w), ok, bmo=bn),
    ]
    for o in out:
        o.families = [S]
    return out


def _cp_strong(inst, x: Inputs, P) -> list:
    return _cp_norms(x, P, lp)


def _cp_weak(inst, x: Inputs, P) -> list:
    return _cp_norms(x, P, lp_weak)


def maximal_dyadic_cubes(domain: Domain, mask: np.ndarray) -> CubeSet:
    """Maximal shift-0 cubes all of whose cells lie in ``mask``."""
    out = []
    stack = [DyadicCube(0, 0, 0)]
    while stack:
        q = stack.pop()
        lo, hi = domain.cube_range(q)
        seg = mask[lo:hi]
        if seg.all():
            out.append(q)
        elif seg.any():
            stack.extend(domain.children(q))
    return CubeSet(out)


def _cp_key_lemma(inst, x: Inputs, P) -> list:
    """Level-set functional of Mf against its weak norm, and the pointwise
    comparison of the maximal dyadic cubes of {Mf > 2^k} with its Whitney cubes."""
    p, cq = P["p"], P["cp_q"]
    f = GridFunction(np.abs(x.F.components[0].values), x.F.domain)
    g = maximal(f)
    w = x.w.values
    dom = f.domain
    gv = g.values
    best = {"whitney": 0.0, "integral": 0.0}
    cover_lhs = np.zeros(dom.n_cells)
    cover_rhs = np.zeros(dom.n_cells)
    cover = -1.0
    if gv.max() > 0:
        kmin = math.ceil(math.log2(gv.min()))
        kmax = math.ceil(math.log2(gv.max())) - 1
        for k in range(kmin, kmax + 1):
            sv = sawyer_functional(g, k, p, cq, w)
            best["whitney"] = max(best["whitney"], sv.whitney)
            best["integral"] = max(best["integral"], sv.integral)
            omega = gv > 2.0**k
            disjoint = _indicator_sum(dom, maximal_dyadic_cubes(dom, omega), cq)
            whitney = _indicator_sum(dom, whitney_decomposition(dom, omega).cubes, cq)
            c = fit_pointwise(disjoint, whitney)
            if c > cover:
                cover, cover_lhs, cover_rhs = c, disjoint, whitney
    rhs = lp_weak(g, p, w) ** p
    return [
        scalar("whitney", best["whitney"], rhs),
        scalar("integral", best["integral"], rhs),
        pointwise("covering", cover_lhs, cover_rhs),
    ]


def _indicator_sum(dom: Domain, cubes, q: float) -> np.ndarray:
    """sum over cubes of M(chi_Q)^q."""
    tot = np.zeros(dom.n_cells)
    for c in cubes:
        tot += maximal_of_indicator(dom, c).values ** q
    return tot


def _yabuta(inst, x: Inputs, P) -> list:
    p = P["p"]
    f = x.F.components[0]
    return [scalar("strong", lp(maximal(f), p, x.w), lp(sharp_maximal(f), p, x.w))]


def _d_condition(inst, x: Inputs, P) -> list:
    T = corpus.operator(inst.kernel, inst.depth)
    f = x.F.components[0]
    g = x.G.components[0]
    tf = apply(T, f)
    cb = commutator(T, x.b, f)
    mf = maximal(f)
    m2f = iterated_maximal(f, 2)
    bn = bmo_norm(x.b)
    out = []
    for p in P["d_ps"]:
        out.append(scalar(f"T:p={p}", lp(tf, p, x.w), T.constant * lp(mf, p, x.w)))
        out.append(scalar(f"comm:p={p}", lp(cb, p, x.w), T.constant * bn * lp(m2f, p, x.w), bmo=bn))
    mm = multilinear_maximal([f, g])
    out.append(pointwise("multilinear", mm.values, mf.values * maximal(g).values))
    return out


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class Suite:
    name: str
    summary: str
    evaluate: Callable = field(repr=False)
    weights: str = ""  # "", "pair", "one", "single", "cp"
    needs: tuple = ()  # extra inputs: "G", "b"
    vector: bool = False  # uses q > 1
    support: tuple = (0.0, 1.0)


SUITES = {
    s.name: s
    for s in [
        Suite("mq-sparse", "M_q F <= C sum over three sparse families of <|F|_q>^q averages, pointwise", _mq_sparse, vector=True),
        Suite("tq-sparse", "|T_q F| <= C C_T sum <|F|_q>_{3Q} chi_Q on the top cube, pointwise", _tq_sparse, vector=True),
        Suite("comm-sparse", "|[b,T]_q F| <= C C_T sparse commutator forms, pointwise", _comm_sparse, needs=("b",), vector=True),
        Suite("bilinear-sparse", "M_{1,s}(|f|_q, |g|_q') <= C sparse bilinear form, pointwise; qq' scaling reported", _bilinear_sparse, needs=("G",), vector=True),
        Suite("mq-weighted", "||M_q(sigma F)||_{L^p(w)} against mixed [w,sigma]_{A_p}, A_inf factors; strong and weak", _mq_weighted, "pair", vector=True),
        Suite("asr-weighted", "||A^r_S(f sigma)||_{L^p(w)} against mixed A_p, A_inf factors; strong and weak", _asr_weighted, "pair"),
        Suite("tq-weighted", "||T_q(sigma F)||_{L^p(w)} <= C C_T [w,sigma]^(1/p)([w]^(1/p') + [sigma]^(1/p)); weak analogue", _tq_weighted, "pair", vector=True),
        Suite("comm-weighted", "||[b,T]_q F||_{L^p(w)} with the extra ([w]_inf + [sigma]_inf) factor", _comm_weighted, "one", ("b",), vector=True),
        Suite("endpoint-young", "||T_q F||_{L^{1,inf}(w)} <= C c_Phi int |F|_q M_Phi w for power and LlogL", _endpoint_young, "single", vector=True),
        Suite("fs-a1", "||T_q F||_{L^p(w)} <= C C_T p p' (r')^(1/p') || |F|_q ||_{L^p(M_r w)}", _fs_a1, "single", vector=True),
        Suite("cotlar", "T* f <= C (M_delta(Tf) + C_T Mf) pointwise, scalar and vector", _cotlar, vector=True),
        Suite("sharp-T", "M#_delta(Tf) <= C C_T Mf pointwise", _sharp_t),
        Suite("sharp-comm", "M#_eps([b,T]f) <= C ||b|| (M_delta(Tf) + C_T M^2 f) pointwise", _sharp_comm, needs=("b",)),
        Suite("weak11-Tq", "lambda |{|T_q F| > lambda}| <= C C_T int |F|_q over dyadic levels", _weak11_tq, vector=True),
        Suite("fs-duality", "int (M_q F)^r g <= C int |F|_q^r Mg for 1 < r < q", _fs_duality, needs=("G",), vector=True),
        Suite("weakpp-Mq", "||M_q F||_{p,inf} <= C || |F|_q ||_{p,inf}", _weakpp_mq, vector=True),
        Suite("cp-strong", "||A_S f||, ||T_{b,S} f|| <= C ||Mf||; ||T*_{b,S} f|| <= C ||M^2 f|| in L^p(w), w in C_q", _cp_strong, "cp", ("b",)),
        Suite("cp-weak", "weak L^p(w) versions of the cp-strong bounds", _cp_weak, "cp", ("b",)),
        Suite("cp-key-lemma", "sup_k level-set Whitney functional of Mf <= C ||Mf||^p_{L^{p,inf}(w)}; covering ratio", _cp_key_lemma, "cp"),
        Suite("yabuta", "||Mf||_{L^p(w)} <= C ||M# f||_{L^p(w)}, f supported in [1/4, 3/4)", _yabuta, "cp", support=(0.25, 0.75)),
        Suite("d-condition", "||Tf||_{L^p(w)} <= C ||Mf||, ||[b,T]f|| <= C ||b|| ||M^2 f|| for several p; multilinear maximal", _d_condition, "cp", ("G", "b")),
    ]
}


def get_suite(name: str) -> Suite:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; registered suites: {', '.join(sorted(SUITES))}")
    return SUITES[name]


# ---------------------------------------------------------------------------
# corpus expansion


def weight_sets(suite: Suite, p: float, ap_specs, cp_specs) -> list[tuple]:
    if suite.weights == "pair":
        return [(corpus.UNIT, corpus.UNIT)] + [(w, {"kind": "dual", "of": w, "p": p}) for w in ap_specs]
    if suite.weights == "one":
        return [(w, {"kind": "dual", "of": w, "p": p}) for w in [corpus.UNIT, *ap_specs]]
    if suite.weights == "single":
        return [(w,) for w in [corpus.UNIT, *ap_specs]]
    if suite.weights == "cp":
        return [(w,) for w in cp_specs]
    return [()]


def build_inputs(inst: Instance) -> Inputs:
    suite = get_suite(inst.suite)
    P = {**DEFAULT_PARAMS, **inst.param_dict}
    dom = Domain(inst.depth)
    J = int(P.get("J", 1)) if suite.vector else 1
    F = corpus.corpus_vector(dom, inst.kind, inst.seed, J, P["p"], suite.support)
    G = b = w = sigma = None
    if "G" in suite.needs:
        other = corpus.FUNCTION_KINDS[(corpus.FUNCTION_KINDS.index(inst.kind) + 1) % len(corpus.FUNCTION_KINDS)]
        G = corpus.corpus_vector(dom, other, inst.seed + 1000, J, P["p"], suite.support)
    if "b" in suite.needs:
        b = corpus.bmo_symbol(dom, inst.seed)
    specs = [json.loads(s) for s in inst.weights]
    if specs:
        w = corpus.weight(specs[0], inst.depth)
    if len(specs) > 1:
        sigma = corpus.weight(specs[1], inst.depth)
    return Inputs(F, G, b, w, sigma)


def evaluate(inst: Instance, inputs: Inputs | None = None) -> list[Outcome]:
    suite = get_suite(inst.suite)
    x = inputs if inputs is not None else build_inputs(inst)
    P = {**DEFAULT_PARAMS, **inst.param_dict}
    return suite.evaluate(inst, x, P)
