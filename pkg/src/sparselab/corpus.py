"""Deterministic test signals, symbols and weights for the harness."""

from __future__ import annotations

import json

import numpy as np

from .czo import CZOperator, make_kernel
from .dyadic import Domain
from .signal import GridFunction, VectorFunction, bmo_norm
from .weights import Weight, weight_generators

FUNCTION_KINDS = ("cell", "interval", "spike", "noise")


def rng_for(*key) -> np.random.Generator:
    """Independent stream per key tuple (ints or strings)."""
    ints = [k if isinstance(k, int) else sum(ord(c) * 131**i for i, c in enumerate(str(k))) % 2**31 for k in key]
    return np.random.default_rng(ints)


def corpus_function(domain: Domain, kind: str, seed: int, p: float = 2.0, support=(0.0, 1.0), salt: int = 0) -> GridFunction:
    """One corpus signal, supported in ``support`` (a fraction range of the domain)."""
    rng = rng_for(kind, seed, domain.depth, salt)
    n = domain.n_cells
    a = int(round(support[0] * n))
    b = int(round(support[1] * n))
    v = np.zeros(n)
    if kind == "cell":
        v[rng.integers(a, b)] = 1.0
    elif kind == "interval":
        lo = int(rng.integers(a, b - 1))
        hi = int(rng.integers(lo + 1, min(b, lo + max(2, (b - a) // 4)) + 1))
        v[lo:hi] = 1.0
    elif kind == "spike":
        # |x - x0|^(-beta) with beta < 1/p, clipped at half a cell
        beta = 0.9 / max(p, 1.0)
        x = domain.midpoints
        x0 = (rng.integers(a, b) + rng.uniform(0.2, 0.8)) * domain.cell_measure
        rad = rng.uniform(0.05, 0.25) * (b - a) * domain.cell_measure
        d = np.maximum(np.abs(x - x0), domain.cell_measure / 2)
        v = np.where(np.abs(x - x0) <= rad, d ** (-beta), 0.0)
        v[:a] = 0.0
        v[b:] = 0.0
    elif kind == "noise":
        v[a:b] = rng.normal(size=b - a)
    else:
        raise ValueError(f"unknown function kind {kind!r}; choose from {FUNCTION_KINDS}")
    return GridFunction(v, domain)


def corpus_vector(domain: Domain, kind: str, seed: int, J: int, p: float = 2.0, support=(0.0, 1.0)) -> VectorFunction:
    """J components of the same kind with independent draws."""
    return VectorFunction(
        tuple(corpus_function(domain, kind, seed, p, support, salt=j) for j in range(J))
    )


def bmo_symbol(domain: Domain, seed: int) -> GridFunction:
    """log|x - x0| normalized to unit dyadic BMO norm."""
    rng = rng_for("symbol", seed, domain.depth)
    x0 = rng.uniform(0.2, 0.8)
    b = np.log(np.maximum(np.abs(domain.midpoints - x0), domain.cell_measure / 2))
    g = GridFunction(b, domain)
    return g / bmo_norm(g, "dyadic0")


def corpus_kernel(seed: int) -> str:
    return ("hilbert", "holder")[seed % 2]


_operators: dict = {}


def operator(kernel: str, depth: int) -> CZOperator:
    """Memoized per process: operator matrices and their norms are reused."""
    key = (kernel, depth)
    if key not in _operators:
        _operators[key] = CZOperator(make_kernel(kernel), Domain(depth))
    return _operators[key]


_weights: dict = {}


def weight(spec: dict, depth: int) -> Weight:
    """Resolve a weight spec; besides the generator kinds, ``unit`` is w = 1 and
    ``dual`` is w^(1-p') of the nested spec ``of``."""
    key = (json.dumps(spec, sort_keys=True), depth)
    if key not in _weights:
        dom = Domain(depth)
        kind = spec.get("kind")
        if kind == "unit":
            w = Weight(GridFunction.constant(dom, 1.0), tag="unit")
        elif kind == "dual":
            w = weight(spec["of"], depth).dual(float(spec["p"]))
        else:
            w = weight_generators(spec, dom)
        _weights[key] = w
    return _weights[key]


def weight_label(spec: dict) -> str:
    kind = spec["kind"]
    if kind == "dual":
        return f"dual[{weight_label(spec['of'])},p={spec['p']}]"
    args = ",".join(f"{k}={spec[k]}" for k in sorted(spec) if k != "kind")
    return f"{kind}({args})" if args else kind


UNIT = {"kind": "unit"}

AP_WEIGHTS = (
    {"kind": "power", "a": -0.5, "x0": 0.5},
    {"kind": "power", "a": 0.5, "x0": 0.5},
    {"kind": "power", "a": 0.8, "x0": 0.3},
    {"kind": "power", "a": -0.3, "x0": 0.1},
    {"kind": "bounded_random", "low": 0.5, "high": 2.0, "seed": 1},
    {"kind": "a1_like", "delta": 0.5, "spikes": 3, "seed": 2},
)

CP_WEIGHTS = (
    {"kind": "power", "a": 0.5, "x0": 0.5},
    {"kind": "power", "a": 1.2, "x0": 0.5},
    {"kind": "truncated_power", "a": 0.5, "x0": 0.5},
    {"kind": "truncated_power", "a": 1.0, "x0": 0.5},
)
