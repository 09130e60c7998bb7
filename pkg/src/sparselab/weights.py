"""Weights and their characteristic constants.

A scope names the cube family a supremum runs over: ``"dyadic0"``,
``"dyadic1"``, ``"dyadic2"``, ``"shifted3"`` or ``"exact"`` (all grid
intervals), the same tags the maximal operators use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .dyadic import Domain, lattice_groups
from .maximal import kind_name, maximal, maximal_of_indicator, prefix, sup_over_cubes
from .signal import GridFunction, cube_rows

FLOOR = 1e-8
# frozen from scripts/calibrate_tau.py: twice the corpus max tau_min (0.446 at L <= 10), rounded up
TAU_DEFAULT = 0.9


def _values(w) -> np.ndarray:
    v = w.values if isinstance(w, (GridFunction, Weight)) else np.asarray(w, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("weight must be strictly positive (nonpositive cell found)")
    return v


def _domain(w) -> Domain:
    return w.domain


def _sup_cubes(domain: Domain, scope: str, value) -> float:
    """max over the scope's cubes of value(lo, ell)."""
    best = -math.inf
    for lo, ell in lattice_groups(domain, kind_name(scope)):
        best = max(best, float(np.max(value(lo, ell))))
    return best


def _averager(v: np.ndarray):
    s = prefix(v)
    return lambda lo, ell: (s[lo + ell] - s[lo]) / ell


# ---------------------------------------------------------------------------
# Muckenhoupt constants


def ap_constant(w, p: float, scope: str = "exact") -> float:
    """sup_Q <w>_Q <w^(-1/(p-1))>_Q^(p-1)."""
    if not p > 1:
        raise ValueError("p must be > 1")
    v = _values(w)
    return two_weight_ap(w, GridFunction(v ** (-1.0 / (p - 1)), _domain(w)), p, scope)


def two_weight_ap(w, sigma, p: float, scope: str = "exact") -> float:
    """sup_Q <w>_Q <sigma>_Q^(p-1)."""
    if not p > 1:
        raise ValueError("p must be > 1")
    aw = _averager(_values(w))
    asg = _averager(_values(sigma))
    return _sup_cubes(_domain(w), scope, lambda lo, ell: aw(lo, ell) * asg(lo, ell) ** (p - 1))


def dual_weight(w, p: float) -> GridFunction:
    """sigma = w^(1 - p')."""
    pp = p / (p - 1)
    return GridFunction(_values(w) ** (1 - pp), _domain(w))


def a1_constant(w, scope: str = "exact") -> float:
    """max over cells of Mw / w."""
    v = _values(w)
    dom = _domain(w)
    m = maximal(GridFunction(v, dom), scope).values
    return float(np.max(m / v))


# ---------------------------------------------------------------------------
# Fujii-Wilson constant


def _ainfty_dyadic(v: np.ndarray, domain: Domain, shift: int) -> float:
    """Level-wise suffix maxima: inside Q at level k, M(w chi_Q) is the max of
    the averages of the lattice cubes at levels k..L containing the cell."""
    n = domain.n_cells
    cells = np.arange(n)
    s = prefix(v)
    running = np.full(n, -np.inf)
    best = 0.0
    for k in range(domain.depth, -1, -1):
        lo, hi = domain.level_ranges(shift, k)
        avg = (s[hi] - s[lo]) / (hi - lo)
        owner = np.searchsorted(lo, cells, side="right") - 1
        running = np.maximum(running, avg[owner])
        ps = prefix(running)
        ratio = (ps[hi] - ps[lo]) / (s[hi] - s[lo])
        best = max(best, float(ratio.max()))
    return best


def _ainfty_exact(v: np.ndarray) -> float:
    """All grid intervals; inside Q the best interval may be taken inside Q."""
    n = v.size
    s = prefix(v)
    best = 0.0
    for a in range(n):
        m = np.zeros(n)
        for b in range(a + 1, n + 1):
            c = np.arange(a, b)
            vals = (s[b] - s[c]) / (b - c)
            reach = np.maximum.accumulate(vals)
            m[a:b] = np.maximum(m[a:b], reach)
            best = max(best, float(m[a:b].sum() / (s[b] - s[a])))
    return best


def _ainfty_generic(v: np.ndarray, domain: Domain, scope: str) -> float:
    """Direct route: for each cube Q compute M(w chi_Q) over the scope's cubes."""
    s = prefix(v)
    best = 0.0
    for lo_arr, ell in lattice_groups(domain, scope):
        for qlo in lo_arr.tolist():
            qhi = qlo + ell

            def value(lo, e, qlo=qlo, qhi=qhi):
                a = np.clip(lo, qlo, qhi)
                b = np.clip(lo + e, qlo, qhi)
                return (s[b] - s[a]) / e

            m = sup_over_cubes(domain, scope, value)
            best = max(best, float(m[qlo:qhi].sum() / (s[qhi] - s[qlo])))
    return best


EXACT_AINFTY_LIMIT = 512


def ainfty_constant(w, scope: str = "dyadic0", route: str = "auto") -> float:
    """sup_Q (1/w(Q)) int_Q M(w chi_Q), with M over the same scope."""
    v = _values(w)
    dom = _domain(w)
    scope = kind_name(scope)
    if route == "generic":
        return _ainfty_generic(v, dom, scope)
    if scope.startswith("dyadic"):
        return _ainfty_dyadic(v, dom, int(scope[-1]))
    if scope == "exact":
        if dom.n_cells > EXACT_AINFTY_LIMIT:
            raise ValueError(f"exact-scope A_infinity limited to N <= {EXACT_AINFTY_LIMIT}")
        return _ainfty_exact(v)
    return _ainfty_generic(v, dom, scope)


# ---------------------------------------------------------------------------
# reverse Holder


@dataclass(frozen=True)
class ReverseHolder:
    tau: float
    r_w: float
    holds: bool
    tau_min: float


def _rh_worst(logv: np.ndarray, v: np.ndarray, domain: Domain, scope: str, r: float) -> float:
    """max over cubes of <w^r>^(1/r) / <w>, power means taken in log space."""
    aw = _averager(v)
    best = 0.0
    for lo, ell in lattice_groups(domain, kind_name(scope)):
        step = max(1, 1_000_000 // ell)
        for i in range(0, lo.size, step):
            part = lo[i : i + step]
            rows = cube_rows(logv, part, ell)
            pm = np.exp((logsumexp(r * rows, axis=1) - math.log(ell)) / r)
            best = max(best, float(np.max(pm / aw(part, ell))))
    return best


def reverse_holder_report(w, scope: str = "dyadic0", tau: float = TAU_DEFAULT, ainfty: float | None = None) -> ReverseHolder:
    """Check <w^r>^(1/r) <= 2 <w> for r = 1 + 1/(tau [w]_Ainf) and bisect for the least tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    v = _values(w)
    dom = _domain(w)
    logv = np.log(v)
    a = ainfty if ainfty is not None else ainfty_constant(w, scope)

    def holds(t):
        return _rh_worst(logv, v, dom, scope, 1 + 1 / (t * a)) <= 2.0

    lo, hi = 1e-6, 1e6
    if holds(lo):
        tau_min = 0.0
    elif not holds(hi):
        tau_min = math.inf
    else:
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            if holds(mid):
                hi = mid
            else:
                lo = mid
            if hi / lo < 1 + 1e-6:
                break
        tau_min = hi
    return ReverseHolder(tau, 1 + 1 / (tau * a), holds(tau), tau_min)


# ---------------------------------------------------------------------------
# C_p functional


@dataclass(frozen=True)
class CpValue:
    p: float
    delta: float
    value: float
    plan: tuple
    n_pairs: int


CP_PLAN = ("dyadic", "tails", "levels")


def cp_functional(w, p: float, delta: float, samples=CP_PLAN, scope: str = "dyadic0") -> CpValue:
    """Sampled sup of w(E) / ((|E|/|Q|)^delta int M(chi_Q)^p w).

    ``levels`` takes E = the k largest cells of w in Q for every k, which is
    the exact supremum over unions of cells for delta <= 1; ``dyadic`` and
    ``tails`` add lattice subcubes and left/right runs of Q.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    unknown = set(samples) - set(CP_PLAN)
    if unknown:
        raise ValueError(f"unknown sampling entries {sorted(unknown)}")
    v = _values(w)
    dom = _domain(w)
    h = dom.cell_measure
    best = 0.0
    pairs = 0
    for lo_arr, ell in lattice_groups(dom, kind_name(scope)):
        k = np.arange(1, ell + 1)
        frac = (k / ell) ** delta
        for lo in lo_arr.tolist():
            hi = lo + ell
            mq = maximal_of_indicator(dom, (lo, hi)).values
            denom = float(np.sum(mq**p * v) * h)
            cand = []
            seg = v[lo:hi]
            if "levels" in samples:
                top = np.cumsum(np.sort(seg)[::-1]) * h
                cand.append(np.max(top / frac))
                pairs += ell
            if "tails" in samples:
                lt = np.cumsum(seg) * h
                rt = np.cumsum(seg[::-1]) * h
                cand.append(np.max(lt / frac))
                cand.append(np.max(rt / frac))
                pairs += 2 * ell
            if "dyadic" in samples:
                size = ell
                while size >= 1:
                    parts = seg[: (ell // size) * size].reshape(-1, size).sum(axis=1) * h
                    cand.append(np.max(parts) / (size / ell) ** delta)
                    pairs += parts.size
                    if size == 1:
                        break
                    size //= 2
            best = max(best, max(float(c) for c in cand) / denom)
    return CpValue(p, delta, best, tuple(samples), pairs)


# ---------------------------------------------------------------------------
# generators


def _power_cells(domain: Domain, a: float, x0: float) -> np.ndarray:
    """Exact cell averages of |x - x0|^a."""
    if a <= -1:
        raise ValueError("power exponent a must be > -1 (not locally integrable)")
    edges = np.arange(domain.n_cells + 1) * domain.cell_measure
    u = edges - x0
    F = np.sign(u) * np.abs(u) ** (a + 1) / (a + 1)
    return np.diff(F) / domain.cell_measure


def power_weight(domain: Domain, a: float, x0: float = 0.5) -> "Weight":
    return Weight(GridFunction(_power_cells(domain, a, x0), domain), tag=f"power({a},{x0})")


def truncated_power_weight(domain: Domain, a: float, x0: float = 0.5, floor: float = FLOOR) -> "Weight":
    """|x - x0|^a on [x0, 1), floor elsewhere."""
    v = _power_cells(domain, a, x0)
    edges_lo = np.arange(domain.n_cells) * domain.cell_measure
    v = np.where(edges_lo >= x0 - 1e-15, v, floor)
    return Weight(GridFunction(np.maximum(v, floor), domain), tag=f"truncated_power({a},{x0})")


def bounded_random_weight(domain: Domain, low: float, high: float, seed: int) -> "Weight":
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    rng = np.random.default_rng(seed)
    return Weight(GridFunction(rng.uniform(low, high, domain.n_cells), domain), tag=f"bounded_random({low},{high},{seed})")


def a1_like_weight(domain: Domain, delta: float = 0.5, spikes: int = 3, seed: int = 0) -> "Weight":
    """(M mu)^delta for a few unit spikes mu; an A_1 weight for delta < 1."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    mu = np.zeros(domain.n_cells)
    mu[rng.choice(domain.n_cells, size=spikes, replace=False)] = 1.0
    m = maximal(GridFunction(mu, domain), "exact").values
    return Weight(GridFunction(m**delta, domain), tag=f"a1_like({delta},{spikes},{seed})")


def weight_generators(spec: dict, domain: Domain) -> "Weight":
    """Build a weight from a spec dict with key ``kind``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    makers = {
        "power": power_weight,
        "truncated_power": truncated_power_weight,
        "bounded_random": bounded_random_weight,
        "a1_like": a1_like_weight,
    }
    if kind not in makers:
        raise ValueError(f"unknown weight kind {kind!r}; choose from {sorted(makers)}")
    return makers[kind](domain, **spec)


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Weight:
    """A positive grid function with lazily cached constants."""

    function: GridFunction
    scope: str = "exact"
    tag: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        _values(self.function)
        self.scope = kind_name(self.scope)

    @property
    def values(self) -> np.ndarray:
        return self.function.values

    @property
    def domain(self) -> Domain:
        return self.function.domain

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def ap(self, p: float) -> float:
        return self._cached(("ap", p, self.scope), lambda: ap_constant(self, p, self.scope))

    def ainfty(self) -> float:
        """Largest single-lattice constant over the three lattices (fast route)."""
        return self._cached(
            ("ainfty",), lambda: max(ainfty_constant(self, f"dyadic{s}") for s in (0, 1, 2))
        )

    def a1(self) -> float:
        return self._cached(("a1", self.scope), lambda: a1_constant(self, self.scope))

    def dual(self, p: float) -> "Weight":
        return Weight(dual_weight(self, p), self.scope, f"dual({self.tag},{p})")
