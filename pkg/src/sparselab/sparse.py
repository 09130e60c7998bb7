"""Sparse families, sparse operators, and the extraction algorithms.

Witness sets are built bottom-up with per-cell shares: a cube may own a
fraction of a cell (a sub-interval of it), counted in exact integer units of
1/eta.denominator of a cell.  For one lattice the family is laminar, so the
bottom-up greedy fill is optimal and succeeds exactly when eta times the
packing constant is at most 1; every call checks the two routes agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .czo import CZOperator
from .dyadic import CubeSet, Domain, DyadicCube
from .maximal import bilinear_maximal, grand_maximal, prefix, vector_maximal
from .signal import (
    GridFunction,
    VectorFunction,
    YoungFunction,
    as_vector,
    fit_pointwise,
    lq_norm,
    oscillation_window,
    orlicz_norms_rows,
)

# relative slack for floating-point sums in the a-posteriori inequalities
RTOL = 1e-9


def as_fraction(eta) -> Fraction:
    if isinstance(eta, Fraction):
        return eta
    if isinstance(eta, int):
        return Fraction(eta)
    return Fraction(eta).limit_denominator(10**6)


# ---------------------------------------------------------------------------
# families and witnesses


@dataclass(frozen=True, eq=False)
class SparseFamily:
    """Cubes of one lattice with disjoint fractional witness sets.

    ``witnesses[cube]`` is an integer array over the cube's cells: the number
    of units (1/unit of a cell) the cube owns in each cell.
    """

    domain: Domain
    cubes: CubeSet
    eta: Fraction
    witnesses: dict = field(repr=False)

    @property
    def unit(self) -> int:
        return self.eta.denominator

    def witness_measure(self, cube: DyadicCube) -> Fraction:
        """|E_Q| in cells."""
        return Fraction(int(self.witnesses[cube].sum()), self.unit)

    def witness_cells(self, cube: DyadicCube) -> np.ndarray:
        lo, _ = self.domain.cube_range(cube)
        return lo + np.flatnonzero(self.witnesses[cube])

    def check(self) -> bool:
        """Disjointness, containment and the measure bound, recomputed."""
        used = np.zeros(self.domain.n_cells, dtype=np.int64)
        for q in self.cubes:
            lo, hi = self.domain.cube_range(q)
            w = self.witnesses[q]
            if w.size != hi - lo or np.any(w < 0):
                return False
            used[lo:hi] += w
            if int(w.sum()) < self.eta.numerator * (hi - lo):
                return False
        return bool(np.all(used <= self.unit))

    def to_dict(self) -> dict:
        wit = []
        for q in self.cubes:
            lo, _ = self.domain.cube_range(q)
            w = self.witnesses[q]
            runs = []
            start = 0
            for i in range(1, w.size + 1):
                if i == w.size or w[i] != w[start]:
                    if w[start]:
                        runs.append([lo + start, lo + i, int(w[start])])
                    start = i
            wit.append({"cube": list(q.as_tuple()), "ranges": runs})
        return {
            "depth": self.domain.depth,
            "length": self.domain.length,
            "eta": str(self.eta),
            "unit": self.unit,
            "cubes": [list(q.as_tuple()) for q in self.cubes],
            "witnesses": wit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SparseFamily":
        dom = Domain(int(d["depth"]), float(d["length"]))
        eta = Fraction(d["eta"])
        cubes = CubeSet(DyadicCube(*c) for c in d["cubes"])
        wit = {}
        for entry in d["witnesses"]:
            q = DyadicCube(*entry["cube"])
            lo, hi = dom.cube_range(q)
            w = np.zeros(hi - lo, dtype=np.int64)
            for a, b, u in entry["ranges"]:
                w[a - lo : b - lo] = u
            wit[q] = w
        for q in cubes:
            wit.setdefault(q, np.zeros(dom.cube_range(q)[1] - dom.cube_range(q)[0], dtype=np.int64))
        return cls(dom, cubes, eta, wit)

    @classmethod
    def from_json(cls, text: str) -> "SparseFamily":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class SparseCheck:
    ok: bool
    carleson: Fraction
    family: SparseFamily | None = None
    violator: DyadicCube | None = None


def _single_shift(cubes: CubeSet) -> None:
    if len(cubes.shifts) > 1:
        raise ValueError("cubes from more than one lattice (mixed shifts)")


def _ranges(domain: Domain, cubes: Iterable[DyadicCube]) -> tuple[np.ndarray, np.ndarray]:
    rs = [domain.cube_range(q) for q in cubes]
    if not rs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    a = np.array(rs, dtype=np.int64)
    return a[:, 0], a[:, 1]


def carleson_constant(domain: Domain, cubes) -> Fraction:
    """max over Q in S of (sum of |P| over P in S inside Q) / |Q|; 0 if empty."""
    cubes = CubeSet(cubes)
    _single_shift(cubes)
    if not len(cubes):
        return Fraction(0)
    lo, hi = _ranges(domain, cubes)
    size = hi - lo
    inside = (lo[None, :] >= lo[:, None]) & (hi[None, :] <= hi[:, None])
    packed = inside.astype(np.int64) @ size
    # compare packed/size by cross-multiplication to stay exact
    best = 0
    for i in range(1, len(cubes)):
        if packed[i] * size[best] > packed[best] * size[i]:
            best = i
    return Fraction(int(packed[best]), int(size[best]))


def verify_sparse(domain: Domain, cubes, eta) -> SparseCheck:
    """Build witnesses bottom-up; succeed iff every |E_Q| reaches eta|Q|."""
    cubes = CubeSet(cubes)
    _single_shift(cubes)
    eta = as_fraction(eta)
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    lam = carleson_constant(domain, cubes)
    unit, need = eta.denominator, eta.numerator
    free = np.full(domain.n_cells, unit, dtype=np.int64)
    ranges = {q: domain.cube_range(q) for q in cubes}
    order = sorted(cubes, key=lambda q: (ranges[q][1] - ranges[q][0], -q.level, q.index))
    witnesses = {}
    violator = None
    for q in order:
        lo, hi = ranges[q]
        want = need * (hi - lo)
        avail = free[lo:hi]
        before = np.cumsum(avail) - avail
        take = np.minimum(avail, np.maximum(want - before, 0))
        if int(take.sum()) < want:
            violator = q
            break
        free[lo:hi] -= take
        witnesses[q] = take
    ok = violator is None
    if ok != (eta * lam <= 1):
        raise AssertionError(
            f"greedy witnesses ({ok}) disagree with the packing bound (eta={eta}, carleson={lam})"
        )
    if not ok:
        return SparseCheck(False, lam, None, violator)
    fam = SparseFamily(domain, cubes, eta, witnesses)
    return SparseCheck(True, lam, fam, None)


# ---------------------------------------------------------------------------
# sparse operators


def spread(n: int, lo: np.ndarray, hi: np.ndarray, vals) -> np.ndarray:
    """sum_i vals_i chi_[lo_i, hi_i) as a cell array."""
    acc = np.zeros(n)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), lo.shape)
    # direct accumulation keeps uncovered cells exactly zero
    for a, b, v in zip(lo.tolist(), hi.tolist(), vals.tolist()):
        acc[a:b] += v
    return acc


def _cubes_of(S) -> CubeSet:
    return S.cubes if isinstance(S, SparseFamily) else CubeSet(S)


def _averages(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    s = prefix(values)
    return (s[hi] - s[lo]) / (hi - lo)


def triple_averages(domain: Domain, values: np.ndarray, cubes) -> np.ndarray:
    """int over 3Q (clamped) of values divided by 3|Q|, per cube."""
    s = prefix(values)
    out = []
    for q in cubes:
        lo, hi = domain.cube_range(q)
        a, b = domain.triple(q)
        out.append((s[b] - s[a]) / (3 * (hi - lo)))
    return np.array(out)


def sparse_operator(S, f: GridFunction, r: float = 1.0) -> GridFunction:
    """(sum_Q <|f|>_Q^r chi_Q)^(1/r)."""
    if not r > 0:
        raise ValueError("r must be positive")
    dom = f.domain
    lo, hi = _ranges(dom, _cubes_of(S))
    avg = _averages(np.abs(f.values), lo, hi)
    tot = np.maximum(spread(dom.n_cells, lo, hi, avg**r), 0.0)
    return GridFunction(tot ** (1.0 / r), dom)


def orlicz_sparse(S, f: GridFunction, phi: YoungFunction) -> GridFunction:
    """sum_Q ||f||_{phi,Q} chi_Q."""
    dom = f.domain
    lo, hi = _ranges(dom, _cubes_of(S))
    a = np.abs(f.values)
    norms = np.array([orlicz_norms_rows(a[l:h][None, :], phi)[0] for l, h in zip(lo, hi)])
    return GridFunction(spread(dom.n_cells, lo, hi, norms), dom)


@dataclass(frozen=True)
class CommutatorSparse:
    direct: GridFunction
    adjoint: GridFunction


def commutator_sparse(S, b: GridFunction, f: GridFunction) -> CommutatorSparse:
    """sum |b(x) - b_Q| <|f|>_Q chi_Q and sum <|b - b_Q| |f|>_Q chi_Q."""
    dom = f.domain
    direct = np.zeros(dom.n_cells)
    adjoint = np.zeros(dom.n_cells)
    fa = np.abs(f.values)
    for q in _cubes_of(S):
        lo, hi = dom.cube_range(q)
        dev = np.abs(b.values[lo:hi] - b.values[lo:hi].mean())
        direct[lo:hi] += dev * fa[lo:hi].mean()
        adjoint[lo:hi] += (dev * fa[lo:hi]).mean()
    return CommutatorSparse(GridFunction(direct, dom), GridFunction(adjoint, dom))


def bilinear_sparse_form(S, f: GridFunction, g: GridFunction, r: float, s: float) -> float:
    """sum_Q <|f|^r>_Q^(1/r) <|g|^s>_Q^(1/s) |Q|."""
    if r < 1 or s < 1:
        raise ValueError("r and s must be >= 1")
    dom = f.domain
    lo, hi = _ranges(dom, _cubes_of(S))
    af = _averages(np.abs(f.values) ** r, lo, hi) ** (1 / r)
    ag = _averages(np.abs(g.values) ** s, lo, hi) ** (1 / s)
    return float(np.sum(af * ag * (hi - lo)) * dom.cell_measure)


def overlap_function(S, domain: Domain) -> GridFunction:
    """Number of cubes of S covering each cell."""
    lo, hi = _ranges(domain, _cubes_of(S))
    return GridFunction(spread(domain.n_cells, lo, hi, 1.0), domain)


# ---------------------------------------------------------------------------
# stopping-time helpers


def stopping_children(domain: Domain, cube: DyadicCube, mask: np.ndarray, ratio: Fraction) -> list:
    """Maximal P strictly inside ``cube`` (same lattice) with |P cap mask| > ratio |P|.

    Larger cubes win by construction (top-down search), then lower index.
    """
    if cube.level >= domain.depth:
        return []
    s = prefix(mask.astype(np.int64)).astype(np.int64)
    out = []
    stack = list(domain.children(cube))[::-1]
    while stack:
        p = stack.pop()
        lo, hi = domain.cube_range(p)
        c = int(s[hi] - s[lo])
        if c * ratio.denominator > ratio.numerator * (hi - lo):
            out.append(p)
        elif c and p.level < domain.depth:
            stack.extend(list(domain.children(p))[::-1])
    return sorted(out)


def _roots(domain: Domain, shift: int) -> list:
    return list(domain.top_cubes(shift))


def average_stopping_family(f: GridFunction, base: float = 4.0, shift: int = 0) -> CubeSet:
    """Root pieces with nonzero average, then recursively the maximal P inside a
    selected Q with <|f|>_P > base <|f|>_Q.  The children of Q cover less than
    |Q|/base, so the family is (1 - 1/base)-sparse.
    """
    if not base > 1:
        raise ValueError("base must exceed 1")
    dom = f.domain
    s = prefix(np.abs(f.values))

    def avg(q):
        lo, hi = dom.cube_range(q)
        return (s[hi] - s[lo]) / (hi - lo)

    out = []
    stack = [q for q in _roots(dom, shift) if avg(q) > 0]
    while stack:
        q = stack.pop()
        out.append(q)
        thr = base * avg(q)
        search = list(dom.children(q)) if q.level < dom.depth else []
        while search:
            p = search.pop()
            if avg(p) > thr:
                stack.append(p)
            elif avg(p) > 0 and p.level < dom.depth:
                search.extend(dom.children(p))
    return CubeSet(out)


def _dominated(lhs: np.ndarray, rhs: np.ndarray) -> bool:
    scale = max(float(np.max(np.abs(lhs), initial=0.0)), float(np.max(rhs, initial=0.0)), 1e-300)
    return bool(np.all(lhs <= rhs + RTOL * scale))


# ---------------------------------------------------------------------------
# Lerner-Nazarov route


LN_ETA = Fraction(1, 6)
LN_RATIO = Fraction(1, 4)


@dataclass(frozen=True, eq=False)
class LNResult:
    shift: int
    lam: float
    check: SparseCheck
    cubes: CubeSet
    oscillation: dict = field(repr=False)
    base: GridFunction = field(repr=False)
    bound: GridFunction = field(repr=False)
    holds: bool = False

    @property
    def ok(self) -> bool:
        return self.holds and self.check.ok

    @property
    def family(self) -> SparseFamily | None:
        return self.check.family


def extract_ln(f: GridFunction, lam: float = 1 / 8, shift: int = 0) -> LNResult:
    """Stopping-time family with |f - m0| <= sum_Q omega_lam(f; Q) chi_Q.

    At each selected Q the optimal window I_Q leaves a bad set of at most
    lam|Q|; the next generation is the maximal cubes more than a quarter bad.
    m0 is the window midpoint on each root piece of the lattice.
    """
    if not 0 < lam <= 1 / 8:
        raise ValueError("lambda must lie in (0, 1/8]")
    dom = f.domain
    v = f.values
    base = np.zeros(dom.n_cells)
    selected = []
    osc = {}
    stack = []
    for root in _roots(dom, shift):
        a, b = oscillation_window(f, root, lam)
        lo, hi = dom.cube_range(root)
        base[lo:hi] = (a + b) / 2
        stack.append((root, a, b))
    while stack:
        q, a, b = stack.pop()
        lo, hi = dom.cube_range(q)
        bad = np.zeros(dom.n_cells, dtype=bool)
        bad[lo:hi] = (v[lo:hi] < a) | (v[lo:hi] > b)
        kids = stopping_children(dom, q, bad, LN_RATIO) if bad.any() else []
        if b > a or kids:
            selected.append(q)
            osc[q] = b - a
        for p in kids:
            pa, pb = oscillation_window(f, p, lam)
            stack.append((p, pa, pb))
            # edge-clipped cubes can be much smaller than their parent, so the
            # windows of p and q may not meet; bridge with ancestors until they do
            cur, ca, cb = p, pa, pb
            while max(ca, a) > min(cb, b) and cur.level > q.level + 1:
                cur = dom.parent(cur)
                ca, cb = oscillation_window(f, cur, lam)
                if cur not in osc:
                    selected.append(cur)
                    osc[cur] = cb - ca
    cubes = CubeSet(selected)
    lo, hi = _ranges(dom, cubes)
    bound = spread(dom.n_cells, lo, hi, [osc[q] for q in cubes])
    holds = _dominated(np.abs(v - base), bound)
    check = verify_sparse(dom, cubes, LN_ETA)
    return LNResult(shift, lam, check, cubes, osc, GridFunction(base, dom), GridFunction(bound, dom), holds)


# ---------------------------------------------------------------------------
# vector maximal function


@dataclass(frozen=True, eq=False)
class MqResult:
    q: float
    families: tuple  # one SparseCheck per shift
    ln: tuple = field(repr=False)
    lhs: GridFunction = field(repr=False)
    rhs: GridFunction = field(repr=False)
    constant: float = 0.0
    oscillation_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return (
            all(c.ok for c in self.families)
            and all(r.holds for r in self.ln)
            and np.isfinite(self.constant)
            and np.isfinite(self.oscillation_ratio)
        )


def _root_terms(dom: Domain, shift: int, values: np.ndarray) -> list:
    """Root pieces where the averaged quantity is nonzero (they carry m0)."""
    out = []
    for r in _roots(dom, shift):
        lo, hi = dom.cube_range(r)
        if np.any(values[lo:hi] != 0):
            out.append(r)
    return out


def extract_mq(F, q: float, lam: float = 1 / 8) -> MqResult:
    """Sparse domination of the vector maximal function, one family per lattice.

    The LN route runs on (M_q^{D_s} F)^q; the root pieces are added to carry
    the base constant.  Checked: M_q F <= C sum_s A^q_{S_s}(|F|_q) at every cell.
    """
    if not q > 1:
        raise ValueError("q must be > 1 (q <= 1 rejected)")
    F = as_vector(F)
    dom = F.domain
    fq = lq_norm(F.array, q, axis=0)
    fq_fn = GridFunction(fq, dom)
    checks, lns = [], []
    rhs = np.zeros(dom.n_cells)
    osc_ratio = 0.0
    for s in (0, 1, 2):
        g = vector_maximal(F, q, kind=f"dyadic{s}") ** q
        ln = extract_ln(g, lam, s)
        cubes = CubeSet(list(ln.cubes) + _root_terms(dom, s, fq))
        if len(ln.cubes):
            avg3 = triple_averages(dom, fq, ln.cubes) ** q
            om = np.array([ln.oscillation[c] for c in ln.cubes])
            with np.errstate(divide="ignore", invalid="ignore"):
                rr = np.where(avg3 > 0, lam**q * om / np.where(avg3 > 0, avg3, 1), np.where(om > 0, np.inf, 0))
            osc_ratio = max(osc_ratio, float(rr.max()))
        checks.append(verify_sparse(dom, cubes, LN_ETA))
        lns.append(ln)
        rhs += sparse_operator(cubes, fq_fn, r=q).values
    lhs = vector_maximal(F, q, kind="exact").values
    return MqResult(
        q,
        tuple(checks),
        tuple(lns),
        GridFunction(lhs, dom),
        GridFunction(rhs, dom),
        fit_pointwise(lhs, rhs),
        osc_ratio,
    )


# ---------------------------------------------------------------------------
# bilinear maximal function


@dataclass(frozen=True, eq=False)
class BilinearResult:
    r: float
    s: float
    q: float
    check: SparseCheck
    ln: LNResult = field(repr=False)
    lhs: GridFunction = field(repr=False)
    rhs: GridFunction = field(repr=False)
    constant: float = 0.0

    @property
    def scale(self) -> float:
        """q q' (the growth the constant is compared against)."""
        return self.q * self.q / (self.q - 1)

    @property
    def ok(self) -> bool:
        return self.check.ok and self.ln.holds and np.isfinite(self.constant)


def extract_bilinear(f, g, s: float, q: float, r: float = 1.0, lam: float = 1 / 8, shift: int = 0) -> BilinearResult:
    """Sparse domination of M_{r,s}(|f|_q, |g|_q') over one lattice via the LN route."""
    if not q > 1:
        raise ValueError("q must be > 1")
    qq = q / (q - 1)
    if not 1 <= s < (qq + 1) / 2:
        raise ValueError(f"need 1 <= s < (q'+1)/2 = {(qq + 1) / 2}")
    if r < 1:
        raise ValueError("r must be >= 1")
    F, G = as_vector(f), as_vector(g)
    dom = F.domain
    fa = GridFunction(lq_norm(F.array, q, axis=0), dom)
    ga = GridFunction(lq_norm(G.array, qq, axis=0), dom)
    target = bilinear_maximal(fa, ga, r, s, kind=f"dyadic{shift}")
    ln = extract_ln(target, lam, shift)
    roots = [
        c for c in _root_terms(dom, shift, fa.values) if c in set(_root_terms(dom, shift, ga.values))
    ]
    cubes = CubeSet(list(ln.cubes) + roots)
    lo, hi = _ranges(dom, cubes)
    af = _averages(fa.values**r, lo, hi) ** (1 / r)
    ag = _averages(ga.values**s, lo, hi) ** (1 / s)
    rhs = spread(dom.n_cells, lo, hi, af * ag)
    lhs = target.values
    return BilinearResult(
        r,
        s,
        q,
        verify_sparse(dom, cubes, LN_ETA),
        ln,
        target,
        GridFunction(rhs, dom),
        fit_pointwise(lhs, rhs),
    )


# ---------------------------------------------------------------------------
# stopping-time route for CZ operators and commutators


CZ_ETA = Fraction(1, 2)
MAPPED_ETA = Fraction(1, 18)
CZ_RATIO = Fraction(1, 4)
BUDGET = Fraction(1, 8)


@dataclass(frozen=True, eq=False)
class CZResult:
    root: DyadicCube
    check: SparseCheck
    alphas: dict = field(repr=False)
    lhs: GridFunction = field(repr=False)
    rhs: GridFunction = field(repr=False)
    constant: float = 0.0
    operator_constant: float = 0.0
    mapped: tuple = ()  # one SparseCheck per shift
    mapped_constant: float = 0.0

    @property
    def cubes(self) -> CubeSet:
        return CubeSet(self.alphas)

    @property
    def max_alpha(self) -> int:
        return max(self.alphas.values(), default=1)

    @property
    def ok(self) -> bool:
        return (
            self.check.ok
            and all(c.ok for c in self.mapped)
            and np.isfinite(self.constant)
            and np.isfinite(self.mapped_constant)
        )


def _neighbour_max(v: np.ndarray) -> np.ndarray:
    out = v.copy()
    out[1:] = np.maximum(out[1:], v[:-1])
    out[:-1] = np.maximum(out[:-1], v[1:])
    return out


def _masked(arr: np.ndarray, lo: int, hi: int) -> np.ndarray:
    out = np.zeros_like(arr)
    out[..., lo:hi] = arr[..., lo:hi]
    return out


def _stopping_family(T: CZOperator, Q0: DyadicCube, q: float, pieces) -> dict:
    """Recursive selection shared by the operator and commutator routes.

    ``pieces(Q)`` returns a list of vector arrays (J x N); each contributes
    its own threshold sets at the common alpha.
    """
    dom = T.domain
    n = dom.n_cells
    ct = T.constant
    alphas = {}
    stack = [Q0]
    while stack:
        Q = stack.pop()
        lo, hi = dom.cube_range(Q)
        a3, b3 = dom.triple(Q)
        size = hi - lo
        tests = []
        for arr in pieces(Q):
            fq = lq_norm(arr, q, axis=0)
            avg3 = float(fq[a3:b3].sum()) / (3 * size)
            if avg3 == 0:
                continue
            near = _neighbour_max(fq)[lo:hi]
            gm = grand_maximal(T, VectorFunction.from_array(dom, arr), q, Q).values[lo:hi]
            tests.append((near, gm, avg3))
        alpha = 1
        while True:
            E = np.zeros(size, dtype=bool)
            for near, gm, avg3 in tests:
                E |= (near > alpha * avg3) | (gm > alpha * ct * avg3)
            if E.sum() * BUDGET.denominator <= BUDGET.numerator * size:
                break
            alpha *= 2
        alphas[Q] = alpha
        if E.any():
            mask = np.zeros(n, dtype=bool)
            mask[lo:hi] = E
            stack.extend(stopping_children(dom, Q, mask, CZ_RATIO)[::-1])
    return alphas


def _map_to_lattices(dom: Domain, cubes) -> list:
    out = {0: set(), 1: set(), 2: set()}
    for c in cubes:
        r = dom.containing_cube(dom.triple(c))
        out[r.shift].add(r)
    return [CubeSet(out[s]) for s in (0, 1, 2)]


def _prepare(T: CZOperator, F, Q0):
    dom = T.domain
    F = as_vector(F)
    if F.domain != dom:
        raise ValueError("operator and function live on different domains")
    Q0 = Q0 if Q0 is not None else DyadicCube(0, 0, 0)
    a, b = dom.triple(Q0)
    arr = F.array
    if np.any(arr[:, :a]) or np.any(arr[:, b:]):
        raise ValueError("supp f must lie in 3Q0")
    return dom, F, Q0, arr


def extract_czo(T: CZOperator, F, Q0: DyadicCube | None = None, q: float = 2.0) -> CZResult:
    """Stopping-time sparse family for T_q(F chi_{3Q0}) on Q0.

    Checked: |T_q(F chi_{3Q0})| <= C C_T sum_Q <|F|_q>_{3Q} chi_Q on Q0, with
    <.>_{3Q} the integral over the clamped 3Q divided by 3|Q|.
    """
    if not q > 1:
        raise ValueError("q must be > 1 (q <= 1 rejected)")
    dom, F, Q0, arr = _prepare(T, F, Q0)
    alphas = _stopping_family(T, Q0, q, lambda Q: [arr])
    cubes = CubeSet(alphas)
    fq = lq_norm(arr, q, axis=0)
    lo0, hi0 = dom.cube_range(Q0)
    lhs = np.zeros(dom.n_cells)
    lhs[lo0:hi0] = lq_norm(arr @ T.matrix.T, q, axis=0)[lo0:hi0]
    ct = T.constant
    lo, hi = _ranges(dom, cubes)
    rhs = ct * spread(dom.n_cells, lo, hi, triple_averages(dom, fq, cubes))
    mapped_sets = _map_to_lattices(dom, cubes)
    fq_fn = GridFunction(fq, dom)
    mapped_rhs = ct * sum(sparse_operator(m, fq_fn).values for m in mapped_sets)
    return CZResult(
        Q0,
        verify_sparse(dom, cubes, CZ_ETA),
        alphas,
        GridFunction(lhs, dom),
        GridFunction(rhs, dom),
        fit_pointwise(lhs, rhs),
        ct,
        tuple(verify_sparse(dom, m, MAPPED_ETA) for m in mapped_sets),
        fit_pointwise(lhs, mapped_rhs),
    )


def _b_reference(dom: Domain, b: np.ndarray, Q: DyadicCube) -> float:
    """Average of b over R_Q, the smallest lattice cube containing 3Q."""
    lo, hi = dom.cube_range(dom.containing_cube(dom.triple(Q)))
    return float(b[lo:hi].mean())


def extract_commutator(T: CZOperator, b: GridFunction, F, Q0: DyadicCube | None = None, q: float = 2.0) -> CZResult:
    """Stopping-time sparse family for [b, T]_q(F chi_{3Q0}) on Q0.

    Checked: |[b,T]_q(F chi_{3Q0})| <= C C_T sum_Q (|b - b_{R_Q}| <|F|_q>_{3Q}
    + <|b - b_{R_Q}| |F|_q>_{3Q}) chi_Q on Q0.
    """
    if not q > 1:
        raise ValueError("q must be > 1 (q <= 1 rejected)")
    dom, F, Q0, arr = _prepare(T, F, Q0)
    bv = b.values

    def pieces(Q):
        return [arr, (bv - _b_reference(dom, bv, Q)) * arr]

    alphas = _stopping_family(T, Q0, q, pieces)
    cubes = CubeSet(alphas)
    fq = lq_norm(arr, q, axis=0)
    m = T.matrix
    comm = bv * (arr @ m.T) - (bv * arr) @ m.T
    lo0, hi0 = dom.cube_range(Q0)
    lhs = np.zeros(dom.n_cells)
    lhs[lo0:hi0] = lq_norm(comm, q, axis=0)[lo0:hi0]
    s = prefix(fq)
    rhs = np.zeros(dom.n_cells)
    mapped_sets = [set(), set(), set()]
    mapped_rhs = np.zeros(dom.n_cells)
    for Q in cubes:
        lo, hi = dom.cube_range(Q)
        a3, b3 = dom.triple(Q)
        R = dom.containing_cube((a3, b3))
        rlo, rhi = dom.cube_range(R)
        bR = float(bv[rlo:rhi].mean())
        dev = np.abs(bv - bR)
        avg = (s[b3] - s[a3]) / (3 * (hi - lo))
        avg_b = float((dev * fq)[a3:b3].sum()) / (3 * (hi - lo))
        rhs[lo:hi] += dev[lo:hi] * avg + avg_b
        mapped_sets[R.shift].add(R)
    for R in set().union(*mapped_sets):
        rlo, rhi = dom.cube_range(R)
        dev = np.abs(bv[rlo:rhi] - bv[rlo:rhi].mean())
        mapped_rhs[rlo:rhi] += dev * fq[rlo:rhi].mean() + (dev * fq[rlo:rhi]).mean()
    ct = T.constant
    rhs *= ct
    mapped_rhs *= ct
    return CZResult(
        Q0,
        verify_sparse(dom, cubes, CZ_ETA),
        alphas,
        GridFunction(lhs, dom),
        GridFunction(rhs, dom),
        fit_pointwise(lhs, rhs),
        ct,
        tuple(verify_sparse(dom, CubeSet(ms), MAPPED_ETA) for ms in mapped_sets),
        fit_pointwise(lhs, mapped_rhs),
    )
