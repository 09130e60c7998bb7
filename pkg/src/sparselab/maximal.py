"""Maximal operators on grid functions.

Every operator here is a supremum over a cube family given by a *kind*:
``"dyadic"`` / ``"dyadic1"`` / ``"dyadic2"`` for one lattice, ``"shifted3"``
for the three lattices together, and ``"exact"`` for all grid intervals.
Cube functionals are evaluated group by group (cubes of equal length) and
spread to cells with a trailing sliding maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d

from .dyadic import CubeLike, Domain, DyadicCube, complement_gaps, lattice_groups, whitney_decomposition
from .signal import (
    GridFunction,
    VectorFunction,
    YoungFunction,
    as_vector,
    cube_rows,
    lq_norm,
    orlicz_norms_rows,
)

KINDS = ("dyadic", "dyadic0", "dyadic1", "dyadic2", "shifted3", "exact")


@dataclass(frozen=True)
class MaximalKind:
    tag: str
    shift: int = 0

    def __str__(self) -> str:
        return f"dyadic{self.shift}" if self.tag == "dyadic" else self.tag

    @classmethod
    def dyadic(cls, shift: int = 0) -> "MaximalKind":
        return cls("dyadic", shift)


def kind_name(kind) -> str:
    name = str(kind)
    if name == "dyadic":
        name = "dyadic0"
    if name not in KINDS:
        raise ValueError(f"unknown maximal kind {kind!r}; expected one of {KINDS}")
    return name


def prefix(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    pad = np.zeros(v.shape[:-1] + (1,))
    return np.concatenate([pad, np.cumsum(v, axis=-1)], axis=-1)


def sup_over_cubes(domain: Domain, kind, cube_value: Callable[[np.ndarray, int], np.ndarray]) -> np.ndarray:
    """x -> max over cubes Q of the kind containing x of cube_value(Q).

    ``cube_value(lo, ell)`` returns values for the cubes [lo, lo+ell); extra
    leading axes are carried through.
    """
    n = domain.n_cells
    out = None
    for lo, ell in lattice_groups(domain, kind_name(kind)):
        vals = np.asarray(cube_value(lo, ell), dtype=float)
        g = np.full(vals.shape[:-1] + (n,), -np.inf)
        g[..., lo] = vals
        spread = maximum_filter1d(g, ell, axis=-1, mode="constant", cval=-np.inf, origin=(ell - 1) // 2)
        out = spread if out is None else np.maximum(out, spread)
    return out


def _averager(values: np.ndarray):
    s = prefix(values)

    def avg(lo, ell):
        return (s[..., lo + ell] - s[..., lo]) / ell

    return avg


def maximal(f: GridFunction, kind="exact") -> GridFunction:
    """Hardy-Littlewood maximal function over the cubes of ``kind``."""
    vals = sup_over_cubes(f.domain, kind, _averager(np.abs(f.values)))
    return GridFunction(vals, f.domain)


def maximal_delta(f: GridFunction, delta: float, kind="exact") -> GridFunction:
    """M(|f|^delta)^(1/delta)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = GridFunction(np.abs(f.values) ** delta, f.domain)
    return GridFunction(maximal(g, kind).values ** (1.0 / delta), f.domain)


def _median_deviation(rows: np.ndarray) -> np.ndarray:
    med = np.median(rows, axis=1, keepdims=True)
    return np.abs(rows - med).mean(axis=1)


def sharp_maximal(f: GridFunction, delta: float | None = None, kind="shifted3") -> GridFunction:
    """sup over cubes of inf_c <|g - c|>_Q with g = |f|^delta (f itself if delta is None).

    The infimum over constants is attained at a median, which is a cell value.
    """
    if delta is None:
        g = f.values
    else:
        if not 0 < delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        g = np.abs(f.values) ** delta

    def dev(lo, ell):
        out = np.empty(lo.size)
        step = max(1, 2_000_000 // ell)
        for i in range(0, lo.size, step):
            out[i : i + step] = _median_deviation(cube_rows(g, lo[i : i + step], ell))
        return out

    vals = sup_over_cubes(f.domain, kind, dev)
    if delta is not None:
        vals = vals ** (1.0 / delta)
    return GridFunction(vals, f.domain)


def orlicz_maximal(f: GridFunction, phi: YoungFunction, kind="shifted3") -> GridFunction:
    """sup over cubes containing x of the Luxemburg norm of f on the cube."""
    a = np.abs(f.values)

    def norms(lo, ell):
        out = np.empty(lo.size)
        step = max(1, 1_000_000 // ell)
        for i in range(0, lo.size, step):
            out[i : i + step] = orlicz_norms_rows(cube_rows(a, lo[i : i + step], ell), phi)
        return out

    return GridFunction(sup_over_cubes(f.domain, kind, norms), f.domain)


def iterated_maximal(f: GridFunction, k: int, kind="exact") -> GridFunction:
    if k < 1:
        raise ValueError("k must be >= 1")
    for _ in range(k):
        f = maximal(f, kind)
    return f


def vector_maximal(F, q: float, kind="exact") -> GridFunction:
    """(sum_j (M f_j)^q)^(1/q)."""
    if not q > 1:
        raise ValueError("q must be > 1 (q <= 1 rejected)")
    F = as_vector(F)
    per = sup_over_cubes(F.domain, kind, _averager(np.abs(F.array)))
    return GridFunction(lq_norm(per, q, axis=0), F.domain)


def bilinear_maximal(f: GridFunction, g: GridFunction, r: float, s: float, kind="exact") -> GridFunction:
    """sup over cubes of <|f|^r>^(1/r) <|g|^s>^(1/s)."""
    if r < 1 or s < 1:
        raise ValueError("r and s must be >= 1")
    af = _averager(np.abs(f.values) ** r)
    ag = _averager(np.abs(g.values) ** s)

    def prod(lo, ell):
        return np.maximum(af(lo, ell), 0) ** (1 / r) * np.maximum(ag(lo, ell), 0) ** (1 / s)

    return GridFunction(sup_over_cubes(f.domain, kind, prod), f.domain)


def multilinear_maximal(fs: Sequence[GridFunction], kind="exact") -> GridFunction:
    """sup over cubes of the product of the averages of |f_i|."""
    if len(fs) < 1:
        raise ValueError("need at least one function")
    avgs = [_averager(np.abs(f.values)) for f in fs]

    def prod(lo, ell):
        out = np.ones(lo.size)
        for a in avgs:
            out = out * a(lo, ell)
        return out

    return GridFunction(sup_over_cubes(fs[0].domain, kind, prod), fs[0].domain)


def maximal_of_indicator(domain: Domain, cube: CubeLike) -> GridFunction:
    """Exact-kind maximal function of chi_Q in closed form."""
    lo, hi = domain.cube_range(cube)
    x = np.arange(domain.n_cells)
    side = hi - lo
    v = np.ones(domain.n_cells)
    left = x < lo
    right = x >= hi
    v[left] = side / (hi - x[left])
    v[right] = side / (x[right] + 1 - lo)
    return GridFunction(v, domain)


@dataclass(frozen=True)
class SawyerValue:
    whitney: float
    integral: float
    n_cubes: int


def sawyer_functional(f: GridFunction, k: int, p: float, q: float, w=None) -> SawyerValue:
    """Integral of (M_{k,p,q} f)^p against w, in Whitney and integral forms."""
    if not 1 < p < q:
        raise ValueError("need 1 < p < q")
    if np.any(f.values < 0):
        raise ValueError("f must be nonnegative")
    dom = f.domain
    wv = np.ones(dom.n_cells) if w is None else np.asarray(w, dtype=float)
    h = dom.cell_measure
    omega = f.values > 2.0**k
    if not omega.any():
        return SawyerValue(0.0, 0.0, 0)
    cover = whitney_decomposition(dom, omega)
    total = np.zeros(dom.n_cells)
    for cube in cover.cubes:
        total += maximal_of_indicator(dom, cube).values ** q
    whitney = 2.0 ** (k * p) * float(np.sum(total * wv) * h)

    # distance from each midpoint to the complement, the exterior included
    gl, gr = complement_gaps(omega)
    d = (np.minimum(gl, gr) + 0.5) * h
    ys = np.flatnonzero(omega)
    x = dom.midpoints
    dy = d[ys]
    dist = np.abs(x[:, None] - x[ys][None, :])
    inner = np.sum(dy ** (q - 1) / (dy**q + dist**q), axis=1) * h
    integral = 2.0 ** (k * p) * float(np.sum(inner * wv) * h)
    return SawyerValue(whitney, integral, len(cover.cubes))


# ---------------------------------------------------------------------------
# grand maximal truncated operator


def _lattice_cubes(domain: Domain, shifts) -> list[tuple[int, int]]:
    out = []
    for s in shifts:
        for k in range(domain.depth + 1):
            lo, hi = domain.level_ranges(s, k)
            out.extend(zip(lo.tolist(), hi.tolist()))
    return sorted(set(out))


def truncation_sup(kmat: np.ndarray, arr: np.ndarray, base: np.ndarray, cubes, q: float, n: int) -> np.ndarray:
    """Cellwise sup over cubes P of max_{xi in P} |base(xi) - T(F chi_{3P})(xi)|_q.

    ``base`` holds T applied to the outer truncation, ``arr`` the components
    (J x N), ``kmat`` the operator matrix.
    """
    out = np.zeros(n)
    by_len: dict[int, list[int]] = {}
    for lo, hi in cubes:
        by_len.setdefault(hi - lo, []).append(lo)
    for ell, los in by_len.items():
        los = np.array(los)
        vals = np.empty(los.size)
        for i, lo in enumerate(los.tolist()):
            a, b = max(0, lo - ell), min(n, lo + 2 * ell)
            local = kmat[lo : lo + ell, a:b] @ arr[:, a:b].T  # (ell, J)
            diff = base[:, lo : lo + ell].T - local
            vals[i] = float(lq_norm(diff, q, axis=1).max())
        g = np.full(n, -np.inf)
        g[los] = vals
        out = np.maximum(
            out, maximum_filter1d(g, ell, mode="constant", cval=-np.inf, origin=(ell - 1) // 2)
        )
    return out


def grand_maximal(T, F, q: float, Q0: DyadicCube | None = None) -> GridFunction:
    """Grand maximal truncated operator of the vector operator T_q.

    Global form: sup over cubes Q of the three lattices containing x of the
    max over Q of |T_q(F chi_{outside 3Q})|.  Local form (Q0 given): cubes of
    Q0's lattice inside Q0, with F restricted to 3Q0 minus 3Q; zero off Q0.
    """
    if not q > 1:
        raise ValueError("q must be > 1")
    F = as_vector(F)
    dom = F.domain
    n = dom.n_cells
    arr = F.array
    kmat = T.matrix
    if Q0 is None:
        base = arr @ kmat.T  # (J, N): T f_j everywhere
        return GridFunction(truncation_sup(kmat, arr, base, _lattice_cubes(dom, (0, 1, 2)), q, n), dom)
    a, b = dom.triple(Q0)
    masked = np.zeros_like(arr)
    masked[:, a:b] = arr[:, a:b]
    base = masked @ kmat.T
    cubes = [dom.cube_range(P) for P in dom.descendants(Q0)]
    vals = truncation_sup(kmat, masked, base, cubes, q, n)
    lo, hi = dom.cube_range(Q0)
    vals[:lo] = 0.0
    vals[hi:] = 0.0
    return GridFunction(vals, dom)
