"""Piecewise-constant signals, norms, rearrangements, oscillations, Orlicz norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .dyadic import CubeLike, Domain, lattice_groups


@dataclass(frozen=True, eq=False)
class GridFunction:
    """One real value per finest cell."""

    values: np.ndarray
    domain: Domain

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size != self.domain.n_cells:
            raise ValueError(f"expected {self.domain.n_cells} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("GridFunction values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # constructors
    @classmethod
    def zeros(cls, domain: Domain) -> "GridFunction":
        return cls(np.zeros(domain.n_cells), domain)

    @classmethod
    def constant(cls, domain: Domain, c: float) -> "GridFunction":
        return cls(np.full(domain.n_cells, float(c)), domain)

    @classmethod
    def indicator(cls, domain: Domain, cube: CubeLike) -> "GridFunction":
        lo, hi = domain.cube_range(cube)
        v = np.zeros(domain.n_cells)
        v[lo:hi] = 1.0
        return cls(v, domain)

    @classmethod
    def from_callable(cls, domain: Domain, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(fn(domain.midpoints), domain)

    # numpy interop and arithmetic
    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.values.size

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise ValueError("GridFunctions live on different domains")
            return other.values
        return other

    def _wrap(self, v) -> "GridFunction":
        return GridFunction(v, self.domain)

    def __add__(self, o):
        return self._wrap(self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - self._other(o))

    def __rsub__(self, o):
        return self._wrap(self._other(o) - self.values)

    def __mul__(self, o):
        return self._wrap(self.values * self._other(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._wrap(self.values / self._other(o))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))

    def __pow__(self, e):
        return self._wrap(self.values ** self._other(e))

    def integral(self) -> float:
        return float(self.values.sum() * self.domain.cell_measure)

    def restrict(self, cube: CubeLike) -> "GridFunction":
        lo, hi = self.domain.cube_range(cube)
        v = np.zeros_like(self.values)
        v[lo:hi] = self.values[lo:hi]
        return self._wrap(v)

    # CSV: header "# domain_length,depth" then one value per line
    def to_csv(self, path) -> None:
        lines = [f"# {self.domain.length!r},{self.domain.depth}"]
        lines += [repr(float(x)) for x in self.values]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        text = Path(path).read_text().strip().splitlines()
        if not text or not text[0].startswith("#"):
            raise ValueError(f"{path}: missing '# domain_length,depth' header")
        length, depth = text[0][1:].split(",")
        domain = Domain(int(depth), float(length))
        return cls(np.array([float(x) for x in text[1:]]), domain)


@dataclass(frozen=True, eq=False)
class VectorFunction:
    """A finite family of GridFunctions on a common domain."""

    components: tuple[GridFunction, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("VectorFunction needs at least one component")
        if any(c.domain != comps[0].domain for c in comps):
            raise ValueError("components live on different domains")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_array(cls, domain: Domain, arr) -> "VectorFunction":
        arr = np.atleast_2d(np.asarray(arr, dtype=float))
        return cls(tuple(GridFunction(row, domain) for row in arr))

    @classmethod
    def of(cls, f: "GridFunction | VectorFunction") -> "VectorFunction":
        return f if isinstance(f, VectorFunction) else cls((f,))

    @property
    def domain(self) -> Domain:
        return self.components[0].domain

    @property
    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.components])

    def __len__(self) -> int:
        return len(self.components)

    def norm(self, q: float) -> GridFunction:
        """|F|_q cell by cell."""
        return GridFunction(lq_norm(self.array, q, axis=0), self.domain)

    def scale(self, g) -> "VectorFunction":
        g = np.asarray(g, dtype=float)
        return VectorFunction.from_array(self.domain, self.array * g)


def lq_norm(arr: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    a = np.abs(arr)
    if np.isinf(q):
        return a.max(axis=axis)
    # scale by the max to avoid overflow for large q
    m = a.max(axis=axis, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    return (np.sum((a / safe) ** q, axis=axis) ** (1.0 / q)) * np.squeeze(safe, axis=axis) * (
        np.squeeze(m, axis=axis) > 0
    )


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


# ---------------------------------------------------------------------------
# averages and norms


def average(f: GridFunction, cube: CubeLike) -> float:
    lo, hi = f.domain.cube_range(cube)
    return float(f.values[lo:hi].mean())


def power_average(f: GridFunction, cube: CubeLike, r: float) -> float:
    """<|f|^r>_Q^{1/r}."""
    lo, hi = f.domain.cube_range(cube)
    return float(np.mean(np.abs(f.values[lo:hi]) ** r) ** (1.0 / r))


@dataclass(frozen=True)
class LpNorms:
    strong: float
    weak: float


def lp_norms(f, p: float, w=None) -> LpNorms:
    """Strong and weak L^p(w) norms; weak is exact over attained levels."""
    if not p > 0:
        raise ValueError("p must be positive")
    vals = np.abs(_values(f))
    h = f.domain.cell_measure if isinstance(f, GridFunction) else 1.0 / vals.size
    wv = np.ones_like(vals) if w is None else _values(w)
    if np.any(wv <= 0):
        raise ValueError("weight must be positive")
    mass = wv * h
    strong = float(np.sum(vals**p * mass) ** (1.0 / p))
    return LpNorms(strong, weak_norm(vals, p, mass))


def weak_norm(vals: np.ndarray, p: float, mass: np.ndarray) -> float:
    """sup_t t * mass({|f| >= t})^(1/p) over attained levels t."""
    vals = np.abs(np.asarray(vals, dtype=float))
    order = np.argsort(-vals, kind="stable")
    v = vals[order]
    tail = np.cumsum(mass[order])
    # for each distinct level keep the cumulative mass up to its last occurrence
    last = np.r_[v[1:] != v[:-1], True]
    v, tail = v[last], tail[last]
    keep = v > 0
    if not keep.any():
        return 0.0
    return float(np.max(v[keep] * tail[keep] ** (1.0 / p)))


def decreasing_rearrangement(f: GridFunction, t: float) -> float:
    """f*(t) = inf{a > 0 : |{|f| > a}| <= t}."""
    if not t > 0:
        raise ValueError("t must be positive")
    v = np.sort(np.abs(f.values))[::-1]
    m = int(math.floor(t / f.domain.cell_measure + 1e-9))
    return float(v[m]) if m < v.size else 0.0


# ---------------------------------------------------------------------------
# oscillations


def _sorted_cells(f: GridFunction, cube: CubeLike) -> np.ndarray:
    lo, hi = f.domain.cube_range(cube)
    return np.sort(f.values[lo:hi])


def _best_window(v: np.ndarray, lam: float) -> tuple[float, float]:
    """Tightest [a, b] holding all but floor(lam*n) of the sorted values v."""
    n = v.size
    k = int(math.floor(lam * n + 1e-12))
    keep = n - k
    spans = v[keep - 1 :] - v[: n - keep + 1]
    i = int(np.argmin(spans))
    return float(v[i]), float(v[i + keep - 1])


def oscillation_window(f: GridFunction, cube: CubeLike, lam: float) -> tuple[float, float]:
    """The interval achieving the removal oscillation on ``cube``."""
    _check_lambda(lam)
    return _best_window(_sorted_cells(f, cube), lam)


def ln_oscillation(f: GridFunction, cube: CubeLike, lam: float) -> float:
    """min over E with |E| <= lam|Q| of (sup - inf) of f on Q minus E."""
    a, b = oscillation_window(f, cube, lam)
    return b - a


def local_oscillation(f: GridFunction, cube: CubeLike, lam: float) -> float:
    """inf_c ((f - c) chi_Q)*(lam |Q|).

    For a constant c the rearrangement at lam|Q| is the smallest radius whose
    ball around c holds all but floor(lam*n) cells, so the infimum is half the
    tightest window, attained at the window midpoint.
    """
    a, b = oscillation_window(f, cube, lam)
    return (b - a) / 2.0


def _check_lambda(lam: float) -> None:
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")


# ---------------------------------------------------------------------------
# Young functions and Orlicz norms


@dataclass(frozen=True, eq=False)
class YoungFunction:
    tag: str
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: tuple = ()
    inv: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, t):
        return self.phi(np.asarray(t, dtype=float))

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        if self.inv is not None:
            return self.inv(t)
        return _invert_increasing(self.phi, t).reshape(t.shape)


def power(r: float, scale: float = 1.0) -> YoungFunction:
    if not r >= 1:
        raise ValueError("power Young function needs r >= 1")
    return YoungFunction(
        "power",
        lambda t: scale * t**r,
        (r, scale),
        lambda s: (s / scale) ** (1.0 / r),
    )


def llogl(delta: float = 1.0) -> YoungFunction:
    return YoungFunction("LlogL", lambda t: t * np.log(np.e + t) ** delta, (delta,))


def lloglogl(delta: float = 1.0) -> YoungFunction:
    ee = math.exp(math.e)
    return YoungFunction("LloglogL", lambda t: t * np.log(np.log(ee + t)) ** delta, (delta,))


def llogl_loglogl(delta: float = 1.0) -> YoungFunction:
    ee = math.exp(math.e)
    return YoungFunction(
        "LlogL.loglogL",
        lambda t: t * np.log(np.e + t) * np.log(np.log(ee + t)) ** delta,
        (delta,),
    )


def custom(ts: Sequence[float], values: Sequence[float]) -> YoungFunction:
    """Piecewise-linear Young function through sampled points, extended linearly."""
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(values, dtype=float)
    if ts[0] != 0 or vs[0] != 0:
        ts, vs = np.r_[0.0, ts], np.r_[0.0, vs]
    slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])

    def phi(t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, ts, vs)
        return np.where(t > ts[-1], vs[-1] + slope * (t - ts[-1]), out)

    yf = YoungFunction("custom", phi, (tuple(ts), tuple(vs)))
    check_young(yf)
    return yf


def check_young(phi: YoungFunction, grid: np.ndarray | None = None, rtol: float = 1e-9) -> None:
    """Convex, increasing, zero at zero, on a sample grid."""
    t = np.linspace(0.0, 50.0, 2001) if grid is None else np.asarray(grid, dtype=float)
    v = phi(t)
    scale = max(1.0, float(np.max(np.abs(v))))
    if abs(float(phi(np.array([0.0]))[0])) > rtol * scale:
        raise ValueError(f"{phi.tag}: phi(0) != 0")
    if np.any(np.diff(v) < -rtol * scale):
        raise ValueError(f"{phi.tag}: not increasing")
    second = v[2:] - 2 * v[1:-1] + v[:-2]
    if np.any(second < -rtol * scale):
        raise ValueError(f"{phi.tag}: not convex")


def _invert_increasing(fn, t: np.ndarray) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lo = np.zeros_like(t)
    hi = np.ones_like(t)
    while np.any(fn(hi) < t):
        hi = np.where(fn(hi) < t, hi * 2.0, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = fn(mid) < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-13 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def orlicz_norms_rows(rows: np.ndarray, phi: YoungFunction, rtol: float = 1e-10) -> np.ndarray:
    """Luxemburg norms of each row (cells of one cube, equal weights)."""
    a = np.abs(np.atleast_2d(np.asarray(rows, dtype=float)))
    top = a.max(axis=1)
    out = np.zeros(a.shape[0])
    live = top > 0
    if not live.any():
        return out
    a = a[live]

    def level(lmb):
        return phi(a / lmb[:, None]).mean(axis=1)

    hi = top[live].copy()
    while True:
        bad = level(hi) > 1
        if not bad.any():
            break
        hi[bad] *= 2.0
    lo = hi / 2.0
    while True:
        bad = level(lo) <= 1
        if not bad.any():
            break
        hi[bad] = lo[bad]
        lo[bad] /= 2.0
    while np.any(hi / lo - 1 > rtol):
        mid = np.sqrt(lo * hi)
        above = level(mid) > 1
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out[live] = hi
    return out


def orlicz_norm(f: GridFunction, cube: CubeLike, phi: YoungFunction) -> float:
    """inf{lam > 0 : <phi(|f|/lam)>_Q <= 1}."""
    lo, hi = f.domain.cube_range(cube)
    return float(orlicz_norms_rows(f.values[lo:hi][None, :], phi)[0])


def complementary_young(phi: YoungFunction) -> YoungFunction:
    """Legendre-type conjugate sup_s (s t - phi(s)) by grid search plus refinement."""
    s_grid = np.logspace(-8, 8, 3201)
    phi_grid = phi(s_grid)

    def conj(t):
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        out = np.empty_like(flat)
        for start in range(0, flat.size, 256):
            chunk = flat[start : start + 256]
            vals = chunk[:, None] * s_grid[None, :] - phi_grid[None, :]
            k = np.argmax(vals, axis=1)
            a = s_grid[np.maximum(k - 1, 0)]
            b = s_grid[np.minimum(k + 1, s_grid.size - 1)]
            out[start : start + 256] = np.maximum(
                _golden_max(lambda s: chunk * s - phi(s), a, b), 0.0
            )
        out[flat <= 0] = 0.0
        return out.reshape(t.shape) if t.ndim else out[0]

    return YoungFunction(f"conj({phi.tag})", conj, (phi.tag,) + tuple(phi.params))


def _golden_max(fn, a: np.ndarray, b: np.ndarray, iters: int = 80) -> np.ndarray:
    g = (math.sqrt(5) - 1) / 2
    a, b = a.copy(), b.copy()
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc, fd = fn(c), fn(d)
    return np.maximum(fc, fd)


# ---------------------------------------------------------------------------
# BMO surrogate


def bmo_norm(b: GridFunction, kind: str = "shifted3") -> float:
    """sup over lattice cubes of <|b - b_Q|>_Q."""
    v = b.values
    best = 0.0
    for lo, ell in lattice_groups(b.domain, kind):
        rows = v[lo[:, None] + np.arange(ell)[None, :]]
        dev = np.abs(rows - rows.mean(axis=1, keepdims=True)).mean(axis=1)
        best = max(best, float(dev.max()))
    return best


def cube_rows(values: np.ndarray, lo: np.ndarray, ell: int) -> np.ndarray:
    """Gather the cell values of equal-length cubes into a matrix."""
    return values[np.asarray(lo)[:, None] + np.arange(ell)[None, :]]


def as_vector(F: "GridFunction | VectorFunction | Iterable[GridFunction]") -> VectorFunction:
    if isinstance(F, VectorFunction):
        return F
    if isinstance(F, GridFunction):
        return VectorFunction((F,))
    return VectorFunction(tuple(F))


def fit_pointwise(lhs, rhs) -> float:
    """max over cells of lhs/rhs with 0/0 = 0 and x/0 = inf for x > 0."""
    a = np.abs(_values(lhs))
    b = _values(rhs)
    if np.any(b < 0):
        raise ValueError("rhs must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(b > 0, a / np.where(b > 0, b, 1.0), np.where(a > 0, np.inf, 0.0))
    return float(r.max()) if r.size else 0.0
