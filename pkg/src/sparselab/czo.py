"""Discrete Calderon-Zygmund operators on the cell grid.

An operator is the matrix K(x_i, x_j) h over cell midpoints with the diagonal
removed (principal value).  Everything else (truncations, commutators, vector
versions) is built from that matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .dyadic import CubeLike, Domain
from .signal import GridFunction, VectorFunction, as_vector, lq_norm


@dataclass(frozen=True, eq=False)
class Modulus:
    """Modulus of continuity omega(t)."""

    tag: str
    params: tuple
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))


def lipschitz(c: float = 1.0) -> Modulus:
    return Modulus("lipschitz", (c,), lambda t: c * t)


def holder(c: float, delta: float) -> Modulus:
    return Modulus("holder", (c, delta), lambda t: c * t**delta)


def sampled_modulus(ts, values) -> Modulus:
    ts = np.r_[0.0, np.asarray(ts, dtype=float)]
    vs = np.r_[0.0, np.asarray(values, dtype=float)]
    return Modulus("custom", (tuple(ts), tuple(vs)), lambda t: np.interp(t, ts, vs))


S_MAX = 700.0


@dataclass(frozen=True)
class DiniNorms:
    dini: float
    log_dini: float

    @property
    def ordered(self) -> bool:
        return self.dini <= self.log_dini


def dini_norms(omega) -> DiniNorms:
    """int_0^1 omega(t) dt/t and int_0^1 omega(t) log(1/t) dt/t.

    Integrated in the variable s = log(1/t).  exp(-s) underflows past
    s = 745, so the integral runs over [0, S_MAX] and a tail on
    [S_MAX/2, S_MAX] that is not negligible against the total means the
    integral diverges.
    """
    fn = omega if callable(omega) else omega.fn

    def g(s):
        return float(fn(np.array(math.exp(-s))))

    def h(s):
        return g(s) * s

    out = []
    for integrand in (g, h):
        head, err = quad(integrand, 0, S_MAX / 2, limit=500, epsrel=1e-10, epsabs=1e-12)
        tail = quad(integrand, S_MAX / 2, S_MAX, limit=200)[0]
        if not np.isfinite(head) or err > 1e-6 * max(1.0, abs(head)):
            raise ValueError("not Dini: quadrature did not converge")
        if abs(tail) > 1e-6 * max(1.0, abs(head)):
            raise ValueError("not Dini: integral does not converge")
        out.append(head + tail)
    return DiniNorms(*out)


@dataclass(frozen=True, eq=False)
class Kernel:
    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    size_constant: float
    modulus: Modulus

    def __call__(self, x, y):
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @cached_property
    def norms(self) -> DiniNorms:
        return dini_norms(self.modulus)


def hilbert_kernel() -> Kernel:
    """K(x, y) = 1/(x - y).

    For |y - z| < |x - y|/2 each of the two kernel differences is at most
    2t/|x - y| with t = |y - z|/|x - y|, so omega(t) = 4t.
    """
    return Kernel("hilbert", lambda x, y: 1.0 / (x - y), 1.0, lipschitz(4.0))


# sampled sup of the two-term smoothness ratio / sqrt(t) on the unit domain is
# about 2.8; 5 leaves headroom
HOLDER_C = 5.0


def holder_kernel() -> Kernel:
    """sign(x - y) / (|x - y| (1 + |x - y|^(1/2))), declared with a 1/2-Holder modulus."""

    def k(x, y):
        u = x - y
        a = np.abs(u)
        return np.sign(u) / (a * (1.0 + np.sqrt(a)))

    return Kernel("holder", k, 1.0, holder(HOLDER_C, 0.5))


KERNELS = {"hilbert": hilbert_kernel, "holder": holder_kernel}


def make_kernel(name: str) -> Kernel:
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


class CZOperator:
    """Midpoint-rule discretization with the diagonal cell excluded."""

    def __init__(self, kernel: Kernel, domain: Domain):
        self.kernel = kernel
        self.domain = domain
        x = domain.midpoints
        with np.errstate(divide="ignore", invalid="ignore"):
            m = kernel(x[:, None], x[None, :]) * domain.cell_measure
        np.fill_diagonal(m, 0.0)
        m.setflags(write=False)
        self.matrix = m

    def __repr__(self) -> str:
        return f"CZOperator({self.kernel.name}, depth={self.domain.depth})"

    @cached_property
    def l2_norm(self) -> float:
        return operator_norm(self.matrix)

    @property
    def dini(self) -> float:
        return self.kernel.norms.dini

    @property
    def constant(self) -> float:
        """C_T = C_K + Dini norm + L2 operator norm (at this resolution)."""
        return self.kernel.size_constant + self.dini + self.l2_norm


def operator_norm(matrix: np.ndarray, min_iter: int = 20, tol: float = 1e-8, max_iter: int = 5000) -> float:
    """Largest singular value by power iteration on A^T A."""
    n = matrix.shape[1]
    v = np.cos(np.arange(n) * 0.37) + 1.0
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(max_iter):
        u = matrix.T @ (matrix @ v)
        new = math.sqrt(np.linalg.norm(u))
        v = u / np.linalg.norm(u)
        if it >= min_iter and abs(new - est) <= tol * new:
            return new
        est = new
    return est


def _vals(f) -> np.ndarray:
    return f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)


def apply(T: CZOperator, f) -> GridFunction:
    return GridFunction(T.matrix @ _vals(f), T.domain)


def truncated(T: CZOperator, f, eps: float) -> GridFunction:
    """Sum over pairs with |x_i - x_j| > eps only."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = T.domain.midpoints
    far = np.abs(x[:, None] - x[None, :]) > eps
    return GridFunction((T.matrix * far) @ _vals(f), T.domain)


def _distance_profile(T: CZOperator, v: np.ndarray) -> np.ndarray:
    """C[i, d] = contribution to Tf(x_i) from the cells at distance d cells."""
    n = v.size
    i = np.arange(n)[:, None]
    d = np.arange(n)[None, :]
    right = i + d
    left = i - d
    m = T.matrix
    c = np.where(right < n, m[i, np.minimum(right, n - 1)] * v[np.minimum(right, n - 1)], 0.0)
    c += np.where(left >= 0, m[i, np.maximum(left, 0)] * v[np.maximum(left, 0)], 0.0)
    c[:, 0] = 0.0
    return c


def _truncation_table(T: CZOperator, v: np.ndarray) -> np.ndarray:
    """S[i, m] = T_eps f(x_i) for eps in [m h, (m+1) h): cells farther than m."""
    c = _distance_profile(T, v)
    suffix = np.cumsum(c[:, ::-1], axis=1)[:, ::-1]
    return np.concatenate([suffix[:, 1:], np.zeros((v.size, 1))], axis=1)


def maximal_truncation(T: CZOperator, f) -> GridFunction:
    """T* f = max over the grid breakpoints eps = k h / 2 of |T_eps f|."""
    return GridFunction(np.abs(_truncation_table(T, _vals(f))).max(axis=1), T.domain)


def commutator(T: CZOperator, b, f) -> GridFunction:
    """[b, T] f = b T f - T(b f)."""
    bv, fv = _vals(b), _vals(f)
    m = T.matrix
    return GridFunction(bv * (m @ fv) - m @ (bv * fv), T.domain)


def _check_q(q: float) -> None:
    if not q > 1:
        raise ValueError("q must be > 1 (q <= 1 rejected)")


def vector_apply(T: CZOperator, F, q: float) -> GridFunction:
    _check_q(q)
    arr = as_vector(F).array
    return GridFunction(lq_norm(arr @ T.matrix.T, q, axis=0), T.domain)


def vector_maximal_truncation(T: CZOperator, F, q: float) -> GridFunction:
    """(sum_j (T* f_j)^q)^(1/q)."""
    _check_q(q)
    rows = [maximal_truncation(T, f).values for f in as_vector(F).components]
    return GridFunction(lq_norm(np.stack(rows), q, axis=0), T.domain)


def vector_commutator(T: CZOperator, b, F, q: float) -> GridFunction:
    _check_q(q)
    bv = _vals(b)
    arr = as_vector(F).array
    m = T.matrix
    comps = bv * (arr @ m.T) - (bv * arr) @ m.T
    return GridFunction(lq_norm(comps, q, axis=0), T.domain)


def kernel_mean_oscillation(T: CZOperator, B: CubeLike, y: float) -> float:
    """(1/|B|^2) double integral over B x B of |K(x, y) - K(z, y)|, midpoint rule."""
    dom = T.domain
    lo, hi = dom.cube_range(B)
    h = dom.cell_measure
    x0 = (lo + hi) * h / 2
    r = (hi - lo) * h / 2
    if abs(y - x0) < 2 * r:
        raise ValueError("y must lie outside 2B")
    xs = dom.midpoints[lo:hi]
    k = T.kernel(xs, np.full_like(xs, y))
    return float(np.abs(k[:, None] - k[None, :]).mean())
