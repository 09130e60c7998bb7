import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparselab.czo import CZOperator, hilbert_kernel, maximal_truncation, vector_maximal_truncation
from sparselab.dyadic import SHIFTS, DyadicCube, Domain
from sparselab.maximal import (
    bilinear_maximal,
    grand_maximal,
    iterated_maximal,
    maximal,
    maximal_delta,
    maximal_of_indicator,
    multilinear_maximal,
    orlicz_maximal,
    sawyer_functional,
    sharp_maximal,
    vector_maximal,
)
from sparselab.signal import GridFunction, VectorFunction, llogl, power


def intervals(dom, kind):
    """Brute-force cube list for a kind."""
    if kind == "exact":
        n = dom.n_cells
        return [(a, b) for a in range(n) for b in range(a + 1, n + 1)]
    shifts = SHIFTS if kind == "shifted3" else (int(kind[-1]),)
    out = set()
    for s in shifts:
        for k in range(dom.depth + 1):
            lo, hi = dom.level_ranges(s, k)
            out.update(zip(lo.tolist(), hi.tolist()))
    return sorted(out)


def brute_sup(dom, kind, value):
    out = np.zeros(dom.n_cells)
    for a, b in intervals(dom, kind):
        out[a:b] = np.maximum(out[a:b], value(a, b))
    return out


def rand_gf(depth, seed, positive=False):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**depth)
    return GridFunction(np.abs(v) if positive else v, Domain(depth))


def test_maximal_of_corner_indicator():
    dom = Domain(2)
    f = GridFunction.indicator(dom, (0, 1))
    assert np.allclose(maximal(f, "dyadic0").values, [1, 0.5, 0.25, 0.25])


@pytest.mark.parametrize("kind", ["dyadic0", "dyadic1", "shifted3", "exact"])
def test_maximal_of_constant(kind):
    f = GridFunction.constant(Domain(5), 2.5)
    assert np.allclose(maximal(f, kind).values, 2.5)


@pytest.mark.parametrize("kind", ["dyadic0", "dyadic2", "shifted3", "exact"])
@pytest.mark.parametrize("seed", range(3))
def test_maximal_matches_brute_force(kind, seed):
    f = rand_gf(5, seed)
    a = np.abs(f.values)
    want = brute_sup(f.domain, kind, lambda lo, hi: a[lo:hi].mean())
    assert np.allclose(maximal(f, kind).values, want, rtol=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_kind_ordering(seed):
    f = rand_gf(6, seed)
    d0 = maximal(f, "dyadic0").values
    s3 = maximal(f, "shifted3").values
    ex = maximal(f, "exact").values
    tol = 1e-12
    assert np.all(d0 <= s3 + tol)
    assert np.all(s3 <= ex + tol)
    assert np.all(ex <= 3 * s3 + tol)


def test_maximal_delta():
    dom = Domain(5)
    chi = GridFunction.indicator(dom, (3, 11))
    assert np.allclose(maximal_delta(chi, 0.5).values, maximal(chi).values ** 2)
    c = GridFunction.constant(dom, 1.5)
    assert np.allclose(maximal_delta(c, 0.3).values, 1.5)
    f = rand_gf(5, 7)
    direct = maximal(GridFunction(np.abs(f.values) ** 0.5, dom)).values ** 2
    assert np.allclose(maximal_delta(f, 0.5).values, direct)


def test_sharp_maximal_examples():
    dom = Domain(2)
    assert np.allclose(sharp_maximal(GridFunction.constant(dom, 3.0)).values, 0)
    half = GridFunction.indicator(dom, (0, 2))
    assert np.allclose(sharp_maximal(half, kind="dyadic0").values, 0.5)


@pytest.mark.parametrize("seed", range(3))
def test_sharp_maximal_brute_force_and_bound(seed):
    f = rand_gf(5, seed)
    v = f.values

    def dev(lo, hi):
        seg = v[lo:hi]
        # inf over constants of the mean deviation, scanning the cell values
        return min(np.abs(seg - c).mean() for c in seg)

    want = brute_sup(f.domain, "shifted3", dev)
    got = sharp_maximal(f).values
    assert np.allclose(got, want, rtol=1e-12)
    assert np.all(got <= 2 * maximal(f, "shifted3").values + 1e-12)


def test_orlicz_maximal_reductions():
    f = rand_gf(5, 3)
    assert np.allclose(orlicz_maximal(f, power(1)).values, maximal(f, "shifted3").values, rtol=1e-8)
    c = GridFunction.constant(Domain(5), 2.0)
    assert np.allclose(orlicz_maximal(c, power(2)).values, 2.0, rtol=1e-8)


@pytest.mark.parametrize("depth", [6, 8])
def test_iterated_maximal_vs_llogl(depth):
    # M^2 and M_{LlogL} are comparable; both ratios must stay bounded
    ratios = []
    for seed in range(4):
        f = rand_gf(depth, seed, positive=True)
        m2 = iterated_maximal(f, 2, "shifted3").values
        ml = orlicz_maximal(f, llogl(), "shifted3").values
        ratios.append((np.max(m2 / ml), np.max(ml / m2)))
    assert all(math.isfinite(a) and math.isfinite(b) for a, b in ratios)
    assert max(a for a, _ in ratios) < 10 and max(b for _, b in ratios) < 10


def test_iterated_maximal_monotone():
    f = rand_gf(6, 11)
    m1 = iterated_maximal(f, 1).values
    assert np.allclose(m1, maximal(f).values)
    assert np.all(iterated_maximal(f, 2).values >= m1 - 1e-12)


def test_vector_maximal():
    dom = Domain(5)
    f = rand_gf(5, 4)
    assert np.allclose(vector_maximal(VectorFunction((f,)), 2).values, maximal(f).values)
    same = VectorFunction((f, f, f))
    assert np.allclose(vector_maximal(same, 3).values, 3 ** (1 / 3) * maximal(f).values)
    rng = np.random.default_rng(5)
    arr = rng.standard_normal((4, 32))
    F = VectorFunction.from_array(dom, arr)
    per = [brute_sup(dom, "exact", lambda lo, hi, a=np.abs(row): a[lo:hi].mean()) for row in arr]
    want = np.sqrt(np.sum(np.array(per) ** 2, axis=0))
    assert np.allclose(vector_maximal(F, 2).values, want)
    with pytest.raises(ValueError):
        vector_maximal(F, 1.0)


def test_bilinear_maximal():
    f = rand_gf(5, 6)
    one = GridFunction.constant(f.domain, 1.0)
    want = maximal_delta(f, 1.5).values  # M_r f with r = 1.5
    assert np.allclose(bilinear_maximal(f, one, 1.5, 1.0).values, want)
    h = rand_gf(5, 7, positive=True)
    assert np.allclose(bilinear_maximal(h, h, 1, 1).values, maximal(h).values ** 2)
    g = rand_gf(5, 8)
    a, b = np.abs(f.values), np.abs(g.values)
    brute = brute_sup(f.domain, "exact", lambda lo, hi: np.mean(a[lo:hi] ** 2) ** 0.5 * np.mean(b[lo:hi] ** 1.2) ** (1 / 1.2))
    assert np.allclose(bilinear_maximal(f, g, 2, 1.2).values, brute)


def test_multilinear_maximal():
    f, g = rand_gf(5, 9), rand_gf(5, 10)
    assert np.allclose(multilinear_maximal([f]).values, maximal(f).values)
    one = GridFunction.constant(f.domain, 1.0)
    assert np.allclose(multilinear_maximal([one, one]).values, 1.0)
    a, b = np.abs(f.values), np.abs(g.values)
    brute = brute_sup(f.domain, "exact", lambda lo, hi: a[lo:hi].mean() * b[lo:hi].mean())
    assert np.allclose(multilinear_maximal([f, g]).values, brute)


def test_maximal_of_indicator_matches_maximal():
    dom = Domain(6)
    for cube in [(0, 5), (17, 40), DyadicCube(1, 3, 2)]:
        assert np.allclose(maximal_of_indicator(dom, cube).values, maximal(GridFunction.indicator(dom, cube)).values)


def test_sawyer_functional():
    dom = Domain(7)
    f = GridFunction.constant(dom, 1.0)
    assert sawyer_functional(f, 0, 1.5, 2.0).whitney == 0.0
    g = GridFunction(2 * GridFunction.indicator(dom, (0, 64)).values, dom)
    v = sawyer_functional(g, 0, 1.5, 2.0)
    assert v.whitney > 0 and v.integral > 0
    assert 0.1 < v.whitney / v.integral < 10
    assert sawyer_functional(g, 2, 1.5, 2.0).whitney == 0.0
    with pytest.raises(ValueError):
        sawyer_functional(g, 0, 2.0, 1.5)


def brute_grand(T, arr, q, dom):
    n = dom.n_cells
    out = np.zeros(n)
    for a, b in intervals(dom, "shifted3"):
        ta, tb = dom.triple((a, b))
        outside = arr.copy()
        outside[:, ta:tb] = 0
        vals = outside @ T.matrix.T
        m = float(np.max(np.sum(np.abs(vals[:, a:b]) ** q, axis=0) ** (1 / q)))
        out[a:b] = np.maximum(out[a:b], m)
    return out


def test_grand_maximal_zero_and_brute_force():
    dom = Domain(5)
    T = CZOperator(hilbert_kernel(), dom)
    zero = VectorFunction.from_array(dom, np.zeros((2, 32)))
    assert np.allclose(grand_maximal(T, zero, 2).values, 0)
    rng = np.random.default_rng(12)
    arr = rng.standard_normal((2, 32))
    F = VectorFunction.from_array(dom, arr)
    assert np.allclose(grand_maximal(T, F, 2).values, brute_grand(T, arr, 2, dom))


def test_grand_maximal_pointwise_bound():
    # the grand maximal function is controlled by M_q F plus the maximal truncation
    dom = Domain(6)
    T = CZOperator(hilbert_kernel(), dom)
    ratios = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        F = VectorFunction.from_array(dom, rng.standard_normal((2, 64)))
        g = grand_maximal(T, F, 2).values
        rhs = vector_maximal(F, 2).values + vector_maximal_truncation(T, F, 2).values
        ratios.append(float(np.max(g / rhs)))
    assert all(math.isfinite(r) for r in ratios)
    assert max(ratios) < 20


def test_local_grand_maximal_vanishes_off_root():
    dom = Domain(5)
    T = CZOperator(hilbert_kernel(), dom)
    rng = np.random.default_rng(3)
    F = VectorFunction.from_array(dom, rng.standard_normal((1, 32)))
    Q0 = DyadicCube(0, 1, 0)
    g = grand_maximal(T, F, 2, Q0).values
    assert np.all(g[16:] == 0)
    # the maximal truncation exists and is at least |Tf| away from the diagonal cell
    assert np.all(maximal_truncation(T, F.components[0]).values >= 0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=16, max_size=16))
def test_maximal_dominates_function(vals):
    f = GridFunction(np.array(vals), Domain(4))
    for kind in ("dyadic0", "shifted3", "exact"):
        assert np.all(maximal(f, kind).values >= np.abs(f.values) - 1e-12)
