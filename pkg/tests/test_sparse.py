import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparselab.czo import CZOperator, commutator, make_kernel
from sparselab.dyadic import DyadicCube, Domain
from sparselab.signal import GridFunction, VectorFunction, power, bmo_norm
from sparselab.sparse import (
    CZ_ETA,
    LN_ETA,
    MAPPED_ETA,
    SparseFamily,
    average_stopping_family,
    bilinear_sparse_form,
    carleson_constant,
    commutator_sparse,
    extract_bilinear,
    extract_commutator,
    extract_czo,
    extract_ln,
    extract_mq,
    orlicz_sparse,
    overlap_function,
    sparse_operator,
    verify_sparse,
)

TOP = DyadicCube(0, 0, 0)


def full_tree(dom, shift=0):
    return [DyadicCube(shift, k, i) for k in range(dom.depth + 1) for i in range(dom.cube_count(shift, k))]


def brute_carleson(dom, cubes):
    best = Fraction(0)
    for q in cubes:
        lo, hi = dom.cube_range(q)
        packed = sum(b - a for a, b in (dom.cube_range(p) for p in cubes) if lo <= a and b <= hi)
        best = max(best, Fraction(packed, hi - lo))
    return best


def rand_gf(depth, seed):
    return GridFunction(np.random.default_rng(seed).standard_normal(2**depth), Domain(depth))


def test_singleton_family():
    dom = Domain(4)
    chk = verify_sparse(dom, [TOP], 1)
    assert chk.ok and chk.carleson == 1
    assert chk.family.witness_measure(TOP) == 16


@pytest.mark.parametrize("depth", [2, 3, 5])
def test_full_tree_packing(depth):
    dom = Domain(depth)
    tree = full_tree(dom)
    assert carleson_constant(dom, tree) == depth + 1
    assert verify_sparse(dom, tree, Fraction(1, depth + 1)).ok
    bad = verify_sparse(dom, tree, Fraction(1, depth + 1) + Fraction(1, 1000))
    assert not bad.ok and bad.violator is not None


def test_antichain_is_fully_sparse():
    dom = Domain(5)
    level = [DyadicCube(0, 3, i) for i in range(8)]
    chk = verify_sparse(dom, level, 1)
    assert chk.ok and chk.carleson == 1


def test_mixed_shifts_rejected():
    dom = Domain(4)
    with pytest.raises(ValueError):
        verify_sparse(dom, [TOP, DyadicCube(1, 1, 0)], Fraction(1, 2))
    with pytest.raises(ValueError):
        verify_sparse(dom, [TOP], 0)


def test_family_witnesses_are_valid_and_roundtrip():
    dom = Domain(5)
    tree = full_tree(dom)[:20]
    chk = verify_sparse(dom, tree, 1 / carleson_constant(dom, tree))
    fam = chk.family
    assert fam.check()
    units = np.zeros(dom.n_cells, dtype=int)
    for q in fam.cubes:
        lo, hi = dom.cube_range(q)
        assert fam.witness_measure(q) >= fam.eta * (hi - lo)
        assert np.all((fam.witness_cells(q) >= lo) & (fam.witness_cells(q) < hi))
        units[lo:hi] += fam.witnesses[q]
    assert np.all(units <= fam.unit)
    back = SparseFamily.from_json(fam.to_json())
    assert back.cubes == fam.cubes and back.eta == fam.eta
    assert all(np.array_equal(back.witnesses[q], fam.witnesses[q]) for q in fam.cubes)


@settings(max_examples=60, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 5), st.integers(0, 63)), max_size=30), st.sampled_from([0, 1, 2]))
def test_carleson_lemma_both_ways(raw, shift):
    dom = Domain(5)
    cubes = sorted({DyadicCube(shift, k, i % dom.cube_count(shift, k)) for k, i in raw})
    lam = carleson_constant(dom, cubes)
    assert lam == brute_carleson(dom, cubes)
    if not cubes:
        return
    # Lambda-Carleson implies sparse at 1/Lambda; sparse at eta implies Lambda <= 1/eta
    chk = verify_sparse(dom, cubes, 1 / lam)
    assert chk.ok
    for eta in (Fraction(1, 2), Fraction(1, 3), Fraction(2, 3)):
        if verify_sparse(dom, cubes, eta).ok:
            assert lam <= 1 / eta


def test_sparse_operator_examples():
    dom = Domain(5)
    q = DyadicCube(0, 2, 1)
    chi = GridFunction.indicator(dom, q)
    for r in (0.5, 1, 2):
        assert np.allclose(sparse_operator([q], chi, r).values, chi.values)
    f = rand_gf(5, 1)
    assert np.allclose(sparse_operator([], f).values, 0)
    cubes = full_tree(dom)[:12]
    want = np.zeros(32)
    for c in cubes:
        lo, hi = dom.cube_range(c)
        want[lo:hi] += np.abs(f.values[lo:hi]).mean() ** 2
    assert np.allclose(sparse_operator(cubes, f, 2).values, np.sqrt(want))


def test_orlicz_sparse_examples():
    dom = Domain(5)
    f = rand_gf(5, 2)
    cubes = full_tree(dom)[:10]
    assert np.allclose(orlicz_sparse(cubes, f, power(1)).values, sparse_operator(cubes, f).values, rtol=1e-8)
    c = GridFunction.constant(dom, 2.0)
    q = DyadicCube(0, 1, 0)
    assert np.allclose(orlicz_sparse([q], c, power(2)).values, 2.0 * GridFunction.indicator(dom, q).values, rtol=1e-8)


def test_commutator_sparse_examples():
    dom = Domain(4)
    f = GridFunction.constant(dom, 1.0)
    b = GridFunction.indicator(dom, (0, 8))
    out = commutator_sparse([TOP], b, f)
    assert np.allclose(out.direct.values, 0.5)
    assert np.allclose(out.adjoint.values, 0.5)
    c = commutator_sparse(full_tree(dom), GridFunction.constant(dom, 3.0), rand_gf(4, 3))
    assert np.allclose(c.direct.values, 0) and np.allclose(c.adjoint.values, 0)
    g = rand_gf(4, 4)
    twice = commutator_sparse([TOP], b, GridFunction(2 * np.abs(g.values), dom))
    once = commutator_sparse([TOP], b, g)
    assert np.allclose(twice.direct.values, 2 * once.direct.values)


def test_bilinear_form_examples():
    dom = Domain(4)
    q = DyadicCube(0, 1, 1)
    chi = GridFunction.indicator(dom, q)
    assert bilinear_sparse_form([q], chi, chi, 1, 1) == pytest.approx(0.5)
    f, g = rand_gf(4, 5), rand_gf(4, 6)
    assert bilinear_sparse_form([], f, g, 1, 1) == 0
    cubes = full_tree(dom)[:9]
    want = 0.0
    for c in cubes:
        lo, hi = dom.cube_range(c)
        want += np.mean(np.abs(f.values[lo:hi]) ** 2) ** 0.5 * np.mean(np.abs(g.values[lo:hi]) ** 1.5) ** (1 / 1.5) * (hi - lo) / 16
    assert bilinear_sparse_form(cubes, f, g, 2, 1.5) == pytest.approx(want)


def test_overlap_function():
    dom = Domain(4)
    assert np.all(overlap_function([DyadicCube(0, 2, i) for i in (0, 2)], dom).values <= 1)
    assert np.all(overlap_function(full_tree(dom), dom).values == 5)
    assert np.all(overlap_function([], dom).values == 0)


def test_average_stopping_family_is_sparse():
    for seed in range(5):
        f = rand_gf(7, seed)
        S = average_stopping_family(f, 4)
        assert verify_sparse(f.domain, S, Fraction(3, 4)).ok


def test_extract_ln_examples():
    dom = Domain(4)
    c = extract_ln(GridFunction.constant(dom, 2.0))
    assert len(c.cubes) == 0 and c.holds
    assert np.allclose(c.base.values, 2.0)
    half = extract_ln(GridFunction.indicator(dom, (0, 8)), 1 / 8)
    assert list(half.cubes) == [TOP] and half.ok
    assert half.oscillation[TOP] == 1.0
    with pytest.raises(ValueError):
        extract_ln(GridFunction.constant(dom, 1.0), 0.2)


@pytest.mark.parametrize("shift", [0, 1, 2])
@pytest.mark.parametrize("seed", range(4))
def test_extract_ln_random(shift, seed):
    f = rand_gf(6, seed)
    res = extract_ln(f, 1 / 8, shift)
    assert res.holds
    assert res.check.ok and res.check.family.eta == LN_ETA
    assert np.all(np.abs(f.values - res.base.values) <= res.bound.values + 1e-9)


def test_extract_mq():
    dom = Domain(5)
    zero = extract_mq(VectorFunction.from_array(dom, np.zeros((2, 32))), 2)
    assert all(len(c.family.cubes) == 0 for c in zero.families if c.family is not None)
    one = extract_mq(VectorFunction((GridFunction.indicator(dom, (4, 12)),)), 2)
    assert one.ok and math.isfinite(one.constant)
    consts = []
    for seed in range(3):
        F = VectorFunction.from_array(Domain(6), np.random.default_rng(seed).standard_normal((4, 64)))
        r = extract_mq(F, 2)
        assert r.ok
        assert all(c.family.eta == LN_ETA for c in r.families)
        consts.append(r.constant)
    assert max(consts) <= 3 * min(consts)


def test_extract_bilinear():
    dom = Domain(5)
    f = GridFunction.indicator(dom, (0, 8))
    zero = extract_bilinear(f, GridFunction.zeros(dom), 1.0, 2.0)
    assert len(zero.check.family.cubes) == 0
    same = extract_bilinear(f, f, 1.0, 2.0)
    assert same.ok
    r = extract_bilinear(rand_gf(6, 1), rand_gf(6, 2), 1.2, 2.0)
    assert r.ok and math.isfinite(r.constant)
    assert np.all(r.lhs.values <= r.constant * r.rhs.values * (1 + 1e-9) + 1e-12)


@pytest.mark.parametrize("kernel", ["hilbert", "holder"])
def test_extract_czo(kernel):
    dom = Domain(5)
    T = CZOperator(make_kernel(kernel), dom)
    zero = extract_czo(T, GridFunction.zeros(dom), TOP)
    assert list(zero.cubes) == [TOP]
    cell = extract_czo(T, GridFunction.indicator(dom, (5, 6)), TOP)
    assert cell.ok and math.isfinite(cell.constant)
    assert cell.check.family.eta == CZ_ETA
    assert all(m.family.eta == MAPPED_ETA for m in cell.mapped)
    dom6 = Domain(6)
    T6 = CZOperator(make_kernel(kernel), dom6)
    F = VectorFunction.from_array(dom6, np.random.default_rng(3).standard_normal((2, 64)))
    vec = extract_czo(T6, F, TOP, q=2.0)
    assert vec.ok
    # the sparse bound really dominates |T F|_q on the root cube
    assert np.all(vec.lhs.values <= vec.constant * vec.rhs.values * (1 + 1e-9) + 1e-12)


def test_extract_commutator():
    dom = Domain(5)
    T = CZOperator(make_kernel("hilbert"), dom)
    f = GridFunction.indicator(dom, (7, 8))
    const = extract_commutator(T, GridFunction.constant(dom, 2.0), f, TOP)
    assert np.allclose(const.lhs.values, 0, atol=1e-9)
    left = extract_commutator(T, GridFunction.indicator(dom, (0, 16)), f, TOP)
    assert left.ok and math.isfinite(left.constant)
    rng = np.random.default_rng(4)
    b = GridFunction(rng.standard_normal(32), dom)
    b = GridFunction(b.values / bmo_norm(b, "dyadic0"), dom)
    g = GridFunction(rng.standard_normal(32), dom)
    r = extract_commutator(T, b, g, TOP)
    assert r.ok and math.isfinite(r.constant)
    # the checked left side is |[b, T] g| on the root cube
    assert np.allclose(r.lhs.values, np.abs(commutator(T, b, g).values))
    assert np.all(r.lhs.values <= r.constant * r.rhs.values * (1 + 1e-9) + 1e-12)


def test_overlap_decays_exponentially_for_sparse_families():
    # a sparse family cannot stack many cubes on a large set
    for seed in range(3):
        f = rand_gf(8, seed)
        S = average_stopping_family(f, 4)
        b = overlap_function(S, f.domain).values
        for t in range(1, 12):
            assert np.mean(b > t) <= 4 * math.exp(-0.25 * t) + 1e-12
