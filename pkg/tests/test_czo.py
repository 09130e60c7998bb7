import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparselab.czo import (
    CZOperator,
    Kernel,
    Modulus,
    apply,
    commutator,
    dini_norms,
    hilbert_kernel,
    holder,
    holder_kernel,
    kernel_mean_oscillation,
    lipschitz,
    make_kernel,
    maximal_truncation,
    operator_norm,
    sampled_modulus,
    truncated,
    vector_apply,
    vector_commutator,
    vector_maximal_truncation,
)
from sparselab.dyadic import Domain
from sparselab.signal import GridFunction, VectorFunction


def op(depth, kernel="hilbert"):
    return CZOperator(make_kernel(kernel), Domain(depth))


def rand(depth, seed):
    return GridFunction(np.random.default_rng(seed).standard_normal(2**depth), Domain(depth))


def test_single_cell_example():
    T = op(2)
    f = GridFunction.indicator(T.domain, (0, 1))
    assert apply(T, f).values[2] == pytest.approx(0.5)
    assert np.allclose(apply(T, GridFunction.zeros(T.domain)).values, 0)


@pytest.mark.parametrize("kernel", ["hilbert", "holder"])
def test_antisymmetry_is_exact(kernel):
    T = op(7, kernel)
    f, g = rand(7, 1), rand(7, 2)
    h = T.domain.cell_measure
    s = np.dot(apply(T, f).values, g.values) * h + np.dot(f.values, apply(T, g).values) * h
    assert abs(s) < 1e-12


def brute_tstar(T, v):
    x = T.domain.midpoints
    dist = np.abs(x[:, None] - x[None, :])
    # every distinct pairwise distance is a breakpoint
    eps_list = sorted(set(np.round(dist.ravel(), 12)))
    best = np.zeros(v.size)
    for e in [e / 2 for e in eps_list if e > 0] + [e for e in eps_list if e > 0]:
        best = np.maximum(best, np.abs((T.matrix * (dist > e)) @ v))
    return best


def test_maximal_truncation_matches_breakpoints():
    T = op(6)
    f = rand(6, 3)
    got = maximal_truncation(T, f).values
    assert np.allclose(got, brute_tstar(T, f.values), rtol=1e-10, atol=1e-12)
    for eps in (0.01, 0.1, 0.3):
        assert np.all(got >= np.abs(truncated(T, f, eps).values) - 1e-12)


def test_truncation_beyond_support_is_zero():
    T = op(5)
    f = GridFunction.indicator(T.domain, (0, 4))
    assert np.allclose(truncated(T, f, 2.0).values, 0)


def test_commutator_examples():
    T = op(6)
    f, b = rand(6, 4), rand(6, 5)
    c = GridFunction.constant(T.domain, 3.0)
    assert np.allclose(commutator(T, c, f).values, 0, atol=1e-12)
    assert np.allclose(commutator(T, b, GridFunction.zeros(T.domain)).values, 0)
    shifted = GridFunction(b.values - b.values[10:30].mean(), T.domain)
    assert np.allclose(commutator(T, b, f).values, commutator(T, shifted, f).values, atol=1e-10)


def test_vector_variants():
    T = op(5)
    f = rand(5, 6)
    F1 = VectorFunction((f,))
    assert np.allclose(vector_apply(T, F1, 2).values, np.abs(apply(T, f).values))
    F3 = VectorFunction((f, f, f))
    assert np.allclose(vector_apply(T, F3, 2).values, math.sqrt(3) * np.abs(apply(T, f).values))
    rng = np.random.default_rng(7)
    arr = rng.standard_normal((3, 32))
    F = VectorFunction.from_array(T.domain, arr)
    comps = np.array([apply(T, GridFunction(r, T.domain)).values for r in arr])
    assert np.allclose(vector_apply(T, F, 3).values, np.sum(np.abs(comps) ** 3, axis=0) ** (1 / 3))
    tstar = np.array([maximal_truncation(T, GridFunction(r, T.domain)).values for r in arr])
    assert np.allclose(vector_maximal_truncation(T, F, 2).values, np.sqrt(np.sum(tstar**2, axis=0)))
    b = rand(5, 8)
    cm = np.array([commutator(T, b, GridFunction(r, T.domain)).values for r in arr])
    assert np.allclose(vector_commutator(T, b, F, 2).values, np.sqrt(np.sum(cm**2, axis=0)))
    with pytest.raises(ValueError):
        vector_apply(T, F, 1.0)


def test_dini_norms_closed_forms():
    d = dini_norms(lipschitz(1.0))
    assert d.dini == pytest.approx(1.0, rel=1e-8) and d.log_dini == pytest.approx(1.0, rel=1e-8)
    d = dini_norms(holder(1.0, 0.5))
    assert d.dini == pytest.approx(2.0, rel=1e-8) and d.log_dini == pytest.approx(4.0, rel=1e-8)
    z = dini_norms(lipschitz(0.0))
    assert z.dini == 0 and z.log_dini == 0
    assert d.ordered


def test_non_dini_modulus_rejected():
    with pytest.raises(ValueError):
        dini_norms(Modulus("loglike", (), lambda t: 1.0 / np.log(np.e / t)))
    ramp = dini_norms(sampled_modulus([0.5, 1.0], [0.5, 0.5]))
    assert ramp.dini == pytest.approx(0.5 + 0.5 * math.log(2), rel=1e-6)


def test_kernel_mean_oscillation():
    dom = Domain(6)
    T = op(6)
    B = (0, 16)  # [0, 0.25)
    y = 1.0
    val = kernel_mean_oscillation(T, B, y)
    xs = dom.midpoints[0:16]
    k = 1.0 / (xs - y)
    assert val == pytest.approx(np.abs(k[:, None] - k[None, :]).mean())
    r, x0 = 0.125, 0.125
    assert val <= 2 * r / abs(x0 - y) ** 2
    # shrinking the ball drives the oscillation down
    vals = [kernel_mean_oscillation(T, (0, m), y) for m in (16, 8, 4, 2)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    const = CZOperator(Kernel("const", lambda x, y: np.ones_like(x), 1.0, lipschitz(0.0)), dom)
    assert kernel_mean_oscillation(const, B, y) == 0.0
    with pytest.raises(ValueError):
        kernel_mean_oscillation(T, B, 0.2)


def test_operator_norm_against_svd():
    T = op(7)
    assert T.l2_norm == pytest.approx(float(np.linalg.svd(T.matrix, compute_uv=False)[0]), rel=1e-6)
    assert T.constant == pytest.approx(1.0 + 4.0 + T.l2_norm)
    m = np.diag([3.0, 1.0, 2.0])
    assert operator_norm(m) == pytest.approx(3.0, rel=1e-6)


def test_kernel_registry():
    assert make_kernel("hilbert").name == "hilbert"
    assert holder_kernel().size_constant == 1.0
    assert hilbert_kernel().norms.dini == pytest.approx(4.0)
    with pytest.raises(ValueError):
        make_kernel("nope")


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_apply_is_linear(a, b):
    T = op(5)
    f, g = rand(5, 9), rand(5, 10)
    lhs = apply(T, GridFunction(a * f.values + b * g.values, T.domain)).values
    rhs = a * apply(T, f).values + b * apply(T, g).values
    assert np.allclose(lhs, rhs, atol=1e-9)
