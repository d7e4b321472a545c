import numpy as np
import pytest
import scipy.special
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from harvsense import _pykernels, kernels

finite = st.floats(-50, 50, allow_nan=False)


def test_backend_selected():
    assert kernels.BACKEND in kernels.BACKENDS
    assert "python" in kernels.BACKENDS


def test_fresnel_matches_scipy(backend):
    x = np.concatenate([np.linspace(-40, 40, 4001), [0.0, 1.5, -1.5, 1.5 + 1e-12, 1e-9]])
    c, s = backend.fresnel_cs(x)
    s_ref, c_ref = scipy.special.fresnel(x)
    np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-14)
    np.testing.assert_allclose(s, s_ref, rtol=0, atol=1e-14)


def test_fresnel_limits_and_nan(backend):
    c, s = backend.fresnel_cs(np.array([np.inf, -np.inf, np.nan, 1e8]))
    assert c[:2].tolist() == [0.5, -0.5] and s[:2].tolist() == [0.5, -0.5]
    assert np.isnan(c[2]) and np.isnan(s[2])
    assert abs(c[3] - 0.5) < 1e-8 and abs(s[3] - 0.5) < 1e-8


@given(arrays(np.float64, st.integers(1, 40), elements=finite))
def test_fresnel_odd_symmetry(x):
    c, s = kernels.fresnel_cs(x)
    cn, sn = kernels.fresnel_cs(-x)
    np.testing.assert_array_equal(c, -cn)
    np.testing.assert_array_equal(s, -sn)


def test_moving_variance_reference(backend, rng):
    x = rng.standard_normal(500) * 3 + 10
    out = backend.moving_variance(x, 100)
    ref = np.array([np.var(x[i:i + 100], ddof=1) for i in range(401)])
    assert out.shape == (401,)
    np.testing.assert_allclose(out, ref, rtol=1e-10, atol=1e-12)


def test_moving_variance_too_short(backend):
    with pytest.raises(ValueError):
        backend.moving_variance(np.zeros(5), 10)


@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-1e3, 1e3)), st.integers(2, 10))
def test_moving_variance_nonnegative(x, w):
    if x.size < w:
        return
    assert (kernels.moving_variance(x, w) >= -1e-9).all()


def test_im2col_col2im_adjoint(backend, rng):
    x = rng.standard_normal((3, 4, 17))
    cols = backend.im2col1d(x, 5)
    assert cols.shape == (3, 13, 20)
    np.testing.assert_array_equal(cols[1, 2].reshape(4, 5), x[1, :, 2:7])
    g = rng.standard_normal(cols.shape)
    # <im2col(x), g> == <x, col2im(g)>
    lhs = np.sum(cols * g)
    rhs = np.sum(x * backend.col2im1d(g, 4, 5))
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_maxpool_forward_backward(backend):
    x = np.array([[[1.0, 3.0, 2.0, 2.0, 5.0, 4.0, 9.0]]])
    out, idx = backend.maxpool1d_forward(x, 2)
    np.testing.assert_array_equal(out, [[[3.0, 2.0, 5.0]]])
    # offsets within each pool; ties go to the first element, the odd tail is dropped
    np.testing.assert_array_equal(idx, [[[1, 0, 0]]])
    g = backend.maxpool1d_backward(np.array([[[1.0, 2.0, 3.0]]]), idx, 2, 7)
    np.testing.assert_array_equal(g, [[[0, 1, 2, 0, 3, 0, 0]]])


@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled extension not built")
def test_backends_agree(rng):
    cy, py = kernels.BACKENDS["cython"], _pykernels
    x = rng.uniform(-12, 12, 3000)
    for a, b in zip(cy.fresnel_cs(x), py.fresnel_cs(x)):
        np.testing.assert_allclose(a, b, rtol=0, atol=2e-15)
    t = rng.standard_normal(1000)
    np.testing.assert_allclose(cy.moving_variance(t, 77), py.moving_variance(t, 77), rtol=1e-10, atol=1e-13)
    act = rng.standard_normal((5, 3, 31))
    np.testing.assert_array_equal(cy.im2col1d(act, 3), py.im2col1d(act, 3))
    g = rng.standard_normal((5, 29, 9))
    np.testing.assert_allclose(cy.col2im1d(g, 3, 3), py.col2im1d(g, 3, 3), rtol=0, atol=1e-14)
    o1, i1 = cy.maxpool1d_forward(act, 2)
    o2, i2 = py.maxpool1d_forward(act, 2)
    np.testing.assert_array_equal(o1, o2)
    np.testing.assert_array_equal(i1, i2)
    go = rng.standard_normal(o1.shape)
    np.testing.assert_array_equal(cy.maxpool1d_backward(go, i1, 2, 31), py.maxpool1d_backward(go, i2, 2, 31))
