"""Engine-level gradient checks: every op against central finite differences."""

import numpy as np
import pytest

from matlight import autodiff as ad


def fd_gradient(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar-valued fn w.r.t. every entry of x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = fn()
        flat[i] = old - h
        fm = fn()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def check_op(build, x: np.ndarray, h: float = 1e-6, rtol: float = 1e-5):
    """build(tensor) -> Tensor; compares backward() against finite differences."""
    leaf = ad.parameter(x)

    def scalar():
        return float(ad.value(ad.sum_(build(leaf))))

    out = ad.sum_(build(leaf))
    ad.backward(out)
    analytic = leaf.grad.copy()
    numeric = fd_gradient(scalar, leaf.data, h=h)
    np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=1e-7)


@pytest.mark.parametrize("name,build,domain", [
    ("add", lambda t: t + np.arange(6.0).reshape(2, 3), "any"),
    ("radd", lambda t: 2.5 + t, "any"),
    ("sub", lambda t: t - 1.5, "any"),
    ("rsub", lambda t: 1.5 - t, "any"),
    ("mul", lambda t: t * np.linspace(-1, 1, 6).reshape(2, 3), "any"),
    ("div", lambda t: t / np.linspace(1, 2, 6).reshape(2, 3), "any"),
    ("rdiv", lambda t: 1.0 / t, "positive"),
    ("neg", lambda t: -t, "any"),
    ("power", lambda t: t ** 3, "any"),
    ("exp", lambda t: ad.exp(t), "any"),
    ("log", lambda t: ad.log(t), "positive"),
    ("sqrt", lambda t: ad.sqrt(t), "positive"),
    ("sigmoid", lambda t: ad.sigmoid(t), "any"),
    ("sine", lambda t: ad.sine(t, omega=3.0), "any"),
    ("cosine", lambda t: ad.cosine(t, omega=2.0), "any"),
    ("absolute", lambda t: ad.absolute(t), "nonzero"),
    ("maximum", lambda t: ad.maximum(t, 0.1), "nonzero"),
    ("clip", lambda t: ad.clip(t, -0.5, 0.5), "off_edges"),
    ("mean", lambda t: ad.mean_(t), "any"),
    ("sum_axis", lambda t: ad.sum_(t, axis=0), "any"),
    ("mean_axis", lambda t: ad.mean_(t, axis=1), "any"),
    ("reshape", lambda t: ad.reshape(t, (3, 2)), "any"),
    ("slice", lambda t: ad.slice_cols(t, 1, 3), "any"),
    ("l2norm", lambda t: ad.l2norm_last(t), "nonzero"),
])
def test_elementwise_gradients(name, build, domain, rng):
    x = rng.normal(size=(2, 3))
    if domain == "positive":
        x = np.abs(x) + 0.5
    elif domain == "nonzero":
        x = np.where(np.abs(x) < 0.2, 0.3, x)
    elif domain == "off_edges":
        x = np.clip(x, -0.45, 0.45) * 0.8
    check_op(build, x)


def test_matmul_gradients(rng):
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(3, 5))
    check_op(lambda t: ad.matmul(t, b), a.copy())
    check_op(lambda t: ad.matmul(a, t), b.copy())


def test_matmul_shape_mismatch_is_hard_failure(rng):
    with pytest.raises(ValueError, match="matmul shape mismatch"):
        ad.matmul(ad.parameter(rng.normal(size=(2, 3))), rng.normal(size=(2, 3)))


def test_concat_gradients(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(2, 2))
    leaf_a, leaf_b = ad.parameter(a.copy()), ad.parameter(b.copy())
    out = ad.sum_(ad.concat([leaf_a, leaf_b], axis=-1) * np.arange(10.0).reshape(2, 5))
    ad.backward(out)
    np.testing.assert_allclose(leaf_a.grad, np.arange(10.0).reshape(2, 5)[:, :3])
    np.testing.assert_allclose(leaf_b.grad, np.arange(10.0).reshape(2, 5)[:, 3:])


def test_sine_and_deriv_gradients(rng):
    x = rng.normal(size=(2, 3))
    check_op(lambda t: ad.sine_and_deriv(t, omega=2.5)[0], x.copy())
    check_op(lambda t: ad.sine_and_deriv(t, omega=2.5)[1], x.copy())


def test_broadcast_gradients(rng):
    col = rng.normal(size=(4, 1))
    full = rng.normal(size=(4, 3))
    check_op(lambda t: t * full, col.copy())
    check_op(lambda t: full / (t + 2.0), col.copy())
    row = rng.normal(size=(3,))
    check_op(lambda t: t + full, row.copy())


def test_env_lookup_gradients(rng):
    grid = rng.random((4, 8, 3))
    dirs = rng.normal(size=(16, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    check_op(lambda t: ad.env_lookup(t, dirs), grid.copy(), h=1e-6)


def test_exp_clip_keeps_values_finite():
    t = ad.parameter(np.array([0.0, 50.0, 500.0], dtype=np.float32))
    out = ad.exp(t, clip_max=80.0)
    assert np.all(np.isfinite(ad.value(out)))
    ad.backward(ad.sum_(out))
    assert t.grad[2] == 0.0  # saturated entry
    assert t.grad[0] == pytest.approx(1.0)


def test_constants_stay_constant(rng):
    x = rng.normal(size=(3, 3))
    out = ad.exp(x) + np.sin(x)
    assert isinstance(out, np.ndarray)  # no Tensor leaked in


def test_gradient_of_sum_of_params_is_ones(rng):
    p = ad.parameter(rng.normal(size=(5,)))
    ad.backward(ad.sum_(p))
    np.testing.assert_array_equal(p.grad, np.ones(5))


def test_zero_scaled_network_has_zero_gradients(rng):
    p = ad.parameter(rng.normal(size=(4, 4)))
    out = ad.sum_(ad.sigmoid(ad.matmul(np.eye(4), p))) * 0.0
    ad.backward(out)
    np.testing.assert_array_equal(p.grad, np.zeros((4, 4)))


def test_grad_accumulates_across_reuse(rng):
    p = ad.parameter(np.array([2.0]))
    out = p * p  # dp = 2p through two branches of the product rule
    ad.backward(ad.sum_(out))
    np.testing.assert_allclose(p.grad, [4.0])


def test_backward_requires_scalar(rng):
    p = ad.parameter(rng.normal(size=(3,)))
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(p * 2.0)


def test_backward_detects_nonfinite_gradients():
    p = ad.parameter(np.array([0.0]))
    out = ad.sum_(ad.log(ad.absolute(p)))  # grad 1/0 at p=0
    with pytest.raises(ad.GradientError):
        ad.backward(out, check_finite=True)


def test_float32_graph_stays_float32(rng):
    p = ad.parameter(rng.normal(size=(3, 3)).astype(np.float32))
    out = ad.exp(p * 2.0 + 1.0) / 3.0 - 0.5
    assert ad.value(out).dtype == np.float32
    ad.backward(ad.mean_(out))
    assert p.grad.dtype == np.float32


def test_l2norm_zero_input_zero_forward_and_finite_backward():
    p = ad.parameter(np.zeros((3, 3)))
    out = ad.l2norm_last(p)
    assert np.all(ad.value(out) == 0.0)
    ad.backward(ad.sum_(out))
    assert np.all(np.isfinite(p.grad))
