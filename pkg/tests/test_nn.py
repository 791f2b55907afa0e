import numpy as np
import pytest

from difflogic import autodiff as ad
from difflogic import predtensor as pt
from difflogic.nn import AdamState, MLPParams, adam_step, init_mlp, mlp_forward


def test_zero_params_give_half_everywhere():
    params = MLPParams([np.zeros((3, 2))], [np.zeros(2)])
    t = pt.from_values(4, 1, np.random.default_rng(0).random((4, 3)))
    out = np.asarray(mlp_forward(params, t).values)
    np.testing.assert_allclose(out, 0.5)


def test_bias_ln3_gives_three_quarters():
    params = MLPParams([np.zeros((1, 1))], [np.array([np.log(3.0)])])
    t = pt.from_values(3, 1, np.ones((3, 1)))
    out = np.asarray(mlp_forward(params, t).values)
    np.testing.assert_allclose(out, 0.75)


def test_mlp_is_pointwise_local():
    rng = np.random.default_rng(2)
    params = init_mlp(rng, 2, 3)
    base = rng.random((3, 3, 2))
    t1 = pt.from_values(3, 2, base)
    perturbed = base.copy()
    perturbed[0, 2, :] += 0.1  # different tuple than the one probed
    t2 = pt.from_values(3, 2, perturbed)
    o1 = np.asarray(mlp_forward(params, t1).values)
    o2 = np.asarray(mlp_forward(params, t2).values)
    np.testing.assert_array_equal(o1[0, 1], o2[0, 1])
    assert not np.array_equal(o1[0, 2], o2[0, 2])


def test_mlp_width_mismatch():
    rng = np.random.default_rng(0)
    params = init_mlp(rng, 4, 2)
    t = pt.from_values(3, 1, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        mlp_forward(params, t)


def test_mlp_hidden_layer_shapes():
    rng = np.random.default_rng(0)
    params = init_mlp(rng, 5, 3, hidden_layers=1, hidden_width=8)
    assert [w.shape for w in params.weights] == [(5, 8), (8, 3)]
    t = pt.from_values(4, 1, rng.random((4, 5)))
    out = mlp_forward(params, t)
    assert out.channels == 3
    v = np.asarray(out.values)
    assert np.all((v > 0) & (v < 1))


def test_zero_width_input_is_bias_only():
    params = MLPParams([np.zeros((0, 2))], [np.array([0.0, np.log(3.0)])])
    t = pt.from_values(3, 1, np.zeros((3, 0)))
    out = np.asarray(mlp_forward(params, t).values)
    np.testing.assert_allclose(out[:, 0], 0.5)
    np.testing.assert_allclose(out[:, 1], 0.75)


def test_adam_first_step_is_minus_lr():
    state = AdamState(lr=0.005)
    params = {"w": np.zeros(4)}
    assert adam_step(state, params, {"w": np.ones(4)})
    np.testing.assert_allclose(params["w"], -0.005, rtol=1e-6)
    assert state.t == 1


def test_adam_zero_gradient_keeps_params():
    state = AdamState(lr=0.1)
    params = {"w": np.full(3, 1.5)}
    adam_step(state, params, {"w": np.zeros(3)})
    np.testing.assert_array_equal(params["w"], 1.5)
    assert state.t == 1


def scalar_adam_oracle(x0, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Independent single-parameter Adam, written against the update formula."""
    x, m, v = x0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        x -= lr * mhat / (np.sqrt(vhat) + eps)
    return x


def test_adam_two_steps_match_scalar_oracle():
    # quadratic loss 0.5*(x-3)^2, gradient x-3
    state = AdamState(lr=0.05)
    params = {"x": np.array([10.0])}
    grads = []
    for _ in range(2):
        g = params["x"][0] - 3.0
        grads.append(g)
        adam_step(state, params, {"x": np.array([g])})
    expected = scalar_adam_oracle(10.0, grads, 0.05)
    np.testing.assert_allclose(params["x"][0], expected, atol=1e-12)


def test_adam_rejects_non_finite_gradients():
    state = AdamState()
    params = {"w": np.ones(2)}
    assert not adam_step(state, params, {"w": np.array([1.0, np.nan])})
    np.testing.assert_array_equal(params["w"], 1.0)
    assert state.t == 0


def test_init_bound_scales_with_fan_in():
    rng = np.random.default_rng(0)
    params = init_mlp(rng, 100, 50)
    assert np.abs(params.weights[0]).max() <= 0.1
    np.testing.assert_array_equal(params.biases[0], 0.0)


def test_mlp_gradcheck_through_tensor():
    from difflogic.verify import gradcheck
    rng = np.random.default_rng(4)
    t = pt.from_values(3, 2, rng.random((3, 3, 2)))
    probe = rng.uniform(0.5, 1.5, (3, 3, 4))
    init = init_mlp(rng, 2, 4, hidden_layers=1, hidden_width=3)

    def build(p):
        params = MLPParams([p["w0"], p["w1"]], [p["b0"], p["b1"]])
        out = mlp_forward(params, t)
        return ad.sum_all(ad.mul(out.values, probe))

    arrays = {"w0": init.weights[0], "w1": init.weights[1],
              "b0": init.biases[0], "b1": init.biases[1]}
    assert gradcheck(build, arrays) <= 1e-4
