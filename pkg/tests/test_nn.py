import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symrl import nn
from symrl.errors import ContractViolation, NumericError


def affine(in_dim, out_dim):
    return nn.NetworkSpec(in_dim, (("out", out_dim),), hidden=())


def params_from(spec, **blocks):
    return nn.ParameterVector.flatten(blocks, spec.layout())


def test_identity_affine_head_passes_input_through():
    spec = affine(2, 2)
    p = params_from(spec, **{"head.out.W": np.eye(2), "head.out.b": np.zeros(2)})
    np.testing.assert_array_equal(nn.forward(spec, p, [1.0, 2.0])["out"], [1.0, 2.0])


def test_zero_parameters_give_zero_outputs():
    spec = nn.NetworkSpec(3, (("a", 2), ("b", 1)))
    out = nn.forward(spec, nn.zeros(spec), np.array([0.3, -2.0, 5.0]))
    assert not out["a"].any() and not out["b"].any()


def test_hand_matrix_multiply():
    spec = affine(2, 2)
    p = params_from(spec, **{"head.out.W": [[1, 0], [0, 1]], "head.out.b": [0.5, -0.5]})
    np.testing.assert_allclose(nn.forward(spec, p, [1, 1])["out"], [1.5, 0.5])


def test_affine_backward_by_hand():
    spec = affine(2, 1)
    p = params_from(spec, **{"head.out.W": [[0.3, -0.7]], "head.out.b": [0.1]})
    g = nn.backward(spec, p, [1.0, 2.0], {"out": [1.0]})
    np.testing.assert_array_equal(g.block("head.out.W"), [[1.0, 2.0]])
    np.testing.assert_array_equal(g.block("head.out.b"), [1.0])


def test_zero_head_gradient_gives_zero_parameter_gradient():
    spec = nn.NetworkSpec(3, (("a", 2),), ((4, "tanh"),))
    p = nn.init_params(spec, np.random.default_rng(0))
    g = nn.backward(spec, p, np.ones(3), {"a": np.zeros(2)})
    assert not g.values.any()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), batch=st.integers(1, 5), width=st.integers(1, 6))
def test_backward_matches_finite_differences(seed, batch, width):
    rng = np.random.default_rng(seed)
    spec = nn.NetworkSpec(3, (("a", 3), ("v", 1)), ((width, "tanh"), (4, "tanh")))
    p = nn.init_params(spec, rng, head_gains={"a": 0.5})
    x = rng.normal(size=(batch, 3))
    ga, gv = rng.normal(size=(batch, 3)), rng.normal(size=(batch, 1))

    def loss(q):
        out = nn.forward(spec, q, x)
        return float((out["a"] * ga).sum() + (out["v"] * gv).sum())

    analytic = nn.backward(spec, p, x, {"a": ga, "v": gv})
    numeric = nn.finite_difference_gradient(loss, p, step=1e-6)
    assert nn.compare_gradients(analytic, numeric, floor=1e-6).max_rel_diff <= 1e-4


def test_batch_rows_match_single_inputs():
    spec = nn.NetworkSpec(2, (("a", 3),), ((5, "tanh"),))
    p = nn.init_params(spec, np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(4, 2))
    batched = nn.forward(spec, p, x)["a"]
    for row in range(4):
        np.testing.assert_allclose(batched[row], nn.forward(spec, p, x[row])["a"], rtol=0, atol=1e-15)


def test_finite_difference_square():
    spec = affine(1, 1)
    theta = nn.ParameterVector(np.array([3.0, 0.0]), spec.layout())
    g = nn.finite_difference_gradient(lambda q: float(q.values[0] ** 2), theta)
    assert abs(g.values[0] - 6.0) < 1e-6


def test_finite_difference_product_rule():
    spec = affine(1, 1)
    theta = nn.ParameterVector(np.array([2.0, 5.0]), spec.layout())
    g = nn.finite_difference_gradient(lambda q: float(q.values[0] * q.values[1]), theta)
    np.testing.assert_allclose(g.values, [5.0, 2.0], atol=1e-6)


def test_finite_difference_constant_is_zero():
    spec = affine(2, 2)
    g = nn.finite_difference_gradient(lambda q: 4.0, nn.zeros(spec))
    assert not g.values.any()


def test_finite_difference_rejects_non_finite_loss():
    spec = affine(1, 1)
    with pytest.raises(NumericError):
        nn.finite_difference_gradient(lambda q: float("nan"), nn.zeros(spec))


def test_flatten_unflatten_round_trip():
    spec = nn.NetworkSpec(3, (("a", 2),), ((4, "tanh"),))
    p = nn.init_params(spec, np.random.default_rng(3))
    again = nn.ParameterVector.flatten(p.unflatten(), spec.layout())
    np.testing.assert_array_equal(p.values, again.values)
    assert spec.num_params == 4 * 3 + 4 + 2 * 4 + 2 == len(p)


def test_orthogonal_init_with_gain():
    spec = nn.NetworkSpec(8, (("pi", 3),), ((16, "tanh"),))
    p = nn.init_params(spec, np.random.default_rng(4), hidden_gain=1.0, head_gains={"pi": 0.01})
    W = p.block("hidden0.W")
    np.testing.assert_allclose(W.T @ W, np.eye(8), atol=1e-12)
    H = p.block("head.pi.W")
    np.testing.assert_allclose(H @ H.T, 1e-4 * np.eye(3), atol=1e-15)
    assert not p.block("hidden0.b").any()


def test_layout_mismatch_and_bad_inputs():
    spec = affine(2, 2)
    with pytest.raises(ContractViolation):
        nn.ParameterVector(np.zeros(5), spec.layout())
    with pytest.raises(ContractViolation):
        nn.forward(spec, nn.zeros(spec), np.zeros(3))
    with pytest.raises(ContractViolation):
        nn.forward(affine(2, 3), nn.zeros(spec), np.zeros(2))
    with pytest.raises(ContractViolation):
        nn.NetworkSpec(2, (("a", 1), ("a", 2)))


def test_adam_first_step_is_lr_times_sign():
    opt = nn.Adam(3, lr=0.1)
    step = opt.direction(np.array([2.0, -0.5, 0.0]))
    np.testing.assert_allclose(step, [0.1, -0.1, 0.0], atol=1e-8)


def test_clip_by_global_norm():
    g, norm = nn.clip_by_global_norm(np.array([3.0, 4.0]), 1.0)
    assert norm == 5.0
    np.testing.assert_allclose(g, [0.6, 0.8])
    same, _ = nn.clip_by_global_norm(np.array([0.3, 0.4]), 1.0)
    np.testing.assert_array_equal(same, [0.3, 0.4])
