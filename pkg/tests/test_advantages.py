import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symrl.advantages import GaeConfig, compute_gae, normalize_advantages, predicted_flips, sign_flip_rate
from symrl.errors import ContractViolation


def brute_gae(r, v, bootstrap, dones, gamma, lam):
    """Sum of discounted TD residuals, cut at episode ends."""
    T = len(r)
    nxt = np.append(v[1:], bootstrap)
    delta = r + gamma * nxt * (1 - dones) - v
    adv = np.zeros(T)
    for t in range(T):
        weight = 1.0
        for s in range(t, T):
            adv[t] += weight * delta[s]
            if dones[s]:
                break
            weight *= gamma * lam
    return adv


def test_zero_rewards_and_values():
    est = compute_gae(np.zeros(5), np.zeros(5), 0.0, np.zeros(5))
    assert not est.raw.any()


def test_two_step_hand_example():
    est = compute_gae([1.0, 1.0], [0.5, 0.5], 0.5, [0, 0], GaeConfig(gamma=0.99, lam=0.95))
    np.testing.assert_allclose(est.raw, [1.9308, 0.995], atol=1e-4)
    np.testing.assert_allclose(est.returns, est.raw + 0.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), T=st.integers(1, 12), gamma=st.floats(0, 1), lam=st.floats(0, 1))
def test_recursion_matches_brute_sum(seed, T, gamma, lam):
    rng = np.random.default_rng(seed)
    r, v = rng.normal(size=T), rng.normal(size=T)
    dones = (rng.random(T) < 0.2).astype(float)
    boot = rng.normal()
    est = compute_gae(r, v, boot, dones, GaeConfig(gamma=gamma, lam=lam))
    np.testing.assert_allclose(est.raw, brute_gae(r, v, boot, dones, gamma, lam), rtol=1e-10, atol=1e-10)


def test_env_axis_is_independent_columns():
    rng = np.random.default_rng(2)
    r, v = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    dones = np.zeros((6, 3))
    dones[2, 1] = 1
    boot = rng.normal(size=3)
    est = compute_gae(r, v, boot, dones)
    for n in range(3):
        col = compute_gae(r[:, n], v[:, n], boot[n], dones[:, n])
        np.testing.assert_allclose(est.raw[:, n], col.raw)


def test_normalization_example():
    normalized, rate = normalize_advantages([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(normalized, [-1.342, -0.447, 0.447, 1.342], atol=1e-3)
    assert rate == 0.5


def test_symmetric_batch_has_no_flips():
    normalized, rate = normalize_advantages([-2.0, 2.0])
    np.testing.assert_allclose(normalized, [-1.0, 1.0], atol=1e-8)
    assert rate == 0.0


def test_all_equal_batch_counts_every_nonzero_entry():
    normalized, rate = normalize_advantages([3.0, 3.0, 3.0])
    assert not normalized.any() and rate == 1.0
    _, zero_rate = normalize_advantages([0.0, 0.0])
    assert zero_rate == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40))
def test_predicted_flips_match_direct_count(raw):
    raw = np.array(raw)
    normalized, rate = normalize_advantages(raw)
    pred = predicted_flips(raw)
    nonzero = raw != 0
    if np.ptp(raw) > 1e-6 * max(1.0, np.abs(raw).max()):
        direct = (np.sign(raw) != np.sign(normalized)) & nonzero
        np.testing.assert_array_equal(pred, direct)
    if nonzero.any():
        assert rate == pytest.approx(sign_flip_rate(raw, normalized))


def test_gae_contracts():
    with pytest.raises(ContractViolation):
        compute_gae(np.zeros(3), np.zeros(2), 0.0, np.zeros(3))
    with pytest.raises(ContractViolation):
        GaeConfig(gamma=1.5)
    with pytest.raises(ContractViolation):
        normalize_advantages([1.0])


def test_compute_gae_normalize_flag():
    est = compute_gae([1.0, 0.0, 2.0], [0.0, 0.0, 0.0], 0.0, [0, 0, 1], GaeConfig(normalize=True))
    assert est.normalized is not None and est.sign_flip_rate is not None
    assert abs(est.normalized.mean()) < 1e-12
