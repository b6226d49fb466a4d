import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exlab.defenses.active import (
    NoiseConfig,
    PoisonConfig,
    attacker_grad,
    jacobian,
    legit_grad,
    perturb_if_similar,
    perturb_noise,
    poison,
)
from exlab.defenses.detect import Verdict
from exlab.exceptions import DimensionError, ParameterError
from exlab.linear_eval import LinearProbe
from exlab.nn import DenseLayer, Network, build_mlp


def _surrogates(seed=0, d_in=6, n=4, k=3):
    rng = np.random.default_rng(seed)
    F = build_mlp([d_in, 8, n], rng)
    G = build_mlp([n, k], rng)
    return F, G, rng.normal(size=d_in)


def test_noise_is_identity_at_zero():
    y = np.arange(5.0)
    out = perturb_noise(y, NoiseConfig(0.0, 0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(out, y)
    assert out is not y


def test_noise_moments():
    rng = np.random.default_rng(1)
    draws = perturb_noise(np.zeros(10_000), NoiseConfig(10.0, 1.0), rng)
    assert 9.9 <= draws.mean() <= 10.1
    assert abs(draws.std() - 1.0) < 0.03
    big = perturb_noise(np.zeros(100_000), NoiseConfig(10.0, 1.0), rng)
    assert abs(big.mean() - 10.0) < 0.1  # 1% of the mean


def test_negative_sigma_rejected():
    with pytest.raises(ParameterError):
        NoiseConfig(0.0, -1.0)


def test_perturb_if_similar():
    y = np.ones(4)
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(perturb_if_similar(y, Verdict(False, None, None), NoiseConfig(100, 1), rng), y)
    replaced = perturb_if_similar(y, Verdict(True, 0, 0.0), NoiseConfig(100.0, 1.0), rng)
    assert replaced.shape == y.shape
    assert np.all(replaced > 90)


def test_attacker_grad_vanishes_at_own_output():
    F, _, x = _surrogates()
    np.testing.assert_array_equal(attacker_grad(F, x, F(x[None, :])[0]), 0.0)


def test_attacker_grad_one_parameter_case():
    # F(x) = w x with a single weight and zero bias: grad of -(w x - t)^2 is -2 x (w x - t)
    F = Network([DenseLayer(np.array([[3.0]]), np.array([0.0]), "identity")])
    g = attacker_grad(F, np.array([2.0]), np.array([1.0]))
    np.testing.assert_allclose(g, [-2 * 2.0 * (6.0 - 1.0), -2 * (6.0 - 1.0)])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_attacker_grad_closed_form_matches_autodiff(seed):
    F, _, x = _surrogates(seed)
    target = np.random.default_rng(seed + 1).normal(size=F.output_dim)
    closed = attacker_grad(F, x, target)
    auto = attacker_grad(F, x, target, method="autodiff")
    assert np.max(np.abs(closed - auto)) < 1e-10


def test_jacobian_matches_finite_differences():
    F, _, x = _surrogates(3)
    J = jacobian(F, x)
    h = 1e-6
    cols = []
    for arr in F.params():
        for i in np.ndindex(arr.shape):
            orig = arr[i]
            arr[i] = orig + h
            f_up = F(x[None, :])[0]
            arr[i] = orig - h
            f_down = F(x[None, :])[0]
            arr[i] = orig
            cols.append((f_up - f_down) / (2 * h))
    np.testing.assert_allclose(J, np.stack(cols, axis=1), atol=1e-7)


def test_legit_grad_hand_case():
    # two classes, zero weights: p = (0.5, 0.5), target class 0, r = (0.5, -0.5)
    G = Network([DenseLayer(np.zeros((2, 2)), np.zeros(2), "identity")])
    g = legit_grad(G, np.array([1.0, 2.0]), 0)
    np.testing.assert_allclose(g, [0.5, 1.0, -0.5, -1.0, 0.5, -0.5])


@pytest.mark.parametrize("target", [1, np.array([0.2, 0.5, 0.3])])
def test_legit_grad_closed_form_matches_autodiff(target):
    _, G, _ = _surrogates(2)
    y = np.random.default_rng(5).normal(size=G.input_dim)
    np.testing.assert_allclose(legit_grad(G, y, target), legit_grad(G, y, target, "autodiff"), atol=1e-12)


def test_legit_grad_through_standardized_probe():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, size=(60, 4))
    probe = LinearProbe(None, epochs=2, standardize=True).fit(X, np.arange(60) % 3)
    y = X[0]
    np.testing.assert_allclose(legit_grad(probe, y, 2), legit_grad(probe, y, 2, "autodiff"), atol=1e-12)


def test_legit_grad_rejects_deep_classifier():
    G = build_mlp([4, 5, 3], np.random.default_rng(0))
    with pytest.raises(ParameterError):
        legit_grad(G, np.zeros(4), 0)


def test_poison_first_step_is_unperturbed():
    F, G, x = _surrogates()
    y_v = F(x[None, :])[0] + 0.3
    result = poison(y_v, x, PoisonConfig(F, G, 1, epsilon=0.5, steps=20))
    first = result.trace[0]
    assert first.sim_ab == pytest.approx(1.0) and first.sim_cd == pytest.approx(1.0)
    assert first.radius == 0.0


def test_poison_stays_in_ball_and_lowers_objective():
    F, G, x = _surrogates(1)
    y_v = F(x[None, :])[0] + 0.3
    cfg = PoisonConfig(F, G, 0, epsilon=1.0, steps=100, seed=2)
    result = poison(y_v, x, cfg)
    assert all(step.radius <= cfg.epsilon * (1 + 1e-12) for step in result.trace)
    assert np.linalg.norm(result.y_tilde - y_v) <= cfg.epsilon * (1 + 1e-12)
    assert result.objective < result.trace[0].objective
    assert result.sim_ab < 1.0


def test_tiny_epsilon_returns_clean_output():
    F, G, x = _surrogates(4)
    y_v = F(x[None, :])[0] + 0.3
    result = poison(y_v, x, PoisonConfig(F, G, 0, epsilon=1e-12, steps=5))
    np.testing.assert_allclose(result.y_tilde, y_v, atol=1e-11)


def test_poison_is_seeded():
    F, G, x = _surrogates(6)
    y_v = F(x[None, :])[0] + 0.3
    a = poison(y_v, x, PoisonConfig(F, G, 0, steps=10, seed=1))
    b = poison(y_v, x, PoisonConfig(F, G, 0, steps=10, seed=1))
    np.testing.assert_array_equal(a.y_tilde, b.y_tilde)


def test_poison_validation():
    F, G, x = _surrogates()
    with pytest.raises(ParameterError):
        PoisonConfig(F, G, 0, epsilon=0.0)
    with pytest.raises(ParameterError):
        PoisonConfig(F, G, 0, steps=0)
    with pytest.raises(DimensionError):
        poison(np.zeros(F.output_dim + 1), x, PoisonConfig(F, G, 0))
    with pytest.raises(ParameterError):
        legit_grad(G, np.zeros(G.input_dim), 7)
