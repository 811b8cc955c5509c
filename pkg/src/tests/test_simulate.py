import numpy as np
import pytest

from ncqar.distributions import DistributionSpec, quantile, sample_uniform
from ncqar.errors import ConfigurationError, ParameterDomainError, StationarityError
from ncqar.simulate import (
    MarSpec,
    RegimeSpec,
    SimConfig,
    check_stationary,
    innovations,
    ma_coefficients,
    polynomial_roots,
    simulate_mar,
    simulate_mar_matrix,
    simulate_mar_recursive,
    simulate_two_regime,
    solve_mar_matrix,
    solve_mar_recursive,
)

MAR11 = MarSpec(pi=(0.8,), phi=(0.6,))


@pytest.mark.parametrize("seed", range(50))
def test_matrix_and_recursive_paths_agree(seed: int):
    cfg = SimConfig(total_length=800, seed=seed, burn_in=200, innovation=DistributionSpec.student_t(3))
    matrix = simulate_mar_matrix(MAR11, cfg)
    recursive = simulate_mar_recursive(MAR11, cfg)
    assert matrix.shape == recursive.shape == (400,)
    gap = np.max(np.abs(matrix - recursive))
    assert gap < 1e-9, f"seed {seed}: methods differ by {gap!r}"


@pytest.mark.parametrize(
    "spec",
    [MarSpec(), MarSpec(pi=(0.5,)), MarSpec(phi=(0.9,)), MAR11, MarSpec(pi=(0.5, 0.2), phi=(0.3, -0.2))],
)
def test_zero_innovations_give_zero_path(spec: MarSpec):
    assert not np.any(solve_mar_matrix(spec, np.zeros(300)))
    assert not np.any(solve_mar_recursive(spec, np.zeros(300)))


def test_noncausal_impulse_at_start():
    eps = np.zeros(100)
    eps[0] = 1.0
    y = solve_mar_matrix(MarSpec(phi=(0.6,)), eps)
    # y_t = sum_j 0.6^j eps_{t+j} only sees the impulse at t = 0
    assert y[0] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(y[1:])) < 1e-9


def test_noncausal_path_matches_forward_sum():
    eps = np.random.default_rng(1).standard_normal(400)
    y = solve_mar_matrix(MarSpec(phi=(0.6,)), eps)
    weights = 0.6 ** np.arange(60)
    for t in (10, 150, 300):
        expected = np.dot(weights, eps[t : t + 60])
        assert y[t] == pytest.approx(expected, abs=1e-9), f"y[{t}] = {y[t]!r}, forward sum {expected!r}"


def test_causal_recursion_holds_exactly():
    spec = MarSpec(pi=(0.5,), intercept=1.0)
    cfg = SimConfig(total_length=600, seed=11, burn_in=200)
    y = simulate_mar_recursive(spec, cfg)
    eps = innovations(cfg)[200:400]
    residual = y[1:] - 1.0 - 0.5 * y[:-1] - eps[1:]
    assert np.max(np.abs(residual)) < 1e-12


def test_steady_state_with_intercept():
    spec = MarSpec(pi=(0.5,), phi=(0.6,), intercept=1.0)
    for y in (solve_mar_recursive(spec, np.zeros(1000)), solve_mar_matrix(spec, np.zeros(1000))):
        # 1 / (pi(1) phi(1)) = 1 / (0.5 * 0.4)
        assert y[500] == pytest.approx(5.0, abs=1e-9)


def test_simulate_dispatch_and_determinism():
    cfg = SimConfig(total_length=500, seed=3, burn_in=100)
    first = simulate_mar(MAR11, cfg, "matrix")
    assert np.array_equal(first, simulate_mar(MAR11, cfg, "matrix"))
    assert np.allclose(first, simulate_mar(MAR11, cfg, "recursive"), atol=1e-9)
    with pytest.raises(ConfigurationError):
        simulate_mar(MAR11, cfg, "spectral")


@pytest.mark.parametrize("total_length,burn_in", [(400, 200), (401, 200), (10, 5)])
def test_too_short_buffer(total_length: int, burn_in: int):
    with pytest.raises(ConfigurationError):
        simulate_mar_matrix(MAR11, SimConfig(total_length=total_length, seed=0, burn_in=burn_in))


@pytest.mark.parametrize(
    "pi,phi,offender",
    [((1.0,), (), "pi"), ((), (-1.2,), "phi"), ((0.5, 0.5), (), "pi"), ((0.3,), (0.7, 0.3), "phi")],
)
def test_non_stationary_polynomials(pi, phi, offender: str):
    with pytest.raises(StationarityError) as error:
        MarSpec(pi=pi, phi=phi)
    assert error.value.polynomial == offender
    assert error.value.modulus >= 1.0 - 1e-10


def test_stationary_polynomials_pass():
    check_stationary((0.5, 0.2), (0.9,))
    roots = polynomial_roots([0.5])
    assert roots == pytest.approx([2.0])


def test_two_regime_collapses_to_single_coefficient():
    regime = RegimeSpec(0.4, 0.7, 0.7, DistributionSpec.student_t(3))
    cfg = SimConfig(total_length=700, seed=5, burn_in=200)
    y = simulate_two_regime(regime, cfg)
    shocks = quantile(DistributionSpec.student_t(3), sample_uniform(700, 5))[200:500]
    residual = y[:-1] - 0.7 * y[1:] - shocks[:-1]
    assert np.max(np.abs(residual)) < 1e-12


def test_two_regime_couples_with_single_regime_generator():
    innovation = DistributionSpec.student_t(3)
    cfg = SimConfig(total_length=600, seed=9, burn_in=100, innovation=innovation)
    regime = simulate_two_regime(RegimeSpec(1.0 - 1e-15, 0.2, 0.8, innovation), cfg)
    single = simulate_mar_recursive(MarSpec(phi=(0.2,)), cfg)
    assert np.allclose(regime, single, atol=1e-12)


def test_two_regime_reference_experiment_is_finite():
    regime = RegimeSpec(0.7, 0.2, 0.8, DistributionSpec.student_t(3))
    y = simulate_two_regime(regime, SimConfig(total_length=1000, seed=0, burn_in=200))
    assert y.shape == (600,)
    assert np.all(np.isfinite(y))


@pytest.mark.parametrize("tau_star", [0.0, 1.0, -0.5])
def test_regime_threshold_domain(tau_star: float):
    with pytest.raises(ParameterDomainError):
        RegimeSpec(tau_star, 0.2, 0.8)


def test_ma_coefficients_noncausal():
    ma = ma_coefficients(MarSpec(phi=(0.6,)), K=30)
    for j in range(31):
        assert ma[-j] == pytest.approx(0.6**j, abs=1e-12), f"lead weight {j}"
    for j in range(1, 31):
        assert ma[j] == pytest.approx(0.0, abs=1e-12), f"lag weight {j}"


def test_ma_coefficients_causal():
    ma = ma_coefficients(MarSpec(pi=(0.5,)), K=20)
    for j in range(21):
        assert ma[j] == pytest.approx(0.5**j, abs=1e-12)
    assert ma[-1] == pytest.approx(0.0, abs=1e-12)


def test_ma_coefficients_match_impulse_response():
    K = 40
    ma = ma_coefficients(MAR11, K=K)
    eps = np.zeros(2001)
    eps[1000] = 1.0
    y = solve_mar_matrix(MAR11, eps)
    response = y[1000 - K : 1000 + K + 1]
    assert np.max(np.abs(response - ma.values)) < 1e-9
    assert ma.tail_bound > 0.0
    assert ma.decay_rate == pytest.approx(0.8)


def test_ma_coefficients_reject_empty_window():
    with pytest.raises(ParameterDomainError):
        ma_coefficients(MAR11, K=0)
