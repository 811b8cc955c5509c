import os

import numpy as np
import pytest

from ncqar.distributions import DistributionSpec
from ncqar.errors import ConfigurationError, ParameterDomainError
from ncqar.models import Direction
from ncqar.montecarlo import (
    PRESET_EXPERIMENTS,
    MarDgp,
    McConfig,
    checkpoint_path,
    consistency_study,
    dgp_from_mapping,
    preset_sample_size,
    replicate_seed,
    run_binding_function,
    run_selection_frequencies,
    true_direction,
)
from ncqar.simulate import MarSpec

WORKERS = max(1, min(8, os.cpu_count() or 1))


def small_config(column: str = "t2", **kwargs) -> McConfig:
    options = {"n_reps": 8, "T": 100, "dgp": PRESET_EXPERIMENTS[column], "seed": 42}
    options.update(kwargs)
    return McConfig(**options)


def assert_same_table(a, b):
    assert np.array_equal(a.per_tau, b.per_tau)
    assert a.aggregate == b.aggregate
    assert a.n_used == b.n_used and a.failed == b.failed
    assert a.to_mapping() == b.to_mapping()


def test_replicate_seeds():
    assert replicate_seed(42, 0) == 42
    assert replicate_seed(42, 3) == 42 ^ 3
    assert small_config().replicate_seed(5) == 42 ^ 5


def test_true_direction():
    assert true_direction(PRESET_EXPERIMENTS["gaussian"]) is Direction.CAUSAL
    assert true_direction(PRESET_EXPERIMENTS["t1"]) is Direction.NONCAUSAL
    assert true_direction(PRESET_EXPERIMENTS["two_regime"]) is Direction.NONCAUSAL


def test_preset_sample_sizes():
    assert preset_sample_size("gaussian") == preset_sample_size("t1") == 200
    assert preset_sample_size("two_regime") == preset_sample_size("skewed_t") == 600
    with pytest.raises(ConfigurationError):
        preset_sample_size("laplace")


def test_mixed_process_cannot_be_a_selection_experiment():
    with pytest.raises(ConfigurationError):
        MarDgp(MarSpec(pi=(0.5,), phi=(0.5,)))
    with pytest.raises(ConfigurationError):
        MarDgp(MarSpec())


def test_dgp_mappings():
    for dgp in PRESET_EXPERIMENTS.values():
        mapping = small_config(dgp=dgp).to_mapping()["dgp"]
        assert dgp_from_mapping(mapping) == dgp
    dgp = dgp_from_mapping({"phi": [0.9], "innovation": {"kind": "t", "nu": 3}})
    assert dgp == MarDgp(MarSpec(phi=(0.9,)), DistributionSpec.student_t(3))


@pytest.mark.parametrize(
    "mapping",
    [{"type": "garch"}, {"type": "two_regime", "tau_star": 0.7}, {"type": "mar", "phi": [0.5], "lags": 2}],
)
def test_bad_dgp_mappings(mapping: dict):
    with pytest.raises(ConfigurationError):
        dgp_from_mapping(mapping)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        small_config(n_reps=0)
    with pytest.raises(ConfigurationError):
        small_config(parallelism=0)
    with pytest.raises(ParameterDomainError):
        small_config(seed=-1)
    with pytest.raises(ConfigurationError):
        small_config(grid=(0.5, 0.1))
    with pytest.raises(ConfigurationError):
        small_config(T=4)
    with pytest.raises(ConfigurationError):
        small_config(T=6, p_fit=2)


def test_digest_ignores_parallelism():
    assert small_config(parallelism=1).digest() == small_config(parallelism=4).digest()
    assert small_config(seed=1).digest() != small_config(seed=2).digest()
    assert checkpoint_path(small_config(), "cache").name == f"selection-{small_config().digest()}.jsonl"


def test_frequency_table_layout():
    table = run_selection_frequencies(small_config())
    assert table.n_reps == table.n_used == 8 and table.failed == 0
    assert np.all((table.per_tau >= 0.0) & (table.per_tau <= 1.0))
    assert np.allclose(table.per_tau_se, np.sqrt(table.per_tau * (1.0 - table.per_tau) / 8))
    rows = table.to_rows()
    assert len(rows) == 20 and rows[-1]["quantile"] == "aggregate"
    assert rows[0]["quantile"] == "0.05"
    assert table.metadata["true_direction"] == "causal"
    assert table.metadata["seed"] == 42


def test_heavy_tailed_frequencies_are_high():
    table = run_selection_frequencies(small_config("t2", n_reps=40, T=200))
    assert table.aggregate >= 0.9
    assert table.at(0.5) >= 0.9


def test_results_do_not_depend_on_worker_count():
    single = run_selection_frequencies(small_config("t1", n_reps=6))
    pooled = run_selection_frequencies(small_config("t1", n_reps=6, parallelism=2))
    assert_same_table(single, pooled)


def test_restricted_variant_is_tabulated():
    table = run_selection_frequencies(small_config("skewed_t", include_restricted=True))
    assert table.variant is not None
    assert table.metadata["restricted"] is False
    assert table.variant.metadata["restricted"] is True
    assert "variant" in table.to_mapping()


def test_progress_callback_counts_replicates():
    ticks = []
    run_selection_frequencies(small_config(n_reps=5), advance=ticks.append)
    assert sum(ticks) == 5


def test_resume_from_partial_checkpoint(tmp_path):
    cfg = small_config("two_regime")
    path = checkpoint_path(cfg, tmp_path)
    complete = run_selection_frequencies(cfg, checkpoint=path)
    lines = path.read_text().splitlines()
    assert len(lines) == cfg.n_reps

    # three finished replicates and a line cut off mid-write
    path.write_text("\n".join(lines[:3]) + "\n" + lines[3][:10])
    ticks = []
    resumed = run_selection_frequencies(cfg, checkpoint=path, resume=True, advance=ticks.append)
    assert_same_table(complete, resumed)
    assert sum(ticks) == cfg.n_reps


def test_fresh_run_overwrites_checkpoint(tmp_path):
    cfg = small_config(n_reps=3)
    path = tmp_path / "nested" / "run.jsonl"
    run_selection_frequencies(cfg, checkpoint=path)
    run_selection_frequencies(cfg, checkpoint=path)
    assert len(path.read_text().splitlines()) == 3


def test_binding_at_zero_is_centred():
    grid = run_binding_function(0.5, [0.0], DistributionSpec.gaussian(), n_reps=200, T=200, seed=3)
    assert abs(grid.at(0.0)) <= 3 * grid.std_error[0], f"mean {grid.at(0.0)!r}, se {grid.std_error[0]!r}"
    assert grid.n_used[0] == 200
    assert not grid.non_convergent[0]


def test_binding_grid_rows():
    grid = run_binding_function(0.3, [-0.5, 0.0, 0.5], DistributionSpec.student_t(3), n_reps=5, T=80)
    rows = grid.to_rows()
    assert [row["coefficient"] for row in rows] == [-0.5, 0.0, 0.5]
    assert all(row["tau"] == 0.3 for row in rows)
    assert set(rows[0]) == {"coefficient", "tau", "mean", "dispersion", "std_error", "n_used", "non_convergent"}
    with pytest.raises(ConfigurationError):
        grid.at(0.25)


def test_binding_is_independent_of_worker_count():
    args = (0.7, [-0.4, 0.4], DistributionSpec.student_t(3))
    single = run_binding_function(*args, n_reps=4, T=60, seed=1)
    pooled = run_binding_function(*args, n_reps=4, T=60, seed=1, jobs=2)
    assert np.array_equal(single.mean, pooled.mean)
    assert np.array_equal(single.dispersion, pooled.dispersion)


def test_binding_dispersion_flag():
    grid = run_binding_function(0.5, [0.5], DistributionSpec.cauchy(), n_reps=10, T=50, dispersion_threshold=0.0)
    assert grid.non_convergent[0]


@pytest.mark.parametrize(
    "kwargs,error",
    [({"tau": 1.0}, ParameterDomainError), ({"coefficient_grid": [1.0]}, ParameterDomainError),
     ({"coefficient_grid": []}, ConfigurationError), ({"n_reps": 1}, ConfigurationError),
     ({"T": 4}, ConfigurationError)],
)
def test_binding_rejects_bad_input(kwargs: dict, error):
    options = {"tau": 0.5, "coefficient_grid": [0.5], "innovation": DistributionSpec.gaussian(), "n_reps": 5, "T": 50}
    options.update(kwargs)
    with pytest.raises(error):
        run_binding_function(**options)


def test_consistency_study_layout():
    study = consistency_study(Ts=(60, 120), n_reps=4)
    assert study.Ts == (60, 120)
    assert [row["T"] for row in study.to_rows()] == [60, 120]
    assert study.shrink_factor > 0.0
    with pytest.raises(ConfigurationError):
        consistency_study(Ts=(2,), n_reps=2)


@pytest.mark.slow
def test_median_estimator_is_consistent_under_cauchy_noise():
    study = consistency_study(phi=0.8, Ts=(250, 4000), n_reps=200, seed=0, jobs=WORKERS)
    assert study.shrink_factor >= 2.0, f"median absolute errors {study.median_abs_error}"


@pytest.mark.slow
def test_binding_antisymmetry():
    coefficients = [-0.8, -0.4, 0.0, 0.4, 0.8]
    innovation = DistributionSpec.student_t(3)
    low = run_binding_function(0.3, coefficients, innovation, n_reps=300, T=200, seed=5, jobs=WORKERS)
    high = run_binding_function(0.7, coefficients, innovation, n_reps=300, T=200, seed=6, jobs=WORKERS)
    for i, c in enumerate(coefficients):
        gap = low.at(c) + high.at(-c)
        se = np.hypot(low.std_error[i], high.std_error[len(coefficients) - 1 - i])
        assert abs(gap) <= 4 * se, f"c={c}: {low.at(c)!r} vs {high.at(-c)!r}"


@pytest.mark.slow
@pytest.mark.parametrize(
    "column,aggregate,tolerance,cells",
    [
        ("gaussian", 0.483, 0.05, {}),
        ("t2", 0.998, 0.03, {0.5: 1.0}),
        ("t1", 0.995, 0.03, {}),
        ("two_regime", 0.995, 0.03, {0.5: 0.95}),
        ("skewed_t", 0.999, 0.03, {0.7: 0.001}),
    ],
)
def test_selection_frequency_table(column: str, aggregate: float, tolerance: float, cells: dict):
    cfg = McConfig(2000, preset_sample_size(column), PRESET_EXPERIMENTS[column], seed=0, parallelism=WORKERS)
    table = run_selection_frequencies(cfg)
    assert abs(table.aggregate - aggregate) <= tolerance, f"{column}: aggregate {table.aggregate}"
    for tau, expected in cells.items():
        assert abs(table.at(tau) - expected) <= 0.04, f"{column}: tau={tau} cell {table.at(tau)}"


def test_binding_mean_is_stable_for_light_tails():
    grid = run_binding_function(0.5, [0.8], DistributionSpec.student_t(10), n_reps=200, T=600, seed=2)
    assert np.isfinite(grid.at(0.8))
    assert grid.std_error[0] < 0.02
