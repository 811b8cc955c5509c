import json
import pathlib

import numpy as np
import pytest
from click.testing import CliRunner, Result

from ncqar import cli
from ncqar.simulate import MarSpec, SimConfig, simulate_mar
from ncqar.utils import generic__config
from ncqar.utils.generic__io import write_series_csv


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setattr(generic__config, "config_file", lambda: tmp_path / "no-such-config.toml")
    monkeypatch.setattr(cli, "cache_dir", lambda *parts: tmp_path.joinpath("cache", *parts))
    monkeypatch.delenv("NCQAR_JOBS", raising=False)


@pytest.fixture
def series_csv(tmp_path) -> pathlib.Path:
    path = tmp_path / "series.csv"
    write_series_csv(path, simulate_mar(MarSpec(phi=(0.7,)), SimConfig(600, seed=3, burn_in=200)))
    return path


def prices_csv(path: pathlib.Path, seed: int) -> pathlib.Path:
    returns = simulate_mar(MarSpec(pi=(0.5,)), SimConfig(560, seed=seed, burn_in=200))
    prices = 100.0 * np.exp(np.cumsum(returns) / 400.0)
    path.write_text("quarter,price\n" + "".join(f"{i},{p:.17g}\n" for i, p in enumerate(prices)), encoding="utf-8")
    return path


def run(*args) -> Result:
    result = CliRunner().invoke(cli.main, [str(a) for a in args], catch_exceptions=False)
    return result


def test_version():
    result = run("--version")
    assert result.exit_code == 0
    assert "ncqar" in result.output


def test_simulate_writes_series(tmp_path):
    out = tmp_path / "sim.csv"
    result = run("simulate", "-T", 50, "--pi", "0.5", "--phi", "0.3", "--dist", "student_t", "--nu", 3, "-o", out)
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 51
    assert lines[1].startswith("1,")


def test_simulate_to_stdout():
    result = run("sim", "-T", 5, "--two-regime", "--dist", "t", "--nu", 3)
    assert result.exit_code == 0
    assert "t,value" in result.output


def test_config_values_and_flag_precedence(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text("[simulate]\nlength = 30\nseed = 5\nphi = [0.6]\n", encoding="utf-8")
    from_file, from_flags, overridden, reference = (tmp_path / f"{name}.csv" for name in "abcd")
    assert run("-C", config, "simulate", "-o", from_file).exit_code == 0
    assert run("simulate", "-T", 30, "--seed", 5, "--phi", "0.6", "-o", from_flags).exit_code == 0
    assert from_file.read_bytes() == from_flags.read_bytes()

    assert run("-C", config, "simulate", "--seed", 6, "-o", overridden).exit_code == 0
    assert run("simulate", "-T", 30, "--seed", 6, "--phi", "0.6", "-o", reference).exit_code == 0
    assert overridden.read_bytes() == reference.read_bytes()
    assert overridden.read_bytes() != from_file.read_bytes()


def test_config_innovation_table(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('[simulate]\nlength = 20\n\n[simulate.innovation]\nkind = "cauchy"\n', encoding="utf-8")
    from_file, from_flags = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("-C", config, "simulate", "--pi", "0.4", "-o", from_file).exit_code == 0
    assert run("simulate", "-T", 20, "--pi", "0.4", "--dist", "cauchy", "-o", from_flags).exit_code == 0
    assert from_file.read_bytes() == from_flags.read_bytes()


def test_fit_report(series_csv, tmp_path):
    out = tmp_path / "fit.json"
    result = run("fit", series_csv, "--direction", "noncausal", "-t", 0.25, "-t", 0.75, "-o", out)
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["meta"]["command"] == "fit"
    assert report["meta"]["resolved_config"]["tau"] == [0.25, 0.75]
    assert report["model"] == {"direction": "noncausal", "p": 1, "restricted": False}
    assert [f["tau"] for f in report["fits"]] == [0.25, 0.75]
    assert "aml" not in report


def test_fit_with_aml(series_csv, tmp_path):
    out = tmp_path / "fit.json"
    assert run("fit", series_csv, "--aml", "--r", 0, "--s", 1, "-o", out).exit_code == 0
    aml = json.loads(out.read_text())["aml"]
    assert len(aml["phi"]) == 1 and aml["sigma"] > 0


def test_order_report(series_csv, tmp_path):
    out = tmp_path / "order.json"
    assert run("order", series_csv, "--p-max", 3, "-o", out).exit_code == 0
    report = json.loads(out.read_text())
    assert sorted(report["criteria"]) == ["1", "2", "3"]
    assert report["p"] in (1, 2, 3)


def test_srar_curves_to_stdout(series_csv):
    result = run("srar", series_csv, "-p", 1, "--grid", "0.1:0.9:0.1")
    assert result.exit_code == 0
    assert "tau,srar_causal,srar_noncausal" in result.output


def test_select_report(series_csv, tmp_path):
    out, curves = tmp_path / "select.json", tmp_path / "curves.csv"
    result = run("select", series_csv, "-p", 1, "--include-restricted", "--curves", curves, "-o", out)
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert len(data["meta"]["grid"]) == 19
    assert data["meta"]["solver"]["tie_tolerance"] == 1e-12
    assert data["report"]["aggregate_winner"] in ("causal", "noncausal", "tie")
    assert "restricted_variant" in data["report"]
    assert curves.read_text().splitlines()[0] == "tau,srar_causal,srar_noncausal,srar_rcausal,srar_rnoncausal"


def test_identify_reports_table_cells(tmp_path):
    first, second = prices_csv(tmp_path / "cpi.csv", 1), prices_csv(tmp_path / "ppi.csv", 2)
    out, curves = tmp_path / "identify.json", tmp_path / "curves"
    result = run("id", first, second, "--column", "price", "-p", 1, "--curves-dir", curves, "-o", out)
    assert result.exit_code == 0, result.output
    series = json.loads(out.read_text())["series"]
    assert sorted(series) == ["cpi", "ppi"]
    for report in series.values():
        assert list(report["table"]) == ["0.1", "0.3", "0.5", "0.7", "0.9", "aggregate"]
        assert report["p"] == 1
        assert report["dataset"]["transform"] == "annualized_log_diff"
    assert (curves / "cpi.csv").is_file() and (curves / "ppi.csv").is_file()


def test_identify_chooses_order(tmp_path):
    out = tmp_path / "identify.json"
    result = run("identify", prices_csv(tmp_path / "cpi.csv", 4), "-c", "price", "--p-max", 2, "-o", out)
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["series"]["cpi"]["p"] in (1, 2)


def test_describe(series_csv, tmp_path):
    out = tmp_path / "describe.json"
    assert run("describe", series_csv, "-p", 1, "-o", out).exit_code == 0
    diagnostics = json.loads(out.read_text())["diagnostics"]
    assert set(diagnostics) == {"HQ", "n", "BJ", "skew", "kurt", "LM[1-2]", "ARCH[1-2]"}


def test_binding_table_and_sidecar(tmp_path):
    out = tmp_path / "binding.csv"
    result = run("binding", "--coefficients", "0,0.5", "-n", 3, "-T", 40, "--dist", "t", "--nu", 3, "-o", out)
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "coefficient,tau,mean,dispersion,std_error,n_used,non_convergent"
    assert len(lines) == 3
    meta = json.loads(out.with_suffix(".json").read_text())["meta"]
    assert meta["resolved_config"]["coefficients"] == [0.0, 0.5]
    assert meta["resolved_config"]["innovation"]["kind"] == "student_t"


def test_montecarlo_output_does_not_depend_on_jobs(tmp_path):
    single, pooled = tmp_path / "single.csv", tmp_path / "pooled.csv"
    args = ("montecarlo", "--column", "t1", "-n", 4, "-T", 60, "--include-restricted")
    assert run("-j", 1, *args, "-o", single).exit_code == 0
    assert run("-j", 2, *args, "-o", pooled).exit_code == 0
    assert single.read_bytes() == pooled.read_bytes()
    assert single.with_suffix(".json").read_bytes() == pooled.with_suffix(".json").read_bytes()
    header = single.read_text().splitlines()[0].split(",")
    assert header == ["quantile", "t1", "t1_se", "t1_restricted", "t1_restricted_se"]


def test_montecarlo_resume_matches_fresh_run(tmp_path):
    fresh, resumed = tmp_path / "fresh.csv", tmp_path / "resumed.csv"
    args = ("mc", "--column", "gaussian", "-n", 3, "-T", 50)
    assert run(*args, "-o", fresh).exit_code == 0
    assert run(*args, "--resume", "-o", resumed).exit_code == 0
    assert fresh.read_bytes() == resumed.read_bytes()


def test_montecarlo_custom_dgp(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(
        "[montecarlo]\nn_reps = 3\nT = 50\n\n"
        "[montecarlo.dgp]\nphi = [0.9]\n\n"
        '[montecarlo.dgp.innovation]\nkind = "cauchy"\n',
        encoding="utf-8",
    )
    out = tmp_path / "custom.csv"
    assert run("-C", config, "montecarlo", "-o", out).exit_code == 0
    data = json.loads(out.with_suffix(".json").read_text())
    assert list(data["tables"]) == ["custom"]
    assert data["tables"]["custom"]["metadata"]["true_direction"] == "noncausal"
    assert data["meta"]["resolved_config"]["n_reps"] == 3


def test_montecarlo_presets_run_at_their_own_length(tmp_path):
    out = tmp_path / "presets.csv"
    assert run("mc", "--column", "gaussian", "--column", "two_regime", "-n", 2, "-o", out).exit_code == 0
    data = json.loads(out.with_suffix(".json").read_text())
    assert data["tables"]["gaussian"]["metadata"]["T"] == 200
    assert data["tables"]["two_regime"]["metadata"]["T"] == 600
    assert data["meta"]["resolved_config"]["T"] == {"gaussian": 200, "two_regime": 600}

    pinned = tmp_path / "pinned.csv"
    assert run("mc", "--column", "two_regime", "-n", 2, "-T", 80, "-o", pinned).exit_code == 0
    assert json.loads(pinned.with_suffix(".json").read_text())["tables"]["two_regime"]["metadata"]["T"] == 80


def test_montecarlo_consistency(tmp_path):
    out = tmp_path / "consistency.csv"
    assert run("mc", "--consistency", "--Ts", "40,80", "-n", 3, "-o", out).exit_code == 0
    assert out.read_text().splitlines()[0] == "T,median_abs_error,n_used"
    assert json.loads(out.with_suffix(".json").read_text())["study"]["rows"][1]["T"] == 80


def test_missing_config_file_exits_with_configuration_code(tmp_path, series_csv):
    assert run("-C", tmp_path / "missing.toml", "fit", series_csv).exit_code == 2


def test_missing_dataset_exits_with_configuration_code():
    assert run("fit").exit_code == 2


def test_bad_grid_exits_with_configuration_code(series_csv):
    assert run("select", series_csv, "-p", 1, "--grid", "0.5,0.2").exit_code == 2


def test_bad_cell_exits_with_data_code(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("value\n1.0\n2.0\nn/a\n", encoding="utf-8")
    result = run("fit", path)
    assert result.exit_code == 3
    assert "row 4" in result.output


def test_non_positive_price_exits_with_data_code(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text("value\n100\n101\n0\n", encoding="utf-8")
    assert run("identify", path, "-p", 1).exit_code == 3


def test_constant_series_exits_with_numerical_code(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("value\n" + "2.5\n" * 40, encoding="utf-8")
    assert run("fit", path).exit_code == 4


def test_non_stationary_simulation_exits_with_numerical_code():
    assert run("simulate", "--pi", "1.2").exit_code == 4


def test_embedded_config_reproduces_the_report(series_csv, tmp_path):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert run("select", series_csv, "--grid", "0.1:0.9:0.2", "--include-restricted", "-o", first).exit_code == 0
    resolved = json.loads(first.read_text())["meta"]["resolved_config"]
    config = tmp_path / "replay.toml"
    lines = [f"{key} = {json.dumps(value)}" for key, value in resolved.items() if value is not None]
    config.write_text("[select]\n" + "\n".join(lines) + "\n", encoding="utf-8")
    assert run("-C", config, "select", "-o", second).exit_code == 0
    assert first.read_bytes() == second.read_bytes()
