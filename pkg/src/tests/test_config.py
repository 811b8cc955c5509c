import pathlib

import pytest

from ncqar.errors import ConfigurationError
from ncqar.utils import generic__config
from ncqar.utils.generic__config import load_config, resolve, section


def write(tmp_path: pathlib.Path, text: str) -> pathlib.Path:
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_config(tmp_path):
    path = write(
        tmp_path,
        """
[montecarlo]
n_reps = 50
seed = 7

[binding.innovation]
kind = "student_t"
nu = 3
""",
    )
    config = load_config(path)
    assert section(config, "montecarlo") == {"n_reps": 50, "seed": 7}
    assert section(config, "binding")["innovation"] == {"kind": "student_t", "nu": 3}
    assert section(config, "fit") == {}


@pytest.mark.parametrize(
    "text",
    ["[plot]\nwidth = 3\n", "[fit]\nlearning_rate = 0.1\n", "fit = 3\n", "[fit\np = 1\n"],
    ids=["unknown-section", "unknown-key", "not-a-table", "invalid-toml"],
)
def test_invalid_config(tmp_path, text: str):
    with pytest.raises(ConfigurationError):
        load_config(write(tmp_path, text))


def test_missing_explicit_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "nope.toml")


def test_missing_default_file_is_empty(tmp_path, monkeypatch):
    monkeypatch.setattr(generic__config, "config_file", lambda: tmp_path / "ncqar.toml")
    assert load_config() == {}


def test_unknown_section_lookup():
    with pytest.raises(ConfigurationError):
        section({}, "plot")


def test_flags_override_file_and_file_overrides_defaults():
    from_file = {"n_reps": 50, "seed": 7, "dgp": {"phi": [0.9]}}
    values = {"n_reps": 2000, "seed": 11, "T": 200}
    resolved = resolve(from_file, values, explicit={"seed"})
    assert resolved == {"n_reps": 50, "seed": 11, "T": 200, "dgp": {"phi": [0.9]}}


def test_no_file_keeps_defaults():
    assert resolve({}, {"T": 200}, explicit=set()) == {"T": 200}
