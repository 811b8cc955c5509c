"""
TOML run configuration: one table per subcommand, e.g.

    [montecarlo]
    n_reps = 2000
    T = 200
    seed = 7

    [montecarlo.innovation]
    kind = "student_t"
    nu = 2

Unknown sections and keys are errors. Command-line flags override file values, which override built-in defaults.
"""
import logging
import sys
import typing
from pathlib import Path

from ..errors import ConfigurationError
from .generic__shell import config_file

if sys.version_info >= (3, 11):
    import tomllib

    def _parse(text: str) -> dict:
        return tomllib.loads(text)

    _DecodeError = tomllib.TOMLDecodeError
else:
    import toml

    def _parse(text: str) -> dict:
        return toml.loads(text)

    _DecodeError = toml.TomlDecodeError

__all__ = ("SECTIONS", "load_config", "section", "resolve")

log = logging.getLogger(__name__)

_DISTRIBUTION = "innovation"
_DATASET = ("path", "column", "transform", "frequency")

SECTIONS: typing.Dict[str, typing.FrozenSet[str]] = {
    "simulate": frozenset(
        {"length", "burn_in", "seed", "method", "pi", "phi", "intercept", "two_regime", "tau_star", "beta1", "beta2",
         _DISTRIBUTION}
    ),
    "fit": frozenset({*_DATASET, "direction", "p", "tau", "restricted", "aml", "r", "s"}),
    "order": frozenset({*_DATASET, "p_max"}),
    "srar": frozenset({*_DATASET, "p", "p_max", "grid", "restricted", "include_restricted"}),
    "select": frozenset({*_DATASET, "p", "p_max", "grid", "restricted", "include_restricted", "method"}),
    "montecarlo": frozenset(
        {"column", "n_reps", "T", "seed", "p_fit", "grid", "burn_in", "restricted", "include_restricted", "method",
         "dgp", "resume", "consistency", "Ts", "phi", "tau"}
    ),
    "binding": frozenset(
        {"tau", "coefficients", "n_reps", "T", "seed", "burn_in", "dispersion_threshold", _DISTRIBUTION}
    ),
    "identify": frozenset({*_DATASET, "p", "p_max", "grid", "include_restricted", "method"}),
    "describe": frozenset({*_DATASET, "p", "p_max"}),
}


def load_config(path: typing.Optional[Path] = None) -> dict:
    """
    Reads and validates a run config.

    :param path: Explicit file. When None, the per-user default file is read if it exists.
    :raises ConfigurationError: If an explicit file is missing, the TOML is invalid, or a section/key is unknown
    """
    explicit = path is not None
    path = Path(path) if explicit else config_file()
    if not path.is_file():
        if explicit:
            raise ConfigurationError(f"config file {path} does not exist")
        return {}
    try:
        data = _parse(path.read_text(encoding="utf-8"))
    except _DecodeError as e:
        raise ConfigurationError(f"{path} is not valid TOML: {e}") from None
    log.debug("Loaded config from %s", path)

    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"{path}: unknown section(s) {', '.join(sorted(unknown))}")
    for name, values in data.items():
        if not isinstance(values, dict):
            raise ConfigurationError(f"{path}: [{name}] must be a table")
        bad = set(values) - SECTIONS[name]
        if bad:
            raise ConfigurationError(f"{path}: unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
    return data


def section(config: typing.Mapping[str, typing.Any], name: str) -> dict:
    if name not in SECTIONS:
        raise ConfigurationError(f"unknown config section {name!r}")
    return dict(config.get(name, {}))


def resolve(
    from_file: typing.Mapping[str, typing.Any],
    values: typing.Mapping[str, typing.Any],
    explicit: typing.Collection[str],
) -> dict:
    """
    Final value of every parameter in ``values`` (built-in defaults, or what was given on the command line).

    Names in ``explicit`` were given on the command line and win; otherwise a config file value replaces the
    default. File keys without a matching parameter are carried through unchanged.
    """
    resolved = dict(from_file)
    for name, value in values.items():
        if name in explicit or name not in from_file:
            resolved[name] = value
    return resolved
