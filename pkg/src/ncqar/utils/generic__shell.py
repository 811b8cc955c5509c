import os
from pathlib import Path

import appdirs

__all__ = ("APP_NAME", "config_dir", "config_file", "cache_dir", "available_cpus")

APP_NAME = "ncqar"


def config_dir() -> Path:
    directory = Path(appdirs.user_config_dir(APP_NAME))

    if not directory.exists():
        directory.mkdir(0o711, True, True)
    return directory.resolve()


def config_file() -> Path:
    """The run config read when ``--config`` is not given. It may not exist."""
    return config_dir() / f"{APP_NAME}.toml"


def cache_dir(*parts: str) -> Path:
    """
    Finds an appropriate cache directory for the current platform, optionally a named subdirectory of it.

    :param parts: Subdirectory names below the cache root
    :return: The (created) directory
    """
    directory = Path(appdirs.user_cache_dir(APP_NAME)).joinpath(*parts)
    directory.mkdir(0o711, True, True)
    return directory.resolve()


def available_cpus() -> int:
    """CPUs this process may run on."""
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1
