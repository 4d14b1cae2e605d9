"""Single source of truth for physical constants.

The table lives in ``data/constants.json`` and can be replaced wholesale by
pointing the ``MZLAB_CONSTANTS`` environment variable at an alternative JSON
file.  All modules, oracles and tests must read constants through this module
(or through the exported JSON) so that every number in the project comes from
one place.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

ENV_TABLE_PATH = "MZLAB_CONSTANTS"

_cache: dict | None = None
_cache_source: str | None = None


def _default_path() -> Path:
    return Path(str(resources.files("mzlab").joinpath("data/constants.json")))


def table_source() -> str:
    """Absolute path of the JSON file the current table was loaded from."""
    load_table()
    assert _cache_source is not None
    return _cache_source


def load_table(path: str | os.PathLike | None = None) -> dict:
    """Load (and cache) the constant table.

    Resolution order: explicit ``path`` argument, ``MZLAB_CONSTANTS``
    environment variable, packaged default.
    """
    global _cache, _cache_source
    if path is None:
        path = os.environ.get(ENV_TABLE_PATH) or _default_path()
    path = str(Path(path).resolve())
    if _cache is None or _cache_source != path:
        with open(path, "r", encoding="utf-8") as fh:
            _cache = json.load(fh)
        _cache_source = path
    return _cache


def reset_cache() -> None:
    """Drop the cached table (used when the environment variable changes)."""
    global _cache, _cache_source
    _cache = None
    _cache_source = None


def table_json() -> str:
    """Canonical serialization of the table, used by the CLI export."""
    return json.dumps(load_table(), indent=2, sort_keys=True) + "\n"


def fundamental(name: str) -> float:
    return float(load_table()["fundamental"][name])


def species_entry(name: str) -> dict:
    try:
        return load_table()["species"][name.lower()]
    except KeyError:
        known = ", ".join(sorted(load_table()["species"]))
        raise KeyError(f"unknown species {name!r}; table defines: {known}") from None


# Convenience accessors; values are re-read from the cached table so an
# override installed before first use is honored everywhere.
def planck_h() -> float:
    return fundamental("planck_h_J_s")


def hbar() -> float:
    return fundamental("hbar_J_s")


def bohr_magneton() -> float:
    return fundamental("bohr_magneton_J_per_T")


def mu0() -> float:
    return fundamental("mu0_N_per_A2")


def atomic_mass_unit() -> float:
    return fundamental("atomic_mass_unit_kg")
