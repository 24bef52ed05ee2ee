"""Bundled data files and name resolution for config inputs.

A name such as ``ieee14`` or ``default`` resolves to a bundled file; any
other value is treated as a path, looked up first as given and then inside
the directory named by ``DROPF_CONFIG_DIR``.
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

from .case import NetworkCase, load_case
from .demand import ElasticityConfig, LoadProfile, load_elasticity_config, load_profile
from .prices import TariffConfig, load_tariff_config

CONFIG_DIR_ENV = "DROPF_CONFIG_DIR"

BUNDLED = {
    "case": {"ieee14": "case14.m", "case14": "case14.m"},
    "profile": {"default": "default_profile.csv"},
    "tariff": {"default": "tariff.json"},
    "elasticity": {"default": "elasticity.json"},
    "costs": {"study": "generator_costs.json"},
}


def bundled_path(filename: str) -> Path:
    return Path(str(resources.files("dropf") / "data" / filename))


def resolve(kind: str, name: str | os.PathLike) -> Path:
    """Map a bundled alias or a user path to an existing file."""
    name = os.fspath(name)
    if name in BUNDLED.get(kind, {}):
        return bundled_path(BUNDLED[kind][name])
    path = Path(name)
    if path.exists():
        return path
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir and not path.is_absolute() and (Path(config_dir) / path).exists():
        return Path(config_dir) / path
    raise FileNotFoundError(f"{kind} file not found: {name}")


def default_config(kind: str) -> Path:
    """The user's config-dir copy of a default file if present, else the bundled one."""
    filename = BUNDLED[kind]["default"]
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir and (Path(config_dir) / filename).exists():
        return Path(config_dir) / filename
    return bundled_path(filename)


def ieee14() -> NetworkCase:
    return load_case(bundled_path("case14.m"))


def default_profile() -> LoadProfile:
    return load_profile(bundled_path("default_profile.csv"))


def default_tariff() -> TariffConfig:
    return load_tariff_config(bundled_path("tariff.json"))


def default_elasticity() -> ElasticityConfig:
    return load_elasticity_config(bundled_path("elasticity.json"))


def load_cost_table(path) -> dict[int, tuple[float, float, float]]:
    data = json.loads(Path(path).read_text())
    costs = data.get("costs", data)
    table = {}
    for bus, coeffs in costs.items():
        if len(coeffs) != 3:
            raise ValueError(f"cost entry for bus {bus} needs [a, b, c], got {coeffs}")
        table[int(bus)] = tuple(float(c) for c in coeffs)
    return table


def study_costs() -> dict[int, tuple[float, float, float]]:
    return load_cost_table(bundled_path("generator_costs.json"))
