from __future__ import annotations

import copy
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .constants import ExperimentName
from .defaults import default_experiments, default_graph, default_integrator, default_network, default_run
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("echochamber")

__all__ = ["load_config", "resolve_config", "config_digest", "canonical_json"]

TABLES = {
    "network": default_network,
    "graph": default_graph,
    "integrator": default_integrator,
}
EXPERIMENT_KEYS = {"trials", "b", "b_grid", "h_grid", "horizon", "epsilon", "x0"}
TOP_LEVEL_KEYS = set(default_run) | EXPERIMENT_KEYS | {"opinions"}
OPINION_KEYS = {"h", "h_grid"}


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a TOML experiment file. Missing or malformed files raise ConfigError."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    log.debug("Loaded config %s with keys %s", path, sorted(data))
    return data


def _check_keys(section: str, data: Mapping[str, Any], allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")


def _merge(target: Dict[str, Any], source: Mapping[str, Any]) -> None:
    for key, value in source.items():
        if value is not None:
            target[key] = value


def resolve_config(
    name: ExperimentName,
    file_data: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Resolve defaults < config file < command-line overrides.

    The result has the tables ``network``, ``graph`` and ``integrator`` and
    flat run keys (trials, seed, grids, workers ...). Overrides may be flat
    keys or nested tables; ``None`` values never override.
    """
    file_data = dict(file_data or {})
    overrides = dict(overrides or {})
    resolved: Dict[str, Any] = copy.deepcopy(default_run)
    resolved.update(copy.deepcopy(default_experiments[name.value]))
    for table, defaults in TABLES.items():
        resolved[table] = copy.deepcopy(defaults)

    for source_name, source in (("config", file_data), ("overrides", overrides)):
        for key, value in source.items():
            if key in TABLES:
                if not isinstance(value, Mapping):
                    raise ConfigError(f"[{key}] must be a table in {source_name}")
                _check_keys(key, value, TABLES[key])
                _merge(resolved[key], value)
            elif key == "opinions":
                if not isinstance(value, Mapping):
                    raise ConfigError(f"[opinions] must be a table in {source_name}")
                _check_keys("opinions", value, OPINION_KEYS)
                if value.get("h") is not None:
                    resolved["h_grid"] = [value["h"]]
                if value.get("h_grid") is not None:
                    resolved["h_grid"] = list(value["h_grid"])
            elif key in TOP_LEVEL_KEYS:
                if value is not None:
                    resolved[key] = value
            else:
                raise ConfigError(f"unknown top-level key {key!r} in {source_name}")
    _validate(resolved)
    return resolved


def _validate(resolved: Dict[str, Any]) -> None:
    def positive(name: str, value: Any):
        try:
            ok = float(value) > 0
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise ConfigError(f"{name} must be a positive number, got {value!r}")

    if int(resolved["trials"]) < 1:
        raise ConfigError(f"trials must be at least 1, got {resolved['trials']!r}")
    if int(resolved["workers"]) < 1:
        raise ConfigError(f"workers must be at least 1, got {resolved['workers']!r}")
    for grid in ("b_grid", "h_grid"):
        values = resolved.get(grid)
        if values is None:
            continue
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(f"{grid} must be a non-empty list")
        for value in values:
            positive(grid, value)
    for key in ("b", "horizon", "epsilon"):
        if key in resolved:
            positive(key, resolved[key])
    for key in ("epsilon", "step", "tol", "window", "horizon", "sample_every"):
        positive(f"integrator.{key}", resolved["integrator"][key])
    network = resolved["network"]
    for key in ("p", "q"):
        if not 0 <= float(network[key]) <= 1:
            raise ConfigError(f"network.{key} must be a probability, got {network[key]!r}")
    if int(network["n"]) < 1:
        raise ConfigError(f"network.n must be at least 1, got {network['n']!r}")
    if resolved["extremism_norm"] not in ("l1", "l2"):
        raise ConfigError(f"extremism_norm must be l1 or l2, got {resolved['extremism_norm']!r}")
    graph = resolved["graph"]
    if (graph["edges"] is None) != (graph["labels"] is None):
        raise ConfigError("graph.edges and graph.labels must be given together")


def canonical_json(data: Any) -> str:
    """Sorted keys, no whitespace, shortest round-trip floats."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def config_digest(resolved: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(resolved).encode("utf-8")).hexdigest()
