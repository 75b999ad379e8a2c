"""Structured run configuration: TOML files, ``--set`` overrides, manifests.

A config has four tables::

    [model]     num_subcarriers, period_length, bits_per_package, channel_uses_L,
                noise_variances, battery_capacity, integer_rates
    [scenario]  mean_power_gain, n_end, seed, and sub-tables data_arrivals,
                energy_arrivals, prices (each with ``values`` and ``probs``)
    [policy]    name ("bgl" | "dop" | "cop"), V
    [sweep]     parameter, values, replications   (optional)

A run manifest (JSON) embeds the fully resolved config under ``"config"``
and can be passed back as ``--config`` to reproduce its output.
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from bglsim.errors import BglSimError, ConfigError
from bglsim.model import ModelParams
from bglsim.policies import POLICY_NAMES, make_policy
from bglsim.stochastic import CategoricalDist, ScenarioConfig

DEFAULTS: dict[str, Any] = {
    "model": {
        "num_subcarriers": 3,
        "period_length": 1.0,
        "bits_per_package": 1,
        "channel_uses_L": 5,
        "noise_variances": [1.0, 1.0, 1.0],
        "battery_capacity": 2500.0,
        "integer_rates": False,
    },
    "scenario": {
        "mean_power_gain": 0.3,
        "n_end": 1_000_000,
        "seed": 0,
        "data_arrivals": {"values": [0.0, 10.0, 20.0, 30.0], "probs": [0.1, 0.5, 0.3, 0.1]},
        "energy_arrivals": {"values": [100.0, 300.0, 500.0, 800.0], "probs": [0.1, 0.6, 0.2, 0.1]},
        "prices": {"values": [0.02, 0.05], "probs": [0.3, 0.7]},
    },
    "policy": {"name": "bgl", "V": 100.0},
    "sweep": {"parameter": "V", "values": [], "replications": 1},
}

# Short names accepted by --set, mapped to their dotted location.
ALIASES = {
    "policy": "policy.name",
    "V": "policy.V",
    "seed": "scenario.seed",
    "n_end": "scenario.n_end",
    "mean_gain": "scenario.mean_power_gain",
    "battery_B": "model.battery_capacity",
    "B": "model.battery_capacity",
    "M": "model.num_subcarriers",
    "replications": "sweep.replications",
}

DIST_KEYS = ("data_arrivals", "energy_arrivals", "prices")


@dataclass(frozen=True)
class ResolvedConfig:
    raw: dict
    params: ModelParams
    scenario: ScenarioConfig
    policy: str
    V: float | None


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field '{path}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"field '{path}' must be a table")
            out[key] = _merge(base[key], value, path + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None) -> dict:
    """Read a TOML config or JSON manifest and merge it over the defaults."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        data = data.get("config", data)
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return _merge(DEFAULTS, data)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if "," in text:
        return [_parse_value(t.strip()) for t in text.split(",") if t.strip()]
    return text


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted = ALIASES.get(key.strip(), key.strip())
        parts = dotted.split(".")
        node = cfg
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config field '{dotted}'")
            node = node[part]
        if parts[-1] not in node or isinstance(node[parts[-1]], dict):
            raise ConfigError(f"unknown config field '{dotted}'")
        node[parts[-1]] = _parse_value(text.strip())
    return cfg


def _field(table: dict, key: str, kind, where: str):
    value = table[key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(
            f"field '{where}.{key}' must be {kind.__name__}, got {value!r}"
        ) from None


def resolve(cfg: dict) -> ResolvedConfig:
    """Build typed objects from a merged config dict, reporting the bad field."""
    m, s, p = cfg["model"], cfg["scenario"], cfg["policy"]
    try:
        noise = m["noise_variances"]
        if not isinstance(noise, list):
            raise ConfigError("field 'model.noise_variances' must be a list")
        params = ModelParams(
            num_subcarriers=_field(m, "num_subcarriers", int, "model"),
            period_length=_field(m, "period_length", float, "model"),
            bits_per_package=_field(m, "bits_per_package", int, "model"),
            channel_uses=_field(m, "channel_uses_L", int, "model"),
            noise_variances=tuple(float(x) for x in noise),
            battery_capacity=_field(m, "battery_capacity", float, "model"),
            integer_rates=_field(m, "integer_rates", bool, "model"),
        )
    except (BglSimError, TypeError, ValueError) as exc:
        raise ConfigError(f"[model] {exc}") from exc

    dists = {}
    for key in DIST_KEYS:
        table = s[key]
        try:
            dists[key] = CategoricalDist(tuple(table["values"]), tuple(table["probs"]))
        except (BglSimError, TypeError, ValueError) as exc:
            raise ConfigError(f"[scenario.{key}] {exc}") from exc
    try:
        scenario = ScenarioConfig(
            mean_power_gain=_field(s, "mean_power_gain", float, "scenario"),
            n_end=_field(s, "n_end", int, "scenario"),
            seed=_field(s, "seed", int, "scenario"),
            **dists,
        )
    except BglSimError as exc:
        raise ConfigError(f"[scenario] {exc}") from exc

    name = str(p["name"]).lower()
    if name not in POLICY_NAMES:
        raise ConfigError(f"field 'policy.name' must be one of {POLICY_NAMES}, got {name!r}")
    V = None if p.get("V") is None else _field(p, "V", float, "policy")
    try:
        make_policy(name, V)
    except BglSimError as exc:
        raise ConfigError(f"[policy] {exc}") from exc
    return ResolvedConfig(cfg, params, scenario, name, V)


def to_toml(cfg: dict) -> str:
    """Serialise a config dict (the subset of TOML this module produces)."""
    lines: list[str] = []

    def emit(table: dict, prefix: str) -> None:
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        if prefix:
            lines.append(f"[{prefix}]")
        for key, value in scalars.items():
            lines.append(f"{key} = {json.dumps(value)}")
        lines.append("")
        for key, value in table.items():
            if isinstance(value, dict):
                emit(value, f"{prefix}.{key}" if prefix else key)

    emit(cfg, "")
    return "\n".join(lines).lstrip("\n")
