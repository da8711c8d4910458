"""Human-editable configuration: one TOML file, flat tables per module.

Every key corresponds to a recorded default; loading then dumping reproduces
semantically identical settings.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .errors import ConfigError
from .harness import RunConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# (table, key) -> RunConfig attribute
_KEYMAP = {
    ("field", "alpha"): "alpha",
    ("field", "sigma2"): "sigma2",
    ("geom", "pad_rule"): "pad_rule",
    ("ltime", "grid_m"): "grid_m",
    ("ltime", "epsilon_rule"): "epsilon_rule",
    ("ltime", "level"): "level",
    ("consts", "z_nodes"): "constants_nodes",
    ("consts", "mc_samples"): "constants_samples",
    ("consts", "phi2_normalization"): "phi2_normalization",
    ("harness", "intensities"): "intensities",
    ("harness", "replicates"): "replicates",
    ("harness", "seed"): "seed",
    ("harness", "output_dir"): "output_dir",
    ("harness", "workers"): "workers",
}


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")
    kwargs = {}
    for table, entries in data.items():
        if not isinstance(entries, dict):
            raise ConfigError(f"{path}: top-level key {table!r} must be a table")
        for key, value in entries.items():
            attr = _KEYMAP.get((table, key))
            if attr is None:
                raise ConfigError(f"{path}: unknown key [{table}] {key}")
            kwargs[attr] = value
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, float) and value == int(value) and abs(value) < 1e15:
        return f"{value:.1f}"
    return repr(value)


def dump_config(cfg: RunConfig, path) -> None:
    """Write the configuration back out as TOML (round-trips through load_config)."""
    tables: dict[str, list[str]] = {}
    for (table, key), attr in _KEYMAP.items():
        value = getattr(cfg, attr)
        if attr == "intensities":
            value = list(value)
        tables.setdefault(table, []).append(f"{key} = {_fmt(value)}")
    lines = []
    for table in ("field", "geom", "ltime", "consts", "harness"):
        lines.append(f"[{table}]")
        lines.extend(tables.get(table, []))
        lines.append("")
    Path(path).write_text("\n".join(lines))
