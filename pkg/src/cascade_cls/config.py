"""Run configuration: YAML loading, defaults and validation.

Every physical quantity carries its unit in the key name.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Any, Optional

import yaml

from .errors import ConfigError

TASKS = ("mu_bar_surface", "cls_surface", "cls_vs_radius_species", "spectrum_demo",
         "oracle_check")


@dataclass(frozen=True)
class RunConfig:
    task: str
    height_mm: tuple = (3.0,)
    radius_um: tuple = (20.0,)
    species: tuple = ("Rb",)
    density_per_cm3: float = 8e10
    n_atoms: Optional[int] = None
    seeds: int = 1
    exclusion_radius_nm: Optional[float] = None
    k_M_per_m: Optional[float] = None
    full_integral: bool = False
    mc_max_atoms: int = 0
    mu_bar_rtol: float = 1e-8
    spectrum_decay_times: float = 10.0
    spectrum_half_width_linewidths: float = 10.0
    spectrum_points: int = 401
    oracle_n_signal: int = 1001
    oracle_n_idler: int = 1001
    oracle_half_width: float = 50.0
    oracle_gamma_signal: float = 0.002
    oracle_separation_k3: float = 0.37
    out: str = "results"

    def resolved(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the resolved parameters (output location excluded)."""
        d = self.resolved()
        d.pop("out")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


_FIELDS = {f.name: f for f in RunConfig.__dataclass_fields__.values()}
_LISTS = ("height_mm", "radius_um", "species")
_SECTIONS = {
    "cutoffs": {"k_M_per_m": "k_M_per_m", "full_integral": "full_integral"},
    "tolerances": {"mu_bar_rtol": "mu_bar_rtol"},
    "spectrum": {"decay_times": "spectrum_decay_times",
                 "half_width_linewidths": "spectrum_half_width_linewidths",
                 "points": "spectrum_points"},
    "oracle": {"n_signal": "oracle_n_signal", "n_idler": "oracle_n_idler",
               "half_width_over_gamma": "oracle_half_width",
               "gamma_signal_over_gamma": "oracle_gamma_signal",
               "separation_k3": "oracle_separation_k3"},
    "mc": {"max_atoms": "mc_max_atoms"},
}


def _flatten(raw: dict) -> dict:
    flat = {}
    for key, val in raw.items():
        if key in _SECTIONS:
            if not isinstance(val, dict):
                raise ConfigError("expected a mapping", key)
            for sub, v in val.items():
                if sub not in _SECTIONS[key]:
                    raise ConfigError("unknown key", f"{key}.{sub}")
                flat[_SECTIONS[key][sub]] = (v, f"{key}.{sub}")
        elif key in _FIELDS:
            flat[key] = (val, key)
        else:
            raise ConfigError("unknown key", key)
    return flat


def _as_number(val, path, kind=float, positive=True, allow_none=False):
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", path)
    out = kind(val)
    if kind is int and out != val:
        raise ConfigError(f"expected an integer, got {val!r}", path)
    if positive and not out > 0:
        raise ConfigError(f"must be positive, got {val!r}", path)
    return out


def build_config(raw: dict, overrides: Optional[dict] = None) -> RunConfig:
    """Validate a parsed mapping (plus CLI overrides) into a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        With the dotted path of the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    flat = _flatten(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            flat[key] = (val, f"--{key}")
    if "task" not in flat:
        raise ConfigError("missing", "task")
    values: dict[str, Any] = {}
    for name, (val, path) in flat.items():
        if name == "task":
            if val not in TASKS:
                raise ConfigError(f"unknown task {val!r}; expected one of {TASKS}", path)
            values[name] = val
        elif name in _LISTS:
            seq = val if isinstance(val, (list, tuple)) else [val]
            if not seq:
                raise ConfigError("grid must be nonempty", path)
            if name == "species":
                values[name] = tuple(str(s) for s in seq)
            else:
                values[name] = tuple(_as_number(v, f"{path}[{i}]") for i, v in enumerate(seq))
        elif name in ("n_atoms", "seeds", "spectrum_points", "oracle_n_signal", "oracle_n_idler"):
            values[name] = _as_number(val, path, int, allow_none=(name == "n_atoms"))
        elif name == "mc_max_atoms":
            values[name] = _as_number(val, path, int, positive=False)
        elif name in ("exclusion_radius_nm", "k_M_per_m"):
            values[name] = _as_number(val, path, allow_none=True)
        elif name == "full_integral":
            if not isinstance(val, bool):
                raise ConfigError("expected true or false", path)
            values[name] = val
        elif name == "out":
            values[name] = str(val)
        else:
            values[name] = _as_number(val, path)
    cfg = RunConfig(**values)
    _check_species(cfg)
    return cfg


def _check_species(cfg: RunConfig):
    from .cls import load_species

    known = load_species()
    for i, name in enumerate(cfg.species):
        if name not in known:
            raise ConfigError(f"unknown species {name!r}; known: {sorted(known)}",
                              f"species[{i}]")


def load_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    """Read a YAML file, or a bundled config given as ``builtin:<name>``."""
    try:
        if path.startswith("builtin:"):
            name = path.split(":", 1)[1]
            text = resources.files(__package__).joinpath(f"configs/{name}.yaml").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
    except (OSError, FileNotFoundError) as exc:
        raise ConfigError(f"cannot read config: {exc}", path) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", path) from exc
    return build_config(copy.deepcopy(raw) if raw is not None else {}, overrides)
