"""Strict INI-style run configuration.

Configs are flat key-value files with sections, parsed with
:mod:`configparser`.  Validation is fail-closed: unknown sections or keys,
bad types, and out-of-range values are all hard errors naming the offending
entry — a silently ignored misspelling (``sigma`` for ``sigma_sq``) would
poison a BER comparison.

Every key is optional; defaults reproduce the reference experiment setup
(w_l = w_g = 0.5, sigma_sq = 0.05, window 20, 6 users on 16 antennas with
uniform power, 685 training / 3840 data symbols, QPSK at 20 dB SNR).

Example::

    [kernel]
    w_l = 0.5
    w_g = 0.5
    sigma_sq = 0.05

    [sweep]
    schemes = BPSK, QPSK
    antennas = 4, 16
    seeds = 0:20          ; half-open range, same as 0,1,...,19

Integer lists accept comma items and ``start:stop`` half-open ranges.
"""

from __future__ import annotations

import configparser
import difflib
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .apsm import ApsmConfig
from .engine import STAGES, EngineConfig
from .kernels import KernelParams
from .noma import SCHEMES

__all__ = ["ConfigError", "BenchPlan", "RunConfig", "load_config", "DEFAULT_CONFIG"]


class ConfigError(ValueError):
    """A configuration file failed validation."""


@dataclass(frozen=True)
class BenchPlan:
    """Grid for the benchmark ladder."""

    dict_sizes: Tuple[int, ...] = (10000,)
    batch_sizes: Tuple[int, ...] = (4096,)
    stages: Tuple[str, ...] = STAGES
    workers: Tuple[int, ...] = (1,)
    repeats: int = 5
    antennas: int = 16

    def __post_init__(self):
        for stage in self.stages:
            if stage not in STAGES:
                raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
        if self.repeats < 5:
            raise ValueError(f"repeats must be >= 5, got {self.repeats}")


@dataclass(frozen=True)
class RunConfig:
    """Validated program configuration for the CLI front end."""

    apsm: ApsmConfig = field(default_factory=ApsmConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    users: int = 6
    power_profile: str = "uniform"
    snr_db: Optional[float] = 20.0
    noise_var: Optional[float] = None
    target_user: int = 0
    n_train: int = 685
    n_data: int = 3840
    subcarriers: int = 1
    schemes: Tuple[str, ...] = ("QPSK",)
    antennas: Tuple[int, ...] = (16,)
    seeds: Tuple[int, ...] = (0,)
    bench: BenchPlan = field(default_factory=BenchPlan)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> Tuple[int, ...]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            start, stop = item.split(":", 1)
            out.extend(range(int(start), int(stop)))
        else:
            out.append(int(item))
    if not out:
        raise ValueError("expected at least one integer")
    return tuple(out)


def _parse_str_list(text: str) -> Tuple[str, ...]:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise ValueError("expected at least one item")
    return items


def _parse_optional_int(text: str) -> Optional[int]:
    if text.strip().lower() in ("", "none"):
        return None
    return int(text)


def _parse_optional_float(text: str) -> Optional[float]:
    if text.strip().lower() in ("", "none"):
        return None
    return float(text)


# section -> key -> converter
_SCHEMA = {
    "kernel": {"w_l": float, "w_g": float, "sigma_sq": float},
    "apsm": {
        "window": int,
        "epsilon": float,
        "weight_scheme": str.strip,
        "max_atoms": _parse_optional_int,
    },
    "engine": {
        "stage": str.strip,
        "tile_atoms": int,
        "tile_inputs": int,
        "chunk_dim": int,
        "workers": int,
        "deterministic_reduction": _parse_bool,
        "precision": str.strip,
    },
    "channel": {
        "users": int,
        "power_profile": str.strip,
        "snr_db": _parse_optional_float,
        "noise_var": _parse_optional_float,
        "target_user": int,
    },
    "frame": {"n_train": int, "n_data": int, "subcarriers": int},
    "sweep": {"schemes": _parse_str_list, "antennas": _parse_int_list, "seeds": _parse_int_list},
    "bench": {
        "dict_sizes": _parse_int_list,
        "batch_sizes": _parse_int_list,
        "stages": _parse_str_list,
        "workers": _parse_int_list,
        "repeats": int,
        "antennas": int,
    },
}

DEFAULT_CONFIG = RunConfig()


def _suggest(key: str, known) -> str:
    close = difflib.get_close_matches(key, known, n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _collect(parser: configparser.ConfigParser) -> dict:
    values = {section: {} for section in _SCHEMA}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]{_suggest(section, _SCHEMA)}"
            )
        schema = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(
                    f"unknown key {key!r} in section [{section}]{_suggest(key, schema)}"
                )
            try:
                values[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r} in [{section}]: {exc}") from exc
    return values


def _build(values: dict) -> RunConfig:
    base = DEFAULT_CONFIG
    try:
        params = KernelParams(**values["kernel"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[kernel] {exc}") from exc
    try:
        apsm = ApsmConfig(params=params, **values["apsm"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[apsm] {exc}") from exc
    try:
        engine = EngineConfig(**values["engine"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[engine] {exc}") from exc
    try:
        bench = BenchPlan(**values["bench"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[bench] {exc}") from exc

    channel = values["channel"]
    snr_db = channel.get("snr_db", base.snr_db if "noise_var" not in channel else None)
    noise_var = channel.get("noise_var")
    if snr_db is not None and noise_var is not None:
        raise ConfigError("[channel] snr_db and noise_var are mutually exclusive; set one")
    if snr_db is None and noise_var is None:
        raise ConfigError("[channel] one of snr_db or noise_var is required")
    if noise_var is not None and noise_var < 0:
        raise ConfigError("[channel] noise_var must be >= 0")
    users = channel.get("users", base.users)
    if users < 1:
        raise ConfigError("[channel] users must be >= 1")
    target_user = channel.get("target_user", base.target_user)
    if not 0 <= target_user < users:
        raise ConfigError(f"[channel] target_user {target_user} out of range for {users} users")
    profile = channel.get("power_profile", base.power_profile)
    if profile != "uniform":
        try:
            profile = tuple(float(x) for x in profile.split(","))
        except ValueError as exc:
            raise ConfigError(f"[channel] power_profile must be 'uniform' or comma floats: {exc}") from exc
        if len(profile) != users:
            raise ConfigError(
                f"[channel] power_profile lists {len(profile)} powers for {users} users"
            )
        if any(p < 0 for p in profile):
            raise ConfigError("[channel] powers must be >= 0")

    frame = values["frame"]
    sweep = values["sweep"]
    schemes = sweep.get("schemes", base.schemes)
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ConfigError(
                f"unknown scheme {scheme!r} in [sweep]{_suggest(scheme, SCHEMES)}"
            )
    antennas = sweep.get("antennas", base.antennas)
    if any(m < 1 for m in antennas):
        raise ConfigError("[sweep] antenna counts must be >= 1")

    cfg = RunConfig(
        apsm=apsm,
        engine=engine,
        users=users,
        power_profile=profile,
        snr_db=snr_db,
        noise_var=noise_var,
        target_user=target_user,
        n_train=frame.get("n_train", base.n_train),
        n_data=frame.get("n_data", base.n_data),
        subcarriers=frame.get("subcarriers", base.subcarriers),
        schemes=tuple(schemes),
        antennas=tuple(antennas),
        seeds=tuple(sweep.get("seeds", base.seeds)),
        bench=bench,
    )
    if cfg.n_train < 0 or cfg.n_data < 1:
        raise ConfigError("[frame] n_train must be >= 0 and n_data >= 1")
    if cfg.subcarriers < 1:
        raise ConfigError("[frame] subcarriers must be >= 1")
    return cfg


def load_config(path) -> RunConfig:
    """Parse and validate a configuration file (see module docstring)."""
    parser = configparser.ConfigParser(
        strict=True, interpolation=None, inline_comment_prefixes=(";", "#")
    )
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return _build(_collect(parser))
