"""Sectioned ``key = value`` config files for :class:`ExperimentConfig`.

Layout (every key optional; missing keys keep the built-in defaults)::

    [experiment]        herald_side, acquisition_time_s, rng_seed
    [resonator]         loaded_q, intrinsic_q, center_wavelength_nm
    [wavelengths]       pump_nm, signal_nm, idler_nm, tolerance_ghz
    [signal_loss]       coupling_db, filter_db, detector_efficiency
    [idler_loss]        same keys
    [herald_split_b_loss], [herald_split_c_loss]   same keys
    [source]            pgr_coefficient_mhz_per_mw2, pump_power_mw,
                        dark_count_rate_hz, excess_ratio_signal,
                        excess_ratio_idler, pair_statistics
    [timing]            jitter_sigma_ps, dead_time_ps, idler_delay_ps,
                        hardware_bin_ps, isolation_ps

Lines starting with ``#`` or ``;`` are comments.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from pathlib import Path

from .model import ExperimentConfig

CONFIG_ENV_VAR = "PAIRLAB_CONFIG"

_TOP_LEVEL = ("herald_side", "acquisition_time_s", "rng_seed")


class ConfigError(ValueError):
    pass


def _convert(raw: str, like, where: str):
    try:
        if isinstance(like, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(like).__name__}") from None


def _section_objects(cfg: ExperimentConfig):
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            yield f.name, value


def config_from_mapping(data: dict[str, dict[str, str]], base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = base or ExperimentConfig()
    known = {name for name, _ in _section_objects(base)} | {"experiment"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    updates = {}
    for name, obj in _section_objects(base):
        section = data.get(name, {})
        field_names = {f.name for f in dataclasses.fields(obj)}
        bad = set(section) - field_names
        if bad:
            raise ConfigError(f"[{name}] unknown key(s): {sorted(bad)}")
        kwargs = {k: _convert(v, getattr(obj, k), f"[{name}] {k}") for k, v in section.items()}
        if kwargs:
            try:
                updates[name] = dataclasses.replace(obj, **kwargs)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {exc}") from None
    top = data.get("experiment", {})
    bad = set(top) - set(_TOP_LEVEL)
    if bad:
        raise ConfigError(f"[experiment] unknown key(s): {sorted(bad)}")
    for k, v in top.items():
        updates[k] = _convert(v, getattr(base, k), f"[experiment] {k}")
    try:
        return dataclasses.replace(base, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return config_from_mapping({s: dict(parser[s]) for s in parser.sections()})


def default_config_path() -> Path:
    """The shipped config file holding the built-in values."""
    return Path(__file__).with_name("data") / "default.ini"


def load_config(path: str | os.PathLike | None = None) -> ExperimentConfig:
    """Load a config file; ``None`` falls back to ``$PAIRLAB_CONFIG`` then built-in defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
        if not path:
            return ExperimentConfig()
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    """Render the fully resolved config; ``parse_config(dump_config(c)) == c``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["experiment"] = {k: repr(getattr(cfg, k)) if isinstance(getattr(cfg, k), float) else str(getattr(cfg, k)) for k in _TOP_LEVEL}
    for name, obj in _section_objects(cfg):
        parser[name] = {
            f.name: repr(v) if isinstance(v, float) else str(v)
            for f in dataclasses.fields(obj)
            for v in [getattr(obj, f.name)]
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
