"""INI experiment files.

Example::

    [experiment]
    format_version = 1
    mode = a3ps
    reward = sparse
    episodes = 2000
    seeds = 0 1 2
    ada_path = out/ada.a3ck
    shared_encoder = no

    [alpha]
    decay_interval = 2000

    [ppo]
    learning_rate = 1e-3
    ratio_reference = behavior

    [env]
    max_steps = 50
"""
from __future__ import annotations

import configparser
from dataclasses import fields, replace

from a3ps.blend import AlphaSchedule
from a3ps.eda import PpoConfig
from a3ps.env import EnvConfig
from a3ps.errors import ConfigError, ParseError
from a3ps.harness.experiment import ExperimentConfig

FORMAT_VERSION = 1
_EXPERIMENT_KEYS = {"mode": str, "reward": str, "episodes": int, "ada_path": str, "out_dir": str,
                    "smoothing": int, "checkpoint_every": int}
_ENV_KEYS = ("rows", "cols", "max_steps", "seed", "tunnel_row")


def _typed(dc_type, section: configparser.SectionProxy, allowed=None) -> dict:
    out = {}
    types = {f.name: f.type for f in fields(dc_type)}
    for key, raw in section.items():
        if allowed is not None and key not in allowed or key not in types:
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        default = getattr(dc_type(), key)
        try:
            if isinstance(default, bool):
                out[key] = section.getboolean(key)
            elif isinstance(default, int):
                out[key] = int(raw)
            elif isinstance(default, str):
                out[key] = raw.strip()
            else:
                out[key] = float(raw)
        except ValueError:
            raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a valid value") from None
    return out


def parse_experiment(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], getattr(exc, "lineno", 0) or 0) from None
    if not cp.has_section("experiment"):
        raise ConfigError("config file needs an [experiment] section")
    exp = cp["experiment"]
    version = exp.get("format_version")
    if version is None or version.strip() != str(FORMAT_VERSION):
        raise ConfigError(f"unsupported or missing format_version {version!r} (expected {FORMAT_VERSION})")
    cfg = base or ExperimentConfig()
    kw: dict = {}
    for key, raw in exp.items():
        if key == "format_version":
            continue
        if key == "seeds":
            try:
                kw["seeds"] = tuple(int(s) for s in raw.replace(",", " ").split())
            except ValueError:
                raise ConfigError(f"[experiment] seeds = {raw!r} must be integers") from None
        elif key == "shared_encoder":
            try:
                kw[key] = exp.getboolean(key)
            except ValueError:
                raise ConfigError(f"[experiment] shared_encoder = {raw!r} is not a boolean") from None
        elif key in _EXPERIMENT_KEYS:
            try:
                kw[key] = _EXPERIMENT_KEYS[key](raw)
            except ValueError:
                raise ConfigError(f"[experiment] {key} = {raw!r} is not a valid value") from None
        else:
            raise ConfigError(f"[experiment] unknown key {key!r}")
    if cp.has_section("alpha"):
        kw["alpha"] = replace(cfg.alpha, **_typed(AlphaSchedule, cp["alpha"]))
    if cp.has_section("ppo"):
        kw["ppo"] = replace(cfg.ppo, **_typed(PpoConfig, cp["ppo"]))
    if cp.has_section("env"):
        # built from scratch so lanes and tunnel follow a changed geometry
        kw["env"] = EnvConfig(**_typed(EnvConfig, cp["env"], _ENV_KEYS))
    extra = set(cp.sections()) - {"experiment", "alpha", "ppo", "env"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    return replace(cfg, **kw).validate()


def load_experiment(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_experiment(fh.read(), base)
