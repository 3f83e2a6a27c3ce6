"""Flat ``key = value`` run configuration with scenario presets.

A resolved configuration is a plain dict holding every key relevant to the
scenario; :func:`build` turns it into the model and config objects.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ensemble import Scenario, ScenarioConfig, Weighting, default_integration
from .integrator import ConfigError, IntegrationConfig
from .wavefield import DisphericalModel, PacketModel, WaveModel

# key -> parser; order fixes the order of manifests
SCHEMA = {
    "scenario": str,
    "n_per_hole": int,
    "delta": float,
    "radius_a": float,
    "weighting": str,
    "m_quadrature": int,
    "seed": int,
    "stochastic": lambda s: {"true": True, "false": False}[s.lower()],
    "dt": float,
    "t_max": float,
    "screen_x": float,
    "record_stride": int,
    "sigma0": float,
    "kx": float,
    "k": float,
    "singular_radius": float,
    "z0": float,
    "hbar_over_m": float,
    "bins": int,
    "z_min": float,
    "z_max": float,
}
PRESETS = tuple(s.value for s in Scenario)


def preset(name: str) -> dict:
    """Every default of a scenario preset, made explicit."""
    try:
        sc = Scenario(name)
    except ValueError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    s = ScenarioConfig.preset(sc)
    ic = default_integration(sc)
    cfg = {
        "scenario": sc.value,
        "n_per_hole": s.n_per_hole,
        "delta": s.delta,
        "radius_a": s.radius_a,
        "weighting": s.weighting.value,
        "m_quadrature": s.m_quadrature,
        "seed": s.seed,
        "stochastic": s.stochastic,
        "dt": ic.dt,
        "t_max": ic.t_max,
        "screen_x": ic.screen_x,
        "record_stride": ic.record_stride,
    }
    if sc.is_packet:
        m = PacketModel()
        cfg.update(sigma0=m.sigma0, kx=m.kx)
    else:
        m = DisphericalModel()
        cfg.update(k=m.k, singular_radius=m.singular_radius)
    cfg.update(z0=m.z0, hbar_over_m=m.hbar_over_m, bins=100, z_min=-40.0, z_max=40.0)
    return {k: cfg[k] for k in SCHEMA if k in cfg}


def parse_value(key: str, raw) -> object:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    try:
        return SCHEMA[key](raw)
    except (ValueError, KeyError):
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None


def resolve(base: dict, overrides: dict) -> dict:
    """Overlay ``overrides`` on ``base``; a changed scenario re-seeds from its preset."""
    cfg = dict(base)
    for key, raw in overrides.items():
        cfg[key] = parse_value(key, raw)
    if "scenario" not in cfg:
        raise ConfigError("config needs a scenario (or use --preset)")
    fresh = preset(cfg["scenario"])
    for key in list(cfg):
        if key not in fresh:
            raise ConfigError(f"config key {key!r} does not apply to scenario {cfg['scenario']}")
    fresh.update(cfg)
    return fresh


@dataclass(frozen=True)
class Run:
    scenario: ScenarioConfig
    integration: IntegrationConfig
    model: WaveModel
    bins: int
    z_min: float
    z_max: float


def build(cfg: dict) -> Run:
    """Validated objects from a resolved config; raises ConfigError naming the key."""
    try:
        sc = Scenario(cfg["scenario"])
        Weighting(cfg["weighting"])
    except ValueError as exc:
        raise ConfigError(f"scenario/weighting: {exc}") from None
    try:
        if sc.is_packet:
            model = PacketModel(cfg["sigma0"], cfg["kx"], cfg["z0"], cfg["hbar_over_m"])
        else:
            model = DisphericalModel(cfg["k"], cfg["z0"], cfg["hbar_over_m"], cfg["singular_radius"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    integ = IntegrationConfig(cfg["dt"], cfg["t_max"], cfg["screen_x"], cfg["record_stride"])
    scen = ScenarioConfig(sc, cfg["n_per_hole"], cfg["delta"], cfg["radius_a"], cfg["weighting"],
                          cfg["m_quadrature"], cfg["seed"], cfg["stochastic"])
    if not (isinstance(cfg["bins"], int) and cfg["bins"] >= 1):
        raise ConfigError(f"bins must be a positive integer, got {cfg['bins']!r}")
    if not cfg["z_min"] < cfg["z_max"]:
        raise ConfigError(f"z_window must satisfy z_min < z_max, got {cfg['z_min']}, {cfg['z_max']}")
    return Run(scen, integ, model, cfg["bins"], cfg["z_min"], cfg["z_max"])
