"""Initial conditions for the four double-slit scenarios and ensemble runs."""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .integrator import (ConfigError, Hole, IntegrationConfig, Scheme, ScreenHit,
                         Termination, Trajectory, integrate_batch)
from .wavefield import DisphericalModel, PacketModel, WaveModel, psi


class Scenario(str, enum.Enum):
    DBB_PACKET = "dbb-packet"
    DBB_STATIONARY = "dbb-stationary"
    MDBB_PACKET = "mdbb-packet"
    MDBB_STATIONARY = "mdbb-stationary"

    @property
    def scheme(self) -> Scheme:
        return Scheme.DBB if self.name.startswith("DBB") else Scheme.MDBB

    @property
    def is_packet(self) -> bool:
        return self.name.endswith("PACKET")


class Weighting(str, enum.Enum):
    EQUIDISTANT = "equidistant"
    PSI_SQUARED = "psi2"


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    n_per_hole: int = 50
    delta: float = 3.0
    radius_a: float = 1e-3
    weighting: Weighting = Weighting.EQUIDISTANT
    m_quadrature: int = 4096
    seed: int = 0
    stochastic: bool = False  # psi2 only: random uniforms instead of quantile midpoints

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        if not (isinstance(self.n_per_hole, (int, np.integer)) and self.n_per_hole >= 1):
            raise ConfigError(f"n_per_hole must be a positive integer, got {self.n_per_hole!r}")
        if not self.delta >= 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta!r}")
        if not self.radius_a > 0:
            raise ConfigError(f"radius_a must be > 0, got {self.radius_a!r}")
        if not (isinstance(self.m_quadrature, (int, np.integer)) and self.m_quadrature >= 2):
            raise ConfigError(f"m_quadrature must be an integer >= 2, got {self.m_quadrature!r}")
        if (self.weighting is Weighting.PSI_SQUARED
                and self.scenario is not Scenario.MDBB_STATIONARY):
            raise ConfigError("psi2 weighting is only defined for mdbb-stationary")

    @classmethod
    def preset(cls, scenario, **overrides) -> "ScenarioConfig":
        scenario = Scenario(scenario)
        base = {
            Scenario.DBB_PACKET: dict(delta=3.0),
            Scenario.DBB_STATIONARY: dict(radius_a=1e-3),
            Scenario.MDBB_PACKET: dict(delta=5.0),
            Scenario.MDBB_STATIONARY: dict(radius_a=15.0),
        }[scenario]
        return replace(cls(scenario, **base), **overrides)


def default_model(scenario) -> WaveModel:
    return PacketModel() if Scenario(scenario).is_packet else DisphericalModel()


def default_integration(scenario) -> IntegrationConfig:
    """Packets arrive at the screen at t = D / (hbar kx / m) = 50; stationary
    trajectories travel slanted paths and need a longer horizon."""
    return IntegrationConfig(t_max=50.0 if Scenario(scenario).is_packet else 150.0)


def _interval(center: float, delta: float, n: int) -> np.ndarray:
    if n == 1:
        return np.array([center], dtype=float)
    return center + np.linspace(-delta, delta, n)


def _interior_angles(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _circle_starts(z0: float, a: float, theta: np.ndarray) -> np.ndarray:
    """Points with real part at the hole (0, 0, z0) and imaginary part on the
    circle x_i^2 + z_i^2 = a^2 of the xz-plane."""
    p = np.zeros((len(theta), 3), dtype=complex)
    p[:, 0] = 1j * a * np.cos(theta)
    p[:, 2] = z0 + 1j * a * np.sin(theta)
    return p


def circle_weight(model: WaveModel, a: float, theta) -> np.ndarray:
    """|psi|^2 at the hole-A start points (t = 0) for the given angles."""
    return np.abs(psi(model, _circle_starts(model.z0, a, np.asarray(theta, dtype=float)), 0.0)) ** 2


def psi_squared_angles(model: WaveModel, a: float, n: int, m_quadrature: int,
                       u=None) -> np.ndarray:
    """Angles on the start circle of hole A distributed like |psi|^2 * a dtheta.

    The density is discretised on ``m_quadrature`` intervals, integrated with
    the trapezoidal rule, and inverted at ``u`` (default: midpoint quantiles
    ``(i - 1/2)/n``) by linear interpolation of the cumulative distribution.
    """
    grid = np.linspace(0.0, 2 * np.pi, m_quadrature + 1)
    w = circle_weight(model, a, grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    if u is None:
        u = (np.arange(n) + 0.5) / n
    return np.interp(u, cdf, grid)


def initial_points(cfg: ScenarioConfig, model: WaveModel):
    """Starting points of both holes, hole A first.

    Returns ``(points, holes)`` with ``points`` of shape ``(2n, 3)``.  Hole B
    points are the exact z -> -z mirror images of the hole-A points.
    """
    sc, n = cfg.scenario, cfg.n_per_hole
    if sc.is_packet != isinstance(model, PacketModel):
        raise ConfigError(f"scenario {sc.value} does not match model {type(model).__name__}")
    z0 = model.z0
    if sc is Scenario.DBB_PACKET:
        a_pts = np.zeros((n, 3), dtype=complex)
        a_pts[:, 2] = _interval(z0, cfg.delta, n)
    elif sc is Scenario.MDBB_PACKET:
        a_pts = np.zeros((n, 3), dtype=complex)
        a_pts[:, 2] = z0 + 1j * _interval(0.0, cfg.delta, n)
    elif sc is Scenario.DBB_STATIONARY:
        theta = _interior_angles(-np.pi / 2, np.pi / 2, n)
        a_pts = np.zeros((n, 3), dtype=complex)
        a_pts[:, 0] = cfg.radius_a * np.cos(theta)
        a_pts[:, 2] = z0 + cfg.radius_a * np.sin(theta)
    elif cfg.weighting is Weighting.EQUIDISTANT:
        a_pts = _circle_starts(z0, cfg.radius_a, _interior_angles(0.0, 2 * np.pi, n))
    else:
        u = None
        if cfg.stochastic:
            u = np.sort(np.random.default_rng(cfg.seed).random(n))
        theta = psi_squared_angles(model, cfg.radius_a, n, cfg.m_quadrature, u)
        a_pts = _circle_starts(z0, cfg.radius_a, theta)
    b_pts = a_pts.copy()
    b_pts[:, 2] = -a_pts[:, 2]
    points = np.concatenate([a_pts, b_pts])
    holes = [Hole.A] * n + [Hole.B] * n
    return points, holes


class EnsembleResult(NamedTuple):
    trajectories: list[Trajectory]
    hits: list[ScreenHit]

    @property
    def counts(self) -> dict[Termination, int]:
        c = Counter(t.termination for t in self.trajectories)
        return {term: c.get(term, 0) for term in Termination}

    @property
    def abnormal_fraction(self) -> float:
        normal = (Termination.REACHED_SCREEN, Termination.TIME_EXPIRED)
        bad = sum(1 for t in self.trajectories if t.termination not in normal)
        return bad / max(len(self.trajectories), 1)


def run_ensemble(cfg: ScenarioConfig, icfg: IntegrationConfig, model: WaveModel,
                 keep_samples: bool = True) -> EnsembleResult:
    """Integrate every starting point of the scenario; ids are 0..2n-1, hole A first."""
    points, holes = initial_points(cfg, model)
    trajs, hits = integrate_batch(model, cfg.scenario.scheme, points, icfg, holes=holes,
                                  keep_samples=keep_samples)
    return EnsembleResult(trajs, hits)
