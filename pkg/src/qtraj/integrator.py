"""Fixed-step RK4 integration of dBB and MdBB trajectories.

The stepping loop is compiled (see ``_kernels``) and runs each trajectory
independently; this module validates input and turns the raw kernel output
into :class:`Trajectory` and :class:`ScreenHit` values.  :func:`integrate` is
the one-trajectory view of :func:`integrate_batch`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from . import wavefield as wf
from .wavefield import Complex3, DisphericalModel, WaveModel

OVERFLOW_LIMIT = 1e6
SCREEN_TOL = 1e-9


class ConfigError(ValueError):
    """Invalid or unsupported configuration."""


class Scheme(str, enum.Enum):
    DBB = "dBB"
    MDBB = "MdBB"


class Hole(str, enum.Enum):
    A = "A"
    B = "B"


class Termination(str, enum.Enum):
    REACHED_SCREEN = "ReachedScreen"
    TIME_EXPIRED = "TimeExpired"
    NODE_POINT = "NodePoint"
    SINGULAR_POINT = "SingularPoint"
    OVERFLOW = "Overflow"
    BRANCH_CROSS = "BranchCross"




@dataclass(frozen=True)
class IntegrationConfig:
    dt: float = 0.01
    t_max: float = 50.0
    screen_x: float = 50.0
    record_stride: int = 10

    def __post_init__(self):
        for key in ("dt", "t_max", "screen_x"):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be a finite number > 0, got {v!r}")
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ConfigError(f"record_stride must be a positive integer, got {self.record_stride!r}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def refined(self, factor: int = 100) -> "IntegrationConfig":
        """Same run at a ``factor`` times finer step (oracle mode)."""
        return IntegrationConfig(self.dt / factor, self.t_max, self.screen_x,
                                 self.record_stride * factor)


@dataclass(frozen=True)
class ScreenHit:
    traj_id: int
    hole: Hole
    z_r: float
    z_i: float
    t_hit: float


@dataclass
class Trajectory:
    id: int
    hole: Hole
    scheme: Scheme
    t: np.ndarray
    points: np.ndarray  # (n_samples, 3) complex
    termination: Termination
    hit: Optional[ScreenHit] = field(default=None, repr=False)

    @property
    def samples(self):
        return [(float(t), Complex3.from_array(p)) for t, p in zip(self.t, self.points)]

    @property
    def final(self) -> Complex3:
        return Complex3.from_array(self.points[-1])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.id == other.id and self.hole == other.hole
                and self.scheme == other.scheme and self.termination == other.termination
                and self.hit == other.hit
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.points, other.points))


_CODE_TERMINATION = {
    _kernels.T_REACHED: Termination.REACHED_SCREEN,
    _kernels.T_EXPIRED: Termination.TIME_EXPIRED,
    _kernels.T_SINGULAR: Termination.SINGULAR_POINT,
    _kernels.T_NODE: Termination.NODE_POINT,
    _kernels.T_OVERFLOW: Termination.OVERFLOW,
    _kernels.T_BRANCH: Termination.BRANCH_CROSS,
}
_CHUNK = 512  # trajectories per kernel call when samples are kept


def _kernel_model(model: WaveModel):
    if isinstance(model, DisphericalModel):
        params = (model.k, model.z0, model.hbar_over_m, model.singular_radius)
        return _kernels.DISPHERICAL, np.array(params, dtype=float)
    params = (model.sigma0, model.kx, model.z0, model.hbar_over_m)
    return _kernels.PACKET, np.array(params, dtype=float)


def rk4_step(model: WaveModel, scheme, p, t: float, dt: float) -> Complex3:
    """Single RK4 step of one point; raises the field error on failure."""
    scheme = Scheme(scheme)
    a = np.asarray(p, dtype=complex)
    if scheme is Scheme.DBB and np.any(a.imag != 0):
        raise ConfigError("dBB integration needs a real starting point")
    kind, params = _kernel_model(model)
    x, y, z, status = _kernels.rk4(kind, params, scheme is Scheme.DBB, a[0], a[1], a[2],
                                   float(t), float(dt))
    wf._raise_on(status)
    new = np.array([x, y, z])
    if not np.all(np.isfinite(new)) or np.abs(new).max() > OVERFLOW_LIMIT:
        raise wf.EvaluationOverflow("coordinate magnitude above overflow limit")
    return Complex3.from_array(new)


def integrate_batch(model: WaveModel, scheme, starts, cfg: IntegrationConfig,
                    holes: Optional[Sequence] = None, ids: Optional[Sequence[int]] = None,
                    keep_samples: bool = True):
    """Integrate many starting points.

    Returns ``(trajectories, hits)``: one :class:`Trajectory` per start, in
    input order, and the :class:`ScreenHit` of each trajectory that reached
    the screen, ordered by id.  With ``keep_samples=False`` only the first and
    the terminal sample of each trajectory are stored.
    """
    scheme = Scheme(scheme)
    real = scheme is Scheme.DBB
    p0 = np.atleast_2d(np.asarray(starts, dtype=complex))
    n = len(p0)
    if p0.shape != (n, 3):
        raise ConfigError(f"starts must have shape (n, 3), got {p0.shape}")
    if not np.all(np.isfinite(p0)):
        raise ConfigError("starting points must be finite")
    ids = np.arange(n) if ids is None else np.asarray(ids, dtype=int)
    holes = [Hole.A if z.real >= 0 else Hole.B for z in p0[:, 2]] if holes is None \
        else [Hole(h) for h in holes]
    if real and np.any(p0.imag != 0):
        raise ConfigError("dBB integration needs real starting points")
    if np.any(p0[:, 0].real >= cfg.screen_x):
        raise ConfigError("starting point at or beyond the screen plane")
    kind, params = _kernel_model(model)
    check_branch = kind == _kernels.DISPHERICAL and not real
    max_samples = cfg.n_steps // cfg.record_stride + 1

    trajectories, hits = [], []
    chunk = _CHUNK if keep_samples else max(n, 1)
    for lo in range(0, n, chunk):
        part = np.ascontiguousarray(p0[lo:lo + chunk])
        out = _kernels.run(kind, params, real, check_branch, part, cfg.dt, cfg.n_steps,
                           cfg.screen_x, SCREEN_TOL, OVERFLOW_LIMIT, cfg.record_stride,
                           keep_samples, max_samples)
        _assemble(out, part, ids[lo:lo + chunk], holes[lo:lo + chunk], scheme, cfg,
                  keep_samples, trajectories, hits)
    hits.sort(key=lambda h: h.traj_id)
    return trajectories, hits


def _assemble(out, p0, ids, holes, scheme, cfg, keep_samples, trajectories, hits):
    codes, n_samples, final, final_t, hit_t, hit_z, samples = out
    for j in range(len(p0)):
        if keep_samples:
            ns = n_samples[j]
            t = np.arange(ns) * cfg.record_stride * cfg.dt
            pts = samples[j, :ns].copy()
        else:
            t, pts = np.zeros(1), p0[j:j + 1].copy()
        if t[-1] < final_t[j]:
            t = np.append(t, final_t[j])
            pts = np.vstack([pts, final[j]])
        termination = _CODE_TERMINATION[int(codes[j])]
        hit = None
        if termination is Termination.REACHED_SCREEN:
            hit = ScreenHit(int(ids[j]), holes[j], float(hit_z[j].real), float(hit_z[j].imag),
                            float(hit_t[j]))
            hits.append(hit)
        trajectories.append(Trajectory(int(ids[j]), holes[j], scheme, t, pts, termination, hit))


def integrate(model: WaveModel, scheme, start, cfg: IntegrationConfig,
              traj_id: int = 0, hole=None):
    """Integrate one trajectory; returns ``(Trajectory, ScreenHit or None)``."""
    trajs, hits = integrate_batch(model, scheme, [np.asarray(start, dtype=complex)], cfg,
                                  holes=None if hole is None else [hole], ids=[traj_id])
    return trajs[0], (hits[0] if hits else None)
