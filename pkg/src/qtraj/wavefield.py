"""Wave functions of the two-hole set-up and the trajectory velocity fields.

Two wave families are supported:

* ``PacketModel``: two spreading Gaussian packets centred on the holes at
  ``z = +z0`` (hole A) and ``z = -z0`` (hole B), each a plane wave along x.
* ``DisphericalModel``: two coherent outgoing spherical waves
  ``exp(i k r_j) / r_j`` emitted from point sources at the holes.

Every evaluator accepts points with complex coordinates, either a
:class:`Complex3` or any array whose last axis has length 3.  The dBB field is
the real part of ``-i (hbar/m) grad(psi) / psi`` restricted to real points;
the MdBB field is the full complex value.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

NODE_EPSILON = 1e-12

# status codes shared with the integrator
OK = 0
SINGULAR = 1
NODE = 2
OVERFLOW = 3


class FieldError(ArithmeticError):
    """Base class for failures of a wave-function evaluation."""


class SingularPoint(FieldError):
    """The point lies within ``singular_radius`` of a point source."""


class NodePoint(FieldError):
    """psi vanishes (relative to its partial waves) and the velocity is undefined."""


class EvaluationOverflow(FieldError):
    """A complex exponential overflowed; typically a runaway complex trajectory."""


_ERRORS = {SINGULAR: SingularPoint, NODE: NodePoint, OVERFLOW: EvaluationOverflow}


@dataclass(frozen=True)
class Complex3:
    """A point of complexified 3-space."""

    x: complex = 0j
    y: complex = 0j
    z: complex = 0j

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = complex(getattr(self, name))
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError(f"non-finite coordinate {name}={v!r}")
            object.__setattr__(self, name, v)

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or complex)

    @classmethod
    def from_array(cls, a) -> "Complex3":
        a = np.asarray(a, dtype=complex)
        return cls(a[0], a[1], a[2])

    @property
    def real(self) -> "Complex3":
        return Complex3(self.x.real, self.y.real, self.z.real)

    def is_real(self) -> bool:
        return self.x.imag == 0 and self.y.imag == 0 and self.z.imag == 0


@dataclass(frozen=True)
class PacketModel:
    """Two Gaussian packets, spreading transversally, moving along +x."""

    sigma0: float = 1.0
    kx: float = 1.0
    z0: float = 10.0
    hbar_over_m: float = 1.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        if not self.hbar_over_m > 0:
            raise ValueError("hbar_over_m must be > 0")
        if not self.z0 > 0:
            raise ValueError("z0 must be > 0")

    @property
    def speed(self) -> float:
        """Longitudinal group velocity hbar*kx/m."""
        return self.hbar_over_m * self.kx


@dataclass(frozen=True)
class DisphericalModel:
    """Two outgoing spherical waves from coherent point sources at the holes."""

    k: float = 1.0
    z0: float = 10.0
    hbar_over_m: float = 1.0
    singular_radius: float = 1e-6

    def __post_init__(self):
        for name in ("k", "z0", "hbar_over_m", "singular_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


WaveModel = Union[PacketModel, DisphericalModel]


def _points(p) -> np.ndarray:
    a = np.asarray(p, dtype=complex)
    if a.shape[-1:] != (3,):
        raise ValueError(f"points need a trailing axis of length 3, got shape {a.shape}")
    return a


def _raise_on(status) -> None:
    status = np.asarray(status)
    for code in (SINGULAR, OVERFLOW, NODE):
        if np.any(status == code):
            raise _ERRORS[code]()


def principal_sqrt(w):
    """Principal square root, with points exactly on the negative real axis
    mapped to ``-i*sqrt(|w|)`` (the limit from below the cut).

    The tie-break matters only for starting points placed exactly on the cut,
    e.g. the imaginary start circle around a hole where ``r**2 = -a**2``.
    """
    w = np.asarray(w, dtype=complex)
    root = np.sqrt(w + 0j)
    on_cut = (w.imag == 0) & (w.real < 0)
    return np.where(on_cut, -1j * np.sqrt(np.abs(w.real)), root)


def sigma_t(model: PacketModel, t):
    """Complex packet width sigma0 * (1 + i (hbar/m) t / (2 sigma0^2))."""
    s0 = model.sigma0
    return s0 * (1 + 1j * model.hbar_over_m * np.asarray(t, dtype=float) / (2 * s0 * s0))


# ---------------------------------------------------------------- packets

def _packet_parts(model: PacketModel, a: np.ndarray, t: float):
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    st = sigma_t(model, t)
    q = 4 * model.sigma0 * st
    norm = 1.0 / ((2 * np.pi) ** 0.25 * np.sqrt(st))
    energy_phase = 0.5 * model.hbar_over_m * model.kx ** 2 * t
    plane = np.exp(1j * (model.kx * x - energy_phase))
    g_a = np.exp(-((z - model.z0) ** 2 + y * y) / q)
    g_b = np.exp(-((z + model.z0) ** 2 + y * y) / q)
    return norm * plane, g_a, g_b, st


def packet_psi(model: PacketModel, p, t: float = 0.0):
    """psi_A + psi_B (C_A = C_B = 1) at complex points."""
    a = _points(p)
    with np.errstate(over="raise", invalid="raise"):
        try:
            pre, g_a, g_b, _ = _packet_parts(model, a, t)
            val = pre * (g_a + g_b)
        except FloatingPointError as exc:
            raise EvaluationOverflow(str(exc)) from None
    if not np.all(np.isfinite(val)):
        raise EvaluationOverflow("packet psi is not finite")
    return val


def _packet_grad(model: PacketModel, a: np.ndarray, t: float):
    pre, g_a, g_b, st = _packet_parts(model, a, t)
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    two_ss = 2 * model.sigma0 * st
    psi = pre * (g_a + g_b)
    gx = 1j * model.kx * psi
    gy = -y / two_ss * psi
    gz = -pre * ((z - model.z0) * g_a + (z + model.z0) * g_b) / two_ss
    return psi, np.stack([gx, gy, gz], axis=-1)


def _packet_log_grad(model: PacketModel, a: np.ndarray, t: float):
    """grad(psi)/psi for the packet pair, written with tanh so that it stays
    finite where psi itself under- or overflows."""
    y, z = a[..., 1], a[..., 2]
    two_ss = 2 * model.sigma0 * sigma_t(model, t)
    u = z * model.z0 / two_ss
    flip = u.real < 0
    w = np.where(flip, -u, u)
    e = np.exp(-2 * w)  # |e| <= 1
    denom = 1 + e
    status = np.where(np.abs(denom) < NODE_EPSILON * (1 + np.abs(e)), NODE, OK)
    with np.errstate(divide="ignore", invalid="ignore"):
        th = (1 - e) / denom
    th = np.where(flip, -th, th)
    lx = np.full(z.shape, 1j * model.kx, dtype=complex)
    ly = -y / two_ss
    lz = -(z - model.z0 * th) / two_ss
    return np.stack([lx, ly, lz], axis=-1), status


# ---------------------------------------------------------- dispherical

def source_distances_squared(model: DisphericalModel, p):
    """Squared distances (r1^2, r2^2) to holes A and B, as complex numbers."""
    a = _points(p)
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    rho2 = x * x + y * y
    return rho2 + (z - model.z0) ** 2, rho2 + (z + model.z0) ** 2


def _dispherical_terms(model: DisphericalModel, a: np.ndarray):
    """Scaled partial waves and radial derivative factors.

    Both exponentials are divided by the larger of their moduli, so the
    returned psi and grad share an unknown positive factor that cancels in
    grad/psi.  Returns (psi_s, grad_s, weight_s, log_scale, status).
    """
    w1, w2 = source_distances_squared(model, a)
    r1, r2 = principal_sqrt(w1), principal_sqrt(w2)
    k = model.k
    status = np.where(
        (np.abs(r1) <= model.singular_radius) | (np.abs(r2) <= model.singular_radius),
        SINGULAR, OK)
    # guard the singular entries so the arithmetic below stays quiet
    r1 = np.where(status == SINGULAR, 1.0, r1)
    r2 = np.where(status == SINGULAR, 1.0, r2)
    log_scale = np.maximum(-k * r1.imag, -k * r2.imag)
    e1 = np.exp(1j * k * r1 - log_scale)
    e2 = np.exp(1j * k * r2 - log_scale)
    a1, a2 = e1 / r1, e2 / r2
    f1 = (1j * k * r1 - 1) * e1 / r1 ** 3
    f2 = (1j * k * r2 - 1) * e2 / r2 ** 3
    x, y, z = a[..., 0], a[..., 1], a[..., 2]
    grad = np.stack([x * (f1 + f2), y * (f1 + f2),
                     (z - model.z0) * f1 + (z + model.z0) * f2], axis=-1)
    psi = a1 + a2
    weight = np.abs(a1) + np.abs(a2)
    return psi, grad, weight, log_scale, status


def _unscale(vals, log_scale, status):
    with np.errstate(over="ignore", invalid="ignore"):
        out = vals * np.exp(log_scale if np.ndim(vals) == np.ndim(log_scale)
                            else log_scale[..., None])
    bad = ~np.isfinite(out)
    if bad.ndim > np.ndim(status):
        bad = bad.any(axis=-1)
    status = np.where((status == OK) & bad, OVERFLOW, status)
    return out, status


def dispherical_psi(model: DisphericalModel, p):
    """exp(i k r1)/r1 + exp(i k r2)/r2 with principal-branch complex distances."""
    a = _points(p)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        psi, _, _, log_scale, status = _dispherical_terms(model, a)
    psi, status = _unscale(psi, log_scale, status)
    _raise_on(status)
    return psi


# --------------------------------------------------------------- dispatch

def psi(model: WaveModel, p, t: float = 0.0):
    """Wave function of either model; the dispherical wave ignores ``t``."""
    if isinstance(model, PacketModel):
        return packet_psi(model, p, t)
    return dispherical_psi(model, p)


def grad_psi(model: WaveModel, p, t: float = 0.0) -> np.ndarray:
    """Analytic gradient (d/dx, d/dy, d/dz) of psi at complex points.

    Returns an array with a trailing axis of length 3.
    """
    a = _points(p)
    if isinstance(model, PacketModel):
        with np.errstate(over="raise", invalid="raise"):
            try:
                _, g = _packet_grad(model, a, t)
            except FloatingPointError as exc:
                raise EvaluationOverflow(str(exc)) from None
        if not np.all(np.isfinite(g)):
            raise EvaluationOverflow("packet gradient is not finite")
        return g
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        _, g, _, log_scale, status = _dispherical_terms(model, a)
    g, status = _unscale(g, log_scale, status)
    _raise_on(status)
    return g


def log_gradient(model: WaveModel, p, t: float = 0.0):
    """grad(psi)/psi together with a per-point status code array.

    Never raises; failures are reported through the status codes
    (``OK``, ``SINGULAR``, ``NODE``, ``OVERFLOW``).  This is the batch entry
    point used by the integrator.
    """
    a = _points(p)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if isinstance(model, PacketModel):
            lg, status = _packet_log_grad(model, a, t)
        else:
            psi_s, g, weight, _, status = _dispherical_terms(model, a)
            status = np.where((status == OK) & (np.abs(psi_s) < NODE_EPSILON * weight),
                              NODE, status)
            lg = g / np.where(status == OK, psi_s, 1.0)[..., None]
    finite = np.isfinite(lg).all(axis=-1)
    status = np.where((status == OK) & ~finite, OVERFLOW, status)
    return lg, status


def velocity(model: WaveModel, p, t: float = 0.0, *, real: bool = False):
    """Batch velocity field and status codes; ``real=True`` gives the dBB field."""
    lg, status = log_gradient(model, p, t)
    v = -1j * model.hbar_over_m * lg
    if real:
        v = v.real
    return v, status


def mdbb_velocity(model: WaveModel, p, t: float = 0.0) -> np.ndarray:
    """Complex velocity -i (hbar/m) grad(psi)/psi."""
    v, status = velocity(model, p, t)
    _raise_on(status)
    return v


def dbb_velocity(model: WaveModel, p, t: float = 0.0) -> np.ndarray:
    """Real velocity Re[-i (hbar/m) grad(psi)/psi] at real points."""
    a = _points(p)
    if np.any(a.imag != 0):
        raise ValueError("dbb_velocity is defined only at real points")
    v, status = velocity(model, a, t, real=True)
    _raise_on(status)
    return v
