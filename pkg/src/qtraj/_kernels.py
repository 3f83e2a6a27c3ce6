"""Compiled per-trajectory RK4 loop.

Scalar re-statements of the log-gradient fields in :mod:`qtraj.wavefield`
(same branch rule, scaling and node test) plus the stepping loop, compiled
with numba.  Each trajectory is independent, so the outer loop runs in
parallel without changing results.
"""
from __future__ import annotations

import cmath
import math
import os

import numba
import numpy as np
from numba import njit, prange

from .wavefield import NODE, NODE_EPSILON, OK, OVERFLOW, SINGULAR

# the bundled TBB is often too old; OpenMP avoids a warning on every import
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

PACKET = 0
DISPHERICAL = 1
BRANCH = 10

# termination codes returned by run(); mapped to the enum by the integrator
T_REACHED = 0
T_EXPIRED = 1
T_SINGULAR = 2
T_NODE = 3
T_OVERFLOW = 4
T_BRANCH = 5


@njit(cache=True)
def _psqrt(w):
    if w.imag == 0.0 and w.real < 0.0:
        return -1j * math.sqrt(-w.real)
    return cmath.sqrt(w)


@njit(cache=True)
def _finite(c):
    return math.isfinite(c.real) and math.isfinite(c.imag)


@njit(cache=True)
def packet_log_grad(params, y, z, t):
    sigma0, kx, z0, hm = params[0], params[1], params[2], params[3]
    st = sigma0 * (1 + 1j * hm * t / (2 * sigma0 * sigma0))
    two_ss = 2 * sigma0 * st
    u = z * z0 / two_ss
    flip = u.real < 0
    w = -u if flip else u
    e = cmath.exp(-2 * w)
    denom = 1 + e
    lx = 1j * kx
    ly = -y / two_ss
    if abs(denom) < NODE_EPSILON * (1 + abs(e)):
        return lx, ly, 0j, NODE
    th = (1 - e) / denom
    if flip:
        th = -th
    lz = -(z - z0 * th) / two_ss
    return lx, ly, lz, OK


@njit(cache=True)
def dispherical_log_grad(params, x, y, z):
    k, z0, rs = params[0], params[1], params[3]
    rho2 = x * x + y * y
    r1 = _psqrt(rho2 + (z - z0) ** 2)
    r2 = _psqrt(rho2 + (z + z0) ** 2)
    if abs(r1) <= rs or abs(r2) <= rs:
        return 0j, 0j, 0j, SINGULAR
    log_scale = max(-k * r1.imag, -k * r2.imag)
    e1 = cmath.exp(1j * k * r1 - log_scale)
    e2 = cmath.exp(1j * k * r2 - log_scale)
    a1, a2 = e1 / r1, e2 / r2
    f1 = (1j * k * r1 - 1) * e1 / r1 ** 3
    f2 = (1j * k * r2 - 1) * e2 / r2 ** 3
    psi = a1 + a2
    if abs(psi) < NODE_EPSILON * (abs(a1) + abs(a2)):
        return 0j, 0j, 0j, NODE
    return x * (f1 + f2) / psi, y * (f1 + f2) / psi, ((z - z0) * f1 + (z + z0) * f2) / psi, OK


@njit(cache=True)
def velocity(kind, params, real, x, y, z, t):
    """(vx, vy, vz, status) of -i (hbar/m) grad(psi)/psi at one point."""
    if kind == PACKET:
        lx, ly, lz, status = packet_log_grad(params, y, z, t)
        hm = params[3]
    else:
        lx, ly, lz, status = dispherical_log_grad(params, x, y, z)
        hm = params[2]
    if status != OK:
        return 0j, 0j, 0j, status
    if not (_finite(lx) and _finite(ly) and _finite(lz)):
        return 0j, 0j, 0j, OVERFLOW
    vx, vy, vz = -1j * hm * lx, -1j * hm * ly, -1j * hm * lz
    if real:
        return complex(vx.real), complex(vy.real), complex(vz.real), OK
    return vx, vy, vz, OK


@njit(cache=True)
def rk4(kind, params, real, x, y, z, t, dt):
    """One classical RK4 step; status is that of the first failing stage."""
    h = 0.5 * dt
    k1x, k1y, k1z, s = velocity(kind, params, real, x, y, z, t)
    if s != OK:
        return x, y, z, s
    k2x, k2y, k2z, s = velocity(kind, params, real, x + h * k1x, y + h * k1y, z + h * k1z, t + h)
    if s != OK:
        return x, y, z, s
    k3x, k3y, k3z, s = velocity(kind, params, real, x + h * k2x, y + h * k2y, z + h * k2z, t + h)
    if s != OK:
        return x, y, z, s
    k4x, k4y, k4z, s = velocity(kind, params, real, x + dt * k3x, y + dt * k3y, z + dt * k3z, t + dt)
    if s != OK:
        return x, y, z, s
    c = dt / 6.0
    return (x + c * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + c * (k1y + 2 * k2y + 2 * k3y + k4y),
            z + c * (k1z + 2 * k2z + 2 * k3z + k4z), OK)


@njit(cache=True)
def _crossed(w_old, w_new):
    """The segment w_old -> w_new passes through the negative real axis."""
    if not w_old.imag * w_new.imag < 0:
        return False
    frac = w_old.imag / (w_old.imag - w_new.imag)
    return w_old.real + frac * (w_new.real - w_old.real) < 0


@njit(cache=True)
def _one(kind, params, real, check_branch, p0, dt, n_steps, screen_x, screen_tol,
         overflow_limit, stride, keep, samples):
    """Integrate one trajectory, writing samples in place.

    Returns (code, n_samples, final x, y, z, final_t, hit_t, hit_z).
    """
    x, y, z = p0[0], p0[1], p0[2]
    z0 = params[1] if kind == DISPHERICAL else 0.0
    w1 = x * x + y * y + (z - z0) ** 2
    w2 = x * x + y * y + (z + z0) ** 2
    ns = 0
    if keep:
        samples[0, 0], samples[0, 1], samples[0, 2] = x, y, z
        ns = 1
    for step in range(n_steps):
        t = step * dt
        nx, ny, nz, s = rk4(kind, params, real, x, y, z, t, dt)
        if s == OK:
            if not (_finite(nx) and _finite(ny) and _finite(nz)) or abs(nx) > overflow_limit \
                    or abs(ny) > overflow_limit or abs(nz) > overflow_limit:
                s = OVERFLOW
        if s == OK and check_branch:
            v1 = nx * nx + ny * ny + (nz - z0) ** 2
            v2 = nx * nx + ny * ny + (nz + z0) ** 2
            if _crossed(w1, v1) or _crossed(w2, v2):
                s = BRANCH
            w1, w2 = v1, v2
        if s != OK:
            if s == SINGULAR:
                code = T_SINGULAR
            elif s == NODE:
                code = T_NODE
            elif s == OVERFLOW:
                code = T_OVERFLOW
            else:
                code = T_BRANCH
            return code, ns, x, y, z, t, math.nan, 0j
        if keep and (step + 1) % stride == 0:
            samples[ns, 0], samples[ns, 1], samples[ns, 2] = nx, ny, nz
            ns += 1
        if nx.real >= screen_x - screen_tol:
            frac = (screen_x - x.real) / (nx.real - x.real)
            frac = min(max(frac, 0.0), 1.0)
            return (T_REACHED, ns, nx, ny, nz, (step + 1) * dt, t + frac * dt,
                    z + frac * (nz - z))
        x, y, z = nx, ny, nz
    return T_EXPIRED, ns, x, y, z, n_steps * dt, math.nan, 0j


@njit(cache=True, parallel=True)
def run(kind, params, real, check_branch, starts, dt, n_steps, screen_x, screen_tol,
        overflow_limit, stride, keep, max_samples):
    n = starts.shape[0]
    codes = np.empty(n, np.int64)
    n_samples = np.zeros(n, np.int64)
    final = np.empty((n, 3), np.complex128)
    final_t = np.empty(n)
    hit_t = np.empty(n)
    hit_z = np.empty(n, np.complex128)
    samples = np.empty((n, max_samples if keep else 1, 3), np.complex128)
    for j in prange(n):
        res = _one(kind, params, real, check_branch, starts[j], dt, n_steps, screen_x,
                   screen_tol, overflow_limit, stride, keep, samples[j])
        codes[j], n_samples[j] = res[0], res[1]
        final[j, 0], final[j, 1], final[j, 2] = res[2], res[3], res[4]
        final_t[j], hit_t[j], hit_z[j] = res[5], res[6], res[7]
    return codes, n_samples, final, final_t, hit_t, hit_z, samples
