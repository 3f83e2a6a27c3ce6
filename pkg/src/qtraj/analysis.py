"""Screen statistics: trajectory-count histograms, the |psi|^2 reference,
their comparison, and crossing / which-way diagnostics."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .integrator import SCREEN_TOL, ConfigError, Hole, ScreenHit, Trajectory
from .wavefield import PacketModel, WaveModel, psi

PEAK_PROMINENCE = 0.05
CONTACT_TOL = 1e-9


@dataclass
class ScreenHistogram:
    z_min: float
    z_max: float
    n_bins: int
    counts: np.ndarray
    density: np.ndarray
    out_of_window: int = 0

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    @property
    def bin_width(self) -> float:
        return (self.z_max - self.z_min) / self.n_bins

    @property
    def normalized(self) -> bool:
        return int(self.counts.sum()) > 0


@dataclass
class ReferenceDensity:
    z: np.ndarray
    values: np.ndarray


@dataclass
class ComparisonReport:
    l1_distance: float
    peak_positions_hist: np.ndarray
    peak_positions_ref: np.ndarray
    max_peak_offset: float
    unmatched_hist: int = 0
    unmatched_ref: int = 0
    bin_width: float = 0.0
    normalized: bool = True

    @property
    def peaks_agree(self) -> bool:
        """Every histogram peak matched within one bin and fringe counts within one."""
        return (self.unmatched_hist == 0
                and self.max_peak_offset <= self.bin_width * (1 + 1e-9)
                and abs(len(self.peak_positions_hist) - len(self.peak_positions_ref)) <= 1)


def histogram(hits: Sequence[ScreenHit], z_min: float = -40.0, z_max: float = 40.0,
              n_bins: int = 100) -> ScreenHistogram:
    """Bin hits by z_r into half-open bins (last one closed) and normalise to unit area."""
    if not z_min < z_max:
        raise ConfigError("z_min must be smaller than z_max")
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    z = np.array([h.z_r for h in hits], dtype=float)
    inside = (z >= z_min) & (z <= z_max)
    counts, _ = np.histogram(z[inside], bins=n_bins, range=(z_min, z_max))
    width = (z_max - z_min) / n_bins
    total = counts.sum()
    density = counts / (total * width) if total else np.zeros(n_bins)
    return ScreenHistogram(z_min, z_max, n_bins, counts, density, int((~inside).sum()))


def screen_intensity(model: WaveModel, z, screen_x: float = 50.0,
                     t_eval: Optional[float] = None) -> np.ndarray:
    """Unnormalised |psi(D, 0, z)|^2 along the screen."""
    z = np.asarray(z, dtype=float)
    if isinstance(model, PacketModel):
        if t_eval is None:
            t_eval = screen_x / model.speed
    else:
        t_eval = 0.0
    pts = np.zeros(z.shape + (3,), dtype=complex)
    pts[..., 0] = screen_x
    pts[..., 2] = z
    return np.abs(psi(model, pts, t_eval)) ** 2


def reference_density(model: WaveModel, z_grid, t_eval: Optional[float] = None,
                      screen_x: float = 50.0) -> ReferenceDensity:
    """|psi|^2 on the screen, normalised by the trapezoidal rule over the grid.

    For packets ``t_eval`` defaults to the arrival time D m / (hbar kx).
    """
    z = np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or len(z) < 2 or np.any(np.diff(z) <= 0):
        raise ConfigError("z grid must be strictly increasing with at least 2 points")
    vals = screen_intensity(model, z, screen_x, t_eval)
    return ReferenceDensity(z, vals / np.trapezoid(vals, z))


def bin_average(ref: ReferenceDensity, edges) -> np.ndarray:
    """Exact bin averages of the piecewise-linear interpolant of ``ref``."""
    z, v = ref.z, ref.values
    edges = np.asarray(edges, dtype=float)
    if edges[0] < z[0] - CONTACT_TOL or edges[-1] > z[-1] + CONTACT_TOL:
        raise ConfigError("reference grid does not cover the histogram window")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(z))])

    def antiderivative(e):
        e = np.clip(e, z[0], z[-1])
        k = np.clip(np.searchsorted(z, e, side="right") - 1, 0, len(z) - 2)
        ve = np.interp(e, z, v)
        return cum[k] + 0.5 * (e - z[k]) * (v[k] + ve)

    big = antiderivative(edges)
    return np.diff(big) / np.diff(edges)


def find_fringes(density, centers, prominence: float = PEAK_PROMINENCE) -> np.ndarray:
    """Centres of strict local maxima whose prominence is at least
    ``prominence`` times the global maximum."""
    density = np.asarray(density, dtype=float)
    top = density.max() if density.size else 0.0
    if top <= 0:
        return np.array([])
    idx, _ = find_peaks(density, prominence=prominence * top)
    return np.asarray(centers)[idx]


def _match_peaks(a: np.ndarray, b: np.ndarray):
    """Greedy nearest matching; returns (matched offsets, #unmatched a, #unmatched b)."""
    pairs = sorted((abs(x - y), i, j) for i, x in enumerate(a) for j, y in enumerate(b))
    used_a, used_b, offsets = set(), set(), []
    for d, i, j in pairs:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        offsets.append(d)
    return offsets, len(a) - len(used_a), len(b) - len(used_b)


def compare(hist: ScreenHistogram, ref: ReferenceDensity) -> ComparisonReport:
    """L1 distance and fringe-position agreement between a histogram and the reference.

    The reference must be tabulated on exactly the histogram window.
    """
    span = hist.z_max - hist.z_min
    if (abs(ref.z[0] - hist.z_min) > 1e-9 * span or abs(ref.z[-1] - hist.z_max) > 1e-9 * span):
        raise ConfigError(
            f"reference window [{ref.z[0]}, {ref.z[-1]}] does not match "
            f"histogram window [{hist.z_min}, {hist.z_max}]")
    w = hist.bin_width
    ref_bins = bin_average(ref, hist.edges)
    l1 = float(np.abs(hist.density - ref_bins).sum() * w)
    ph = find_fringes(hist.density, hist.centers)
    pr = find_fringes(ref_bins, hist.centers)
    offsets, un_h, un_r = _match_peaks(ph, pr)
    return ComparisonReport(l1, ph, pr, float(max(offsets, default=0.0)), un_h, un_r, w,
                            hist.normalized)


# ------------------------------------------------------------ crossings

def _polyline(traj: Trajectory) -> np.ndarray:
    return np.column_stack([traj.points[:, 0].real, traj.points[:, 2].real])


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segment_intersections(p0, p1, q0, q1):
    """Intersection points of paired segments p0-p1 and q0-q1 (arrays (k, 2)).

    Returns ``(mask, points)``; touching and collinear-overlap contacts count,
    with the contact point taken as the first shared end point.
    """
    d1 = _orient(q0[:, 0], q0[:, 1], q1[:, 0], q1[:, 1], p0[:, 0], p0[:, 1])
    d2 = _orient(q0[:, 0], q0[:, 1], q1[:, 0], q1[:, 1], p1[:, 0], p1[:, 1])
    d3 = _orient(p0[:, 0], p0[:, 1], p1[:, 0], p1[:, 1], q0[:, 0], q0[:, 1])
    d4 = _orient(p0[:, 0], p0[:, 1], p1[:, 0], p1[:, 1], q1[:, 0], q1[:, 1])
    scale_p = np.hypot(*(p1 - p0).T)
    scale_q = np.hypot(*(q1 - q0).T)
    tol_p = CONTACT_TOL * np.maximum(scale_q, 1e-300)
    tol_q = CONTACT_TOL * np.maximum(scale_p, 1e-300)
    d1 = np.where(np.abs(d1) <= tol_p, 0.0, d1)
    d2 = np.where(np.abs(d2) <= tol_p, 0.0, d2)
    d3 = np.where(np.abs(d3) <= tol_q, 0.0, d3)
    d4 = np.where(np.abs(d4) <= tol_q, 0.0, d4)
    proper = (np.sign(d1) * np.sign(d2) <= 0) & (np.sign(d3) * np.sign(d4) <= 0)
    collinear = (d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0)
    # for collinear segments require overlapping projections
    lo_p, hi_p = np.minimum(p0, p1), np.maximum(p0, p1)
    lo_q, hi_q = np.minimum(q0, q1), np.maximum(q0, q1)
    overlap = np.all((lo_p <= hi_q + CONTACT_TOL) & (lo_q <= hi_p + CONTACT_TOL), axis=1)
    mask = np.where(collinear, overlap, proper & overlap)
    denom = d1 - d2
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom != 0, d1 / denom, 0.0)
    pts = p0 + s[:, None] * (p1 - p0)
    return mask, pts


def _candidate_pairs(seg: np.ndarray, own: np.ndarray) -> np.ndarray:
    """Segment index pairs (i < j) of different owners whose bounding boxes
    share a cell of a uniform grid; shape (k, 2), unique rows."""
    lo = seg.min(axis=1) - CONTACT_TOL
    hi = seg.max(axis=1) + CONTACT_TOL
    extent = np.max(hi - lo, axis=1)
    cell = max(float(np.quantile(extent, 0.95)), 1e-6)
    c_lo = np.floor((lo - lo.min(axis=0)) / cell).astype(np.int64)
    c_hi = np.floor((hi - lo.min(axis=0)) / cell).astype(np.int64)
    nx = c_hi[:, 0] - c_lo[:, 0] + 1
    nz = c_hi[:, 1] - c_lo[:, 1] + 1
    reps = nx * nz
    sid = np.repeat(np.arange(len(seg)), reps)
    k = np.arange(len(sid)) - np.repeat(np.cumsum(reps) - reps, reps)
    cx = c_lo[sid, 0] + k // nz[sid]
    cz = c_lo[sid, 1] + k % nz[sid]
    key = cx * (int(c_hi[:, 1].max()) + 2) + cz
    order = np.argsort(key, kind="stable")
    key, sid = key[order], sid[order]
    bounds = np.flatnonzero(np.diff(key)) + 1
    starts = np.concatenate([[0], bounds])
    sizes = np.diff(np.concatenate([starts, [len(key)]]))
    out = []
    for size in np.unique(sizes[sizes > 1]):
        base = starts[sizes == size]
        ti, tj = np.triu_indices(size, 1)
        ii = sid[(base[:, None] + ti).ravel()]
        jj = sid[(base[:, None] + tj).ravel()]
        keep = own[ii] != own[jj]
        ii, jj = ii[keep], jj[keep]
        out.append(np.column_stack([np.minimum(ii, jj), np.maximum(ii, jj)]))
    if not out:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.concatenate(out), axis=0)


def crossing_points(trajectories: Sequence[Trajectory], chunk: int = 1_000_000):
    """All pairwise contacts of the real projections (x_r, z_r) of trajectories.

    Returns a dict ``{(id_a, id_b): [points]}`` with id_a < id_b.  Contacts
    closer than the contact tolerance are merged, and a contact at the common
    starting point of both trajectories is not a crossing.
    """
    segs, owners = [], []
    for k, tr in enumerate(trajectories):
        line = _polyline(tr)
        if len(line) < 2:
            continue
        segs.append(np.stack([line[:-1], line[1:]], axis=1))
        owners.append(np.full(len(line) - 1, k))
    if not segs:
        return {}
    seg = np.concatenate(segs)
    own = np.concatenate(owners)
    pairs = _candidate_pairs(seg, own)
    start_pts = np.array([_polyline(tr)[0] for tr in trajectories])

    found = defaultdict(list)
    for c0 in range(0, len(pairs), chunk):
        ii, jj = pairs[c0:c0 + chunk].T
        mask, pts = _segment_intersections(seg[ii, 0], seg[ii, 1], seg[jj, 0], seg[jj, 1])
        a, b, pts = own[ii[mask]], own[jj[mask]], pts[mask]
        at_start = ((np.hypot(*(pts - start_pts[a]).T) <= CONTACT_TOL)
                    & (np.hypot(*(pts - start_pts[b]).T) <= CONTACT_TOL))
        for ai, bi, pt in zip(a[~at_start], b[~at_start], pts[~at_start]):
            found[(min(ai, bi), max(ai, bi))].append(pt)

    out = {}
    for (a, b), pts in found.items():
        merged = []
        for pt in sorted(pts, key=lambda q: (q[0], q[1])):
            if not merged or np.hypot(*(pt - merged[-1])) > CONTACT_TOL:
                merged.append(pt)
        ia, ib = trajectories[a].id, trajectories[b].id
        out[(min(ia, ib), max(ia, ib))] = merged
    return out


@dataclass
class WhichWayReport:
    separable: bool
    crossings_ab: int
    crossings_aa: int
    crossings_bb: int
    range_a: tuple = (np.nan, np.nan)
    range_b: tuple = (np.nan, np.nan)
    n_hits_a: int = 0
    n_hits_b: int = 0

    @property
    def which_way(self) -> bool:
        return self.separable and self.crossings_ab == 0


def which_way_report(hits: Sequence[ScreenHit], trajectories: Sequence[Trajectory]) -> WhichWayReport:
    """Separability of the per-hole hit ranges and crossing counts by hole pair."""
    za = np.array([h.z_r for h in hits if Hole(h.hole) is Hole.A])
    zb = np.array([h.z_r for h in hits if Hole(h.hole) is Hole.B])
    rng = lambda z: (float(z.min()), float(z.max())) if len(z) else (np.nan, np.nan)
    ra, rb = rng(za), rng(zb)
    if len(za) and len(zb):
        separable = ra[1] < rb[0] or rb[1] < ra[0]
    else:
        separable = True
    by_id = {t.id: Hole(t.hole) for t in trajectories}
    n = {"AB": 0, "AA": 0, "BB": 0}
    for (a, b), pts in crossing_points(trajectories).items():
        key = "".join(sorted(by_id[a].value + by_id[b].value))
        n[key] += len(pts)
    return WhichWayReport(separable, n["AB"], n["AA"], n["BB"], ra, rb, len(za), len(zb))


# ---------------------------------------------------------------- helix

@dataclass
class HelixProbe:
    planes: list
    points: dict = field(default_factory=dict)  # plane -> list of (traj_id, hole, z_r, z_i)
    missing: dict = field(default_factory=dict)  # plane -> number of trajectories not reaching it


def _first_crossing(traj: Trajectory, plane: float):
    xr = traj.points[:, 0].real
    # same tolerance as screen detection, so the screen plane itself is probed
    above = np.nonzero(xr >= plane - SCREEN_TOL)[0]
    if len(above) == 0:
        return None
    j = above[0]
    if j == 0:
        return traj.points[0, 2] if xr[0] >= plane - SCREEN_TOL and xr[0] <= plane else None
    frac = min(1.0, (plane - xr[j - 1]) / (xr[j] - xr[j - 1]))
    return traj.points[j - 1, 2] + frac * (traj.points[j, 2] - traj.points[j - 1, 2])


def helix_probe(trajectories: Sequence[Trajectory], planes: Sequence[float]) -> HelixProbe:
    """Complex z of every trajectory where its x_r first reaches each plane."""
    probe = HelixProbe(list(planes))
    for plane in planes:
        rows, miss = [], 0
        for tr in trajectories:
            z = _first_crossing(tr, plane)
            if z is None:
                miss += 1
            else:
                rows.append((tr.id, Hole(tr.hole), float(z.real), float(z.imag)))
        probe.points[plane] = rows
        probe.missing[plane] = miss
    return probe


def pair_winding(probe: HelixProbe) -> dict:
    """Unwrapped rotation angle of z_b - z_a across consecutive planes, for
    every same-hole pair present on all planes."""
    per_plane = [{r[0]: (r[1], complex(r[2], r[3])) for r in probe.points[p]} for p in probe.planes]
    common = set.intersection(*(set(d) for d in per_plane)) if per_plane else set()
    out = {}
    for a, b in combinations(sorted(common), 2):
        if per_plane[0][a][0] is not per_plane[0][b][0]:
            continue
        diffs = np.array([d[b][1] - d[a][1] for d in per_plane])
        if np.any(diffs == 0):
            continue
        out[(a, b)] = float(np.sum(np.diff(np.unwrap(np.angle(diffs)))))
    return out


def centroid_winding(probe: HelixProbe) -> dict:
    """Unwrapped rotation angle of each trajectory about the per-plane centroid."""
    per_plane = [{r[0]: complex(r[2], r[3]) for r in probe.points[p]} for p in probe.planes]
    common = set.intersection(*(set(d) for d in per_plane)) if per_plane else set()
    if not common:
        return {}
    ids = sorted(common)
    cents = [np.mean([d[i] for i in ids]) for d in per_plane]
    out = {}
    for i in ids:
        rel = np.array([d[i] - c for d, c in zip(per_plane, cents)])
        out[i] = float(np.sum(np.diff(np.unwrap(np.angle(rel)))))
    return out
