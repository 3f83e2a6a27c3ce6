"""Plain-text file formats: trajectories, hits, histograms, key = value reports."""
from __future__ import annotations

import csv
import hashlib
from pathlib import Path
from typing import Iterable

import numpy as np

from .integrator import ConfigError, Hole, Scheme, ScreenHit, Termination, Trajectory

TRAJ_COLUMNS = ["traj_id", "hole", "t", "x_r", "x_i", "y_r", "y_i", "z_r", "z_i"]
HIT_COLUMNS = ["traj_id", "hole", "t_hit", "z_r", "z_i"]
TERM_COLUMNS = ["traj_id", "hole", "scheme", "termination"]


def fmt(v) -> str:
    """Shortest round-trip decimal; negative zero is written as 0.0."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(0.0 if v == 0 else v)
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def write_rows(path: Path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_trajectories(path, trajectories: list[Trajectory]) -> None:
    def rows():
        for tr in trajectories:
            pts = tr.points
            for t, (x, y, z) in zip(tr.t, pts):
                yield (tr.id, tr.hole, t, x.real, x.imag, y.real, y.imag, z.real, z.imag)
    write_rows(Path(path), TRAJ_COLUMNS, rows())


def write_hits(path, hits: list[ScreenHit]) -> None:
    write_rows(Path(path), HIT_COLUMNS,
                ((h.traj_id, h.hole, h.t_hit, h.z_r, h.z_i) for h in hits))


def write_terminations(path, trajectories: list[Trajectory]) -> None:
    write_rows(Path(path), TERM_COLUMNS,
                ((t.id, t.hole, t.scheme, t.termination) for t in trajectories))


def _read_table(path, columns: list[str]) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != columns:
                raise ConfigError(f"{path}: expected columns {','.join(columns)}, "
                                  f"got {','.join(reader.fieldnames or [])}")
            return list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def read_hits(path) -> list[ScreenHit]:
    hits = []
    for n, row in enumerate(_read_table(path, HIT_COLUMNS), start=2):
        try:
            hits.append(ScreenHit(int(row["traj_id"]), Hole(row["hole"]), float(row["z_r"]),
                                  float(row["z_i"]), float(row["t_hit"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{n}: malformed hit row ({exc})") from None
    return hits


def read_trajectories(path, terminations_path=None) -> list[Trajectory]:
    """Rebuild trajectories from a trajectory file (rows grouped by id).

    Scheme and termination come from the terminations file when given,
    otherwise they are inferred (MdBB if any imaginary part is nonzero) or
    left as TimeExpired.
    """
    groups: dict[int, list] = {}
    holes: dict[int, Hole] = {}
    for n, row in enumerate(_read_table(path, TRAJ_COLUMNS), start=2):
        try:
            i = int(row["traj_id"])
            vals = [float(row[c]) for c in TRAJ_COLUMNS[2:]]
            holes.setdefault(i, Hole(row["hole"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{n}: malformed trajectory row ({exc})") from None
        groups.setdefault(i, []).append(vals)
    meta = {}
    if terminations_path is not None and Path(terminations_path).exists():
        for row in _read_table(terminations_path, TERM_COLUMNS):
            meta[int(row["traj_id"])] = (Scheme(row["scheme"]), Termination(row["termination"]))
    out = []
    for i in sorted(groups):
        a = np.array(groups[i])
        pts = np.column_stack([a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4],
                               a[:, 5] + 1j * a[:, 6]])
        scheme, term = meta.get(i, (Scheme.MDBB if np.any(a[:, [2, 4, 6]] != 0) else Scheme.DBB,
                                    Termination.TIME_EXPIRED))
        out.append(Trajectory(i, holes[i], scheme, a[:, 0], pts, term))
    return out


def write_kv(path, items: Iterable[tuple[str, object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in items:
            fh.write(f"{k} = {fmt(v)}\n")


def read_kv(path) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
