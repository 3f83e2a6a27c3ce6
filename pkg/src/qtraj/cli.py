"""Command line: ``qtraj simulate | screen | whichway | helix``.

Exit codes: 0 ok, 2 configuration or input error, 3 degenerate run (more than
half of the trajectories ended abnormally), 1 manifest hash mismatch.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import io
from .analysis import (bin_average, centroid_winding, compare, helix_probe, histogram, pair_winding,
                       reference_density, which_way_report)
from .ensemble import run_ensemble
from .integrator import ConfigError, Termination

log = logging.getLogger("qtraj")

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_MISMATCH = 1

# flag -> config key
FLAG_KEYS = {
    "dt": "dt", "t_max": "t_max", "n_per_hole": "n_per_hole", "delta": "delta",
    "radius_a": "radius_a", "weighting": "weighting", "bins": "bins", "seed": "seed",
    "record_stride": "record_stride", "screen_x": "screen_x",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=cfgmod.PRESETS, help="load the default parameters of a scenario")
    p.add_argument("--config", type=Path, help="flat key = value config file (overlays the preset)")
    p.add_argument("--manifest", type=Path, help="re-run the configuration recorded in a manifest")
    p.add_argument("--dt")
    p.add_argument("--t-max")
    p.add_argument("--n-per-hole")
    p.add_argument("--delta")
    p.add_argument("--radius-a")
    p.add_argument("--weighting", help="equidistant | psi2")
    p.add_argument("--bins")
    p.add_argument("--z-window", help="z_min,z_max of the screen window")
    p.add_argument("--seed")
    p.add_argument("--record-stride")
    p.add_argument("--screen-x")


def _resolved_config(args, default_manifest: Path | None = None) -> dict:
    base: dict = {}
    manifest = args.manifest
    if manifest is None and not args.preset and not args.config and default_manifest is not None \
            and default_manifest.exists():
        manifest = default_manifest
    if args.preset:
        base = cfgmod.preset(args.preset)
    overrides: dict = {}
    if manifest is not None:
        kv = io.read_kv(manifest)
        overrides.update({k[len("config."):]: v for k, v in kv.items() if k.startswith("config.")})
    if args.config is not None:
        overrides.update(io.read_kv(args.config))
    for flag, key in FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "z_window", None):
        try:
            lo, hi = args.z_window.split(",")
        except ValueError:
            raise ConfigError(f"z_window must be 'z_min,z_max', got {args.z_window!r}") from None
        overrides["z_min"], overrides["z_max"] = lo, hi
    return cfgmod.resolve(base, overrides)


def _manifest_items(command: str, cfg: dict, hashes: dict) -> list:
    items = [("tool", f"qtraj {__version__}"), ("command", command), ("scenario", cfg["scenario"])]
    items += [(f"config.{k}", v) for k, v in cfg.items()]
    items += [(f"sha256.{name}", h) for name, h in hashes.items()]
    return items


# ------------------------------------------------------------------ simulate

def cmd_simulate(args) -> int:
    cfg = _resolved_config(args)
    run = cfgmod.build(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keep = not args.no_trajectories
    log.info("simulating %s: %d trajectories per hole", cfg["scenario"], run.scenario.n_per_hole)
    res = run_ensemble(run.scenario, run.integration, run.model, keep_samples=keep)

    files = {}
    if keep:
        io.write_trajectories(out / "trajectories.csv", res.trajectories)
        files["trajectories.csv"] = out / "trajectories.csv"
    io.write_hits(out / "hits.csv", res.hits)
    files["hits.csv"] = out / "hits.csv"
    io.write_terminations(out / "terminations.csv", res.trajectories)
    files["terminations.csv"] = out / "terminations.csv"
    hashes = {name: io.sha256(p) for name, p in files.items()}
    io.write_kv(out / "manifest.txt", _manifest_items("simulate", cfg, hashes))

    counts = res.counts
    print(f"trajectories = {len(res.trajectories)}")
    for term in Termination:
        print(f"{term.value} = {counts[term]}")

    status = 0
    if args.manifest is not None:
        recorded = {k[len("sha256."):]: v for k, v in io.read_kv(args.manifest).items()
                    if k.startswith("sha256.")}
        bad = [n for n, h in recorded.items() if hashes.get(n) != h]
        if bad:
            print(f"manifest mismatch: {', '.join(bad)}", file=sys.stderr)
            status = EXIT_MISMATCH
        else:
            print("manifest hashes reproduced")
    if res.abnormal_fraction > 0.5:
        print(f"degenerate run: {res.abnormal_fraction:.1%} of trajectories ended abnormally",
              file=sys.stderr)
        return EXIT_DEGENERATE
    return status


# -------------------------------------------------------------------- screen

def cmd_screen(args) -> int:
    hits_path = Path(args.hits)
    cfg = _resolved_config(args, default_manifest=hits_path.parent / "manifest.txt")
    run = cfgmod.build(cfg)
    hits = io.read_hits(hits_path)
    out = Path(args.out_dir) if args.out_dir else hits_path.parent
    out.mkdir(parents=True, exist_ok=True)

    hist = histogram(hits, run.z_min, run.z_max, run.bins)
    grid = np.linspace(run.z_min, run.z_max, 20 * run.bins + 1)
    ref = reference_density(run.model, grid, screen_x=run.integration.screen_x)
    rep = compare(hist, ref)
    if not hist.normalized:
        print("warning: no hits inside the window; histogram is not normalised", file=sys.stderr)

    edges = hist.edges
    io.write_rows(out / "histogram.csv", ["z_lo", "z_hi", "count", "density"],
                   zip(edges[:-1], edges[1:], hist.counts, hist.density))
    io.write_rows(out / "reference.csv", ["z", "density"], zip(ref.z, ref.values))
    io.write_rows(out / "overlay.csv", ["z", "histogram", "reference"],
                   zip(hist.centers, hist.density, bin_average(ref, edges)))
    items = [
        ("n_hits", len(hits)),
        ("n_in_window", int(hist.counts.sum())),
        ("n_out_of_window", hist.out_of_window),
        ("normalized", hist.normalized),
        ("z_min", run.z_min), ("z_max", run.z_max), ("bins", run.bins),
        ("bin_width", hist.bin_width),
        ("l1_distance", rep.l1_distance),
        ("n_peaks_hist", len(rep.peak_positions_hist)),
        ("n_peaks_ref", len(rep.peak_positions_ref)),
        ("peak_positions_hist", ",".join(io.fmt(float(v)) for v in rep.peak_positions_hist)),
        ("peak_positions_ref", ",".join(io.fmt(float(v)) for v in rep.peak_positions_ref)),
        ("max_peak_offset", rep.max_peak_offset),
        ("unmatched_hist", rep.unmatched_hist),
        ("unmatched_ref", rep.unmatched_ref),
        ("peaks_agree", rep.peaks_agree),
    ]
    io.write_kv(out / "report.txt", items)
    for k, v in items:
        print(f"{k} = {io.fmt(v)}")
    return 0


# ------------------------------------------------------------------ whichway

def _load_trajectories(path: Path):
    return io.read_trajectories(path, path.parent / "terminations.csv")


def cmd_whichway(args) -> int:
    traj_path = Path(args.trajectories)
    hits_path = Path(args.hits) if args.hits else traj_path.parent / "hits.csv"
    trajs = _load_trajectories(traj_path)
    hits = io.read_hits(hits_path)
    rep = which_way_report(hits, trajs)
    items = [
        ("separable", rep.separable),
        ("which_way", rep.which_way),
        ("crossings_ab", rep.crossings_ab),
        ("crossings_aa", rep.crossings_aa),
        ("crossings_bb", rep.crossings_bb),
        ("n_hits_a", rep.n_hits_a), ("n_hits_b", rep.n_hits_b),
        ("z_range_a", f"{io.fmt(rep.range_a[0])},{io.fmt(rep.range_a[1])}"),
        ("z_range_b", f"{io.fmt(rep.range_b[0])},{io.fmt(rep.range_b[1])}"),
    ]
    out = Path(args.out_dir) if args.out_dir else traj_path.parent
    out.mkdir(parents=True, exist_ok=True)
    io.write_kv(out / "whichway.txt", items)
    for k, v in items:
        print(f"{k} = {io.fmt(v)}")
    return 0


# --------------------------------------------------------------------- helix

def cmd_helix(args) -> int:
    traj_path = Path(args.trajectories)
    try:
        planes = [float(v) for v in args.planes.split(",")]
    except ValueError:
        raise ConfigError(f"planes must be comma-separated numbers, got {args.planes!r}") from None
    trajs = _load_trajectories(traj_path)
    probe = helix_probe(trajs, planes)
    out = Path(args.out_dir) if args.out_dir else traj_path.parent
    out.mkdir(parents=True, exist_ok=True)
    io.write_rows(out / "helix.csv", ["plane", "traj_id", "hole", "z_r", "z_i"],
                   ((pl, *row) for pl in planes for row in probe.points[pl]))
    winding = centroid_winding(probe)
    pairs = pair_winding(probe)
    items = [(f"missing.{io.fmt(pl)}", probe.missing[pl]) for pl in planes]
    items += [("trajectories_on_all_planes", len(winding)),
              ("max_abs_centroid_winding", max((abs(v) for v in winding.values()), default=0.0)),
              ("same_hole_pairs", len(pairs)),
              ("same_hole_pairs_winding_over_pi", sum(abs(v) > np.pi for v in pairs.values()))]
    io.write_kv(out / "helix.txt", items)
    for k, v in items:
        print(f"{k} = {io.fmt(v)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qtraj", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qtraj {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a trajectory ensemble")
    _add_config_flags(p)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--no-trajectories", action="store_true",
                   help="keep only hits and terminations (large ensembles)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("screen", help="histogram hits and compare with |psi|^2")
    p.add_argument("hits")
    _add_config_flags(p)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("whichway", help="separability and crossing counts")
    p.add_argument("trajectories")
    p.add_argument("--hits")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_whichway)

    p = sub.add_parser("helix", help="complex z of trajectories on several x_r planes")
    p.add_argument("trajectories")
    p.add_argument("--planes", default="20,30,40,50")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_helix)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
