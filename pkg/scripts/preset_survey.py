"""Run every preset and summarise terminations, which-way and fringe agreement.

For each scenario: termination counts and the crossing report at the preset
ensemble size, then the screen histogram against |psi|^2 at a larger size
(trajectories not kept).  Writes results/preset_survey.txt.

    python3 scripts/preset_survey.py
    python3 scripts/preset_survey.py --screen-n 2000
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from qtraj.analysis import compare, histogram, reference_density, which_way_report
from qtraj.ensemble import Scenario, ScenarioConfig, default_integration, default_model, run_ensemble
from qtraj.io import fmt, write_kv

ROOT = Path(__file__).resolve().parents[1]
GRID = np.linspace(-40.0, 40.0, 2001)


def survey(sc: Scenario, screen_n: int) -> list[tuple[str, object]]:
    model, icfg = default_model(sc), default_integration(sc)
    res = run_ensemble(ScenarioConfig.preset(sc), icfg, model)
    ww = which_way_report(res.hits, res.trajectories)
    items = [(f"{sc.value}.{term.value}", n) for term, n in res.counts.items()]
    items += [(f"{sc.value}.separable", ww.separable),
              (f"{sc.value}.crossings_ab", ww.crossings_ab),
              (f"{sc.value}.crossings_aa", ww.crossings_aa),
              (f"{sc.value}.crossings_bb", ww.crossings_bb)]

    big = run_ensemble(ScenarioConfig.preset(sc, n_per_hole=screen_n), icfg, model, keep_samples=False)
    rep = compare(histogram(big.hits), reference_density(model, GRID))
    items += [(f"{sc.value}.screen_n_per_hole", screen_n),
              (f"{sc.value}.screen_hits", len(big.hits)),
              (f"{sc.value}.l1_distance", rep.l1_distance),
              (f"{sc.value}.peaks_hist", ",".join(fmt(float(v)) for v in rep.peak_positions_hist)),
              (f"{sc.value}.peaks_ref", ",".join(fmt(float(v)) for v in rep.peak_positions_ref)),
              (f"{sc.value}.peaks_agree", rep.peaks_agree)]
    return items


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--screen-n", type=int, default=500, help="trajectories per hole for the histogram")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "preset_survey.txt")
    args = ap.parse_args()

    items = []
    for sc in Scenario:
        t0 = time.perf_counter()
        rows = survey(sc, args.screen_n)
        items += rows
        for k, v in rows:
            print(f"{k} = {fmt(v)}")
        print(f"# {sc.value}: {time.perf_counter() - t0:.0f} s", flush=True)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_kv(args.out, items)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
