"""Self-convergence of the psi^2-weighted stationary MdBB screen histogram.

Runs mdbb-stationary with psi2 weighting (a = 15) at a base ensemble size and
at ten times that size, compares each histogram with |psi|^2 on the screen
(100 bins over [-40, 40]) and writes both L1 distances to a key = value file.
The larger run is the converged reference used by the acceptance suite.

    python3 scripts/psi2_convergence.py                  # 2000 and 20000 per hole
    python3 scripts/psi2_convergence.py --base 200       # quick look
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from qtraj.analysis import compare, histogram, reference_density
from qtraj.ensemble import Scenario, ScenarioConfig, default_integration, default_model, run_ensemble
from qtraj.io import write_kv

ROOT = Path(__file__).resolve().parents[1]
Z_MIN, Z_MAX, BINS = -40.0, 40.0, 100


def l1_at(n_per_hole: int):
    sc = Scenario.MDBB_STATIONARY
    cfg = ScenarioConfig.preset(sc, n_per_hole=n_per_hole, weighting="psi2")
    model = default_model(sc)
    t0 = time.perf_counter()
    res = run_ensemble(cfg, default_integration(sc), model, keep_samples=False)
    elapsed = time.perf_counter() - t0
    hist = histogram(res.hits, Z_MIN, Z_MAX, BINS)
    ref = reference_density(model, np.linspace(Z_MIN, Z_MAX, 20 * BINS + 1))
    rep = compare(hist, ref)
    return rep, len(res.hits), int(hist.counts.sum()), elapsed


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--base", type=int, default=2000, help="trajectories per hole of the base run")
    ap.add_argument("--factor", type=int, default=10)
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "psi2_convergence.txt")
    args = ap.parse_args()

    items = [("scenario", "mdbb-stationary"), ("weighting", "psi2"), ("radius_a", 15.0),
             ("bins", BINS), ("z_min", Z_MIN), ("z_max", Z_MAX)]
    for label, n in (("base", args.base), ("converged", args.base * args.factor)):
        rep, n_hits, n_in, elapsed = l1_at(n)
        print(f"{label}: n_per_hole={n} hits={n_hits} in_window={n_in} "
              f"l1={rep.l1_distance:.6f} peaks_agree={rep.peaks_agree} ({elapsed:.0f} s)", flush=True)
        items += [(f"{label}.n_per_hole", n), (f"{label}.n_hits", n_hits),
                  (f"{label}.n_in_window", n_in), (f"{label}.l1_distance", rep.l1_distance),
                  (f"{label}.max_peak_offset", rep.max_peak_offset),
                  (f"{label}.peaks_agree", rep.peaks_agree)]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_kv(args.out, items)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
