"""Regenerate the numeric tables for the three builtin systems.

Each experiment writes one JSON file (sorted keys, seed recorded) into the
output directory, next to a small manifest with wall times.

    python3 scripts/run_experiments.py                 # all experiments into results/
    python3 scripts/run_experiments.py --only coding --out /tmp/res
"""

import argparse
import json
import math
import time
from pathlib import Path

from cmskit import __version__
from cmskit.analysis import estimate_contraction_rate, jo_profile, moment_bound, variation_class
from cmskit.coding import coding_convergence, holder_fit
from cmskit.estimators import (
    empirical_measure,
    ergodic_average,
    estimate_entropy_integral,
    estimate_entropy_lyapunov,
    representative_distance,
    stationarity_check,
)
from cmskit.martingale import tail_bound_check, ui_table, variance_bound_check
from cmskit.system import builtin, validate

P_TWO = [[0.7, 0.3], [0.4, 0.6]]
X, Y = (0.0, 1.0), (1.0, 2.0)


def systems():
    return {"example_r1": builtin("example_r1"), "example_r2": builtin("example_r2"),
            "gmarkov": builtin("gmarkov", P_TWO)}


def exp_rates(seed):
    out = {}
    for name, sys in systems().items():
        # pairs of sequence points are built one symbol at a time, so keep that budget small
        budget = 10_000 if name == "gmarkov" else 1_000_000
        out[name] = {"rate": estimate_contraction_rate(sys, budget, seed).to_dict(),
                     "validate": validate(sys, 10_000, seed).to_dict()}
    return out


def exp_variation(seed):
    rows = []
    for N in (10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        rows.append(variation_class(jo_profile(0.5, math.exp(-1), N)).to_dict())
    return {"alpha": 0.5, "c": math.exp(-1), "rows": rows}


def exp_entropy(seed):
    out = {}
    starts = {"example_r1": (0.0,), "example_r2": X}
    for name, sys in systems().items():
        x = starts.get(name) or sys.representative(1)
        out[name] = {
            "lyapunov": estimate_entropy_lyapunov(sys, x, 100_000, seed, trajectories=4).to_dict(),
            "integral": estimate_entropy_integral(sys, x, 100_000, seed, trajectories=4).to_dict(),
        }
    return out


def exp_measure(seed):
    sys = builtin("example_r2")
    mu = empirical_measure(sys, X, 200_000, seed=seed)
    words = [()] + [(e,) for e in sys.graph.edge_ids] + [("e1", "e3"), ("e2", "e1")]
    starts = [X, (3.0, 5.0), (-2.0, 1.5), (0.0, -1.0), (4.0, -6.0)]
    return {
        "representative_distance": representative_distance(sys, mu).to_dict(),
        "moment_bound": moment_bound(sys),
        "stationarity": [vars(r) | {"word": list(r.word)} for r in stationarity_check(sys, mu, words)],
        "ergodic_min_norm1_10": [
            ergodic_average(sys, s, "min(norm1(x, y), 10)", 100_000, seed, stream_id=10 + k).to_dict()
            for k, s in enumerate(starts)],
    }


def exp_coding(seed):
    out = {}
    for name, sys in systems().items():
        out[name] = coding_convergence(sys, seed, (10, 100, 1000, 5000), words=1000).to_dict()
    out["example_r2_holder"] = holder_fit(builtin("example_r2"), seed).to_dict()
    return out


def exp_martingale(seed):
    sys = builtin("example_r2")
    return {
        "tail": tail_bound_check(sys, X, Y, 20, 100_000, seed).to_dict(),
        "variance": [variance_bound_check(sys, X, Y, n, 20_000, seed).to_dict() for n in (5, 10, 20, 40)],
        "ui_table": ui_table(sys, X, Y, 200, mc_budget=10_000, seed=seed).to_dict(),
    }


EXPERIMENTS = {"rates": exp_rates, "variation": exp_variation, "entropy": exp_entropy,
               "measure": exp_measure, "coding": exp_coding, "martingale": exp_martingale}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", choices=sorted(EXPERIMENTS), action="append")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    times = {}
    for name in args.only or EXPERIMENTS:
        t0 = time.perf_counter()
        payload = {"seed": args.seed, "version": __version__, "result": EXPERIMENTS[name](args.seed)}
        (out / f"{name}.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")
        times[name] = time.perf_counter() - t0
        print(f"{name:<11} {times[name]:7.1f} s  -> {out / (name + '.json')}")
    manifest = {"seed": args.seed, "version": __version__, "wall_time_s": times}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main()
