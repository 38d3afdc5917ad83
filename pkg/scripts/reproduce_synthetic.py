"""Run the three synthetic rows (and optionally the never-worse battery) and save JSON.

    python3 scripts/reproduce_synthetic.py --out results/synthetic.json
    python3 scripts/reproduce_synthetic.py --rows S2 --seeds 0 --trials 10
    python3 scripts/reproduce_synthetic.py --rows --never-worse --out results/never_worse.json
"""
import argparse
import json
import os

from ppm_retrain.experiments import (DELTA_TOLERANCE, SYNTHETIC_ROWS, never_worse,
                                     never_worse_configs, synthetic_row)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", nargs="*", default=sorted(SYNTHETIC_ROWS))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--n-traces", type=int, default=4800)
    ap.add_argument("--noisy-validation", action="store_true")
    ap.add_argument("--never-worse", action="store_true", help="also run the 10-config battery")
    ap.add_argument("--out", default="results/synthetic.json")
    args = ap.parse_args()

    def show(r):
        print(f"  {r['noise']} {r['encoding']} n={r['prefix_length']} seed={r['seed']}: "
              f"{r['baseline_f1']:.3f} -> {r['retrained_f1']:.3f} ({r['seconds']}s)", flush=True)

    out = {"rows": [], "never_worse": []}
    for s in args.rows:
        row = synthetic_row(s, args.seeds, args.trials, args.n_traces, args.noisy_validation, show)
        ref = SYNTHETIC_ROWS[s][2]
        ok = row.within_band(ref) and row.delta > 0
        print(f"{s} {row.encoding}: baseline {row.baseline:.3f} retrained {row.retrained:.3f} "
              f"delta {row.delta:+.3f} (reference {ref:+.2f} +/- {DELTA_TOLERANCE}) "
              f"{'PASS' if ok else 'FAIL'}", flush=True)
        out["rows"].append({**row.to_json(), "reference": ref, "pass": ok})
    if args.never_worse:
        out["never_worse"] = never_worse(never_worse_configs(trials=args.trials, n_traces=args.n_traces), show)
        bad = [r for r in out["never_worse"] if not r["ok"]]
        print(f"never-worse: {10 - len(bad)}/10 ok")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
