"""Sweep generator parameters for one scenario and print baseline/retrained macro-F1.

    python3 scripts/calibrate.py S1 --trials 10 --seeds 0 1 --set p_questionnaire_first=0.2
"""
import argparse
import ast
import statistics
import time

from ppm_retrain.generator import ProcessParams, generate_claim_log
from ppm_retrain.pipeline import PipelineConfig, run_pipeline

ROWS = {"S1": ("simple", 4), "S2": ("complex", 7), "S3": ("declare", 7)}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("scenario", choices=sorted(ROWS))
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--n-traces", type=int, default=4800)
    ap.add_argument("--set", nargs="*", default=[], help="ProcessParams overrides, key=value")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args()
    overrides = {k: ast.literal_eval(v) for k, v in (s.split("=", 1) for s in args.set)}
    params = ProcessParams(**overrides)
    encoding, n = ROWS[args.scenario]
    deltas = []
    for seed in args.seeds:
        t0 = time.time()
        log = generate_claim_log(args.n_traces, args.scenario, seed, params)
        cfg = PipelineConfig(encoding=encoding, prefix_length=n, hyperopt_trials=args.trials, seed=seed)
        r = run_pipeline(cfg, log)
        deltas.append(r.improvement)
        print(f"{args.scenario} seed {seed}: baseline {r.baseline_f1:.3f} retrained {r.retrained_f1:.3f} "
              f"delta {r.improvement:+.3f} ({time.time() - t0:.0f}s) test {r.confusion['test_retrained']}")
        if args.verbose:
            for name, lst in r.rankings.items():
                print(f"  {name:>2}: " + "; ".join(f"{x['text']} ({x['m_score']:.2f})" for x in lst))
            print("  shuffled:", {k: v["n_actions"] for k, v in r.shuffle.items()})
    print(f"mean delta {statistics.mean(deltas):+.3f}  overrides {overrides}")


if __name__ == "__main__":
    main()
