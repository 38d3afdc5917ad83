"""Synthetic experiment batteries shared by the scripts and the acceptance suite."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .generator import generate_claim_log
from .pipeline import PipelineConfig, run_pipeline

# scenario -> (encoding, prefix length, reference improvement)
SYNTHETIC_ROWS = {
    "S1": ("simple", 4, 0.17),
    "S2": ("complex", 7, 0.20),
    "S3": ("declare", 7, 0.11),
}
DELTA_TOLERANCE = 0.10
NEVER_WORSE_SLACK = 0.02


@dataclass
class RowResult:
    scenario: str
    encoding: str
    runs: list = field(default_factory=list)  # one dict per seed

    @property
    def baseline(self) -> float:
        return statistics.mean(r["baseline_f1"] for r in self.runs)

    @property
    def retrained(self) -> float:
        return statistics.mean(r["retrained_f1"] for r in self.runs)

    @property
    def delta(self) -> float:
        return self.retrained - self.baseline

    def within_band(self, reference: float, tol: float = DELTA_TOLERANCE) -> bool:
        return abs(self.delta - reference) <= tol

    def to_json(self) -> dict:
        return {"scenario": self.scenario, "encoding": self.encoding, "runs": self.runs,
                "baseline_f1": self.baseline, "retrained_f1": self.retrained, "delta": self.delta}


def _run(noise, encoding, n, seed, trials, n_traces, **cfg) -> dict:
    t0 = time.perf_counter()
    log = generate_claim_log(n_traces, noise, seed)
    config = PipelineConfig(encoding=encoding, prefix_length=n, hyperopt_trials=trials, seed=seed, **cfg)
    r = run_pipeline(config, log)
    return {"noise": noise, "encoding": encoding, "prefix_length": n, "seed": seed,
            "trials": trials, "n_traces": n_traces,
            "noisy_validation": config.noisy_validation, "select_k": config.select_k,
            "baseline_f1": r.baseline_f1, "retrained_f1": r.retrained_f1,
            "max_local_accuracy_gap": r.max_local_accuracy_gap,
            "n_shuffled": sum(v.get("n_actions", 0) for v in r.shuffle.values()),
            "seconds": round(time.perf_counter() - t0, 1)}


def synthetic_row(scenario: str, seeds=(0, 1, 2), trials: int = 50, n_traces: int = 4800,
                  noisy_validation: bool = False, progress=None) -> RowResult:
    encoding, n, _ = SYNTHETIC_ROWS[scenario]
    row = RowResult(scenario, encoding)
    for seed in seeds:
        row.runs.append(_run(scenario, encoding, n, seed, trials, n_traces,
                             noisy_validation=noisy_validation))
        if progress:
            progress(row.runs[-1])
    return row


def never_worse_configs(count: int = 10, seed: int = 0, trials: int = 50, n_traces: int = 4800):
    """Random (noise, encoding, prefix, seed, validation-noise) combinations."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        out.append({
            "noise": str(rng.choice(["S1", "S2", "S3", "none"])),
            "encoding": str(rng.choice(["simple", "complex", "declare"])),
            "n": int(rng.integers(4, 8)),
            "seed": int(rng.integers(0, 10_000)),
            "noisy_validation": bool(rng.random() < 0.5),
            "trials": trials,
            "n_traces": n_traces,
        })
    return out


def never_worse(configs, progress=None) -> list[dict]:
    results = []
    for c in configs:
        res = _run(c["noise"], c["encoding"], c["n"], c["seed"], c["trials"], c["n_traces"],
                   noisy_validation=c["noisy_validation"])
        res["ok"] = res["retrained_f1"] >= res["baseline_f1"] - NEVER_WORSE_SLACK
        results.append(res)
        if progress:
            progress(res)
    return results
