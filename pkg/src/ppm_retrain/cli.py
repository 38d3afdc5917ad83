"""Command line front end.

Stages can run one at a time, exchanging files::

    ppm-retrain generate --noise S2 --out claims.csv
    ppm-retrain encode --log claims.csv --encoding complex --prefix 7 --out work/
    ppm-retrain train --data work/ --trials 50 --out work/baseline.json
    ppm-retrain explain --data work/ --model work/baseline.json --out work/
    ppm-retrain retrain --data work/ --pairs work/pairs.json --out work/retrained.json
    ppm-retrain evaluate --data work/ --model work/baseline.json work/retrained.json

or all at once with ``ppm-retrain pipeline --log claims.csv --out run/``.
Exit status is 2 when a stage fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .classifier import load_model, optimize, predict, save_model
from .encoding import load_npz, save_npz
from .errors import PPMError
from .eventlog import read_log, write_csv
from .explainer import write_jsonl
from .fei import confusion_from_labels
from .generator import NOISE_CHOICES, generate_claim_log, scenario_rules
from .metrics import macro_f1
from .pipeline import (PipelineConfig, StageFailure, emit_report, feedback_transactions,
                       pairs_from_json, pairs_json, prepare, rankings_json, run_pipeline,
                       save_models, select_pairs, shuffle_parts)

PARTS = ("train", "validation", "feedback", "test")

# flag -> PipelineConfig field
CONFIG_FLAGS = {
    "encoding": "encoding", "prefix": "prefix_length", "shap_top_t": "shap_top_t",
    "select_k": "select_k", "declare_support": "declare_support",
    "fei_min_support": "fei_min_support", "trials": "hyperopt_trials", "seed": "seed",
    "label_rule": "label_rule", "train_label_rule": "train_label_rule",
    "noisy_validation": "noisy_validation", "edit_budget": "edit_budget",
}


def _config_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline configuration")
    g.add_argument("--config", help="key = value file; flags override it")
    g.add_argument("--encoding", choices=("simple", "complex", "declare"))
    g.add_argument("--prefix", help="prefix length or 'auto'")
    g.add_argument("--shap-top-t", type=int)
    g.add_argument("--select-k", type=int)
    g.add_argument("--declare-support", type=float)
    g.add_argument("--fei-min-support", type=float)
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--label-rule")
    g.add_argument("--train-label-rule", help="relabels the training split only")
    g.add_argument("--noise", choices=NOISE_CHOICES,
                   help="use the rules of a synthetic scenario as labels")
    g.add_argument("--noisy-validation", action="store_true", default=None)
    g.add_argument("--edit-budget", type=int)


def build_config(args) -> PipelineConfig:
    overrides = {field: getattr(args, flag, None) for flag, field in CONFIG_FLAGS.items()}
    if getattr(args, "noise", None):
        true_rule, noisy_rule = scenario_rules(args.noise)
        overrides["label_rule"] = overrides["label_rule"] or true_rule
        overrides["train_label_rule"] = overrides["train_label_rule"] or noisy_rule
    if getattr(args, "log", None):
        overrides["log_path"] = str(args.log)
    if args.config:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})


def _write_json(path, doc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _load_parts(directory) -> dict:
    d = Path(directory)
    missing = [p for p in PARTS if not (d / f"{p}.npz").exists()]
    if missing:
        raise FileNotFoundError(f"{d} lacks {', '.join(missing)}; run `encode` first")
    return {p: load_npz(d / f"{p}.npz") for p in PARTS}


def _read_config(directory) -> PipelineConfig:
    doc = json.loads((Path(directory) / "config.json").read_text(encoding="utf-8"))
    known = {f.name for f in fields(PipelineConfig)}
    return PipelineConfig(**{k: v for k, v in doc.items() if k in known})


# ------------------------------------------------------------------ commands

def cmd_generate(args):
    log_ = generate_claim_log(args.n_traces, args.noise, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(log_, args.out)
    print(f"wrote {len(log_)} traces to {args.out}")


def cmd_encode(args):
    config = build_config(args)
    splits = prepare(config, read_log(args.log))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for part in PARTS:
        save_npz(splits.data[part], out / f"{part}.npz")
        write_csv(splits.logs[part], out / f"{part}_prefixes.csv")
    cfg = asdict(config)
    cfg["prefix_length"] = splits.prefix_length
    _write_json(out / "config.json", cfg)
    print(f"prefix length {splits.prefix_length}, {len(splits.data['train'].features)} features, "
          f"sizes {[len(splits.data[p]) for p in PARTS]}")


def cmd_train(args):
    data = _load_parts(args.data)
    config = _read_config(args.data)
    trials = args.trials or config.hyperopt_trials
    seed = config.seed if args.seed is None else args.seed
    hp, model = optimize(data["train"], data["validation"], trials, seed)
    save_model(model, args.out)
    f1 = macro_f1(data["validation"].labels, predict(model, data["validation"]))
    print(f"hyperparameters {asdict(hp)}; validation macro-F1 {f1:.4f}")


def cmd_explain(args):
    data = _load_parts(args.data)
    config = _read_config(args.data)
    if args.shap_top_t:
        config.shap_top_t = args.shap_top_t
    if args.select_k:
        config.select_k = args.select_k
    model = load_model(args.model)
    feedback = data["feedback"]
    matrix, explanations, transactions = feedback_transactions(model, feedback, config)
    _, selected, notes, pairs = select_pairs(transactions, matrix, feedback, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(explanations, out / "explanations.jsonl")
    _write_json(out / "rankings.json", {"confusion": matrix.counts(), "rankings": rankings_json(selected),
                                        "notes": notes})
    _write_json(out / "pairs.json", pairs_json(pairs))
    print(f"feedback confusion {matrix.counts()}; pairs written to {out / 'pairs.json'}")


def cmd_retrain(args):
    data = _load_parts(args.data)
    config = _read_config(args.data)
    if args.trials:
        config.hyperopt_trials = args.trials
    pairs = pairs_from_json(json.loads(Path(args.pairs).read_text(encoding="utf-8")))
    logs = {}
    if config.encoding == "declare":
        logs = {p: read_log(Path(args.data) / f"{p}_prefixes.csv") for p in ("train", "validation")}
    shuffled, plans = shuffle_parts(data, logs, pairs, config)
    hp, model = optimize(shuffled["train"], shuffled["validation"], config.hyperopt_trials, config.seed)
    save_model(model, args.out)
    _write_json(Path(args.out).with_suffix(".shuffle.json"), {p: plan.to_json() for p, plan in plans.items()})
    print(f"shuffled {sum(len(p.actions) for p in plans.values())} cells; hyperparameters {asdict(hp)}")


def cmd_evaluate(args):
    test = _load_parts(args.data)["test"]
    rows = {}
    for path in args.model:
        pred = predict(load_model(path), test)
        rows[path] = {"macro_f1": macro_f1(test.labels, pred),
                      "confusion": confusion_from_labels(test.trace_ids, test.labels, pred).counts()}
        print(f"{path}: macro-F1 {rows[path]['macro_f1']:.4f} {rows[path]['confusion']}")
    if args.out:
        _write_json(args.out, rows)


def cmd_pipeline(args):
    config = build_config(args)
    if args.log:
        log_ = read_log(args.log)
    else:
        noise = args.noise or "none"
        log_ = generate_claim_log(args.n_traces, noise, config.seed)
    out = Path(args.out)
    try:
        report = run_pipeline(config, log_)
    except StageFailure as exc:
        emit_report(exc.partial, out / "report.json", args.name)
        raise
    emit_report(report, out / "report.json", args.name)
    if args.save_models:
        save_models(report, out)
    print(f"baseline macro-F1 {report.baseline_f1:.4f}, re-training {report.retrained_f1:.4f}; "
          f"report in {out / 'report.json'}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppm-retrain", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a synthetic claim log")
    p.add_argument("--n-traces", type=int, default=4800)
    p.add_argument("--noise", choices=NOISE_CHOICES, default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="label, split, cut prefixes and encode a log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _config_args(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="hyperparameter search and baseline model")
    p.add_argument("--data", required=True, help="directory written by encode")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain the feedback set, mine and rank FEIs, build pairs")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--shap-top-t", type=int)
    p.add_argument("--select-k", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("retrain", help="shuffle training/validation data by pairs and retrain")
    p.add_argument("--data", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("evaluate", help="macro-F1 of models on the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run every stage and write the report")
    p.add_argument("--log", help="CSV or XES log; a synthetic log is generated when omitted")
    p.add_argument("--n-traces", type=int, default=4800)
    p.add_argument("--name", default="")
    p.add_argument("--save-models", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    _config_args(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PPMError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
