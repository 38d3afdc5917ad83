"""End-to-end run: label, prefix, split, encode, train, explain, mine, shuffle, retrain."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import declare
from .classifier import model_to_json, optimize, predict
from .encoding import EncodedDataset, encode, encode_declare
from .errors import ConfigError, PPMError
from .eventlog import EventLog, extract_prefixes, quintile_prefix_length, split_dataset
from .explainer import explain_dataset, top_items
from .fei import (QUADRANTS, FEIPair, build_confusion_matrix, build_pairs, confusion_from_labels,
                  describe, mine_feis, rank_and_select)
from .labeling import apply_labeling, parse_rule
from .metrics import macro_f1
from .shuffle import apply_shuffle, plan_shuffle, retrain

log = logging.getLogger(__name__)

ENCODINGS = ("simple", "complex", "declare")


@dataclass
class PipelineConfig:
    encoding: str = "simple"
    prefix_length: Union[int, str] = "auto"  # an integer or "auto" (first quintile)
    shap_top_t: int = 10
    select_k: int = 3
    declare_support: float = 0.25
    fei_min_support: float = 0.2
    fei_max_size: int = 4
    hyperopt_trials: int = 50
    seed: int = 0
    label_rule: Optional[str] = None
    train_label_rule: Optional[str] = None  # relabels only the training split
    noisy_validation: bool = False
    edit_budget: int = 3
    signed_top_items: bool = False
    # items whose score is exactly 0 say nothing about the prediction
    drop_zero_items: bool = True
    log_path: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}")
        if self.prefix_length != "auto":
            try:
                self.prefix_length = int(self.prefix_length)
            except (TypeError, ValueError):
                raise ConfigError("prefix_length must be a positive integer or 'auto'")
            if self.prefix_length < 1:
                raise ConfigError("prefix_length must be positive")
        for name in ("shap_top_t", "select_k", "fei_max_size", "hyperopt_trials", "edit_budget"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("declare_support", "fei_min_support"):
            if not 0 < float(getattr(self, name)) <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]")

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(val, known[key].default)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(text: str, default):
    if isinstance(default, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"not a boolean: {text!r}")
        return text.lower() in ("true", "1", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text if text.lower() not in ("", "none") else None


def derive_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([seed, tag]).generate_state(1)[0])


class StageFailure(PPMError):
    def __init__(self, stage: str, cause: Exception, partial: "RunReport"):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial


@dataclass
class RunReport:
    config: dict
    stages_completed: list = field(default_factory=list)
    prefix_length: Optional[int] = None
    split_sizes: dict = field(default_factory=dict)
    positive_rate: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    n_features: int = 0
    baseline_hyperparams: Optional[dict] = None
    retrained_hyperparams: Optional[dict] = None
    baseline_f1: Optional[float] = None
    retrained_f1: Optional[float] = None
    baseline_validation_f1: Optional[float] = None
    retrained_validation_f1: Optional[float] = None
    confusion: dict = field(default_factory=dict)
    max_local_accuracy_gap: Optional[float] = None
    feis_mined: dict = field(default_factory=dict)
    rankings: dict = field(default_factory=dict)
    pairs: dict = field(default_factory=dict)
    shuffle: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    error: Optional[dict] = None
    timings: dict = field(default_factory=dict)

    def to_json(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return d

    def canonical(self) -> str:
        """Serialized report without timings; equal across reruns with the same inputs."""
        return json.dumps(self.to_json(timings=False), sort_keys=True, default=_plain)

    @property
    def improvement(self) -> Optional[float]:
        if self.baseline_f1 is None or self.retrained_f1 is None:
            return None
        return self.retrained_f1 - self.baseline_f1


def _items_json(items):
    return [[f, _plain(v)] for f, v in sorted(items, key=lambda it: (it[0], str(it[1])))]


def _plain(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _counts(matrix) -> dict:
    return matrix.counts()


@dataclass
class Splits:
    """Prefix logs and encoded datasets for the four parts of one run."""
    logs: dict
    data: dict
    prefix_length: int
    constraints: list


def prepare(config: PipelineConfig, log_: EventLog) -> Splits:
    """Label, split, cut prefixes and encode; shared by the pipeline and the CLI."""
    if config.label_rule:
        rule = parse_rule(config.label_rule)
        log_ = apply_labeling(log_, rule)
    if config.train_label_rule:
        noisy = apply_labeling(log_, parse_rule(config.train_label_rule))
        log_ = EventLog([replace(t, train_label=n.label) for t, n in zip(log_, noisy)])
    if any(t.label is None for t in log_):
        raise ConfigError("log is unlabeled and no label rule was given")
    parts = dict(zip(("train", "validation", "feedback", "test"),
                     split_dataset(log_, config.seed, config.noisy_validation)))
    if config.prefix_length == "auto":
        n = quintile_prefix_length(EventLog(parts["train"].traces + parts["validation"].traces))
    else:
        n = int(config.prefix_length)
    logs = {k: extract_prefixes(v, n) for k, v in parts.items()}
    for k, v in logs.items():
        if len(v) == 0:
            raise ConfigError(f"no {k} trace reaches prefix length {n}")
    constraints = []
    if config.encoding == "declare":
        constraints = declare.discover(logs["train"], config.declare_support)
        if not constraints:
            raise ConfigError("no DECLARE constraint reaches the support threshold")
        ref = encode_declare(logs["train"], constraints)
        ref.prefix_length = n
        data = {"train": ref}
    else:
        # feature specs come from training + validation together
        both = EventLog(logs["train"].traces + logs["validation"].traces)
        ref = encode(both, config.encoding, n)
        k = len(logs["train"])
        data = {"train": ref.take(range(k)), "validation": ref.take(range(k, len(ref)))}
    for part in ("validation", "feedback", "test"):
        if part not in data:
            data[part] = encode(logs[part], config.encoding, n, constraints, ref.features)
    return Splits(logs, data, n, constraints)


def run_pipeline(config: PipelineConfig, log_: EventLog) -> RunReport:
    """Every stage seeded from ``config.seed``; raises `StageFailure` with a partial report."""
    config.validate()
    report = RunReport(config=asdict(config))
    stage = "prepare"
    clock = time.perf_counter()

    def done(name):
        nonlocal clock
        now = time.perf_counter()
        report.timings[name] = round(now - clock, 3)
        report.stages_completed.append(name)
        clock = now

    try:
        splits = prepare(config, log_)
        data = splits.data
        report.prefix_length = splits.prefix_length
        report.split_sizes = {k: len(v) for k, v in data.items()}
        report.positive_rate = {k: float(np.mean(v.labels)) for k, v in data.items()}
        report.constraints = [str(c) for c in splits.constraints]
        report.n_features = len(data["train"].features)
        done(stage)

        stage = "train"
        hp, model = optimize(data["train"], data["validation"], config.hyperopt_trials, config.seed)
        report.baseline_hyperparams = asdict(hp)
        report.baseline_validation_f1 = macro_f1(data["validation"].labels, predict(model, data["validation"]))
        done(stage)

        stage = "explain"
        feedback = data["feedback"]
        matrix, explanations, transactions = feedback_transactions(model, feedback, config)
        report.max_local_accuracy_gap = _max_gap(explanations)
        done(stage)

        stage = "mine"
        feis, selected, notes, pairs = select_pairs(transactions, matrix, feedback, config)
        report.notes.extend(notes)
        report.feis_mined = {q: len(v) for q, v in feis.items()}
        report.rankings = rankings_json(selected)
        report.pairs = pairs_json(pairs)
        done(stage)

        stage = "shuffle"
        shuffled, plans = shuffle_parts(data, splits.logs, pairs, config)
        for part, plan in plans.items():
            report.shuffle[part] = plan.to_json()
            report.shuffle[part]["n_actions"] = len(plan.actions)
        done(stage)

        stage = "retrain"
        hp2, model2 = retrain(shuffled["train"], shuffled["validation"], config.hyperopt_trials, config.seed)
        report.retrained_hyperparams = asdict(hp2)
        report.retrained_validation_f1 = macro_f1(shuffled["validation"].labels,
                                                  predict(model2, shuffled["validation"]))
        done(stage)

        stage = "evaluate"
        test = data["test"]
        p_base, p_new = predict(model, test), predict(model2, test)
        report.baseline_f1 = macro_f1(test.labels, p_base)
        report.retrained_f1 = macro_f1(test.labels, p_new)
        report.confusion = {
            "feedback_baseline": _counts(matrix),
            "feedback_retrained": _counts(build_confusion_matrix(model2, feedback)),
            "test_baseline": _counts(confusion_from_labels(test.trace_ids, test.labels, p_base)),
            "test_retrained": _counts(confusion_from_labels(test.trace_ids, test.labels, p_new)),
        }
        done(stage)
        report.models = (model, model2)  # not serialized; handy for callers
    except PPMError as exc:
        report.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        raise StageFailure(stage, exc, report) from exc
    except (ValueError, ArithmeticError) as exc:
        report.error = {"stage": stage, "type": type(exc).__name__, "message": str(exc)}
        raise StageFailure(stage, exc, report) from exc
    return report


def feedback_transactions(model, feedback: EncodedDataset, config: PipelineConfig):
    """Confusion matrix, explanations and per-quadrant item sets of the feedback set."""
    matrix = build_confusion_matrix(model, feedback)
    explanations = explain_dataset(model, feedback, feedback)
    transactions = {q: [] for q in QUADRANTS}
    quad_of = {tid: q for q in QUADRANTS for tid in matrix[q]}
    for e in explanations:
        items = top_items(e, config.shap_top_t, config.signed_top_items)
        if config.drop_zero_items:
            items = [it for it in items if it.score != 0.0]
        transactions[quad_of[e.trace_id]].append(frozenset(it.pair for it in items))
    return matrix, explanations, transactions


def select_pairs(transactions, matrix, feedback: EncodedDataset, config: PipelineConfig):
    """Mine FEIs per quadrant, rank, keep the top k and cross them into pairs.

    Returns ``(feis, selected, notes, pairs)``.
    """
    feis, notes = {}, []
    for q in QUADRANTS:
        if not transactions[q]:
            feis[q] = []
            notes.append(f"quadrant {q} is empty")
            continue
        feis[q] = mine_feis(transactions[q], config.fei_min_support, q, config.fei_max_size)
    selected, more = rank_and_select(feis, matrix, feedback, config.select_k)
    return feis, selected, notes + more, build_pairs(selected)


def shuffle_parts(data: dict, logs: dict, pairs, config: PipelineConfig):
    """Shuffle training and validation data; returns ``(shuffled, plans)``."""
    shuffled, plans = {}, {}
    for tag, part in enumerate(("train", "validation")):
        plan = plan_shuffle(data[part], pairs, derive_seed(config.seed, tag + 1))
        _, shuffled[part] = apply_shuffle(data[part], plan, logs.get(part), config.edit_budget)
        plans[part] = plan
    return shuffled, plans


def rankings_json(selected) -> dict:
    return {name: [{"items": _items_json(r.fei.items), "text": describe(r.fei.items),
                    "m_score": r.m_score, "support": r.fei.support,
                    "quadrant": r.fei.quadrant} for r in lst]
            for name, lst in selected.items()}


def pairs_json(pairs) -> dict:
    return {q: [{"characterization": _items_json(p.characterization),
                 "to_shuffle": _items_json(p.to_shuffle),
                 "text": p.to_json()} for p in ps] for q, ps in pairs.items()}


def pairs_from_json(doc: dict) -> dict:
    """Inverse of `pairs_json`."""
    return {q: [FEIPair(frozenset(map(tuple, p["characterization"])),
                        frozenset(map(tuple, p["to_shuffle"])), q) for p in ps]
            for q, ps in doc.items()}


def _max_gap(explanations) -> float:
    return max((abs(e.base_value + sum(it.score for it in e.items) - e.probability)
                for e in explanations), default=0.0)


# ------------------------------------------------------------------- reports

DASH = "—"


def _fmt(v, digits=2):
    if v is None:
        return DASH
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def summary_markdown(report: RunReport, name: str = "") -> str:
    cfg = report.config
    lines = [
        f"# Run summary{': ' + name if name else ''}",
        "",
        "| Dataset | Encoding | prefix | t | k | Baseline | re-training |",
        "|---|---|---|---|---|---|---|",
        f"| {name or cfg.get('log_path') or DASH} | {cfg['encoding']} | {_fmt(report.prefix_length)} "
        f"| {cfg['shap_top_t']} | {cfg['select_k']} | {_fmt(report.baseline_f1)} | {_fmt(report.retrained_f1)} |",
        "",
        "## Confusion matrices",
        "",
        "| | TP | FP | TN | FN |",
        "|---|---|---|---|---|",
    ]
    for key in ("feedback_baseline", "feedback_retrained", "test_baseline", "test_retrained"):
        c = report.confusion.get(key, {})
        lines.append(f"| {key.replace('_', ' ')} | " + " | ".join(_fmt(c.get(q)) for q in QUADRANTS) + " |")
    lines += ["", "## Selected FEIs", "", "| ranking | FEI | M-score |", "|---|---|---|"]
    for name_ in ("+", "-", "TP", "FP", "TN", "FN"):
        lst = report.rankings.get(name_) or []
        if not lst:
            lines.append(f"| {name_} | {DASH} | {DASH} |")
        for r in lst:
            lines.append(f"| {name_} | {r['text']} | {_fmt(r['m_score'])} |")
    lines += ["", "## Pairs", "", "| quadrant | characterization | shuffled |", "|---|---|---|"]
    for q in QUADRANTS:
        ps = report.pairs.get(q) or []
        if not ps:
            lines.append(f"| {q} | {DASH} | {DASH} |")
        for p in ps:
            lines.append(f"| {q} | {p['text']['characterization']} | {p['text']['to_shuffle'] or DASH} |")
    n_act = {k: v.get("n_actions", 0) for k, v in report.shuffle.items()}
    lines += ["", f"Shuffled cells: train {_fmt(n_act.get('train'))}, validation {_fmt(n_act.get('validation'))}"]
    if report.notes:
        lines += ["", "Notes:"] + [f"- {n}" for n in report.notes]
    if report.error:
        lines += ["", f"Failed in stage `{report.error['stage']}`: {report.error['message']}"]
    return "\n".join(lines) + "\n"


def emit_report(report: RunReport, path, name: str = "") -> tuple[Path, Path]:
    """Write ``path`` (JSON) and a markdown summary next to it (``.md``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True, default=_plain) + "\n",
                    encoding="utf-8")
    md = path.with_suffix(".md")
    md.write_text(summary_markdown(report, name), encoding="utf-8")
    return path, md


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def save_models(report: RunReport, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for tag, m in zip(("baseline", "retrained"), getattr(report, "models", ())):
        (d / f"{tag}_model.json").write_text(json.dumps(model_to_json(m)), encoding="utf-8")
