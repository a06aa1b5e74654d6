"""Experiment orchestration: cross-model AUC matrices, attribution tasks,
and paired (watermark / quantization) detection.

Every run is a pure function of its config: corpora are split/filtered/
sampled with the configured seeds, one classifier is trained per
(task-cell, seed), and all CSV/JSON artifacts plus per-example score
dumps land under ``output_dir``.  Re-running an identical config yields
byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import (
    TrainConfig,
    predict_proba_matrix,
    train_multi_seed,
    train_on_matrix,
)
from .corpus import GenerationRecord, ModelCard, load_documents, read_generations
from .errors import InsufficientDataError, ValidationError
from .features import FeatureSpec, Featurizer, stack_features
from .filtering import FilterPolicy, SplitSpec, filter_records, split_then_sample
from .metrics import (
    EvalReport,
    auc_roc,
    normalize_by_predicted_support,
    write_confusion_csv,
    write_matrix_csv,
    write_summary_json,
)
from .toylm import train_lm

TASKS = ("cross_matrix", "source_id", "family", "size_bin", "paired")
PAIRED_FLAGS = ("watermarked", "quantized")
MACHINE_LABEL = "machine"
HUMAN_LABEL = "human"


@dataclass(frozen=True)
class SizeBinning:
    """Left-closed parameter-count bins: [0,1B), [1B,5B), ... , [50B,inf)."""

    edges_billions: tuple[float, ...] = (1, 5, 10, 20, 50)
    labels: tuple[str, ...] = ("<1B", "1-5B", "5-10B", "10-20B", "20-50B", ">50B")

    def __post_init__(self):
        if len(self.labels) != len(self.edges_billions) + 1:
            raise ValidationError("need one more label than bin edges")

    def label_for(self, size_params: int) -> str:
        billions = size_params / 1e9
        for edge, label in zip(self.edges_billions, self.labels):
            if billions < edge:
                return label
        return self.labels[-1]


@dataclass(frozen=True)
class CorpusEntry:
    card: ModelCard
    path: Path


@dataclass
class ExperimentConfig:
    task: str
    corpora: list[CorpusEntry]
    output_dir: Path
    human_corpus: Path | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    filter: FilterPolicy = field(default_factory=FilterPolicy)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    binning: SizeBinning = field(default_factory=SizeBinning)
    paired_flag: str = "watermarked"
    max_imbalance_ratio: float = 10.0
    ref_lm_order: int = 2  # 0 disables the human-corpus reference LM
    ref_lm_smoothing_k: float = 0.5
    family_train_n: int | None = None  # default: 2 * split.train_n
    family_val_n: int | None = None
    expected_bin_counts: dict[str, int] | None = None
    # extra cross-matrix targets that are never trained on (e.g. adversarial text)
    eval_only_corpora: list[CorpusEntry] = field(default_factory=list)
    workers: int = 1

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        if self.task not in TASKS:
            raise ValidationError(f"unknown task {self.task!r}")
        if self.task == "cross_matrix" and len(self.corpora) < 2:
            raise ValidationError("cross_matrix requires at least 2 model corpora")
        if self.paired_flag not in PAIRED_FLAGS:
            raise ValidationError(f"paired flag must be one of {PAIRED_FLAGS}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        names = [e.card.name for e in self.corpora] + [e.card.name for e in self.eval_only_corpora]
        if len(set(names)) != len(names):
            raise ValidationError("corpus model names must be unique")


class RunLog:
    """Append-only JSONL event log; reasons stay machine-readable."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.events: list[dict] = []
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def log(self, event: str, **fields) -> None:
        record = {"event": event, **fields}
        self.events.append(record)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")

    def dropped(self) -> list[dict]:
        return [e for e in self.events if e["event"].endswith("_dropped")]


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


@dataclass
class ModelSets:
    card: ModelCard
    train: list[GenerationRecord]
    val: list[GenerationRecord]

    @property
    def train_texts(self) -> list[str]:
        return [r.completion for r in self.train]

    @property
    def val_texts(self) -> list[str]:
        return [r.completion for r in self.val]


def load_model_sets(config: ExperimentConfig, log: RunLog) -> list[ModelSets]:
    """Split/filter/sample every model corpus, dropping low-yield ones."""
    out: list[ModelSets] = []
    for entry in config.corpora:
        records = read_generations(entry.path)
        cards = {r.model for r in records}
        if cards != {entry.card}:
            raise ValidationError(
                f"{entry.path}: records carry model cards {sorted(c.name for c in cards)}, "
                f"expected exactly {entry.card.name!r}"
            )
        try:
            train, val = split_then_sample(records, config.split, config.filter)
        except InsufficientDataError as exc:
            log.log(
                "corpus_dropped",
                model=entry.card.name,
                reason="insufficient_data",
                detail=str(exc),
            )
            continue
        log.log("corpus_loaded", model=entry.card.name, records=len(records))
        out.append(ModelSets(card=entry.card, train=train, val=val))
    return out


def sample_human_texts(
    config: ExperimentConfig, n_train: int, n_val: int
) -> tuple[list[str], list[str]]:
    """80/20-partition the human corpus and sample plain texts from each side.

    Human documents are not passed through the generation filter; they
    stand in for an already-curated source corpus.
    """
    if config.human_corpus is None:
        raise ValidationError(f"task {config.task!r} requires a human corpus")
    docs = load_documents(config.human_corpus)
    rng = np.random.default_rng(config.split.rng_seed)
    perm = rng.permutation(len(docs))
    cut = int(len(docs) * config.split.train_fraction)
    train_side = [docs[i].text for i in sorted(perm[:cut])]
    val_side = [docs[i].text for i in sorted(perm[cut:])]
    if len(train_side) < n_train or len(val_side) < n_val:
        raise InsufficientDataError(
            f"human corpus yields {len(train_side)}/{len(val_side)} docs, "
            f"need {n_train}/{n_val}"
        )
    train_idx = rng.choice(len(train_side), size=n_train, replace=False)
    val_idx = rng.choice(len(val_side), size=n_val, replace=False)
    return (
        [train_side[i] for i in sorted(train_idx)],
        [val_side[i] for i in sorted(val_idx)],
    )


def build_featurizer(config: ExperimentConfig, human_train: list[str] | None, log: RunLog) -> Featurizer:
    """Featurizer with an optional reference LM fit on human training text."""
    ref_lm = None
    if config.ref_lm_order >= 2 and config.features.dense_stats and human_train:
        from .corpus import Document

        docs = [Document(id=f"ref{i}", text=t) for i, t in enumerate(human_train)]
        try:
            ref_lm = train_lm(
                docs, order=config.ref_lm_order, smoothing_k=config.ref_lm_smoothing_k, name="ref-lm"
            )
            log.log("ref_lm_trained", order=config.ref_lm_order, vocab=ref_lm.vocab_size)
        except ValidationError as exc:
            log.log("ref_lm_disabled", reason=str(exc))
    return Featurizer(config.features, ref_lm)


def _dump_scores(path: Path, rows: list[tuple]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", "score"])
        for i, (label, score) in enumerate(rows):
            writer.writerow([i, label, repr(float(score))])


def _dump_proba(path: Path, truths: list[str], preds: list[str], proba: np.ndarray, classes: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "truth", "pred"] + [f"p_{_safe_name(c)}" for c in classes])
        for i, (t, p) in enumerate(zip(truths, preds)):
            writer.writerow([i, t, p] + [repr(float(v)) for v in proba[i]])


def load_eval_only_val_texts(config: ExperimentConfig, log: RunLog) -> dict[str, list[str]]:
    """Validation-side texts for evaluation-only target corpora.

    These corpora never train a detector, so only their filtered
    validation partition needs to reach ``val_n``.
    """
    out: dict[str, list[str]] = {}
    for entry in config.eval_only_corpora:
        records = read_generations(entry.path)
        rng = np.random.default_rng(config.split.rng_seed)
        perm = rng.permutation(len(records))
        cut = int(len(records) * config.split.train_fraction)
        val_side = [records[i] for i in sorted(perm[cut:])]
        kept, _ = filter_records(val_side, config.filter)
        if len(kept) < config.split.val_n:
            log.log(
                "corpus_dropped", model=entry.card.name, reason="insufficient_data",
                detail=f"eval-only val split has {len(kept)} valid records, need {config.split.val_n}",
            )
            continue
        idx = rng.choice(len(kept), size=config.split.val_n, replace=False)
        out[entry.card.name] = [kept[i].completion for i in sorted(idx)]
        log.log("corpus_loaded", model=entry.card.name, records=len(records), eval_only=True)
    return out


def run_cross_matrix(config: ExperimentConfig) -> dict:
    """Per-source binary detectors evaluated against every target corpus.

    Each source trains on its own sampled generations plus the human
    negatives (2 * train_n examples); each (source, target) cell is the
    seed-averaged AUC of that detector on target-vs-human validation
    scores.  The diagonal is self-detection; evaluation-only corpora add
    extra target columns.  Per-source jobs are independent and fan out
    over a thread pool when ``config.workers`` > 1; aggregation order is
    fixed, so outputs do not depend on the worker count.
    """
    config.output_dir.mkdir(parents=True, exist_ok=True)
    log = RunLog(config.output_dir / "run.log")
    sets = load_model_sets(config, log)
    if not sets:
        raise InsufficientDataError("no model corpus survived filtering")
    human_train, human_val = sample_human_texts(config, config.split.train_n, config.split.val_n)
    featurizer = build_featurizer(config, human_train, log)

    x_train_model = {s.card.name: stack_features([featurizer(t) for t in s.train_texts], config.features) for s in sets}
    x_val_target = {s.card.name: stack_features([featurizer(t) for t in s.val_texts], config.features) for s in sets}
    for name, texts in load_eval_only_val_texts(config, log).items():
        x_val_target[name] = stack_features([featurizer(t) for t in texts], config.features)
    x_train_human = stack_features([featurizer(t) for t in human_train], config.features)
    x_val_human = stack_features([featurizer(t) for t in human_val], config.features)

    import scipy.sparse as sp

    sources = [s.card.name for s in sets]
    targets = sources + [n for n in (e.card.name for e in config.eval_only_corpora) if n in x_val_target]
    seeds = list(config.training.seeds)

    def source_job(source: str) -> np.ndarray:
        x_train = sp.vstack([x_train_model[source], x_train_human], format="csr")
        labels = [MACHINE_LABEL] * x_train_model[source].shape[0] + [HUMAN_LABEL] * x_train_human.shape[0]
        row = np.zeros((len(seeds), len(targets)))
        for k, seed in enumerate(seeds):
            model = train_on_matrix(
                x_train, labels, config.training, seed, config.features,
                ref_lm_used=featurizer.ref_lm is not None,
            )
            machine_col = model.classes.index(MACHINE_LABEL)
            human_scores = predict_proba_matrix(model, x_val_human)[:, machine_col]
            for j, target in enumerate(targets):
                target_scores = predict_proba_matrix(model, x_val_target[target])[:, machine_col]
                row[k, j] = auc_roc(target_scores, human_scores)
                _dump_scores(
                    config.output_dir / "scores" /
                    f"cross_matrix__{_safe_name(source)}__{_safe_name(target)}__seed{seed}.csv",
                    [(MACHINE_LABEL, s) for s in target_scores] + [(HUMAN_LABEL, s) for s in human_scores],
                )
        return row

    if config.workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(source_job, sources))
    else:
        rows = [source_job(source) for source in sources]
    for source in sources:
        log.log("source_trained", model=source, seeds=len(seeds))

    per_seed = {seed: np.stack([rows[i][k] for i in range(len(sources))]) for k, seed in enumerate(seeds)}
    stacked = np.stack([per_seed[s] for s in seeds])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros_like(mean)
    write_matrix_csv(config.output_dir / "matrix_auc.csv", sources, targets, mean)
    summary = {
        "task": "cross_matrix",
        "sources": sources,
        "targets": targets,
        "seeds": seeds,
        "auc_mean": mean.tolist(),
        "auc_std": std.tolist(),
        "auc_per_seed": {str(s): per_seed[s].tolist() for s in seeds},
        "n_train_per_source": 2 * config.split.train_n,
        "n_val_per_cell": 2 * config.split.val_n,
        "dropped": log.dropped(),
    }
    write_summary_json(config.output_dir / "summary_cross_matrix.json", summary)
    log.log("task_complete", task="cross_matrix")
    return summary


def _attribution_outputs(config: ExperimentConfig, task: str, result, extra: dict, log: RunLog) -> dict:
    classes = result.classes
    mean_counts = np.mean(result.per_seed_confusion, axis=0)
    normalized = normalize_by_predicted_support(mean_counts)
    write_confusion_csv(config.output_dir / f"confusion_{task}.csv", classes, normalized)
    for seed, proba in zip(config.training.seeds, result.per_seed_proba):
        preds = [classes[k] for k in proba.argmax(axis=1)]
        _dump_proba(
            config.output_dir / "scores" / f"{task}__seed{seed}.csv",
            result.val_truths, preds, proba, classes,
        )
    summary = {
        "task": task,
        "classes": classes,
        "seeds": list(config.training.seeds),
        "metrics": {name: rep.to_dict() for name, rep in result.reports.items()},
        "confusion_mean_counts": mean_counts.tolist(),
        "confusion_normalized": normalized.tolist(),
        "dropped": log.dropped(),
        **extra,
    }
    write_summary_json(config.output_dir / f"summary_{task}.json", summary)
    log.log("task_complete", task=task)
    return summary


def _report_from(result, metric: str) -> EvalReport:
    report = result.reports[metric]
    report.confusion = result.mean_confusion_normalized()
    report.classes = result.classes
    return report


def run_source_id(config: ExperimentConfig) -> EvalReport:
    """Multiclass attribution over every model name plus a human class."""
    from .classifier import LabeledExample

    config.output_dir.mkdir(parents=True, exist_ok=True)
    log = RunLog(config.output_dir / "run.log")
    sets = load_model_sets(config, log)
    if len(sets) < 2:
        raise InsufficientDataError("source_id needs at least 2 surviving model corpora")
    human_train, human_val = sample_human_texts(config, config.split.train_n, config.split.val_n)
    featurizer = build_featurizer(config, human_train, log)

    train_set = [LabeledExample(t, s.card.name) for s in sets for t in s.train_texts]
    train_set += [LabeledExample(t, HUMAN_LABEL) for t in human_train]
    val_set = [LabeledExample(t, s.card.name) for s in sets for t in s.val_texts]
    val_set += [LabeledExample(t, HUMAN_LABEL) for t in human_val]

    result = train_multi_seed(
        train_set, val_set, config.training, config.features, ref_lm=featurizer.ref_lm
    )
    support = {s.card.name: len(s.train) for s in sets}
    support[HUMAN_LABEL] = len(human_train)
    _attribution_outputs(config, "source_id", result, {"train_support": support}, log)
    return _report_from(result, "macro_f1")


def run_family(config: ExperimentConfig) -> EvalReport:
    """Family-level attribution with per-class balanced subsampling."""
    from .classifier import LabeledExample

    config.output_dir.mkdir(parents=True, exist_ok=True)
    log = RunLog(config.output_dir / "run.log")
    sets = load_model_sets(config, log)
    n_train = config.family_train_n or 2 * config.split.train_n
    n_val = config.family_val_n or 2 * config.split.val_n

    pools: dict[str, tuple[list[str], list[str]]] = {}
    for s in sets:
        train_pool, val_pool = pools.setdefault(s.card.family, ([], []))
        train_pool.extend(s.train_texts)
        val_pool.extend(s.val_texts)

    rng = np.random.default_rng(config.split.rng_seed)
    train_set, val_set = [], []
    kept_families = []
    for family in sorted(pools):
        train_pool, val_pool = pools[family]
        if len(train_pool) < n_train or len(val_pool) < n_val:
            log.log(
                "family_dropped", label=family, reason="insufficient_data",
                detail={"train": len(train_pool), "val": len(val_pool), "need_train": n_train, "need_val": n_val},
            )
            continue
        tr_idx = rng.choice(len(train_pool), size=n_train, replace=False)
        va_idx = rng.choice(len(val_pool), size=n_val, replace=False)
        train_set += [LabeledExample(train_pool[i], family) for i in sorted(tr_idx)]
        val_set += [LabeledExample(val_pool[i], family) for i in sorted(va_idx)]
        kept_families.append(family)

    human_train, human_val = sample_human_texts(config, n_train, n_val)
    train_set += [LabeledExample(t, HUMAN_LABEL) for t in human_train]
    val_set += [LabeledExample(t, HUMAN_LABEL) for t in human_val]
    if not kept_families:
        raise InsufficientDataError("no model family survived subsampling")

    featurizer = build_featurizer(config, human_train, log)
    result = train_multi_seed(
        train_set, val_set, config.training, config.features, ref_lm=featurizer.ref_lm
    )
    support = {f: n_train for f in kept_families}
    support[HUMAN_LABEL] = n_train
    _attribution_outputs(
        config, "family", result,
        {"train_support": support, "balanced_to": [n_train, n_val]}, log,
    )
    return _report_from(result, "macro_f1")


def run_size_bin(config: ExperimentConfig) -> EvalReport:
    """Size-bin attribution; bins keep their natural (imbalanced) support."""
    from .classifier import LabeledExample

    config.output_dir.mkdir(parents=True, exist_ok=True)
    log = RunLog(config.output_dir / "run.log")
    sets = load_model_sets(config, log)
    if not sets:
        raise InsufficientDataError("no model corpus survived filtering")

    train_set, val_set = [], []
    counts: dict[str, int] = {}
    for s in sets:
        label = config.binning.label_for(s.card.size_params)
        train_set += [LabeledExample(t, label) for t in s.train_texts]
        val_set += [LabeledExample(t, label) for t in s.val_texts]
        counts[label] = counts.get(label, 0) + len(s.train)
    for label in config.binning.labels:
        if label not in counts:
            log.log("bin_dropped", label=label, reason="empty_bin")
    if len(counts) < 2:
        raise InsufficientDataError("size_bin needs at least 2 non-empty bins")

    featurizer = build_featurizer(config, None, log)
    result = train_multi_seed(
        train_set, val_set, config.training, config.features, ref_lm=featurizer.ref_lm
    )
    extra = {
        "train_support": {k: counts[k] for k in sorted(counts)},
        "binning_convention": "left-closed: [0,1B), [1B,5B), [5B,10B), [10B,20B), [20B,50B), [50B,inf)",
    }
    if config.expected_bin_counts is not None:
        expected = {k: int(v) for k, v in config.expected_bin_counts.items()}
        extra["expected_train_support"] = expected
        extra["matches_expected"] = all(counts.get(k, 0) == v for k, v in expected.items())
    _attribution_outputs(config, "size_bin", result, extra, log)
    return _report_from(result, "macro_f1")


def run_paired(config: ExperimentConfig, flag: str | None = None) -> EvalReport:
    """Binary flag-on vs flag-off detection over otherwise-matched corpora."""
    from .classifier import LabeledExample

    flag = flag or config.paired_flag
    if flag not in PAIRED_FLAGS:
        raise ValidationError(f"paired flag must be one of {PAIRED_FLAGS}")
    config.output_dir.mkdir(parents=True, exist_ok=True)
    log = RunLog(config.output_dir / "run.log")

    other_flags = [f for f in ("conversational", "quantized", "watermarked") if f != flag]
    for other in other_flags:
        values = {getattr(e.card, other) for e in config.corpora}
        if len(values) > 1:
            raise ValidationError(
                f"paired corpora must differ only in {flag!r}; {other!r} also varies"
            )
    if len({getattr(e.card, flag) for e in config.corpora}) < 2:
        raise ValidationError(f"paired task needs corpora on both sides of {flag!r}")

    sets = load_model_sets(config, log)
    pos_label, neg_label = flag, "un" + flag
    pool = {pos_label: ([], []), neg_label: ([], [])}
    for s in sets:
        label = pos_label if getattr(s.card, flag) else neg_label
        pool[label][0].extend(s.train_texts)
        pool[label][1].extend(s.val_texts)
    n_pos, n_neg = len(pool[pos_label][0]), len(pool[neg_label][0])
    if n_pos == 0 or n_neg == 0:
        raise InsufficientDataError(f"one side of {flag!r} lost all corpora to filtering")
    if max(n_pos, n_neg) / min(n_pos, n_neg) > config.max_imbalance_ratio:
        raise ValidationError(
            f"train imbalance {n_pos} vs {n_neg} exceeds ratio {config.max_imbalance_ratio}"
        )

    rng = np.random.default_rng(config.split.rng_seed)
    n_train = min(n_pos, n_neg)
    n_val = min(len(pool[pos_label][1]), len(pool[neg_label][1]))
    train_set, val_set = [], []
    for label in (pos_label, neg_label):
        train_pool, val_pool = pool[label]
        tr_idx = rng.choice(len(train_pool), size=n_train, replace=False)
        va_idx = rng.choice(len(val_pool), size=n_val, replace=False)
        train_set += [LabeledExample(train_pool[i], label) for i in sorted(tr_idx)]
        val_set += [LabeledExample(val_pool[i], label) for i in sorted(va_idx)]

    featurizer = build_featurizer(config, None, log)
    result = train_multi_seed(
        train_set, val_set, config.training, config.features,
        ref_lm=featurizer.ref_lm, positive_label=pos_label,
    )
    task = f"paired_{flag}"
    _attribution_outputs(
        config, task, result,
        {"flag": flag, "balanced_to": [n_train, n_val], "train_support": {pos_label: n_train, neg_label: n_train}},
        log,
    )
    return _report_from(result, "accuracy")


def run_experiment(config: ExperimentConfig):
    """Dispatch on ``config.task``."""
    runner = {
        "cross_matrix": run_cross_matrix,
        "source_id": run_source_id,
        "family": run_family,
        "size_bin": run_size_bin,
        "paired": run_paired,
    }[config.task]
    return runner(config)


def recompute_cross_matrix(output_dir: str | Path) -> np.ndarray:
    """Recompute the seed-mean AUC matrix from the per-cell score dumps."""
    output_dir = Path(output_dir)
    with open(output_dir / "summary_cross_matrix.json", encoding="utf-8") as fh:
        summary = json.load(fh)
    sources, targets, seeds = summary["sources"], summary["targets"], summary["seeds"]
    mean = np.zeros((len(sources), len(targets)))
    for i, source in enumerate(sources):
        for j, target in enumerate(targets):
            cells = []
            for seed in seeds:
                path = output_dir / "scores" / (
                    f"cross_matrix__{_safe_name(source)}__{_safe_name(target)}__seed{seed}.csv"
                )
                pos, neg = [], []
                with open(path, encoding="utf-8", newline="") as fh:
                    reader = csv.reader(fh)
                    next(reader)
                    for _, label, score in reader:
                        (pos if label == MACHINE_LABEL else neg).append(float(score))
                cells.append(auc_roc(pos, neg))
            mean[i, j] = float(np.mean(cells))
    return mean
