"""Multinomial logistic regression trained with seeded mini-batch SGD.

Binary detection is the 2-class case.  Training is deterministic in
(data order, seed, config): initialization is zero and shuffling/batch
order derive from the seed alone.  Class imbalance is handled with
per-example loss weights proportional to inverse class frequency.

Dense stylometric features are rescaled to unit RMS (scale stored in the
model) so that large-magnitude statistics such as perplexity do not
destabilize SGD; the scaling is folded back into the weights at scoring
time, so scoring always consumes raw feature values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import TrainingError, ValidationError
from .features import FeatureSpec, Featurizer, stack_features
from .metrics import EvalReport, auc_roc, confusion_matrix, macro_f1

MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: str


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.1
    l2_lambda: float = 1e-6
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if self.learning_rate <= 0.0:
            raise ValidationError("learning_rate must be positive")
        if self.l2_lambda < 0.0:
            raise ValidationError("l2_lambda must be non-negative")
        if not self.seeds:
            raise ValidationError("need at least one seed")


@dataclass
class ClassifierModel:
    """Trained linear model plus everything needed to score new text."""

    feature_spec: FeatureSpec
    classes: list[str]
    weights: np.ndarray  # (n_classes, hash_dim + dense_dim), scaled feature space
    bias: np.ndarray  # (n_classes,)
    seed: int
    dense_scale: np.ndarray  # (dense_dim,), RMS of each dense stat on the train set
    ref_lm_used: bool = False

    def __post_init__(self):
        if self.weights.shape != (len(self.classes), self.feature_spec.hash_dim + self.feature_spec.dense_dim):
            raise ValidationError(f"weight shape {self.weights.shape} does not match classes/spec")
        if not np.all(np.isfinite(self.weights)) or not np.all(np.isfinite(self.bias)):
            raise ValidationError("model weights must be finite")

    def effective_weights(self) -> np.ndarray:
        """Weights expressed over raw (unscaled) features."""
        w = self.weights.copy()
        if self.feature_spec.dense_dim:
            w[:, self.feature_spec.hash_dim :] /= self.dense_scale
        return w


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    x,
    y_idx: np.ndarray,
    sample_weights: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted-mean cross-entropy + (l2/2)||W||^2 and its exact gradient.

    This is the objective every SGD batch step descends; the analytic
    gradient here is what the finite-difference check validates.
    """
    n = x.shape[0]
    logits = x @ weights.T + bias
    probs = softmax_rows(logits)
    picked = np.clip(probs[np.arange(n), y_idx], 1e-300, None)
    loss = float(-(sample_weights * np.log(picked)).sum() / n)
    loss += 0.5 * l2_lambda * float((weights * weights).sum())
    delta = probs.copy()
    delta[np.arange(n), y_idx] -= 1.0
    delta *= (sample_weights / n)[:, None]
    grad_w = (x.T @ delta).T + l2_lambda * weights
    grad_b = delta.sum(axis=0)
    return loss, np.asarray(grad_w), grad_b


def _class_weights(labels: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    counts = {c: 0 for c in classes}
    for lab in labels:
        counts[lab] += 1
    n, k = len(labels), len(classes)
    per_class = {c: n / (k * counts[c]) for c in classes}
    return np.array([per_class[lab] for lab in labels])


def _scale_dense_columns(x, spec: FeatureSpec) -> tuple[object, np.ndarray]:
    """Rescale trailing dense columns to unit RMS; returns (copy, scale)."""
    if not spec.dense_dim:
        return x, np.ones(0)
    dense = np.asarray(x[:, spec.hash_dim :].todense())
    scale = np.sqrt((dense * dense).mean(axis=0))
    scale[scale == 0.0] = 1.0
    x = x.copy()
    mask = x.indices >= spec.hash_dim
    x.data[mask] /= scale[x.indices[mask] - spec.hash_dim]
    return x, scale


def train_on_matrix(
    x_raw,
    labels: Sequence[str],
    config: TrainConfig,
    seed: int,
    feature_spec: FeatureSpec,
    ref_lm_used: bool = False,
) -> ClassifierModel:
    """SGD over a pre-assembled design matrix (raw dense columns)."""
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError(f"need at least 2 distinct labels, got {classes}")
    n = x_raw.shape[0]
    if n != len(labels):
        raise ValidationError("matrix rows do not match labels")

    x, dense_scale = _scale_dense_columns(x_raw, feature_spec)
    idx_of = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([idx_of[lab] for lab in labels])
    sample_w = _class_weights(labels, classes)

    w = np.zeros((len(classes), x.shape[1]))
    b = np.zeros(len(classes))
    rng = np.random.default_rng(seed)
    step = 0
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            step += 1
            lr = config.learning_rate / math.sqrt(step)
            loss, grad_w, grad_b = loss_and_gradient(
                w, b, x[batch], y_idx[batch], sample_w[batch], config.l2_lambda
            )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at batch {step}")
            w -= lr * grad_w
            b -= lr * grad_b

    return ClassifierModel(
        feature_spec=feature_spec,
        classes=classes,
        weights=w,
        bias=b,
        seed=seed,
        dense_scale=dense_scale,
        ref_lm_used=ref_lm_used,
    )


def train(
    train_set: Sequence[LabeledExample],
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    feature_spec: FeatureSpec = FeatureSpec(),
    ref_lm=None,
) -> ClassifierModel:
    """Featurize and fit one model; see module docstring for determinism."""
    featurizer = Featurizer(feature_spec, ref_lm)
    x = stack_features([featurizer(ex.text) for ex in train_set], feature_spec)
    labels = [ex.label for ex in train_set]
    return train_on_matrix(x, labels, config, seed, feature_spec, ref_lm_used=ref_lm is not None)


def predict_proba_matrix(model: ClassifierModel, x_raw) -> np.ndarray:
    """Row-wise class probabilities for a raw design matrix."""
    logits = x_raw @ model.effective_weights().T + model.bias
    return softmax_rows(np.asarray(logits))


def predict_scores(model: ClassifierModel, text: str, ref_lm=None) -> dict[str, float]:
    """Softmax class scores for one text; scores sum to 1."""
    if not text.strip():
        raise ValidationError("cannot score empty text")
    if model.ref_lm_used and ref_lm is None:
        raise ValidationError("model was trained with a reference LM; pass the same ref_lm")
    featurizer = Featurizer(model.feature_spec, ref_lm)
    x = stack_features([featurizer(text)], model.feature_spec)
    probs = predict_proba_matrix(model, x)[0]
    return {c: float(p) for c, p in zip(model.classes, probs)}


@dataclass
class MultiSeedResult:
    models: list[ClassifierModel]
    reports: dict[str, EvalReport]
    classes: list[str]
    val_truths: list[str]
    per_seed_proba: list[np.ndarray]  # one (n_val, n_classes) matrix per seed
    per_seed_confusion: list[np.ndarray] = field(default_factory=list)

    def mean_confusion_normalized(self) -> np.ndarray:
        from .metrics import normalize_by_predicted_support

        return normalize_by_predicted_support(np.mean(self.per_seed_confusion, axis=0))


def train_multi_seed(
    train_set: Sequence[LabeledExample],
    val_set: Sequence[LabeledExample],
    config: TrainConfig = TrainConfig(),
    feature_spec: FeatureSpec = FeatureSpec(),
    ref_lm=None,
    positive_label: str | None = None,
) -> MultiSeedResult:
    """Train one model per configured seed and evaluate each on val_set.

    Reports carry per-seed values plus mean and sample std.  AUC is
    reported for binary tasks, oriented by ``positive_label`` (defaults
    to the lexicographically last class).
    """
    featurizer = Featurizer(feature_spec, ref_lm)
    x_train = stack_features([featurizer(ex.text) for ex in train_set], feature_spec)
    x_val = stack_features([featurizer(ex.text) for ex in val_set], feature_spec)
    train_labels = [ex.label for ex in train_set]
    val_truths = [ex.label for ex in val_set]

    models, per_seed_proba, per_seed_conf = [], [], []
    accs, f1s, aucs = [], [], []
    classes: list[str] = []
    for seed in config.seeds:
        model = train_on_matrix(
            x_train, train_labels, config, seed, feature_spec, ref_lm_used=ref_lm is not None
        )
        classes = model.classes
        proba = predict_proba_matrix(model, x_val)
        preds = [classes[i] for i in proba.argmax(axis=1)]
        models.append(model)
        per_seed_proba.append(proba)
        per_seed_conf.append(confusion_matrix(preds, val_truths, classes))
        accs.append(sum(p == t for p, t in zip(preds, val_truths)) / len(val_truths))
        f1s.append(macro_f1(preds, val_truths, classes))
        if len(classes) == 2:
            pos = positive_label if positive_label is not None else classes[-1]
            if pos not in classes:
                raise ValidationError(f"positive_label {pos!r} not in classes {classes}")
            col = classes.index(pos)
            pos_scores = [proba[i, col] for i, t in enumerate(val_truths) if t == pos]
            neg_scores = [proba[i, col] for i, t in enumerate(val_truths) if t != pos]
            aucs.append(auc_roc(pos_scores, neg_scores))

    reports = {
        "accuracy": EvalReport(metric="accuracy", per_seed=accs),
        "macro_f1": EvalReport(metric="macro_f1", per_seed=f1s),
    }
    if aucs:
        reports["auc"] = EvalReport(metric="auc", per_seed=aucs)
    return MultiSeedResult(
        models=models,
        reports=reports,
        classes=classes,
        val_truths=val_truths,
        per_seed_proba=per_seed_proba,
        per_seed_confusion=per_seed_conf,
    )


def save_model(model: ClassifierModel, path: str | Path) -> None:
    """Single self-describing .npz with a versioned schema field."""
    meta = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "classes": model.classes,
        "seed": model.seed,
        "feature_spec": model.feature_spec.to_dict(),
        "ref_lm_used": model.ref_lm_used,
    }
    np.savez(
        path,
        weights=model.weights,
        bias=model.bias,
        dense_scale=model.dense_scale,
        meta=np.array(json.dumps(meta, sort_keys=True)),
    )


def load_model(path: str | Path) -> ClassifierModel:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        if meta.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValidationError(f"unsupported model schema {meta.get('schema_version')!r}")
        return ClassifierModel(
            feature_spec=FeatureSpec.from_dict(meta["feature_spec"]),
            classes=list(meta["classes"]),
            weights=archive["weights"],
            bias=archive["bias"],
            seed=meta["seed"],
            dense_scale=archive["dense_scale"],
            ref_lm_used=meta["ref_lm_used"],
        )


def ensure_compatible(model: ClassifierModel, spec: FeatureSpec) -> None:
    """Reject scoring with a model whose hashing disagrees with ``spec``."""
    if model.feature_spec.hash_seed != spec.hash_seed:
        raise ValidationError(
            f"model hash_seed {model.feature_spec.hash_seed} != expected {spec.hash_seed}"
        )
    if model.feature_spec.hash_dim != spec.hash_dim:
        raise ValidationError(
            f"model hash_dim {model.feature_spec.hash_dim} != expected {spec.hash_dim}"
        )
