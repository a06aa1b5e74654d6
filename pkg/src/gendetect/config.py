"""YAML config loading with dotted-name command-line overrides.

The config is one structured file with nested sections; any field can be
overridden on the CLI with a flag of the same dotted name, e.g.
``--split.train_n 100`` or ``--features.hash_dim=16384``.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml

from .classifier import TrainConfig
from .corpus import read_generations
from .errors import ValidationError
from .features import FeatureSpec
from .filtering import FilterPolicy, SplitSpec, load_banned_phrases
from .harness import CorpusEntry, ExperimentConfig, SizeBinning


def load_config_file(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config root must be a mapping")
    return raw


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` (or ``--a.b.c value`` pairs) onto a config dict."""
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} must look like section.key=value")
        dotted, text = item.split("=", 1)
        node = config
        parts = dotted.strip().lstrip("-").split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override {dotted!r}: {part!r} is not a section")
        node[parts[-1]] = _parse_value(text)
    return config


def pairs_to_overrides(argv: list[str]) -> list[str]:
    """Turn leftover ``--a.b v`` / ``--a.b=v`` CLI tokens into override strings."""
    out = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if not token.startswith("--"):
            raise ValidationError(f"unexpected argument {token!r}")
        body = token[2:]
        if "=" in body:
            out.append(body)
            i += 1
        else:
            if i + 1 >= len(argv):
                raise ValidationError(f"override {token!r} is missing a value")
            out.append(f"{body}={argv[i + 1]}")
            i += 2
    return out


def _tuple_or_none(value):
    return tuple(value) if value is not None else None


def build_split_spec(raw: dict) -> SplitSpec:
    return SplitSpec(**raw)


def build_filter_policy(raw: dict) -> FilterPolicy:
    raw = dict(raw)
    phrases_file = raw.pop("banned_phrases_file", None)
    if phrases_file:
        raw["banned_phrases"] = load_banned_phrases(phrases_file)
    elif "banned_phrases" in raw:
        raw["banned_phrases"] = tuple(raw["banned_phrases"])
    return FilterPolicy(**raw)


def build_feature_spec(raw: dict) -> FeatureSpec:
    raw = dict(raw)
    for key in ("word_ngrams", "char_ngrams"):
        if key in raw:
            raw[key] = _tuple_or_none(raw[key])
    return FeatureSpec(**raw)


def build_train_config(raw: dict) -> TrainConfig:
    raw = dict(raw)
    if "seeds" in raw:
        raw["seeds"] = tuple(raw["seeds"])
    return TrainConfig(**raw)


def corpus_entry(item) -> CorpusEntry:
    """A corpus config item: a path (card inferred) or {path, ...card fields}."""
    from .corpus import ModelCard

    if isinstance(item, str):
        path = Path(item)
        records = read_generations(path)
        if not records:
            raise ValidationError(f"{path}: empty generations file")
        return CorpusEntry(card=records[0].model, path=path)
    item = dict(item)
    path = Path(item.pop("path"))
    if item:
        return CorpusEntry(card=ModelCard(**item), path=path)
    records = read_generations(path)
    if not records:
        raise ValidationError(f"{path}: empty generations file")
    return CorpusEntry(card=records[0].model, path=path)


def build_experiment_config(raw: dict, task: str | None = None) -> ExperimentConfig:
    task = task or raw.get("task")
    if task is None:
        raise ValidationError("config needs a task (or pass one on the CLI)")
    paired = raw.get("paired", {})
    family = raw.get("family", {})
    size_bin = raw.get("size_bin", {})
    ref_lm = raw.get("ref_lm", {})
    return ExperimentConfig(
        task=task,
        corpora=[corpus_entry(item) for item in raw.get("corpora", [])],
        output_dir=Path(raw.get("output_dir", "out")),
        human_corpus=Path(raw["human_corpus"]) if raw.get("human_corpus") else None,
        split=build_split_spec(raw.get("split", {})),
        filter=build_filter_policy(raw.get("filter", {})),
        features=build_feature_spec(raw.get("features", {})),
        training=build_train_config(raw.get("training", {})),
        binning=SizeBinning(),
        paired_flag=paired.get("flag", "watermarked"),
        max_imbalance_ratio=paired.get("max_imbalance_ratio", 10.0),
        ref_lm_order=ref_lm.get("order", 2),
        ref_lm_smoothing_k=ref_lm.get("smoothing_k", 0.5),
        family_train_n=family.get("train_n"),
        family_val_n=family.get("val_n"),
        expected_bin_counts=size_bin.get("expected_train_counts"),
        eval_only_corpora=[corpus_entry(item) for item in raw.get("eval_only_corpora", [])],
        workers=int(raw.get("workers", 1)),
    )
