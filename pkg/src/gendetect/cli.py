"""Command-line entry points.

Subcommands: generate, filter, split, train, matrix, attribute, paired,
report.  Every config field is overridable with a flag of the same
dotted name, e.g. ``gendetect matrix --config cfg.yaml --split.train_n 100``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .classifier import save_model, train_on_matrix
from .config import (
    apply_overrides,
    build_experiment_config,
    load_config_file,
    pairs_to_overrides,
)
from .corpus import (
    GenParams,
    ModelCard,
    extract_prompt,
    load_documents,
    read_generations,
    write_generations,
)
from .errors import GendetectError
from .features import stack_features
from .filtering import filter_records, split_then_sample
from .metrics import read_matrix_csv
from .model_zoo import CONVERSATIONAL_PROMPT_PREFIX
from .toylm import WatermarkParams, generate, save_vocab, splitmix64, train_lm

ATTRIBUTE_TASKS = {"source": "source_id", "family": "family", "size": "size_bin"}
PAIRED_FLAGS = {"watermark": "watermarked", "quantized": "quantized"}


def _load(args, extra) -> dict:
    raw = load_config_file(args.config) if args.config else {}
    return apply_overrides(raw, pairs_to_overrides(extra))


def cmd_generate(args, extra) -> int:
    raw = _load(args, extra)
    gen = raw.get("generate", {})
    docs = load_documents(gen["human_corpus"])
    out_dir = Path(gen.get("out_dir", "generated"))
    out_dir.mkdir(parents=True, exist_ok=True)
    gen_params = GenParams(**gen.get("gen_params", {}))
    lm_opts = gen.get("lm", {})
    n_records = int(gen.get("n_records", 1000))
    prompt_words = int(gen.get("prompt_words", 10))

    for entry in gen["models"]:
        entry = dict(entry)
        wm = WatermarkParams(**{"enabled": False, **entry.pop("watermark", {})})
        lo, hi = entry.pop("corpus_slice", [0, len(docs)])
        entry_seed = int(entry.pop("seed", 0))
        card = ModelCard(
            name=entry["name"],
            family=entry.get("family", "toy"),
            size_params=int(entry.get("size_params", 1_000_000)),
            conversational=bool(entry.get("conversational", False)),
            quantized=bool(entry.get("quantized", False)),
            watermarked=bool(wm.enabled and wm.delta > 0),
        )
        entry_params = gen_params
        if card.conversational:
            entry_params = replace(gen_params, instruction_prefix=CONVERSATIONAL_PROMPT_PREFIX)
        lm = train_lm(
            docs[lo:hi],
            order=int(lm_opts.get("order", 2)),
            smoothing_k=float(lm_opts.get("smoothing_k", 0.5)),
            name=card.name,
        )
        records = []
        for i in range(n_records):
            prompt = extract_prompt(docs[i % len(docs)], prompt_words)
            if entry_params.instruction_prefix:
                prompt = f"{entry_params.instruction_prefix} {prompt}"
            seed = splitmix64((entry_seed & (2**64 - 1)) + i)
            records.append(generate(lm, prompt, entry_params, wm, seed=seed, card=card))
        path = out_dir / f"{card.name}.jsonl"
        write_generations(records, path)
        save_vocab(lm.vocab, out_dir / f"{card.name}.vocab.txt")
        print(f"wrote {len(records)} records -> {path}")
    return 0


def cmd_filter(args, extra) -> int:
    raw = _load(args, extra)
    from .config import build_filter_policy

    policy = build_filter_policy(raw.get("filter", {}))
    records = read_generations(args.input)
    kept, rejected = filter_records(records, policy)
    write_generations(kept, args.kept)
    with open(args.rejected, "w", encoding="utf-8") as fh:
        for rec, reason in rejected:
            fh.write(json.dumps({"reason": reason, "prompt": rec.prompt, "model": rec.model.name}) + "\n")
    print(f"kept {len(kept)}, rejected {len(rejected)} -> {args.kept}, {args.rejected}")
    return 0


def cmd_split(args, extra) -> int:
    raw = _load(args, extra)
    from .config import build_filter_policy, build_split_spec

    policy = build_filter_policy(raw.get("filter", {}))
    spec = build_split_spec(raw.get("split", {}))
    records = read_generations(args.input)
    train, val = split_then_sample(records, spec, policy)
    write_generations(train, args.out_train)
    write_generations(val, args.out_val)
    print(f"train {len(train)} -> {args.out_train}; val {len(val)} -> {args.out_val}")
    return 0


def cmd_train(args, extra) -> int:
    """Train per-seed binary detectors (one source vs human) and save them."""
    raw = _load(args, extra)
    config = build_experiment_config(raw, task="cross_matrix")
    log = harness.RunLog(config.output_dir / "run.log")
    sets = harness.load_model_sets(config, log)
    by_name = {s.card.name: s for s in sets}
    source = args.source or sets[0].card.name
    if source not in by_name:
        raise GendetectError(f"source {source!r} not among surviving corpora {sorted(by_name)}")
    human_train, _ = harness.sample_human_texts(config, config.split.train_n, config.split.val_n)
    featurizer = harness.build_featurizer(config, human_train, log)
    texts = by_name[source].train_texts + human_train
    labels = [harness.MACHINE_LABEL] * len(by_name[source].train_texts) + [harness.HUMAN_LABEL] * len(human_train)
    x = stack_features([featurizer(t) for t in texts], config.features)
    model_dir = config.output_dir / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    for seed in config.training.seeds:
        model = train_on_matrix(
            x, labels, config.training, seed, config.features,
            ref_lm_used=featurizer.ref_lm is not None,
        )
        path = model_dir / f"{harness._safe_name(source)}__seed{seed}.npz"
        save_model(model, path)
        print(f"saved {path}")
    return 0


def cmd_matrix(args, extra) -> int:
    raw = _load(args, extra)
    summary = harness.run_cross_matrix(build_experiment_config(raw, task="cross_matrix"))
    print(f"cross-matrix over {len(summary['sources'])} sources -> {raw.get('output_dir', 'out')}")
    return 0


def cmd_attribute(args, extra) -> int:
    raw = _load(args, extra)
    config = build_experiment_config(raw, task=ATTRIBUTE_TASKS[args.task])
    report = harness.run_experiment(config)
    print(f"{config.task}: macro-F1 {report.value:.4f} +/- {report.std:.4f}")
    return 0


def cmd_paired(args, extra) -> int:
    raw = _load(args, extra)
    flag = PAIRED_FLAGS[args.flag]
    raw.setdefault("paired", {})["flag"] = flag
    config = build_experiment_config(raw, task="paired")
    report = harness.run_paired(config, flag)
    print(f"paired[{flag}]: accuracy {report.value:.4f} +/- {report.std:.4f}")
    return 0


def cmd_report(args, extra) -> int:
    out = Path(args.output_dir)
    summaries = sorted(out.glob("summary_*.json"))
    if not summaries:
        print(f"no summaries under {out}", file=sys.stderr)
        return 1
    for path in summaries:
        with open(path, encoding="utf-8") as fh:
            summary = json.load(fh)
        task = summary.get("task", path.stem)
        print(f"== {task} ({path.name})")
        if "metrics" in summary:
            for name, rep in sorted(summary["metrics"].items()):
                print(f"  {name}: {rep['mean']:.4f} +/- {rep['std']:.4f}  per-seed {rep['per_seed']}")
        if "auc_mean" in summary:
            print(f"  sources: {summary['sources']}")
            for src, row in zip(summary["sources"], summary["auc_mean"]):
                cells = "  ".join(f"{v:.3f}" for v in row)
                print(f"  {src}: {cells}")
        for drop in summary.get("dropped", []):
            print(f"  dropped: {drop}")
    if args.verify and (out / "summary_cross_matrix.json").exists():
        _, _, stored = read_matrix_csv(out / "matrix_auc.csv")
        recomputed = harness.recompute_cross_matrix(out)
        if np.allclose(stored, recomputed, atol=1e-12):
            print("verify: matrix_auc.csv matches score dumps")
        else:
            print("verify: MISMATCH between matrix_auc.csv and score dumps", file=sys.stderr)
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gendetect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", default=None, help="YAML config file")
        return p

    add("generate", cmd_generate, help="generate toy-LM corpora, with or without watermark")
    p = add("filter", cmd_filter, help="apply the generation filter to a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--kept", required=True)
    p.add_argument("--rejected", required=True)
    p = add("split", cmd_split, help="80/20 split, filter, and sample one corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-val", required=True)
    p = add("train", cmd_train, help="train and save per-seed binary detectors for one source")
    p.add_argument("--source", default=None, help="model name (default: first surviving corpus)")
    add("matrix", cmd_matrix, help="run the cross-model AUC matrix")
    p = add("attribute", cmd_attribute, help="run an attribution task")
    p.add_argument("--task", choices=sorted(ATTRIBUTE_TASKS), required=True)
    p = add("paired", cmd_paired, help="run a paired flag-detection task")
    p.add_argument("--flag", choices=sorted(PAIRED_FLAGS), required=True)
    p = add("report", cmd_report, help="summarize (and optionally verify) run outputs")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--verify", action="store_true", help="recompute metrics from score dumps")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.fn(args, extra)
    except GendetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
