#!/usr/bin/env python3
"""Build a self-contained demo dataset: a synthetic human corpus plus six
toy-LM generation corpora (two sizes of one family, a base/chat pair and
a watermarked twin of another, and a quantized-flag twin for the null
experiment), and write a ready-to-run config.yaml.

Run:
    python scripts/make_toy_corpora.py --out data/demo
    python scripts/run_all_experiments.py --data data/demo
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import yaml

from gendetect.corpus import Document, GenParams, ModelCard, write_documents, write_generations
from gendetect.model_zoo import CONVERSATIONAL_PROMPT_PREFIX
from gendetect.toylm import WATERMARK_OFF, WatermarkParams, generate, train_lm

VOCAB_SIZE = 700
DOC_WORDS = 400
GEN_PARAMS = GenParams(max_new_tokens=120, top_k=40, top_p=1.0)
WM = WatermarkParams(gamma=0.5, delta=2.0, hash_key=424243, enabled=True)


def styled_docs(style_seed: int, n_docs: int, doc_seed: int) -> list[Document]:
    """Documents over one shared vocabulary with a style-specific frequency
    ranking, so sources overlap heavily but stay statistically distinct."""
    style = np.random.default_rng(style_seed)
    vocab = style.permutation([f"tok{i}" for i in range(VOCAB_SIZE)])
    weights = 1.0 / np.arange(1, VOCAB_SIZE + 1) ** 0.55
    weights /= weights.sum()
    rng = np.random.default_rng(doc_seed)
    return [
        Document(id=f"s{style_seed}-{k}", text=" ".join(rng.choice(vocab, size=DOC_WORDS, p=weights)))
        for k in range(n_docs)
    ]


def build_corpus(card: ModelCard, style_seed: int, out_dir: Path, n_records: int,
                 wm=WATERMARK_OFF, chat_prefix: bool = False, lm=None):
    docs = styled_docs(style_seed, 140, doc_seed=style_seed + 1)
    lm = lm or train_lm(docs, order=2, smoothing_k=0.3, name=card.name)
    params = GEN_PARAMS
    if chat_prefix:
        from dataclasses import replace

        params = replace(GEN_PARAMS, instruction_prefix=CONVERSATIONAL_PROMPT_PREFIX)
    records = []
    for i in range(n_records):
        prompt = " ".join(docs[i % len(docs)].text.split()[:10])
        if params.instruction_prefix:
            prompt = f"{params.instruction_prefix} {prompt}"
        records.append(generate(lm, prompt, params, wm, seed=style_seed * 100_000 + i, card=card))
    path = out_dir / f"{card.name}.jsonl"
    write_generations(records, path)
    print(f"  {card.name}: {n_records} records -> {path}")
    return lm, path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/demo", help="output directory")
    parser.add_argument("--records", type=int, default=700, help="generations per model")
    args = parser.parse_args()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    print("human corpus")
    human = styled_docs(1, 800, doc_seed=2)
    write_documents(human, out_dir / "human.jsonl")

    print("model corpora")
    build_corpus(ModelCard("muriel-350m", "muriel", 350_000_000), 10, out_dir, args.records)
    build_corpus(ModelCard("muriel-2.7b", "muriel", 2_700_000_000), 20, out_dir, args.records)
    otter_lm, _ = build_corpus(ModelCard("otter-7b", "otter", 7_000_000_000), 30, out_dir, args.records)
    build_corpus(ModelCard("otter-7b-chat", "otter", 7_000_000_000, conversational=True),
                 30, out_dir, args.records, chat_prefix=True, lm=otter_lm)
    build_corpus(ModelCard("otter-7b-wm", "otter", 7_000_000_000, watermarked=True),
                 30, out_dir, args.records, wm=WM, lm=otter_lm)
    # same distribution as muriel-350m, only the quantized flag differs
    build_corpus(ModelCard("muriel-350m-q", "muriel", 350_000_000, quantized=True),
                 10, out_dir, args.records)

    config = {
        "output_dir": str(out_dir / "out"),
        "human_corpus": str(out_dir / "human.jsonl"),
        "corpora": [str(out_dir / f"{name}.jsonl")
                    for name in ("muriel-350m", "muriel-2.7b", "otter-7b", "otter-7b-chat")],
        "split": {"train_fraction": 0.8, "train_n": 400, "val_n": 100, "rng_seed": 11},
        "filter": {"min_words": 50, "max_dup_trigram_ratio": 0.5},
        "features": {"hash_dim": 65536, "word_ngrams": [1, 2], "char_ngrams": [3, 5], "hash_seed": 99},
        "training": {"epochs": 5, "batch_size": 32, "learning_rate": 0.3, "seeds": [0, 1, 2, 3, 4]},
        "paired": {"flag": "watermarked"},
        "workers": 1,
    }
    with open(out_dir / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    print(f"config -> {out_dir / 'config.yaml'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
