"""Shared toy-corpus builders and session fixtures.

The expensive fixtures (watermark generation sets, toy model corpora)
are built once per session and reused by the unit and acceptance tests.
All constructions are seeded, so every derived assertion is stable.
"""

from __future__ import annotations

import numpy as np
import pytest

from gendetect.corpus import Document, GenParams, ModelCard, write_documents, write_generations
from gendetect.toylm import WATERMARK_OFF, WatermarkParams, generate, train_lm

WM_PARAMS = WatermarkParams(gamma=0.5, delta=2.0, hash_key=1234, enabled=True)


def synth_docs(prefix: str, vocab_size: int, n_docs: int, words: int, seed: int, zipf: float = 0.7):
    """Documents of random words over a prefix-disjoint vocabulary."""
    rng = np.random.default_rng(seed)
    vocab = np.array([f"{prefix}{i}" for i in range(vocab_size)])
    weights = 1.0 / np.arange(1, vocab_size + 1) ** zipf
    weights /= weights.sum()
    return [
        Document(id=f"{prefix}-{k}", text=" ".join(rng.choice(vocab, size=words, p=weights)))
        for k in range(n_docs)
    ]


def train_toy_lm(prefix: str, seed: int, name: str, vocab_size: int = 300):
    docs = synth_docs(prefix, vocab_size, 70, 350, seed)
    return train_lm(docs, order=2, smoothing_k=0.3, name=name), docs


def make_generations(lm, docs, card, n, seed_base, gen_params=None, wm=WATERMARK_OFF):
    gp = gen_params or GenParams(max_new_tokens=80, top_k=10, top_p=0.9)
    records = []
    for i in range(n):
        prompt = " ".join(docs[i % len(docs)].text.split()[:10])
        records.append(generate(lm, prompt, gp, wm, seed=seed_base + i, card=card))
    return records


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("corpora")


@pytest.fixture(scope="session")
def toy_zoo(data_dir):
    """Three disjoint-vocabulary toy model corpora plus a human corpus."""
    human = synth_docs("hum", 300, 300, 90, 1)
    human_path = data_dir / "human.jsonl"
    write_documents(human, human_path)

    entries = []
    for name, prefix, seed in [("toy-a", "alpha", 10), ("toy-b", "beta", 20), ("toy-c", "gamma", 30)]:
        lm, docs = train_toy_lm(prefix, seed, name)
        card = ModelCard(name, "toy", 1_000_000)
        records = make_generations(lm, docs, card, 300, 1000 * seed)
        path = data_dir / f"{name}.jsonl"
        write_generations(records, path)
        entries.append((card, path))
    return {"human": human_path, "models": entries}


@pytest.fixture(scope="session")
def wm_lm():
    """Single-document LM with dense bigram coverage for watermark tests.

    The sentinel final word keeps EOS out of every mid-text context so
    generations run to full length.
    """
    rng = np.random.default_rng(42)
    vocab = np.array([f"w{i}" for i in range(800)])
    mega = " ".join(list(rng.choice(vocab, size=64000)) + ["finis"])
    lm = train_lm([Document(id="d0", text=mega)], order=2, smoothing_k=0.3, name="wm-lm")
    return lm, mega.split()


@pytest.fixture(scope="session")
def wm_detection_texts(wm_lm):
    """200 watermarked + 200 clean generations of ~200 scored tokens."""
    lm, words = wm_lm
    gp = GenParams(max_new_tokens=210, top_k=60, top_p=1.0)
    watermarked, clean = [], []
    for i in range(200):
        prompt = " ".join(words[(37 * i) % 50000 : (37 * i) % 50000 + 10])
        watermarked.append(generate(lm, prompt, gp, WM_PARAMS, seed=5000 + i).completion)
        clean.append(generate(lm, prompt, gp, WATERMARK_OFF, seed=9000 + i).completion)
    return watermarked, clean


@pytest.fixture(scope="session")
def wm_paired_files(wm_lm, data_dir):
    """Watermarked-vs-clean corpora for the paired classifier task."""
    lm, words = wm_lm
    gp = GenParams(max_new_tokens=210, top_k=60, top_p=1.0)
    card_wm = ModelCard("toy-wm", "toy", 1_000_000, watermarked=True)
    card_clean = ModelCard("toy-clean", "toy", 1_000_000, watermarked=False)
    recs_wm, recs_clean = [], []
    for i in range(1000):
        prompt = " ".join(words[(61 * i) % 50000 : (61 * i) % 50000 + 10])
        recs_wm.append(generate(lm, prompt, gp, WM_PARAMS, seed=31000 + i, card=card_wm))
        recs_clean.append(generate(lm, prompt, gp, WATERMARK_OFF, seed=77000 + i, card=card_clean))
    wm_path, clean_path = data_dir / "wm.jsonl", data_dir / "clean.jsonl"
    write_generations(recs_wm, wm_path)
    write_generations(recs_clean, clean_path)
    return (card_wm, wm_path), (card_clean, clean_path)
