"""Add-k smoothed n-gram language model with a green/red-list watermark.

The model doubles as a controllable text generator and as the watermark
carrier: at each sampling step a pseudo-random half of the vocabulary
(the "green" list, seeded by the previous token) gets a logit bonus, and
the detector tests for a green-token excess with a one-sided z-score:

    z = (s_G - gamma * T) / sqrt(T * gamma * (1 - gamma))

Tokens are whitespace-delimited words over the training vocabulary plus
an UNK token; there is no subword model.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Document, GenerationRecord, GenParams, ModelCard
from .errors import ValidationError

BOS_TOKEN = "<s>"
EOS_TOKEN = "</s>"
UNK_TOKEN = "<unk>"

_MASK64 = 2**64 - 1


def splitmix64(x: int) -> int:
    """Stated 64-bit mixing function used to seed per-token partitions."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class WatermarkParams:
    gamma: float = 0.5
    delta: float = 2.0
    hash_key: int = 15485863
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError("gamma must be in (0, 1)")
        if self.delta < 0.0:
            raise ValidationError("delta must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "WatermarkParams":
        return cls(**dict(raw))


WATERMARK_OFF = WatermarkParams(enabled=False)


@dataclass(frozen=True)
class WatermarkVerdict:
    scored_tokens: int
    green_count: int
    z: float
    p_one_sided: float

    def __post_init__(self):
        if not 0 <= self.green_count <= self.scored_tokens:
            raise ValidationError("green_count must be in [0, scored_tokens]")


@lru_cache(maxsize=16384)
def _green_mask(hash_key: int, prev_token_id: int, gamma: float, vocab_size: int) -> np.ndarray:
    """Boolean green-list mask for one (key, previous-token) pair.

    splitmix64(hash_key XOR prev_token_id) seeds a PCG64 shuffle of the
    vocabulary; the first round(gamma * V) positions are green.
    """
    seed = splitmix64((hash_key ^ prev_token_id) & _MASK64)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(vocab_size)
    mask = np.zeros(vocab_size, dtype=bool)
    mask[perm[: round(gamma * vocab_size)]] = True
    mask.setflags(write=False)
    return mask


def green_set(prev_token_id: int, params: WatermarkParams, vocab_size: int) -> set[int]:
    """Deterministic pseudo-random green partition for one context token."""
    if vocab_size < 2:
        raise ValidationError("vocab_size must be >= 2")
    if not 0 <= prev_token_id < vocab_size:
        raise ValidationError(f"prev_token_id {prev_token_id} out of range")
    mask = _green_mask(params.hash_key, prev_token_id, params.gamma, vocab_size)
    return set(np.flatnonzero(mask).tolist())


class NGramLM:
    """Add-k smoothed n-gram model over whitespace tokens."""

    def __init__(self, order: int, vocab: list[str], counts: dict, smoothing_k: float, name: str):
        if order < 2:
            raise ValidationError("order must be >= 2")
        if smoothing_k <= 0.0:
            raise ValidationError("smoothing_k must be positive")
        if len(vocab) < 2:
            raise ValidationError("vocab must have at least 2 tokens")
        self.order = order
        self.vocab = vocab
        self.counts = counts  # context id-tuple -> (token id array, count array, total)
        self.smoothing_k = smoothing_k
        self.name = name
        self.token_to_id = {tok: i for i, tok in enumerate(vocab)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> list[int]:
        unk = self.token_to_id[UNK_TOKEN]
        return [self.token_to_id.get(w, unk) for w in text.split()]

    def _context(self, ids: Sequence[int]) -> tuple[int, ...]:
        bos = self.token_to_id[BOS_TOKEN]
        ctx = [bos] * (self.order - 1) + list(ids)
        return tuple(ctx[-(self.order - 1) :])

    def prob_vector(self, ctx: tuple[int, ...]) -> np.ndarray:
        """Smoothed P(. | ctx) over the full vocabulary; sums to 1."""
        k, v = self.smoothing_k, self.vocab_size
        entry = self.counts.get(ctx)
        if entry is None:
            return np.full(v, 1.0 / v)
        ids, cnts, total = entry
        probs = np.full(v, k)
        probs[ids] += cnts
        probs /= total + k * v
        return probs

    def cond_prob(self, context_words: Sequence[str], token: str) -> float:
        ctx = self._context(self.encode(" ".join(context_words)))
        unk = self.token_to_id[UNK_TOKEN]
        return float(self.prob_vector(ctx)[self.token_to_id.get(token, unk)])

    def logprob(self, text: str) -> tuple[float, int]:
        """Total log2 probability of the text and its token count."""
        ids = self.encode(text)
        if not ids:
            raise ValidationError("cannot score empty text")
        bos = self.token_to_id[BOS_TOKEN]
        padded = [bos] * (self.order - 1) + ids
        total = 0.0
        for i in range(len(ids)):
            ctx = tuple(padded[i : i + self.order - 1])
            total += math.log2(self.prob_vector(ctx)[ids[i]])
        return total, len(ids)

    def perplexity(self, text: str) -> float:
        """2 ** (cross-entropy in bits per token)."""
        logp, n = self.logprob(text)
        return 2.0 ** (-logp / n)


def train_lm(corpus: Sequence[Document], order: int = 2, smoothing_k: float = 0.5, name: str = "toy-lm") -> NGramLM:
    """Count n-grams over the corpus; vocabulary in first-occurrence order.

    Each document is padded with BOS context and closed with EOS.  The
    special tokens sit at the end of the vocabulary so corpus tokens win
    deterministic ties during candidate selection.  The corpus must
    contain at least 10 tokens per vocabulary entry.
    """
    vocab: list[str] = []
    token_to_id: dict[str, int] = {}
    token_seqs = []
    total_tokens = 0
    for doc in corpus:
        words = doc.text.split()
        total_tokens += len(words)
        seq = []
        for w in words:
            if w not in token_to_id:
                token_to_id[w] = len(vocab)
                vocab.append(w)
            seq.append(token_to_id[w])
        token_seqs.append(seq)
    for special in (BOS_TOKEN, EOS_TOKEN, UNK_TOKEN):
        if special in token_to_id:
            raise ValidationError(f"corpus must not contain the reserved token {special!r}")
        token_to_id[special] = len(vocab)
        vocab.append(special)
    if total_tokens < 10 * len(vocab):
        raise ValidationError(
            f"corpus too small: {total_tokens} tokens for a vocabulary of {len(vocab)} "
            f"(need >= {10 * len(vocab)})"
        )

    bos, eos = token_to_id[BOS_TOKEN], token_to_id[EOS_TOKEN]
    raw: dict[tuple[int, ...], dict[int, int]] = {}
    for seq in token_seqs:
        padded = [bos] * (order - 1) + seq + [eos]
        for i in range(len(padded) - order + 1):
            ctx = tuple(padded[i : i + order - 1])
            tok = padded[i + order - 1]
            raw.setdefault(ctx, {})[tok] = raw.get(ctx, {}).get(tok, 0) + 1
    counts = {}
    for ctx, tok_counts in raw.items():
        ids = np.fromiter(sorted(tok_counts), dtype=np.int64)
        cnts = np.array([tok_counts[i] for i in ids], dtype=np.float64)
        counts[ctx] = (ids, cnts, float(cnts.sum()))
    return NGramLM(order=order, vocab=vocab, counts=counts, smoothing_k=smoothing_k, name=name)


def _toy_card(lm: NGramLM, wm: WatermarkParams) -> ModelCard:
    return ModelCard(
        name=lm.name,
        family="toy",
        size_params=lm.vocab_size,
        watermarked=bool(wm.enabled and wm.delta > 0),
    )


def generate(
    lm: NGramLM,
    prompt: str,
    gen_params: GenParams = GenParams(),
    wm: WatermarkParams = WATERMARK_OFF,
    seed: int = 0,
    card: ModelCard | None = None,
) -> GenerationRecord:
    """Sample a continuation of ``prompt``.

    Per step: smoothed log-probabilities, green-list bias when the
    watermark is enabled, temperature, top-k, then top-p truncation, and
    a draw from the renormalized remainder.  Stops at EOS or
    ``max_new_tokens``.  Fully determined by (lm, prompt, gen_params,
    wm, seed).
    """
    bos = lm.token_to_id[BOS_TOKEN]
    eos = lm.token_to_id[EOS_TOKEN]
    rng = np.random.Generator(np.random.PCG64(seed))
    ids = lm.encode(prompt)
    ctx = list(([bos] * (lm.order - 1) + ids)[-(lm.order - 1) :])
    out: list[int] = []
    apply_bias = wm.enabled and wm.delta != 0.0

    for _ in range(gen_params.max_new_tokens):
        with np.errstate(divide="ignore"):
            logits = np.log(lm.prob_vector(tuple(ctx)))
        logits[bos] = -np.inf  # BOS is context padding, never emitted
        if apply_bias:
            mask = _green_mask(wm.hash_key, ctx[-1], wm.gamma, lm.vocab_size)
            logits = logits + np.where(mask, wm.delta, 0.0)
        logits = logits / gen_params.temperature

        order = np.argsort(-logits, kind="stable")
        cand = order[: min(gen_params.top_k, lm.vocab_size - 1)]
        cand_logits = logits[cand] - logits[cand[0]]
        cand_probs = np.exp(cand_logits)
        cand_probs /= cand_probs.sum()
        cut = int(np.searchsorted(np.cumsum(cand_probs), gen_params.top_p)) + 1
        keep, probs = cand[:cut], cand_probs[:cut]
        tok = int(rng.choice(keep, p=probs / probs.sum()))
        if tok == eos:
            break
        out.append(tok)
        ctx = (ctx + [tok])[-(lm.order - 1) :]

    completion = " ".join(lm.vocab[i] for i in out)
    return GenerationRecord(
        model=card if card is not None else _toy_card(lm, wm),
        prompt=prompt,
        completion=completion,
        gen_params=gen_params,
        watermark=wm.to_dict(),
    )


def detect_watermark(text: str, vocab: Sequence[str], params: WatermarkParams) -> WatermarkVerdict:
    """Score every token against the green list of its predecessor.

    ``vocab`` is the generator's ordered vocabulary (must contain the UNK
    token, which absorbs out-of-vocabulary words).  Texts shorter than 2
    tokens cannot be scored.
    """
    token_to_id = {tok: i for i, tok in enumerate(vocab)}
    if UNK_TOKEN not in token_to_id:
        raise ValidationError(f"vocabulary must contain {UNK_TOKEN!r}")
    unk = token_to_id[UNK_TOKEN]
    ids = [token_to_id.get(w, unk) for w in text.split()]
    if len(ids) < 2:
        raise ValidationError("need at least 2 tokens to score a watermark")
    v = len(vocab)
    green = 0
    for prev, tok in zip(ids, ids[1:]):
        if _green_mask(params.hash_key, prev, params.gamma, v)[tok]:
            green += 1
    t = len(ids) - 1
    z = (green - params.gamma * t) / math.sqrt(t * params.gamma * (1.0 - params.gamma))
    # erfc underflows to 0 around z ~ 38; keep p strictly positive
    p = max(0.5 * math.erfc(z / math.sqrt(2.0)), 5e-324)
    return WatermarkVerdict(scored_tokens=t, green_count=green, z=z, p_one_sided=p)


def save_vocab(vocab: Sequence[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab:
            fh.write(tok + "\n")


def load_vocab(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.rstrip("\n")]
