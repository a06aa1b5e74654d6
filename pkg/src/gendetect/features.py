"""Text featurization: hashed n-gram counts plus dense stylometric stats.

The sparse part hashes word and character n-grams into a fixed-dimension
signed-count vector (L2-normalized); the dense part is a short vector of
stylometric statistics including entropy and reference-LM perplexity.
"""

from __future__ import annotations

import hashlib
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DENSE_STAT_NAMES = (
    "mean_word_length",
    "type_token_ratio",
    "punctuation_fraction",
    "dup_trigram_ratio",
    "unigram_entropy_bits",
    "ref_lm_perplexity",
)


@dataclass(frozen=True)
class FeatureSpec:
    """Featurization parameters; serialized into every trained model."""

    hash_dim: int = 2**20
    word_ngrams: tuple[int, int] | None = (1, 2)
    char_ngrams: tuple[int, int] | None = (3, 5)
    lowercase: bool = True
    dense_stats: bool = True
    hash_seed: int = 0x5EED

    def __post_init__(self):
        if self.hash_dim < 2**10 or self.hash_dim & (self.hash_dim - 1):
            raise ValidationError("hash_dim must be a power of two >= 2^10")
        for name, rng in (("word_ngrams", self.word_ngrams), ("char_ngrams", self.char_ngrams)):
            if rng is not None:
                lo, hi = rng
                if not 1 <= lo <= hi:
                    raise ValidationError(f"{name} range must satisfy 1 <= lo <= hi")

    @property
    def dense_dim(self) -> int:
        return len(DENSE_STAT_NAMES) if self.dense_stats else 0

    def to_dict(self) -> dict:
        return {
            "hash_dim": self.hash_dim,
            "word_ngrams": list(self.word_ngrams) if self.word_ngrams else None,
            "char_ngrams": list(self.char_ngrams) if self.char_ngrams else None,
            "lowercase": self.lowercase,
            "dense_stats": self.dense_stats,
            "hash_seed": self.hash_seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FeatureSpec":
        def as_range(v):
            return tuple(v) if v is not None else None

        return cls(
            hash_dim=raw["hash_dim"],
            word_ngrams=as_range(raw["word_ngrams"]),
            char_ngrams=as_range(raw["char_ngrams"]),
            lowercase=raw["lowercase"],
            dense_stats=raw["dense_stats"],
            hash_seed=raw["hash_seed"],
        )


@dataclass
class FeatureVector:
    sparse: dict[int, float]
    dense: list[float]


def unigram_entropy(text: str) -> float:
    """Shannon entropy (bits) of the word-frequency distribution."""
    words = text.split()
    if not words:
        raise ValidationError("cannot compute entropy of empty text")
    n = len(words)
    return -sum((c / n) * math.log2(c / n) for c in Counter(words).values())


def _mean_word_length(words: list[str]) -> float:
    return sum(len(w) for w in words) / len(words)


def _type_token_ratio(words: list[str]) -> float:
    return len(set(words)) / len(words)


def _punctuation_fraction(text: str) -> float:
    return sum(1 for c in text if unicodedata.category(c).startswith("P")) / len(text)


def _dup_trigram_ratio(words: list[str]) -> float:
    if len(words) < 3:
        return 0.0
    total = len(words) - 2
    distinct = len({tuple(words[i : i + 3]) for i in range(total)})
    return 1.0 - distinct / total


class Featurizer:
    """Reusable featurizer; memoizes n-gram hashes across calls.

    The n-gram hash is an 8-byte keyed BLAKE2b of the gram string: the
    low bits index into ``hash_dim``, the top bit carries the sign.
    """

    def __init__(self, spec: FeatureSpec, ref_lm=None):
        self.spec = spec
        self.ref_lm = ref_lm
        self._key = (spec.hash_seed & (2**64 - 1)).to_bytes(8, "little")
        self._cache: dict[str, tuple[int, float]] = {}

    def _hash(self, gram: str) -> tuple[int, float]:
        cached = self._cache.get(gram)
        if cached is None:
            h = int.from_bytes(
                hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=self._key).digest(),
                "little",
            )
            cached = (h & (self.spec.hash_dim - 1), 1.0 if h >> 63 == 0 else -1.0)
            self._cache[gram] = cached
        return cached

    def _grams(self, text: str) -> Counter:
        grams: Counter = Counter()
        if self.spec.word_ngrams is not None:
            words = text.split()
            lo, hi = self.spec.word_ngrams
            for n in range(lo, hi + 1):
                for i in range(len(words) - n + 1):
                    grams["w:" + " ".join(words[i : i + n])] += 1
        if self.spec.char_ngrams is not None:
            lo, hi = self.spec.char_ngrams
            for n in range(lo, hi + 1):
                for i in range(len(text) - n + 1):
                    grams["c:" + text[i : i + n]] += 1
        return grams

    def sparse_counts(self, text: str) -> dict[int, float]:
        hashed = text.lower() if self.spec.lowercase else text
        out: dict[int, float] = {}
        for gram, count in self._grams(hashed).items():
            idx, sign = self._hash(gram)
            out[idx] = out.get(idx, 0.0) + sign * count
        # signed counts can cancel exactly; drop dead entries
        return {i: v for i, v in out.items() if v != 0.0}

    def dense_stats(self, text: str) -> list[float]:
        if not self.spec.dense_stats:
            return []
        words = text.split()
        ppl = self.ref_lm.perplexity(text) if self.ref_lm is not None else 0.0
        return [
            _mean_word_length(words),
            _type_token_ratio(words),
            _punctuation_fraction(text),
            _dup_trigram_ratio(words),
            unigram_entropy(text),
            ppl,
        ]

    def __call__(self, text: str) -> FeatureVector:
        if not text.strip():
            raise ValidationError("cannot featurize empty text")
        sparse = self.sparse_counts(text)
        norm = math.sqrt(sum(v * v for v in sparse.values()))
        if norm > 0.0:
            sparse = {i: v / norm for i, v in sparse.items()}
        dense = self.dense_stats(text)
        if any(not math.isfinite(v) for v in dense):
            raise ValidationError("non-finite dense statistic")
        return FeatureVector(sparse=sparse, dense=dense)


def featurize(text: str, spec: FeatureSpec, ref_lm=None) -> FeatureVector:
    """One-shot featurization; deterministic in (text, spec, ref_lm)."""
    return Featurizer(spec, ref_lm)(text)


def stack_features(vectors: list[FeatureVector], spec: FeatureSpec):
    """Assemble feature vectors into one CSR design matrix.

    Dense statistics occupy the trailing ``spec.dense_dim`` columns so a
    single sparse matrix carries everything.
    """
    import scipy.sparse as sp

    dim = spec.hash_dim + spec.dense_dim
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        for idx in sorted(vec.sparse):
            indices.append(idx)
            data.append(vec.sparse[idx])
        for j, v in enumerate(vec.dense):
            indices.append(spec.hash_dim + j)
            data.append(v)
        indptr.append(len(indices))
    return sp.csr_array(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(vectors), dim),
    )
