"""Generation filtering, 80/20 splitting, and fixed-size sampling.

The filter drops generations that are (i) too short, (ii) repetitive, or
(iii) contain an apology-style phrase; splits happen before filtering so
train and validation never share a record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import GenerationRecord
from .errors import InsufficientDataError, ValidationError

DEFAULT_BANNED_PHRASES = (
    "as an ai language model",
    "i'm sorry",
    "i am sorry",
    "i apologize",
    "i cannot fulfill",
)

REJECT_SHORT = "short"
REJECT_REPETITIVE = "repetitive"
REJECT_BANNED = "banned"


@dataclass(frozen=True)
class FilterPolicy:
    min_words: int = 50
    max_dup_trigram_ratio: float = 0.5
    banned_phrases: tuple[str, ...] = DEFAULT_BANNED_PHRASES
    rng_seed: int = 0

    def __post_init__(self):
        if self.min_words < 1:
            raise ValidationError("min_words must be positive")
        if not 0.0 <= self.max_dup_trigram_ratio <= 1.0:
            raise ValidationError("max_dup_trigram_ratio must be in [0, 1]")
        if any(p != p.lower() for p in self.banned_phrases):
            raise ValidationError("banned phrases must be lowercase")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    train_n: int = 800
    val_n: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must be in (0, 1)")
        if self.train_n < 1 or self.val_n < 1:
            raise ValidationError("train_n and val_n must be positive")


def load_banned_phrases(path: str | Path) -> tuple[str, ...]:
    """Read a banned-phrase list file: UTF-8, one phrase per line."""
    phrases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            phrase = line.strip().lower()
            if phrase:
                phrases.append(phrase)
    return tuple(phrases)


def is_too_short(completion: str, policy: FilterPolicy) -> bool:
    return len(completion.split()) < policy.min_words


def repetition_score(completion: str) -> float:
    """Duplicate word-trigram ratio: 1 - distinct/total trigrams.

    Texts with fewer than 3 words score 0 by convention.
    """
    words = completion.split()
    if len(words) < 3:
        return 0.0
    total = len(words) - 2
    distinct = len({tuple(words[i : i + 3]) for i in range(total)})
    return 1.0 - distinct / total


def contains_banned_phrase(completion: str, policy: FilterPolicy) -> bool:
    low = completion.lower()
    return any(p in low for p in policy.banned_phrases)


def rejection_reason(record: GenerationRecord, policy: FilterPolicy) -> str | None:
    """First failing rule in order short -> repetitive -> banned, else None."""
    if is_too_short(record.completion, policy):
        return REJECT_SHORT
    if repetition_score(record.completion) > policy.max_dup_trigram_ratio:
        return REJECT_REPETITIVE
    if contains_banned_phrase(record.completion, policy):
        return REJECT_BANNED
    return None


def filter_records(
    records: Sequence[GenerationRecord], policy: FilterPolicy
) -> tuple[list[GenerationRecord], list[tuple[GenerationRecord, str]]]:
    """Partition records into (kept, rejected-with-reason)."""
    kept: list[GenerationRecord] = []
    rejected: list[tuple[GenerationRecord, str]] = []
    for rec in records:
        reason = rejection_reason(rec, policy)
        if reason is None:
            kept.append(rec)
        else:
            rejected.append((rec, reason))
    return kept, rejected


def _sample(items: list, n: int, rng: np.random.Generator) -> list:
    # uniform without replacement, original order preserved
    idx = rng.choice(len(items), size=n, replace=False)
    return [items[i] for i in sorted(idx)]


def split_then_sample(
    records: Sequence[GenerationRecord], spec: SplitSpec, policy: FilterPolicy
) -> tuple[list[GenerationRecord], list[GenerationRecord]]:
    """80/20-partition, filter each side, then sample train_n/val_n.

    The partition happens before filtering; sampling is uniform without
    replacement, seeded by ``spec.rng_seed``.  Raises
    :class:`InsufficientDataError` with counts when a filtered side is
    smaller than the requested sample.
    """
    records = list(records)
    rng = np.random.default_rng(spec.rng_seed)
    perm = rng.permutation(len(records))
    cut = int(len(records) * spec.train_fraction)
    train_side = [records[i] for i in sorted(perm[:cut])]
    val_side = [records[i] for i in sorted(perm[cut:])]

    train_kept, _ = filter_records(train_side, policy)
    val_kept, _ = filter_records(val_side, policy)

    if len(train_kept) < spec.train_n:
        raise InsufficientDataError(
            f"train split has {len(train_kept)} valid records, need {spec.train_n} "
            f"(pre-filter {len(train_side)})"
        )
    if len(val_kept) < spec.val_n:
        raise InsufficientDataError(
            f"val split has {len(val_kept)} valid records, need {spec.val_n} "
            f"(pre-filter {len(val_side)})"
        )
    return _sample(train_kept, spec.train_n, rng), _sample(val_kept, spec.val_n, rng)
