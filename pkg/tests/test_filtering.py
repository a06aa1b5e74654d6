import pytest
from hypothesis import given
from hypothesis import strategies as st

from gendetect.corpus import GenerationRecord, ModelCard
from gendetect.errors import InsufficientDataError
from gendetect.filtering import (
    FilterPolicy,
    SplitSpec,
    contains_banned_phrase,
    filter_records,
    is_too_short,
    repetition_score,
    split_then_sample,
)

CARD = ModelCard(name="toy", family="toy", size_params=1)


def record(completion):
    return GenerationRecord(model=CARD, prompt="p", completion=completion)


def test_is_too_short():
    policy = FilterPolicy(min_words=5)
    assert is_too_short("one two three", policy)
    fifty = " ".join(f"w{i}" for i in range(50))
    assert not is_too_short(fifty, FilterPolicy(min_words=50))  # boundary: >= passes
    assert is_too_short("", policy)


def test_repetition_score_hand_oracle():
    # "a b c a b c a b c": 7 trigrams, 3 distinct
    assert repetition_score("a b c a b c a b c") == pytest.approx(1 - 3 / 7)
    assert repetition_score("a b c d e") == 0.0
    assert repetition_score("a b") == 0.0


@given(st.lists(st.sampled_from("abcd"), min_size=0, max_size=30))
def test_repetition_score_trailing_whitespace_invariant(words):
    text = " ".join(words)
    assert repetition_score(text) == repetition_score(text + "  \t ")


@given(st.lists(st.integers(0, 10**6), min_size=3, max_size=40, unique=True))
def test_repetition_score_zero_for_distinct_trigrams(nums):
    # all-distinct words give all-distinct trigrams
    assert repetition_score(" ".join(map(str, nums))) == 0.0


def test_contains_banned_phrase():
    policy = FilterPolicy()
    assert contains_banned_phrase("Well, As An AI Language Model I cannot...", policy)
    assert not contains_banned_phrase("The weather is nice.", policy)
    assert contains_banned_phrase("I apologize for the confusion", policy)


def test_filter_records_reasons_and_order():
    policy = FilterPolicy(min_words=5, max_dup_trigram_ratio=0.4)
    long_ok = " ".join(f"u{i}" for i in range(10))
    repetitive = "a b c " * 10
    banned = long_ok + " i am sorry about that"
    short_and_banned = "i am sorry"
    records = [record(long_ok), record("tiny"), record(repetitive), record(banned), record(short_and_banned)]
    kept, rejected = filter_records(records, policy)
    assert [r.completion for r in kept] == [long_ok]
    assert [reason for _, reason in rejected] == ["short", "repetitive", "banned", "short"]
    assert len(kept) + len(rejected) == len(records)


def test_filter_records_all_valid():
    policy = FilterPolicy(min_words=2)
    records = [record(f"alpha{i} beta{i} gamma{i}") for i in range(10)]
    kept, rejected = filter_records(records, policy)
    assert rejected == []
    assert kept == records


def _clean_records(n):
    return [record(" ".join(f"t{i}w{j}" for j in range(60))) for i in range(n)]


def test_split_then_sample_sizes_and_disjoint():
    records = _clean_records(2000)
    spec = SplitSpec(rng_seed=11)
    train, val = split_then_sample(records, spec, FilterPolicy())
    assert len(train) == 800 and len(val) == 200
    train_ids = {id(r) for r in train}
    assert train_ids.isdisjoint({id(r) for r in val})


def test_split_then_sample_insufficient():
    with pytest.raises(InsufficientDataError, match=r"\d+"):
        split_then_sample(_clean_records(500), SplitSpec(rng_seed=1), FilterPolicy())


def test_split_then_sample_deterministic():
    records = _clean_records(1500)
    spec = SplitSpec(rng_seed=99)
    a = split_then_sample(records, spec, FilterPolicy())
    b = split_then_sample(records, spec, FilterPolicy())
    assert a == b


def test_split_before_filter():
    # 1005 clean then 995 junk: filtering first would always leave 1005
    # records and a full 804/201 split.  Splitting first (seed 1) puts only
    # 795 clean records on the train side, so the sample must fail.
    records = _clean_records(1005) + [record("junk") for _ in range(995)]
    with pytest.raises(InsufficientDataError, match="train"):
        split_then_sample(records, SplitSpec(rng_seed=1), FilterPolicy())
    # seed 2 starves the validation side instead (195 clean < 200)
    with pytest.raises(InsufficientDataError, match="val"):
        split_then_sample(records, SplitSpec(rng_seed=2), FilterPolicy())


def test_every_kept_record_passes_all_predicates():
    policy = FilterPolicy(min_words=5, max_dup_trigram_ratio=0.4)
    mixed = _clean_records(40) + [record("x y " * 20), record("nope"), record("i'm sorry " * 10)]
    kept, rejected = filter_records(mixed, policy)
    for r in kept:
        assert not is_too_short(r.completion, policy)
        assert repetition_score(r.completion) <= policy.max_dup_trigram_ratio
        assert not contains_banned_phrase(r.completion, policy)
    assert len(kept) + len(rejected) == len(mixed)
