import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gendetect.errors import ValidationError
from gendetect.features import FeatureSpec, Featurizer, featurize, unigram_entropy

SPEC = FeatureSpec(hash_dim=2**12, hash_seed=17)

words_strategy = st.lists(
    st.text(alphabet="abcdefgh", min_size=1, max_size=6), min_size=1, max_size=40
).map(" ".join)


def test_unigram_entropy_values():
    assert unigram_entropy("a a a a") == 0.0
    assert unigram_entropy("a b") == pytest.approx(1.0)
    assert unigram_entropy("a a b c") == pytest.approx(1.5)  # -(.5 lg .5 + 2 * .25 lg .25)
    with pytest.raises(ValidationError):
        unigram_entropy("   ")


@given(words_strategy)
def test_entropy_bounds(text):
    h = unigram_entropy(text)
    n_types = len(set(text.split()))
    assert -1e-12 <= h <= math.log2(n_types) + 1e-12


def test_featurize_dense_examples():
    vec = featurize("aaa aaa aaa", SPEC)
    assert vec.dense[3] == 0.0  # single word-trigram: no duplication
    assert featurize("a b a b", SPEC).dense[4] == pytest.approx(1.0)  # entropy bits


def test_featurize_deterministic():
    a = featurize("the quick brown fox jumps", SPEC)
    b = featurize("the quick brown fox jumps", SPEC)
    assert a.sparse == b.sparse and a.dense == b.dense


@settings(max_examples=60)
@given(words_strategy)
def test_sparse_l2_normalized(text):
    vec = featurize(text, SPEC)
    if vec.sparse:
        norm = math.sqrt(sum(v * v for v in vec.sparse.values()))
        assert abs(norm - 1.0) < 1e-9


def test_empty_text_rejected():
    with pytest.raises(ValidationError):
        featurize("", SPEC)
    with pytest.raises(ValidationError):
        featurize(" \t\n", SPEC)


def test_permutation_sensitivity():
    # identical unigram multisets, different word order
    a, b = "red green blue red", "red red green blue"
    unigram_only = FeatureSpec(hash_dim=2**10, word_ngrams=(1, 1), char_ngrams=None, dense_stats=False)
    assert featurize(a, unigram_only).sparse == featurize(b, unigram_only).sparse
    with_bigrams = FeatureSpec(hash_dim=2**10, word_ngrams=(1, 2), char_ngrams=None, dense_stats=False)
    assert featurize(a, with_bigrams).sparse != featurize(b, with_bigrams).sparse


def test_hash_seed_changes_indices_but_self_cosine_is_one():
    text = "pack my box with five dozen liquor jugs"
    v1 = featurize(text, FeatureSpec(hash_dim=2**10, hash_seed=1))
    v2 = featurize(text, FeatureSpec(hash_dim=2**10, hash_seed=2))
    assert set(v1.sparse) != set(v2.sparse)
    for v in (v1, v2):
        assert sum(x * x for x in v.sparse.values()) == pytest.approx(1.0, abs=1e-9)


def test_ref_lm_perplexity_in_dense_slot():
    from gendetect.corpus import Document
    from gendetect.toylm import train_lm

    docs = [Document(id=f"d{i}", text=" ".join(f"tok{j % 7}" for j in range(30))) for i in range(4)]
    lm = train_lm(docs, order=2, smoothing_k=0.5)
    with_lm = featurize("tok1 tok2 tok3", SPEC, ref_lm=lm)
    without = featurize("tok1 tok2 tok3", SPEC)
    assert with_lm.dense[5] > 0.0
    assert without.dense[5] == 0.0
    assert with_lm.dense[:5] == without.dense[:5]
    assert with_lm.dense[5] == pytest.approx(lm.perplexity("tok1 tok2 tok3"))


def test_spec_validation():
    with pytest.raises(ValidationError):
        FeatureSpec(hash_dim=1000)  # not a power of two
    with pytest.raises(ValidationError):
        FeatureSpec(hash_dim=2**9)  # too small
    with pytest.raises(ValidationError):
        FeatureSpec(word_ngrams=(2, 1))


def test_featurizer_cache_consistency():
    f = Featurizer(SPEC)
    first = f("some repeated text some repeated text")
    second = f("some repeated text some repeated text")
    assert first.sparse == second.sparse
    assert f("other words entirely").sparse != first.sparse
