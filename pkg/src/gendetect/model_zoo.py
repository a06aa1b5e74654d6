"""Catalog of the public LLMs the full-scale experiment grid targets.

Sizes are parameter counts.  Conversationally fine-tuned variants carry
their foundation family so family-level grouping yields 11 model
families (12 classes with human text).  ``LOW_YIELD_MODELS`` lists the
models dropped for failing to produce enough valid generations at the
standard 800/200 per-model sampling.
"""

from __future__ import annotations

from .corpus import ModelCard

_M = 1_000_000
_B = 1_000_000_000


def _card(name: str, family: str, size: int, conversational: bool = False) -> ModelCard:
    return ModelCard(name=name, family=family, size_params=size, conversational=conversational)


MODEL_ZOO: tuple[ModelCard, ...] = (
    # foundation models
    _card("bloom-560m", "BLOOM", 560 * _M),
    _card("bloom-1b1", "BLOOM", 1_100 * _M),
    _card("bloom-1b7", "BLOOM", 1_700 * _M),
    _card("bloom-3b", "BLOOM", 3 * _B),
    _card("bloom-7b1", "BLOOM", 7_100 * _M),
    _card("cerebras-gpt-111m", "Cerebras-GPT", 111 * _M),
    _card("cerebras-gpt-256m", "Cerebras-GPT", 256 * _M),
    _card("cerebras-gpt-1.3b", "Cerebras-GPT", 1_300 * _M),
    _card("cerebras-gpt-2.7b", "Cerebras-GPT", 2_700 * _M),
    _card("cerebras-gpt-6.7b", "Cerebras-GPT", 6_700 * _M),
    _card("cerebras-gpt-13b", "Cerebras-GPT", 13 * _B),
    _card("gpt2-124m", "GPT-2", 124 * _M),
    _card("gpt2-355m", "GPT-2", 355 * _M),
    _card("gpt2-774m", "GPT-2", 774 * _M),
    _card("gpt2-1.5b", "GPT-2", 1_500 * _M),
    _card("llama-7b", "LLaMA", 7 * _B),
    _card("llama-13b", "LLaMA", 13 * _B),
    _card("llama-30b", "LLaMA", 30 * _B),
    _card("llama-65b", "LLaMA", 65 * _B),
    _card("llama-2-7b", "LLaMA-v2", 7 * _B),
    _card("llama-2-13b", "LLaMA-v2", 13 * _B),
    _card("llama-2-70b", "LLaMA-v2", 70 * _B),
    _card("mpt-7b", "MPT", 7 * _B),
    _card("mpt-30b", "MPT", 30 * _B),
    _card("opt-125m", "OPT", 125 * _M),
    _card("opt-350m", "OPT", 350 * _M),
    _card("opt-1.3b", "OPT", 1_300 * _M),
    _card("opt-2.7b", "OPT", 2_700 * _M),
    _card("opt-6.7b", "OPT", 6_700 * _M),
    _card("opt-13b", "OPT", 13 * _B),
    _card("opt-30b", "OPT", 30 * _B),
    _card("opt-66b", "OPT", 66 * _B),
    _card("open-llama-3b", "OpenLLaMA", 3 * _B),
    _card("open-llama-7b", "OpenLLaMA", 7 * _B),
    _card("open-llama-13b", "OpenLLaMA", 13 * _B),
    _card("open-llama-v2-3b", "OpenLLaMA-v2", 3 * _B),
    _card("open-llama-v2-7b", "OpenLLaMA-v2", 7 * _B),
    _card("pythia-70m", "Pythia", 70 * _M),
    _card("pythia-160m", "Pythia", 160 * _M),
    _card("pythia-410m", "Pythia", 410 * _M),
    _card("pythia-1b", "Pythia", 1 * _B),
    _card("pythia-1.4b", "Pythia", 1_400 * _M),
    _card("pythia-2.8b", "Pythia", 2_800 * _M),
    _card("pythia-6.9b", "Pythia", 6_900 * _M),
    _card("pythia-12b", "Pythia", 12 * _B),
    # conversationally fine-tuned variants
    _card("falcon-7b-instruct", "Falcon", 7 * _B, conversational=True),
    _card("falcon-40b-instruct", "Falcon", 40 * _B, conversational=True),
    _card("alfred-40b-0723", "Falcon", 40 * _B, conversational=True),
    _card("llama-2-7b-chat", "LLaMA-v2", 7 * _B, conversational=True),
    _card("llama-2-13b-chat", "LLaMA-v2", 13 * _B, conversational=True),
    _card("llama-2-70b-chat", "LLaMA-v2", 70 * _B, conversational=True),
    _card("mpt-7b-chat", "MPT", 7 * _B, conversational=True),
    _card("mpt-30b-chat", "MPT", 30 * _B, conversational=True),
    _card("vicuna-7b-v1.3", "LLaMA", 7 * _B, conversational=True),
    _card("vicuna-13b-v1.3", "LLaMA", 13 * _B, conversational=True),
    _card("vicuna-33b-v1.3", "LLaMA", 33 * _B, conversational=True),
)

# Dropped at the standard sampling sizes: not enough valid generations.
LOW_YIELD_MODELS: frozenset[str] = frozenset(
    {"pythia-70m", "cerebras-gpt-111m", "cerebras-gpt-256m", "opt-350m"}
)

# Reference per-bin sample totals (train, test) for the size task at the
# standard 800 train / 200 validation samples per model.
REFERENCE_SIZE_BIN_COUNTS: dict[str, tuple[int, int]] = {
    "<1B": (9600, 2400),
    "1-5B": (11200, 2800),
    "5-10B": (12000, 3000),
    "10-20B": (7200, 1800),
    "20-50B": (6400, 1600),
    ">50B": (3200, 800),
}

# Continuation instruction recorded with externally ingested chat-model corpora.
CONVERSATIONAL_PROMPT_PREFIX = "Give the best continuation of the following text:"


def zoo_card(name: str) -> ModelCard:
    for card in MODEL_ZOO:
        if card.name == name:
            return card
    raise KeyError(f"unknown model {name!r}")
