"""Corpus records and JSONL serialization.

Documents and generation records travel as UTF-8 JSONL, one record per
line, with the model card inlined in every generation record so files
stay self-describing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ParseError, SchemaError, ValidationError

ORIGINS = ("human", "model")


@dataclass(frozen=True)
class Document:
    """A single text with a stable id and a human/model origin tag."""

    id: str
    text: str
    origin: str = "human"

    def __post_init__(self):
        if not self.id:
            raise ValidationError("document id must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"document {self.id!r}: text is empty")
        if self.origin not in ORIGINS:
            raise ValidationError(f"document {self.id!r}: origin {self.origin!r} not in {ORIGINS}")


@dataclass(frozen=True)
class ModelCard:
    """Metadata for a text source."""

    name: str
    family: str
    size_params: int
    conversational: bool = False
    quantized: bool = False
    watermarked: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValidationError("model name must be non-empty")
        if not self.family:
            raise ValidationError(f"model {self.name!r}: family must be non-empty")
        if self.size_params <= 0:
            raise ValidationError(f"model {self.name!r}: size_params must be positive")


@dataclass(frozen=True)
class GenParams:
    """Sampling hyper-parameters recorded with each generation.

    ``repetition_penalty`` and ``typical_p`` are carried for corpus
    fidelity; the toy sampler does not apply them.
    ``instruction_prefix`` records the continuation instruction that
    conversational sources receive ahead of the document prompt.
    """

    max_new_tokens: int = 256
    top_k: int = 10
    top_p: float = 0.9
    temperature: float = 1.0
    repetition_penalty: float = 1.0
    typical_p: float | None = 0.9
    instruction_prefix: str | None = None

    def __post_init__(self):
        if self.max_new_tokens <= 0:
            raise ValidationError("max_new_tokens must be positive")
        if self.top_k <= 0:
            raise ValidationError("top_k must be positive")
        if not 0.0 < self.top_p <= 1.0:
            raise ValidationError("top_p must be in (0, 1]")
        if self.temperature <= 0.0:
            raise ValidationError("temperature must be positive")
        if self.repetition_penalty <= 0.0:
            raise ValidationError("repetition_penalty must be positive")
        if self.typical_p is not None and not 0.0 < self.typical_p <= 1.0:
            raise ValidationError("typical_p must be in (0, 1]")


@dataclass(frozen=True)
class GenerationRecord:
    """One prompt/completion pair attributed to a model.

    ``watermark`` carries the generator's watermark parameters (gamma,
    delta, hash_key, enabled) when the source applied one; it is kept as
    a plain mapping so corpus files stay self-describing.
    """

    model: ModelCard
    prompt: str
    completion: str
    gen_params: GenParams = field(default_factory=GenParams)
    watermark: dict | None = None

    def __post_init__(self):
        if not self.prompt.split():
            raise ValidationError("prompt must contain at least one word")


def extract_prompt(doc: Document, n_words: int = 10) -> str:
    """First ``n_words`` whitespace-delimited words of ``doc``, space-joined.

    Documents shorter than ``n_words`` yield all of their words.
    """
    if n_words < 1:
        raise ValidationError("n_words must be >= 1")
    return " ".join(doc.text.split()[:n_words])


def load_documents(path: str | Path, format: str = "jsonl") -> list[Document]:
    """Load a document corpus, rejecting duplicate ids.

    Blank lines are skipped; any other malformed line raises
    :class:`ParseError` naming the line number.
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported corpus format {format!r}")
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict) or "id" not in raw or "text" not in raw:
                raise SchemaError(f"{path}: line {lineno}: expected object with id/text fields")
            if not isinstance(raw["text"], str):
                raise SchemaError(f"{path}: line {lineno}: text must be a string")
            doc = Document(id=str(raw["id"]), text=raw["text"], origin=raw.get("origin", "human"))
            if doc.id in seen:
                raise ValidationError(f"{path}: line {lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    return docs


def write_documents(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(asdict(doc), ensure_ascii=False) + "\n")


def _record_to_dict(rec: GenerationRecord) -> dict:
    out = {
        "model": asdict(rec.model),
        "prompt": rec.prompt,
        "completion": rec.completion,
        "gen_params": asdict(rec.gen_params),
    }
    if rec.watermark is not None:
        out["watermark"] = dict(rec.watermark)
    return out


def _record_from_dict(raw: dict, where: str) -> GenerationRecord:
    for key in ("model", "prompt", "completion", "gen_params"):
        if key not in raw:
            raise SchemaError(f"{where}: missing field {key!r}")
    for key in ("prompt", "completion"):
        if not isinstance(raw[key], str):
            raise SchemaError(f"{where}: {key} must be a string")
    try:
        model = ModelCard(**raw["model"])
        params = GenParams(**raw["gen_params"])
    except TypeError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    return GenerationRecord(
        model=model,
        prompt=raw["prompt"],
        completion=raw["completion"],
        gen_params=params,
        watermark=raw.get("watermark"),
    )


def write_generations(records: Iterable[GenerationRecord], path: str | Path) -> None:
    """Write generation records as JSONL; round-trips through read_generations."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(_record_to_dict(rec), ensure_ascii=False) + "\n")


def read_generations(path: str | Path) -> list[GenerationRecord]:
    records: list[GenerationRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            records.append(_record_from_dict(raw, f"{path}: line {lineno}"))
    return records
