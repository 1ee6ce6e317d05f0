"""Canonical dataset model: load, normalize, dedup, and persist JSONL corpora.

Everything downstream (decontamination, scoring, selection) works on the
conversation form defined here. Alpaca-style instruction/output records
are lifted into it at load time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class Message:
    role: str  # "user" | "assistant"
    content: str

    def __post_init__(self):
        if self.role not in ("user", "assistant"):
            raise CorpusError(f"invalid role: {self.role!r}")
        if not self.content.strip():
            raise CorpusError("message content empty after trimming")


@dataclass(frozen=True)
class Sample:
    id: str
    source: str
    messages: tuple[Message, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.messages:
            raise CorpusError(f"sample {self.id}: no messages")
        for i, m in enumerate(self.messages):
            expected = "user" if i % 2 == 0 else "assistant"
            if m.role != expected:
                raise CorpusError(
                    f"sample {self.id}: message {i} has role {m.role!r}, expected {expected!r}"
                )


@dataclass
class Dataset:
    name: str
    samples: list[Sample]

    def __post_init__(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise CorpusError(f"duplicate sample id in dataset {self.name!r}: {dup!r}")

    def __len__(self):
        return len(self.samples)


@dataclass
class LoadReport:
    path: str
    loaded: int
    rejected: list[dict]  # {"line": int, "reason": str}

    def to_json(self) -> dict:
        return {"path": self.path, "loaded": self.loaded,
                "rejected_count": len(self.rejected), "rejected": self.rejected}


SCHEMAS = ("conversation", "instruction-response")


def _record_to_messages(rec: dict, schema: str) -> list[Message]:
    if schema == "instruction-response":
        return [Message("user", str(rec["instruction"])),
                Message("assistant", str(rec["output"]))]
    msgs = rec["messages"]
    if not isinstance(msgs, list):
        raise CorpusError("messages field is not a list")
    return [Message(str(m["role"]), str(m["content"])) for m in msgs]


def load_dataset(path: str | Path, schema: str, name: str | None = None) -> tuple[Dataset, LoadReport]:
    """Load a JSONL file into a Dataset.

    Malformed or invariant-violating lines are rejected with a per-line
    diagnostic; the load continues. Ids default to <name>:<line-number>.
    """
    if schema not in SCHEMAS:
        raise CorpusError(f"unknown schema {schema!r}, expected one of {SCHEMAS}")
    path = Path(path)
    if name is None:
        name = path.stem
    samples: list[Sample] = []
    rejected: list[dict] = []
    offset = 0
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            line_offset = offset
            offset += len(raw)
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            try:
                rec = json.loads(text)
                if not isinstance(rec, dict):
                    raise CorpusError("record is not an object")
                msgs = _record_to_messages(rec, schema)
                sid = str(rec.get("id") or f"{name}:{lineno}")
                meta = dict(rec.get("meta") or {})
                samples.append(Sample(id=sid, source=name, messages=tuple(msgs), meta=meta))
            except (json.JSONDecodeError, KeyError, TypeError, CorpusError) as e:
                rejected.append({"line": lineno, "byte_offset": line_offset, "reason": str(e)})
    return Dataset(name=name, samples=samples), LoadReport(str(path), len(samples), rejected)


def write_dataset(d: Dataset, path: str | Path, schema: str = "conversation") -> None:
    """Write a Dataset as JSONL; load_dataset round-trips it field-for-field."""
    if schema not in SCHEMAS:
        raise CorpusError(f"unknown schema {schema!r}")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            for s in d.samples:
                if schema == "instruction-response":
                    if len(s.messages) != 2:
                        raise CorpusError(
                            f"sample {s.id}: instruction-response schema needs exactly one turn pair")
                    rec = {"id": s.id, "instruction": s.messages[0].content,
                           "output": s.messages[1].content, "meta": s.meta}
                else:
                    rec = {"id": s.id,
                           "messages": [{"role": m.role, "content": m.content} for m in s.messages],
                           "meta": s.meta}
                f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    except OSError as e:
        raise CorpusError(f"cannot write {path}: {e}") from e


def instruction_text(s: Sample) -> str:
    """All user-turn contents in order, newline-joined."""
    return "\n".join(m.content for m in s.messages if m.role == "user")


def full_text(s: Sample) -> str:
    """All messages in order with USER:/ASSISTANT: prefixes, newline-joined."""
    return "\n".join(f"{m.role.upper()}: {m.content}" for m in s.messages)


_WS = re.compile(r"\s+")


def _dedup_key(s: Sample) -> str:
    return _WS.sub(" ", full_text(s).lower()).strip()


def dedup(pool: Dataset) -> Dataset:
    """Drop exact duplicates on normalized full text, keeping first occurrences."""
    seen: set[str] = set()
    kept = []
    for s in pool.samples:
        key = _dedup_key(s)
        if key in seen:
            continue
        seen.add(key)
        kept.append(s)
    return Dataset(name=pool.name, samples=kept)
