from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    id: str
    input: str = ""
    references: List[str] = field(default_factory=list)


@dataclass
class Corpus:
    examples: List[Example]

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)


def ingest_corpus(path, require_references: bool = True) -> Corpus:
    """Read one JSON object per line: ``{"id", "input", "references"}``.

    Blank lines are skipped. Errors name the 1-based line number.
    """
    examples: List[Example] = []
    seen = set()
    with open(Path(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(doc, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            if "id" not in doc:
                raise CorpusError(f"line {lineno}: missing field 'id'")
            ex_id = str(doc["id"])
            if ex_id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {ex_id!r}")
            seen.add(ex_id)
            text = doc.get("input", "")
            if not isinstance(text, str):
                raise CorpusError(f"line {lineno}: 'input' must be a string")
            refs = doc.get("references")
            if refs is None:
                if require_references:
                    raise CorpusError(f"line {lineno}: missing field 'references'")
                refs = []
            if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
                raise CorpusError(f"line {lineno}: 'references' must be a list of strings")
            if require_references and not refs:
                raise CorpusError(f"line {lineno}: at least one reference is required")
            examples.append(Example(ex_id, text, refs))
    return Corpus(examples)
