"""Reorder generated hypotheses by an external score (overgenerate, then rerank)."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping


class RerankError(ValueError):
    pass


def hypothesis_id(record: Mapping) -> str:
    return f"{record['example_id']}-{record['rank']}"


def load_scores(path) -> Dict[str, float]:
    """JSON object ``{id: score}`` or two-column TSV ``id<TAB>score``."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return {str(k): float(v) for k, v in json.loads(text).items()}
    out = {}
    for row in csv.reader(text.splitlines(), delimiter="\t"):
        if row:
            out[row[0]] = float(row[1])
    return out


def rerank(records: Iterable[dict], scores: Mapping[str, float]) -> List[dict]:
    """Stable descending sort by external score within each example.

    Examples keep their first-seen order; each record gains
    ``original_rank`` and ``external_score`` and is renumbered.
    """
    records = list(records)
    missing = [hypothesis_id(r) for r in records if hypothesis_id(r) not in scores]
    if missing:
        raise RerankError(f"no external score for: {', '.join(missing)}")
    groups: Dict[str, List[dict]] = {}
    for r in records:
        groups.setdefault(r["example_id"], []).append(r)
    out = []
    for group in groups.values():
        ordered = sorted(group, key=lambda r: -scores[hypothesis_id(r)])
        for rank, r in enumerate(ordered):
            out.append({**r, "rank": rank, "original_rank": r["rank"],
                        "external_score": scores[hypothesis_id(r)]})
    return out


def rerank_hook(hypotheses_path, scores_path, out_path) -> int:
    with open(hypotheses_path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    ranked = rerank(records, load_scores(scores_path))
    with open(out_path, "w") as fh:
        for r in ranked:
            fh.write(json.dumps(r) + "\n")
    return len(ranked)
