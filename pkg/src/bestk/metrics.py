"""Diversity and overlap metrics for sets of generated sequences.

Text is tokenized by lowercasing and splitting on whitespace. Ratios are in
[0, 1]; multiply by 100 for table-style reporting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Optional, Sequence, Union

TextLike = Union[str, Sequence[str]]

TOKENIZATION = "lowercase+whitespace"


def tokenize(text: TextLike) -> List[str]:
    if isinstance(text, str):
        return text.lower().split()
    return [t.lower() for t in text]


def _ngrams(tokens: Sequence[str], n: int) -> List[tuple]:
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(outputs: Sequence[TextLike], n: int) -> float:
    """Unique n-grams across all outputs divided by total word count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seqs = [tokenize(o) for o in outputs]
    words = sum(len(s) for s in seqs)
    if not words:
        return 0.0
    unique = {g for s in seqs for g in _ngrams(s, n)}
    return len(unique) / words


def _f1(overlap: float, cand_len: int, ref_len: int) -> float:
    if overlap == 0 or cand_len == 0 or ref_len == 0:
        return 0.0
    p = overlap / cand_len
    r = overlap / ref_len
    return 2 * p * r / (p + r)


def rouge_n(candidate: TextLike, references: Sequence[TextLike], n: int) -> float:
    """Clipped n-gram overlap F1; with several references, the best one."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not references:
        raise ValueError("at least one reference is required")
    cand = Counter(_ngrams(tokenize(candidate), n))
    if not cand:
        return 0.0
    best = 0.0
    for ref in references:
        ref_counts = Counter(_ngrams(tokenize(ref), n))
        overlap = sum((cand & ref_counts).values())
        best = max(best, _f1(overlap, sum(cand.values()), sum(ref_counts.values())))
    return best


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: TextLike, references: Sequence[TextLike]) -> float:
    if not references:
        raise ValueError("at least one reference is required")
    cand = tokenize(candidate)
    if not cand:
        return 0.0
    best = 0.0
    for ref in references:
        r = tokenize(ref)
        best = max(best, _f1(lcs_length(cand, r), len(cand), len(r)))
    return best


ROUGE_KEYS = ("R1", "R2", "RL")


def rouge_all(candidate: TextLike, references: Sequence[TextLike]) -> Dict[str, float]:
    return {
        "R1": rouge_n(candidate, references, 1),
        "R2": rouge_n(candidate, references, 2),
        "RL": rouge_l(candidate, references),
    }


@dataclass
class ExampleOutputs:
    """One example's generated texts, references and run facts."""

    outputs: List[TextLike]
    references: List[TextLike] = field(default_factory=list)
    completed: bool = True
    wall_time: float = 0.0


@dataclass
class MetricsReport:
    S: float = 0.0
    unique_S: float = 0.0
    distinct: Dict[int, float] = field(default_factory=dict)
    rouge_oracle: Dict[str, float] = field(default_factory=dict)
    rouge_mean: Dict[str, float] = field(default_factory=dict)
    rouge_top: Dict[str, float] = field(default_factory=dict)
    completion_rate: float = 0.0
    wall_time: float = 0.0
    examples: int = 0
    tokenization: str = TOKENIZATION


def aggregate(examples: Sequence[ExampleOutputs], orders=(1, 2, 3)) -> MetricsReport:
    """Dataset-level report.

    Oracle ROUGE takes each example's best output, mean ROUGE averages over
    its outputs, top ROUGE scores only the first (best-ranked) output; all
    are then averaged over examples. Distinct-n is
    computed per example. S and |S| are per-example averages.
    """
    report = MetricsReport(examples=len(examples))
    if not examples:
        report.distinct = {n: 0.0 for n in orders}
        report.rouge_oracle = dict.fromkeys(ROUGE_KEYS, 0.0)
        report.rouge_mean = dict.fromkeys(ROUGE_KEYS, 0.0)
        report.rouge_top = dict.fromkeys(ROUGE_KEYS, 0.0)
        return report
    report.S = fmean(len(e.outputs) for e in examples)
    report.unique_S = fmean(len({tuple(tokenize(o)) for o in e.outputs}) for e in examples)
    report.distinct = {n: fmean(distinct_n(e.outputs, n) for e in examples) for n in orders}
    oracle: Dict[str, List[float]] = {k: [] for k in ROUGE_KEYS}
    mean: Dict[str, List[float]] = {k: [] for k in ROUGE_KEYS}
    top: Dict[str, List[float]] = {k: [] for k in ROUGE_KEYS}
    for e in examples:
        scored = [rouge_all(o, e.references) for o in e.outputs] if e.references else []
        for k in ROUGE_KEYS:
            vals = [s[k] for s in scored]
            oracle[k].append(max(vals) if vals else 0.0)
            mean[k].append(fmean(vals) if vals else 0.0)
            top[k].append(vals[0] if vals else 0.0)
    report.rouge_oracle = {k: fmean(v) for k, v in oracle.items()}
    report.rouge_mean = {k: fmean(v) for k, v in mean.items()}
    report.rouge_top = {k: fmean(v) for k, v in top.items()}
    report.completion_rate = fmean(1.0 if e.completed else 0.0 for e in examples)
    report.wall_time = fmean(e.wall_time for e in examples)
    return report


def percent(x: Optional[float]) -> float:
    return 100.0 * (x or 0.0)
