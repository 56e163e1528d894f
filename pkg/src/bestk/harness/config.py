"""Experiment descriptors and their loading from YAML/JSON files."""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from ..types import UsageError

STRATEGIES = ("bestk", "bfs", "beam", "dbs", "sample", "beam-sample")
MODEL_KINDS = ("trie", "ngram", "remote", "deep-goal")
SWEEP_AXES = ("kappa", "k", "alpha", "beam_size")


@dataclass(frozen=True)
class StrategySpec:
    name: str = "bestk"
    k: int = 5
    score: str = "mean"
    kappa: float = 0.0
    beta: float = 0.5
    gamma: float = 0.05
    child_cap: Optional[int] = None
    frontier_capacity: int = 500
    groups: int = 1
    diversity_penalty: float = 0.0
    sampling: Optional[str] = None
    sampling_value: float = 0.9
    beam_size: Optional[int] = None  # overrides the experiment's equivalent beam size
    label: Optional[str] = None

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.name!r}; choose from {STRATEGIES}")
        if self.name in ("sample", "beam-sample") and self.sampling is None:
            object.__setattr__(self, "sampling", "nucleus")

    def describe(self) -> str:
        if self.label:
            return self.label
        score = self.score.replace(":", "")
        if self.name in ("bestk", "bfs"):
            out = f"{self.name}-k{self.k}-{score}-kappa{self.kappa:g}"
        elif self.name == "dbs":
            out = f"dbs-g{self.groups}-lam{self.diversity_penalty:g}"
        elif self.name in ("sample", "beam-sample"):
            out = f"{self.name}-{self.sampling}{self.sampling_value:g}"
        else:
            out = f"beam-{score}"
        return out if self.beam_size is None else f"{out}-b{self.beam_size}"


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "trie"
    path: Optional[str] = None
    order: int = 3
    add_k: float = 0.01
    floor: float = 0.0
    endpoint: Optional[str] = None
    timeout: float = 10.0
    max_batch_size: int = 64
    count: int = 200
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        if self.kind in ("trie", "ngram") and not self.path:
            raise UsageError(f"model kind {self.kind!r} needs a path")
        if self.kind == "remote" and not self.endpoint:
            raise UsageError("remote model needs an endpoint")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one ``bench``/``sweep`` run needs; sweep axes multiply the
    strategies (``kappa`` and ``k`` apply to best-first variants, ``alpha``
    to every strategy with a score mode, ``beam_size`` to all)."""

    model: ModelSpec = field(default_factory=ModelSpec)
    strategies: List[StrategySpec] = field(default_factory=lambda: [StrategySpec()])
    beam_size: int = 10
    max_len: int = 20
    corpus: Optional[str] = None
    sweep: Dict[str, List[float]] = field(default_factory=dict)
    output_dir: str = "runs/out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.strategies:
            raise UsageError("at least one strategy is required")
        for axis, grid in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise UsageError(f"unknown sweep axis {axis!r}")
            if not grid:
                raise UsageError(f"sweep axis {axis!r} is empty")
        if self.beam_size < 1 or self.max_len < 1:
            raise UsageError("beam_size and max_len must be >= 1")
        if self.model.kind != "deep-goal" and not self.corpus:
            raise UsageError("a corpus is required unless the model is generated")

    def points(self) -> List[StrategySpec]:
        out = []
        for strat in self.strategies:
            axes = []
            if strat.name in ("bestk", "bfs") and "kappa" in self.sweep:
                axes.append(("kappa", self.sweep["kappa"]))
            if strat.name == "bestk" and "k" in self.sweep:
                axes.append(("k", [int(v) for v in self.sweep["k"]]))
            if strat.name not in ("sample",) and "alpha" in self.sweep:
                axes.append(("alpha", self.sweep["alpha"]))
            if "beam_size" in self.sweep:
                axes.append(("beam_size", [int(v) for v in self.sweep["beam_size"]]))
            names = [a for a, _ in axes]
            for combo in itertools.product(*(g for _, g in axes)):
                changes = dict(zip(names, combo))
                if "alpha" in changes:
                    changes["score"] = f"length:{changes.pop('alpha'):g}"
                if changes and strat.label:
                    changes["label"] = None
                out.append(dataclasses.replace(strat, **changes))
        labels = [p.describe() for p in out]
        if len(set(labels)) != len(labels):
            raise UsageError("sweep produces duplicate point labels; give strategies distinct labels")
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def config_from_dict(doc: Dict[str, Any]) -> ExperimentConfig:
    doc = dict(doc)
    model = ModelSpec(**doc.pop("model", {}))
    strategies = [StrategySpec(**s) for s in doc.pop("strategies", [{}])]
    unknown = set(doc) - {f.name for f in dataclasses.fields(ExperimentConfig)}
    if unknown:
        raise UsageError(f"unknown config fields {sorted(unknown)}")
    return ExperimentConfig(model=model, strategies=strategies, **doc)


def load_config_file(path) -> Dict[str, Any]:
    text = Path(path).read_text()
    doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a mapping")
    return doc


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; ``override`` wins."""
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = val
    return out
