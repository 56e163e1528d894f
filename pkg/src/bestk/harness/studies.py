"""Desk-scale studies of completion, budget and batching behaviour.

Each study takes a list of models and returns plain dicts, so the numbers
can be asserted in tests or dumped as CSV.
"""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Dict, List, Sequence

from ..engine import DecodeConfig, bestk_decode, bfs_decode
from ..models import SequenceModel
from ..scoring import KAPPA_GRID, DecayParams, ScoreMode
from .fixtures import DeepGoalParams

# Population that makes the decay and scoring effects visible at b=10, max_len=12.
DEEP_GOAL = DeepGoalParams(branch=6, concentration=2.0, goal_min=5, goal_max=10)
# Population for the budget study: flatter branching, earlier goals.
INCOMPLETION = DeepGoalParams()
STUDY_MAX_LEN = 12
STUDY_BEAM = 10
STUDY_K = 5


def completion_rate(models: Sequence[SequenceModel], config: DecodeConfig, k_one_bfs: bool = False) -> float:
    done = 0
    for m in models:
        res = bfs_decode(m, config) if k_one_bfs else bestk_decode(m, config)
        done += not res.incomplete
    return done / len(models)


def decay_study(
    models: Sequence[SequenceModel],
    mode: ScoreMode = ScoreMode.length(0.5),
    kappas: Sequence[float] = KAPPA_GRID,
    k: int = STUDY_K,
    beam_size: int = STUDY_BEAM,
    max_len: int = STUDY_MAX_LEN,
) -> Dict[float, float]:
    """Completion rate of best-k per decay weight."""
    base = DecodeConfig.for_beam_size(beam_size, max_len, k=k, score_mode=mode)
    return {kap: completion_rate(models, replace(base, decay=DecayParams(kap))) for kap in kappas}


def scoring_study(
    models: Sequence[SequenceModel],
    modes: Sequence[ScoreMode] = (ScoreMode.original(), ScoreMode.length(0.5), ScoreMode.mean(), ScoreMode.last()),
    kappas: Sequence[float] = KAPPA_GRID,
    **kw,
) -> Dict[str, float]:
    """Best completion rate each scoring mode reaches over the decay grid."""
    return {str(m): max(decay_study(models, m, kappas, **kw).values()) for m in modes}


def budget_study(
    models: Sequence[SequenceModel],
    beam_sizes: Sequence[int] = (1, 2, 5, 10),
    max_len: int = STUDY_MAX_LEN,
    child_cap: int = STUDY_K,
) -> Dict[int, float]:
    """Incompletion rate of plain best-first search (Original scoring, no decay)."""
    out = {}
    for b in beam_sizes:
        cfg = DecodeConfig.for_beam_size(b, max_len, k=1, child_cap=child_cap, score_mode=ScoreMode.original())
        out[b] = 1.0 - completion_rate(models, cfg, k_one_bfs=True)
    return out


def batch_study(
    models: Sequence[SequenceModel],
    ks: Sequence[int] = (1, 5, 10),
    budget: int = 200,
    max_len: int = 20,
    child_cap: int = 5,
    repeats: int = 1,
) -> List[dict]:
    """Batch calls, rounds and decode wall time per group size at equal budget.

    ``child_cap`` is fixed so every k explores the same kind of tree.
    """
    rows = []
    for k in ks:
        cfg = DecodeConfig(k=k, budget=budget, max_len=max_len, child_cap=child_cap)
        calls = explored = 0
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            results = [bestk_decode(m, cfg) for m in models]
            best = min(best, time.perf_counter() - start)
        for r in results:
            calls = max(calls, r.model_batch_calls)
            explored += r.explored_count
        rows.append({"k": k, "budget": budget, "max_batch_calls": calls,
                     "mean_explored": explored / len(models), "wall_time": best})
    return rows
