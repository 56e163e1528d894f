"""Capacity-bounded open set, re-ranked every round by decay-adjusted score."""

from __future__ import annotations

from typing import List, Sequence, Set

import numpy as np

from .scoring import DecayParams, decay
from .types import UsageError

DEFAULT_CAPACITY = 500


class Frontier:
    """Unexpanded node ids with their stored model scores.

    Decay depends on the current round, so priorities are recomputed over the
    whole set at every ``pop_top_g``/``prune`` call instead of being kept in a
    heap. Ordering: the root sentinel first, then higher adjusted score, then
    newer discovery time, then lower node id.

    ``depth_weight`` adds ``weight * depth`` to every priority. It exists only
    for ablations and is off by default.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY, depth_weight: float = 0.0):
        if capacity < 1:
            raise UsageError("frontier capacity must be >= 1")
        self.capacity = capacity
        self.depth_weight = depth_weight
        self._members: Set[int] = set()
        self._n = 0
        size = 64
        self._ids = np.zeros(size, dtype=np.int64)
        self._scores = np.zeros(size)
        self._times = np.zeros(size, dtype=np.int64)
        self._depths = np.zeros(size, dtype=np.int64)
        self._sentinel = np.zeros(size, dtype=bool)

    def __len__(self) -> int:
        return self._n

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._members

    def ids(self) -> List[int]:
        return self._ids[: self._n].tolist()

    def _grow(self) -> None:
        size = 2 * len(self._ids)
        for name in ("_ids", "_scores", "_times", "_depths", "_sentinel"):
            old = getattr(self, name)
            new = np.zeros(size, dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def _insert(self, node_id: int, score: float, time: int, depth: int, sentinel: bool) -> None:
        if node_id in self._members:
            raise UsageError(f"node {node_id} already in frontier")
        if self._n == len(self._ids):
            self._grow()
        i = self._n
        self._ids[i] = node_id
        self._scores[i] = score
        self._times[i] = time
        self._depths[i] = depth
        self._sentinel[i] = sentinel
        self._members.add(node_id)
        self._n += 1

    def push(self, node_id: int, model_score: float, discovery_time: int, depth: int = 0) -> None:
        self._insert(node_id, model_score, discovery_time, depth, False)

    def push_many(self, node_ids: Sequence[int], scores: Sequence[float], times: Sequence[int], depths: Sequence[int]) -> None:
        """``push`` for many nodes with one array write per field."""
        m = len(node_ids)
        if not m:
            return
        ids = [int(i) for i in node_ids]
        if len(set(ids)) != m or not self._members.isdisjoint(ids):
            raise UsageError("node already in frontier")
        while self._n + m > len(self._ids):
            self._grow()
        lo, hi = self._n, self._n + m
        self._ids[lo:hi] = ids
        self._scores[lo:hi] = scores
        self._times[lo:hi] = times
        self._depths[lo:hi] = depths
        self._sentinel[lo:hi] = False
        self._members.update(ids)
        self._n = hi

    def push_root(self, node_id: int = 0) -> None:
        """Insert the root with a priority above every finite score."""
        self._insert(node_id, 0.0, -1, 0, True)

    def adjusted(self, now: int, params: DecayParams) -> np.ndarray:
        """Adjusted score of every entry, in slot order (sentinel slots hold 0)."""
        n = self._n
        adj = self._scores[:n].copy()
        if params.kappa > 0:
            age = now - self._times[:n]
            if n and age.min() < 0:
                raise UsageError("frontier holds a node discovered after `now`")
            ages, inv = np.unique(age, return_inverse=True)
            # scalar decay per distinct age keeps values identical to decay()
            table = np.array([decay(0, int(a), params) for a in ages])
            adj += table[inv]
        if self.depth_weight:
            adj += self.depth_weight * self._depths[:n]
        adj[self._sentinel[:n]] = 0.0
        return adj

    def _order(self, now: int, params: DecayParams, limit: int = 0) -> np.ndarray:
        """Slots in priority order; with ``limit`` only the first ``limit``."""
        n = self._n
        adj = self.adjusted(now, params)
        adj[self._sentinel[:n]] = np.inf
        slots = np.arange(n)
        if 0 < limit < n:
            # anything in the top ``limit`` scores at least the limit-th best value
            cut = np.partition(adj, n - limit)[n - limit]
            slots = np.flatnonzero(adj >= cut)
        # lexsort: last key is primary
        order = np.lexsort((self._ids[slots], -self._times[slots], -adj[slots]))
        out = slots[order]
        return out[:limit] if limit else out

    def _remove_slots(self, slots) -> None:
        if len(slots) > 8:
            self._compact(slots)
            return
        for s in sorted(int(x) for x in slots)[::-1]:
            last = self._n - 1
            self._members.discard(int(self._ids[s]))
            if s != last:
                for name in ("_ids", "_scores", "_times", "_depths", "_sentinel"):
                    arr = getattr(self, name)
                    arr[s] = arr[last]
            self._n = last

    def _compact(self, slots) -> None:
        n = self._n
        keep = np.ones(n, dtype=bool)
        slots = np.asarray(slots, dtype=np.int64)
        keep[slots] = False
        m = int(keep.sum())
        self._members.difference_update(self._ids[slots].tolist())
        for name in ("_ids", "_scores", "_times", "_depths", "_sentinel"):
            arr = getattr(self, name)
            arr[:m] = arr[:n][keep]
        self._n = m

    def pop_top_g(self, now: int, g: int, params: DecayParams) -> List[int]:
        if g < 1:
            raise UsageError("g must be >= 1")
        if not self._n:
            return []
        top = self._order(now, params, g)
        out = self._ids[top].tolist()
        self._remove_slots(top)
        return out

    def prune(self, now: int, params: DecayParams) -> int:
        excess = self._n - self.capacity
        if excess <= 0:
            return 0
        self._remove_slots(self._order(now, params)[self.capacity:])
        return excess
