"""The three global learners: full-batch greedy growth, the depth-capped
minibatch learner, and the variant whose stopping rule is a strand-based
size estimate.  All three share one engine; they differ only in batch
source, depth cap, and stopping rule.

Determinism contract: every split decision is a pure function of the inputs
plus the randomness tape.  Each leaf's minibatch is drawn once, from the
substream keyed by the leaf's path, and reused for scoring and completion.
(A literal per-iteration redraw would make the local learner's view of the
randomness diverge from the global one, because their iteration counters
differ; path-keyed draws are what keeps every variant's batches identical.)
Ties in the split argmax are broken by lexicographically smaller leaf path,
then smaller coordinate index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (STRAND_DOMAIN, LabeledDataset, LeafPath, Minibatch,
                   RandomnessTape, RunTrace, StrandTracker, consistent_indices,
                   draw_minibatch, path_coords)
from .impurity import ImpurityFunction, batch_local_gains, depth_cap
from .trees import Tree, tree_from_splits


@dataclass
class LeafRecord:
    """Cached scoring state of one leaf: its fixed minibatch, the best
    coordinate to split on, and that coordinate's estimated local gain.
    best_coord is None when the leaf is unsplittable (empty or pure batch,
    or no unused coordinate)."""

    path: LeafPath
    batch: Minibatch
    best_coord: Optional[int]
    best_local_gain: float

    @property
    def splittable(self) -> bool:
        return self.best_coord is not None

    @property
    def purity_gain(self) -> float:
        return math.ldexp(self.best_local_gain, -len(self.path))

    @property
    def priority(self) -> tuple:
        return (-self.purity_gain, self.path, self.best_coord)


def score_leaf(impurity: ImpurityFunction, batch: Minibatch, d: int):
    """(best coordinate, its estimated local gain) for a labeled batch, or
    (None, 0.0) when the leaf is unsplittable.  Negative estimated gains are
    legal winners; ties go to the smaller coordinate."""
    if batch.size == 0 or batch.labels is None:
        return None, 0.0
    ones = int(batch.labels.sum())
    if ones == 0 or ones == batch.size:
        return None, 0.0
    used = path_coords(batch.leaf_path)
    avail = np.array([i for i in range(d) if i not in used], dtype=np.int64)
    if len(avail) == 0:
        return None, 0.0
    gains = batch_local_gains(impurity, batch.masks, batch.labels, d)[avail]
    k = int(np.argmax(gains))
    return int(avail[k]), float(gains[k])


def completion_label(batch: Minibatch) -> int:
    """round(mean batch label), with round(1/2) = 1; empty batch -> 0."""
    if batch.size == 0 or batch.labels is None:
        return 0
    return 1 if 2 * int(batch.labels.sum()) >= batch.size else 0


class GrowthState:
    """Greedy growth over a labeled dataset.

    `leaves` maps every current leaf path to its record; `frontier` is the
    subset that is splittable and within the depth cap.  Cached scores never
    go stale because each leaf's batch is fixed at creation.
    """

    def __init__(self, dataset: LabeledDataset, impurity: ImpurityFunction,
                 tape: Optional[RandomnessTape], b: Optional[int],
                 depth_limit: Optional[int]):
        self.dataset = dataset
        self.impurity = impurity
        self.tape = tape
        self.b = b
        self.depth_limit = depth_limit
        self.splits: dict = {}
        self.leaves: dict = {}
        self.frontier: dict = {}
        self.trace = RunTrace(depth_cap=depth_limit)
        self._spawn(())

    @property
    def size(self) -> int:
        return len(self.splits) + 1

    def _make_batch(self, path: LeafPath) -> Minibatch:
        if self.b is None:
            idx = consistent_indices(self.dataset.masks, path)
            return Minibatch(path, idx, self.dataset.masks[idx], self.dataset.labels[idx])
        return draw_minibatch(self.dataset, path, self.b, self.tape)

    def _spawn(self, path: LeafPath) -> None:
        batch = self._make_batch(path)
        coord, gain = score_leaf(self.impurity, batch, self.dataset.d)
        rec = LeafRecord(path, batch, coord, gain)
        self.leaves[path] = rec
        if rec.splittable and (self.depth_limit is None or len(path) <= self.depth_limit):
            self.frontier[path] = rec

    def best(self) -> Optional[LeafRecord]:
        if not self.frontier:
            return None
        return min(self.frontier.values(), key=lambda r: r.priority)

    def apply(self, rec: LeafRecord) -> None:
        coord = rec.best_coord
        del self.frontier[rec.path]
        del self.leaves[rec.path]
        self.splits[rec.path] = coord
        self._spawn(rec.path + ((coord, -1),))
        self._spawn(rec.path + ((coord, 1),))

    def complete(self) -> Tree:
        labels = {p: completion_label(r.batch) for p, r in self.leaves.items()}
        return tree_from_splits(self.dataset.d, self.splits, labels)


@dataclass
class TrainResult:
    tree: Tree
    trace: RunTrace
    growth: GrowthState
    size_estimate: Optional[float] = None

    @property
    def size(self) -> int:
        return self.tree.size


def top_down_full(t: int, dataset: LabeledDataset,
                  impurity: ImpurityFunction) -> TrainResult:
    """Reference greedy learner: gains from the whole dataset, no depth cap,
    grow until size t or no splittable leaf remains."""
    if t < 1:
        raise ValueError(f"tree size target must be >= 1, got {t}")
    if dataset.n == 0:
        raise ValueError("full-batch learner needs a non-empty dataset")
    g = GrowthState(dataset, impurity, tape=None, b=None, depth_limit=None)
    while g.size < t:
        rec = g.best()
        if rec is None:
            break
        g.apply(rec)
        g.trace.append(rec.path, rec.best_coord, rec.purity_gain, float(g.size))
    return TrainResult(g.complete(), g.trace, g)


def minibatch_top_down(t: int, b: int, dataset: LabeledDataset,
                       impurity: ImpurityFunction,
                       tape: RandomnessTape) -> TrainResult:
    """Minibatch learner: scores each leaf from its path-keyed minibatch,
    never splits below the depth cap, stops at exactly size t (or earlier if
    no splittable leaf of legal depth remains).  t < 2 degenerates to the
    size-1 completion; an empty dataset yields a single leaf labeled 0."""
    t = max(int(t), 1)
    limit = depth_cap(t) if t >= 2 else 0
    g = GrowthState(dataset, impurity, tape=tape, b=b, depth_limit=limit)
    while g.size < t:
        rec = g.best()
        if rec is None:
            break
        g.apply(rec)
        g.trace.append(rec.path, rec.best_coord, rec.purity_gain, float(g.size))
    return TrainResult(g.complete(), g.trace, g)


def top_down_size_estimate(t: int, b: int, dataset: LabeledDataset,
                           impurity: ImpurityFunction, tape: RandomnessTape,
                           strand_masks: Optional[np.ndarray] = None) -> TrainResult:
    """Like minibatch_top_down, but the loop runs while a strand-based size
    estimate stays below t: b uniform cube points are drawn up front (tape
    key 'strands'), and after every split the estimate is the mean over them
    of 2^{leaf depth}.  The final exact size t' is len(trace) + 1.

    strand_masks overrides the strand draw (diagnostics: passing the whole
    cube makes the estimate exact, so the loop stops at size t exactly)."""
    t = max(int(t), 1)
    limit = depth_cap(t) if t >= 2 else 0
    g = GrowthState(dataset, impurity, tape=tape, b=b, depth_limit=limit)
    if strand_masks is None:
        strand_masks = tape.uniform_masks(dataset.d, b, STRAND_DOMAIN)
    tracker = StrandTracker(strand_masks)
    e = tracker.size_estimate()
    while e < t:
        rec = g.best()
        if rec is None:
            break
        g.apply(rec)
        tracker.advance(rec.path, rec.best_coord)
        e = tracker.size_estimate()
        g.trace.append(rec.path, rec.best_coord, rec.purity_gain, e)
    return TrainResult(g.complete(), g.trace, g, size_estimate=e)
