"""Active local learner: computes the label the global size-estimate learner
would assign to a point, while materializing only the strands of the
would-be tree and labeling polylogarithmically many training points.

Each iteration scores only the leaves currently holding a strand point (or
the query point) and splits their argmax.  Leaves off the strands never
influence the size estimate or any strand leaf's batch, so skipping them
reproduces the global run restricted to the strands; the equivalence test
suite is the guardrail for this argument.
"""

from __future__ import annotations

from typing import List, Sequence, Union

import numpy as np

from .core import (STRAND_DOMAIN, LabelOracle, LeafPath, Point, RandomnessTape,
                   StrandTracker, UnlabeledDataset, draw_minibatch, sign_bit)
from .impurity import ImpurityFunction, depth_cap
from .learners import LeafRecord, completion_label, score_leaf
from .trees import Tree, leaf_depths


def estimate_size(tree: Tree, strand_points: Sequence) -> float:
    """Mean of 2^{leaf depth} over the sample points (duplicates counted);
    unbiased for the leaf count.  Accepts Points or packed masks."""
    if len(strand_points) == 0:
        raise ValueError("size estimate over an empty strand set")
    if isinstance(strand_points, np.ndarray):
        masks = strand_points.astype(np.uint64)
    else:
        masks = np.array([p.mask if isinstance(p, Point) else int(p)
                          for p in strand_points], dtype=np.uint64)
    depths = leaf_depths(tree, masks)
    counts = np.bincount(depths)
    total = sum(int(c) << dep for dep, c in enumerate(counts))
    return total / len(strand_points)


class LocalLearnerSession:
    """Shared-randomness local learner, reusable across many query points.

    Batches, scores, and revealed labels are cached per leaf path, so the
    strand forest is grown once: a later query point only extends its own
    strand and reads cached split decisions.
    """

    def __init__(self, t: int, b: int, dataset: UnlabeledDataset,
                 oracle: LabelOracle, impurity: ImpurityFunction,
                 tape: RandomnessTape):
        if b < 1:
            raise ValueError(f"batch size must be >= 1, got {b}")
        self.t = max(int(t), 1)
        self.b = b
        self.dataset = dataset
        self.oracle = oracle
        self.impurity = impurity
        self.tape = tape
        self.depth_limit = depth_cap(self.t) if self.t >= 2 else 0
        self.strand_masks = tape.uniform_masks(dataset.d, b, STRAND_DOMAIN)
        self._records: dict = {}
        self.split_choices: dict = {}
        self.last_trace: List[tuple] = []

    def _record(self, path: LeafPath) -> LeafRecord:
        rec = self._records.get(path)
        if rec is None:
            raw = draw_minibatch(self.dataset, path, self.b, self.tape)
            batch = self.oracle.reveal_batch(raw)
            coord, gain = score_leaf(self.impurity, batch, self.dataset.d)
            rec = LeafRecord(path, batch, coord, gain)
            self._records[path] = rec
        return rec

    def predict(self, x: Union[Point, int]) -> int:
        """Label of the query point under the would-be global tree."""
        if isinstance(x, Point):
            if x.d != self.dataset.d:
                raise ValueError(f"point dimension {x.d} != dataset dimension "
                                 f"{self.dataset.d}")
            x_mask = x.mask
        else:
            x_mask = int(x)
        tracker = StrandTracker(self.strand_masks)
        x_path: LeafPath = ()
        e = tracker.size_estimate()
        trace: List[tuple] = []
        while e < self.t:
            pool = tracker.distinct_paths()
            pool.add(x_path)
            candidates = [
                rec for p in pool if len(p) <= self.depth_limit
                for rec in (self._record(p),) if rec.splittable
            ]
            if not candidates:
                break
            best = min(candidates, key=lambda r: r.priority)
            coord = best.best_coord
            self.split_choices[best.path] = coord
            tracker.advance(best.path, coord)
            if x_path == best.path:
                x_path = x_path + ((coord, sign_bit(x_mask, coord)),)
            e = tracker.size_estimate()
            trace.append((best.path, coord, e))
        self.last_trace = trace
        final = self._record(x_path)
        return completion_label(final.batch)


def local_learner(t: int, b: int, dataset: UnlabeledDataset, oracle: LabelOracle,
                  x: Union[Point, int], impurity: ImpurityFunction,
                  tape: RandomnessTape) -> int:
    """One-shot local prediction.  Under a shared tape this equals evaluating
    the tree built by the global size-estimate learner at x, for every x."""
    return LocalLearnerSession(t, b, dataset, oracle, impurity, tape).predict(x)
