"""Learnability estimator: the error, against a labeled test set, of the
tree the global learner would build -- measured without ever building it,
by running the local learner per test point with one shared tape, one
caching label oracle, and one shared strand forest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

from .core import LabeledDataset, LabelOracle, RandomnessTape, UnlabeledDataset
from .impurity import ImpurityFunction, depth_cap
from .local import LocalLearnerSession


class BudgetError(RuntimeError):
    """Measured label usage exceeded the proven budget."""


@dataclass(frozen=True)
class EstimateReport:
    error: float
    n_test: int
    unique_labels: int
    batches_drawn: int
    phase_counts: Dict[str, int]


@dataclass(frozen=True)
class BudgetReport:
    unique_labels: int
    batches_drawn: int
    bound: int
    phase_counts: Dict[str, int]


def estimate_learnability(t: int, b: int, dataset: UnlabeledDataset,
                          oracle: LabelOracle, test_set: LabeledDataset,
                          impurity: ImpurityFunction,
                          tape: RandomnessTape) -> EstimateReport:
    """Fraction of test points whose test label disagrees with the local
    learner's prediction.

    All per-point runs share the tape, the oracle's label cache, and the
    session's strand forest, so the result equals the error of the single
    global tree grown under the same tape, and the first point pays for the
    shared forest while later points only extend their own strand.
    """
    if test_set.n == 0:
        raise ValueError("test set must be non-empty")
    if test_set.d != dataset.d:
        raise ValueError(f"test dimension {test_set.d} != training dimension "
                         f"{dataset.d}")
    session = LocalLearnerSession(t, b, dataset, oracle, impurity, tape)
    wrong = 0
    for k in range(test_set.n):
        oracle.set_phase("strand-forest" if k == 0 else "test-points")
        pred = session.predict(int(test_set.masks[k]))
        wrong += int(pred != int(test_set.labels[k]))
    return EstimateReport(
        error=wrong / test_set.n,
        n_test=test_set.n,
        unique_labels=oracle.query_count,
        batches_drawn=oracle.batches_drawn,
        phase_counts=dict(oracle.phase_counts),
    )


def query_budget_report(oracle: LabelOracle, t: int, b: int, n_test: int) -> BudgetReport:
    """Measured label counts after an estimate run, checked against the
    budget (b + n_test) * (D+1) * b + b for unique labels."""
    limit = depth_cap(t) if t >= 2 else 0
    bound = (b + n_test) * (limit + 1) * b + b
    if oracle.query_count > bound:
        raise BudgetError(f"unique labels {oracle.query_count} exceed budget {bound}")
    return BudgetReport(
        unique_labels=oracle.query_count,
        batches_drawn=oracle.batches_drawn,
        bound=bound,
        phase_counts=dict(oracle.phase_counts),
    )
