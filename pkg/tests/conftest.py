import numpy as np
import pytest

from treelab.core import LabeledDataset, RandomnessTape
from treelab.targets import ReadOnceDNF, random_monotone_tree_target


@pytest.fixture
def tape():
    return RandomnessTape(12345)


@pytest.fixture
def three_term_dnf():
    """x1 or (x2 and x3) or (x4 and x5 and x6) over d=10."""
    return ReadOnceDNF(10, (frozenset({0}), frozenset({1, 2}),
                            frozenset({3, 4, 5})))


def full_truth_table_dataset(target) -> LabeledDataset:
    masks = np.arange(1 << target.d, dtype=np.uint64)
    return LabeledDataset(target.d, masks, target.eval_masks(masks))


def monotone_target(seed: int, d: int, n_leaves: int = 24, max_depth: int = 8):
    rng = np.random.default_rng(seed)
    return random_monotone_tree_target(rng, d=d, n_leaves=n_leaves,
                                       max_depth=max_depth)
