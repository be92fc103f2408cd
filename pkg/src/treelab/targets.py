"""Synthetic target functions over the sign cube, dataset generation, and
exact error computation by enumeration.

Target spec mini-grammar (1-based coordinates, used by the CLI):
`dictator:3`, `majority`, `tribes:4`, `dnf:1|2&3|4&5&6`, `tree:<file>`,
`xor:1,2`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Tuple

import numpy as np

from .core import DATA_DOMAIN, LabeledDataset, Point, RandomnessTape
from .impurity import _check_exhaustive
from .trees import Tree, evaluate_masks, parse_tree, random_partial_tree, relabel


def _popcount(masks: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(masks).astype(np.int64)
    out = np.zeros(len(masks), dtype=np.int64)
    work = masks.copy()
    while np.any(work):
        out += (work & np.uint64(1)).astype(np.int64)
        work >>= np.uint64(1)
    return out


class TargetFunction:
    """Boolean function {-1,+1}^d -> {0,1}, evaluable on packed masks."""

    d: int

    def eval_masks(self, masks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: Point) -> int:
        if x.d != self.d:
            raise ValueError(f"point dimension {x.d} != target dimension {self.d}")
        return int(self.eval_masks(np.array([x.mask], dtype=np.uint64))[0])


@dataclass
class Dictator(TargetFunction):
    """f(x) = 1 iff x_i = +1."""

    d: int
    i: int

    def __post_init__(self):
        if not 0 <= self.i < self.d:
            raise ValueError(f"dictator coordinate {self.i} out of range")

    def eval_masks(self, masks):
        return ((np.asarray(masks, np.uint64) >> np.uint64(self.i)) & np.uint64(1)).astype(np.uint8)


@dataclass
class Majority(TargetFunction):
    """f(x) = 1 iff strictly more than d/2 coordinates are +1."""

    d: int

    def eval_masks(self, masks):
        return (_popcount(np.asarray(masks, np.uint64)) * 2 > self.d).astype(np.uint8)


@dataclass
class Tribes(TargetFunction):
    """OR of ANDs over consecutive blocks of width w (last block may be short)."""

    d: int
    w: int

    def __post_init__(self):
        if not 1 <= self.w <= self.d:
            raise ValueError(f"tribe width {self.w} out of range")
        self._blocks = []
        for start in range(0, self.d, self.w):
            bm = 0
            for i in range(start, min(start + self.w, self.d)):
                bm |= 1 << i
            self._blocks.append(np.uint64(bm))

    def eval_masks(self, masks):
        masks = np.asarray(masks, np.uint64)
        hit = np.zeros(len(masks), dtype=bool)
        for bm in self._blocks:
            hit |= (masks & bm) == bm
        return hit.astype(np.uint8)


@dataclass
class ReadOnceDNF(TargetFunction):
    """Monotone read-once DNF: OR of ANDs over disjoint coordinate sets."""

    d: int
    terms: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        self.terms = tuple(frozenset(t) for t in self.terms)
        seen: set = set()
        for t in self.terms:
            if not t:
                raise ValueError("empty DNF term")
            if any(not 0 <= i < self.d for i in t):
                raise ValueError("DNF coordinate out of range")
            if seen & t:
                raise ValueError("read-once DNF terms must be disjoint")
            seen |= t
        self._term_masks = [np.uint64(sum(1 << i for i in t)) for t in self.terms]

    def eval_masks(self, masks):
        masks = np.asarray(masks, np.uint64)
        hit = np.zeros(len(masks), dtype=bool)
        for tm in self._term_masks:
            hit |= (masks & tm) == tm
        return hit.astype(np.uint8)


@dataclass
class Xor(TargetFunction):
    """Parity: f(x) = 1 iff an odd number of the selected coordinates are +1.
    Deliberately non-monotone."""

    d: int
    coords: FrozenSet[int]

    def __post_init__(self):
        self.coords = frozenset(self.coords)
        if not self.coords or any(not 0 <= i < self.d for i in self.coords):
            raise ValueError("xor needs a non-empty in-range coordinate set")
        self._sel = np.uint64(sum(1 << i for i in self.coords))

    def eval_masks(self, masks):
        masks = np.asarray(masks, np.uint64)
        return (_popcount(masks & self._sel) & 1).astype(np.uint8)


@dataclass
class ExplicitTree(TargetFunction):
    """A complete decision tree used as the target itself."""

    tree: Tree

    def __post_init__(self):
        if not self.tree.is_complete():
            raise ValueError("explicit-tree target needs labeled leaves")
        self.d = self.tree.d

    def eval_masks(self, masks):
        return evaluate_masks(self.tree, masks)


@dataclass
class TruthTable(TargetFunction):
    """Arbitrary function given by its 2^d-entry value table (mask-indexed)."""

    d: int
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.uint8)
        if len(self.table) != (1 << self.d):
            raise ValueError(f"table must have 2^{self.d} entries")

    def eval_masks(self, masks):
        return self.table[np.asarray(masks, np.int64)]


def eval_target(target: TargetFunction, x: Point) -> int:
    return target(x)


# ---------------------------------------------------------------------------
# Monotonicity and error, by enumeration
# ---------------------------------------------------------------------------


def is_monotone(target: TargetFunction) -> bool:
    """True iff every coordinate is non-decreasing or non-increasing, checked
    over all 2^{d-1} neighbor pairs per coordinate."""
    _check_exhaustive(target.d)
    d = target.d
    f = target.eval_masks(np.arange(1 << d, dtype=np.uint64)).astype(np.int8)
    idx = np.arange(1 << d, dtype=np.int64)
    for i in range(d):
        low = idx[(idx >> i) & 1 == 0]
        diff = f[low + (1 << i)] - f[low]
        if np.any(diff > 0) and np.any(diff < 0):
            return False
    return True


def exact_error(target: TargetFunction, tree: Tree) -> float:
    """Exact disagreement probability under the uniform distribution."""
    if tree.d != target.d:
        raise ValueError(f"tree dimension {tree.d} != target dimension {target.d}")
    _check_exhaustive(target.d)
    masks = np.arange(1 << target.d, dtype=np.uint64)
    return float(np.mean(target.eval_masks(masks) != evaluate_masks(tree, masks)))


def monte_carlo_error(target: TargetFunction, tree: Tree, samples: int,
                      tape: RandomnessTape, key: str = "mc-error") -> float:
    """Sampled disagreement frequency; companion to exact_error for d > 20."""
    if tree.d != target.d:
        raise ValueError(f"tree dimension {tree.d} != target dimension {target.d}")
    masks = tape.uniform_masks(target.d, samples, "monte-carlo", key)
    return float(np.mean(target.eval_masks(masks) != evaluate_masks(tree, masks)))


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def sample_dataset(target: TargetFunction, n: int, tape: RandomnessTape,
                   key: str = "train") -> LabeledDataset:
    """n i.i.d. uniform points labeled by the target, deterministic under the
    tape key."""
    masks = tape.uniform_masks(target.d, n, DATA_DOMAIN, key)
    return LabeledDataset(target.d, masks, target.eval_masks(masks))


def sample_product_masks(bias: np.ndarray, n: int, tape: RandomnessTape,
                         key: str = "biased") -> np.ndarray:
    """n packed points with independent coordinates, P[x_i = +1] = bias[i].
    Used to build non-uniform test sets."""
    bias = np.asarray(bias, dtype=np.float64)
    d = len(bias)
    rng = tape.substream("product-dist", key)
    bits = (rng.random((n, d)) < bias).astype(np.uint64)
    return (bits << np.arange(d, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


# ---------------------------------------------------------------------------
# Random targets
# ---------------------------------------------------------------------------


def random_monotone_tree_target(rng: np.random.Generator, d: int,
                                n_leaves: int = 8, max_depth: int = 4,
                                min_balance: float = 0.125,
                                max_tries: int = 200) -> ExplicitTree:
    """Random explicit-tree target that is monotone by construction rule and
    verified exhaustively.

    Leaves are labeled 1 iff the path fixes at least `theta` coordinates to
    +1, for a per-tree random threshold theta.  That rule can still produce a
    non-monotone function on lopsided shapes, so candidates failing the
    exhaustive monotonicity check are rejected and regrown.  Candidates with
    mean value within min_balance of constant are rejected too, so learner
    tests do not degenerate into single-leaf runs.
    """
    _check_exhaustive(d)
    masks = np.arange(1 << d, dtype=np.uint64)
    for _ in range(max_tries):
        skeleton = random_partial_tree(rng, d, n_leaves, max_depth)
        theta = int(rng.integers(1, max_depth + 1))
        labeled = relabel(
            skeleton,
            lambda path: 1 if sum(1 for _, s in path if s == 1) >= theta else 0,
        )
        candidate = ExplicitTree(labeled)
        mean = float(candidate.eval_masks(masks).mean())
        if min(mean, 1.0 - mean) < min_balance:
            continue
        if is_monotone(candidate):
            return candidate
    raise RuntimeError(f"no monotone tree target found in {max_tries} tries")


def random_truth_table(rng: np.random.Generator, d: int) -> TruthTable:
    _check_exhaustive(d)
    return TruthTable(d, rng.integers(0, 2, size=1 << d).astype(np.uint8))


# ---------------------------------------------------------------------------
# Spec grammar
# ---------------------------------------------------------------------------


def parse_target(spec: str, d: int, tree_loader=None) -> TargetFunction:
    """Build a target from its grammar string.  `tree_loader` maps a file
    path to its text (defaults to reading the filesystem)."""
    kind, _, arg = spec.partition(":")
    if kind == "dictator":
        return Dictator(d, int(arg) - 1)
    if kind == "majority":
        if arg:
            raise ValueError("majority takes no argument")
        return Majority(d)
    if kind == "tribes":
        return Tribes(d, int(arg))
    if kind == "dnf":
        terms = []
        for term in arg.split("|"):
            coords = frozenset(int(c) - 1 for c in term.split("&"))
            terms.append(coords)
        return ReadOnceDNF(d, tuple(terms))
    if kind == "tree":
        if tree_loader is None:
            with open(arg, "r", encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = tree_loader(arg)
        return ExplicitTree(parse_tree(text, d))
    if kind == "xor":
        return Xor(d, frozenset(int(c) - 1 for c in arg.split(",")))
    raise ValueError(f"unknown target spec {spec!r}")
