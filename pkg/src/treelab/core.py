"""Shared domain types: sign-cube points, datasets, deterministic randomness
substreams, leaf-conditioned minibatches, the metered label oracle, and run
traces.

Points over {-1,+1}^d are stored as packed bit masks (bit i set means
coordinate i is +1) so that exhaustive enumeration at d <= 20 stays cheap.
Coordinates are 0-based in memory; all text formats are 1-based.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import IO, Iterator, Optional, Sequence, Union

import numpy as np

MAX_DIM = 63

# A leaf is identified by its root-to-leaf path: ordered (coordinate, sign)
# pairs with sign in {-1,+1}.  This tuple is the canonical encoding; its
# lexicographic order is the tie-break order, and its string form is the
# randomness-tape key for the leaf's minibatch.
LeafPath = tuple

BATCH_DOMAIN = "leaf-batch"
STRAND_DOMAIN = "strands"
DATA_DOMAIN = "dataset"


def _check_dim(d: int) -> None:
    if not 1 <= d <= MAX_DIM:
        raise ValueError(f"dimension must be in [1, {MAX_DIM}], got {d}")


# ---------------------------------------------------------------------------
# Points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Point:
    """A point of {-1,+1}^d, packed as a bit mask (bit i set <=> x_i = +1)."""

    d: int
    mask: int

    def __post_init__(self):
        _check_dim(self.d)
        if not 0 <= self.mask < (1 << self.d):
            raise ValueError(f"mask {self.mask} out of range for d={self.d}")

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "Point":
        mask = 0
        for i, s in enumerate(signs):
            if s == 1:
                mask |= 1 << i
            elif s != -1:
                raise ValueError(f"coordinate {i} is {s}, expected -1 or +1")
        return cls(d=len(signs), mask=mask)

    @property
    def signs(self) -> tuple:
        return tuple(self.sign(i) for i in range(self.d))

    def sign(self, i: int) -> int:
        return 1 if (self.mask >> i) & 1 else -1


def sign_bit(mask: int, coord: int) -> int:
    """Sign of one coordinate of a packed point: +1 or -1."""
    return 1 if (int(mask) >> coord) & 1 else -1


# ---------------------------------------------------------------------------
# Leaf paths
# ---------------------------------------------------------------------------


def path_coords(path: LeafPath) -> frozenset:
    return frozenset(i for i, _ in path)


def path_constraint(path: LeafPath) -> tuple:
    """(mask, value) ints such that x reaches the leaf iff x & mask == value."""
    m = v = 0
    for i, s in path:
        m |= 1 << i
        if s == 1:
            v |= 1 << i
    return m, v


def point_reaches(mask: int, path: LeafPath) -> bool:
    m, v = path_constraint(path)
    return (int(mask) & m) == v


def extend_path(path: LeafPath, coord: int, sign: int) -> LeafPath:
    if any(i == coord for i, _ in path):
        raise ValueError(f"coordinate {coord} already queried on path")
    return path + ((coord, sign),)


def encode_path(path: LeafPath) -> str:
    """Compact text form: '.' for the root, else e.g. '3+5-' (1-based)."""
    if not path:
        return "."
    return "".join(f"{i + 1}{'+' if s == 1 else '-'}" for i, s in path)


def parse_path(text: str) -> LeafPath:
    if text == ".":
        return ()
    out = []
    num = ""
    for ch in text:
        if ch.isdigit():
            num += ch
        elif ch in "+-":
            if not num:
                raise ValueError(f"malformed path {text!r}")
            out.append((int(num) - 1, 1 if ch == "+" else -1))
            num = ""
        else:
            raise ValueError(f"malformed path {text!r}")
    if num:
        raise ValueError(f"malformed path {text!r}")
    return tuple(out)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass
class UnlabeledDataset:
    """Point set over {-1,+1}^d, stored as packed masks."""

    d: int
    masks: np.ndarray

    def __post_init__(self):
        _check_dim(self.d)
        self.masks = np.asarray(self.masks, dtype=np.uint64)
        if self.masks.ndim != 1:
            raise ValueError("masks must be one-dimensional")
        if self.n and int(self.masks.max(initial=0)) >= (1 << self.d):
            raise ValueError(f"mask out of range for d={self.d}")

    @property
    def n(self) -> int:
        return len(self.masks)

    def point(self, i: int) -> Point:
        return Point(self.d, int(self.masks[i]))


@dataclass
class LabeledDataset(UnlabeledDataset):
    """Points plus {0,1} labels, aligned by index."""

    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))

    def __post_init__(self):
        super().__post_init__()
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if len(self.labels) != self.n:
            raise ValueError("labels and points must have equal length")
        if self.n and not np.all(self.labels <= 1):
            raise ValueError("labels must be 0 or 1")

    def unlabeled(self) -> UnlabeledDataset:
        return UnlabeledDataset(self.d, self.masks)


AnyDataset = Union[LabeledDataset, UnlabeledDataset]


def write_dataset(ds: AnyDataset, fp: IO[str]) -> None:
    """Text format: first line 'd n', then one point per line as d signs in
    {-1,1}, followed by the label for labeled datasets."""
    fp.write(f"{ds.d} {ds.n}\n")
    labeled = isinstance(ds, LabeledDataset)
    for i in range(ds.n):
        row = " ".join(str(s) for s in ds.point(i).signs)
        if labeled:
            row += f" {int(ds.labels[i])}"
        fp.write(row + "\n")


def read_dataset(fp: IO[str]) -> AnyDataset:
    header = fp.readline().split()
    if len(header) != 2:
        raise ValueError("dataset header must be 'd n'")
    d, n = int(header[0]), int(header[1])
    masks = np.zeros(n, dtype=np.uint64)
    labels = np.zeros(n, dtype=np.uint8)
    labeled = None
    for row in range(n):
        parts = fp.readline().split()
        if labeled is None:
            if len(parts) == d + 1:
                labeled = True
            elif len(parts) == d:
                labeled = False
            else:
                raise ValueError(f"row {row}: expected {d} or {d + 1} fields")
        if len(parts) != d + (1 if labeled else 0):
            raise ValueError(f"row {row}: inconsistent field count")
        mask = 0
        for i in range(d):
            s = int(parts[i])
            if s == 1:
                mask |= 1 << i
            elif s != -1:
                raise ValueError(f"row {row}: entry {parts[i]} not in {{-1,1}}")
        masks[row] = mask
        if labeled:
            y = int(parts[d])
            if y not in (0, 1):
                raise ValueError(f"row {row}: label {y} not in {{0,1}}")
            labels[row] = y
    if labeled is None:
        labeled = False
    if labeled:
        return LabeledDataset(d, masks, labels)
    return UnlabeledDataset(d, masks)


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomnessTape:
    """Seed-keyed source of independent deterministic substreams.

    Every (master_seed, domain, key) triple maps to its own PCG64 stream via
    a blake2b hash, so draws never depend on call order and distinct keys
    share no state.  All learner variants draw the minibatch of a leaf from
    the substream keyed by that leaf's path, which is what makes the global
    and local algorithms see identical randomness.
    """

    master_seed: int

    def substream(self, domain: str, key: str = "") -> np.random.Generator:
        h = hashlib.blake2b(digest_size=16)
        h.update((self.master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
        h.update(domain.encode())
        h.update(b"\x00")
        h.update(key.encode())
        return np.random.default_rng(int.from_bytes(h.digest(), "little"))

    def uniform_masks(self, d: int, count: int, domain: str, key: str = "") -> np.ndarray:
        """count i.i.d. uniform points of {-1,+1}^d, packed."""
        _check_dim(d)
        rng = self.substream(domain, key)
        return rng.integers(0, 1 << d, size=count, dtype=np.uint64)


# ---------------------------------------------------------------------------
# Minibatches
# ---------------------------------------------------------------------------


@dataclass
class Minibatch:
    """Up to b dataset entries consistent with a leaf, drawn without
    replacement.  labels is None when drawn from an unlabeled dataset."""

    leaf_path: LeafPath
    indices: np.ndarray
    masks: np.ndarray
    labels: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.indices)


def consistent_indices(masks: np.ndarray, path: LeafPath) -> np.ndarray:
    """Ascending dataset indices of points consistent with the leaf path."""
    m, v = path_constraint(path)
    hit = (masks & np.uint64(m)) == np.uint64(v)
    return np.flatnonzero(hit)


def _partial_shuffle_take(rng: np.random.Generator, pool: np.ndarray, k: int) -> np.ndarray:
    # Fisher-Yates, stopped after the first k positions.
    m = len(pool)
    pool = pool.copy()
    swaps = rng.integers(np.arange(k), m)
    for i in range(k):
        j = swaps[i]
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def draw_minibatch(
    dataset: AnyDataset,
    leaf_path: LeafPath,
    b: int,
    tape: RandomnessTape,
    domain: str = BATCH_DOMAIN,
) -> Minibatch:
    """Uniform without-replacement draw of b consistent entries.

    If fewer than b entries are consistent with the leaf, all of them are
    returned (in ascending dataset order).  The draw is a pure function of
    (dataset, leaf_path, b, tape.master_seed, domain).
    """
    if b < 1:
        raise ValueError(f"batch size must be >= 1, got {b}")
    pool = consistent_indices(dataset.masks, leaf_path)
    if len(pool) > b:
        rng = tape.substream(domain, encode_path(leaf_path))
        idx = _partial_shuffle_take(rng, pool, b)
    else:
        idx = pool
    labels = dataset.labels[idx] if isinstance(dataset, LabeledDataset) else None
    return Minibatch(leaf_path, idx, dataset.masks[idx], labels)


# ---------------------------------------------------------------------------
# Label oracle
# ---------------------------------------------------------------------------


class LabelOracle:
    """Meters label queries against an unlabeled dataset.

    Labels are produced by `target.eval_masks` and cached per dataset index:
    repeated queries for an index are free, so query_count equals the number
    of distinct revealed indices and never decreases.
    """

    def __init__(self, target, dataset: UnlabeledDataset):
        self.target = target
        self.dataset = dataset
        self._labels = np.asarray(target.eval_masks(dataset.masks), dtype=np.uint8)
        self._revealed = np.zeros(dataset.n, dtype=bool)
        self.query_count = 0
        self.batches_drawn = 0
        self.phase = "default"
        self.phase_counts: dict = {}

    def set_phase(self, name: str) -> None:
        self.phase = name

    def labels_for(self, indices: np.ndarray) -> np.ndarray:
        """Reveal (and count) labels for the given dataset indices."""
        indices = np.asarray(indices, dtype=np.int64)
        self.batches_drawn += 1
        fresh = len(np.unique(indices[~self._revealed[indices]]))
        if fresh:
            self._revealed[indices] = True
            self.query_count += fresh
            self.phase_counts[self.phase] = self.phase_counts.get(self.phase, 0) + fresh
        return self._labels[indices]

    def reveal_batch(self, batch: Minibatch) -> Minibatch:
        """Labeled copy of an unlabeled minibatch, metered through the oracle."""
        return Minibatch(batch.leaf_path, batch.indices, batch.masks,
                         self.labels_for(batch.indices))


# ---------------------------------------------------------------------------
# Run traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceEntry:
    j: int                 # 1-based iteration index
    path: LeafPath         # the leaf that was split
    depth: int             # len(path)
    coord: int             # 0-based split coordinate
    gain: float            # estimated purity gain of the chosen split
    size_estimate: float   # running size estimate (exact size for capped/full runs)


@dataclass
class RunTrace:
    """Ordered record of every split a learner performed."""

    entries: list = field(default_factory=list)
    depth_cap: Optional[int] = None

    def append(self, path: LeafPath, coord: int, gain: float, size_estimate: float) -> None:
        self.entries.append(
            TraceEntry(len(self.entries) + 1, path, len(path), coord, gain, size_estimate)
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)

    def validate(self) -> None:
        for k, e in enumerate(self.entries, start=1):
            if e.j != k:
                raise ValueError(f"iteration indices must be 1..n, got {e.j} at {k}")
            if e.depth != len(e.path):
                raise ValueError(f"entry {k}: depth {e.depth} != path length")
            if self.depth_cap is not None and e.depth > self.depth_cap:
                raise ValueError(f"entry {k}: split depth {e.depth} exceeds cap {self.depth_cap}")


def write_trace(trace: RunTrace, fp: IO[str]) -> None:
    """Line format: 'j leaf_path depth coord gain e' (coord 1-based)."""
    for e in trace:
        fp.write(f"{e.j} {encode_path(e.path)} {e.depth} {e.coord + 1} "
                 f"{e.gain!r} {e.size_estimate!r}\n")


def read_trace(fp: IO[str]) -> RunTrace:
    trace = RunTrace()
    for line in fp:
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ValueError(f"malformed trace line: {line!r}")
        j, path, depth, coord = int(parts[0]), parse_path(parts[1]), int(parts[2]), int(parts[3])
        entry = TraceEntry(j, path, depth, coord - 1, float(parts[4]), float(parts[5]))
        if entry.depth != len(path):
            raise ValueError(f"trace line {j}: depth field disagrees with path")
        trace.entries.append(entry)
    trace.validate()
    return trace


# ---------------------------------------------------------------------------
# Strand bookkeeping
# ---------------------------------------------------------------------------


class StrandTracker:
    """Tracks the current leaf of a fixed multiset of cube points while a
    partial tree grows, and the tree-size estimate they induce (mean of
    2^depth, duplicates counted)."""

    def __init__(self, masks: np.ndarray):
        self.masks = np.asarray(masks, dtype=np.uint64)
        self.paths = [() for _ in range(len(self.masks))]

    def __len__(self) -> int:
        return len(self.masks)

    def advance(self, split_path: LeafPath, coord: int) -> None:
        """Move every point sitting at split_path into its child."""
        for i, p in enumerate(self.paths):
            if p == split_path:
                self.paths[i] = p + ((coord, sign_bit(self.masks[i], coord)),)

    def distinct_paths(self) -> set:
        return set(self.paths)

    def size_estimate(self) -> float:
        if not self.paths:
            raise ValueError("size estimate over an empty strand set")
        total = sum(1 << len(p) for p in self.paths)
        return total / len(self.paths)
