"""Forest training: bootstrap, Gini splits (threshold and exact categorical
partition enumeration), OOB estimation, and the versioned binary format.

Determinism contract: (dataset, config) fully determines the Forest.  Every
tree draws from two PCG32 streams derived from ``iseed + tree_id`` (one for
the bootstrap, one for per-node feature subsets), trees are grown in parallel
batches, and per-tree outputs are merged in tree-index order, so the result is
independent of the worker count.
"""

import io
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from ._parallel import map_in_order
from .dataset import Dataset
from .errors import DataError, RfxError
from .rng import SEQ_GROW, SEQ_TREE, make_stream

_MAGIC = b"RFX1"
_VERSION = 1

#: trees grown per parallel batch
BATCH_SIZE = 256


def gini(counts) -> float:
    """Gini impurity 1 - sum((c_k / total)^2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise RfxError("negative class count")
    total = counts.sum()
    if total <= 0:
        raise RfxError("empty node: class counts sum to zero")
    f = counts / total
    return float(1.0 - (f * f).sum())


@dataclass
class TrainConfig:
    """Training parameters; None fields resolve against the dataset."""

    ntree: int = 500
    mtry: int | None = None          # default floor(sqrt(p))
    iseed: int = 1
    min_node_size: int = 1
    max_nodes: int | None = None     # default 2n + 1
    casewise: bool = False

    def resolved(self, n: int, p: int) -> "TrainConfig":
        if self.ntree < 1:
            raise DataError(f"ntree must be >= 1, got {self.ntree}")
        if self.min_node_size < 1:
            raise DataError(f"min_node_size must be >= 1, got {self.min_node_size}")
        mtry = self.mtry if self.mtry is not None else max(1, int(np.sqrt(p)))
        if not 1 <= mtry <= p:
            raise DataError(f"mtry must be in [1, {p}], got {mtry}")
        max_nodes = self.max_nodes if self.max_nodes is not None else 2 * n + 1
        if max_nodes < 1:
            raise DataError("max_nodes must be >= 1")
        return replace(self, mtry=mtry, max_nodes=max_nodes)


@dataclass
class Tree:
    """One grown tree as parallel node arrays (see _kernels for the layout).

    Node 0 is the root; children always carry larger indices than their
    parent.  ``col_cat`` is shared across the forest's trees.
    """

    status: np.ndarray
    split_var: np.ndarray
    threshold: np.ndarray
    cat_mask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_class: np.ndarray
    class_pops: np.ndarray
    node_raw: np.ndarray
    node_weight: np.ndarray
    col_cat: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.status)

    @property
    def leaf_count(self) -> int:
        return int((self.status == 1).sum())

    def leaf_codes(self) -> np.ndarray:
        """Dense 0-based code per node for terminals, -1 for internals."""
        codes = np.cumsum(self.status == 1).astype(np.int32) - 1
        codes[self.status == 0] = -1
        return codes


@dataclass
class BootstrapRecord:
    """Per-tree in-bag multiplicities; OOB is wherever the count is zero."""

    counts: np.ndarray  # (B, n) int32

    @property
    def oob_mask(self) -> np.ndarray:
        return self.counts == 0

    def oob_tree_sets(self, i: int) -> np.ndarray:
        return np.nonzero(self.counts[:, i] == 0)[0]


@dataclass
class Forest:
    trees: tuple
    bootstrap: BootstrapRecord
    config: TrainConfig
    n: int
    p: int
    class_count: int
    col_cat: np.ndarray      # uint8 per feature, 1 = categorical
    col_levels: np.ndarray   # int32 per feature, 0 for numeric
    oob_votes: np.ndarray    # (n, C) int64

    @property
    def ntree(self) -> int:
        return len(self.trees)


def bootstrap_sample(n: int, state) -> np.ndarray:
    """n draws with replacement from a PCG32 stream; int32 counts sum to n."""
    if n < 1:
        raise DataError("bootstrap needs n >= 1")
    return _kernels.bootstrap_counts(n, state)


def _split_inputs(values_j, labels, weights, n_classes):
    v = np.asarray(values_j, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int32)
    w = (np.ones(len(v), dtype=np.int64) if weights is None
         else np.asarray(weights, dtype=np.int64))
    if not (len(v) == len(y) == len(w)):
        raise DataError("values, labels, and weights must have equal length")
    pops = np.zeros(n_classes, dtype=np.int64)
    np.add.at(pops, y, w)
    wtot = int(pops.sum())
    if wtot <= 0:
        raise RfxError("empty node: weights sum to zero")
    ip = gini(pops)
    return v, y, w, pops, wtot, ip


def best_threshold_split(values_j, labels, weights=None, n_classes=None):
    """Best threshold split of one numeric feature.

    Returns (tau, delta) maximizing the impurity decrease with left =
    {x <= tau} and candidates at the unique values, or None when no split
    improves impurity.  ``weights`` are in-bag counts (all-ones default).
    """
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1
    v, y, w, pops, wtot, ip = _split_inputs(values_j, labels, weights, n_classes)
    m = len(v)
    order = np.empty(m, dtype=np.int64)
    left_counts = np.zeros(n_classes, dtype=np.int64)
    delta, tau = _kernels._threshold_scan(m, v.copy(), y.copy(), w.copy(),
                                          order, pops, left_counts,
                                          n_classes, ip, wtot)
    if delta <= 0:
        return None
    return float(tau), float(delta)


def best_garside_split(codes_j, labels, weights=None, n_levels=None,
                       n_classes=None):
    """Best categorical partition of one feature over all 2^(K-1) - 1
    canonical level masks (bit 0 always on the left side).

    Returns (mask, delta) or None when fewer than two levels are present or
    no partition improves impurity.  Rejects K > 32.
    """
    if n_levels is None:
        n_levels = int(np.max(codes_j)) + 1
    if n_levels > 32:
        raise RfxError(f"categorical enumeration supports K <= 32, got {n_levels}")
    if n_classes is None:
        n_classes = int(np.max(labels)) + 1
    v, y, w, pops, wtot, ip = _split_inputs(codes_j, labels, weights, n_classes)
    m = len(v)
    lvl_counts = np.zeros((32, n_classes), dtype=np.int64)
    lvl_w = np.zeros(32, dtype=np.int64)
    left_counts = np.zeros(n_classes, dtype=np.int64)
    delta, mask = _kernels._garside_scan(m, v, y, w, n_levels, lvl_counts,
                                         lvl_w, left_counts, pops, n_classes,
                                         ip, wtot)
    if delta <= 0:
        return None
    return int(mask), float(delta)


def _column_arrays(dataset: Dataset):
    col_cat = np.array([1 if c.is_categorical else 0 for c in dataset.columns],
                       dtype=np.uint8)
    col_levels = np.array([c.level_count if c.is_categorical else 0
                           for c in dataset.columns], dtype=np.int32)
    return col_cat, col_levels


def grow_tree(dataset: Dataset, inbag_counts, config: TrainConfig,
              tree_seed: int) -> Tree:
    """Grow one tree from in-bag counts; feature subsets come from the
    PCG32 stream (tree_seed, SEQ_GROW)."""
    cfg = config.resolved(dataset.n, dataset.p)
    col_cat, col_levels = _column_arrays(dataset)
    return _grow_from_counts(dataset.values, col_cat, col_levels, dataset.labels,
                             dataset.class_count,
                             np.asarray(inbag_counts, dtype=np.int32),
                             cfg, tree_seed, tree_id=None)


def _grow_from_counts(values, col_cat, col_levels, labels, n_classes, inbag,
                      cfg: TrainConfig, tree_seed: int, tree_id):
    mn = cfg.max_nodes
    status = np.zeros(mn, dtype=np.int8)
    split_var = np.zeros(mn, dtype=np.int32)
    threshold = np.zeros(mn, dtype=np.float64)
    cat_mask = np.zeros(mn, dtype=np.int64)
    left = np.zeros(mn, dtype=np.int32)
    right = np.zeros(mn, dtype=np.int32)
    node_class = np.zeros(mn, dtype=np.int32)
    class_pops = np.zeros((mn, n_classes), dtype=np.int64)
    node_raw = np.zeros(mn, dtype=np.int32)
    node_weight = np.zeros(mn, dtype=np.int64)

    state = make_stream(tree_seed, SEQ_GROW)
    count = _kernels.grow_tree_kernel(
        values, col_cat, col_levels, labels, n_classes, inbag,
        cfg.mtry, cfg.min_node_size, mn, state,
        status, split_var, threshold, cat_mask, left, right,
        node_class, class_pops, node_raw, node_weight)
    if count < 0:
        ident = f"tree {tree_id}" if tree_id is not None else f"tree seed {tree_seed}"
        raise RfxError(f"{ident}: exceeded max_nodes={mn}")
    return Tree(
        status=status[:count].copy(),
        split_var=split_var[:count].copy(),
        threshold=threshold[:count].copy(),
        cat_mask=cat_mask[:count].copy(),
        left=left[:count].copy(),
        right=right[:count].copy(),
        node_class=node_class[:count].copy(),
        class_pops=class_pops[:count].copy(),
        node_raw=node_raw[:count].copy(),
        node_weight=node_weight[:count].copy(),
        col_cat=col_cat,
    )


def train(dataset: Dataset, config: TrainConfig) -> Forest:
    """Grow the forest in parallel batches and tally OOB votes."""
    cfg = config.resolved(dataset.n, dataset.p)
    col_cat, col_levels = _column_arrays(dataset)
    n, p, C = dataset.n, dataset.p, dataset.class_count
    B = cfg.ntree

    def grow_one(t: int):
        st = make_stream(cfg.iseed + t, SEQ_TREE)
        counts = _kernels.bootstrap_counts(n, st)
        tree = _grow_from_counts(dataset.values, col_cat, col_levels,
                                 dataset.labels, C, counts, cfg,
                                 cfg.iseed + t, tree_id=t)
        return counts, tree

    trees = []
    all_counts = np.empty((B, n), dtype=np.int32)
    votes = np.zeros((n, C), dtype=np.int64)
    batch = min(BATCH_SIZE, B)
    for lo in range(0, B, batch):
        ids = range(lo, min(lo + batch, B))
        results = map_in_order(grow_one, ids)
        for t, (counts, tree) in zip(ids, results):
            all_counts[t] = counts
            trees.append(tree)
            _kernels.oob_votes_tree(tree.status, tree.split_var, tree.threshold,
                                    tree.cat_mask, tree.left, tree.right,
                                    tree.node_class, col_cat, dataset.values,
                                    counts, votes)

    return Forest(
        trees=tuple(trees),
        bootstrap=BootstrapRecord(all_counts),
        config=cfg,
        n=n,
        p=p,
        class_count=C,
        col_cat=col_cat,
        col_levels=col_levels,
        oob_votes=votes,
    )


def classify(tree: Tree, sample) -> int:
    """Terminal node index for one sample (row vector of p values)."""
    row = np.asarray(sample, dtype=np.float64).reshape(1, -1)
    return int(_kernels.descend(tree.status, tree.split_var, tree.threshold,
                                tree.cat_mask, tree.left, tree.right,
                                tree.col_cat, row, 0))


def classify_all(tree: Tree, values) -> np.ndarray:
    """Terminal node index per row of values (n, p)."""
    out = np.empty(values.shape[0], dtype=np.int32)
    _kernels.descend_all(tree.status, tree.split_var, tree.threshold,
                         tree.cat_mask, tree.left, tree.right,
                         tree.col_cat, values, out)
    return out


@dataclass
class OobReport:
    predictions: np.ndarray       # (n,) int32 class code, -1 where uncovered
    error_rate: float
    confusion: np.ndarray         # (C, C) rows true, cols predicted
    per_class_accuracy: np.ndarray
    covered: np.ndarray           # (n,) bool
    uncovered: np.ndarray         # indices never out-of-bag


def oob_report(forest: Forest, dataset: Dataset) -> OobReport:
    """Aggregated OOB predictions (vote argmax, ties to the lowest class),
    error over covered samples, and the confusion matrix."""
    if forest.n != dataset.n or forest.p != dataset.p:
        raise DataError("forest and dataset shapes disagree")
    votes = forest.oob_votes
    covered = votes.sum(axis=1) > 0
    preds = np.where(covered, votes.argmax(axis=1), -1).astype(np.int32)
    y = dataset.labels
    C = forest.class_count
    confusion = np.zeros((C, C), dtype=np.int64)
    for i in np.nonzero(covered)[0]:
        confusion[y[i], preds[i]] += 1
    n_cov = int(covered.sum())
    if n_cov == 0:
        error = float("nan")
    else:
        error = float((preds[covered] != y[covered]).mean())
    row_tot = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(row_tot > 0, np.diag(confusion) / row_tot, np.nan)
    return OobReport(
        predictions=preds,
        error_rate=error,
        confusion=confusion,
        per_class_accuracy=per_class,
        covered=covered,
        uncovered=np.nonzero(~covered)[0],
    )


# ---------------------------------------------------------------------------
# Versioned binary forest format ("RFX1"); round-trips bit-exactly.
# Layout: header (config + shapes + column kinds), per-tree node arrays,
# bootstrap counts, OOB vote tallies.  Everything little-endian.
# ---------------------------------------------------------------------------

def _a(buf: io.BytesIO, arr, dtype):
    buf.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def forest_to_bytes(forest: Forest) -> bytes:
    cfg = forest.config
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", _VERSION))
    buf.write(struct.pack("<qIIIIB3x", cfg.iseed, cfg.ntree, cfg.mtry,
                          cfg.min_node_size, cfg.max_nodes,
                          1 if cfg.casewise else 0))
    buf.write(struct.pack("<III", forest.n, forest.p, forest.class_count))
    _a(buf, forest.col_cat, "<u1")
    _a(buf, forest.col_levels, "<i4")
    for tree in forest.trees:
        buf.write(struct.pack("<I", tree.node_count))
        _a(buf, tree.status, "<i1")
        _a(buf, tree.split_var, "<i4")
        _a(buf, tree.threshold, "<f8")
        _a(buf, tree.cat_mask, "<u4")
        _a(buf, tree.left, "<i4")
        _a(buf, tree.right, "<i4")
        _a(buf, tree.node_class, "<i4")
        _a(buf, tree.class_pops, "<i8")
        _a(buf, tree.node_raw, "<i4")
        _a(buf, tree.node_weight, "<i8")
    _a(buf, forest.bootstrap.counts, "<i4")
    _a(buf, forest.oob_votes, "<i8")
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def array(self, dtype, count):
        dt = np.dtype(dtype)
        nbytes = dt.itemsize * count
        arr = np.frombuffer(self.data, dtype=dt, count=count, offset=self.pos).copy()
        self.pos += nbytes
        return arr


def forest_from_bytes(data: bytes) -> Forest:
    rd = _Reader(data)
    magic = rd.data[:4]
    rd.pos = 4
    if magic != _MAGIC:
        raise DataError(f"not a forest file (magic {magic!r})")
    (version,) = rd.take("<I")
    if version != _VERSION:
        raise DataError(f"unsupported forest format version {version}")
    iseed, ntree, mtry, min_node_size, max_nodes, casewise = rd.take("<qIIIIB3x")
    n, p, C = rd.take("<III")
    col_cat = rd.array("<u1", p).astype(np.uint8)
    col_levels = rd.array("<i4", p).astype(np.int32)
    cfg = TrainConfig(ntree=ntree, mtry=mtry, iseed=iseed,
                      min_node_size=min_node_size, max_nodes=max_nodes,
                      casewise=bool(casewise))
    trees = []
    for _ in range(ntree):
        (nc,) = rd.take("<I")
        status = rd.array("<i1", nc).astype(np.int8)
        split_var = rd.array("<i4", nc).astype(np.int32)
        threshold = rd.array("<f8", nc)
        cat_mask = rd.array("<u4", nc).astype(np.int64)
        left = rd.array("<i4", nc).astype(np.int32)
        right = rd.array("<i4", nc).astype(np.int32)
        node_class = rd.array("<i4", nc).astype(np.int32)
        class_pops = rd.array("<i8", nc * C).reshape(nc, C)
        node_raw = rd.array("<i4", nc).astype(np.int32)
        node_weight = rd.array("<i8", nc)
        trees.append(Tree(status, split_var, threshold, cat_mask, left, right,
                          node_class, class_pops, node_raw, node_weight, col_cat))
    counts = rd.array("<i4", ntree * n).reshape(ntree, n).astype(np.int32)
    votes = rd.array("<i8", n * C).reshape(n, C)
    if rd.pos != len(data):
        raise DataError("trailing bytes in forest file")
    return Forest(trees=tuple(trees), bootstrap=BootstrapRecord(counts),
                  config=cfg, n=n, p=p, class_count=C, col_cat=col_cat,
                  col_levels=col_levels, oob_votes=votes)


def save_forest(forest: Forest, path) -> None:
    with open(path, "wb") as fh:
        fh.write(forest_to_bytes(forest))


def load_forest(path) -> Forest:
    with open(path, "rb") as fh:
        return forest_from_bytes(fh.read())
