"""Pairwise proximity backends and the memory planner.

Proximity p(i, j) is the fraction of trees placing samples i and j in the
same terminal node.  Three interchangeable representations answer
``entry(i, j)``:

* :class:`FullTriangle`: packed upper triangle of exact values.
* :class:`TriBlock`: value-tiered storage: an associative dense tier at or
  above tau, compressed (i, j, value) tuples between 1e-6 and tau, and
  implicit exact zeros below 1e-6.
* :class:`LowRankQuantized`: a symmetric rank-r factor Q with P ~ Q Q^T,
  stored in F32/F16/I8/NF4 precision.

All construction runs off integer co-membership counts accumulated per tree,
so results are exact, independent of tree batching, and bit-reproducible.
"""

import csv
import io
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from ._parallel import map_in_order, worker_count
from .dataset import Dataset
from .errors import BudgetError, DataError, RfxError
from .forest import Forest, classify_all
from .quantize import BYTES_PER_ELEMENT, MODES, QuantFactor, dequantize, quantize
from .rng import SEQ_FACTOR, SEQ_PMAX, Pcg32

logger = logging.getLogger(__name__)

#: value below which TriBlock treats a proximity as an exact zero
ZERO_TIER = 1e-6

#: default TriBlock dense-tier boundary; entries below it (down to the zero
#: tier) are kept as compressed tuples rather than map entries
DEFAULT_TAU = 1e-4

#: default memory budget for full/TriBlock construction
DEFAULT_BUDGET = 32 * 2**30

#: planner assumption: fraction of packed-triangle entries TriBlock retains
DEFAULT_RETENTION = 0.8

_OVERSAMPLE = 8
_POWER_ITERS = 2


def _packed_len(n: int) -> int:
    return n * (n - 1) // 2


def packed_index(n: int, i, j):
    """Index of (i, j), i < j, in the row-major packed upper triangle."""
    return i * (2 * n - i - 1) // 2 + (j - i - 1)


# ---------------------------------------------------------------------------
# Leaf membership
# ---------------------------------------------------------------------------

@dataclass
class LeafMembership:
    """Terminal-leaf code of every sample in every tree (dense 0-based codes
    per tree), the source for every proximity backend."""

    codes: np.ndarray        # (n, B) int32
    leaf_counts: np.ndarray  # (B,) int32

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def tree_count(self) -> int:
        return self.codes.shape[1]

    @property
    def total_leaves(self) -> int:
        return int(self.leaf_counts.sum())

    def onehot(self) -> sp.csr_matrix:
        """Sparse n x (total leaves) indicator M scaled by 1/sqrt(B), so that
        P = M M^T exactly."""
        n, B = self.codes.shape
        offsets = np.zeros(B + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(self.leaf_counts)
        cols = (self.codes.astype(np.int64) + offsets[:B][None, :]).reshape(-1)
        rows = np.repeat(np.arange(n, dtype=np.int64), B)
        data = np.full(n * B, 1.0 / np.sqrt(B))
        return sp.csr_matrix((data, (rows, cols)), shape=(n, int(offsets[B])))


def leaf_membership(forest: Forest, dataset: Dataset) -> LeafMembership:
    """Classify every sample down every tree; batched over trees."""
    if forest.n != dataset.n or forest.p != dataset.p:
        raise DataError("forest and dataset shapes disagree")
    n, B = dataset.n, forest.ntree
    leaf_counts = np.array([t.leaf_count for t in forest.trees], dtype=np.int32)

    def run(b: int):
        tree = forest.trees[b]
        nodes = classify_all(tree, dataset.values)
        return tree.leaf_codes()[nodes]

    cols = map_in_order(run, range(B))
    codes = np.empty((n, B), dtype=np.int32)
    for b, col in enumerate(cols):
        codes[:, b] = col
    return LeafMembership(codes=codes, leaf_counts=leaf_counts)


# ---------------------------------------------------------------------------
# Full packed triangle
# ---------------------------------------------------------------------------

@dataclass
class FullTriangle:
    """Exact proximities in a packed upper triangle (implicit unit diagonal)."""

    n: int
    tree_count: int
    packed: np.ndarray  # (n(n-1)/2,) float64, row-major over i < j

    def entry(self, i: int, j: int) -> float:
        i, j = _check_pair(self.n, i, j)
        if i == j:
            return 1.0
        return float(self.packed[packed_index(self.n, i, j)])

    def to_dense(self) -> np.ndarray:
        dense = np.empty((self.n, self.n), dtype=np.float64)
        iu = np.triu_indices(self.n, k=1)
        dense[iu] = self.packed
        dense.T[iu] = self.packed
        np.fill_diagonal(dense, 1.0)
        return dense

    def nbytes(self) -> int:
        return self.packed.nbytes


def _check_pair(n, i, j):
    i = int(i)
    j = int(j)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    if i > j:
        i, j = j, i
    return i, j


def _pair_counts(membership: LeafMembership) -> np.ndarray:
    """Integer co-membership counts over all trees, packed i < j."""
    n, B = membership.codes.shape
    pairs = _packed_len(n)
    workers = worker_count()
    # per-worker buffers only when the triangle is small enough to duplicate
    if workers > 1 and pairs * 8 * workers <= 256 * 2**20 and B >= 2 * workers:
        chunks = np.array_split(np.arange(B), workers)

        def run(chunk):
            local = np.zeros(pairs, dtype=np.int64)
            for b in chunk:
                _kernels.accumulate_pair_counts(
                    membership.codes[:, b].copy(),
                    int(membership.leaf_counts[b]), local)
            return local

        parts = map_in_order(run, chunks)
        counts = parts[0]
        for part in parts[1:]:
            counts += part
        return counts
    counts = np.zeros(pairs, dtype=np.int64)
    for b in range(B):
        _kernels.accumulate_pair_counts(
            membership.codes[:, b].copy(), int(membership.leaf_counts[b]), counts)
    return counts


def full_proximity(membership: LeafMembership,
                   budget_bytes: int | None = DEFAULT_BUDGET) -> FullTriangle:
    """p(i, j) = (1/B) * #{trees with node_b(i) = node_b(j)}, exact."""
    n = membership.n
    est = 8 * _packed_len(n)
    if budget_bytes is not None and est > budget_bytes:
        plan = memory_plan(n, tree_count=membership.tree_count)
        raise BudgetError(
            f"full proximity for n={n} needs {est} bytes (packed), over the "
            f"{budget_bytes}-byte budget; consider the triblock or lowrank "
            "backend", plan)
    counts = _pair_counts(membership)
    packed = counts / float(membership.tree_count)
    return FullTriangle(n=n, tree_count=membership.tree_count, packed=packed)


# ---------------------------------------------------------------------------
# TriBlock tiered storage
# ---------------------------------------------------------------------------

@dataclass
class TriBlock:
    """Value-tiered proximity storage (only i < j is kept).

    dense tier: map (i, j) -> value for p >= tau.
    sparse tier: (i, j, value) arrays for 1e-6 < p < tau, sorted by (i, j).
    implicit zeros below 1e-6.
    """

    n: int
    tree_count: int
    tau: float
    dense: dict
    sparse_i: np.ndarray
    sparse_j: np.ndarray
    sparse_v: np.ndarray
    _sparse_key: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._sparse_key is None:
            self._sparse_key = self.sparse_i.astype(np.int64) * self.n + self.sparse_j

    def entry(self, i: int, j: int) -> float:
        i, j = _check_pair(self.n, i, j)
        if i == j:
            return 1.0
        v = self.dense.get((i, j))
        if v is not None:
            return float(v)
        key = i * self.n + j
        pos = np.searchsorted(self._sparse_key, key)
        if pos < len(self._sparse_key) and self._sparse_key[pos] == key:
            return float(self.sparse_v[pos])
        return 0.0

    @property
    def dense_count(self) -> int:
        return len(self.dense)

    @property
    def sparse_count(self) -> int:
        return len(self.sparse_v)

    @property
    def stored_pairs(self) -> int:
        return self.dense_count + self.sparse_count

    def compression_ratio(self) -> float:
        """Pairs in the packed triangle per stored pair."""
        stored = max(self.stored_pairs, 1)
        return _packed_len(self.n) / stored

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n), dtype=np.float64)
        for (i, j), v in self.dense.items():
            dense[i, j] = v
            dense[j, i] = v
        dense[self.sparse_i, self.sparse_j] = self.sparse_v
        dense[self.sparse_j, self.sparse_i] = self.sparse_v
        np.fill_diagonal(dense, 1.0)
        return dense

    def nbytes(self) -> int:
        # dense tier accounted as (i, j, value) triples like the sparse tier
        return self.dense_count * 16 + self.sparse_count * 16


def triblock_proximity(membership: LeafMembership, tau: float = DEFAULT_TAU,
                       budget_bytes: int | None = DEFAULT_BUDGET) -> TriBlock:
    """Same values as full_proximity, routed into tiers by magnitude.

    Accumulation streams over row blocks so peak memory tracks the block
    size, not the full triangle.
    """
    if not (ZERO_TIER < tau < 1.0):
        raise DataError(f"tau must lie in ({ZERO_TIER}, 1), got {tau}")
    n, B = membership.codes.shape
    est = int(8 * n * n * 0.5 * DEFAULT_RETENTION)
    if budget_bytes is not None and est > budget_bytes:
        plan = memory_plan(n, tree_count=B)
        raise BudgetError(
            f"triblock proximity for n={n} estimates {est} bytes, over the "
            f"{budget_bytes}-byte budget; consider the lowrank backend", plan)

    # row-block size: keep the int32 counter block around 32 MB
    rows_per_block = max(1, min(n, (32 * 2**20) // max(4 * n, 1)))
    codes_cols = [np.ascontiguousarray(membership.codes[:, b]) for b in range(B)]

    dense: dict = {}
    sp_i: list = []
    sp_j: list = []
    sp_v: list = []
    block = np.zeros((rows_per_block, n), dtype=np.int32)
    for lo in range(0, n - 1, rows_per_block):
        hi = min(lo + rows_per_block, n)
        block[: hi - lo].fill(0)
        for b in range(B):
            _kernels.accumulate_pair_counts_block(
                codes_cols[b], int(membership.leaf_counts[b]), lo, hi,
                block)
        sub = block[: hi - lo]
        ri, ci = np.nonzero(sub)
        vals = sub[ri, ci] / float(B)
        rows = ri + lo
        keep = vals > ZERO_TIER
        rows, ci, vals = rows[keep], ci[keep], vals[keep]
        hot = vals >= tau
        for i, j, v in zip(rows[hot], ci[hot], vals[hot]):
            dense[(int(i), int(j))] = float(v)
        sp_i.append(rows[~hot])
        sp_j.append(ci[~hot])
        sp_v.append(vals[~hot])

    sparse_i = np.concatenate(sp_i) if sp_i else np.empty(0, dtype=np.int64)
    sparse_j = np.concatenate(sp_j) if sp_j else np.empty(0, dtype=np.int64)
    sparse_v = np.concatenate(sp_v) if sp_v else np.empty(0, dtype=np.float64)
    return TriBlock(n=n, tree_count=B, tau=tau, dense=dense,
                    sparse_i=sparse_i.astype(np.int32),
                    sparse_j=sparse_j.astype(np.int32),
                    sparse_v=sparse_v.astype(np.float64))


# ---------------------------------------------------------------------------
# Low-rank quantized factors
# ---------------------------------------------------------------------------

@dataclass
class LowRankQuantized:
    """Symmetric factorization P ~ Q Q^T with Q stored quantized.

    ``pmax`` is the estimated maximum proximity (diagonal of Q Q^T plus a
    seeded 1024-pair off-diagonal sample), recorded for distance conversion.
    """

    n: int
    rank: int
    mode: str
    factor: QuantFactor
    pmax: float
    tree_count: int
    rank_degraded: bool = False
    _dq: np.ndarray = field(default=None, repr=False)

    def dequantized(self) -> np.ndarray:
        if self._dq is None:
            self._dq = self.factor.dequantize()
        return self._dq

    def entry(self, i: int, j: int) -> float:
        i, j = _check_pair(self.n, i, j)
        if i == j:
            return 1.0
        Q = self.dequantized()
        return float(np.clip(Q[i] @ Q[j], 0.0, 1.0))

    def nbytes(self) -> int:
        return self.factor.payload_nbytes()


def lowrank_proximity(membership: LeafMembership, rank: int, mode: str = "i8",
                      seed: int = 0) -> LowRankQuantized:
    """Randomized symmetric rank-r factorization of P = M M^T (M is the
    1/sqrt(B)-scaled one-hot leaf membership), then quantization.

    Oversampled Gaussian range finding with two power iterations; the small
    projected matrix is eigendecomposed and non-negative eigenvalues give
    Q = V diag(sqrt(lambda)).  Requesting rank above the membership rank
    degrades to the exact bound with a notice.
    """
    if mode not in MODES:
        raise DataError(f"unknown quantization mode {mode!r}")
    n = membership.n
    if rank < 1:
        raise DataError(f"rank must be >= 1, got {rank}")
    bound = min(n, membership.total_leaves)
    degraded = rank > bound
    if degraded:
        logger.warning("requested rank %d exceeds membership rank bound %d; "
                       "degrading to the exact bound", rank, bound)
    r = min(rank, bound)

    M = membership.onehot()
    Mt = M.T.tocsr()
    k = min(n, r + _OVERSAMPLE)
    rng = Pcg32(seed, SEQ_FACTOR)
    omega = rng.normals((n, k))
    Y = M @ (Mt @ omega)
    Q, _ = np.linalg.qr(Y)
    for _ in range(_POWER_ITERS):
        Q, _ = np.linalg.qr(M @ (Mt @ Q))
    T = Q.T @ (M @ (Mt @ Q))
    T = 0.5 * (T + T.T)
    lam, W = np.linalg.eigh(T)
    order = np.argsort(lam)[::-1][:r]
    lam = np.clip(lam[order], 0.0, None)
    factor_raw = Q @ (W[:, order] * np.sqrt(lam)[None, :])

    qf = quantize(factor_raw, mode)
    dq = dequantize(qf)
    diag = np.einsum("ij,ij->i", dq, dq)
    pmax = float(diag.max()) if n else 0.0
    sampler = Pcg32(seed, SEQ_PMAX)
    for _ in range(1024):
        i = sampler.bounded(n)
        j = sampler.bounded(n)
        if i == j:
            continue
        v = float(dq[i] @ dq[j])
        if v > pmax:
            pmax = v
    return LowRankQuantized(n=n, rank=r, mode=mode, factor=qf, pmax=pmax,
                            tree_count=membership.tree_count,
                            rank_degraded=degraded)


# ---------------------------------------------------------------------------
# Uniform accessor and outlier measure
# ---------------------------------------------------------------------------

def entry(repr_, i: int, j: int) -> float:
    """Uniform proximity accessor: symmetric, unit diagonal, any backend."""
    return repr_.entry(i, j)


def outlier_scores(repr_, clamp_floor: float | None = None) -> np.ndarray:
    """Mean inverse-squared proximity of each sample to all others.

    Proximities are clamped below at ``clamp_floor`` (default 1/B, the
    smallest nonzero value a B-tree forest can produce) so scores stay
    finite; a sample co-located with nothing scores B^2.
    """
    n = repr_.n
    if n < 2:
        raise RfxError("outlier scores need n >= 2")
    floor = 1.0 / repr_.tree_count if clamp_floor is None else clamp_floor
    if floor <= 0:
        raise RfxError("clamp_floor must be positive")
    scores = np.zeros(n, dtype=np.float64)

    if isinstance(repr_, FullTriangle):
        pos = 0
        for i in range(n - 1):
            m = n - 1 - i
            seg = repr_.packed[pos:pos + m]
            contrib = 1.0 / np.maximum(seg, floor) ** 2
            scores[i] += contrib.sum()
            scores[i + 1:] += contrib
            pos += m
    elif isinstance(repr_, TriBlock):
        base = 1.0 / floor**2
        scores[:] = (n - 1) * base
        if repr_.dense_count:
            di = np.fromiter((k[0] for k in repr_.dense), dtype=np.int64,
                             count=repr_.dense_count)
            dj = np.fromiter((k[1] for k in repr_.dense), dtype=np.int64,
                             count=repr_.dense_count)
            dv = np.fromiter(repr_.dense.values(), dtype=np.float64,
                             count=repr_.dense_count)
            adj = 1.0 / np.maximum(dv, floor) ** 2 - base
            np.add.at(scores, di, adj)
            np.add.at(scores, dj, adj)
        if repr_.sparse_count:
            adj = 1.0 / np.maximum(repr_.sparse_v, floor) ** 2 - base
            np.add.at(scores, repr_.sparse_i, adj)
            np.add.at(scores, repr_.sparse_j, adj)
    elif isinstance(repr_, LowRankQuantized):
        Q = repr_.dequantized()
        block = max(1, (16 * 2**20) // max(8 * n, 1))
        for lo in range(0, n, block):
            hi = min(lo + block, n)
            rows = np.clip(Q[lo:hi] @ Q.T, 0.0, 1.0)
            contrib = 1.0 / np.maximum(rows, floor) ** 2
            sums = contrib.sum(axis=1)
            own = contrib[np.arange(hi - lo), np.arange(lo, hi)]
            scores[lo:hi] = sums - own
    else:
        raise RfxError(f"unknown proximity representation {type(repr_)!r}")
    return scores / (n - 1)


# ---------------------------------------------------------------------------
# Memory planner
# ---------------------------------------------------------------------------

#: Planner defaults for model storage line items (4-byte elements throughout)
PLAN_MAXNODE = 1000
PLAN_FEATURES = 50
PLAN_CLASSES = 3

GiB = 2**30


def memory_plan(n: int, tree_count: int | None = None, rank: int | None = None,
                mode: str | None = None, backend: str | None = None,
                retention: float = DEFAULT_RETENTION,
                n_features: int = PLAN_FEATURES, maxnode: int = PLAN_MAXNODE,
                n_classes: int = PLAN_CLASSES) -> dict:
    """Closed-form byte counts for every storage strategy plus feasibility
    verdicts at 32 GiB and 12 GiB budgets.

    The full-matrix headline is the square-matrix convention 8*n^2; the
    packed triangle is also reported.  Low-rank sizes are reported in both
    the two-factor convention (headline) and the symmetric single-factor
    convention actually stored here.
    """
    if n < 1:
        raise DataError("memory_plan needs n >= 1")
    full_headline = 8 * n * n
    full_packed = 8 * _packed_len(n)
    triblock = int(full_headline * 0.5 * retention)

    def lowrank_bytes(r, m):
        return {"two_factor": int(2 * n * r * BYTES_PER_ELEMENT[m]),
                "single_factor": int(n * r * BYTES_PER_ELEMENT[m])}

    lowrank_table = {m: lowrank_bytes(32, m) for m in MODES}
    requested = None
    if rank is not None and mode is not None:
        requested = lowrank_bytes(rank, mode)

    B = tree_count if tree_count is not None else 10_000
    model = {
        "training_data": n * n_features * 4,
        "tree_structures": 2 * maxnode * B * 4,
        "node_status": maxnode * B * 4,
        "split_values": maxnode * B * 4,
        "split_variables": maxnode * B * 4,
        "node_classes": maxnode * B * 4,
        "class_populations": n_classes * maxnode * B * 4,
        "oob_tracking": n * n_classes * 4,
    }
    model["subtotal"] = sum(model.values())
    importance = {
        "overall": n_features * 4,
        "local_per_sample": n * 4,
        "local_matrix": n * n_features * 4,
        "importance_sd": n_features * 4,
    }
    importance["subtotal"] = sum(importance.values())

    candidates = {
        "full": full_headline,
        "triblock": triblock,
        "lowrank_i8_r32": lowrank_table["i8"]["two_factor"],
        "lowrank_nf4_r32": lowrank_table["nf4"]["two_factor"],
    }
    # feasibility requires headroom for OS/runtime overhead
    feasible_32gb = {k: v <= 0.8 * 32 * GiB for k, v in candidates.items()}
    feasible_12gb = {k: v <= 0.8 * 12 * GiB for k, v in candidates.items()}

    if n <= 5000:
        recommended = "full or triblock"
    elif feasible_32gb["triblock"]:
        recommended = "triblock"
    else:
        recommended = "lowrank (i8 for speed, nf4 for minimum memory)"

    plan = {
        "samples": n,
        "trees": B,
        "full_headline_bytes": full_headline,
        "full_packed_bytes": full_packed,
        "triblock_bytes": triblock,
        "triblock_retention": retention,
        "lowrank_r32_bytes": {m: lowrank_table[m] for m in MODES},
        "model": model,
        "importance": importance,
        "feasible_32gb": feasible_32gb,
        "feasible_12gb": feasible_12gb,
        "recommended": recommended,
    }
    if requested is not None:
        plan["requested"] = {
            "backend": backend or "lowrank",
            "rank": rank,
            "mode": mode,
            "bytes": requested,
            "compression_vs_full": full_headline / max(requested["two_factor"], 1),
        }
    elif backend is not None:
        chosen = {"full": full_packed, "triblock": triblock}.get(backend)
        if chosen is not None:
            plan["requested"] = {
                "backend": backend,
                "bytes": {"stored": chosen},
                "compression_vs_full": full_headline / max(chosen, 1),
            }
    return plan


# ---------------------------------------------------------------------------
# Serialization: factor file "RFXQ", packed triangle "RFXP", TriBlock "RFXT"
# ---------------------------------------------------------------------------

_MODE_CODES = {"f32": 0, "f16": 1, "i8": 2, "nf4": 3}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}


def lowrank_to_bytes(rep: LowRankQuantized) -> bytes:
    buf = io.BytesIO()
    buf.write(b"RFXQ")
    buf.write(struct.pack("<IIIBB2xId", 1, rep.n, rep.rank,
                          _MODE_CODES[rep.mode],
                          1 if rep.rank_degraded else 0,
                          rep.tree_count, rep.pmax))
    qf = rep.factor
    if rep.mode == "f32":
        buf.write(np.ascontiguousarray(qf.data, dtype="<f4").tobytes())
    elif rep.mode == "f16":
        buf.write(np.ascontiguousarray(qf.data, dtype="<f2").tobytes())
    elif rep.mode == "i8":
        buf.write(np.ascontiguousarray(qf.scales, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(qf.data, dtype="<i1").tobytes())
    else:
        buf.write(struct.pack("<Q", qf.scales.shape[0]))
        buf.write(np.ascontiguousarray(qf.scales, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(qf.data, dtype="<u1").tobytes())
    return buf.getvalue()


def lowrank_from_bytes(data: bytes) -> LowRankQuantized:
    if data[:4] != b"RFXQ":
        raise DataError(f"not a factor file (magic {data[:4]!r})")
    version, n, rank, mode_code, degraded, tree_count, pmax = struct.unpack_from(
        "<IIIBB2xId", data, 4)
    if version != 1:
        raise DataError(f"unsupported factor format version {version}")
    mode = _MODE_NAMES[mode_code]
    pos = 4 + struct.calcsize("<IIIBB2xId")
    shape = (n, rank)
    if mode == "f32":
        arr = np.frombuffer(data, dtype="<f4", count=n * rank, offset=pos)
        qf = QuantFactor(mode, shape, arr.reshape(shape).copy())
    elif mode == "f16":
        arr = np.frombuffer(data, dtype="<f2", count=n * rank, offset=pos)
        qf = QuantFactor(mode, shape, arr.reshape(shape).copy())
    elif mode == "i8":
        scales = np.frombuffer(data, dtype="<f8", count=rank, offset=pos).copy()
        pos += 8 * rank
        arr = np.frombuffer(data, dtype="<i1", count=n * rank, offset=pos)
        qf = QuantFactor(mode, shape, arr.reshape(shape).copy(), scales)
    else:
        (nb,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        scales = np.frombuffer(data, dtype="<f8", count=nb, offset=pos).copy()
        pos += 8 * nb
        from .quantize import NF4_BLOCK
        packed_len = nb * NF4_BLOCK // 2
        arr = np.frombuffer(data, dtype="<u1", count=packed_len, offset=pos).copy()
        qf = QuantFactor(mode, shape, arr, scales)
    return LowRankQuantized(n=n, rank=rank, mode=mode, factor=qf, pmax=pmax,
                            tree_count=tree_count, rank_degraded=bool(degraded))


def fulltriangle_to_bytes(rep: FullTriangle) -> bytes:
    buf = io.BytesIO()
    buf.write(b"RFXP")
    buf.write(struct.pack("<III", 1, rep.n, rep.tree_count))
    buf.write(np.ascontiguousarray(rep.packed, dtype="<f8").tobytes())
    return buf.getvalue()


def fulltriangle_from_bytes(data: bytes) -> FullTriangle:
    if data[:4] != b"RFXP":
        raise DataError(f"not a packed-triangle file (magic {data[:4]!r})")
    version, n, tree_count = struct.unpack_from("<III", data, 4)
    if version != 1:
        raise DataError(f"unsupported triangle format version {version}")
    pos = 4 + 12
    packed = np.frombuffer(data, dtype="<f8", count=_packed_len(n), offset=pos).copy()
    return FullTriangle(n=n, tree_count=tree_count, packed=packed)


def triblock_to_bytes(rep: TriBlock) -> bytes:
    buf = io.BytesIO()
    buf.write(b"RFXT")
    buf.write(struct.pack("<IIIdQQ", 1, rep.n, rep.tree_count, rep.tau,
                          rep.dense_count, rep.sparse_count))
    if rep.dense_count:
        keys = sorted(rep.dense)
        di = np.array([k[0] for k in keys], dtype="<i4")
        dj = np.array([k[1] for k in keys], dtype="<i4")
        dv = np.array([rep.dense[k] for k in keys], dtype="<f8")
    else:
        di = np.empty(0, dtype="<i4")
        dj = np.empty(0, dtype="<i4")
        dv = np.empty(0, dtype="<f8")
    for arr in (di, dj, dv):
        buf.write(arr.tobytes())
    buf.write(np.ascontiguousarray(rep.sparse_i, dtype="<i4").tobytes())
    buf.write(np.ascontiguousarray(rep.sparse_j, dtype="<i4").tobytes())
    buf.write(np.ascontiguousarray(rep.sparse_v, dtype="<f8").tobytes())
    return buf.getvalue()


def triblock_from_bytes(data: bytes) -> TriBlock:
    if data[:4] != b"RFXT":
        raise DataError(f"not a triblock file (magic {data[:4]!r})")
    version, n, tree_count, tau, n_dense, n_sparse = struct.unpack_from(
        "<IIIdQQ", data, 4)
    if version != 1:
        raise DataError(f"unsupported triblock format version {version}")
    pos = 4 + struct.calcsize("<IIIdQQ")
    di = np.frombuffer(data, dtype="<i4", count=n_dense, offset=pos)
    pos += 4 * n_dense
    dj = np.frombuffer(data, dtype="<i4", count=n_dense, offset=pos)
    pos += 4 * n_dense
    dv = np.frombuffer(data, dtype="<f8", count=n_dense, offset=pos)
    pos += 8 * n_dense
    si = np.frombuffer(data, dtype="<i4", count=n_sparse, offset=pos).copy()
    pos += 4 * n_sparse
    sj = np.frombuffer(data, dtype="<i4", count=n_sparse, offset=pos).copy()
    pos += 4 * n_sparse
    sv = np.frombuffer(data, dtype="<f8", count=n_sparse, offset=pos).copy()
    dense = {(int(a), int(b)): float(v) for a, b, v in zip(di, dj, dv)}
    return TriBlock(n=n, tree_count=tree_count, tau=tau, dense=dense,
                    sparse_i=si.astype(np.int32), sparse_j=sj.astype(np.int32),
                    sparse_v=sv)


def save_proximity(rep, path) -> None:
    if isinstance(rep, FullTriangle):
        data = fulltriangle_to_bytes(rep)
    elif isinstance(rep, TriBlock):
        data = triblock_to_bytes(rep)
    elif isinstance(rep, LowRankQuantized):
        data = lowrank_to_bytes(rep)
    else:
        raise RfxError(f"cannot serialize {type(rep)!r}")
    with open(path, "wb") as fh:
        fh.write(data)


def load_proximity(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:4]
    if magic == b"RFXP":
        return fulltriangle_from_bytes(data)
    if magic == b"RFXT":
        return triblock_from_bytes(data)
    if magic == b"RFXQ":
        return lowrank_from_bytes(data)
    raise DataError(f"unrecognized proximity file (magic {magic!r})")


def export_triblock_csv(rep: TriBlock, csv_path, summary_path) -> None:
    """Dense tier as (i, j, value) CSV plus a tier-population summary JSON."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for (i, j) in sorted(rep.dense):
            writer.writerow([i, j, f"{rep.dense[(i, j)]:.10g}"])
    summary = {
        "n": rep.n,
        "trees": rep.tree_count,
        "tau": rep.tau,
        "dense_pairs": rep.dense_count,
        "sparse_pairs": rep.sparse_count,
        "zero_pairs": _packed_len(rep.n) - rep.stored_pairs,
        "compression_ratio": rep.compression_ratio(),
    }
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
