"""Classical MDS embeddings from proximity representations.

Two routes produce a 3-D embedding of the samples:

* :func:`mds_full`: exact route for small n: densify the proximity matrix,
  convert to distances (D = pmax - P), double-center, and take the top
  eigenpairs of the Gram matrix with a dense symmetric eigensolver.
* :func:`mds_lowrank`: factor route: power iteration with implicit
  deflation where every Gram matrix-vector product is evaluated from the
  low-rank factor Q (via :func:`gram_matvec`) without materializing any
  n x n matrix.

Both scale eigenvectors by sqrt(eigenvalue), so coordinate column k has
squared norm lambda_k and pairwise embedding distances approximate the
proximity-derived distances.
"""

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DataError, RfxError
from .proximity import FullTriangle, LowRankQuantized, TriBlock
from .rng import SEQ_POWER, Pcg32

logger = logging.getLogger(__name__)

#: largest n the dense route accepts by default
DEFAULT_ORACLE_BOUND = 5000

#: Hadamard-square matvec strategy: Khatri-Rao expansion below this r^2,
#: blockwise row streaming above
KHATRI_RAO_MAX = 4096
STREAM_BLOCK = 1024

#: embeddings stop at this many components
MAX_COMPONENTS = 8


@dataclass
class PowerIterConfig:
    max_iterations: int = 300
    tol: float = 1e-8
    k: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise DataError("tol must be positive")
        if not 1 <= self.k <= MAX_COMPONENTS:
            raise DataError(f"k must be in [1, {MAX_COMPONENTS}]")


@dataclass
class MdsEmbedding:
    """n x k coordinates plus the eigenpairs that produced them.

    ``residuals`` holds the relative eigenpair residual
    |G v - lambda v| / |lambda| per retained eigenpair; ``iterations`` the
    power-iteration count (0 for the dense route).  ``converged`` flags any
    eigenpair that hit the iteration cap.
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray

    @property
    def n(self) -> int:
        return self.coordinates.shape[0]

    @property
    def k(self) -> int:
        return self.coordinates.shape[1]


def _sign_fix(vec: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector orientation: largest-|component| positive."""
    idx = int(np.argmax(np.abs(vec)))
    return -vec if vec[idx] < 0 else vec


def _center_columns(mat: np.ndarray) -> np.ndarray:
    return mat - mat.mean(axis=0, keepdims=True)


def mds_full(prox, k: int = 3, oracle_bound: int = DEFAULT_ORACLE_BOUND) -> MdsEmbedding:
    """Dense-eigendecomposition MDS of a FullTriangle or TriBlock.

    D = pmax - P with pmax the maximum stored entry; G = -1/2 H D^(2) H.
    Retains the top-k eigenpairs with positive eigenvalues; fewer positive
    eigenvalues yield fewer columns with a notice.
    """
    if not isinstance(prox, (FullTriangle, TriBlock)):
        raise DataError("mds_full expects a FullTriangle or TriBlock")
    n = prox.n
    if not 1 <= k <= MAX_COMPONENTS:
        raise DataError(f"k must be in [1, {MAX_COMPONENTS}]")
    if n > oracle_bound:
        raise DataError(
            f"n={n} exceeds the dense-route bound {oracle_bound}; "
            "use the lowrank backend")
    P = prox.to_dense()
    pmax = float(P.max())
    D2 = (pmax - P) ** 2
    row_mean = D2.mean(axis=1, keepdims=True)
    col_mean = D2.mean(axis=0, keepdims=True)
    G = -0.5 * (D2 - row_mean - col_mean + D2.mean())

    lam, vecs = np.linalg.eigh(G)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vecs = vecs[:, order]

    k_pos = int(min(k, (lam > 0).sum()))
    if k_pos < k:
        logger.warning("only %d positive eigenvalues available; returning "
                       "%d coordinate columns instead of %d", k_pos, k_pos, k)
    coords = np.empty((n, k_pos), dtype=np.float64)
    residuals = np.empty(k_pos, dtype=np.float64)
    for c in range(k_pos):
        v = _sign_fix(vecs[:, c])
        coords[:, c] = np.sqrt(lam[c]) * v
        residuals[c] = np.linalg.norm(G @ v - lam[c] * v) / abs(lam[c])
    return MdsEmbedding(
        coordinates=coords,
        eigenvalues=lam[:k_pos].copy(),
        iterations=np.zeros(k_pos, dtype=np.int64),
        residuals=residuals,
        converged=np.ones(k_pos, dtype=bool),
    )


def _hadamard_square_matvec(Q: np.ndarray, u: np.ndarray, cache: dict) -> np.ndarray:
    """(P o P) u for P = Q Q^T, never forming P itself.

    Small ranks use the Khatri-Rao squared factor (r^2 columns); larger ranks
    stream reconstructed row blocks.
    """
    n, r = Q.shape
    if r * r <= KHATRI_RAO_MAX:
        K = cache.get("khatri_rao")
        if K is None:
            K = (Q[:, :, None] * Q[:, None, :]).reshape(n, r * r)
            cache["khatri_rao"] = K
        return K @ (K.T @ u)
    out = np.empty(n, dtype=np.float64)
    for lo in range(0, n, STREAM_BLOCK):
        hi = min(lo + STREAM_BLOCK, n)
        rows = Q[lo:hi] @ Q.T
        out[lo:hi] = (rows * rows) @ u
    return out


def gram_matvec(lowrank: LowRankQuantized, v: np.ndarray,
                _cache: dict | None = None) -> np.ndarray:
    """G v = -1/2 H (D^(2) (H v)) evaluated from the factors.

    D^(2) u expands to pmax^2 (sum u) 1 - 2 pmax (P u) + (P o P) u with
    P = Q Q^T; P u costs two thin products and (P o P) u goes through the
    Khatri-Rao or streaming path.  No n x n allocation.
    """
    Q = lowrank.dequantized()
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (lowrank.n,):
        raise DataError(f"vector length {v.shape} does not match n={lowrank.n}")
    cache = _cache if _cache is not None else {}
    pmax = lowrank.pmax
    u = v - v.mean()
    su = u.sum()
    Pu = Q @ (Q.T @ u)
    PPu = _hadamard_square_matvec(Q, u, cache)
    z = (pmax * pmax) * su - 2.0 * pmax * Pu + PPu
    w = z - z.mean()
    return -0.5 * w


def mds_lowrank(lowrank: LowRankQuantized,
                config: PowerIterConfig | None = None) -> MdsEmbedding:
    """Power iteration with implicit deflation on the factor-space Gram
    operator; one eigenpair at a time, Rayleigh-quotient eigenvalues.

    Convergence: max|v_new - sign-aligned v_old| < tol.  Hitting the
    iteration cap records the residual and continues (not fatal).  Retains
    positive eigenvalues only.
    """
    cfg = config or PowerIterConfig()
    n = lowrank.n
    cache: dict = {}

    found_vecs: list = []
    found_vals: list = []
    iters_out: list = []
    resid_out: list = []
    conv_out: list = []

    def deflated_matvec(x):
        y = gram_matvec(lowrank, x, _cache=cache)
        for lam_f, v_f in zip(found_vals, found_vecs):
            y -= lam_f * (v_f @ x) * v_f
        return y

    for comp in range(cfg.k):
        rng = Pcg32(cfg.seed + comp, SEQ_POWER)
        v = rng.normals(n)
        for v_f in found_vecs:
            v -= (v_f @ v) * v_f
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        v /= nv

        lam = 0.0
        converged = False
        it = 0
        for it in range(1, cfg.max_iterations + 1):
            w = deflated_matvec(v)
            for v_f in found_vecs:
                w -= (v_f @ w) * v_f
            lam = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                lam = 0.0
                converged = True
                break
            v_new = w / nw
            if v_new @ v < 0:
                v_new = -v_new
            delta = np.max(np.abs(v_new - v))
            v = v_new
            if delta < cfg.tol:
                converged = True
                break

        resid = np.linalg.norm(deflated_matvec(v) - lam * v)
        rel = resid / abs(lam) if lam != 0 else np.inf
        if not converged:
            logger.warning("power iteration for eigenpair %d stopped at the "
                           "%d-iteration cap (relative residual %.3g)",
                           comp, cfg.max_iterations, rel)
        if lam <= 0:
            logger.warning("eigenpair %d is non-positive (lambda=%.3g); "
                           "returning %d coordinate columns", comp, lam, comp)
            break
        found_vecs.append(v.copy())
        found_vals.append(lam)
        iters_out.append(it)
        resid_out.append(rel)
        conv_out.append(converged)

    k_used = len(found_vals)
    coords = np.empty((n, k_used), dtype=np.float64)
    for c in range(k_used):
        v = _sign_fix(found_vecs[c])
        coords[:, c] = np.sqrt(found_vals[c]) * v
    return MdsEmbedding(
        coordinates=coords,
        eigenvalues=np.array(found_vals, dtype=np.float64),
        iterations=np.array(iters_out, dtype=np.int64),
        residuals=np.array(resid_out, dtype=np.float64),
        converged=np.array(conv_out, dtype=bool),
    )


def mds_correlation(a: MdsEmbedding, b: MdsEmbedding) -> float:
    """Pearson correlation between the two embeddings' pairwise-distance
    vectors; invariant to rotation, reflection, and translation."""
    if a.n != b.n:
        raise DataError(f"embeddings disagree on n: {a.n} vs {b.n}")
    da = pdist(a.coordinates)
    db = pdist(b.coordinates)
    if da.std() == 0 or db.std() == 0:
        raise RfxError("zero-variance distance vector; correlation undefined")
    return float(np.corrcoef(da, db)[0, 1])


def embedding_to_csv(emb: MdsEmbedding, path, labels=None) -> None:
    """CSV export: sample_id, x, y, z (padded with 0 if k < 3), label."""
    coords = emb.coordinates
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "x", "y", "z", "label"])
        for i in range(emb.n):
            row = [i]
            for c in range(3):
                row.append(f"{coords[i, c]:.10g}" if c < emb.k else "0")
            row.append("" if labels is None else labels[i])
            writer.writerow(row)


def embedding_to_json(emb: MdsEmbedding, path) -> None:
    doc = {
        "coordinates": emb.coordinates.tolist(),
        "eigenvalues": emb.eigenvalues.tolist(),
        "iterations": emb.iterations.tolist(),
        "residuals": emb.residuals.tolist(),
        "converged": emb.converged.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def embedding_from_json(path) -> MdsEmbedding:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return MdsEmbedding(
        coordinates=np.asarray(doc["coordinates"], dtype=np.float64),
        eigenvalues=np.asarray(doc["eigenvalues"], dtype=np.float64),
        iterations=np.asarray(doc["iterations"], dtype=np.int64),
        residuals=np.asarray(doc["residuals"], dtype=np.float64),
        converged=np.asarray(doc["converged"], dtype=bool),
    )
