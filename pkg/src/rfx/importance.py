"""Importance measures: impurity-based overall importance, permutation
importance with per-tree spread, and the per-sample local importance matrix,
each with a casewise (tnodewt-weighted) variant.

Permutation protocol: for tree b and feature j, the tree's OOB samples
receive feature-j values permuted among themselves, drawn from the PCG32
stream seeded ``iseed + B + b*p + j``.  The same draw serves both the overall
permutation scores and the local matrix, so the two reconcile by
construction.  Per-sample terms use the signed damage
``1(original correct) - 1(permuted correct)`` so that helpful features score
positive.

Casewise weighting (tnodewt): a sample's contribution in tree b is scaled by
the average in-bag multiplicity inside its terminal node of tree b, i.e.
bootstrap-weighted leaf population over distinct leaf population.  Under
uniform bootstrap counts every weight is exactly 1 and casewise equals
non-casewise.
"""

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import map_in_order
from .dataset import Dataset
from .errors import DataError
from .forest import BATCH_SIZE, Forest, gini
from .rng import SEQ_PERMUTE

logger = logging.getLogger(__name__)


@dataclass
class ImportanceReport:
    feature_names: tuple
    overall_perm: np.ndarray       # (p,) mean permutation score across trees
    overall_perm_sd: np.ndarray    # (p,) spread across trees (n-1 denominator)
    overall_gini: np.ndarray       # (p,) normalized to sum 1
    local: np.ndarray              # (n, p)
    casewise: bool
    trees_used: int
    uncovered: np.ndarray          # samples with no OOB trees (zero local rows)
    gini_degenerate: bool = False  # forest had zero total impurity decrease


def _check(forest: Forest, dataset: Dataset):
    if forest.n != dataset.n or forest.p != dataset.p:
        raise DataError("forest and dataset shapes disagree")


def gini_importance(forest: Forest):
    """Per-feature impurity decrease summed over every split, averaged over
    trees, normalized to sum 1.

    Returns (vector, degenerate_flag); a forest with zero total decrease
    yields the uniform vector with the flag set.
    """
    p = forest.p
    total = np.zeros(p, dtype=np.float64)
    for tree in forest.trees:
        internal = np.nonzero(tree.status == 0)[0]
        for node in internal:
            l = tree.left[node]
            r = tree.right[node]
            w = tree.node_weight[node]
            wl = tree.node_weight[l]
            wr = tree.node_weight[r]
            delta = (gini(tree.class_pops[node])
                     - (wl / w) * gini(tree.class_pops[l])
                     - (wr / w) * gini(tree.class_pops[r]))
            total[tree.split_var[node]] += delta
    total /= forest.ntree
    s = total.sum()
    if s <= 0:
        logger.warning("forest has zero total impurity decrease; "
                       "returning uniform importance")
        return np.full(p, 1.0 / p), True
    return total / s, False


def _permutation_pass(forest: Forest, dataset: Dataset, identity_perms=False):
    """One pass over all (tree, feature) pairs.

    Returns (scores, scores_cw, vsum, vsum_cw, oob_tree_count, included)
    where scores/scores_cw are (B, p) per-tree sums, vsum/vsum_cw are (n, p)
    per-sample sums over the sample's OOB trees, oob_tree_count is |OOB_i|,
    and included marks trees with >= 2 OOB samples.
    """
    _check(forest, dataset)
    B, n, p = forest.ntree, forest.n, forest.p
    iseed = forest.config.iseed
    values = dataset.values
    labels = dataset.labels
    counts = forest.bootstrap.counts

    def run_tree(b: int):
        tree = forest.trees[b]
        scores = np.zeros(p, dtype=np.float64)
        scores_cw = np.zeros(p, dtype=np.float64)
        vsum = np.zeros((n, p), dtype=np.float64)
        vsum_cw = np.zeros((n, p), dtype=np.float64)
        inbag = counts[b]
        n_oob = int((inbag == 0).sum())
        if n_oob >= 2:
            _kernels.importance_tree_kernel(
                tree.status, tree.split_var, tree.threshold, tree.cat_mask,
                tree.left, tree.right, tree.node_class, tree.node_raw,
                tree.node_weight, forest.col_cat, values, labels, inbag,
                iseed + B + b * p, SEQ_PERMUTE,
                1 if identity_perms else 0,
                scores, scores_cw, vsum, vsum_cw)
        return scores, scores_cw, vsum, vsum_cw, n_oob

    scores = np.zeros((B, p), dtype=np.float64)
    scores_cw = np.zeros((B, p), dtype=np.float64)
    vsum = np.zeros((n, p), dtype=np.float64)
    vsum_cw = np.zeros((n, p), dtype=np.float64)
    included = np.zeros(B, dtype=bool)
    # batched so at most one batch of per-tree (n, p) buffers is alive
    batch = min(BATCH_SIZE, B)
    for lo in range(0, B, batch):
        ids = range(lo, min(lo + batch, B))
        for b, (s, s_cw, v, v_cw, n_oob) in zip(ids, map_in_order(run_tree, ids)):
            scores[b] = s
            scores_cw[b] = s_cw
            vsum += v
            vsum_cw += v_cw
            included[b] = n_oob >= 2
    oob_tree_count = (counts == 0).sum(axis=0).astype(np.int64)
    return scores, scores_cw, vsum, vsum_cw, oob_tree_count, included


def permutation_importance(forest: Forest, dataset: Dataset, casewise=False,
                           _identity_permutations=False):
    """Per-feature mean and sd across trees of the per-tree raw score
    (correct OOB count minus correct count after permuting the feature).

    Trees with fewer than two OOB samples contribute zero to the mean and are
    excluded from the sd.
    """
    scores, scores_cw, _, _, _, included = _permutation_pass(
        forest, dataset, identity_perms=_identity_permutations)
    sel = scores_cw if casewise else scores
    mean = sel.mean(axis=0)
    n_inc = int(included.sum())
    if n_inc >= 2:
        sd = sel[included].std(axis=0, ddof=1)
    else:
        sd = np.zeros(forest.p)
    return mean, sd


def local_importance(forest: Forest, dataset: Dataset, casewise=False,
                     _identity_permutations=False):
    """The (n, p) matrix of per-sample permutation damage, averaged over each
    sample's OOB trees.  Rows of samples never out-of-bag are zero.

    Returns (matrix, uncovered_indices).
    """
    _, _, vsum, vsum_cw, oob_count, _ = _permutation_pass(
        forest, dataset, identity_perms=_identity_permutations)
    sel = vsum_cw if casewise else vsum
    denom = np.maximum(oob_count, 1)[:, None]
    V = sel / denom
    uncovered = np.nonzero(oob_count == 0)[0]
    if len(uncovered):
        logger.info("%d samples never out-of-bag; their local rows are zero",
                    len(uncovered))
    return V, uncovered


def compute_report(forest: Forest, dataset: Dataset, casewise=False) -> ImportanceReport:
    """All importance measures in one pass over the forest."""
    scores, scores_cw, vsum, vsum_cw, oob_count, included = _permutation_pass(
        forest, dataset)
    sel = scores_cw if casewise else scores
    mean = sel.mean(axis=0)
    n_inc = int(included.sum())
    sd = sel[included].std(axis=0, ddof=1) if n_inc >= 2 else np.zeros(forest.p)
    vs = vsum_cw if casewise else vsum
    V = vs / np.maximum(oob_count, 1)[:, None]
    g, degenerate = gini_importance(forest)
    return ImportanceReport(
        feature_names=tuple(dataset.feature_names),
        overall_perm=mean,
        overall_perm_sd=sd,
        overall_gini=g,
        local=V,
        casewise=casewise,
        trees_used=forest.ntree,
        uncovered=np.nonzero(oob_count == 0)[0],
        gini_degenerate=degenerate,
    )


def write_report_csv(report: ImportanceReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "gini", "perm_mean", "perm_sd"])
        for j, name in enumerate(report.feature_names):
            writer.writerow([name,
                             f"{report.overall_gini[j]:.10g}",
                             f"{report.overall_perm[j]:.10g}",
                             f"{report.overall_perm_sd[j]:.10g}"])


def write_report_json(report: ImportanceReport, path) -> None:
    doc = {
        "features": list(report.feature_names),
        "gini": report.overall_gini.tolist(),
        "perm_mean": report.overall_perm.tolist(),
        "perm_sd": report.overall_perm_sd.tolist(),
        "local": report.local.tolist(),
        "casewise": report.casewise,
        "trees_used": report.trees_used,
        "uncovered_samples": report.uncovered.tolist(),
        "gini_degenerate": report.gini_degenerate,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
