"""VizBundle assembly: the one JSON artifact the exploration UI consumes.

Arrays are row-per-sample throughout; every block is index-aligned so a
selection made on any panel maps to the same sample everywhere.  Per-tree
vote detail (the heatmap's raw material) is included only for forests up to
``VOTE_DETAIL_MAX_TREES`` trees; beyond that the per-class vote fractions
stand in.
"""

import json
from importlib import resources

import jsonschema
import numpy as np

from .dataset import Dataset
from .errors import DataError
from .forest import Forest, classify_all
from .importance import ImportanceReport
from .mds import MdsEmbedding
from .rng import SEQ_SAMPLE, Pcg32

#: forests larger than this export per-class fractions only
VOTE_DETAIL_MAX_TREES = 500

BUNDLE_VERSION = 1


def _schema() -> dict:
    text = (resources.files("rfx") / "schemas" / "vizbundle.schema.json").read_text()
    return json.loads(text)


def validate_bundle(doc: dict) -> None:
    """Schema-validate a bundle; raises DataError naming the failing field."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "(root)"
        raise DataError(f"bundle schema violation at {path}: {e.message}") from None


def sample_indices(n: int, size: int, labels=None, seed: int = 0) -> np.ndarray:
    """Deterministic subsample of size rows: uniform, or per-class stratified
    when labels are given."""
    if size >= n:
        return np.arange(n, dtype=np.int64)
    rng = Pcg32(seed, SEQ_SAMPLE)
    if labels is None:
        perm = rng.permutation(n)
        return np.sort(perm[:size])
    labels = np.asarray(labels)
    classes = np.unique(labels)
    picked: list = []
    # proportional allocation, remainders to the largest classes
    counts = np.array([(labels == c).sum() for c in classes], dtype=np.int64)
    alloc = (counts * size) // n
    short = size - int(alloc.sum())
    order = np.argsort(counts)[::-1]
    for idx in order[:short]:
        alloc[idx] += 1
    for c, take in zip(classes, alloc):
        members = np.nonzero(labels == c)[0]
        perm = rng.permutation(len(members))
        picked.append(members[perm[:take]])
    return np.sort(np.concatenate(picked))


def build_bundle(forest: Forest, dataset: Dataset, report: ImportanceReport,
                 embedding: MdsEmbedding, outliers: np.ndarray,
                 backend: str, subset=None) -> dict:
    """Assemble and validate the bundle dict.

    ``subset``, when given, restricts every per-sample block to those row
    indices (original ids preserved in sample_ids).
    """
    n = dataset.n
    if embedding.n != n or len(outliers) != n or report.local.shape[0] != n:
        raise DataError("bundle inputs disagree on sample count")

    idx = np.arange(n, dtype=np.int64) if subset is None else np.asarray(subset)
    votes = forest.oob_votes[idx]
    totals = votes.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        fractions = np.where(totals > 0, votes / totals, 0.0)
    preds = np.where(totals[:, 0] > 0, votes.argmax(axis=1), -1)

    coords = embedding.coordinates[idx]
    if coords.shape[1] < 3:
        coords = np.hstack([coords, np.zeros((len(idx), 3 - coords.shape[1]))])

    per_tree = None
    if forest.ntree <= VOTE_DETAIL_MAX_TREES:
        sub_values = np.asfortranarray(dataset.values[idx])
        cols = []
        for tree in forest.trees:
            leaves = classify_all(tree, sub_values)
            cols.append(tree.node_class[leaves])
        per_tree = np.column_stack(cols).tolist()

    doc = {
        "version": BUNDLE_VERSION,
        "n": int(len(idx)),
        "feature_names": list(dataset.feature_names),
        "feature_kinds": [c.kind for c in dataset.columns],
        "features": dataset.values[idx].tolist(),
        "labels": dataset.labels[idx].tolist(),
        "class_names": list(dataset.class_names),
        "oob_predictions": preds.tolist(),
        "vote_fractions": fractions.tolist(),
        "per_tree_votes": per_tree,
        "local_importance": report.local[idx].tolist(),
        "mds_coordinates": coords[:, :3].tolist(),
        "mds_eigenvalues": embedding.eigenvalues.tolist(),
        "outlier_scores": outliers[idx].tolist(),
        "sample_ids": idx.tolist(),
        "metadata": {
            "trees": int(forest.ntree),
            "seed": int(forest.config.iseed),
            "backend": backend,
            "casewise": bool(report.casewise),
            "sampled": subset is not None,
        },
    }
    validate_bundle(doc)
    return doc


def write_bundle(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
