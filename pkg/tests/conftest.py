"""Shared fixtures: the Wine benchmark (via scikit-learn's bundled copy),
synthetic cluster data, and session-scoped trained forests reused across
test modules to keep the suite fast."""

import csv

import numpy as np
import pytest
from sklearn.datasets import load_wine

import rfx
from rfx import proximity as prox


@pytest.fixture(scope="session")
def wine_raw():
    return load_wine()


@pytest.fixture(scope="session")
def wine_ds(wine_raw):
    return rfx.from_arrays(wine_raw.data, wine_raw.target,
                           feature_names=tuple(wine_raw.feature_names))


@pytest.fixture(scope="session")
def wine_csv(tmp_path_factory, wine_raw):
    """Wine as a CSV file + its feature names, for loader and CLI tests.

    repr() keeps full float precision so reloads are bit-exact.
    """
    path = tmp_path_factory.mktemp("data") / "wine.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(wine_raw.feature_names) + ["cultivar"])
        for row, y in zip(wine_raw.data, wine_raw.target):
            writer.writerow([repr(float(v)) for v in row] + [f"class_{y}"])
    return path


@pytest.fixture(scope="session")
def forest500(wine_ds):
    return rfx.train(wine_ds, rfx.TrainConfig(ntree=500, iseed=17))


@pytest.fixture(scope="session")
def forest1000(wine_ds):
    return rfx.train(wine_ds, rfx.TrainConfig(ntree=1000, iseed=17))


@pytest.fixture(scope="session")
def membership1000(forest1000, wine_ds):
    return prox.leaf_membership(forest1000, wine_ds)


@pytest.fixture(scope="session")
def full1000(membership1000):
    return prox.full_proximity(membership1000)


def make_clusters(n_clusters, per_cluster, spread=0.05, seed=0, dims=4):
    """Well-separated Gaussian blobs; labels = cluster ids."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-10, 10, size=(n_clusters, dims))
    X = np.vstack([centers[c] + spread * rng.standard_normal((per_cluster, dims))
                   for c in range(n_clusters)])
    y = np.repeat(np.arange(n_clusters), per_cluster)
    return X, y


@pytest.fixture(scope="session")
def clusters_ds():
    X, y = make_clusters(4, 15, seed=3)
    return rfx.from_arrays(X, y)


@pytest.fixture(scope="session")
def clusters_forest(clusters_ds):
    return rfx.train(clusters_ds, rfx.TrainConfig(ntree=60, iseed=5))
