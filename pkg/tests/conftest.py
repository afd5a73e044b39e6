"""Shared fixtures: a small synthetic collection with its index and labels."""

import numpy as np
import pytest

from bucketeer.harness import GroundTruth
from bucketeer.pq import PQIndex, PQParams, build_knn_matrix
from bucketeer.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def small_world():
    """500 images, 4 planted clusters, plus index and neighbor matrix."""
    collection, labels_doc = generate(
        SynthConfig(n=500, clusters=4, d_abs=16, d_con=48, t=10, seed=42)
    )
    index = PQIndex.build(
        np.asarray(collection.abstract),
        PQParams(m=4, k_cap=16, seed=7, train_sample=500, kmeans_iters=12),
    )
    knn = build_knn_matrix(index, neighbors=6)
    truth = GroundTruth.from_doc(labels_doc)
    return collection, index, knn, truth
