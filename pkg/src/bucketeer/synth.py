"""Synthetic collections with planted cluster structure and ground-truth labels.

Each generated image belongs to exactly one cluster. Abstract vectors are the
cluster mean plus Gaussian noise, so nearest-neighbor structure follows the
clusters. Concept vectors put high weight on a per-cluster signature block of
concept indices, so clusters are linearly separable in concept space; with
paired signatures two neighboring clusters share a block and stay separable
only through their abstract vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .dataset import Collection, CollectionManifest


@dataclass
class SynthConfig:
    n: int = 10_000
    clusters: int = 8
    d_abs: int = 64
    d_con: int = 128
    t: int = 25
    seed: int = 0
    noise: float = 0.35
    # Per-cluster share of the collection; uniform when empty. Lets tests
    # plant small "needle" clusters at e.g. 5% prevalence.
    weights: list[float] = field(default_factory=list)
    # Consecutive cluster pairs (0,1), (2,3), ... share one concept signature,
    # so the linear model cannot tell them apart while abstract vectors still
    # separate them. Models the gap between annotation and visual similarity.
    paired_signatures: bool = False

    def signature_groups(self) -> int:
        return (self.clusters + 1) // 2 if self.paired_signatures else self.clusters

    def validate(self) -> None:
        if self.clusters < 1:
            raise ValueError("clusters must be >= 1")
        if self.n < self.clusters:
            raise ValueError(f"n={self.n} smaller than clusters={self.clusters}")
        if self.weights and len(self.weights) != self.clusters:
            raise ValueError(f"expected {self.clusters} weights, got {len(self.weights)}")
        if self.weights and (min(self.weights) <= 0 or abs(sum(self.weights) - 1.0) > 1e-9):
            raise ValueError("weights must be positive and sum to 1")
        if self.d_con < self.signature_groups():
            raise ValueError("d_con must be >= signature groups (one block each)")


def _cluster_sizes(cfg: SynthConfig) -> np.ndarray:
    """Deterministic integer split of n across clusters (largest remainders)."""
    weights = np.asarray(cfg.weights if cfg.weights else [1.0 / cfg.clusters] * cfg.clusters)
    exact = weights * cfg.n
    sizes = np.floor(exact).astype(np.int64)
    remainder = cfg.n - int(sizes.sum())
    if remainder > 0:
        frac_order = np.lexsort((np.arange(cfg.clusters), -(exact - sizes)))
        sizes[frac_order[:remainder]] += 1
    # every cluster gets at least one member
    while (sizes == 0).any():
        sizes[int(np.argmin(sizes))] += 1
        sizes[int(np.argmax(sizes))] -= 1
    return sizes


def generate(cfg: SynthConfig) -> tuple[Collection, dict]:
    """Build a synthetic collection and its ground-truth label document.

    Returns (collection, labels) where labels holds the cluster dictionary
    and one label-index list per image.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    sizes = _cluster_sizes(cfg)
    labels_per_image = np.repeat(np.arange(cfg.clusters), sizes)
    # Shuffle so cluster members are spread across the id range.
    perm = rng.permutation(cfg.n)
    labels_per_image = labels_per_image[perm]

    means = rng.normal(0.0, 1.0, size=(cfg.clusters, cfg.d_abs))
    abstract = means[labels_per_image] + rng.normal(0.0, cfg.noise, size=(cfg.n, cfg.d_abs))
    abstract = abstract.astype(np.float32)

    # Signature blocks: contiguous, equal-width slices of the concept axis.
    block = cfg.d_con // cfg.signature_groups()
    sig_width = min(block, cfg.t)
    n_bg = min(cfg.t - sig_width, cfg.d_con - sig_width)
    per_row = sig_width + n_bg
    idx_mat = np.empty((cfg.n, per_row), dtype=np.int32)
    val_mat = np.empty((cfg.n, per_row), dtype=np.float64)
    for c in range(cfg.clusters):
        rows = np.flatnonzero(labels_per_image == c)
        m = rows.shape[0]
        group = c // 2 if cfg.paired_signatures else c
        sig_idx = np.arange(group * block, group * block + sig_width, dtype=np.int32)
        idx_mat[rows, :sig_width] = sig_idx
        val_mat[rows, :sig_width] = rng.uniform(0.55, 1.0, size=(m, sig_width))
        if n_bg:
            pool = np.setdiff1d(np.arange(cfg.d_con, dtype=np.int32), sig_idx)
            # Random argsort keys pick n_bg distinct pool entries per row.
            for start in range(0, m, 65536):
                sl = rows[start : start + 65536]
                keys = rng.random((sl.shape[0], pool.shape[0]))
                picks = np.argsort(keys, axis=1)[:, :n_bg]
                idx_mat[sl, sig_width:] = pool[picks]
            val_mat[rows, sig_width:] = rng.uniform(0.01, 0.2, size=(m, n_bg))
    order = np.argsort(idx_mat, axis=1)
    idx_mat = np.take_along_axis(idx_mat, order, axis=1)
    val_mat = np.take_along_axis(val_mat, order, axis=1)
    concepts = sparse.csr_matrix(
        (val_mat.ravel(), idx_mat.ravel(), np.arange(cfg.n + 1, dtype=np.int64) * per_row),
        shape=(cfg.n, cfg.d_con),
    )

    dictionary = [f"cluster-{c}" for c in range(cfg.clusters)]
    labels = {
        "dictionary": dictionary,
        "assignments": [[int(labels_per_image[i])] for i in range(cfg.n)],
    }
    collection = Collection(abstract=abstract, concepts=concepts, t=cfg.t, name=f"synth-{cfg.seed}")
    return collection, labels


def generate_to_dir(cfg: SynthConfig, out_dir: str | Path) -> CollectionManifest:
    """Generate, persist feature files + manifest + labels.json, return manifest."""
    collection, labels = generate(cfg)
    out = Path(out_dir)
    manifest = collection.save(out)
    (out / "labels.json").write_text(json.dumps(labels) + "\n")
    return manifest
