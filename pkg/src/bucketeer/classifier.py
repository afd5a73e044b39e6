"""Per-bucket linear classifiers over sparse concept features.

Training sets are assembled fresh each time from session state: bucket members
as positives (optionally pruned), explicit rejections plus discard plus random
collection fill as negatives. The model itself is a deterministic full-batch
subgradient fit of an L2-regularized hinge loss; feature scaling is folded
back into the stored weights so scoring uses raw features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

PRUNING_MODES = ("all", "rf", "al", "hybrid")


@dataclass
class TrainingConfig:
    pruning: str = "all"
    n_tr: int = 1000
    negative_ratio: int = 2
    reg_strength: float = 1.0
    epochs: int = 200

    def validate(self) -> None:
        if self.pruning not in PRUNING_MODES:
            raise ValueError(f"pruning must be one of {PRUNING_MODES}, got {self.pruning!r}")
        if self.n_tr < 2:
            raise ValueError("n_tr must be >= 2 (hybrid splits it in half)")
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")


@dataclass
class LinearModel:
    weights: np.ndarray  # dense float64, concept space
    bias: float
    trained_round: int = 0
    n_pos: int = 0
    n_neg: int = 0

    def to_doc(self) -> dict:
        nz = np.flatnonzero(self.weights)
        return {
            "d": int(self.weights.shape[0]),
            "idx": nz.tolist(),
            "val": self.weights[nz].tolist(),
            "bias": float(self.bias),
            "trained_round": self.trained_round,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LinearModel":
        weights = np.zeros(int(doc["d"]), dtype=np.float64)
        weights[np.asarray(doc["idx"], dtype=np.int64)] = np.asarray(doc["val"], dtype=np.float64)
        return cls(
            weights=weights,
            bias=float(doc["bias"]),
            trained_round=int(doc["trained_round"]),
            n_pos=int(doc["n_pos"]),
            n_neg=int(doc["n_neg"]),
        )


def prune_positives(member_ids: list[int], prev_scores: np.ndarray | None, cfg: TrainingConfig) -> np.ndarray:
    """Trim the positive set to n_tr according to the pruning mode.

    rf keeps the highest-scored members, al the lowest-scored ones, hybrid the
    union of half of each. Without a previous model there is nothing to rank
    by, so everything is kept.
    """
    ids = np.asarray(sorted(member_ids), dtype=np.int64)
    if cfg.pruning == "all" or prev_scores is None or ids.shape[0] <= cfg.n_tr:
        return ids
    scores = prev_scores[ids]
    by_high = ids[np.lexsort((ids, -scores))]
    by_low = ids[np.lexsort((ids, scores))]
    if cfg.pruning == "rf":
        keep = by_high[: cfg.n_tr]
    elif cfg.pruning == "al":
        keep = by_low[: cfg.n_tr]
    else:  # hybrid
        half_high = cfg.n_tr - cfg.n_tr // 2
        keep = np.union1d(by_high[:half_high], by_low[: cfg.n_tr // 2])
    return np.sort(keep)


def assemble_negatives(
    rejected_ids,
    discard_ids,
    n_images: int,
    forbidden: set[int],
    target: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Collect negative example ids in priority order.

    Every explicit rejection is used; the set is then topped up to the target
    from the discard pile and finally from the collection at large. Nothing in
    `forbidden` (the bucket's members) is ever selected.
    """
    chosen: list[np.ndarray] = []
    taken: set[int] = set(forbidden)

    rejected = np.asarray(sorted({int(i) for i in rejected_ids if int(i) not in taken}), dtype=np.int64)
    chosen.append(rejected)
    taken.update(rejected.tolist())
    have = rejected.shape[0]

    if have < target:
        pool = np.asarray(sorted({int(i) for i in discard_ids if int(i) not in taken}), dtype=np.int64)
        take = min(target - have, pool.shape[0])
        if take:
            picked = pool if pool.shape[0] == take else np.sort(rng.choice(pool, take, replace=False))
            chosen.append(picked)
            taken.update(picked.tolist())
            have += take

    if have < target:
        mask = np.zeros(n_images, dtype=bool)
        if taken:
            mask[np.fromiter(taken, dtype=np.int64)] = True
        pool = np.flatnonzero(~mask)
        take = min(target - have, pool.shape[0])
        if take:
            picked = pool if pool.shape[0] == take else np.sort(rng.choice(pool, take, replace=False))
            chosen.append(picked.astype(np.int64))

    return np.concatenate(chosen) if chosen else np.empty(0, dtype=np.int64)


def train_linear(X: sparse.csr_matrix, y: np.ndarray, cfg: TrainingConfig) -> LinearModel | None:
    """Deterministic full-batch subgradient fit of hinge loss + L2.

    Objective: 0.5*||w||^2 + C * mean(hinge). Steps are 1/t with tail
    averaging over the second half. Rows are scaled by their mean L2 norm
    during the fit and the scale is folded into the returned weights.
    """
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y disagree on row count")
    if not ((y > 0).any() and (y < 0).any()):
        return None
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    scale = float(norms.mean()) or 1.0
    Xs = (X * (1.0 / scale)).tocsr()
    XsT = Xs.T.tocsr()

    n, d = Xs.shape
    C = cfg.reg_strength
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    w_sum = np.zeros(d, dtype=np.float64)
    b_sum = 0.0
    tail_start = cfg.epochs // 2
    tail_n = 0
    for t in range(1, cfg.epochs + 1):
        margins = y * (Xs @ w + b)
        coef = np.where(margins < 1.0, y, 0.0)
        grad_w = w - (C / n) * (XsT @ coef)
        grad_b = -(C / n) * coef.sum()
        eta = 1.0 / t
        w -= eta * grad_w
        b -= eta * grad_b
        if t > tail_start:
            w_sum += w
            b_sum += b
            tail_n += 1
    w_avg = w_sum / tail_n
    b_avg = b_sum / tail_n
    return LinearModel(weights=w_avg / scale, bias=float(b_avg))


def score_collection(model: LinearModel, concepts: sparse.csr_matrix) -> np.ndarray:
    """Raw decision values for every image, float64."""
    return np.asarray(concepts @ model.weights, dtype=np.float64) + model.bias


def bucket_confidence(scores: np.ndarray, image_ids, member_ids) -> np.ndarray:
    """Confidence of images relative to the bucket's best-scoring member.

    Each score is divided by the maximum member score and clamped to [0, 1];
    a non-positive maximum collapses every confidence to zero. Callers must
    not invoke this without a trained model (confidence is undefined then).
    """
    member_ids = np.asarray(list(member_ids), dtype=np.int64)
    if member_ids.shape[0] == 0:
        raise ValueError("confidence needs at least one bucket member")
    denom = float(scores[member_ids].max())
    values = np.asarray(scores[np.asarray(list(image_ids), dtype=np.int64)], dtype=np.float64)
    if denom <= 0.0:
        return np.zeros(values.shape[0], dtype=np.float64)
    return np.clip(values / denom, 0.0, 1.0)


def archetypes(bucket, scores: np.ndarray | None, count: int) -> list[int]:
    """Most representative members: top-scored, or most recent without a model."""
    ids = np.asarray(bucket.member_ids(), dtype=np.int64)
    if ids.shape[0] == 0:
        return []
    if scores is None:
        by_recency = sorted(ids.tolist(), key=lambda i: -bucket.members[i].seq)
        return by_recency[:count]
    order = np.lexsort((ids, -scores[ids]))
    return ids[order[:count]].tolist()
