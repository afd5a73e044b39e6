"""Automated evaluation: ground-truth actors driving whole sessions.

An actor has a fixed notion of relevance (a map from annotation labels to
bucket names) and an error rate. Each round it receives suggestions, judges
every one (possibly wrongly), submits the feedback, and the harness logs
precision/recall per bucket plus wall time. Two runs with the same seeds
replay identically.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Collection
from .engine import Engine, EngineConfig
from .pq import PQIndex
from .session import DISCARD, SessionState

IGNORE = -2


class GroundTruth:
    """Label dictionary plus per-image label-index sets."""

    def __init__(self, dictionary: list[str], assignments: list[list[int]]):
        self.dictionary = list(dictionary)
        n_labels = len(self.dictionary)
        self.assignments: list[frozenset[int]] = []
        for i, labels in enumerate(assignments):
            for l in labels:
                if not 0 <= l < n_labels:
                    raise ValueError(f"image {i} carries unknown label index {l}")
            self.assignments.append(frozenset(int(l) for l in labels))

    @property
    def n(self) -> int:
        return len(self.assignments)

    def label_index(self, name: str) -> int:
        try:
            return self.dictionary.index(name)
        except ValueError:
            raise ValueError(f"label {name!r} not in dictionary") from None

    def images_with_label(self, label: int | str) -> set[int]:
        idx = self.label_index(label) if isinstance(label, str) else int(label)
        return {i for i, labels in enumerate(self.assignments) if idx in labels}

    @classmethod
    def from_doc(cls, doc: dict) -> "GroundTruth":
        return cls(doc["dictionary"], doc["assignments"])

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        return cls.from_doc(json.loads(Path(path).read_text()))


@dataclass
class ActorConfig:
    relevance: dict[str, str]  # annotation label -> bucket name
    err: float = 0.0
    metaphor: str = "grid"
    images_per_round: int | None = None
    budget: int = 900
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= len(set(self.relevance.values())) <= 7:
            raise ValueError("relevance must map to between 1 and 7 buckets")
        if not 0.0 <= self.err <= 1.0:
            raise ValueError("err must be in [0, 1]")
        if self.metaphor not in ("grid", "tetris"):
            raise ValueError(f"metaphor must be grid or tetris, got {self.metaphor!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    def round_size(self) -> int:
        if self.images_per_round is not None:
            return self.images_per_round
        return 25 if self.metaphor == "grid" else 1


def truthful_judgment(labels: frozenset[int], relevant: dict[int, int]) -> int:
    """The correct placement: matching bucket of the lowest label index, else discard."""
    matches = sorted(l for l in labels if l in relevant)
    return relevant[matches[0]] if matches else DISCARD


def actor_judge(
    labels: frozenset[int],
    relevant: dict[int, int],
    err: float,
    rng: np.random.Generator,
) -> int:
    """One judgment, wrong with probability err.

    Mistakes are uniform over three kinds: ignore the image, flip relevance
    (relevant items discarded, irrelevant ones put in a random bucket), or
    confuse buckets. Confusion needs a relevant image and at least two
    buckets; when inapplicable the kind is redrawn from the other two.
    """
    truth = truthful_judgment(labels, relevant)
    if err <= 0.0 or rng.random() >= err:
        return truth
    buckets = sorted(set(relevant.values()))
    confusable = truth != DISCARD and len(buckets) >= 2
    kind = int(rng.integers(3))
    if kind == 2 and not confusable:
        kind = int(rng.integers(2))
    if kind == 0:
        return IGNORE
    if kind == 1:
        if truth != DISCARD:
            return DISCARD
        return int(buckets[int(rng.integers(len(buckets)))])
    others = [b for b in buckets if b != truth]
    return int(others[int(rng.integers(len(others)))])


@dataclass
class RoundRecord:
    round: int
    processed: int
    macro_precision: float | None
    macro_recall: float | None
    per_bucket: dict[str, tuple[float | None, float | None]]
    suggest_seconds: float
    feedback_seconds: float


@dataclass
class MetricsLog:
    bucket_names: list[str]
    rows: list[RoundRecord] = field(default_factory=list)

    def processed(self) -> int:
        return self.rows[-1].processed if self.rows else 0

    def at_processed(self, tick: int) -> RoundRecord | None:
        """Last record at or before a processed-images tick."""
        best = None
        for row in self.rows:
            if row.processed <= tick:
                best = row
            else:
                break
        return best

    def metrics_table(self) -> tuple[list[str], list[list]]:
        header = ["round", "processed", "macro_precision", "macro_recall"]
        for name in self.bucket_names:
            header += [f"precision_{name}", f"recall_{name}"]
        table = []
        for row in self.rows:
            cells: list = [row.round, row.processed, row.macro_precision, row.macro_recall]
            for name in self.bucket_names:
                p, r = row.per_bucket.get(name, (None, None))
                cells += [p, r]
            table.append(cells)
        return header, table

    def timings_table(self) -> tuple[list[str], list[list]]:
        header = ["round", "suggest_seconds", "feedback_seconds", "cumulative_seconds"]
        table = []
        total = 0.0
        for row in self.rows:
            total += row.suggest_seconds + row.feedback_seconds
            table.append([row.round, row.suggest_seconds, row.feedback_seconds, total])
        return header, table


def compute_metrics(
    session: SessionState, relevant_sets: dict[int, set[int]], names: dict[int, str]
) -> tuple[float | None, float | None, dict[str, tuple[float | None, float | None]]]:
    """Per-bucket precision/recall against ground truth, plus macro averages.

    Precision of an empty bucket is undefined and excluded from the macro
    average; recall of an empty bucket is simply 0.
    """
    per_bucket: dict[str, tuple[float | None, float | None]] = {}
    precisions, recalls = [], []
    for bucket_id, relevant in sorted(relevant_sets.items()):
        members = set(session.bucket(bucket_id).members)
        correct = len(members & relevant)
        precision = correct / len(members) if members else None
        recall = correct / len(relevant) if relevant else None
        per_bucket[names[bucket_id]] = (precision, recall)
        if precision is not None:
            precisions.append(precision)
        if recall is not None:
            recalls.append(recall)
    macro_p = sum(precisions) / len(precisions) if precisions else None
    macro_r = sum(recalls) / len(recalls) if recalls else None
    return macro_p, macro_r, per_bucket


def _setup_buckets(engine: Engine, truth: GroundTruth, cfg: ActorConfig):
    """Create the actor's buckets in label-index order; returns maps."""
    by_index = sorted((truth.label_index(label), label) for label in cfg.relevance)
    name_to_id: dict[str, int] = {}
    relevant: dict[int, int] = {}
    for label_idx, label in by_index:
        bucket_name = cfg.relevance[label]
        if bucket_name not in name_to_id:
            if not name_to_id:
                bucket = engine.rename_bucket(1, name=bucket_name)
            else:
                bucket = engine.create_bucket(name=bucket_name)
            name_to_id[bucket_name] = bucket.bucket_id
        relevant[label_idx] = name_to_id[bucket_name]
    relevant_sets: dict[int, set[int]] = {b: set() for b in name_to_id.values()}
    for label_idx, bucket_id in relevant.items():
        relevant_sets[bucket_id] |= truth.images_with_label(label_idx)
    names = {bucket_id: name for name, bucket_id in name_to_id.items()}
    return relevant, relevant_sets, names


def run_session(
    collection: Collection,
    index: PQIndex,
    engine_cfg: EngineConfig,
    truth: GroundTruth,
    actor_cfg: ActorConfig,
    knn_matrix: np.ndarray | None = None,
) -> MetricsLog:
    """Drive one full actor session and log metrics per round."""
    actor_cfg.validate()
    if truth.n != collection.n:
        raise ValueError("ground truth size disagrees with the collection")
    # Untied extras would blur the per-round image accounting.
    engine_cfg = replace(engine_cfg, extra_explore=0)
    engine = Engine(collection, index, engine_cfg, knn_matrix=knn_matrix)
    relevant, relevant_sets, names = _setup_buckets(engine, truth, actor_cfg)
    rng = np.random.default_rng(actor_cfg.seed)
    log = MetricsLog(bucket_names=[names[b] for b in sorted(names)])

    processed = 0
    round_index = 0
    per_round = actor_cfg.round_size()
    while processed < actor_cfg.budget:
        active = engine.session.active_bucket_ids()
        want = min(per_round, actor_cfg.budget - processed)
        counts: dict[int, int] = {}
        offset = round_index % len(active)
        rotated = active[offset:] + active[:offset]
        for pos, bucket_id in enumerate(rotated):
            share = want // len(active) + (1 if pos < want % len(active) else 0)
            if share:
                counts[bucket_id] = share
        t0 = time.perf_counter()
        result = engine.suggest(counts)
        t1 = time.perf_counter()
        if not result.suggestions:
            break
        assignments: dict[int, int] = {}
        for s in result.suggestions:
            judgment = actor_judge(truth.assignments[s.image_id], relevant, actor_cfg.err, rng)
            if judgment != IGNORE:
                assignments[s.image_id] = judgment
        t2 = time.perf_counter()
        if assignments:
            engine.process_feedback(assignments)
        t3 = time.perf_counter()
        processed += len(result.suggestions)
        macro_p, macro_r, per_bucket = compute_metrics(engine.session, relevant_sets, names)
        log.rows.append(
            RoundRecord(
                round=result.round,
                processed=processed,
                macro_precision=macro_p,
                macro_recall=macro_r,
                per_bucket=per_bucket,
                suggest_seconds=t1 - t0,
                feedback_seconds=t3 - t2,
            )
        )
        round_index += 1
        if result.exhausted and len(result.suggestions) == 0:
            break
    return log
