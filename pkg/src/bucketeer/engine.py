"""The suggestion engine: feedback processing, retraining, the
exploration-search split, suggestion assembly, and fast-forward.

One Engine owns one session over one collection. Every random decision flows
through a single per-session generator seeded from the config, so a whole
session replays bit-identically from (seed, operation sequence). The engine
persists to a JSON document including the generator state and can resume
mid-session.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import classifier as clf
from . import pq
from .dataset import Collection
from .session import (
    DISCARD,
    SOURCE_CLASSIFIER,
    SOURCE_NN,
    ConstraintError,
    SessionState,
    UnknownEntityError,
    window,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

NN_MODES = ("knn", "ann")
ENGINE_MODES = ("full", "baseline")


@dataclass
class EngineConfig:
    w: int = 5
    o: float = 0.2
    nn_mode: str = "ann"
    pruning: str = "all"
    n_tr: int = 1000
    s_b: int = 25
    extra_explore: int = 2
    explorer_multiplier: int = 100
    ann_candidate_cap: int = 50_000
    ann_member_cap: int = 25
    knn_member_sample: int = 50
    negative_ratio: int = 2
    reg_strength: float = 1.0
    epochs: int = 200
    mode: str = "full"
    seed: int = 0

    def validate(self) -> None:
        if self.w < 1:
            raise ValueError("w must be >= 1")
        if not 0.0 <= self.o <= 1.0:
            raise ValueError("o must be in [0, 1]")
        if self.nn_mode not in NN_MODES:
            raise ValueError(f"nn_mode must be one of {NN_MODES}, got {self.nn_mode!r}")
        if self.mode not in ENGINE_MODES:
            raise ValueError(f"mode must be one of {ENGINE_MODES}, got {self.mode!r}")
        if self.s_b < 1:
            raise ValueError("s_b must be >= 1")
        if self.extra_explore < 0:
            raise ValueError("extra_explore must be >= 0")
        self.training_config().validate()

    def training_config(self) -> clf.TrainingConfig:
        return clf.TrainingConfig(
            pruning=self.pruning,
            n_tr=self.n_tr,
            negative_ratio=self.negative_ratio,
            reg_strength=self.reg_strength,
            epochs=self.epochs,
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        path = Path(path)
        if path.suffix.lower() == ".toml":
            doc = tomllib.loads(path.read_text())
        else:
            doc = json.loads(path.read_text())
        return cls.from_dict(doc)

    def run_id(self) -> str:
        """Identifier naming one configuration in reports."""
        oracle = "rf" if self.o == 0 else f"al_{self.o:g}"
        if self.mode == "baseline":
            return f"baseline-{oracle}"
        return f"engine-{self.nn_mode}_{self.w}-{oracle}-{self.pruning}-{self.n_tr}"


@dataclass
class Suggestion:
    image_id: int
    bucket_id: int | None
    source: str
    oracle_flag: bool = False
    confidence: float | None = None

    def to_doc(self) -> dict:
        return asdict(self)


@dataclass
class SuggestResult:
    round: int
    suggestions: list[Suggestion]
    exhausted: bool = False


def compute_split(bucket, w: int, now: int) -> tuple[float, float]:
    """Windowed acceptance rate per suggestion source.

    Each rate is |confirmed| / |shown| over the last w completed rounds,
    clamped to 1. An empty windowed denominator yields 1 for that source, so
    a bucket with no recent history starts fully trusting it.
    """
    out = []
    for source in (SOURCE_CLASSIFIER, SOURCE_NN):
        shown = [e for e in window(bucket.suggested, w, now) if e.source == source]
        if not shown:
            out.append(1.0)
            continue
        confirmed = [e for e in window(bucket.confirmed, w, now) if e.source == source]
        out.append(min(1.0, len(confirmed) / len(shown)))
    return out[0], out[1]


def roulette_source(p_class: float, p_nn: float, rng: np.random.Generator) -> str:
    """Pick one suggestion source from the stacked probability intervals."""
    r = rng.random()
    if r < p_class:
        return SOURCE_CLASSIFIER
    if r < p_class + (1.0 - p_class) * p_nn:
        return SOURCE_NN
    return "explorer"


class Engine:
    """Single-session orchestrator binding collection, index, and state."""

    def __init__(
        self,
        collection: Collection,
        index: pq.PQIndex,
        config: EngineConfig,
        knn_matrix: np.ndarray | None = None,
        session: SessionState | None = None,
        rng: np.random.Generator | None = None,
    ):
        config.validate()
        if index.n != collection.n:
            raise ValueError(f"index covers {index.n} images, collection has {collection.n}")
        if config.nn_mode == "knn" and knn_matrix is None:
            raise ValueError("nn_mode=knn needs a prebuilt neighbor matrix")
        if knn_matrix is not None and knn_matrix.shape[0] != collection.n:
            raise ValueError("neighbor matrix size disagrees with the collection")
        self.collection = collection
        self.index = index
        self.config = config
        self.knn_matrix = knn_matrix
        self.session = session or SessionState(collection.n)
        self.rng = rng or np.random.default_rng(config.seed)
        self.classifiers: dict[int, clf.LinearModel | None] = {}
        self.dirty: set[int] = set()
        self._score_cache: dict[int, dict] = {}

    # ---- bucket lifecycle (delegates that keep retrain flags honest) ----

    def create_bucket(self, name: str | None = None, color: str | None = None):
        return self.session.create_bucket(name, color)

    def rename_bucket(self, bucket_id: int, name: str | None = None, color: str | None = None):
        return self.session.rename_bucket(bucket_id, name, color)

    def set_active(self, bucket_id: int, active: bool):
        return self.session.set_active(bucket_id, active)

    def delete_bucket(self, bucket_id: int) -> None:
        self.session.delete_bucket(bucket_id)
        self.classifiers.pop(bucket_id, None)
        self._score_cache.pop(bucket_id, None)
        self.dirty.discard(bucket_id)

    def assign(self, image_id: int, bucket_id: int) -> list[int]:
        """Direct placement outside the feedback flow (neutral for ledgers)."""
        touched = {b for b in self.session.holders(image_id) if b != DISCARD}
        if bucket_id != DISCARD:
            touched.add(bucket_id)
        self.session.assign(image_id, bucket_id)
        self.dirty |= touched
        return sorted(touched)

    def transfer(self, image_ids, src: int, dst: int, mode: str = "move") -> list[int]:
        if mode not in ("move", "copy"):
            raise ValueError(f"transfer mode must be move or copy, got {mode!r}")
        for image_id in image_ids:
            self.session.transfer(int(image_id), src, dst, copy=(mode == "copy"))
        touched = {b for b in (src, dst) if b != DISCARD}
        self.dirty |= touched
        return sorted(touched)

    # ---- feedback ----

    def process_feedback(self, assignments: dict[int, int]) -> list[int]:
        """Apply one feedback batch atomically.

        Confirmations and rejections are derived from what was pending for
        each image; every bucket losing or gaining a member is flagged for
        retraining. Raises before any mutation if a referenced image or
        bucket is unknown.
        """
        normalized: dict[int, int] = {}
        for image_id, bucket_id in assignments.items():
            image_id, bucket_id = int(image_id), int(bucket_id)
            self.session.check_image(image_id)
            self.session.bucket(bucket_id)
            normalized[image_id] = bucket_id
        touched: set[int] = set()
        for image_id in sorted(normalized):
            target = normalized[image_id]
            touched |= {b for b in self.session.holders(image_id) if b != DISCARD}
            touched |= {b for b in self.session.pending.get(image_id, {}) if b != DISCARD}
            if target != DISCARD:
                touched.add(target)
            self.session.assign(image_id, target)
            self.session.resolve_feedback(image_id, target)
        self.dirty |= touched
        return sorted(touched)

    # ---- training & scores ----

    def _invalidate(self, bucket_id: int) -> None:
        self._score_cache.pop(bucket_id, None)

    def _scores(self, bucket_id: int) -> np.ndarray | None:
        model = self.classifiers.get(bucket_id)
        if model is None:
            return None
        cache = self._score_cache.get(bucket_id)
        if cache is None:
            scores = clf.score_collection(model, self.collection.concepts)
            cache = {"scores": scores, "ranking": None, "oracle_order": None}
            self._score_cache[bucket_id] = cache
        return cache["scores"]

    def _ranking(self, bucket_id: int) -> np.ndarray:
        self._scores(bucket_id)
        cache = self._score_cache[bucket_id]
        if cache["ranking"] is None:
            cache["ranking"] = np.argsort(-cache["scores"], kind="stable")
        return cache["ranking"]

    def _oracle_order(self, bucket_id: int) -> np.ndarray:
        self._scores(bucket_id)
        cache = self._score_cache[bucket_id]
        if cache["oracle_order"] is None:
            cache["oracle_order"] = np.argsort(np.abs(cache["scores"]), kind="stable")
        return cache["oracle_order"]

    def retrain(self, bucket_id: int) -> clf.LinearModel | None:
        """Rebuild one bucket's model from current session state."""
        bucket = self.session.bucket(bucket_id)
        members = bucket.member_ids()
        tcfg = self.config.training_config()
        if not members:
            self.classifiers[bucket_id] = None
            self._invalidate(bucket_id)
            self.dirty.discard(bucket_id)
            return None
        prev_scores = self._scores(bucket_id)
        positives = clf.prune_positives(members, prev_scores, tcfg)
        negatives = clf.assemble_negatives(
            rejected_ids=[e.image_id for e in bucket.rejected],
            discard_ids=self.session.bucket(DISCARD).member_ids(),
            n_images=self.collection.n,
            forbidden=set(members),
            target=tcfg.negative_ratio * positives.shape[0],
            rng=self.rng,
        )
        self._invalidate(bucket_id)
        if negatives.shape[0] == 0:
            model = None
        else:
            rows = np.concatenate([positives, negatives])
            y = np.concatenate([np.ones(positives.shape[0]), -np.ones(negatives.shape[0])])
            model = clf.train_linear(self.collection.concepts[rows], y, tcfg)
        if model is not None:
            model.trained_round = self.session.round
            model.n_pos = int(positives.shape[0])
            model.n_neg = int(negatives.shape[0])
        self.classifiers[bucket_id] = model
        self.dirty.discard(bucket_id)
        return model

    # ---- suggestion assembly ----

    def _seen_mask(self) -> np.ndarray:
        mask = np.zeros(self.collection.n, dtype=bool)
        seen = self.session.seen_ids()
        if seen:
            mask[np.fromiter(seen, dtype=np.int64)] = True
        return mask

    def _mask_of(self, ids) -> np.ndarray:
        mask = np.zeros(self.collection.n, dtype=bool)
        ids = list(ids)
        if ids:
            mask[np.asarray(ids, dtype=np.int64)] = True
        return mask

    def _take_ranked(self, ranking: np.ndarray, excluded: np.ndarray, count: int) -> np.ndarray:
        if count <= 0:
            return np.empty(0, dtype=np.int64)
        return ranking[~excluded[ranking]][:count].astype(np.int64)

    def _confidence(self, bucket_id: int, ids: list[int]) -> list[float]:
        scores = self._scores(bucket_id)
        members = self.session.bucket(bucket_id).member_ids()
        values = clf.bucket_confidence(scores, ids, members)
        return [float(v) for v in values]

    def suggest(self, counts: dict[int, int] | None = None) -> SuggestResult:
        """Run one interaction round and return its suggestion batch.

        Increments the round counter, drops stale pending suggestions (the
        previous batch left the screen), retrains flagged buckets on demand,
        and assembles per-bucket suggestions plus untied explorer extras.
        """
        session = self.session
        active = session.active_bucket_ids()
        if not active:
            raise ConstraintError("no active bucket to suggest for")
        if counts is None:
            counts = {b: self.config.s_b for b in active}
        else:
            counts = {int(b): int(c) for b, c in counts.items()}
            for b, c in counts.items():
                bucket = session.bucket(b)
                if b == DISCARD or not bucket.active:
                    raise ConstraintError(f"bucket {b} is not active")
                if c < 1:
                    raise ValueError("per-bucket count must be >= 1")
        session.round += 1
        session.pending.clear()

        seen = self._seen_mask()
        chosen = np.zeros(self.collection.n, dtype=bool)
        suggestions: list[Suggestion] = []
        requested = sum(counts.values())
        baseline = self.config.mode == "baseline"

        for bucket_id in sorted(counts):
            if bucket_id in self.dirty:
                self.retrain(bucket_id)
            count = counts[bucket_id]
            bucket = session.bucket(bucket_id)
            model = self.classifiers.get(bucket_id)
            if model is not None and not bucket.members:
                model = None
            if baseline:
                batch = self._suggest_baseline(bucket_id, count, model, seen, chosen)
            elif model is None:
                batch = self._fill_explorer(count, seen, chosen)
            else:
                batch = self._suggest_mixed(bucket_id, count, seen, chosen)
            suggestions.extend(batch)

        extras = 0 if baseline else self.config.extra_explore
        if extras:
            requested += extras
            suggestions.extend(self._fill_explorer(extras, seen, chosen))

        return SuggestResult(
            round=session.round,
            suggestions=suggestions,
            exhausted=len(suggestions) < requested,
        )

    def _fill_explorer(self, count: int, seen: np.ndarray, chosen: np.ndarray) -> list[Suggestion]:
        """Untied outward suggestions; never ledgered, confidence undefined."""
        positives = np.asarray(sorted(self.session.seen_ids()), dtype=np.int64)
        ids = pq.explorer_suggest(
            self.index,
            positives,
            seen | chosen,
            count,
            self.rng,
            multiplier=self.config.explorer_multiplier,
        )
        chosen[ids] = True
        return [Suggestion(int(i), None, "explorer") for i in ids]

    def _suggest_baseline(
        self,
        bucket_id: int,
        count: int,
        model: clf.LinearModel | None,
        seen: np.ndarray,
        chosen: np.ndarray,
    ) -> list[Suggestion]:
        """Classifier-only regime: no split, no nn, no explorer.

        With no model yet the fill is a uniform random unseen draw, still
        ledgered as classifier-sourced so the feedback bookkeeping runs.
        """
        excluded = seen | chosen | self._mask_of(self.session.suggested_ids(bucket_id))
        if model is None:
            pool = np.flatnonzero(~excluded)
            ids = (
                pool
                if pool.shape[0] <= count
                else np.asarray(self.rng.choice(pool, count, replace=False), dtype=np.int64)
            )
            batch = [Suggestion(int(i), bucket_id, SOURCE_CLASSIFIER) for i in ids]
        else:
            ids = self._take_ranked(self._ranking(bucket_id), excluded, count)
            batch = [Suggestion(int(i), bucket_id, SOURCE_CLASSIFIER) for i in ids]
        chosen[[s.image_id for s in batch]] = True
        if model is not None:
            batch = self.oracle_replace(batch, bucket_id, seen, chosen)
            conf = self._confidence(bucket_id, [s.image_id for s in batch])
            for s, c in zip(batch, conf):
                s.confidence = c
        self.session.record_suggestions(bucket_id, [s.image_id for s in batch], SOURCE_CLASSIFIER)
        return batch

    def _suggest_mixed(
        self, bucket_id: int, count: int, seen: np.ndarray, chosen: np.ndarray
    ) -> list[Suggestion]:
        """Roulette-allocated classifier/nn/explorer fills for one bucket."""
        session = self.session
        bucket = session.bucket(bucket_id)
        # The counter was already advanced for this round; the window must
        # cover the last w completed rounds, hence round - 1.
        p_class, p_nn = compute_split(bucket, self.config.w, session.round - 1)
        tallies = {SOURCE_CLASSIFIER: 0, SOURCE_NN: 0, "explorer": 0}
        for _ in range(count):
            tallies[roulette_source(p_class, p_nn, self.rng)] += 1

        excluded = seen | chosen | self._mask_of(session.suggested_ids(bucket_id))
        member_ids = np.asarray(bucket.member_ids(), dtype=np.int64)
        batch: list[Suggestion] = []
        shortfall = 0

        class_ids = self._take_ranked(self._ranking(bucket_id), excluded, tallies[SOURCE_CLASSIFIER])
        excluded[class_ids] = True
        chosen[class_ids] = True
        shortfall += tallies[SOURCE_CLASSIFIER] - class_ids.shape[0]
        batch.extend(Suggestion(int(i), bucket_id, SOURCE_CLASSIFIER) for i in class_ids)

        if tallies[SOURCE_NN]:
            if self.config.nn_mode == "knn":
                nn_ids = pq.knn_suggest(
                    self.knn_matrix,
                    member_ids,
                    excluded,
                    tallies[SOURCE_NN],
                    self.rng,
                    member_sample=self.config.knn_member_sample,
                )
            else:
                nn_ids = pq.ann_search(
                    self.index,
                    self.collection.abstract,
                    member_ids,
                    excluded,
                    tallies[SOURCE_NN],
                    self.rng,
                    candidate_cap=self.config.ann_candidate_cap,
                    member_cap=self.config.ann_member_cap,
                )
            excluded[nn_ids] = True
            chosen[nn_ids] = True
            shortfall += tallies[SOURCE_NN] - nn_ids.shape[0]
            batch.extend(Suggestion(int(i), bucket_id, SOURCE_NN) for i in nn_ids)

        batch = self.oracle_replace(batch, bucket_id, seen, chosen)

        tied_ids = [s.image_id for s in batch]
        if tied_ids:
            conf = self._confidence(bucket_id, tied_ids)
            for s, c in zip(batch, conf):
                s.confidence = c
        session.record_suggestions(
            bucket_id, [s.image_id for s in batch if s.source == SOURCE_CLASSIFIER], SOURCE_CLASSIFIER
        )
        session.record_suggestions(
            bucket_id, [s.image_id for s in batch if s.source == SOURCE_NN], SOURCE_NN
        )
        # Explorer absorbs its own allocation plus whatever the ranked fills
        # could not provide; these items carry no bucket tie.
        n_explore = tallies["explorer"] + shortfall
        if n_explore:
            batch.extend(self._fill_explorer(n_explore, seen, chosen))
        return batch

    def oracle_replace(
        self, batch: list[Suggestion], bucket_id: int, seen: np.ndarray, chosen: np.ndarray
    ) -> list[Suggestion]:
        """Swap classifier picks for decision-boundary queries with probability o.

        The replacement is the unseen image with |score| closest to zero that
        is not already on display; the replaced image becomes eligible again.
        """
        o = self.config.o
        if o <= 0.0 or self.classifiers.get(bucket_id) is None:
            return batch
        suggested_before = self._mask_of(self.session.suggested_ids(bucket_id))
        order = self._oracle_order(bucket_id)
        ptr = 0
        for s in batch:
            if s.source != SOURCE_CLASSIFIER:
                continue
            if self.rng.random() >= o:
                continue
            while ptr < order.shape[0]:
                cand = int(order[ptr])
                ptr += 1
                if not (seen[cand] or chosen[cand] or suggested_before[cand]):
                    chosen[s.image_id] = False
                    chosen[cand] = True
                    s.image_id = cand
                    s.oracle_flag = True
                    break
            else:
                break
        return batch

    # ---- fast-forward ----

    def fast_forward(self, bucket_id: int, n_ff: int) -> list[int]:
        """Add the top unseen images by model score directly as members."""
        if n_ff < 1:
            raise ValueError("n_ff must be >= 1")
        session = self.session
        bucket = session.bucket(bucket_id)
        if bucket_id == DISCARD:
            ranking = self._discard_ranking()
        else:
            if bucket_id in self.dirty:
                self.retrain(bucket_id)
            if self.classifiers.get(bucket_id) is None:
                raise ConstraintError(
                    f"bucket {bucket_id} has no trained model yet; add members and feedback first"
                )
            ranking = self._ranking(bucket_id)
        added = self._take_ranked(ranking, self._seen_mask(), n_ff)
        for image_id in added:
            session.assign(int(image_id), bucket_id, fast_forwarded=True)
            session.pending.pop(int(image_id), None)
        if added.shape[0]:
            self.dirty.add(bucket_id)
        return [int(i) for i in added]

    def _discard_ranking(self) -> np.ndarray:
        """Ranking for fast-forwarding the discard pile itself.

        Trains a one-off model with discard members as positives and bucket
        members as negatives.
        """
        session = self.session
        positives = np.asarray(sorted(session.bucket(DISCARD).members), dtype=np.int64)
        if positives.shape[0] == 0:
            raise ConstraintError("the discard pile is empty; nothing to train on")
        bucket_members: set[int] = set()
        for b in session.buckets.values():
            if b.bucket_id != DISCARD:
                bucket_members |= set(b.members)
        tcfg = self.config.training_config()
        negatives = clf.assemble_negatives(
            rejected_ids=sorted(bucket_members),
            discard_ids=[],
            n_images=self.collection.n,
            forbidden=set(positives.tolist()),
            target=tcfg.negative_ratio * positives.shape[0],
            rng=self.rng,
        )
        if negatives.shape[0] == 0:
            raise ConstraintError("no negatives available for the discard model")
        rows = np.concatenate([positives, negatives])
        y = np.concatenate([np.ones(positives.shape[0]), -np.ones(negatives.shape[0])])
        model = clf.train_linear(self.collection.concepts[rows], y, tcfg)
        if model is None:
            raise ConstraintError("discard model could not be trained")
        scores = clf.score_collection(model, self.collection.concepts)
        return np.argsort(-scores, kind="stable")

    def commit_review(self, bucket_id: int) -> int:
        """Clear fast-forward markers after the user reviewed the bucket."""
        bucket = self.session.bucket(bucket_id)
        cleared = 0
        for entry in bucket.members.values():
            if entry.fast_forwarded:
                entry.fast_forwarded = False
                cleared += 1
        return cleared

    # ---- views ----

    def archetypes(self, bucket_id: int, count: int = 5) -> list[int]:
        """Most representative members of a bucket for banner display."""
        bucket = self.session.bucket(bucket_id)
        return clf.archetypes(bucket, self._scores(bucket_id), count)

    def bucket_view(self, bucket_id: int, sort: str = "confidence", order: str = "desc") -> list[dict]:
        """Member listing for the UI: fast-forwarded items first, then sorted."""
        if sort not in ("confidence", "added"):
            raise ValueError(f"sort must be confidence or added, got {sort!r}")
        if order not in ("asc", "desc"):
            raise ValueError(f"order must be asc or desc, got {order!r}")
        bucket = self.session.bucket(bucket_id)
        ids = bucket.member_ids()
        model = self.classifiers.get(bucket_id)
        conf: dict[int, float | None] = {i: None for i in ids}
        if model is not None and ids:
            for i, c in zip(ids, self._confidence(bucket_id, ids)):
                conf[i] = c
        sign = -1 if order == "desc" else 1

        def sort_key(i: int):
            if sort == "added":
                return sign * bucket.members[i].seq
            c = conf[i]
            return (sign * c if c is not None else np.inf, i)

        fast = sorted((i for i in ids if bucket.members[i].fast_forwarded), key=lambda i: -bucket.members[i].seq)
        rest = sorted((i for i in ids if not bucket.members[i].fast_forwarded), key=sort_key)
        return [
            {
                "image_id": i,
                "added_round": bucket.members[i].round,
                "fast_forwarded": bucket.members[i].fast_forwarded,
                "confidence": conf[i],
                "uri": self.collection.display_uri(i),
            }
            for i in fast + rest
        ]

    # ---- persistence ----

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "config": asdict(self.config),
            "session": self.session.to_doc(),
            "rng_state": self.rng.bit_generator.state,
            "classifiers": {
                str(b): (m.to_doc() if m is not None else None) for b, m in self.classifiers.items()
            },
            "dirty": sorted(self.dirty),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc()) + "\n")

    @classmethod
    def from_doc(
        cls,
        doc: dict,
        collection: Collection,
        index: pq.PQIndex,
        knn_matrix: np.ndarray | None = None,
    ) -> "Engine":
        config = EngineConfig.from_dict(doc["config"])
        session = SessionState.from_doc(doc["session"])
        rng = np.random.default_rng()
        rng.bit_generator.state = doc["rng_state"]
        engine = cls(collection, index, config, knn_matrix=knn_matrix, session=session, rng=rng)
        engine.classifiers = {
            int(b): (clf.LinearModel.from_doc(m) if m is not None else None)
            for b, m in doc["classifiers"].items()
        }
        engine.dirty = set(doc["dirty"])
        return engine

    @classmethod
    def load(
        cls,
        path: str | Path,
        collection: Collection,
        index: pq.PQIndex,
        knn_matrix: np.ndarray | None = None,
    ) -> "Engine":
        return cls.from_doc(json.loads(Path(path).read_text()), collection, index, knn_matrix)
