"""Session state: buckets, memberships, and the per-bucket feedback ledgers.

A session always has a discard pile (bucket id -1) plus one to seven active
buckets. Images live in exactly one bucket at a time; the copy variant of
transfer is the single sanctioned exception. Each bucket keeps three ledgers
used by the suggestion logic: suggestions shown (S), confirmations (C), and
rejections (W). S entries carry the round they were suggested in, C and W the
round their feedback was processed in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

DISCARD = -1
MAX_ACTIVE = 7

PALETTE = [
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8",
    "#f58231", "#911eb4", "#46f0f0", "#f032e6",
]

SOURCE_CLASSIFIER = "classifier"
SOURCE_NN = "nn"


class UnknownEntityError(KeyError):
    """Lookup of a bucket or image that does not exist."""


class ConstraintError(RuntimeError):
    """Operation that would violate a session invariant."""


@dataclass
class MemberEntry:
    round: int
    seq: int
    fast_forwarded: bool = False


@dataclass
class LedgerEntry:
    image_id: int
    round: int
    source: str


@dataclass
class Bucket:
    bucket_id: int
    name: str
    color: str
    active: bool = True
    members: dict[int, MemberEntry] = field(default_factory=dict)
    suggested: list[LedgerEntry] = field(default_factory=list)
    confirmed: list[LedgerEntry] = field(default_factory=list)
    rejected: list[LedgerEntry] = field(default_factory=list)

    def member_ids(self) -> list[int]:
        return list(self.members.keys())

    def members_by_added(self) -> list[int]:
        return sorted(self.members, key=lambda i: self.members[i].seq)


def window(entries: list[LedgerEntry], w: int, now: int) -> list[LedgerEntry]:
    """Ledger entries whose round falls inside the trailing w rounds."""
    return [e for e in entries if e.round > now - w]


class SessionState:
    """Mutable bookkeeping for one categorization session."""

    def __init__(self, n_images: int):
        if n_images < 1:
            raise ValueError("session needs a non-empty collection")
        self.n_images = n_images
        self.round = 0
        self.seq = 0
        self.next_bucket_id = 2
        self.buckets: dict[int, Bucket] = {
            DISCARD: Bucket(DISCARD, "Discard", "#808080"),
            1: Bucket(1, "Bucket 1", PALETTE[0]),
        }
        # image -> {bucket_id: source} for suggestions awaiting feedback
        self.pending: dict[int, dict[int, str]] = {}
        self._holders: dict[int, set[int]] = {}

    # ---- lookup ----

    def bucket(self, bucket_id: int) -> Bucket:
        try:
            return self.buckets[bucket_id]
        except KeyError:
            raise UnknownEntityError(f"no bucket {bucket_id}") from None

    def active_bucket_ids(self) -> list[int]:
        return sorted(b.bucket_id for b in self.buckets.values() if b.active and b.bucket_id != DISCARD)

    def holders(self, image_id: int) -> set[int]:
        return set(self._holders.get(image_id, ()))

    def seen_ids(self) -> set[int]:
        """Images already placed somewhere, discard included."""
        return set(self._holders)

    def check_image(self, image_id: int) -> None:
        if not 0 <= image_id < self.n_images:
            raise UnknownEntityError(f"no image {image_id}")

    # ---- bucket management ----

    def create_bucket(self, name: str | None = None, color: str | None = None) -> Bucket:
        if len(self.active_bucket_ids()) >= MAX_ACTIVE:
            raise ConstraintError(f"at most {MAX_ACTIVE} active buckets")
        bucket_id = self.next_bucket_id
        self.next_bucket_id += 1
        bucket = Bucket(
            bucket_id,
            name or f"Bucket {bucket_id}",
            color or PALETTE[(bucket_id - 1) % len(PALETTE)],
        )
        self.buckets[bucket_id] = bucket
        return bucket

    def rename_bucket(self, bucket_id: int, name: str | None = None, color: str | None = None) -> Bucket:
        bucket = self.bucket(bucket_id)
        if bucket_id == DISCARD:
            raise ConstraintError("the discard pile cannot be edited")
        if name is not None:
            bucket.name = name
        if color is not None:
            bucket.color = color
        return bucket

    def set_active(self, bucket_id: int, active: bool) -> Bucket:
        bucket = self.bucket(bucket_id)
        if bucket_id == DISCARD:
            raise ConstraintError("the discard pile cannot be deactivated")
        if bucket.active == active:
            return bucket
        if active and len(self.active_bucket_ids()) >= MAX_ACTIVE:
            raise ConstraintError(f"at most {MAX_ACTIVE} active buckets")
        if not active and len(self.active_bucket_ids()) <= 1:
            raise ConstraintError("at least one bucket must stay active")
        bucket.active = active
        return bucket

    def delete_bucket(self, bucket_id: int) -> None:
        bucket = self.bucket(bucket_id)
        if bucket_id == DISCARD:
            raise ConstraintError("the discard pile cannot be deleted")
        if bucket.active and len(self.active_bucket_ids()) <= 1:
            raise ConstraintError("at least one bucket must stay active")
        for image_id in list(bucket.members):
            self._remove_member(bucket_id, image_id)
            if not self._holders.get(image_id):
                self._add_member(DISCARD, image_id)
        del self.buckets[bucket_id]

    # ---- membership ----

    def _add_member(self, bucket_id: int, image_id: int, fast_forwarded: bool = False) -> None:
        bucket = self.buckets[bucket_id]
        if image_id in bucket.members:
            return
        bucket.members[image_id] = MemberEntry(self.round, self.seq, fast_forwarded)
        self.seq += 1
        self._holders.setdefault(image_id, set()).add(bucket_id)

    def _remove_member(self, bucket_id: int, image_id: int) -> None:
        self.buckets[bucket_id].members.pop(image_id, None)
        held = self._holders.get(image_id)
        if held:
            held.discard(bucket_id)
            if not held:
                del self._holders[image_id]

    def assign(self, image_id: int, bucket_id: int, fast_forwarded: bool = False) -> None:
        """Place an image in a bucket, displacing any previous membership."""
        self.check_image(image_id)
        self.bucket(bucket_id)
        for holder in list(self._holders.get(image_id, ())):
            self._remove_member(holder, image_id)
        self._add_member(bucket_id, image_id, fast_forwarded)

    def transfer(self, image_id: int, src: int, dst: int, copy: bool = False) -> None:
        """Move (or copy) one image between buckets.

        Copy leaves the source membership in place and is refused for the
        discard pile as destination.
        """
        self.check_image(image_id)
        src_bucket, _ = self.bucket(src), self.bucket(dst)
        if image_id not in src_bucket.members:
            raise UnknownEntityError(f"image {image_id} not in bucket {src}")
        if src == dst:
            return
        if copy:
            if dst == DISCARD:
                raise ConstraintError("copy to the discard pile is not allowed")
            self._add_member(dst, image_id)
        else:
            self._remove_member(src, image_id)
            self._add_member(dst, image_id)

    # ---- ledgers ----

    def record_suggestions(self, bucket_id: int, image_ids, source: str) -> None:
        bucket = self.bucket(bucket_id)
        for image_id in image_ids:
            bucket.suggested.append(LedgerEntry(int(image_id), self.round, source))
            self.pending.setdefault(int(image_id), {})[bucket_id] = source

    def suggested_ids(self, bucket_id: int) -> set[int]:
        return {e.image_id for e in self.bucket(bucket_id).suggested}

    def resolve_feedback(self, image_id: int, target_bucket: int) -> None:
        """Fold one feedback event into the ledgers, then clear pending state.

        Assignment to a bucket that suggested the image confirms it there;
        every other bucket that had it pending records a rejection.
        """
        origins = self.pending.pop(image_id, {})
        for bucket_id, source in origins.items():
            if bucket_id not in self.buckets:
                continue
            entry = LedgerEntry(image_id, self.round, source)
            if bucket_id == target_bucket:
                self.buckets[bucket_id].confirmed.append(entry)
            else:
                self.buckets[bucket_id].rejected.append(entry)

    def clear_pending_for(self, image_ids) -> None:
        for image_id in image_ids:
            self.pending.pop(int(image_id), None)

    # ---- serialization ----

    def to_doc(self) -> dict:
        return {
            "n_images": self.n_images,
            "round": self.round,
            "seq": self.seq,
            "next_bucket_id": self.next_bucket_id,
            "buckets": [
                {
                    "id": b.bucket_id,
                    "name": b.name,
                    "color": b.color,
                    "active": b.active,
                    "members": [
                        [i, e.round, e.seq, int(e.fast_forwarded)] for i, e in b.members.items()
                    ],
                    "suggested": [[e.image_id, e.round, e.source] for e in b.suggested],
                    "confirmed": [[e.image_id, e.round, e.source] for e in b.confirmed],
                    "rejected": [[e.image_id, e.round, e.source] for e in b.rejected],
                }
                for b in self.buckets.values()
            ],
            "pending": [
                [image_id, [[bid, src] for bid, src in origins.items()]]
                for image_id, origins in self.pending.items()
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SessionState":
        state = cls(int(doc["n_images"]))
        state.round = int(doc["round"])
        state.seq = int(doc["seq"])
        state.next_bucket_id = int(doc["next_bucket_id"])
        state.buckets = {}
        for bdoc in doc["buckets"]:
            bucket = Bucket(int(bdoc["id"]), bdoc["name"], bdoc["color"], bool(bdoc["active"]))
            for i, rnd, seq, ff in bdoc["members"]:
                bucket.members[int(i)] = MemberEntry(int(rnd), int(seq), bool(ff))
            for key, target in (
                ("suggested", bucket.suggested),
                ("confirmed", bucket.confirmed),
                ("rejected", bucket.rejected),
            ):
                for image_id, rnd, source in bdoc[key]:
                    target.append(LedgerEntry(int(image_id), int(rnd), source))
            state.buckets[bucket.bucket_id] = bucket
        state.pending = {
            int(image_id): {int(bid): src for bid, src in origins}
            for image_id, origins in doc["pending"]
        }
        state._holders = {}
        for bucket in state.buckets.values():
            for image_id in bucket.members:
                state._holders.setdefault(image_id, set()).add(bucket.bucket_id)
        return state
