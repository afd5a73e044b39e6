"""Product-quantization index: codebooks, codes, and the distance machinery.

Vectors are split into m contiguous subspaces; each subspace gets its own
k-means codebook and every image stores one centroid id per subspace. Distances
come in two flavors:

* asymmetric (query vector vs. stored code) via per-query lookup tables, and
* symmetric (code vs. code) via precomputed centroid-to-centroid tables.

Both are exact sums of per-subspace table entries in float64. Batched variants
express the table gathers as a one-hot sparse matrix times stacked tables,
which keeps large candidate scans inside one sparse matmul.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

PQ_MAGIC = b"BKPQ"
PQ_VERSION = 1
KNN_MAGIC = b"BKNN"
KNN_VERSION = 1


class IndexSizeError(RuntimeError):
    """Raised when an operation would exceed its declared memory budget."""


@dataclass
class PQParams:
    m: int = 32
    k_cap: int = 1024
    seed: int = 0
    train_sample: int = 25_000
    kmeans_iters: int = 25

    def validate(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k_cap < 1:
            raise ValueError("k_cap must be >= 1")
        if self.train_sample < 1:
            raise ValueError("train_sample must be >= 1")


def choose_k(n: int, k_cap: int) -> int:
    """Centroids per subquantizer: sqrt(n) capped, never below 1."""
    return max(1, min(k_cap, math.isqrt(n)))


def _pairwise_sq(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared euclidean distances (len(x), len(centers)) in float64."""
    x2 = np.einsum("ij,ij->i", x, x)
    c2 = np.einsum("ij,ij->i", centers, centers)
    d = x2[:, None] + c2[None, :] - 2.0 * (x @ centers.T)
    np.maximum(d, 0.0, out=d)
    return d


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[int(rng.integers(n))]
    closest = np.einsum("ij,ij->i", x - centers[0], x - centers[0])
    for j in range(1, k):
        total = float(closest.sum())
        if total <= 0.0:
            pick = int(rng.integers(n))
        else:
            r = rng.random() * total
            pick = min(int(np.searchsorted(np.cumsum(closest), r, side="right")), n - 1)
        centers[j] = x[pick]
        diff = x - centers[j]
        np.minimum(closest, np.einsum("ij,ij->i", diff, diff), out=closest)
    return centers


def kmeans_fit(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    iters: int = 25,
    assign_chunk: int = 8192,
) -> np.ndarray:
    """Deterministic Lloyd's k-means with k-means++ seeding.

    Distance ties assign to the lower centroid index; emptied clusters are
    reseeded from the points currently farthest from their centers.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds {n} training points")
    centers = _kmeans_pp_init(x, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    own_dist = np.empty(n, dtype=np.float64)
    for _ in range(iters):
        new_assign = np.empty(n, dtype=np.int64)
        for start in range(0, n, assign_chunk):
            d = _pairwise_sq(x[start : start + assign_chunk], centers)
            idx = np.argmin(d, axis=1)
            new_assign[start : start + assign_chunk] = idx
            own_dist[start : start + assign_chunk] = d[np.arange(d.shape[0]), idx]
        counts = np.bincount(new_assign, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            order = np.argsort(-own_dist, kind="stable")
            ptr = 0
            for e in empties:
                while counts[new_assign[order[ptr]]] <= 1:
                    ptr += 1
                p = order[ptr]
                ptr += 1
                counts[new_assign[p]] -= 1
                new_assign[p] = e
                counts[e] = 1
        changed = bool((new_assign != assign).any())
        assign = new_assign
        member_matrix = sparse.csr_matrix(
            (np.ones(n), assign.astype(np.int32), np.arange(n + 1, dtype=np.int64)),
            shape=(n, k),
        )
        centers = np.asarray((member_matrix.T @ x)) / counts[:, None]
        if not changed:
            break
    return centers


def _code_dtype(k: int) -> np.dtype:
    if k <= 256:
        return np.dtype(np.uint8)
    if k <= 65536:
        return np.dtype(np.uint16)
    return np.dtype(np.uint32)


class PQIndex:
    """Trained codebooks plus the codes of a fixed collection."""

    def __init__(self, params: PQParams, codebooks: np.ndarray, codes: np.ndarray, d: int):
        self.params = params
        self.codebooks = codebooks  # (m, k, dsub) float64
        self.codes = codes  # (n, m) unsigned int
        self.d = d
        self._ctc: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.codebooks.shape[0]

    @property
    def k(self) -> int:
        return self.codebooks.shape[1]

    @property
    def dsub(self) -> int:
        return self.codebooks.shape[2]

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @classmethod
    def build(cls, vectors: np.ndarray, params: PQParams) -> "PQIndex":
        """Train codebooks on a sample and encode the whole collection."""
        params.validate()
        n, d = vectors.shape
        if d % params.m != 0:
            raise ValueError(f"dimension {d} not divisible by m={params.m}")
        k = choose_k(n, params.k_cap)
        rng = np.random.default_rng(params.seed)
        if n > params.train_sample and params.train_sample >= k:
            train_ids = np.sort(rng.choice(n, params.train_sample, replace=False))
        else:
            train_ids = np.arange(n)
        train = np.asarray(vectors[train_ids], dtype=np.float64)
        dsub = d // params.m
        codebooks = np.empty((params.m, k, dsub), dtype=np.float64)
        for q in range(params.m):
            codebooks[q] = kmeans_fit(train[:, q * dsub : (q + 1) * dsub], k, rng, params.kmeans_iters)
        index = cls(params, codebooks, np.empty((0, params.m), dtype=_code_dtype(k)), d)
        index.codes = index.encode(vectors)
        return index

    def encode(self, vectors: np.ndarray, chunk: int = 16384) -> np.ndarray:
        """Assign each vector the nearest centroid id per subspace."""
        n = vectors.shape[0]
        if vectors.shape[1] != self.d:
            raise ValueError(f"expected dimension {self.d}, got {vectors.shape[1]}")
        codes = np.empty((n, self.m), dtype=_code_dtype(self.k))
        dsub = self.dsub
        for start in range(0, n, chunk):
            block = np.asarray(vectors[start : start + chunk], dtype=np.float64)
            for q in range(self.m):
                d = _pairwise_sq(block[:, q * dsub : (q + 1) * dsub], self.codebooks[q])
                codes[start : start + chunk, q] = np.argmin(d, axis=1)
        return codes

    def reconstruct(self, ids: np.ndarray | None = None) -> np.ndarray:
        """Decode codes back to the concatenated-centroid approximation."""
        codes = self.codes if ids is None else self.codes[np.asarray(ids)]
        out = np.empty((codes.shape[0], self.d), dtype=np.float64)
        dsub = self.dsub
        for q in range(self.m):
            out[:, q * dsub : (q + 1) * dsub] = self.codebooks[q][codes[:, q].astype(np.int64)]
        return out

    # ---- asymmetric (query vector vs. codes) ----

    def lookup_tables(self, query: np.ndarray) -> np.ndarray:
        """Per-subspace squared distances from a query to every centroid: (m, k)."""
        q = np.asarray(query, dtype=np.float64).reshape(self.d)
        tables = np.empty((self.m, self.k), dtype=np.float64)
        dsub = self.dsub
        for i in range(self.m):
            diff = self.codebooks[i] - q[i * dsub : (i + 1) * dsub]
            tables[i] = np.einsum("ij,ij->i", diff, diff)
        return tables

    def adc_lookup(self, tables: np.ndarray, ids: np.ndarray | None = None) -> np.ndarray:
        """Sum table entries along each stored code."""
        codes = self.codes if ids is None else self.codes[np.asarray(ids)]
        out = np.zeros(codes.shape[0], dtype=np.float64)
        for q in range(self.m):
            out += tables[q][codes[:, q].astype(np.int64)]
        return out

    def adc_distance(self, query: np.ndarray, ids: np.ndarray | None = None) -> np.ndarray:
        return self.adc_lookup(self.lookup_tables(query), ids)

    def stacked_adc_tables(self, queries: np.ndarray) -> np.ndarray:
        """Stack per-query lookup tables into one (m*k, Q) matrix."""
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty((self.m * self.k, queries.shape[0]), dtype=np.float64)
        dsub = self.dsub
        for q in range(self.m):
            diff = queries[:, None, q * dsub : (q + 1) * dsub] - self.codebooks[q][None, :, :]
            out[q * self.k : (q + 1) * self.k] = np.einsum("abj,abj->ab", diff, diff).T
        return out

    # ---- symmetric (code vs. code) ----

    def ctc_tables(self) -> np.ndarray:
        """Centroid-to-centroid squared distances, (m, k, k), cached."""
        if self._ctc is None:
            ctc = np.empty((self.m, self.k, self.k), dtype=np.float64)
            for q in range(self.m):
                ctc[q] = _pairwise_sq(self.codebooks[q], self.codebooks[q])
            self._ctc = ctc
        return self._ctc

    def stacked_symmetric_tables(self, ids: np.ndarray) -> np.ndarray:
        """Stack symmetric tables for target images into one (m*k, Q) matrix."""
        ids = np.asarray(ids)
        ctc = self.ctc_tables()
        out = np.empty((self.m * self.k, ids.shape[0]), dtype=np.float64)
        for q in range(self.m):
            out[q * self.k : (q + 1) * self.k] = ctc[q][:, self.codes[ids, q].astype(np.int64)]
        return out

    def symmetric_distance(self, image_id: int, ids: np.ndarray | None = None) -> np.ndarray:
        """Code-to-code distances from one image to others."""
        ctc = self.ctc_tables()
        own = self.codes[image_id].astype(np.int64)
        codes = self.codes if ids is None else self.codes[np.asarray(ids)]
        out = np.zeros(codes.shape[0], dtype=np.float64)
        for q in range(self.m):
            out += ctc[q, own[q]][codes[:, q].astype(np.int64)]
        return out

    def onehot(self, ids: np.ndarray) -> sparse.csr_matrix:
        """One-hot code matrix (len(ids), m*k); multiply by stacked tables to batch distances."""
        ids = np.asarray(ids)
        codes = self.codes[ids].astype(np.int64)
        cols = (codes + np.arange(self.m, dtype=np.int64) * self.k).ravel()
        indptr = np.arange(ids.shape[0] + 1, dtype=np.int64) * self.m
        return sparse.csr_matrix(
            (np.ones(cols.shape[0], dtype=np.float64), cols.astype(np.int32), indptr),
            shape=(ids.shape[0], self.m * self.k),
        )

    def batch_adc(self, candidate_ids: np.ndarray, queries: np.ndarray) -> np.ndarray:
        """Asymmetric distances (len(candidates), len(queries)) in one sparse matmul."""
        return np.asarray(self.onehot(candidate_ids) @ self.stacked_adc_tables(queries))

    def batch_symmetric(self, candidate_ids: np.ndarray, target_ids: np.ndarray) -> np.ndarray:
        """Symmetric distances (len(candidates), len(targets)) in one sparse matmul."""
        return np.asarray(self.onehot(candidate_ids) @ self.stacked_symmetric_tables(target_ids))

    # ---- persistence ----

    def save(self, path: str | Path) -> None:
        header = {
            "params": asdict(self.params),
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "k": self.k,
            "code_dtype": self.codes.dtype.str,
        }
        blob = json.dumps(header).encode()
        with open(path, "wb") as fh:
            fh.write(PQ_MAGIC)
            fh.write(struct.pack("<II", PQ_VERSION, len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(self.codebooks).tobytes())
            fh.write(np.ascontiguousarray(self.codes).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "PQIndex":
        with open(path, "rb") as fh:
            magic = fh.read(4)
            if magic != PQ_MAGIC:
                raise ValueError(f"not an index file: bad magic {magic!r}")
            version, blob_len = struct.unpack("<II", fh.read(8))
            if version != PQ_VERSION:
                raise ValueError(f"unsupported index version {version}")
            header = json.loads(fh.read(blob_len))
            params = PQParams(**header["params"])
            m, k, n, d = header["m"], header["k"], header["n"], header["d"]
            dsub = d // m
            codebooks = np.frombuffer(fh.read(m * k * dsub * 8), dtype=np.float64).reshape(m, k, dsub).copy()
            code_dtype = np.dtype(header["code_dtype"])
            codes = np.frombuffer(fh.read(n * m * code_dtype.itemsize), dtype=code_dtype).reshape(n, m).copy()
        return cls(params, codebooks, codes, d)


# ---- neighbor matrix ----


def build_knn_matrix(
    index: PQIndex,
    neighbors: int = 10,
    mem_cap_bytes: int = 8 << 30,
    chunk: int = 256,
) -> np.ndarray:
    """All-pairs symmetric-distance kNN ids, (n, min(neighbors, n-1)) int32.

    Neighbor lists exclude the image itself and are sorted by (distance
    ascending, id ascending). Refuses to start when the full distance matrix
    estimate n*n*8 bytes exceeds the cap, since cost scales with that square
    regardless of chunking.
    """
    n = index.n
    estimate = n * n * 8
    if estimate > mem_cap_bytes:
        raise IndexSizeError(
            f"kNN matrix over {n} images needs ~{estimate / (1 << 30):.1f} GiB "
            f"(cap {mem_cap_bytes / (1 << 30):.1f} GiB)"
        )
    kn = min(neighbors, n - 1)
    if kn < 1:
        return np.zeros((n, 0), dtype=np.int32)
    out = np.empty((n, kn), dtype=np.int32)
    all_onehot = index.onehot(np.arange(n))
    for start in range(0, n, chunk):
        ids = np.arange(start, min(start + chunk, n))
        dists = np.asarray(all_onehot @ index.stacked_symmetric_tables(ids))  # (n, |ids|)
        dists[ids, np.arange(ids.shape[0])] = np.inf
        kth = np.partition(dists, kn - 1, axis=0)[kn - 1]
        for t, i in enumerate(ids):
            col = dists[:, t]
            cand = np.flatnonzero(col <= kth[t])
            order = np.lexsort((cand, col[cand]))
            out[i] = cand[order[:kn]]
    return out


def save_knn_matrix(path: str | Path, matrix: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(KNN_MAGIC)
        fh.write(struct.pack("<IQQ", KNN_VERSION, matrix.shape[0], matrix.shape[1]))
        fh.write(np.ascontiguousarray(matrix, dtype=np.int32).tobytes())


def load_knn_matrix(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != KNN_MAGIC:
            raise ValueError(f"not a neighbor-matrix file: bad magic {magic!r}")
        version, n, kn = struct.unpack("<IQQ", fh.read(20))
        if version != KNN_VERSION:
            raise ValueError(f"unsupported neighbor-matrix version {version}")
        return np.frombuffer(fh.read(n * kn * 4), dtype=np.int32).reshape(n, kn).copy()


# ---- suggestion primitives ----


def knn_suggest(
    knn_matrix: np.ndarray,
    member_ids: np.ndarray,
    excluded_mask: np.ndarray,
    count: int,
    rng: np.random.Generator,
    member_sample: int | None = 50,
) -> np.ndarray:
    """Uniform draw from the recorded neighbors of (a sample of) bucket members."""
    members = np.sort(np.asarray(member_ids, dtype=np.int64))
    if members.size == 0 or count <= 0:
        return np.empty(0, dtype=np.int64)
    if member_sample is not None and members.size > member_sample:
        members = np.sort(rng.choice(members, member_sample, replace=False))
    pool = np.unique(knn_matrix[members].ravel()).astype(np.int64)
    pool = pool[~excluded_mask[pool]]
    if pool.size <= count:
        return pool
    return rng.choice(pool, count, replace=False).astype(np.int64)


def ann_search(
    index: PQIndex,
    abstract: np.ndarray,
    member_ids: np.ndarray,
    excluded_mask: np.ndarray,
    count: int,
    rng: np.random.Generator,
    candidate_cap: int | None = 50_000,
    member_cap: int | None = 25,
) -> np.ndarray:
    """Nearest unseen candidates by min asymmetric distance to sampled members.

    Candidates are a uniform sample of the unseen pool (capped), distances the
    minimum over a capped member sample, results ascending with ties toward
    the lower id. Disable both caps for an exhaustive scan.
    """
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    members = np.sort(np.asarray(member_ids, dtype=np.int64))
    if members.size == 0:
        return np.empty(0, dtype=np.int64)
    pool = np.flatnonzero(~excluded_mask)
    if pool.size == 0:
        return np.empty(0, dtype=np.int64)
    if candidate_cap is not None and pool.size > candidate_cap:
        cand = np.sort(rng.choice(pool, candidate_cap, replace=False))
    else:
        cand = pool
    if member_cap is not None and members.size > member_cap:
        members = np.sort(rng.choice(members, member_cap, replace=False))
    dists = index.batch_adc(cand, np.asarray(abstract[members], dtype=np.float64)).min(axis=1)
    order = np.lexsort((cand, dists))
    return cand[order[:count]].astype(np.int64)


def explorer_suggest(
    index: PQIndex,
    positive_ids: np.ndarray,
    excluded_mask: np.ndarray,
    count: int,
    rng: np.random.Generator,
    multiplier: int = 100,
) -> np.ndarray:
    """Outward-looking sampler: random candidates ranked farthest-first.

    Ranks a random unseen sample by descending minimum symmetric distance to
    the positive set; with no positives yet it is a plain uniform draw.
    """
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    pool = np.flatnonzero(~excluded_mask)
    if pool.size == 0:
        return np.empty(0, dtype=np.int64)
    take = min(count, pool.size)
    positives = np.unique(np.asarray(positive_ids, dtype=np.int64))
    if positives.size == 0:
        return rng.choice(pool, take, replace=False).astype(np.int64)
    n_cand = min(multiplier * count, pool.size)
    cand = np.sort(rng.choice(pool, n_cand, replace=False)) if n_cand < pool.size else pool
    # Chunk the positive side: stacked tables over a huge processed set would
    # not fit, and only the running minimum is needed.
    dmin = np.full(cand.shape[0], np.inf)
    cand_onehot = index.onehot(cand)
    for start in range(0, positives.shape[0], 2048):
        block = np.asarray(cand_onehot @ index.stacked_symmetric_tables(positives[start : start + 2048]))
        np.minimum(dmin, block.min(axis=1), out=dmin)
    order = np.lexsort((cand, -dmin))
    return cand[order[:take]].astype(np.int64)
