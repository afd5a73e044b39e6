"""Collection ingest: binary feature matrices, manifests, and top-t concept sparsification.

A collection is described by a JSON manifest pointing at two little-endian
binary matrix files: a dense "abstract" matrix used by the similarity index,
and a dense "concept" matrix that is sparsified at load time (only the top-t
values per row are kept). Once loaded, a Collection is immutable.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

MATRIX_MAGIC = b"BKFM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIQQI")  # magic, version, n, d, element width

_WIDTH_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class IngestError(Exception):
    """Raised when a feature file or manifest fails validation.

    Carries the offending file and, when applicable, the row index so the
    caller can report exactly where the data went bad.
    """

    def __init__(self, message: str, *, file: str | None = None, row: int | None = None):
        parts = [message]
        if file is not None:
            parts.append(f"file={file}")
        if row is not None:
            parts.append(f"row={row}")
        super().__init__(" | ".join(parts))
        self.file = file
        self.row = row


def write_matrix(path: str | Path, array: np.ndarray) -> None:
    """Write a 2-D float array as a little-endian binary matrix file."""
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float32)
    width = arr.dtype.itemsize
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, arr.shape[0], arr.shape[1], width))
        fh.write(np.ascontiguousarray(arr, dtype=_WIDTH_DTYPES[width]).tobytes())


def read_matrix_header(path: str | Path) -> tuple[int, int, np.dtype]:
    path = Path(path)
    if not path.exists():
        raise IngestError("feature file missing", file=str(path))
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise IngestError("truncated header", file=str(path))
    magic, version, n, d, width = _HEADER.unpack(raw)
    if magic != MATRIX_MAGIC:
        raise IngestError(f"bad magic {magic!r}", file=str(path))
    if version != MATRIX_VERSION:
        raise IngestError(f"unsupported matrix version {version}", file=str(path))
    if width not in _WIDTH_DTYPES:
        raise IngestError(f"unsupported element width {width}", file=str(path))
    return n, d, _WIDTH_DTYPES[width]


def open_matrix(path: str | Path, mmap: bool = True) -> np.ndarray:
    """Open a binary matrix file, memory-mapped by default."""
    n, d, dtype = read_matrix_header(path)
    expected = _HEADER.size + n * d * dtype.itemsize
    actual = Path(path).stat().st_size
    if actual != expected:
        have_rows = (actual - _HEADER.size) // (d * dtype.itemsize) if d else 0
        raise IngestError(
            f"shape mismatch: header declares {n} rows x {d} cols but file holds {have_rows} rows",
            file=str(path),
        )
    if mmap:
        return np.memmap(path, dtype=dtype, mode="r", offset=_HEADER.size, shape=(n, d))
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        data = np.fromfile(fh, dtype=dtype, count=n * d)
    return data.reshape(n, d)


def file_checksum(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def compress_concepts(dense_row: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Keep the t largest positive values of a dense concept row.

    Ties are broken toward the lower concept index; zero or negative entries
    are never stored, so rows with fewer than t positive entries come back
    shorter. Returns (indices ascending, values).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    row = np.asarray(dense_row, dtype=np.float64)
    if row.ndim != 1:
        raise ValueError("expected a 1-D row")
    # Primary key: value descending; secondary: index ascending.
    order = np.lexsort((np.arange(row.shape[0]), -row))
    top = order[: min(t, row.shape[0])]
    top = top[row[top] > 0.0]
    top.sort()
    return top.astype(np.int64), row[top]


@dataclass
class CollectionManifest:
    """Declared shape and file locations of a collection."""

    n: int
    d_abs: int
    d_con: int
    t: int
    abstract_path: str
    concept_path: str
    checksums: dict[str, str] = field(default_factory=dict)
    uri_template: str = "images/{image_id}.jpg"
    name: str = "collection"

    def validate(self) -> None:
        if self.n < 1:
            raise IngestError(f"n must be >= 1, got {self.n}")
        if self.t < 1:
            raise IngestError(f"t must be >= 1, got {self.t}")
        if self.d_abs < 1 or self.d_con < 1:
            raise IngestError(f"dimensions must be positive, got {self.d_abs}x{self.d_con}")

    def to_json(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "n": self.n,
            "d_abs": self.d_abs,
            "d_con": self.d_con,
            "t": self.t,
            "files": {"abstract": self.abstract_path, "concepts": self.concept_path},
            "checksums": self.checksums,
            "uri_template": self.uri_template,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CollectionManifest":
        return cls(
            n=int(doc["n"]),
            d_abs=int(doc["d_abs"]),
            d_con=int(doc["d_con"]),
            t=int(doc["t"]),
            abstract_path=doc["files"]["abstract"],
            concept_path=doc["files"]["concepts"],
            checksums=dict(doc.get("checksums", {})),
            uri_template=doc.get("uri_template", "images/{image_id}.jpg"),
            name=doc.get("name", "collection"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CollectionManifest":
        path = Path(path)
        if not path.exists():
            raise IngestError("manifest missing", file=str(path))
        manifest = cls.from_json(json.loads(path.read_text()))
        manifest._base_dir = path.parent  # type: ignore[attr-defined]
        return manifest

    def resolve(self, relpath: str) -> Path:
        base = getattr(self, "_base_dir", Path("."))
        p = Path(relpath)
        return p if p.is_absolute() else base / p


@dataclass(frozen=True)
class ImageRecord:
    """One collection item with both feature representations."""

    image_id: int
    abstract_vec: np.ndarray
    concept_vec: list[tuple[int, float]]
    display_uri: str
    metadata: str | None = None


class Collection:
    """Immutable loaded collection: dense abstract matrix + sparse concepts.

    Safe for unrestricted concurrent reads; nothing here mutates after
    construction.
    """

    def __init__(
        self,
        abstract: np.ndarray,
        concepts: sparse.csr_matrix,
        t: int,
        uri_template: str = "images/{image_id}.jpg",
        name: str = "collection",
        metadata: list[str] | None = None,
    ):
        self.abstract = abstract
        self.concepts = concepts
        self.t = t
        self.uri_template = uri_template
        self.name = name
        self.metadata = metadata

    @property
    def n(self) -> int:
        return self.abstract.shape[0]

    @property
    def d_abs(self) -> int:
        return self.abstract.shape[1]

    @property
    def d_con(self) -> int:
        return self.concepts.shape[1]

    def display_uri(self, image_id: int) -> str:
        return self.uri_template.format(image_id=image_id)

    def record(self, image_id: int) -> ImageRecord:
        if not 0 <= image_id < self.n:
            raise KeyError(f"image {image_id} out of range [0, {self.n})")
        row = self.concepts.getrow(image_id)
        pairs = list(zip(row.indices.tolist(), row.data.tolist()))
        meta = self.metadata[image_id] if self.metadata else None
        return ImageRecord(
            image_id=image_id,
            abstract_vec=np.asarray(self.abstract[image_id]),
            concept_vec=pairs,
            display_uri=self.display_uri(image_id),
            metadata=meta,
        )

    def records(self):
        for i in range(self.n):
            yield self.record(i)

    def save(self, out_dir: str | Path) -> CollectionManifest:
        """Write feature files plus manifest into out_dir and return the manifest."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        abs_path, con_path = out / "abstract.bkm", out / "concepts.bkm"
        write_matrix(abs_path, np.asarray(self.abstract, dtype=np.float32))
        write_matrix(con_path, np.asarray(self.concepts.toarray(), dtype=np.float32))
        manifest = CollectionManifest(
            n=self.n,
            d_abs=self.d_abs,
            d_con=self.d_con,
            t=self.t,
            abstract_path=abs_path.name,
            concept_path=con_path.name,
            checksums={abs_path.name: file_checksum(abs_path), con_path.name: file_checksum(con_path)},
            uri_template=self.uri_template,
            name=self.name,
        )
        manifest.save(out / "manifest.json")
        manifest._base_dir = out  # type: ignore[attr-defined]
        return manifest


def _check_finite_chunked(matrix: np.ndarray, path: str, chunk: int = 65536) -> None:
    for start in range(0, matrix.shape[0], chunk):
        block = np.asarray(matrix[start : start + chunk])
        bad = ~np.isfinite(block)
        if bad.any():
            row = start + int(np.flatnonzero(bad.any(axis=1))[0])
            raise IngestError("non-finite value", file=path, row=row)


def load_collection(
    manifest: CollectionManifest,
    mmap: bool = True,
    verify_checksums: bool = True,
) -> Collection:
    """Load and validate the collection a manifest describes.

    Shapes are checked against the manifest, every value must be finite, and
    the concept matrix is sparsified to the manifest's top-t cap.
    """
    manifest.validate()
    abs_path = manifest.resolve(manifest.abstract_path)
    con_path = manifest.resolve(manifest.concept_path)

    if verify_checksums:
        for rel, path in ((manifest.abstract_path, abs_path), (manifest.concept_path, con_path)):
            want = manifest.checksums.get(Path(rel).name) or manifest.checksums.get(rel)
            if want:
                got = file_checksum(path)
                if got != want:
                    raise IngestError(f"checksum mismatch: want {want}, got {got}", file=str(path))

    abstract = open_matrix(abs_path, mmap=mmap)
    concepts_dense = open_matrix(con_path, mmap=True)

    for label, mat, want_d in (
        ("abstract", abstract, manifest.d_abs),
        ("concepts", concepts_dense, manifest.d_con),
    ):
        path = abs_path if label == "abstract" else con_path
        if mat.shape[0] != manifest.n:
            raise IngestError(
                f"shape mismatch: manifest declares n={manifest.n} but {label} file holds {mat.shape[0]} rows",
                file=str(path),
            )
        if mat.shape[1] != want_d:
            raise IngestError(
                f"shape mismatch: manifest declares {want_d} columns but {label} file holds {mat.shape[1]}",
                file=str(path),
            )

    _check_finite_chunked(abstract, str(abs_path))
    concepts = _sparsify_matrix(concepts_dense, manifest.t, str(con_path), manifest.d_con)

    return Collection(
        abstract=abstract,
        concepts=concepts,
        t=manifest.t,
        uri_template=manifest.uri_template,
        name=manifest.name,
    )


def _sparsify_matrix(dense: np.ndarray, t: int, path: str, d_con: int, chunk: int = 16384) -> sparse.csr_matrix:
    """Top-t sparsification of the whole concept matrix, chunked for memory."""
    n = dense.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    idx_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    t_eff = min(t, d_con)
    for start in range(0, n, chunk):
        block = np.asarray(dense[start : start + chunk], dtype=np.float64)
        bad = ~np.isfinite(block)
        if bad.any():
            row = start + int(np.flatnonzero(bad.any(axis=1))[0])
            raise IngestError("non-finite value", file=path, row=row)
        # Stable argsort on -value sorts by value descending and, among equal
        # values, index ascending: exactly the keep-the-lower-index tie rule.
        order = np.argsort(-block, axis=1, kind="stable")[:, :t_eff]
        vals = np.take_along_axis(block, order, axis=1)
        pos = vals > 0.0
        # CSR wants per-row indices ascending; push dropped slots past d_con.
        idx_masked = np.where(pos, order, d_con)
        resort = np.argsort(idx_masked, axis=1, kind="stable")
        idx_sorted = np.take_along_axis(idx_masked, resort, axis=1)
        val_sorted = np.take_along_axis(vals, resort, axis=1)
        keep = idx_sorted < d_con
        idx_parts.append(idx_sorted[keep])
        val_parts.append(val_sorted[keep])
        counts[start : start + block.shape[0]] = keep.sum(axis=1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate(idx_parts) if idx_parts else np.zeros(0, dtype=np.int64)
    values = np.concatenate(val_parts) if val_parts else np.zeros(0, dtype=np.float64)
    return sparse.csr_matrix((values, indices.astype(np.int32), indptr), shape=(n, d_con))
