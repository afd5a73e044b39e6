"""Interactive bucket-based categorization engine for image collections."""

from .dataset import Collection, CollectionManifest, IngestError, compress_concepts, load_collection
from .engine import Engine, EngineConfig, Suggestion, SuggestResult, compute_split, roulette_source
from .pq import PQIndex, PQParams, build_knn_matrix
from .session import DISCARD, ConstraintError, SessionState, UnknownEntityError

__version__ = "0.1.0"

__all__ = [
    "Collection",
    "CollectionManifest",
    "IngestError",
    "compress_concepts",
    "load_collection",
    "Engine",
    "EngineConfig",
    "Suggestion",
    "SuggestResult",
    "compute_split",
    "roulette_source",
    "PQIndex",
    "PQParams",
    "build_knn_matrix",
    "DISCARD",
    "ConstraintError",
    "SessionState",
    "UnknownEntityError",
    "__version__",
]
