"""Command-line entry points: dataset generation/ingest, index lifecycle,
serving, and benchmark grids."""

from __future__ import annotations

import os
from pathlib import Path

import click
import numpy as np

from .dataset import Collection, CollectionManifest, load_collection, open_matrix
from .pq import PQIndex, PQParams, build_knn_matrix, load_knn_matrix, save_knn_matrix
from .synth import SynthConfig, generate_to_dir


def _resolve_manifest(dataset: str) -> Path:
    path = Path(dataset)
    if path.is_dir():
        path = path / "manifest.json"
    return path


def _load_features(path: str) -> np.ndarray:
    if path.endswith(".npy"):
        return np.load(path)
    return open_matrix(path, mmap=False)


@click.group()
def main() -> None:
    """Interactive bucket-based categorization engine."""


@main.command("gen-synth")
@click.argument("out_dir", type=click.Path())
@click.option("--n", default=10_000, show_default=True, help="Number of images.")
@click.option("--clusters", default=8, show_default=True, help="Planted cluster count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--d-abs", default=64, show_default=True, help="Abstract feature dimension.")
@click.option("--d-con", default=128, show_default=True, help="Concept vocabulary size.")
@click.option("--t", default=25, show_default=True, help="Concepts kept per image.")
@click.option("--noise", default=0.35, show_default=True, help="Abstract-space noise sigma.")
@click.option("--weights", default=None, help="Comma-separated cluster shares summing to 1.")
@click.option(
    "--paired-signatures",
    is_flag=True,
    help="Cluster pairs share a concept signature; only abstract vectors separate them.",
)
def gen_synth(out_dir, n, clusters, seed, d_abs, d_con, t, noise, weights, paired_signatures):
    """Generate a synthetic collection with ground-truth labels."""
    cfg = SynthConfig(
        n=n,
        clusters=clusters,
        d_abs=d_abs,
        d_con=d_con,
        t=t,
        seed=seed,
        noise=noise,
        weights=[float(x) for x in weights.split(",")] if weights else [],
        paired_signatures=paired_signatures,
    )
    manifest = generate_to_dir(cfg, out_dir)
    click.echo(f"wrote {manifest.n} images to {out_dir} (labels.json included)")


@main.command()
@click.argument("out_dir", type=click.Path())
@click.option("--abstract", required=True, type=click.Path(exists=True), help=".npy or binary matrix file.")
@click.option("--concepts", required=True, type=click.Path(exists=True), help=".npy or binary matrix file.")
@click.option("--t", default=25, show_default=True, help="Concepts kept per image.")
@click.option("--name", default="collection", show_default=True)
@click.option("--uri-template", default="images/{image_id}.jpg", show_default=True)
def ingest(out_dir, abstract, concepts, t, name, uri_template):
    """Validate raw feature matrices and write a collection directory."""
    from scipy import sparse

    abs_mat = np.asarray(_load_features(abstract), dtype=np.float32)
    con_mat = np.asarray(_load_features(concepts), dtype=np.float64)
    if abs_mat.ndim != 2 or con_mat.ndim != 2:
        raise click.ClickException("feature files must be 2-D matrices")
    if abs_mat.shape[0] != con_mat.shape[0]:
        raise click.ClickException(
            f"row mismatch: abstract has {abs_mat.shape[0]} rows, concepts {con_mat.shape[0]}"
        )
    collection = Collection(
        abstract=abs_mat,
        concepts=sparse.csr_matrix(con_mat),
        t=t,
        uri_template=uri_template,
        name=name,
    )
    manifest = collection.save(out_dir)
    # Round-trip through the loader so validation and sparsification run.
    load_collection(manifest)
    click.echo(f"ingested {manifest.n} images into {out_dir}")


@main.group()
def index() -> None:
    """Similarity-index lifecycle."""


@index.command("build")
@click.option("--dataset", required=True, type=click.Path(exists=True), help="Collection dir or manifest.")
@click.option("--out", required=True, type=click.Path())
@click.option("--m", default=32, show_default=True, help="Subquantizer count.")
@click.option("--k-cap", default=1024, show_default=True, help="Centroid cap per subquantizer.")
@click.option("--seed", default=0, show_default=True)
@click.option("--train-sample", default=25_000, show_default=True)
def index_build(dataset, out, m, k_cap, seed, train_sample):
    """Train codebooks and encode the collection."""
    collection = load_collection(CollectionManifest.load(_resolve_manifest(dataset)))
    params = PQParams(m=m, k_cap=k_cap, seed=seed, train_sample=train_sample)
    built = PQIndex.build(np.asarray(collection.abstract), params)
    built.save(out)
    click.echo(f"index: n={built.n} m={built.m} k={built.k} -> {out}")


@index.command("knn-matrix")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--neighbors", default=10, show_default=True)
@click.option("--mem-cap-gb", default=8.0, show_default=True, help="Refusal threshold for n^2 cost.")
def index_knn(index_path, out, neighbors, mem_cap_gb):
    """Precompute the all-pairs nearest-neighbor id matrix."""
    built = PQIndex.load(index_path)
    matrix = build_knn_matrix(built, neighbors=neighbors, mem_cap_bytes=int(mem_cap_gb * (1 << 30)))
    save_knn_matrix(out, matrix)
    click.echo(f"neighbor matrix: {matrix.shape[0]} x {matrix.shape[1]} -> {out}")


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True), help="Collection dir or manifest.")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--knn", type=click.Path(exists=True), default=None, help="Optional neighbor matrix.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--sessions-dir", default=None, help="Defaults to <data root>/sessions.")
def serve(dataset, index_path, knn, host, port, sessions_dir):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    collection = load_collection(CollectionManifest.load(_resolve_manifest(dataset)))
    built = PQIndex.load(index_path)
    knn_matrix = load_knn_matrix(knn) if knn else None
    if sessions_dir is None:
        root = os.environ.get("BUCKETEER_DATA_ROOT", ".")
        sessions_dir = str(Path(root) / "sessions")
    app = create_app(collection, built, knn_matrix, sessions_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def bench() -> None:
    """Actor-driven benchmark grids."""


@bench.command("run")
@click.option("--config", required=True, type=click.Path(exists=True), help="Grid TOML file.")
@click.option("--out", required=True, type=click.Path(), help="Report output directory.")
@click.option("--workers", default=1, show_default=True)
def bench_run(config, out, workers):
    """Execute a benchmark grid and write CSVs, curves, and figures."""
    from .report import run_grid

    curves = run_grid(config, out, workers=workers)
    click.echo(f"{len(curves['runs'])} run configurations -> {out}")


if __name__ == "__main__":
    main()
