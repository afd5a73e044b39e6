"""Benchmark reporting: delimited outputs, curve extracts, and figures.

The grid runner executes engine-config x actor-config x seed cells, writes one
metrics.csv and timings.csv per cell (metrics files contain no timestamps so
reruns are byte-comparable), then aggregates macro curves at fixed
processed-image ticks and renders them to PNG files next to the CSVs.
"""

from __future__ import annotations

import csv
import json
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import CollectionManifest, load_collection
from .engine import EngineConfig
from .harness import ActorConfig, GroundTruth, MetricsLog, run_session
from .pq import PQIndex, PQParams, build_knn_matrix
from .synth import SynthConfig, generate

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

TICKS = (300, 600, 900, 1800, 2700)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header: list[str], table: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in table:
            writer.writerow([_fmt(v) for v in row])


def write_metrics_csv(log: MetricsLog, path: str | Path) -> None:
    header, table = log.metrics_table()
    write_csv(path, header, table)


def write_timings_csv(log: MetricsLog, path: str | Path) -> None:
    header, table = log.timings_table()
    write_csv(path, header, table)


def curve_at_ticks(log: MetricsLog, ticks=TICKS) -> dict:
    precision, recall = [], []
    for tick in ticks:
        row = log.at_processed(tick)
        precision.append(None if row is None else row.macro_precision)
        recall.append(None if row is None else row.macro_recall)
    return {"macro_precision": precision, "macro_recall": recall}


def _mean_ignoring_none(columns: list[list[float | None]]) -> list[float | None]:
    out = []
    for values in zip(*columns):
        defined = [v for v in values if v is not None]
        out.append(sum(defined) / len(defined) if defined else None)
    return out


def render_figures(curves: dict, out_dir: str | Path) -> list[Path]:
    """Plot the aggregated macro curves to PNG files; returns the paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    ticks = curves["ticks"]
    written = []
    for metric, label in (("macro_precision", "macro precision"), ("macro_recall", "macro recall")):
        fig, ax = plt.subplots(figsize=(7.5, 4.5))
        for key in sorted(curves["runs"]):
            values = [np.nan if v is None else v for v in curves["runs"][key][metric]]
            ax.plot(ticks, values, marker="o", linewidth=1.4, label=key)
        ax.set_xlabel("images processed")
        ax.set_ylabel(label)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
        if curves["runs"]:
            ax.legend(fontsize=7, loc="lower right")
        fig.tight_layout()
        path = out / f"{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written


# ---- grid execution ----

_CACHE: dict = {}


def _dataset_from_spec(spec: dict):
    key = ("dataset", json.dumps(spec, sort_keys=True))
    if key in _CACHE:
        return _CACHE[key]
    if "synth" in spec:
        collection, labels_doc = generate(SynthConfig(**spec["synth"]))
        truth = GroundTruth.from_doc(labels_doc)
    elif "manifest" in spec:
        manifest = CollectionManifest.load(spec["manifest"])
        collection = load_collection(manifest)
        labels_path = spec.get("labels") or str(Path(spec["manifest"]).parent / "labels.json")
        truth = GroundTruth.load(labels_path)
    else:
        raise ValueError("dataset spec needs either a synth table or a manifest path")
    _CACHE[key] = (collection, truth)
    return collection, truth


def _index_from_spec(dataset_spec: dict, index_spec: dict):
    key = ("index", json.dumps(dataset_spec, sort_keys=True), json.dumps(index_spec, sort_keys=True))
    if key in _CACHE:
        return _CACHE[key]
    collection, _ = _dataset_from_spec(dataset_spec)
    params = PQParams(**{k: v for k, v in index_spec.items() if k not in ("neighbors",)})
    index = PQIndex.build(np.asarray(collection.abstract), params)
    _CACHE[key] = index
    return index


def _knn_from_spec(dataset_spec: dict, index_spec: dict):
    key = ("knn", json.dumps(dataset_spec, sort_keys=True), json.dumps(index_spec, sort_keys=True))
    if key in _CACHE:
        return _CACHE[key]
    index = _index_from_spec(dataset_spec, index_spec)
    matrix = build_knn_matrix(index, neighbors=int(index_spec.get("neighbors", 10)))
    _CACHE[key] = matrix
    return matrix


def run_cell(payload: dict) -> dict:
    """Execute one (engine, actor, seed) cell and write its CSVs."""
    dataset_spec = payload["dataset"]
    index_spec = payload["index"]
    collection, truth = _dataset_from_spec(dataset_spec)
    index = _index_from_spec(dataset_spec, index_spec)
    engine_cfg = EngineConfig.from_dict(payload["engine"])
    seed = int(payload["seed"])
    engine_cfg = replace(engine_cfg, seed=100_000 + seed)
    knn_matrix = _knn_from_spec(dataset_spec, index_spec) if engine_cfg.nn_mode == "knn" else None
    actor_cfg = ActorConfig(seed=seed, **payload["actor"])
    log = run_session(collection, index, engine_cfg, truth, actor_cfg, knn_matrix=knn_matrix)
    cell_dir = Path(payload["out_dir"])
    cell_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(log, cell_dir / "metrics.csv")
    write_timings_csv(log, cell_dir / "timings.csv")
    return {
        "key": payload["key"],
        "seed": seed,
        "curve": curve_at_ticks(log),
        "processed": log.processed(),
    }


def _spec_list(node) -> list[dict]:
    """Accept either an array of tables or a table of named tables."""
    if isinstance(node, dict):
        return [dict(node[name]) for name in sorted(node)]
    return [dict(item) for item in node]


def run_grid(config_path: str | Path, out_dir: str | Path, workers: int = 1) -> dict:
    """Run every cell of a benchmark grid config and write the report files.

    Per-cell failures are recorded in failures.csv and do not stop the grid.
    Returns the aggregated curves document.
    """
    doc = tomllib.loads(Path(config_path).read_text())
    for section in ("dataset", "engines", "actors"):
        if section not in doc:
            raise ValueError(f"grid config is missing the [{section}] section")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset_spec = doc["dataset"]
    index_spec = doc.get("index", {})
    tasks = []
    for engine_doc in _spec_list(doc["engines"]):
        engine_cfg = EngineConfig.from_dict(engine_doc)
        for actor_doc in _spec_list(doc["actors"]):
            actor_doc = dict(actor_doc)
            seeds = actor_doc.pop("seeds", [0])
            actor_tag = f"{actor_doc.get('metaphor', 'grid')}-err{actor_doc.get('err', 0.0):g}"
            key = f"{engine_cfg.run_id()}+{actor_tag}"
            for seed in seeds:
                tasks.append(
                    {
                        "dataset": dataset_spec,
                        "index": index_spec,
                        "engine": dict(engine_doc),
                        "actor": actor_doc,
                        "seed": int(seed),
                        "key": key,
                        "out_dir": str(out / "runs" / key / f"seed-{seed}"),
                    }
                )

    results, failures = [], []
    if workers <= 1:
        for task in tasks:
            try:
                results.append(run_cell(task))
            except Exception:
                failures.append([task["key"], task["seed"], traceback.format_exc(limit=3)])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, task): task for task in tasks}
            for future in as_completed(futures):
                task = futures[future]
                try:
                    results.append(future.result())
                except Exception:
                    failures.append([task["key"], task["seed"], traceback.format_exc(limit=3)])

    by_key: dict[str, list[dict]] = {}
    for result in results:
        by_key.setdefault(result["key"], []).append(result)
    curves = {"ticks": list(TICKS), "runs": {}}
    aggregate_rows = []
    for key in sorted(by_key):
        cells = sorted(by_key[key], key=lambda c: c["seed"])
        precision = _mean_ignoring_none([c["curve"]["macro_precision"] for c in cells])
        recall = _mean_ignoring_none([c["curve"]["macro_recall"] for c in cells])
        curves["runs"][key] = {
            "macro_precision": precision,
            "macro_recall": recall,
            "seeds": [c["seed"] for c in cells],
        }
        aggregate_rows.append([key, len(cells)] + precision + recall)

    header = ["run", "seeds"]
    header += [f"precision_at_{t}" for t in TICKS]
    header += [f"recall_at_{t}" for t in TICKS]
    write_csv(out / "aggregate.csv", header, aggregate_rows)
    (out / "curves.json").write_text(json.dumps(curves, indent=2) + "\n")
    if failures:
        write_csv(out / "failures.csv", ["run", "seed", "error"], failures)
    render_figures(curves, out)
    return curves
