"""
Experiment driver: heatmaps over skeleton x muscle grids and kappa-plot
sweeps. Every cell is independent and owns its random stream, so cells may
run on a thread pool; rows are re-sorted into enum order before writing.
"""

import csv
import json
import logging
import math
import threading
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter

import numpy as np
from cachetools import LRUCache, cached

from bgslab.config import settings
from bgslab.core.errors import ConfigurationError, ConvergenceError, IncompatibleVariantError, ParameterError
from bgslab.core.matcore import Mat
from bgslab.schemas.matrix import MatrixKind, MatrixSpec
from bgslab.schemas.report import CellRecord, StabilityReport
from bgslab.schemas.run_config import KappaPlotKind, MetricName, OutputFormat, RunConfig
from bgslab.schemas.variants import CellStatus, MuscleId, SkeletonId, enum_rank
from bgslab.services.matgen_service import generate_with_meta
from bgslab.services.metrics_service import build_report, condition_number, failed_report
from bgslab.services.muscle_service import MuscleParams, intra_orthogonalize
from bgslab.services.skeleton_service import block_orthogonalize, check_compatibility, uses_tfix
from bgslab.services.svg_service import HeatmapGrid, PlotData, PlotSeries, emit_heatmap_svg, emit_svg
from bgslab.utils.helpers import derive_seed, encode_float, make_rng

logger = logging.getLogger(__name__)

CSV_HEADER = ("variant", "matrix", "metric", "value", "status", "kappa", "seed")
HEATMAP_METRICS = (MetricName.LOO, MetricName.REL_RES)

DEFAULT_SWEEPS: dict[KappaPlotKind, list[float]] = {
    KappaPlotKind.STANDARD: [float(t) for t in range(1, 17)],
    KappaPlotKind.GLUED: [float(e) for e in range(1, 9)],
    KappaPlotKind.MONOMIAL: [float(s) for s in range(2, 13, 2)],
}


@dataclass(slots=True)
class LoadedMatrix:
    spec: MatrixSpec
    X: Mat
    meta: dict[str, object]
    kappa: float


@dataclass(frozen=True, slots=True)
class Cell:
    matrix: MatrixSpec
    skeleton: SkeletonId | None
    muscle: MuscleId


@dataclass(slots=True)
class HarnessOutput:
    records: list[CellRecord]
    files: list[Path] = field(default_factory=list)


@cached(cache=LRUCache(maxsize=settings.MATRIX_CACHE_SIZE), lock=threading.Lock())
def load_matrix(spec: MatrixSpec) -> LoadedMatrix:
    """Generate (or reuse) a test matrix together with its measured condition number."""
    generated = generate_with_meta(spec)
    X = generated.X
    X.setflags(write=False)
    try:
        kappa = condition_number(X)
    except ConvergenceError as exc:
        logger.warning("condition number of %s not available: %s", spec.label(), exc)
        kappa = math.nan
    logger.debug("generated %s (%sx%s), kappa=%.3e", spec.label(), *X.shape, kappa)
    return LoadedMatrix(spec=spec, X=X, meta=generated.meta, kappa=kappa)


def variant_label(cell: Cell, cfg: RunConfig) -> str:
    if cell.skeleton is None:
        return cell.muscle.value
    suffix = "_T" if uses_tfix(cell.skeleton, cfg.options) else ""
    return f"{cell.skeleton.value}{suffix}:{cell.muscle.value}"


def cell_seed(cell: Cell, cfg: RunConfig) -> int:
    skeleton = cell.skeleton.value if cell.skeleton is not None else "none"
    return derive_seed(cfg.seed, cell.matrix.label(), skeleton, cell.muscle.value)


def evaluate_cell(cell: Cell, cfg: RunConfig) -> CellRecord:
    loaded = load_matrix(cell.matrix)
    label = variant_label(cell, cfg)
    seed = cell_seed(cell, cfg)
    started = perf_counter()
    try:
        report = _run_cell(cell, cfg, loaded, seed)
    except Exception:
        logger.exception("cell %s on %s raised", label, cell.matrix.label())
        raise
    elapsed_ms = (perf_counter() - started) * 1000

    if settings.CELL_LOGGING_ENABLED or elapsed_ms >= settings.SLOW_CELL_LOG_MS:
        logger.info("cell %s on %s -> %s in %.2fms", label, cell.matrix.label(), report.status.value, elapsed_ms)
    if report.status is CellStatus.INCOMPATIBLE:
        logger.debug("cell %s skipped: incompatible pair", label)
    elif report.status is not CellStatus.OK:
        logger.info("cell %s on %s broke down: %s", label, cell.matrix.label(), report.status.value)

    return CellRecord(
        variant=label,
        matrix=cell.matrix.label(),
        skeleton=cell.skeleton,
        muscle=cell.muscle,
        report=report,
        reason=None if report.status is CellStatus.OK else report.status.value,
    )


def _run_cell(cell: Cell, cfg: RunConfig, loaded: LoadedMatrix, seed: int) -> StabilityReport:
    rng = make_rng(seed)
    opts = cfg.options
    if cell.skeleton is None:
        params = MuscleParams(rpltol=opts.rpltol, rng=rng, auto_shift=opts.auto_shift)
        result = intra_orthogonalize(loaded.X, cell.muscle, params)
        return build_report(loaded.X, result, kappa=loaded.kappa, seed=seed, variant=cell.muscle)

    try:
        check_compatibility(cell.skeleton, cell.muscle, opts)
    except IncompatibleVariantError:
        return failed_report(CellStatus.INCOMPATIBLE, kappa=loaded.kappa, seed=seed)
    result = block_orthogonalize(loaded.X, cfg.dims, cell.skeleton, cell.muscle, opts, rng)
    return build_report(loaded.X, result, kappa=loaded.kappa, seed=seed, variant=cell.skeleton)


def _sort_key(record: CellRecord, matrix_order: dict[str, int]) -> tuple:
    skeleton_rank = -1 if record.skeleton is None else enum_rank(record.skeleton)
    return matrix_order[record.matrix], skeleton_rank, enum_rank(record.muscle)


def evaluate_cells(cells: list[Cell], cfg: RunConfig) -> list[CellRecord]:
    if cfg.workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(lambda cell: evaluate_cell(cell, cfg), cells))
    else:
        records = [evaluate_cell(cell, cfg) for cell in cells]
    matrix_order: dict[str, int] = {}
    for cell in cells:
        matrix_order.setdefault(cell.matrix.label(), len(matrix_order))
    return sorted(records, key=lambda record: _sort_key(record, matrix_order))


def _grid_cells(specs: Iterable[MatrixSpec], cfg: RunConfig) -> list[Cell]:
    skeletons: list[SkeletonId | None] = list(cfg.skeletons) or [None]
    return [Cell(spec, skeleton, muscle) for spec in specs for skeleton in skeletons for muscle in cfg.muscles]


def _metric_value(record: CellRecord, metric: MetricName) -> float:
    return float(getattr(record.report, metric.value))


def _csv_rows(records: Iterable[CellRecord], metrics: Iterable[MetricName]) -> list[list[str]]:
    rows = []
    for record in records:
        for metric in metrics:
            rows.append([
                record.variant,
                record.matrix,
                metric.value,
                encode_float(_metric_value(record, metric)),
                record.status.value,
                encode_float(record.report.kappa),
                str(record.report.seed),
            ])
    return rows


def _status_rows(records: Iterable[CellRecord]) -> list[list[str]]:
    return [
        [
            record.variant,
            record.matrix,
            "status",
            encode_float(1.0 if record.status is CellStatus.OK else math.nan),
            record.status.value,
            encode_float(record.report.kappa),
            str(record.report.seed),
        ]
        for record in records
    ]


def write_csv(path: Path, rows: list[list[str]]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    logger.info("wrote %s (%s rows)", path, len(rows))
    return path


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return encode_float(value)
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(_json_safe(payload), indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _bundle(command: str, cfg: RunConfig, matrices: list[LoadedMatrix], records: list[CellRecord]) -> dict:
    return {
        "command": command,
        "dims": cfg.dims.label(),
        "seed": cfg.seed,
        "options": cfg.options.model_dump(mode="json"),
        "matrices": [
            {"label": loaded.spec.label(), "kappa": loaded.kappa, "meta": loaded.meta}
            for loaded in matrices
        ],
        "cells": [record.model_dump(mode="json") for record in records],
    }


def _unique(items: Iterable) -> list:
    return list(dict.fromkeys(items))


def run_heatmap(cfg: RunConfig) -> HarnessOutput:
    """Evaluate every (matrix, skeleton, muscle) cell and write loo / rel_res / status grids per matrix."""
    if not cfg.matrices:
        raise ConfigurationError("no matrices requested")

    specs = [
        MatrixSpec(kind=kind, dims=cfg.dims, seed=derive_seed(cfg.seed, kind.value))
        for kind in _unique(cfg.matrices)
    ]
    try:
        matrices = [load_matrix(spec) for spec in specs]
    except ParameterError as exc:
        raise ConfigurationError(str(exc)) from exc
    records = evaluate_cells(_grid_cells(specs, cfg), cfg)
    output = HarnessOutput(records=records)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        kind = spec.kind.value
        mine = [record for record in records if record.matrix == spec.label()]
        if cfg.wants(OutputFormat.CSV):
            for metric in HEATMAP_METRICS:
                output.files.append(write_csv(cfg.output_dir / f"heatmap_{kind}_{metric.value}.csv", _csv_rows(mine, [metric])))
            output.files.append(write_csv(cfg.output_dir / f"heatmap_{kind}_status.csv", _status_rows(mine)))
        if cfg.wants(OutputFormat.SVG):
            for metric in HEATMAP_METRICS:
                grid = _heatmap_grid(f"{kind}: {metric.value}", mine, metric, cfg)
                path = cfg.output_dir / f"heatmap_{kind}_{metric.value}.svg"
                emit_heatmap_svg(grid, path)
                logger.info("wrote %s", path)
                output.files.append(path)

    if cfg.wants(OutputFormat.JSON):
        output.files.append(write_json(cfg.output_dir / "heatmap.json", _bundle("heatmap", cfg, matrices, records)))
    return output


def _heatmap_grid(title: str, records: list[CellRecord], metric: MetricName, cfg: RunConfig) -> HeatmapGrid:
    rows: list[SkeletonId | None] = list(cfg.skeletons) or [None]
    lookup = {(record.skeleton, record.muscle): record for record in records}
    values, reasons = [], []
    for skeleton in rows:
        cells = [lookup[(skeleton, muscle)] for muscle in cfg.muscles]
        values.append([_metric_value(record, metric) for record in cells])
        reasons.append([record.reason for record in cells])
    return HeatmapGrid(
        title=title,
        row_labels=[_row_label(skeleton, cfg) for skeleton in rows],
        col_labels=[muscle.value for muscle in cfg.muscles],
        values=values,
        reasons=reasons,
    )


def _row_label(skeleton: SkeletonId | None, cfg: RunConfig) -> str:
    if skeleton is None:
        return "none"
    return skeleton.value + ("_T" if uses_tfix(skeleton, cfg.options) else "")


def kappa_plot_specs(kind: KappaPlotKind, cfg: RunConfig) -> list[MatrixSpec]:
    """One matrix per sweep point: exponents t (standard), glued exponents, or generator block sizes (monomial)."""
    sweep = DEFAULT_SWEEPS[kind] if cfg.sweep is None else cfg.sweep
    if not sweep:
        raise ConfigurationError("kappa-plot sweep is empty")
    dims = cfg.dims
    if kind is KappaPlotKind.STANDARD:
        seed = derive_seed(cfg.seed, MatrixKind.KAPPA_SERIES.value)
        return [MatrixSpec(kind=MatrixKind.KAPPA_SERIES, dims=dims, seed=seed, t=t) for t in sweep]
    if kind is KappaPlotKind.GLUED:
        seed = derive_seed(cfg.seed, MatrixKind.GLUED.value)
        return [MatrixSpec(kind=MatrixKind.GLUED, dims=dims, seed=seed, r=-e / 2, t=-e / 2) for e in sweep]

    seed = derive_seed(cfg.seed, MatrixKind.MONOMIAL.value)
    specs = []
    for value in sweep:
        width = int(value)
        if width != value or width < 1 or dims.n % width:
            raise ConfigurationError(f"monomial block size {value:g} must be a positive divisor of n={dims.n}")
        specs.append(MatrixSpec(kind=MatrixKind.MONOMIAL, dims=dims, seed=seed, gen_block=width))
    return specs


def run_kappa_plot(kind: KappaPlotKind, cfg: RunConfig) -> HarnessOutput:
    """Sweep one matrix family and record every requested metric against the measured condition number."""
    specs = kappa_plot_specs(kind, cfg)
    try:
        matrices = [load_matrix(spec) for spec in specs]
    except ParameterError as exc:
        raise ConfigurationError(str(exc)) from exc
    records = evaluate_cells(_grid_cells(specs, cfg), cfg)
    output = HarnessOutput(records=records)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    stem = f"kappa_{kind.value}"
    if cfg.wants(OutputFormat.CSV):
        output.files.append(write_csv(cfg.output_dir / f"{stem}.csv", _csv_rows(records, cfg.metrics)))
    if cfg.wants(OutputFormat.JSON):
        output.files.append(write_json(cfg.output_dir / f"{stem}.json", _bundle(f"kappa:{kind.value}", cfg, matrices, records)))
    if cfg.wants(OutputFormat.SVG):
        for metric in cfg.metrics:
            path = cfg.output_dir / f"{stem}_{metric.value}.svg"
            emit_svg(kappa_plot_data(kind, metric, records), path)
            logger.info("wrote %s", path)
            output.files.append(path)
    return output


def kappa_plot_data(kind: KappaPlotKind, metric: MetricName, records: list[CellRecord]) -> PlotData:
    series: dict[str, PlotSeries] = {}
    for record in records:
        entry = series.setdefault(record.variant, PlotSeries(name=record.variant))
        if record.status is CellStatus.OK:
            entry.points.append((record.report.kappa, _metric_value(record, metric)))
    return PlotData(
        title=f"{kind.value} kappa-plot: {metric.value}",
        y_label=metric.value,
        series=list(series.values()),
    )
