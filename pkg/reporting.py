"""Output files for rankeval: CSV tables, sidecars, reports, manifests and the SVG heatmap"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd
import pytz

from config import APP_NAME, APP_VERSION
from constants import (
    AMBIGUOUS_CELLS, FAIL, FAMILIES, HEATMAP_COLORS, PASS, PUBLISHED_VERDICTS, UNDEF_TOKEN,
)
from agreement import AgreementMatrix
from metric_suite import REGISTRY, core_metrics
from property_lab import OracleResult, PropertyGrid
from utils import file_digest, format_value

logger = logging.getLogger(__name__)

CELL_SIZE = 18
LABEL_CHAR_WIDTH = 7
FONT_SIZE = 11


# ==================== CATALOGUE ====================

def catalogue_frame() -> pd.DataFrame:
    """One row per registry metric"""
    rows = [
        {
            "metric": desc.id,
            "family": desc.family,
            "family_name": FAMILIES[desc.family],
            "arity": desc.arity,
            "orientation": f"{desc.orientation} is better",
            "at_k": "yes" if desc.supports_at_k else "no",
        }
        for desc in REGISTRY.values()
    ]
    return pd.DataFrame(rows, columns=["metric", "family", "family_name", "arity", "orientation", "at_k"])


# ==================== AGREEMENT ====================

def matrix_frame(matrix: AgreementMatrix) -> pd.DataFrame:
    frame = pd.DataFrame(matrix.ratios, index=matrix.metrics, columns=matrix.metrics)
    frame.index.name = "metric"
    return frame


def write_matrix_csv(matrix: AgreementMatrix, path: str) -> None:
    """Ratios with 6 decimals; first row and column hold metric names"""
    matrix_frame(matrix).to_csv(path, float_format="%.6f", na_rep=UNDEF_TOKEN, lineterminator="\n")
    logger.info(f"Agreement matrix written to {path}")


def sidecar_lines(matrix: AgreementMatrix) -> List[str]:
    cfg = matrix.config
    relevance = cfg.relevance.fit(cfg.n)
    lines = [
        f"n={cfg.n}",
        f"seed={cfg.seed}",
        f"reference={cfg.reference}",
        f"sample_rankings={cfg.sample_rankings}",
        f"sample_pairs={cfg.sample_pairs}",
        f"relevant_j={relevance.j}",
        f"retrieved_k={relevance.k}",
        f"mean_normalized={str(cfg.options.mean_normalized).lower()}",
    ]
    for a, first in enumerate(matrix.metrics):
        for b in range(a, len(matrix.metrics)):
            lines.append(f"skipped.{first}.{matrix.metrics[b]}={int(matrix.skipped[a, b])}")
    return lines


def write_sidecar(matrix: AgreementMatrix, path: str) -> None:
    """key=value metadata, one per line, including per-pair skip counts"""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(sidecar_lines(matrix)) + "\n")


def _blend(start: str, end: str, t: float) -> str:
    a = [int(start[i:i + 2], 16) for i in (1, 3, 5)]
    b = [int(end[i:i + 2], 16) for i in (1, 3, 5)]
    mixed = [round(x + (y - x) * t) for x, y in zip(a, b)]
    return "#" + "".join(f"{c:02X}" for c in mixed)


def cell_color(ratio: Optional[float]) -> str:
    """Pink at 0, white at 0.5, green at 1; grey when undefined"""
    if ratio is None or math.isnan(ratio):
        return HEATMAP_COLORS["grid"]
    ratio = min(1.0, max(0.0, float(ratio)))
    if ratio <= 0.5:
        return _blend(HEATMAP_COLORS["disagree"], HEATMAP_COLORS["partial"], ratio / 0.5)
    return _blend(HEATMAP_COLORS["partial"], HEATMAP_COLORS["agree"], (ratio - 0.5) / 0.5)


def render_heatmap_svg(metrics: Sequence[str], ratios: np.ndarray) -> str:
    """
    Standalone SVG of an agreement matrix.

    Args:
        metrics: Row/column labels
        ratios: Square matrix of ratios in [0, 1] (NaN when undefined)

    Returns:
        SVG markup with one rect per cell and a text label per row and column
    """
    size = len(metrics)
    margin = LABEL_CHAR_WIDTH * max((len(m) for m in metrics), default=1) + 8
    width = height = margin + size * CELL_SIZE + 4
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="{FONT_SIZE}">',
    ]
    for index, metric in enumerate(metrics):
        label = escape(metric)
        center = margin + index * CELL_SIZE + CELL_SIZE // 2
        parts.append(
            f'<text x="{margin - 4}" y="{center + 4}" text-anchor="end" fill="{HEATMAP_COLORS["text"]}">{label}</text>'
        )
        parts.append(
            f'<text x="{center + 4}" y="{margin - 4}" text-anchor="start" fill="{HEATMAP_COLORS["text"]}" '
            f'transform="rotate(-90 {center + 4} {margin - 4})">{label}</text>'
        )
    for row in range(size):
        for col in range(size):
            value = float(ratios[row, col])
            parts.append(
                f'<rect x="{margin + col * CELL_SIZE}" y="{margin + row * CELL_SIZE}" '
                f'width="{CELL_SIZE}" height="{CELL_SIZE}" fill="{cell_color(value)}" '
                f'stroke="{HEATMAP_COLORS["grid"]}" stroke-width="0.5">'
                f'<title>{escape(metrics[row])} / {escape(metrics[col])}: {format_value(value, 6)}</title></rect>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_heatmap(matrix: AgreementMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(render_heatmap_svg(matrix.metrics, matrix.ratios))
    logger.info(f"Heatmap written to {path}")


# ==================== PROPERTIES ====================

def published_verdict(metric: str, prop: str) -> Optional[str]:
    """Mark of the published summary, None where it has no cell"""
    if prop not in PUBLISHED_VERDICTS or metric not in core_metrics():
        return None
    return PASS if metric in PUBLISHED_VERDICTS[prop] else FAIL


def verdict_frame(grid: PropertyGrid) -> pd.DataFrame:
    """Rows are properties, columns are metrics"""
    data = [[grid.verdict(m, p) for m in grid.metrics] for p in grid.properties]
    frame = pd.DataFrame(data, index=grid.properties, columns=grid.metrics)
    frame.index.name = "property"
    return frame


def write_verdict_csv(grid: PropertyGrid, path: str) -> None:
    verdict_frame(grid).to_csv(path, lineterminator="\n")
    logger.info(f"Verdict grid written to {path}")


def comparison_frame(grid: PropertyGrid) -> pd.DataFrame:
    """Observed verdicts next to the published marks"""
    rows = []
    for prop in grid.properties:
        for metric in grid.metrics:
            published = published_verdict(metric, prop)
            observed = grid.verdict(metric, prop)
            rows.append({
                "property": prop,
                "metric": metric,
                "observed": observed,
                "published": published or "",
                "ambiguous": (metric, prop) in AMBIGUOUS_CELLS,
                "match": published is None or observed == published,
            })
    return pd.DataFrame(rows, columns=["property", "metric", "observed", "published", "ambiguous", "match"])


def report_text(grid: PropertyGrid) -> str:
    """
    Structured text with one record per cell:

        [property / metric]
        verdict = pass
        published = fail
        n = 6
        statistic = 0.0
        config_hash = ...
        note = ...
        witness = label: 1,2,3 | 2,1,3 -> 0.5 | 0.25
    """
    records = []
    for prop in grid.properties:
        for metric in grid.metrics:
            report = grid.report(metric, prop)
            lines = [f"[{prop} / {metric}]", f"verdict = {report.verdict}"]
            published = published_verdict(metric, prop)
            if published:
                lines.append(f"published = {published}")
            if report.n is not None:
                lines.append(f"n = {report.n}")
            lines.append(f"statistic = {format_value(report.statistic)}")
            lines.append(f"config_hash = {report.config_hash}")
            if report.note:
                lines.append(f"note = {report.note}")
            lines.extend(f"witness = {w.to_text()}" for w in report.witnesses)
            records.append("\n".join(lines))
    return "\n\n".join(records) + "\n"


def write_report(grid: PropertyGrid, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(report_text(grid))


# ==================== ORACLES ====================

def oracle_text(result: OracleResult) -> str:
    lines = [f"oracle {result.subject} (n = {result.n}): {PASS if result.passed else FAIL}"]
    lines.extend(f"  {line}" for line in result.lines)
    lines.extend(f"  witness {w.to_text()}" for w in result.witnesses)
    return "\n".join(lines) + "\n"


# ==================== MANIFEST ====================

@dataclass
class RunManifest:
    command: str
    config: Dict
    seed: Optional[int] = None
    tool: str = APP_NAME
    version: str = APP_VERSION
    outputs: Dict[str, str] = field(default_factory=dict)
    created_at: str = ""

    def add_output(self, path: str) -> None:
        self.outputs[path] = file_digest(path)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def write_manifest(manifest: RunManifest, path: str) -> None:
    manifest.created_at = datetime.now(pytz.UTC).isoformat()
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(manifest.to_json())
    logger.info(f"Run manifest written to {path}")


def load_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    try:
        return RunManifest(**data)
    except TypeError as e:
        raise ValueError(f"Not a rankeval manifest: {path} ({e})")
