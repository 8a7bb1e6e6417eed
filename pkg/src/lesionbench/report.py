"""JSON and aligned-text rendering of evaluation reports and rankings.

Evaluation report (JSON)::

    {
      "format": "lesionbench.evaluation/1",
      "model": "<name>",
      "config": {...every effective parameter...},
      "n_studies": int, "n_failed": int,
      "studies": [
        {"study_id", "disease", "status": "ok", "dsc", "fpv_ml", "fnv_ml", "gt_positive"}
        | {"study_id", "disease", "status": "failed", "error"}
      ],
      "aggregate": {"<category>": {"<metric>": {"value": float|null, "n": int}}}
    }

``category`` is one of melanoma, lung_cancer, lymphoma, negative, total;
``metric`` is dsc, fpv or fnv (millilitres for the volumes).  The negative
category only has fpv.
"""
from __future__ import annotations

import json
from typing import Mapping

from .cohort import AggregateReport, Disease, ModelRanking

EVAL_FORMAT = "lesionbench.evaluation/1"
RANK_FORMAT = "lesionbench.ranking/1"

_CATEGORY_LABELS = {
    Disease.MELANOMA.value: "Melanoma",
    Disease.LUNG_CANCER.value: "Lung Cancer",
    Disease.LYMPHOMA.value: "Lymphoma",
    Disease.NEGATIVE.value: "Negative",
    "total": "Total",
}


def dumps(obj) -> str:
    """Stable JSON text: fixed key order, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def evaluation_report(model: str, config: Mapping, studies: list[dict], agg: AggregateReport) -> dict:
    n_failed = sum(1 for s in studies if s["status"] != "ok")
    return {
        "format": EVAL_FORMAT,
        "model": model,
        "config": dict(config),
        "n_studies": len(studies),
        "n_failed": n_failed,
        "studies": studies,
        "aggregate": agg.to_dict(),
    }


def _fmt(v, digits=2) -> str:
    return "-" if v is None else f"{v:.{digits}f}"


def aggregate_text(report: dict) -> str:
    rows = []
    for cat, metrics in report["aggregate"].items():
        for metric, cell in metrics.items():
            label = f"{_CATEGORY_LABELS.get(cat, cat)} ({metric.upper()})"
            rows.append((label, _fmt(cell["value"], 4 if metric == "dsc" else 3), str(cell["n"])))
    header = ("Metric", report.get("model", ""), "n")
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(3)]
    lines = [
        f"{header[0]:<{widths[0]}}  {header[1]:>{widths[1]}}  {header[2]:>{widths[2]}}",
        "-" * (sum(widths) + 4),
    ]
    lines += [f"{a:<{widths[0]}}  {b:>{widths[1]}}  {c:>{widths[2]}}" for a, b, c in rows]
    if report.get("n_failed"):
        lines.append(f"{report['n_failed']} of {report['n_studies']} studies failed")
    return "\n".join(lines) + "\n"


def ranking_dict(ranking: ModelRanking) -> dict:
    return {"format": RANK_FORMAT, **ranking.to_dict()}


def ranking_text(ranking: ModelRanking) -> str:
    header = ("#", "Model", "Score", "DSC", "FPV", "FNV", "r(DSC)", "r(FPV)", "r(FNV)")
    rows = [
        (
            str(e.position), e.model, f"{e.score:.3f}",
            f"{e.metrics['dsc']:.4f}", f"{e.metrics['fpv']:.3f}", f"{e.metrics['fnv']:.3f}",
            f"{e.ranks['dsc']:g}", f"{e.ranks['fpv']:g}", f"{e.ranks['fnv']:g}",
        )
        for e in ranking.entries
    ]
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]

    def line(r):
        cells = [f"{r[0]:>{widths[0]}}", f"{r[1]:<{widths[1]}}"]
        cells += [f"{c:>{w}}" for c, w in zip(r[2:], widths[2:])]
        return "  ".join(cells).rstrip()

    out = [line(header), "-" * (sum(widths) + 2 * (len(widths) - 1))]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"
