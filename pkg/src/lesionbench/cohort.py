"""Cohort manifests, stratified fold splitting, per-disease aggregation and
weighted model ranking."""
from __future__ import annotations

import bisect
import csv
import enum
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DuplicateStudyId,
    InvalidK,
    MalformedRow,
    MissingMetric,
    UnknownDisease,
    UnknownStudyInMetrics,
    UnreadableFile,
)
from .metrics import StudyMetrics

MANIFEST_COLUMNS = ("study_id", "disease", "lesion_count", "gt_path")
# inclusive upper bounds of the lesion-count bins {0}, {1-5}, {6-20}, {>20}
DEFAULT_LESION_BINS = (0, 5, 20)
METRICS = ("dsc", "fpv", "fnv")


class Disease(str, enum.Enum):
    MELANOMA = "melanoma"
    LUNG_CANCER = "lung_cancer"
    LYMPHOMA = "lymphoma"
    NEGATIVE = "negative"

    @classmethod
    def parse(cls, text: str) -> "Disease":
        key = text.strip().lower().replace(" ", "_").replace("-", "_")
        if key == "lungcancer":
            key = "lung_cancer"
        try:
            return cls(key)
        except ValueError:
            raise UnknownDisease(
                f"unknown disease {text!r}; expected one of {', '.join(d.value for d in cls)}"
            ) from None


@dataclass(frozen=True)
class StudyRecord:
    study_id: str
    disease: Disease
    lesion_count: int
    gt_path: Path | None = None
    pred_paths: Mapping[str, Path] = field(default_factory=dict)

    def __post_init__(self):
        if self.lesion_count < 0:
            raise MalformedRow(f"{self.study_id}: lesion_count must be >= 0")
        if self.disease is Disease.NEGATIVE and self.lesion_count != 0:
            raise MalformedRow(f"{self.study_id}: negative studies must have lesion_count 0")


# ------------------------------------------------------------------ manifest

def load_manifest(path) -> list[StudyRecord]:
    """Read ``study_id,disease,lesion_count,gt_path[,<model>...]``.

    Every column after ``gt_path`` names a model and holds that model's
    prediction path; an empty cell means no prediction.  Relative paths
    resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise MalformedRow(f"{path}: manifest is empty")
    header = [c.strip() for c in rows[0]]
    if tuple(header[:4]) != MANIFEST_COLUMNS:
        raise MalformedRow(f"{path}: header must start with {','.join(MANIFEST_COLUMNS)}")
    models = header[4:]
    if len(set(models)) != len(models) or any(not m for m in models):
        raise MalformedRow(f"{path}: model columns must be non-empty and unique")

    base = path.parent
    records: list[StudyRecord] = []
    seen: set[str] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedRow(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        row = [c.strip() for c in row]
        study_id, disease, count = row[0], row[1], row[2]
        if not study_id:
            raise MalformedRow(f"{path}:{lineno}: empty study_id")
        if study_id in seen:
            raise DuplicateStudyId(f"{path}:{lineno}: duplicate study_id {study_id!r}")
        seen.add(study_id)
        try:
            lesion_count = int(count)
        except ValueError:
            raise MalformedRow(f"{path}:{lineno}: lesion_count {count!r} is not an integer") from None
        records.append(
            StudyRecord(
                study_id=study_id,
                disease=Disease.parse(disease),
                lesion_count=lesion_count,
                gt_path=base / row[3] if row[3] else None,
                pred_paths={m: base / p for m, p in zip(models, row[4:]) if p},
            )
        )
    return records


def manifest_models(records: Iterable[StudyRecord]) -> list[str]:
    names: dict[str, None] = {}
    for r in records:
        names.update(dict.fromkeys(r.pred_paths))
    return list(names)


# ----------------------------------------------------------------- splitting

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: Mapping[str, int]

    def folds(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for sid, f in self.assignment.items():
            out[f].append(sid)
        return out

    def fold_sizes(self) -> list[int]:
        return [len(f) for f in self.folds()]

    def to_csv(self) -> str:
        lines = ["study_id,fold"]
        lines += [f"{sid},{fold}" for sid, fold in self.assignment.items()]
        return "\n".join(lines) + "\n"


def lesion_bin(count: int, bins: tuple[int, ...] = DEFAULT_LESION_BINS) -> int:
    return bisect.bisect_left(bins, count)


def stratum_of(record: StudyRecord, bins=DEFAULT_LESION_BINS) -> tuple[str, int]:
    return (record.disease.value, lesion_bin(record.lesion_count, bins))


def stratified_kfold(
    records: list[StudyRecord], k: int = 5, seed: int = 0, bins=DEFAULT_LESION_BINS
) -> FoldAssignment:
    """Split studies into ``k`` folds stratified by disease and lesion-count bin.

    Each stratum is shuffled with a generator seeded once by ``seed`` and
    dealt round-robin.  The dealing position carries over from one stratum
    to the next, so per-stratum fold sizes differ by at most one and the
    overall fold sizes do too.
    """
    if not records:
        raise InvalidK("cannot split an empty cohort")
    if k < 2 or k > len(records):
        raise InvalidK(f"k must lie in [2, {len(records)}], got {k}")
    strata: dict[tuple[str, int], list[str]] = defaultdict(list)
    for r in records:
        strata[stratum_of(r, bins)].append(r.study_id)

    rng = np.random.default_rng(seed)
    fold_of: dict[str, int] = {}
    cursor = 0
    for key in sorted(strata):
        ids = sorted(strata[key])
        for i in rng.permutation(len(ids)):
            fold_of[ids[i]] = cursor
            cursor = (cursor + 1) % k
    return FoldAssignment(k, {r.study_id: fold_of[r.study_id] for r in records})


# --------------------------------------------------------------- aggregation

@dataclass(frozen=True)
class Cell:
    value: float | None
    n: int


@dataclass(frozen=True)
class AggregateReport:
    """``cells[category][metric]`` with categories being disease values plus
    ``"total"``.  Negative rows only carry ``fpv``."""

    cells: Mapping[str, Mapping[str, Cell]]
    statistic: str = "mean"

    def total(self, metric: str) -> float | None:
        return self.cells["total"][metric].value

    def to_dict(self) -> dict:
        return {
            cat: {m: {"value": c.value, "n": c.n} for m, c in row.items()}
            for cat, row in self.cells.items()
        }


def _summarise(values: list[float], statistic: str) -> Cell:
    if not values:
        return Cell(None, 0)
    if statistic == "mean":
        return Cell(math.fsum(values) / len(values), len(values))
    return Cell(float(statistics.median(values)), len(values))


def aggregate(
    results: Mapping[str, StudyMetrics] | Iterable[tuple[str, StudyMetrics]],
    records: Iterable[StudyRecord],
    statistic: str = "mean",
    negative_fnv_in_total: bool = True,
) -> AggregateReport:
    """Table-style summary of per-study metrics by disease and overall.

    DSC cells average only studies with a non-empty ground truth.
    """
    if statistic not in ("mean", "median"):
        raise ValueError(f"statistic must be 'mean' or 'median', got {statistic!r}")
    by_id = {r.study_id: r for r in records}
    items = list(results.items()) if isinstance(results, Mapping) else list(results)

    buckets: dict[tuple[str, str], list[float]] = defaultdict(list)
    for sid, m in items:
        rec = by_id.get(sid)
        if rec is None:
            raise UnknownStudyInMetrics(f"study {sid!r} is not in the manifest")
        for cat in (rec.disease.value, "total"):
            if m.dsc is not None:
                buckets[cat, "dsc"].append(m.dsc)
            buckets[cat, "fpv"].append(m.fpv_ml)
            if cat == "total" and rec.disease is Disease.NEGATIVE and not negative_fnv_in_total:
                continue
            buckets[cat, "fnv"].append(m.fnv_ml)

    cells: dict[str, dict[str, Cell]] = {}
    for cat in [d.value for d in Disease] + ["total"]:
        metrics = ("fpv",) if cat == Disease.NEGATIVE.value else METRICS
        cells[cat] = {m: _summarise(buckets[cat, m], statistic) for m in metrics}
    return AggregateReport(cells, statistic)


# ------------------------------------------------------------------- ranking

@dataclass(frozen=True)
class RankingConfig:
    w_dsc: float = 0.5
    w_fpv: float = 0.25
    w_fnv: float = 0.25

    def __post_init__(self):
        ws = (self.w_dsc, self.w_fpv, self.w_fnv)
        if any(not (math.isfinite(w) and w > 0) for w in ws):
            raise ValueError(f"ranking weights must be positive, got {ws}")
        if abs(math.fsum(ws) - 1.0) > 1e-9:
            raise ValueError(f"ranking weights must sum to 1, got {ws}")

    @property
    def weights(self) -> dict[str, float]:
        return {"dsc": self.w_dsc, "fpv": self.w_fpv, "fnv": self.w_fnv}


@dataclass(frozen=True)
class RankEntry:
    model: str
    metrics: Mapping[str, float]
    ranks: Mapping[str, float]
    score: float
    position: int


@dataclass(frozen=True)
class ModelRanking:
    entries: list[RankEntry]
    config: RankingConfig

    def position(self, model: str) -> int:
        return next(e.position for e in self.entries if e.model == model)

    def to_dict(self) -> dict:
        return {
            "weights": self.config.weights,
            "ranking": [
                {
                    "position": e.position,
                    "model": e.model,
                    "score": e.score,
                    "ranks": dict(e.ranks),
                    "metrics": dict(e.metrics),
                }
                for e in self.entries
            ],
        }


def rank_models(totals: Mapping[str, Mapping[str, float]], cfg: RankingConfig = RankingConfig()) -> ModelRanking:
    """Rank models by the weighted sum of their per-metric ranks.

    DSC ranks descending, FPV and FNV ascending; tied metric values share
    the average rank.  Lower weighted score is better.  Equal scores are
    split by higher DSC; models equal on both share the smaller position
    and are listed by name.
    """
    if len(totals) < 2:
        raise ValueError("ranking needs at least two models")
    names = list(totals)
    table: dict[str, dict[str, float]] = {}
    for name in names:
        row = totals[name]
        for m in METRICS:
            v = row.get(m) if row is not None else None
            if v is None or not math.isfinite(float(v)):
                raise MissingMetric(f"model {name!r} has no total {m.upper()}")
        table[name] = {m: float(row[m]) for m in METRICS}

    ranks = {
        "dsc": rankdata([-table[n]["dsc"] for n in names], method="average"),
        "fpv": rankdata([table[n]["fpv"] for n in names], method="average"),
        "fnv": rankdata([table[n]["fnv"] for n in names], method="average"),
    }
    weights = cfg.weights
    scored = []
    for i, name in enumerate(names):
        r = {m: float(ranks[m][i]) for m in METRICS}
        score = math.fsum(weights[m] * r[m] for m in METRICS)
        scored.append((name, r, score))

    def merit(item):
        name, _, score = item
        return (round(score, 9), -table[name]["dsc"])

    scored.sort(key=lambda it: (merit(it), it[0]))
    entries = []
    for idx, item in enumerate(scored):
        name, r, score = item
        if idx and merit(scored[idx - 1]) == merit(item):
            position = entries[-1].position
        else:
            position = idx + 1
        entries.append(RankEntry(name, table[name], r, score, position))
    return ModelRanking(entries, cfg)
