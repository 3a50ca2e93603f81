"""Segment-level probability of default: historical-ratio baseline versus
classifier-based estimates, compared against the realized next-year rate.

Out-of-time design for reference year ``T``:

* baseline PD of a segment is the realized default rate one year earlier
  (firms performing at ``T-1`` Q4 that defaulted during ``T``);
* model PD is the share of the segment's firms (performing at ``T`` Q4)
  that the classifier predicts to default during ``T+1``;
* realized PD is the observed share of those firms defaulting in ``T+1``.

The classifier, when trained here, only sees data up to year ``T``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import DEFAULT_THRESHOLD, FirmPanel
from .features import LabeledDataset, build_features

log = logging.getLogger(__name__)

GRANULARITIES = ("coarse", "fine")
ERROR_KINDS = ("absolute", "signed")
ESTIMATORS = ("baseline", "model")
SUMMARY_VERSION = 1
CSV_HEADER = ("segment", "granularity", "n_firms", "baseline_pd", "model_pd", "realized_pd")


def segment_key(granularity: str, sector: str, geo: str) -> str:
    if granularity == "coarse":
        return sector
    if granularity == "fine":
        return f"{sector}|{geo}"
    raise ValueError(f"unknown granularity {granularity!r}; choose from {list(GRANULARITIES)}")


@dataclass(frozen=True)
class Segmentation:
    """Assignment of firms to segments; each firm belongs to exactly one."""

    granularity: str
    assignment: Mapping[str, str]  # firm_id -> segment key

    @classmethod
    def from_dataset(cls, ds: LabeledDataset, granularity: str) -> "Segmentation":
        return cls.from_arrays(ds.firm_ids, ds.sectors, ds.geos, granularity)

    @classmethod
    def from_arrays(cls, firm_ids, sectors, geos, granularity: str) -> "Segmentation":
        assignment: dict[str, str] = {}
        for fid, sec, geo in zip(firm_ids, sectors, geos):
            key = segment_key(granularity, str(sec), str(geo))
            if assignment.setdefault(str(fid), key) != key:
                raise ValueError(f"firm {fid} assigned to two segments")
        return cls(granularity, assignment)

    def keys(self) -> list[str]:
        return sorted(set(self.assignment.values()))

    def groups(self, firm_ids: Sequence[str]) -> dict[str, np.ndarray]:
        """Row indices of ``firm_ids`` per segment key, keys sorted."""
        by_key: dict[str, list[int]] = {}
        for i, fid in enumerate(firm_ids):
            by_key.setdefault(self.assignment[str(fid)], []).append(i)
        return {k: np.asarray(by_key[k], dtype=np.int64) for k in sorted(by_key)}


def segment_rate(values) -> Optional[float]:
    """Share of ones; ``None`` for an empty segment."""
    v = np.asarray(values)
    if v.size == 0:
        return None
    return float(np.count_nonzero(v) / v.size)


def baseline_pd(labels) -> Optional[float]:
    """Historical ratio: defaulted count over segment size."""
    return segment_rate(labels)


def model_pd(predictions) -> Optional[float]:
    """Predicted-default count over segment size."""
    return segment_rate(predictions)


def segment_rates(segmentation: Segmentation, firm_ids, values) -> dict[str, tuple[int, float]]:
    """``{segment: (n_firms, rate)}`` for the segments that contain firms."""
    values = np.asarray(values)
    return {k: (len(idx), segment_rate(values[idx])) for k, idx in segmentation.groups(firm_ids).items()}


@dataclass(frozen=True)
class SegmentRow:
    segment: str
    n_firms: int
    baseline_pd: float
    model_pd: float
    realized_pd: float


@dataclass(frozen=True)
class SegmentPDReport:
    granularity: str
    rows: tuple  # of SegmentRow, sorted by segment
    error_kind: str
    mean_error: dict  # estimator -> float
    var_error: dict
    superiority: dict  # estimator -> share of segments won outright
    ties: float
    wins: dict = field(default_factory=dict)  # estimator -> segment count

    @property
    def n_segments(self) -> int:
        return len(self.rows)

    def summary(self) -> dict:
        return {
            "n_segments": self.n_segments,
            "error_kind": self.error_kind,
            "mean_error": dict(self.mean_error),
            "var_error": dict(self.var_error),
            "superiority": {**self.superiority, "ties": self.ties},
        }


def _errors(est: np.ndarray, real: np.ndarray, kind: str) -> np.ndarray:
    if kind == "absolute":
        return np.abs(est - real)
    if kind == "signed":
        return est - real
    raise ValueError(f"unknown error kind {kind!r}; choose from {list(ERROR_KINDS)}")


def compare_pd(
    baseline: Mapping[str, Optional[float]],
    model: Mapping[str, Optional[float]],
    realized: Mapping[str, Optional[float]],
    n_firms: Optional[Mapping[str, int]] = None,
    granularity: str = "fine",
    error_kind: str = "absolute",
) -> SegmentPDReport:
    """Mean and (population) variance of the per-segment errors of both
    estimators, plus the share of segments where each has the strictly
    smaller absolute error. Only segments with all three rates present are
    compared."""
    if error_kind not in ERROR_KINDS:
        raise ValueError(f"unknown error kind {error_kind!r}; choose from {list(ERROR_KINDS)}")
    keys = sorted(
        k for k in realized if realized[k] is not None and baseline.get(k) is not None and model.get(k) is not None
    )
    if not keys:
        raise ValueError("no segment has baseline, model and realized PD")
    for name, table in (("baseline", baseline), ("model", model), ("realized", realized)):
        for k in keys:
            if not 0.0 <= table[k] <= 1.0:
                raise ValueError(f"{name} PD of segment {k} outside [0, 1]: {table[k]}")
    b = np.array([baseline[k] for k in keys])
    m = np.array([model[k] for k in keys])
    r = np.array([realized[k] for k in keys])
    n = n_firms or {}
    rows = tuple(SegmentRow(k, int(n.get(k, 0)), baseline[k], model[k], realized[k]) for k in keys)

    err = {"baseline": _errors(b, r, error_kind), "model": _errors(m, r, error_kind)}
    abs_b, abs_m = np.abs(b - r), np.abs(m - r)
    wins = {"baseline": int(np.sum(abs_b < abs_m)), "model": int(np.sum(abs_m < abs_b))}
    total = len(keys)
    return SegmentPDReport(
        granularity=granularity,
        rows=rows,
        error_kind=error_kind,
        mean_error={e: float(np.mean(err[e])) for e in ESTIMATORS},
        var_error={e: float(np.var(err[e])) for e in ESTIMATORS},
        superiority={e: wins[e] / total for e in ESTIMATORS},
        ties=(total - wins["baseline"] - wins["model"]) / total,
        wins=wins,
    )


def segment_report(
    granularity: str,
    history: LabeledDataset,
    current: LabeledDataset,
    predictions,
    error_kind: str = "absolute",
) -> SegmentPDReport:
    """Baseline from ``history`` labels, model PD from ``predictions`` on
    ``current`` rows and realized PD from ``current`` labels."""
    predictions = np.asarray(predictions)
    if len(predictions) != len(current):
        raise ValueError(f"{len(predictions)} predictions for {len(current)} firms")
    seg = Segmentation.from_arrays(
        list(history.firm_ids) + list(current.firm_ids),
        list(history.sectors) + list(current.sectors),
        list(history.geos) + list(current.geos),
        granularity,
    )
    base = segment_rates(seg, history.firm_ids, history.labels)
    real = segment_rates(seg, current.firm_ids, current.labels)
    pred = segment_rates(seg, current.firm_ids, predictions)
    return compare_pd(
        {k: v[1] for k, v in base.items()},
        {k: v[1] for k, v in pred.items()},
        {k: v[1] for k, v in real.items()},
        {k: v[0] for k, v in real.items()},
        granularity,
        error_kind,
    )


@dataclass
class PDRun:
    reference_year: int
    reports: dict  # granularity -> SegmentPDReport
    model_source: str  # "trained", "given" or "oracle"
    n_history: int
    n_current: int


def run_pd(
    panels: Sequence[FirmPanel],
    reference_year: int,
    *,
    model=None,
    oracle: bool = False,
    use_balance: bool = False,
    seed: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
    grids: Optional[dict] = None,
    vote_threshold: int = 3,
    error_kind: str = "absolute",
) -> PDRun:
    """Segment PD comparison for both granularities.

    Without ``model`` (and without ``oracle``) a COMB model is trained on
    the year-earlier window, so no label from the evaluated year is seen.
    ``oracle`` replaces the classifier by the realized labels.
    """
    history = build_features(panels, reference_year - 1, use_balance, threshold)
    current = build_features(panels, reference_year, use_balance, threshold)
    if len(history) == 0 or len(current) == 0:
        raise ValueError(f"no labelled firms around reference year {reference_year}")
    if oracle:
        preds, source = current.labels.copy(), "oracle"
    else:
        if model is None:
            from .comb import comb_fit

            log.info("training COMB on reference year %d for the PD report", reference_year - 1)
            model, source = comb_fit(history, grids, seed, vote_threshold), "trained"
        else:
            source = "given"
        if tuple(model.feature_names) != tuple(current.feature_names):
            raise ValueError("model features do not match the PD dataset features")
        preds = model.predict(current.rows)
    reports = {g: segment_report(g, history, current, preds, error_kind) for g in GRANULARITIES}
    return PDRun(reference_year, reports, source, len(history), len(current))


def write_segment_csv(report: SegmentPDReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in report.rows:
            w.writerow(
                [
                    row.segment,
                    report.granularity,
                    row.n_firms,
                    f"{row.baseline_pd:.6f}",
                    f"{row.model_pd:.6f}",
                    f"{row.realized_pd:.6f}",
                ]
            )
    return path


def read_segment_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            missing = [c for c in CSV_HEADER if c not in row]
            if missing:
                raise ValueError(f"{path}: missing column {missing[0]!r}")
            out.append(
                {
                    "segment": row["segment"],
                    "granularity": row["granularity"],
                    "n_firms": int(row["n_firms"]),
                    **{c: float(row[c]) for c in CSV_HEADER[3:]},
                }
            )
        return out


def summary_document(run: PDRun) -> dict:
    return {
        "version": SUMMARY_VERSION,
        "reference_year": run.reference_year,
        "model_source": run.model_source,
        "n_history_firms": run.n_history,
        "n_current_firms": run.n_current,
        **{g: run.reports[g].summary() for g in GRANULARITIES},
    }


def write_summary(run: PDRun, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary_document(run), indent=2, sort_keys=True) + "\n")
    return path
