"""Feature matrices over the five-quarter window and train/test construction."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import (
    BALANCE_ATTRIBUTES,
    DEFAULT_THRESHOLD,
    LOAN_ATTRIBUTES,
    FirmPanel,
    adjusted_default_status,
)

WINDOW_LAGS = (4, 3, 2, 1, 0)
MANIFEST_VERSION = 1


def window_periods(reference_year: int) -> list[tuple[int, int]]:
    """Q4 of the previous year followed by the four quarters of ``reference_year``."""
    return [(reference_year - 1, 4)] + [(reference_year, q) for q in (1, 2, 3, 4)]


def feature_names(use_balance: bool) -> list[str]:
    names = [f"{attr}_lag{lag}" for lag in WINDOW_LAGS for attr in LOAN_ATTRIBUTES]
    if use_balance:
        names += list(BALANCE_ATTRIBUTES) + ["has_balance"]
    return names


@dataclass
class LabeledDataset:
    feature_names: list[str]
    rows: np.ndarray
    labels: np.ndarray
    firm_ids: np.ndarray
    sectors: np.ndarray
    geos: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(len(self.labels), len(self.feature_names))
        self.labels = np.asarray(self.labels, dtype=np.int8)
        self.firm_ids = np.asarray(self.firm_ids, dtype=str)
        self.sectors = np.asarray(self.sectors, dtype=str)
        self.geos = np.asarray(self.geos, dtype=str)
        n = len(self.labels)
        if not (len(self.rows) == len(self.firm_ids) == len(self.sectors) == len(self.geos) == n):
            raise ValueError("rows, labels, firm_ids and segments must have equal length")
        if not np.isfinite(self.rows).all():
            raise ValueError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def segments(self) -> list[tuple[str, str]]:
        return list(zip(self.sectors.tolist(), self.geos.tolist()))

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index, dtype=np.intp)
        return replace(
            self,
            rows=self.rows[index],
            labels=self.labels[index],
            firm_ids=self.firm_ids[index],
            sectors=self.sectors[index],
            geos=self.geos[index],
            meta=dict(self.meta),
        )

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.feature_names.index(name)]

    # --- persistence ----------------------------------------------------

    def to_csv(self, path: Path) -> tuple[Path, Path]:
        """Write the dataset as CSV plus a ``.json`` manifest next to it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["firm_id", "sector", "geo", *self.feature_names, "label"])
            for i in range(len(self)):
                w.writerow(
                    [self.firm_ids[i], self.sectors[i], self.geos[i], *map(repr, self.rows[i].tolist()), int(self.labels[i])]
                )
        manifest = {
            "version": MANIFEST_VERSION,
            "feature_names": self.feature_names,
            "n_rows": len(self),
            "n_positive": self.n_positive,
            **self.meta,
        }
        mpath = path.with_suffix(".json")
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path, mpath

    @classmethod
    def from_csv(cls, path: Path) -> "LabeledDataset":
        path = Path(path)
        mpath = path.with_suffix(".json")
        meta = json.loads(mpath.read_text()) if mpath.exists() else {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = header[3:-1]
            firm_ids, sectors, geos, rows, labels = [], [], [], [], []
            for rec in reader:
                firm_ids.append(rec[0])
                sectors.append(rec[1])
                geos.append(rec[2])
                rows.append([float(v) for v in rec[3:-1]])
                labels.append(int(rec[-1]))
        if meta.get("feature_names", names) != names:
            raise ValueError(f"{path}: header does not match manifest feature_names")
        for key in ("version", "feature_names", "n_rows", "n_positive"):
            meta.pop(key, None)
        return cls(names, np.array(rows).reshape(len(labels), len(names)), labels, firm_ids, sectors, geos, meta)


def build_features(
    panels: Sequence[FirmPanel],
    reference_year: int,
    use_balance: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
) -> LabeledDataset:
    """One row per firm that is eligible for the next-year default task.

    Loan attributes are laid out quarter by quarter, oldest first. In balance
    mode the accounts of ``reference_year`` are appended, zero-imputed with a
    ``has_balance`` indicator for firms that have none.
    """
    window = window_periods(reference_year)
    names = feature_names(use_balance)
    skip = {"missing_target_quarters": 0, "in_default_at_reference": 0, "window_gaps": 0}
    rows, labels, ids, sectors, geos = [], [], [], [], []
    n_balance = len(BALANCE_ATTRIBUTES)
    for panel in panels:
        anchor = panel.record(reference_year, 4)
        ahead = [panel.record(reference_year + 1, q) for q in (1, 2, 3, 4)]
        if anchor is None or any(r is None for r in ahead):
            skip["missing_target_quarters"] += 1
            continue
        if adjusted_default_status(anchor, threshold).in_default:
            skip["in_default_at_reference"] += 1
            continue
        recs = [panel.record(y, q) for y, q in window]
        if any(r is None for r in recs):
            skip["window_gaps"] += 1
            continue
        label = int(any(adjusted_default_status(r, threshold).in_default for r in ahead))
        row = []
        for r in recs:
            row.extend(r.loan_vector())
        if use_balance:
            bs = panel.balance_sheet(reference_year)
            row.extend(bs.balance_vector() if bs is not None else [0.0] * n_balance)
            row.append(1.0 if bs is not None else 0.0)
        rows.append(row)
        labels.append(label)
        ids.append(panel.firm_id)
        sectors.append(panel.sector)
        geos.append(panel.geo)
    meta = {
        "reference_year": reference_year,
        "use_balance": bool(use_balance),
        "threshold": threshold,
        "skip_report": skip,
    }
    return LabeledDataset(names, np.array(rows, dtype=np.float64).reshape(len(rows), len(names)), labels, ids, sectors, geos, meta)


def balanced_subsample(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """All positive rows plus an equal number of negatives drawn without
    replacement, in a seeded random order."""
    pos = np.flatnonzero(ds.labels == 1)
    neg = np.flatnonzero(ds.labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("cannot balance: dataset needs rows of both classes")
    if len(pos) > len(neg):
        raise ValueError("cannot balance: minority is majority")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(neg, size=len(pos), replace=False)
    index = rng.permutation(np.concatenate([pos, chosen]))
    out = ds.subset(index)
    out.meta["balanced_seed"] = seed
    return out


def stratified_indices(labels: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            raise ValueError(f"class {cls} has {len(idx)} rows; need at least 2 to split")
        n_test = min(max(int(round(test_fraction * len(idx))), 1), len(idx) - 1)
        perm = rng.permutation(idx)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def train_test_split(ds: LabeledDataset, test_fraction: float = 0.3, seed: int = 0):
    """Stratified holdout split; returns ``(train, test)``."""
    train_idx, test_idx = stratified_indices(ds.labels, test_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)
