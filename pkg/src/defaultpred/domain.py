"""Firm-panel schema, adjusted-default labeling and CSV persistence.

A firm's credit-register history is a sequence of quarterly snapshots
(``FirmQuarterRecord``, attributes L1..L12) plus optional annual accounts
(``BalanceSheetRecord``, attributes B1..B8 without B4).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

DEFAULT_THRESHOLD = 0.05

# attribute id -> FirmQuarterRecord field
LOAN_ATTRIBUTES = {
    "L1": "granted",
    "L2": "used",
    "L3": "bank_class",
    "L4": "avg_used",
    "L5": "overdraft",
    "L6": "margins",
    "L7": "past_due_amt",
    "L8": "problematic_amt",
    "L9": "nonperforming_amt",
    "L10": "collateralized_amt",
    "L11": "protection_value",
    "L12": "forborne_amt",
}

BALANCE_ATTRIBUTES = {
    "B1": "revenues",
    "B2": "roe",
    "B3": "roa",
    "B5": "turnover",
    "B6": "total_assets",
    "B7": "fin_charges_over_op_margin",
    "B8": "ebitda",
}

QUARTER_HEADER = ["firm_id", "year", "quarter", *LOAN_ATTRIBUTES, "sector", "geo"]
BALANCE_HEADER = ["firm_id", "year", *BALANCE_ATTRIBUTES]

# bank_class severity levels
PERFORMING, PAST_DUE, UNLIKELY_TO_PAY, BAD = 0, 1, 2, 3

# slack for comparisons between amounts rounded to cents
_EUR_TOL = 0.01


class SchemaError(ValueError):
    """Raised when a record or input file violates the panel schema."""


@dataclass(frozen=True, slots=True)
class FirmQuarterRecord:
    firm_id: str
    year: int
    quarter: int
    granted: float
    used: float
    bank_class: int
    avg_used: float
    overdraft: float
    margins: float
    past_due_amt: float
    problematic_amt: float
    nonperforming_amt: float
    collateralized_amt: float
    protection_value: float
    forborne_amt: float

    @property
    def period(self) -> tuple[int, int]:
        return (self.year, self.quarter)

    def loan_vector(self) -> list[float]:
        return [float(getattr(self, name)) for name in LOAN_ATTRIBUTES.values()]

    def validate(self) -> None:
        """Raise ``SchemaError`` if any record invariant is violated."""
        if not 1 <= self.quarter <= 4:
            raise SchemaError(f"{self.firm_id}: quarter {self.quarter} outside 1..4")
        if self.bank_class not in (0, 1, 2, 3):
            raise SchemaError(f"{self.firm_id}: bank_class {self.bank_class} outside 0..3")
        for attr, name in LOAN_ATTRIBUTES.items():
            value = getattr(self, name)
            if not math.isfinite(value):
                raise SchemaError(f"{self.firm_id} {self.period}: {attr} not finite")
            if name != "margins" and value < 0:
                raise SchemaError(f"{self.firm_id} {self.period}: {attr} negative")
        if self.used > self.granted + self.overdraft + _EUR_TOL:
            raise SchemaError(f"{self.firm_id} {self.period}: used exceeds granted + overdraft")
        negatives = self.past_due_amt + self.problematic_amt + self.nonperforming_amt
        if negatives > self.used + _EUR_TOL:
            raise SchemaError(f"{self.firm_id} {self.period}: negative exposure exceeds used")
        if self.collateralized_amt > self.used + _EUR_TOL:
            raise SchemaError(f"{self.firm_id} {self.period}: collateralized exceeds used")


@dataclass(frozen=True, slots=True)
class BalanceSheetRecord:
    firm_id: str
    year: int
    revenues: float
    roe: float
    roa: float
    turnover: float
    total_assets: float
    fin_charges_over_op_margin: float
    ebitda: float

    def balance_vector(self) -> list[float]:
        return [float(getattr(self, name)) for name in BALANCE_ATTRIBUTES.values()]

    def validate(self) -> None:
        for attr, name in BALANCE_ATTRIBUTES.items():
            if not math.isfinite(getattr(self, name)):
                raise SchemaError(f"{self.firm_id} {self.year}: {attr} not finite")
        if self.total_assets < 0:
            raise SchemaError(f"{self.firm_id} {self.year}: total_assets negative")


@dataclass(frozen=True)
class FirmPanel:
    firm_id: str
    quarters: tuple[FirmQuarterRecord, ...]
    balance_sheets: Optional[tuple[BalanceSheetRecord, ...]] = None
    segment: tuple[str, str] = ("", "")
    _by_period: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        periods = [q.period for q in self.quarters]
        for a, b in zip(periods, periods[1:]):
            if not a < b:
                raise SchemaError(f"{self.firm_id}: quarters not strictly increasing at {b}")
        object.__setattr__(self, "_by_period", {q.period: q for q in self.quarters})

    def record(self, year: int, quarter: int) -> Optional[FirmQuarterRecord]:
        return self._by_period.get((year, quarter))

    def balance_sheet(self, year: int) -> Optional[BalanceSheetRecord]:
        for bs in self.balance_sheets or ():
            if bs.year == year:
                return bs
        return None

    @property
    def sector(self) -> str:
        return self.segment[0]

    @property
    def geo(self) -> str:
        return self.segment[1]


@dataclass(frozen=True)
class DefaultStatus:
    in_default: bool
    negative_exposure: float
    exposure_ratio: float


def adjusted_default_status(rec: FirmQuarterRecord, threshold: float = DEFAULT_THRESHOLD) -> DefaultStatus:
    """Classify one quarterly snapshot.

    The negative exposure is the total of past-due, unlikely-to-pay and bad
    amounts; the firm is in adjusted default when that total exceeds
    ``threshold`` as a fraction of the used amount.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    negative = rec.past_due_amt + rec.problematic_amt + rec.nonperforming_amt
    if rec.used > 0:
        ratio = min(negative / rec.used, 1.0)
    else:
        ratio = 0.0
    return DefaultStatus(in_default=ratio > threshold, negative_exposure=negative, exposure_ratio=ratio)


def make_target(panel: FirmPanel, reference_year: int, threshold: float = DEFAULT_THRESHOLD) -> Optional[int]:
    """Next-year default label, or None when the firm is outside the task.

    Firms missing Q4 of ``reference_year`` or any quarter of the following
    year are skipped, as are firms already in default at Q4.
    """
    anchor = panel.record(reference_year, 4)
    if anchor is None:
        return None
    ahead = [panel.record(reference_year + 1, q) for q in (1, 2, 3, 4)]
    if any(r is None for r in ahead):
        return None
    if adjusted_default_status(anchor, threshold).in_default:
        return None
    return int(any(adjusted_default_status(r, threshold).in_default for r in ahead))


# --- CSV persistence -------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def write_panels(panels: Sequence[FirmPanel], directory: Path) -> tuple[Path, Path]:
    """Write ``firm_quarters.csv`` and ``balance_sheets.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    qpath = directory / "firm_quarters.csv"
    bpath = directory / "balance_sheets.csv"
    with open(qpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUARTER_HEADER)
        for p in panels:
            for r in p.quarters:
                row = [r.firm_id, r.year, r.quarter]
                for name in LOAN_ATTRIBUTES.values():
                    v = getattr(r, name)
                    row.append(v if name == "bank_class" else _fmt(v))
                row += [p.sector, p.geo]
                w.writerow(row)
    with open(bpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BALANCE_HEADER)
        for p in panels:
            for b in p.balance_sheets or ():
                w.writerow([b.firm_id, b.year, *[_fmt(getattr(b, n)) for n in BALANCE_ATTRIBUTES.values()]])
    return qpath, bpath


def _require_columns(path: Path, header: Optional[list[str]], expected: Iterable[str]) -> None:
    if header is None:
        raise SchemaError(f"{path}: empty file")
    for col in expected:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")


def _parse_float(path, lineno, col, text) -> Optional[float]:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{path}:{lineno}: column {col!r} is not a number: {text!r}") from None


def read_panels(directory: Path) -> list[FirmPanel]:
    """Load panels written by :func:`write_panels` (balance file optional)."""
    directory = Path(directory)
    qpath = directory / "firm_quarters.csv"
    bpath = directory / "balance_sheets.csv"
    if not qpath.exists():
        raise SchemaError(f"{qpath}: file not found")

    quarters: dict[str, list[FirmQuarterRecord]] = {}
    segments: dict[str, tuple[str, str]] = {}
    with open(qpath, newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(qpath, reader.fieldnames, QUARTER_HEADER)
        for lineno, row in enumerate(reader, start=2):
            values = {}
            for attr, name in LOAN_ATTRIBUTES.items():
                v = _parse_float(qpath, lineno, attr, row[attr])
                if v is None:
                    raise SchemaError(f"{qpath}:{lineno}: column {attr!r} is empty")
                values[name] = int(v) if name == "bank_class" else v
            rec = FirmQuarterRecord(firm_id=row["firm_id"], year=int(row["year"]), quarter=int(row["quarter"]), **values)
            quarters.setdefault(rec.firm_id, []).append(rec)
            segments.setdefault(rec.firm_id, (row["sector"], row["geo"]))

    sheets: dict[str, list[BalanceSheetRecord]] = {}
    if bpath.exists():
        with open(bpath, newline="") as fh:
            reader = csv.DictReader(fh)
            _require_columns(bpath, reader.fieldnames, BALANCE_HEADER)
            for lineno, row in enumerate(reader, start=2):
                values = {}
                for attr, name in BALANCE_ATTRIBUTES.items():
                    v = _parse_float(bpath, lineno, attr, row[attr])
                    # missing balance values are stored as empty fields; treat as 0
                    values[name] = 0.0 if v is None else v
                rec = BalanceSheetRecord(firm_id=row["firm_id"], year=int(row["year"]), **values)
                sheets.setdefault(rec.firm_id, []).append(rec)

    panels = []
    for firm_id, recs in quarters.items():
        recs.sort(key=lambda r: r.period)
        bs = sheets.get(firm_id)
        panels.append(
            FirmPanel(
                firm_id=firm_id,
                quarters=tuple(recs),
                balance_sheets=tuple(sorted(bs, key=lambda b: b.year)) if bs else None,
                segment=segments[firm_id],
            )
        )
    return panels
