"""Synthetic credit-register panels.

Each firm carries a latent distress level (a static component shared with its
balance sheet plus an AR(1) quarterly component). Distress drives a
four-state loan-quality Markov chain (performing / past-due / unlikely-to-pay
/ bad) and the monetary attributes. A global log-odds offset on the
deterioration probabilities is solved by bisection so that the realized
next-year default rate matches ``target_default_rate``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .domain import (
    DEFAULT_THRESHOLD,
    BalanceSheetRecord,
    FirmPanel,
    FirmQuarterRecord,
    make_target,
)

log = logging.getLogger(__name__)

GRANTED_FLOOR = 30_000.0
_BURN_IN = 8
# panels smaller than this are calibrated on an auxiliary population
CALIBRATION_MIN_FIRMS = 5_000
HAZARD_SLOPE = 1.5


@dataclass(frozen=True)
class GeneratorConfig:
    n_firms: int = 20_000
    balance_sheet_fraction: float = 0.375
    start: tuple[int, int] = (2012, 1)
    n_quarters: int = 16
    target_default_rate: float = 0.043
    # quarterly probability of moving one severity level down from
    # performing, past-due and unlikely-to-pay, for an average firm
    deterioration_rates: tuple[float, float, float] = (0.012, 0.25, 0.20)
    # quarterly probability of returning to performing from past-due / UTP
    cure_rates: tuple[float, float] = (0.35, 0.05)
    jump_rate: float = 0.002  # performing -> UTP directly
    balance_signal: float = 1.0
    # stationary sd of a quarterly AR(1) factor shared by each sector x geo
    # segment; moves segment default rates from one year to the next
    segment_cycle_sd: float = 0.5
    n_sectors: int = 10
    n_geos: int = 20
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "deterioration_rates", tuple(self.deterioration_rates))
        object.__setattr__(self, "cure_rates", tuple(self.cure_rates))
        self.validate()

    def validate(self) -> None:
        if self.n_firms < 0:
            raise ValueError("n_firms must be >= 0")
        if not 0 < self.target_default_rate < 1:
            raise ValueError("target_default_rate must lie in (0, 1)")
        if not 0 <= self.balance_sheet_fraction <= 1:
            raise ValueError("balance_sheet_fraction must lie in [0, 1]")
        if self.n_quarters < 6:
            raise ValueError("n_quarters must be >= 6")
        if not 1 <= self.start[1] <= 4:
            raise ValueError("start quarter must lie in 1..4")
        rates = (*self.deterioration_rates, *self.cure_rates, self.jump_rate)
        if len(self.deterioration_rates) != 3 or len(self.cure_rates) != 2:
            raise ValueError("expected 3 deterioration rates and 2 cure rates")
        if any(not 0 <= r <= 1 for r in rates):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if self.segment_cycle_sd < 0:
            raise ValueError("segment_cycle_sd must be >= 0")
        if self.n_sectors < 1 or self.n_geos < 1:
            raise ValueError("need at least one sector and one geo area")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")

    def periods(self) -> list[tuple[int, int]]:
        year, q = self.start
        out = []
        for _ in range(self.n_quarters):
            out.append((year, q))
            q += 1
            if q == 5:
                year, q = year + 1, 1
        return out

    def calibration_year(self) -> int:
        """Latest reference year whose Q4 and whole next year lie in the panel."""
        return latest_reference_year(self.periods())

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def latest_reference_year(periods: Sequence[tuple[int, int]]) -> int:
    have = set(periods)
    years = sorted({y for y, _ in periods}, reverse=True)
    for y in years:
        if (y, 4) in have and all((y + 1, q) in have for q in (1, 2, 3, 4)):
            return y
    raise ValueError("panel has no Q4 followed by a complete year")


def _logit(p):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return np.log(p / (1 - p))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class _Draws:
    """All randomness for one generation run, drawn up front."""

    sector: np.ndarray
    geo: np.ndarray
    static: np.ndarray
    distress: np.ndarray  # (n, burn + T)
    u_trans: np.ndarray
    pd_start: np.ndarray
    pd_growth: np.ndarray
    granted_base: np.ndarray
    granted_noise: np.ndarray
    util_noise: np.ndarray
    habit: np.ndarray
    od_noise: np.ndarray
    avg_noise: np.ndarray
    utp_frac: np.ndarray
    bad_frac: np.ndarray
    collateral: np.ndarray
    protection: np.ndarray
    forborne_u: np.ndarray
    forborne_frac: np.ndarray
    has_balance: np.ndarray
    bs_noise: np.ndarray  # (n, n_years, 7)


def _draw(cfg: GeneratorConfig, rng: np.random.Generator) -> _Draws:
    n, T = cfg.n_firms, _BURN_IN + cfg.n_quarters
    sector_eff = rng.normal(0.0, 0.35, cfg.n_sectors)
    geo_eff = rng.normal(0.0, 0.25, cfg.n_geos)
    sector = rng.integers(0, cfg.n_sectors, n)
    geo = rng.integers(0, cfg.n_geos, n)
    static = sector_eff[sector] + geo_eff[geo] + rng.normal(0.0, 1.0, n)

    shocks = rng.normal(0.0, 1.0, (n, T))
    ar = np.empty((n, T))
    ar[:, 0] = shocks[:, 0] * 0.6 / np.sqrt(1 - 0.8**2)
    for t in range(1, T):
        ar[:, t] = 0.8 * ar[:, t - 1] + 0.6 * shocks[:, t]
    distress = static[:, None] + 0.5 * ar

    n_bs = int(round(cfg.balance_sheet_fraction * n))
    has_balance = np.zeros(n, dtype=bool)
    has_balance[rng.permutation(n)[:n_bs]] = True
    n_years = len({y for y, _ in cfg.periods()})

    d = _Draws(
        sector=sector,
        geo=geo,
        static=static,
        distress=distress,
        u_trans=rng.random((n, T)),
        pd_start=np.exp(rng.normal(np.log(0.012), 0.6, (n, T))),
        pd_growth=np.exp(rng.normal(np.log(1.8), 0.4, (n, T))),
        granted_base=np.maximum(GRANTED_FLOOR, np.exp(rng.normal(np.log(150_000.0), 1.0, n))),
        granted_noise=rng.normal(0.0, 1.0, (n, T)),
        util_noise=rng.normal(0.0, 1.0, (n, T)),
        habit=rng.normal(0.0, 1.0, n),
        od_noise=rng.normal(0.0, 1.0, (n, T)),
        avg_noise=rng.normal(0.0, 1.0, (n, T)),
        utp_frac=rng.uniform(0.1, 0.6, (n, T)),
        bad_frac=rng.uniform(0.5, 1.0, (n, T)),
        collateral=rng.beta(2.0, 3.0, n),
        protection=rng.uniform(0.7, 1.4, (n, T)),
        forborne_u=rng.random((n, T)),
        forborne_frac=rng.uniform(0.05, 0.3, (n, T)),
        has_balance=has_balance,
        bs_noise=rng.normal(0.0, 1.0, (n, n_years, 7)),
    )
    # segment cycle, drawn last so the firm-level streams do not depend on it
    rho = 0.7
    cyc = np.empty((cfg.n_sectors * cfg.n_geos, T))
    cyc[:, 0] = rng.normal(0.0, cfg.segment_cycle_sd, len(cyc))
    for t in range(1, T):
        cyc[:, t] = rho * cyc[:, t - 1] + np.sqrt(1 - rho**2) * rng.normal(0.0, cfg.segment_cycle_sd, len(cyc))
    d.distress += cyc[sector * cfg.n_geos + geo]
    return d


def _simulate_states(cfg: GeneratorConfig, d: _Draws, offset: float):
    """Run the loan-quality chain; returns ``(states, past_due_frac, age)``
    after burn-in, where ``age`` counts quarters in the current state.

    A past-due episode starts with a small past-due fraction that compounds
    every quarter, so it usually crosses the default threshold after a few
    quarters unless the firm cures first.
    """
    det = _logit(np.asarray(cfg.deterioration_rates)) + offset
    jump = _logit(cfg.jump_rate) + offset
    cure = _logit(np.asarray(cfg.cure_rates))
    n, T = d.distress.shape
    states = np.zeros((n, T), dtype=np.int8)
    fracs = np.zeros((n, T))
    ages = np.zeros((n, T), dtype=np.int16)
    s = np.zeros(n, dtype=np.int8)
    f = np.zeros(n)
    age = np.zeros(n, dtype=np.int16)
    for t in range(T):
        x = HAZARD_SLOPE * d.distress[:, t]
        u = d.u_trans[:, t]
        nxt = s.copy()

        m = s == 0
        p_jump = _sigmoid(jump + x[m])
        p_up = _sigmoid(det[0] + x[m])
        nxt[m] = np.where(u[m] < p_jump, 2, np.where(u[m] < p_jump + p_up, 1, 0))

        for k in (1, 2):
            m = s == k
            p_worse = _sigmoid(det[k] + x[m])
            p_cure = np.minimum(_sigmoid(cure[k - 1] - x[m]), 1 - p_worse)
            nxt[m] = np.where(u[m] < p_worse, k + 1, np.where(u[m] < p_worse + p_cure, 0, k))

        entered = (nxt == 1) & (s != 1)
        stayed = (nxt == 1) & (s == 1)
        f = np.where(entered, d.pd_start[:, t], np.where(stayed, np.minimum(f * d.pd_growth[:, t], 1.0), 0.0))
        age = np.where(nxt == s, age + 1, 0).astype(np.int16)
        states[:, t] = nxt
        fracs[:, t] = f
        ages[:, t] = age
        s = nxt
    return states[:, _BURN_IN:], fracs[:, _BURN_IN:], ages[:, _BURN_IN:]


def _in_default(cfg: GeneratorConfig, states: np.ndarray, frac: np.ndarray) -> np.ndarray:
    return (states >= 2) | ((states == 1) & (frac > cfg.threshold))


def _realized_rate(cfg: GeneratorConfig, chain, ref_idx: int) -> float:
    states, frac, _ = chain
    in_default = _in_default(cfg, states, frac)
    eligible = ~in_default[:, ref_idx]
    if not eligible.any():
        return 0.0
    label = in_default[:, ref_idx + 1 : ref_idx + 5].any(axis=1)
    return float(label[eligible].mean())


def _calibrate_offset(cfg: GeneratorConfig, d: _Draws, ref_idx: int) -> float:
    lo, hi = -8.0, 4.0
    rate = lambda off: _realized_rate(cfg, _simulate_states(cfg, d, off), ref_idx)
    if rate(lo) > cfg.target_default_rate or rate(hi) < cfg.target_default_rate:
        raise ValueError(f"target_default_rate {cfg.target_default_rate} unreachable with these transition rates")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if rate(mid) < cfg.target_default_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(config: GeneratorConfig) -> list[FirmPanel]:
    """Generate ``config.n_firms`` firm panels; a pure function of ``config``."""
    cfg = config
    if cfg.n_firms == 0:
        return []
    periods = cfg.periods()
    ref_year = cfg.calibration_year()
    ref_idx = periods.index((ref_year, 4))

    rng = np.random.default_rng(cfg.seed)
    d = _draw(cfg, rng)
    if cfg.n_firms >= CALIBRATION_MIN_FIRMS:
        offset = _calibrate_offset(cfg, d, ref_idx)
    else:
        # a handful of firms cannot pin down a rate; use a seeded stand-in
        aux_cfg = replace(cfg, n_firms=CALIBRATION_MIN_FIRMS)
        offset = _calibrate_offset(cfg, _draw(aux_cfg, np.random.default_rng([cfg.seed, 1])), ref_idx)
    log.debug("calibrated deterioration offset %.4f", offset)
    states, frac, age = _simulate_states(cfg, d, offset)
    # banks classify a past-due position only after it has lasted two quarters
    bank_class = np.where((states == 1) & (age < 1), 0, states)

    sl = slice(_BURN_IN, None)
    x = d.distress[:, sl]
    granted = np.round(np.maximum(GRANTED_FLOOR, d.granted_base[:, None] * np.exp(0.03 * d.granted_noise[:, sl])), 2)
    util = 1.15 * _sigmoid(-0.5 + d.habit[:, None] + 1.2 * x + 0.3 * d.util_noise[:, sl])
    used = np.round(granted * util, 2)
    overdraft = np.round(np.maximum(used - granted, 0.0) + 0.2 * granted * _sigmoid(1.5 * x - 1.0 + d.habit[:, None] + 0.5 * d.od_noise[:, sl]), 2)
    avg_used = np.round(used * np.exp(0.05 * d.avg_noise[:, sl]), 2)
    margins = np.round(granted - used, 2)
    past_due = np.where(states == 1, np.minimum(np.round(used * frac, 2), used), 0.0)
    problematic = np.where(states == 2, np.round(used * d.utp_frac[:, sl], 2), 0.0)
    nonperf = np.where(states == 3, np.round(used * d.bad_frac[:, sl], 2), 0.0)
    collat = np.round(used * d.collateral[:, None], 2)
    protection = np.round(collat * d.protection[:, sl], 2)
    forborne = np.where(d.forborne_u[:, sl] < _sigmoid(-4.0 + 2.0 * x), np.round(used * d.forborne_frac[:, sl], 2), 0.0)

    # balance sheets: one per calendar year of the panel
    years = sorted({y for y, _ in periods})
    year_of = np.array([y for y, _ in periods])
    sig = cfg.balance_signal
    gb = d.granted_base
    bs = {}
    for yi, year in enumerate(years):
        cur = d.distress[:, sl][:, year_of == year].mean(axis=1) - d.static
        e = d.bs_noise[:, yi, :]
        roa = 0.05 - sig * 0.03 * (d.static + cur) + 0.01 * e[:, 0]
        leverage = np.exp(1.0 + 0.3 * e[:, 1])
        roe = roa * leverage + 0.01 * e[:, 2]
        revenues = gb * np.exp(0.5 + 0.4 * e[:, 3])
        turnover = revenues * np.exp(0.1 * e[:, 4])
        assets = gb * np.exp(1.0 + 0.3 * e[:, 5])
        fin_charges = 0.2 * np.exp(sig * 0.5 * d.static + 0.3 * e[:, 6])
        ebitda = revenues * (0.12 - sig * 0.04 * d.static + 0.02 * e[:, 0])
        bs[year] = np.column_stack(
            [
                np.round(revenues, 2),
                np.round(roe, 6),
                np.round(roa, 6),
                np.round(turnover, 2),
                np.round(assets, 2),
                np.round(fin_charges, 6),
                np.round(ebitda, 2),
            ]
        ).tolist()

    cols = [granted, used, bank_class, avg_used, overdraft, margins, past_due, problematic, nonperf, collat, protection, forborne]
    cols = [c.tolist() for c in cols]
    panels = []
    for i in range(cfg.n_firms):
        firm_id = f"F{i:06d}"
        recs = []
        for t, (year, q) in enumerate(periods):
            recs.append(
                FirmQuarterRecord(
                    firm_id,
                    year,
                    q,
                    cols[0][i][t],
                    cols[1][i][t],
                    int(cols[2][i][t]),
                    cols[3][i][t],
                    cols[4][i][t],
                    cols[5][i][t],
                    cols[6][i][t],
                    cols[7][i][t],
                    cols[8][i][t],
                    cols[9][i][t],
                    cols[10][i][t],
                    cols[11][i][t],
                )
            )
        sheets = None
        if d.has_balance[i]:
            sheets = tuple(BalanceSheetRecord(firm_id, year, *bs[year][i]) for year in years)
        segment = (f"S{d.sector[i] + 1:02d}", f"G{d.geo[i] + 1:02d}")
        panels.append(FirmPanel(firm_id, tuple(recs), sheets, segment))
    return panels


def calibration_report(
    panels: Sequence[FirmPanel],
    reference_year: Optional[int] = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> dict:
    """Headline statistics of a panel set: default rate, balance coverage and
    the share of firm-quarters at each bank-classification severity."""
    if not panels:
        raise ValueError("empty panel set")
    if reference_year is None:
        reference_year = latest_reference_year([r.period for r in panels[0].quarters])
    labels = [make_target(p, reference_year, threshold) for p in panels]
    eligible = [y for y in labels if y is not None]
    counts = [0, 0, 0, 0]
    total = 0
    for p in panels:
        for r in p.quarters:
            counts[r.bank_class] += 1
            total += 1
    return {
        "n_firms": len(panels),
        "reference_year": reference_year,
        "eligible_firms": len(eligible),
        "defaults": int(sum(eligible)),
        "default_rate": sum(eligible) / len(eligible) if eligible else 0.0,
        "balance_sheet_coverage": sum(p.balance_sheets is not None for p in panels) / len(panels),
        "severity_prevalence": {str(k): (c / total if total else 0.0) for k, c in enumerate(counts)},
    }
