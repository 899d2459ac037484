"""
Per-iteration aggregate rows and per-firm cross-sections.

``TimeSeriesRow`` is what ``advance`` returns for every iteration; its first
twelve fields form the versioned time-series CSV schema. ``FirmCrossSection``
is a snapshot of every alive firm, exported as the cross-section CSV and read
back by the analyze command. ``TrajectoryRow`` follows one tracked firm.
"""

from dataclasses import dataclass, field, asdict
from typing import List, Dict, Any, Optional

import numpy as np
import pandas as pd


# Versioned CSV schemas (column order is part of the file format)
TIMESERIES_COLUMNS = [
    "t", "unemployment_rate", "n_active_firms", "n_bankruptcies", "job_losses_bankruptcy",
    "aggregate_debt", "mu_eff", "total_output", "total_demand", "total_sold",
    "bank_equity", "conservation_residual",
]
CROSS_SECTION_COLUMNS = [
    "id", "age", "mu", "mu_gross_realized", "mu_net_realized", "size",
    "q_produced", "q_sold", "cash", "debt", "equity",
]
FAILURE_COLUMNS = ["t", "id", "age", "size", "mu", "debt", "write_off"]
GROWTH_COLUMNS = ["t", "id", "size", "growth"]
TRAJECTORY_COLUMNS = ["t", "id", "size", "mu", "mu_gross_realized", "mu_net_realized", "debt"]


@dataclass
class TimeSeriesRow:
    """Aggregates of one iteration.

    The CSV carries the fields listed in ``TIMESERIES_COLUMNS``; the remaining
    fields stay in memory for summaries.
    """
    t: int
    unemployment_rate: float
    n_active_firms: int
    n_bankruptcies: int
    job_losses_bankruptcy: int
    aggregate_debt: float
    mu_eff: float
    total_output: int
    total_demand: int
    total_sold: int
    bank_equity: float
    conservation_residual: float

    # In-memory extras
    n_employed: int = 0
    interest_flow: float = 0.0
    write_off_flow: float = 0.0
    mu_shift: float = 0.0
    n_dissolved: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrajectoryRow:
    """A tracked firm at the end of iteration ``t``; ``mu`` is the margin it used during ``t``."""
    t: int
    id: int
    size: int
    mu: float
    mu_gross_realized: float
    mu_net_realized: float
    debt: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class FirmRow:
    """One alive firm in a cross-section."""
    id: int
    age: int
    mu: float
    mu_gross_realized: float
    mu_net_realized: float
    size: int
    q_produced: int
    q_sold: int
    cash: float
    debt: float
    equity: float


@dataclass
class FirmCrossSection:
    """Snapshot of every alive firm at the end of iteration ``t``."""
    t: int
    rows: List[FirmRow] = field(default_factory=list)

    @classmethod
    def from_economy(cls, economy, t: Optional[int] = None) -> "FirmCrossSection":
        """Snapshot the firms that took part in iteration ``t`` (entrants not yet hired are left out).

        ``t`` defaults to the last completed iteration.
        """
        if t is None:
            t = economy.t - 1
        rows = [
            FirmRow(
                id=f.id,
                age=f.age(t),
                mu=f.mu,
                mu_gross_realized=f.mu_gross_realized,
                mu_net_realized=f.mu_net_realized,
                size=f.n_workers,
                q_produced=f.q_produced,
                q_sold=f.q_sold,
                cash=f.cash,
                debt=f.debt,
                equity=f.equity,
            )
            for f in economy.firms
            if not f.is_entrant
        ]
        return cls(t=t, rows=rows)

    @classmethod
    def from_frame(cls, df: pd.DataFrame, t: int = -1) -> "FirmCrossSection":
        missing = [c for c in CROSS_SECTION_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"cross-section is missing columns: {', '.join(missing)}")
        int_columns = {"id", "age", "size", "q_produced", "q_sold"}
        rows = []
        for record in df[CROSS_SECTION_COLUMNS].to_dict(orient="records"):
            rows.append(FirmRow(**{
                k: (int(v) if k in int_columns else float(v)) for k, v in record.items()
            }))
        return cls(t=t, rows=rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=CROSS_SECTION_COLUMNS)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([r.size for r in self.rows], dtype=np.int64)

    def size_by_id(self) -> Dict[int, int]:
        return {r.id: r.size for r in self.rows}

    def __len__(self) -> int:
        return len(self.rows)
