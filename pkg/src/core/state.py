import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Iterator

import numpy as np

from src.core.params import SimParams


@dataclass
class FirmState:
    """One enterprise.

    Args:
        id (int): Stable unique identifier, ascending in creation order (required)
        mu (float): Intrinsic margin, recentered every iteration (required)
        birth_t (int): Iteration at which the firm was created (required)

    Attributes:
        Optional fields with defaults:
            n_workers (int): Workforce hired in the current iteration
            planned_workers (int): Workforce planned for the current iteration
            q_produced (int): Goods produced in the current iteration
            q_sold (int): Goods sold in the current iteration
            q_demand (int): Goods the firm itself wants to buy
            cash (float): Liquid money, >= 0 at iteration boundaries
            debt (float): Outstanding loans, >= 0
            profit_gross (float): Realized gross profit of the current iteration
            profit_net (float): Realized net profit of the current iteration
            mu_gross_realized (float): Realized gross margin, NaN without sales
            mu_net_realized (float): Realized net margin, NaN without sales
            last_sales (float): Sales of the previous iteration, used for planning
            last_profit_net (float): Net profit of the previous iteration
            is_entrant (bool): Skips planning in its first iteration
    """
    # Required input fields
    id: int
    mu: float
    birth_t: int

    # Optional fields with defaults
    n_workers: int = 0
    planned_workers: int = 0
    q_produced: int = 0
    q_sold: int = 0
    q_demand: int = 0
    cash: float = 0.0
    debt: float = 0.0
    profit_gross: float = 0.0
    profit_net: float = 0.0
    mu_gross_realized: float = float("nan")
    mu_net_realized: float = float("nan")
    last_sales: float = 0.0
    last_profit_net: float = 0.0
    is_entrant: bool = False

    @property
    def equity(self) -> float:
        return self.cash - self.debt

    def age(self, t: int) -> int:
        return t - self.birth_t


@dataclass
class WorkerState:
    """Employment flag and savings of one worker (a view on ``Workers``)."""
    employed: bool
    savings: float


class Workers:
    """All workers, stored as parallel arrays.

    Workers are interchangeable apart from their savings, so the population is
    kept as an ``employed`` flag array and a ``savings`` array of length N_w.
    Indexing returns a ``WorkerState`` snapshot of one worker.
    """

    def __init__(self, n_workers: int):
        self.employed = np.zeros(n_workers, dtype=bool)
        self.savings = np.zeros(n_workers, dtype=np.float64)

    def __len__(self) -> int:
        return self.savings.size

    def __getitem__(self, j: int) -> WorkerState:
        return WorkerState(employed=bool(self.employed[j]), savings=float(self.savings[j]))

    def __iter__(self) -> Iterator[WorkerState]:
        for j in range(len(self)):
            yield self[j]

    @property
    def n_employed(self) -> int:
        return int(self.employed.sum())

    @property
    def total_savings(self) -> float:
        return float(self.savings.sum())


@dataclass
class BankState:
    """The single bank.

    ``equity`` is a running balance moved by every interest, liquidation and
    write-off posting; the cumulative totals are kept for reporting only.

    Attributes:
        loans_outstanding (float): Mirror of the sum of firm debts
        interest_income_cum (float): Interest received since t=0
        write_offs_cum (float): Debt written off since t=0
        liquidations_cum (float): Cash received from dissolved dormant firms
        opening_equity (float): Claims on the initial debts, so money sums to zero at t=0
        equity (float): Current equity of the bank
    """
    loans_outstanding: float = 0.0
    interest_income_cum: float = 0.0
    write_offs_cum: float = 0.0
    liquidations_cum: float = 0.0
    opening_equity: float = 0.0
    equity: float = 0.0

    def record_opening(self, amount: float) -> None:
        """Book a claim that exists before the first iteration."""
        self.opening_equity += amount
        self.equity += amount


@dataclass
class FailureRecord:
    """A bankruptcy: who failed, when, how old and how indebted."""
    t: int
    id: int
    age: int
    size: int
    mu: float
    debt: float
    write_off: float
    mu_gross_realized: float = float("nan")
    mu_net_realized: float = float("nan")


@dataclass
class Economy:
    """Complete state of one simulated economy.

    Args:
        params (SimParams): Exogenous constants (required)
        rng (np.random.Generator): The run's single random stream (required)

    Attributes:
        t (int): Index of the next iteration to execute
        firms (List[FirmState]): Alive firms, ordered by ascending id
        workers (Workers): Worker population
        bank (BankState): The bank
        mu_eff_prev (Optional[float]): Effective margin of the previous iteration
        workforce (Dict[int, np.ndarray]): Worker indices employed by each firm id
        clearing (float): Goods-market clearing account, zero between iterations
        next_id (int): Identifier for the next created firm
        failures (List[FailureRecord]): Bankruptcies of the last iteration
        ledger: The economy's ``Ledger`` (attached by ``init_economy``)
    """
    params: SimParams
    rng: np.random.Generator
    t: int = 0
    firms: List[FirmState] = field(default_factory=list)
    workers: Optional[Workers] = None
    bank: BankState = field(default_factory=BankState)
    mu_eff_prev: Optional[float] = None
    workforce: Dict[int, np.ndarray] = field(default_factory=dict)
    clearing: float = 0.0
    next_id: int = 0
    failures: List[FailureRecord] = field(default_factory=list)
    ledger: object = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.workers is None:
            self.workers = Workers(self.params.n_workers)
        self._by_id: Dict[int, FirmState] = {f.id: f for f in self.firms}

    def firm(self, firm_id: int) -> Optional[FirmState]:
        """Look up an alive firm by id (None when absent)."""
        return self._by_id.get(firm_id)

    def add_firm(self, firm: FirmState) -> None:
        """Append a firm; ids grow monotonically so ``firms`` stays sorted."""
        self.firms.append(firm)
        self._by_id[firm.id] = firm
        self.next_id = max(self.next_id, firm.id + 1)

    def remove_firms(self, ids: List[int]) -> None:
        gone = set(ids)
        if not gone:
            return
        self.firms = [f for f in self.firms if f.id not in gone]
        for firm_id in gone:
            self._by_id.pop(firm_id, None)
            self.workforce.pop(firm_id, None)

    @property
    def total_debt(self) -> float:
        return math.fsum(f.debt for f in self.firms)

    @property
    def total_employed(self) -> int:
        return int(sum(f.n_workers for f in self.firms))

    def conservation_residual(self) -> float:
        """Sum of firm equities, worker savings, bank equity and the clearing balance.

        Summed with ``math.fsum`` so the result is the exact sum of the stored
        balances, whatever their magnitudes.
        """
        terms = [f.cash for f in self.firms]
        terms.extend(-f.debt for f in self.firms)
        terms.extend(self.workers.savings.tolist())
        terms.append(self.bank.equity)
        terms.append(self.clearing)
        return math.fsum(terms)
