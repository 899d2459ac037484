"""
Iteration protocol of the simulated economy.

``init_economy`` builds the t=0 state and ``advance`` runs one iteration,
calling the steps below in a fixed order:

    plan production and workforce -> job market -> credit -> wages ->
    production -> consumption demand -> goods market -> settlement ->
    bankruptcies -> margin recentering -> entry -> audit

Random allocation is delegated to ``src.services.markets`` and every money
movement goes through the economy's ``Ledger``. Firms are always visited in
ascending id order, so a seed fixes the whole trajectory.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.ledger import (
    AuditError, BANK, Account, Ledger, LedgerError, Transfer, TransferKind,
)
from src.core.params import ParameterError, SimParams
from src.core.state import Economy, FailureRecord, FirmState
from src.services.cross_section import TimeSeriesRow
from src.services.markets import (
    AllocationRequest,
    allocate_without_replacement,
    draw_uniform,
    draw_uniform_int,
    shuffled,
    split_counts,
    stochastic_round,
    stochastic_round_array,
)
from src.services.stats import mu_eff
from src.utils.output_formatter import formatter


# Cash shortfalls below this are float noise from loan arithmetic
CASH_TOLERANCE = 1e-9


@dataclass
class Demand:
    """Unit demands of one goods market.

    Attributes:
        workers (np.ndarray): Goods wanted by every worker, indexed like ``Workers``
        firms (np.ndarray): Goods wanted by every alive firm, in firm order
    """
    workers: np.ndarray
    firms: np.ndarray

    @property
    def total(self) -> int:
        return int(self.workers.sum() + self.firms.sum())


@dataclass
class ExitSummary:
    n_bankruptcies: int = 0
    job_losses: int = 0
    n_dissolved: int = 0


def _post(economy: Economy, kind: TransferKind, src: Account, dst: Account, amount: float) -> None:
    economy.ledger.post(Transfer(economy.t, kind, src, dst, float(amount)))


# ---------------------------------------------------------------- initialization

def init_economy(params: SimParams) -> Economy:
    """Create the t=0 economy for ``params``.

    Every firm starts with the same workforce floor(N_w * (1 - u0) / N_e),
    a margin drawn uniformly in [mu_min, mu_max] and a debt drawn uniformly in
    [0, init_debt_max]. The bank's opening equity equals the initial debts, so
    the money in the system sums to zero. ``last_sales`` is set to the firm's
    full production at its workforce and ``last_profit_net`` to zero, which
    makes the first plan reproduce the initial size.

    Args:
        params (SimParams): Validated simulation parameters

    Returns:
        Economy: The initial state with its ledger attached
    """
    if params.margin_headroom <= 0:
        formatter.print_warning(
            "Average margin cannot cover interest on wage credit "
            f"(headroom {params.margin_headroom:.4f}); the firm population will shrink"
        )
    rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    economy = Economy(params=params, rng=rng)
    economy.ledger = Ledger(economy, keep_journal=params.keep_journal)

    size = int(np.floor(params.n_workers * (1.0 - params.init_unemployment) / params.n_firms_init))
    for firm_id in range(params.n_firms_init):
        mu = draw_uniform(params.mu_min, params.mu_max, rng)
        debt = draw_uniform(0.0, params.debt_cap, rng)
        firm = FirmState(
            id=firm_id,
            mu=mu,
            birth_t=0,
            n_workers=size,
            debt=debt,
            last_sales=params.wage * size / ((1.0 - mu) * params.price),
        )
        economy.add_firm(firm)
        economy.bank.loans_outstanding += debt
        economy.bank.record_opening(debt)

    order = shuffled(params.n_workers, rng)
    chunks = split_counts(order[: size * params.n_firms_init], [size] * params.n_firms_init)
    for firm, idx in zip(economy.firms, chunks):
        economy.workforce[firm.id] = idx
        economy.workers.employed[idx] = True
    return economy


# ---------------------------------------------------------------- planning

def plan_production(firm: FirmState, price: float) -> float:
    """Planned output: last sales adjusted by last net profit per unit price, floored at 0."""
    return max(0.0, firm.last_sales + firm.last_profit_net / price)


def plan_workforce(q_hat: float, mu: float, price: float, wage: float, rng: np.random.Generator) -> int:
    """Workers needed for ``q_hat`` goods at margin ``mu``, stochastically rounded.

    Raises:
        ParameterError: If mu >= 1
    """
    if mu >= 1:
        raise ParameterError("mu", f"margin must be below 1 to plan a workforce, got {mu}")
    return stochastic_round(q_hat * (1.0 - mu) * price / wage, rng)


def _plan(economy: Economy) -> None:
    params = economy.params
    for firm in economy.firms:
        if firm.is_entrant:
            # planned_workers was drawn at entry
            firm.is_entrant = False
            continue
        q_hat = plan_production(firm, params.price)
        firm.planned_workers = plan_workforce(q_hat, firm.mu, params.price, params.wage, economy.rng)


# ---------------------------------------------------------------- job market

def run_job_market(economy: Economy) -> Dict[int, int]:
    """Match job openings and workers at random.

    When the openings fit in the labour force every plan is met. Otherwise
    N_w of the openings are filled, each opening with the same probability.
    Jobs are then handed to workers in random order.

    Returns:
        Dict[int, int]: Hires per firm id
    """
    params = economy.params
    firms = economy.firms
    plans = np.array([f.planned_workers for f in firms], dtype=np.int64)
    if plans.sum() <= params.n_workers:
        hires = plans
    else:
        hires = allocate_without_replacement(AllocationRequest(plans, params.n_workers), economy.rng)

    workers = economy.workers
    workers.employed[:] = False
    order = shuffled(params.n_workers, economy.rng)
    chunks = split_counts(order[: int(hires.sum())], hires.tolist())
    economy.workforce = {}
    for firm, n, idx in zip(firms, hires, chunks):
        firm.n_workers = int(n)
        economy.workforce[firm.id] = idx
        workers.employed[idx] = True
    return {f.id: f.n_workers for f in firms}


# ---------------------------------------------------------------- credit and wages

def _column(firms: Sequence[FirmState], name: str) -> np.ndarray:
    return np.array([getattr(f, name) for f in firms], dtype=np.float64)


def issue_credit(economy: Economy, firms: Optional[Sequence[FirmState]] = None) -> np.ndarray:
    """Borrow what each wage bill needs, plus the interest due on repayment.

    In ``shortfall`` mode the loan is (n*w - cash)(1+r) and old debt is kept
    apart. In ``literal`` mode it is (n*w - (cash - debt))(1+r) and the old
    debt is repaid out of the new loan, so the loan becomes the firm's whole
    debt. Nothing is borrowed when the base already covers the bill.

    Args:
        economy (Economy): The economy
        firms (Optional[Sequence[FirmState]]): Borrowers, all alive firms when None

    Returns:
        np.ndarray: The loan issued to each firm (0.0 when none)
    """
    params = economy.params
    firms = economy.firms if firms is None else firms
    cash = _column(firms, "cash")
    debt = _column(firms, "debt")
    bills = _column(firms, "n_workers") * params.wage
    base = cash if params.loan_mode == "shortfall" else cash - debt
    loans = np.maximum(0.0, bills - base) * (1.0 + params.interest_rate)
    economy.ledger.bank_postings(TransferKind.LOAN_ISSUE, firms, loans)
    if params.loan_mode == "literal":
        economy.ledger.bank_postings(TransferKind.REPAYMENT, firms, np.where(loans > 0, debt, 0.0))
    return loans


def take_credit(economy: Economy, firm: FirmState) -> float:
    """Credit for a single firm; see ``issue_credit``."""
    return float(issue_credit(economy, [firm])[0])


def pay_wages(economy: Economy) -> float:
    """Every firm pays w to each of its workers; returns the total wage bill.

    Raises:
        LedgerError: If a firm cannot cover its wage bill after credit
    """
    wage = economy.params.wage
    firms = economy.firms
    bills = _column(firms, "n_workers") * wage
    short = np.flatnonzero(_column(firms, "cash") < bills - CASH_TOLERANCE * np.maximum(1.0, bills))
    if short.size:
        firm = firms[int(short[0])]
        raise LedgerError(
            f"firm:{firm.id} cannot pay wages {bills[short[0]]:.6g} from cash {firm.cash:.6g}"
        )
    economy.ledger.pay_wage_bills(firms, economy.workforce, wage)
    return float(bills.sum())


# ---------------------------------------------------------------- production and demand

def produce(firm: FirmState, wage: float, price: float, rng: np.random.Generator) -> int:
    """Goods made by the firm's workers: (w/p) * n / (1 - mu), stochastically rounded.

    Raises:
        ParameterError: If mu >= 1
    """
    if firm.mu >= 1:
        raise ParameterError("mu", f"margin must be below 1 to produce, got {firm.mu}")
    firm.q_produced = stochastic_round(wage * firm.n_workers / ((1.0 - firm.mu) * price), rng)
    return firm.q_produced


def consumption_demand(economy: Economy) -> Demand:
    """Unit demands of workers (their savings) and firms (their expected net profit).

    Worker demand is savings/p stochastically rounded and capped at what the
    savings can pay for. Firm demand is max(0, mu*p*q - r*debt)/p, the net
    profit the firm expects if it sells everything, stochastically rounded.
    """
    params = economy.params
    savings = economy.workers.savings
    wanted = stochastic_round_array(savings / params.price, economy.rng)
    affordable = np.floor(savings / params.price).astype(np.int64)
    workers = np.minimum(wanted, affordable)

    firm_list = economy.firms
    expected = (
        _column(firm_list, "mu") * params.price * _column(firm_list, "q_produced")
        - params.interest_rate * _column(firm_list, "debt")
    )
    firms = stochastic_round_array(np.maximum(0.0, expected) / params.price, economy.rng)
    for firm, k in zip(firm_list, firms.tolist()):
        firm.q_demand = k
    return Demand(workers=workers, firms=firms)


# ---------------------------------------------------------------- goods market

def run_goods_market(economy: Economy, demand: Demand) -> Tuple[int, int, int]:
    """Clear the goods market and settle purchases through the clearing account.

    With more goods than demand, D of the Q goods are sold, each good with
    the same chance. Otherwise all goods are sold and Q of the D unit demands
    are filled, each with the same chance; unfilled demand stays as savings
    or cash. Unsold goods perish. Firms left with negative cash get the
    difference as an overdraft.

    Returns:
        Tuple[int, int, int]: Q, D and the number of goods sold
    """
    params = economy.params
    ledger = economy.ledger
    firms = economy.firms
    supply = np.array([f.q_produced for f in firms], dtype=np.int64)
    total_output = int(supply.sum())
    total_demand = demand.total

    if total_output > total_demand:
        sold = allocate_without_replacement(AllocationRequest(supply, total_demand), economy.rng)
        worker_filled, firm_filled = demand.workers, demand.firms
    else:
        sold = supply
        wants = np.concatenate([demand.workers, demand.firms])
        filled = allocate_without_replacement(AllocationRequest(wants, total_output), economy.rng)
        n_w = demand.workers.size
        worker_filled, firm_filled = filled[:n_w], filled[n_w:]

    # buyers pay the clearing account
    buyers = np.flatnonzero(worker_filled)
    ledger.worker_purchases(buyers, worker_filled[buyers] * params.price)
    ledger.clearing_postings(firms, firm_filled * params.price, to_firms=False)

    # the clearing account pays the sellers
    for firm, s in zip(firms, sold.tolist()):
        firm.q_sold = s
    ledger.clearing_postings(firms, sold * params.price, to_firms=True)

    ledger.cover_overdrafts(firms)
    return total_output, total_demand, int(sold.sum())


# ---------------------------------------------------------------- settlement

def settle_firms(economy: Economy, firms: Optional[Sequence[FirmState]] = None) -> None:
    """Book profits, pay interest on the whole debt and repay what cash allows.

    Interest a firm cannot pay from cash is borrowed first (overdraft).
    Realized margins are NaN for a firm that sold nothing.
    """
    params = economy.params
    ledger = economy.ledger
    firms = economy.firms if firms is None else firms
    if not firms:
        return
    revenue = _column(firms, "q_sold") * params.price
    gross = revenue - _column(firms, "n_workers") * params.wage
    interest = params.interest_rate * _column(firms, "debt")
    net = gross - interest

    ledger.bank_postings(TransferKind.OVERDRAFT, firms, np.maximum(0.0, interest - _column(firms, "cash")))
    ledger.bank_postings(TransferKind.INTEREST, firms, interest)
    ledger.cover_overdrafts(firms)
    repayment = np.maximum(0.0, np.minimum(_column(firms, "cash"), _column(firms, "debt")))
    ledger.bank_postings(TransferKind.REPAYMENT, firms, repayment)

    with np.errstate(invalid="ignore", divide="ignore"):
        mu_gross = np.where(revenue > 0, gross / revenue, np.nan)
        mu_net = np.where(revenue > 0, net / revenue, np.nan)
    rows = zip(firms, gross.tolist(), net.tolist(), mu_gross.tolist(), mu_net.tolist())
    for firm, profit_gross, profit_net, m_gross, m_net in rows:
        firm.profit_gross = profit_gross
        firm.profit_net = profit_net
        firm.mu_gross_realized = m_gross
        firm.mu_net_realized = m_net
        firm.last_sales = float(firm.q_sold)
        firm.last_profit_net = profit_net


def settle_accounts(economy: Economy, firm: FirmState) -> None:
    """Settlement of a single firm; see ``settle_firms``."""
    settle_firms(economy, [firm])


# ---------------------------------------------------------------- exits

def check_bankruptcy(firm: FirmState, wage: float, gamma: float) -> bool:
    """Bankrupt iff equity < -gamma * w * n (a firm with no workers fails on any negative equity)."""
    return firm.equity < -gamma * wage * firm.n_workers


def _fail(economy: Economy, firm: FirmState) -> FailureRecord:
    debt_before = firm.debt
    surrender = max(0.0, min(firm.cash, firm.debt))
    if surrender > 0:
        _post(economy, TransferKind.REPAYMENT, Account.firm(firm.id), BANK, surrender)
    residual = firm.debt
    if residual > 0:
        _post(economy, TransferKind.WRITE_OFF, BANK, Account.firm(firm.id), residual)
    idx = economy.workforce.get(firm.id)
    if idx is not None:
        economy.workers.employed[idx] = False
    return FailureRecord(
        t=economy.t,
        id=firm.id,
        age=firm.age(economy.t),
        size=firm.n_workers,
        mu=firm.mu,
        debt=debt_before,
        write_off=residual,
        mu_gross_realized=firm.mu_gross_realized,
        mu_net_realized=firm.mu_net_realized,
    )


def resolve_exits(economy: Economy) -> ExitSummary:
    """Remove bankrupt firms (writing off their debt) and dissolve dormant ones.

    A dormant firm has no workers and no debt after settlement; it can never
    plan production again, so its cash is paid to the bank and it is removed.
    Failure records of the iteration are left on ``economy.failures``.
    """
    params = economy.params
    summary = ExitSummary()
    failures: List[FailureRecord] = []
    gone: List[int] = []
    for firm in economy.firms:
        if check_bankruptcy(firm, params.wage, params.gamma):
            failures.append(_fail(economy, firm))
            summary.n_bankruptcies += 1
            summary.job_losses += firm.n_workers
            gone.append(firm.id)
        elif firm.n_workers == 0 and firm.debt == 0:
            if firm.cash > 0:
                _post(economy, TransferKind.LIQUIDATION, Account.firm(firm.id), BANK, firm.cash)
            summary.n_dissolved += 1
            gone.append(firm.id)
    economy.remove_firms(gone)
    economy.failures = failures
    return summary


# ---------------------------------------------------------------- margins and entry

def recenter_margins(economy: Economy, mu_now: Optional[float]) -> float:
    """Shift every firm's margin down by the change of the effective margin.

    No shift happens without a previous value or when ``mu_now`` is None
    (nobody employed); the previous value is then kept.

    Returns:
        float: The shift applied
    """
    if mu_now is None:
        return 0.0
    delta = 0.0
    if economy.mu_eff_prev is not None:
        delta = mu_now - economy.mu_eff_prev
        for firm in economy.firms:
            firm.mu -= delta
    economy.mu_eff_prev = mu_now
    return delta


def spawn_entrants(economy: Economy) -> List[FirmState]:
    """Start ``nu`` firms with a fresh margin and a drawn first workforce plan."""
    params = economy.params
    entrants = []
    for _ in range(params.nu):
        mu = draw_uniform(params.mu_min, params.mu_max, economy.rng)
        size = draw_uniform_int(params.entry_size_min, params.entry_size_max, economy.rng)
        firm = FirmState(
            id=economy.next_id,
            mu=mu,
            birth_t=economy.t + 1,
            planned_workers=size,
            is_entrant=True,
        )
        economy.add_firm(firm)
        entrants.append(firm)
    return entrants


# ---------------------------------------------------------------- one iteration

def _reset_period(economy: Economy) -> None:
    for firm in economy.firms:
        firm.n_workers = 0
        firm.q_produced = 0
        firm.q_sold = 0
        firm.q_demand = 0
        firm.profit_gross = 0.0
        firm.profit_net = 0.0


def advance(economy: Economy) -> TimeSeriesRow:
    """Run iteration ``economy.t`` and return its aggregates.

    Raises:
        AuditError: If money is not conserved at the end of the iteration
    """
    params = economy.params
    ledger = economy.ledger
    ledger.begin_iteration()
    _reset_period(economy)

    _plan(economy)
    run_job_market(economy)
    n_employed = economy.total_employed
    mu_now = mu_eff(economy)

    issue_credit(economy)
    pay_wages(economy)
    for firm in economy.firms:
        produce(firm, params.wage, params.price, economy.rng)
    demand = consumption_demand(economy)
    total_output, total_demand, total_sold = run_goods_market(economy, demand)
    settle_firms(economy)

    exits = resolve_exits(economy)
    n_active = len(economy.firms)
    shift = recenter_margins(economy, mu_now if n_employed > 0 else None)
    spawn_entrants(economy)

    report = ledger.audit()
    if not report.ok:
        raise AuditError(report)
    totals = ledger.aggregates()

    row = TimeSeriesRow(
        t=economy.t,
        unemployment_rate=1.0 - n_employed / params.n_workers,
        n_active_firms=n_active,
        n_bankruptcies=exits.n_bankruptcies,
        job_losses_bankruptcy=exits.job_losses,
        aggregate_debt=totals["aggregate_debt"],
        mu_eff=mu_now,
        total_output=total_output,
        total_demand=total_demand,
        total_sold=total_sold,
        bank_equity=totals["bank_equity"],
        conservation_residual=report.residual,
        n_employed=n_employed,
        interest_flow=totals["interest_flow"],
        write_off_flow=totals["write_off_flow"],
        mu_shift=shift,
        n_dissolved=exits.n_dissolved,
    )
    economy.t += 1
    return row
