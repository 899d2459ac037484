"""
Double-entry ledger of the simulated economy.

Every money movement (wages, loans, purchases, interest, repayment, write-offs,
overdrafts, liquidations) is posted as a ``Transfer`` that debits one account
and credits another for the same amount. Loans, overdrafts, repayments and
write-offs pair the cash movement with the matching movement of the debt stock,
so the conservation residual

    sum(firm cash - firm debt) + sum(worker savings) + bank equity + clearing

is unchanged by every posting. ``audit`` checks that residual once per iteration.

The engine posts whole columns of firms at once through ``bank_postings``,
``clearing_postings`` and ``pay_wage_bills``; ``Transfer`` objects are only
built for those when the journal is kept.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.state import Economy, FirmState
from src.utils.config import config


class TransferKind(str, Enum):
    WAGE = "wage"
    LOAN_ISSUE = "loan_issue"
    PURCHASE = "purchase"
    INTEREST = "interest"
    REPAYMENT = "repayment"
    WRITE_OFF = "write_off"
    OVERDRAFT = "overdraft"
    LIQUIDATION = "liquidation"


class LedgerError(ValueError):
    """Raised for postings with an unknown account, a bad direction or a negative amount."""
    pass


@dataclass(frozen=True)
class Account:
    """Reference to a ledger account: a firm, a worker, the bank or the goods-market clearing account."""
    kind: str
    index: int = 0

    @classmethod
    def firm(cls, firm_id: int) -> "Account":
        return cls("firm", firm_id)

    @classmethod
    def worker(cls, j: int) -> "Account":
        return cls("worker", j)

    def __str__(self) -> str:
        if self.kind in ("bank", "clearing"):
            return self.kind
        return f"{self.kind}:{self.index}"


BANK = Account("bank")
CLEARING = Account("clearing")

# Allowed (from, to) account kinds per transfer kind
_DIRECTIONS = {
    TransferKind.WAGE: {("firm", "worker")},
    TransferKind.LOAN_ISSUE: {("bank", "firm")},
    TransferKind.OVERDRAFT: {("bank", "firm")},
    TransferKind.PURCHASE: {("firm", "clearing"), ("worker", "clearing"), ("clearing", "firm")},
    TransferKind.INTEREST: {("firm", "bank")},
    TransferKind.REPAYMENT: {("firm", "bank")},
    TransferKind.WRITE_OFF: {("bank", "firm")},
    TransferKind.LIQUIDATION: {("firm", "bank")},
}

# Kinds whose only counterparty of a firm is the bank
_BANK_KINDS = (
    TransferKind.LOAN_ISSUE, TransferKind.OVERDRAFT, TransferKind.INTEREST,
    TransferKind.REPAYMENT, TransferKind.WRITE_OFF, TransferKind.LIQUIDATION,
)
_TO_FIRM = (TransferKind.LOAN_ISSUE, TransferKind.OVERDRAFT, TransferKind.WRITE_OFF)


@dataclass(frozen=True)
class Transfer:
    """One balanced money movement.

    Args:
        t (int): Iteration of the posting
        kind (TransferKind): What the money is for
        from_account (Account): Account debited
        to_account (Account): Account credited
        amount (float): Money moved, >= 0
    """
    t: int
    kind: TransferKind
    from_account: Account
    to_account: Account
    amount: float


@dataclass
class AuditReport:
    """Result of one conservation audit.

    Attributes:
        t (int): Iteration audited
        residual (float): Sum of all net financial positions, ideally 0
        gross_flow (float): Sum of amounts posted during the iteration
        ok (bool): Whether |residual| is within tolerance
        tolerance (float): Tolerance that was applied
    """
    t: int
    residual: float
    gross_flow: float
    ok: bool
    tolerance: float = 0.0

    def to_dict(self) -> Dict[str, Union[int, float, bool]]:
        return {
            "t": self.t,
            "residual": self.residual,
            "gross_flow": self.gross_flow,
            "ok": self.ok,
            "tolerance": self.tolerance,
        }


class AuditError(RuntimeError):
    """Raised when the money-conservation audit fails."""

    def __init__(self, report: AuditReport):
        self.report = report
        super().__init__(
            f"money not conserved at t={report.t}: residual {report.residual:.6g} "
            f"exceeds tolerance {report.tolerance:.3g}"
        )

    def __reduce__(self):
        return (type(self), (self.report,))


class Ledger:
    """Posts transfers against the balances of one economy.

    Args:
        economy (Economy): The economy whose balances are kept
        keep_journal (bool): Retain every posted transfer in ``journal``
        absolute_floor (float): Smallest audit tolerance
        rel_tol (float): Audit tolerance relative to the cumulative gross flow
    """

    def __init__(self, economy: Economy, keep_journal: bool = False,
                 absolute_floor: Optional[float] = None, rel_tol: Optional[float] = None):
        self.economy = economy
        self.keep_journal = keep_journal
        self.absolute_floor = config.audit.absolute_floor if absolute_floor is None else absolute_floor
        self.rel_tol = config.audit.rel_tol if rel_tol is None else rel_tol
        self.journal: List[Transfer] = []
        self.flows: Dict[TransferKind, float] = {kind: 0.0 for kind in TransferKind}
        self.gross_flow_cum = 0.0

    # ------------------------------------------------------------------ posting

    def begin_iteration(self) -> None:
        """Reset the per-iteration flow totals (the journal is cleared too unless retained)."""
        self.flows = {kind: 0.0 for kind in TransferKind}
        if not self.keep_journal:
            self.journal.clear()

    @property
    def gross_flow(self) -> float:
        return math.fsum(self.flows.values())

    def post(self, transfer: Transfer) -> None:
        """Apply one transfer to the balances.

        Raises:
            LedgerError: If the amount is negative or not finite, an account
                does not exist, or the direction is not valid for the kind
        """
        amount = transfer.amount
        if not math.isfinite(amount) or amount < 0:
            raise LedgerError(f"transfer amount must be finite and non-negative, got {amount}")
        kind = TransferKind(transfer.kind)
        src, dst = transfer.from_account, transfer.to_account
        if (src.kind, dst.kind) not in _DIRECTIONS[kind]:
            raise LedgerError(f"{kind.value} cannot move money from {src} to {dst}")
        self._check_account(src)
        self._check_account(dst)

        if amount > 0:
            if kind in _BANK_KINDS:
                firm = self.economy.firm(dst.index if kind in _TO_FIRM else src.index)
                _move_firm(kind, firm, amount)
                self._move_bank(kind, amount)
            else:
                # wage and purchase: plain liquid transfers
                self._add_liquid(src, -amount)
                self._add_liquid(dst, amount)
        self._record_bulk(kind, amount)
        if self.keep_journal:
            self.journal.append(transfer)

    def bank_postings(self, kind: TransferKind, firms: Sequence[FirmState], amounts) -> float:
        """Post one ``kind`` transfer between the bank and each firm; zero amounts are skipped.

        Args:
            kind (TransferKind): A kind whose counterparty is the bank
            firms (Sequence[FirmState]): Alive firms
            amounts: Money per firm, aligned with ``firms``

        Returns:
            float: Total amount posted

        Raises:
            LedgerError: If the kind has no bank side or an amount is invalid
        """
        kind = TransferKind(kind)
        if kind not in _BANK_KINDS:
            raise LedgerError(f"{kind.value} is not a bank posting")
        values = _checked_amounts(amounts, len(firms))
        for firm, amount in zip(firms, values):
            if amount > 0:
                _move_firm(kind, firm, amount)
        total = math.fsum(values)
        if total > 0:
            self._move_bank(kind, total)
        self._record_bulk(kind, total)
        if self.keep_journal:
            for firm, amount in zip(firms, values):
                if amount > 0:
                    account = Account.firm(firm.id)
                    src, dst = (BANK, account) if kind in _TO_FIRM else (account, BANK)
                    self.journal.append(Transfer(self.economy.t, kind, src, dst, amount))
        return total

    def clearing_postings(self, firms: Sequence[FirmState], amounts, to_firms: bool) -> float:
        """Purchases by firms (``to_firms=False``) or sale proceeds paid to them (``to_firms=True``)."""
        values = _checked_amounts(amounts, len(firms))
        sign = 1.0 if to_firms else -1.0
        for firm, amount in zip(firms, values):
            if amount > 0:
                firm.cash += sign * amount
        total = math.fsum(values)
        self.economy.clearing -= sign * total
        self._record_bulk(TransferKind.PURCHASE, total)
        if self.keep_journal:
            for firm, amount in zip(firms, values):
                if amount > 0:
                    account = Account.firm(firm.id)
                    src, dst = (CLEARING, account) if to_firms else (account, CLEARING)
                    self.journal.append(Transfer(self.economy.t, TransferKind.PURCHASE, src, dst, amount))
        return total

    def cover_overdrafts(self, firms: Sequence[FirmState]) -> float:
        """Turn negative cash into debt at face value; returns the amount converted."""
        # cash + (-cash) is exactly zero in floating point
        return self.bank_postings(TransferKind.OVERDRAFT, firms, [max(0.0, -f.cash) for f in firms])

    def pay_wages(self, firm: FirmState, worker_idx: np.ndarray, wage: float) -> None:
        """Pay ``wage`` from ``firm`` to every worker in ``worker_idx`` (vectorized wage postings)."""
        self.pay_wage_bills([firm], {firm.id: worker_idx}, wage)

    def pay_wage_bills(self, firms: Sequence[FirmState], workforce: Dict[int, np.ndarray], wage: float) -> float:
        """Every firm pays ``wage`` to each worker it employs; returns the total wage bill."""
        if wage < 0:
            raise LedgerError(f"wage must be non-negative, got {wage}")
        bills = []
        paid = []
        for firm in firms:
            idx = workforce.get(firm.id)
            if idx is None or idx.size == 0:
                continue
            self._check_account(Account.firm(firm.id))
            bill = wage * idx.size
            firm.cash -= bill
            bills.append(bill)
            paid.append(idx)
        if not paid:
            return 0.0
        self.economy.workers.savings[np.concatenate(paid)] += wage
        total = math.fsum(bills)
        self._record_bulk(TransferKind.WAGE, total)
        if self.keep_journal:
            t = self.economy.t
            for firm in firms:
                idx = workforce.get(firm.id)
                if idx is None:
                    continue
                self.journal.extend(
                    Transfer(t, TransferKind.WAGE, Account.firm(firm.id), Account.worker(int(j)), wage)
                    for j in idx
                )
        return total

    def worker_purchases(self, worker_idx: np.ndarray, amounts: np.ndarray) -> None:
        """Debit worker savings and credit the clearing account (vectorized purchase postings)."""
        if worker_idx.size == 0:
            return
        if np.any(amounts < 0):
            raise LedgerError("purchase amounts must be non-negative")
        self.economy.workers.savings[worker_idx] -= amounts
        total = math.fsum(np.asarray(amounts, dtype=np.float64).tolist())
        self.economy.clearing += total
        self._record_bulk(TransferKind.PURCHASE, total)
        if self.keep_journal:
            t = self.economy.t
            self.journal.extend(
                Transfer(t, TransferKind.PURCHASE, Account.worker(int(j)), CLEARING, float(a))
                for j, a in zip(worker_idx, amounts)
            )

    def _check_account(self, account: Account) -> None:
        if account.kind == "firm":
            if self.economy.firm(account.index) is None:
                raise LedgerError(f"unknown account {account}")
        elif account.kind == "worker":
            if not 0 <= account.index < len(self.economy.workers):
                raise LedgerError(f"unknown account {account}")
        elif account.kind not in ("bank", "clearing"):
            raise LedgerError(f"unknown account kind {account.kind!r}")

    def _move_bank(self, kind: TransferKind, amount: float) -> None:
        bank = self.economy.bank
        if kind in (TransferKind.LOAN_ISSUE, TransferKind.OVERDRAFT):
            bank.loans_outstanding += amount
        elif kind == TransferKind.REPAYMENT:
            bank.loans_outstanding -= amount
        elif kind == TransferKind.WRITE_OFF:
            bank.loans_outstanding -= amount
            bank.write_offs_cum += amount
            bank.equity -= amount
        elif kind == TransferKind.INTEREST:
            bank.interest_income_cum += amount
            bank.equity += amount
        elif kind == TransferKind.LIQUIDATION:
            bank.liquidations_cum += amount
            bank.equity += amount

    def _add_liquid(self, account: Account, amount: float) -> None:
        if account.kind == "firm":
            self.economy.firm(account.index).cash += amount
        elif account.kind == "worker":
            self.economy.workers.savings[account.index] += amount
        else:
            self.economy.clearing += amount

    def _record_bulk(self, kind: TransferKind, amount: float) -> None:
        self.flows[kind] += amount
        self.gross_flow_cum += amount

    # ------------------------------------------------------------------ checks

    def audit(self) -> AuditReport:
        """Compute the conservation residual and compare it with the tolerance."""
        residual = self.economy.conservation_residual()
        tolerance = max(self.absolute_floor, self.rel_tol * self.gross_flow_cum)
        return AuditReport(
            t=self.economy.t,
            residual=residual,
            gross_flow=self.gross_flow,
            ok=bool(abs(residual) <= tolerance),
            tolerance=tolerance,
        )

    def aggregates(self) -> Dict[str, float]:
        """Aggregate debt, bank equity and this iteration's interest and write-off flows."""
        return {
            "aggregate_debt": self.economy.total_debt,
            "bank_equity": self.economy.bank.equity,
            "interest_flow": self.flows[TransferKind.INTEREST],
            "write_off_flow": self.flows[TransferKind.WRITE_OFF],
        }


def _move_firm(kind: TransferKind, firm: FirmState, amount: float) -> None:
    """The firm's side of a bank posting."""
    if kind in (TransferKind.LOAN_ISSUE, TransferKind.OVERDRAFT):
        firm.cash += amount
        firm.debt += amount
    elif kind == TransferKind.REPAYMENT:
        firm.cash -= amount
        firm.debt -= amount
    elif kind == TransferKind.WRITE_OFF:
        firm.debt -= amount
    else:
        firm.cash -= amount


def _checked_amounts(amounts, n: int) -> List[float]:
    values = np.asarray(amounts, dtype=np.float64)
    if values.shape != (n,):
        raise LedgerError(f"expected {n} amounts, got shape {values.shape}")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise LedgerError("transfer amounts must be finite and non-negative")
    return values.tolist()


def post(economy: Economy, transfer: Transfer) -> None:
    """Post ``transfer`` on the economy's ledger."""
    economy.ledger.post(transfer)


def audit(economy: Economy) -> AuditReport:
    """Stock-flow-consistency audit of ``economy``."""
    return economy.ledger.audit()


def aggregates(economy: Economy) -> Dict[str, float]:
    return economy.ledger.aggregates()
