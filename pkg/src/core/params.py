from dataclasses import dataclass, field, asdict, replace
from typing import Optional, Dict, Any


LOAN_MODES = ("shortfall", "literal")


class ParameterError(ValueError):
    """Raised when simulation parameters violate their invariants.

    The offending key is kept on ``key`` so callers can point at it.
    """

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(key, message)

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


@dataclass(frozen=True)
class SimParams:
    """Exogenous constants of one simulated economy.

    Args:
        n_workers (int): Number of workers N_w (required)
        n_firms_init (int): Number of enterprises at t=0 (required)
        interest_rate (float): Interest rate r per period (required)
        nu (int): Entrants per iteration (required)
        mu_min (float): Lower bound of the margin range (required)
        mu_max (float): Upper bound of the margin range (required)
        iterations (int): Number of iterations to run (required)

    Attributes:
        Optional fields with defaults:
            wage (float): Wage w per worker per period (default: 30.0)
            price (float): Price p of one good (default: 1.0). The wage must be
                an integer multiple of the price so a wage buys whole goods
                with no remainder
            gamma (float): Bankruptcy threshold in wage bills (default: 2.0)
            init_unemployment (float): Unemployed fraction at t=0 (default: 0.1)
            init_debt_max (Optional[float]): Upper bound of initial random debts,
                None means one wage (default: None)
            seed (int): Seed of the random stream (default: 1)
            entry_size_min (int): Smallest entrant workforce plan (default: 1)
            entry_size_max (int): Largest entrant workforce plan (default: 3)
            loan_mode (str): "shortfall" lends the wage shortfall over cash,
                "literal" lends against signed equity and refinances old debt
                (default: "shortfall")
            keep_journal (bool): Retain every ledger transfer (default: False)
    """
    # Required input fields
    n_workers: int
    n_firms_init: int
    interest_rate: float
    nu: int
    mu_min: float
    mu_max: float
    iterations: int

    # Optional fields with defaults
    wage: float = 30.0
    price: float = 1.0
    gamma: float = 2.0
    init_unemployment: float = 0.1
    init_debt_max: Optional[float] = None
    seed: int = 1
    entry_size_min: int = 1
    entry_size_max: int = 3
    loan_mode: str = "shortfall"
    keep_journal: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        """Check every parameter invariant, naming the first key that fails."""
        if self.n_workers <= 0:
            raise ParameterError("n_workers", "must be positive")
        if self.n_firms_init <= 0:
            raise ParameterError("n_firms_init", "at least one enterprise is needed at t=0")
        if self.wage <= 0:
            raise ParameterError("wage", "must be positive")
        if self.price <= 0:
            raise ParameterError("price", "must be positive")
        ratio = self.wage / self.price
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ParameterError(
                "price", f"must divide the wage ({self.wage} / {self.price} is not a whole number of goods)"
            )
        if self.interest_rate < 0:
            raise ParameterError("interest_rate", "must be non-negative")
        if self.gamma < 0:
            raise ParameterError("gamma", "must be non-negative")
        if self.nu < 0 or int(self.nu) != self.nu:
            raise ParameterError("nu", "must be a non-negative integer")
        if self.mu_min < 0:
            raise ParameterError("mu_min", "must be non-negative")
        if self.mu_min > self.mu_max:
            raise ParameterError("mu_min", f"must not exceed mu_max ({self.mu_min} > {self.mu_max})")
        if self.mu_max >= 1:
            raise ParameterError("mu_max", "must be below 1")
        if not 0 <= self.init_unemployment <= 1:
            raise ParameterError("init_unemployment", "must lie in [0, 1]")
        if self.init_debt_max is not None and self.init_debt_max < 0:
            raise ParameterError("init_debt_max", "must be non-negative")
        if self.iterations <= 0:
            raise ParameterError("iterations", "must be positive")
        if self.entry_size_min < 0:
            raise ParameterError("entry_size_min", "must be non-negative")
        if self.entry_size_min > self.entry_size_max:
            raise ParameterError("entry_size_min", "must not exceed entry_size_max")
        if self.loan_mode not in LOAN_MODES:
            raise ParameterError("loan_mode", f"must be one of {', '.join(LOAN_MODES)}")

    @property
    def debt_cap(self) -> float:
        """Upper bound of the initial random debts (one wage unless configured)."""
        return self.wage if self.init_debt_max is None else self.init_debt_max

    @property
    def margin_headroom(self) -> float:
        """Midpoint margin return on the wage bill minus the interest on financing it.

        Firms borrow roughly their whole wage bill W every iteration, so the
        sector pays at least r(1+r)W in interest while margins return about
        mu/(1-mu)W. A non-positive value means the firm sector loses equity
        every iteration and the population collapses.
        """
        mu_mid = 0.5 * (self.mu_min + self.mu_max)
        return mu_mid / (1.0 - mu_mid) - self.interest_rate * (1.0 + self.interest_rate)

    def with_seed(self, seed: int) -> "SimParams":
        return replace(self, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
