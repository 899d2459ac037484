"""
Statistics Service

Observables of the simulated economy and the distribution fits used to check
its statistical regularities.

Features:
- Effective margin (employment-weighted mean margin)
- Survivor growth rates between two cross-sections
- Power-law tail exponent of the firm-size CCDF (continuous maximum likelihood)
- Laplace vs Gaussian fit of growth rates ("tent shape")
- Trailing moving averages, log-binned histograms, net-margin histograms
- Size-growth correlation and size-conditioned growth-rate width

Every function here is pure: it reads its arguments and returns new values.

Example Usage:
    from src.services.stats import fit_powerlaw_ccdf, fit_tent

    fit = fit_powerlaw_ccdf(cross.sizes, x_min=20)
    tent = fit_tent(growth)
    print(fit.parameters["alpha"], tent.is_tent)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats as sp_stats

from src.services.cross_section import GROWTH_COLUMNS, FirmCrossSection
from src.utils.config import config
from src.utils.output_formatter import formatter


class FitError(ValueError):
    """Raised when a statistic cannot be computed from the given samples."""
    pass


class FitKind(str, Enum):
    POWERLAW_CCDF = "powerlaw_ccdf"
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


@dataclass
class DistributionFit:
    """Maximum-likelihood fit of one distribution.

    Attributes:
        kind (FitKind): Distribution family
        parameters (Dict[str, float]): alpha (+ std_error) for the power law,
            loc/scale for Laplace and Gaussian
        log_likelihood (float): Log-likelihood at the estimate
        n_samples (int): Samples the fit used
        x_min (Optional[float]): Power-law cutoff (None for the other kinds)
    """
    kind: FitKind
    parameters: Dict[str, float]
    log_likelihood: float
    n_samples: int
    x_min: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "parameters": dict(self.parameters),
            "log_likelihood": self.log_likelihood,
            "n_samples": self.n_samples,
            "x_min": self.x_min,
        }


@dataclass
class TentFit:
    """Laplace and Gaussian fits of the same growth-rate sample."""
    laplace: DistributionFit
    gaussian: DistributionFit
    excess_kurtosis: float

    @property
    def is_tent(self) -> bool:
        """Tent-shaped when the Laplace likelihood beats the Gaussian one."""
        return self.laplace.log_likelihood > self.gaussian.log_likelihood

    def to_dict(self) -> Dict:
        return {
            "laplace": self.laplace.to_dict(),
            "gaussian": self.gaussian.to_dict(),
            "excess_kurtosis": self.excess_kurtosis,
            "is_tent": self.is_tent,
        }


@dataclass
class GrowthPairs:
    """Pooled (size at t, growth from t to t+k) observations of survivors.

    ``t`` and ``ids`` label every observation with its base iteration and firm
    when the pairs were collected from a run; both stay empty otherwise.
    """
    sizes: List[int] = field(default_factory=list)
    growth: List[float] = field(default_factory=list)
    t: List[int] = field(default_factory=list)
    ids: List[int] = field(default_factory=list)

    def extend(self, sizes: Sequence[int], growth: Sequence[float],
               t: Optional[int] = None, ids: Optional[Sequence[int]] = None) -> None:
        self.sizes.extend(sizes)
        self.growth.extend(growth)
        if ids is not None:
            self.ids.extend(ids)
            self.t.extend([t] * len(ids))

    def __len__(self) -> int:
        return len(self.growth)

    def to_frame(self) -> pd.DataFrame:
        if len(self.ids) != len(self.growth):
            raise FitError("growth observations carry no iteration and firm labels")
        return pd.DataFrame(
            {"t": self.t, "id": self.ids, "size": self.sizes, "growth": self.growth},
            columns=GROWTH_COLUMNS,
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "GrowthPairs":
        missing = [c for c in GROWTH_COLUMNS if c not in df.columns]
        if missing:
            raise ValueError(f"growth table is missing columns: {', '.join(missing)}")
        return cls(
            sizes=[int(s) for s in df["size"]],
            growth=[float(g) for g in df["growth"]],
            t=[int(t) for t in df["t"]],
            ids=[int(i) for i in df["id"]],
        )


def mu_eff(economy) -> float:
    """Employment-weighted mean margin, sum(n_i * mu_i) / sum(n_i).

    Returns 0.0 (and warns) when nobody is employed.
    """
    sizes = np.array([f.n_workers for f in economy.firms], dtype=np.float64)
    total = sizes.sum()
    if total == 0:
        formatter.print_warning(f"mu_eff undefined at t={economy.t}: nobody is employed, using 0")
        return 0.0
    margins = np.array([f.mu for f in economy.firms], dtype=np.float64)
    return float(np.dot(sizes, margins) / total)


def survivor_growth_by_id(sizes_t: Dict[int, int],
                          sizes_tk: Dict[int, int]) -> Tuple[List[int], List[int], List[float]]:
    """Ids, sizes at t and log growth to t+k for firms present with positive size at both times."""
    ids, base, growth = [], [], []
    for firm_id, size in sizes_t.items():
        later = sizes_tk.get(firm_id)
        if size > 0 and later is not None and later > 0:
            ids.append(firm_id)
            base.append(size)
            growth.append(float(np.log(later / size)))
    return ids, base, growth


def survivor_growth(sizes_t: Dict[int, int], sizes_tk: Dict[int, int]) -> Tuple[List[int], List[float]]:
    """Sizes at t and log growth to t+k for firms present with positive size at both times."""
    _, base, growth = survivor_growth_by_id(sizes_t, sizes_tk)
    return base, growth


def growth_rates(cross_t: FirmCrossSection, cross_tk: FirmCrossSection, k: int = 1) -> List[float]:
    """Log size ratios of firms alive in both cross-sections with positive sizes.

    Exits and entrants are excluded, so bankrupt firms never enter the sample.
    ``k`` is the lag between the snapshots and only documents the pairing.
    """
    if k < 1:
        raise FitError("growth lag must be at least 1")
    _, growth = survivor_growth(cross_t.size_by_id(), cross_tk.size_by_id())
    return growth


def default_xmin(sizes: Sequence[float], quantile: Optional[float] = None) -> float:
    """Power-law cutoff: the given quantile of the sizes (90th percentile by default)."""
    values = np.asarray(sizes, dtype=np.float64)
    values = values[values > 0]
    if values.size == 0:
        raise FitError("no positive sizes to place a cutoff on")
    q = config.defaults["powerlaw_xmin_quantile"] if quantile is None else quantile
    return float(np.quantile(values, q))


def fit_powerlaw_ccdf(sizes: Sequence[float], x_min: Optional[float] = None) -> DistributionFit:
    """Continuous maximum-likelihood tail exponent of the size CCDF.

    alpha = n / sum(ln(s_i / x_min)) over the samples s_i >= x_min, so that
    P(S >= s) ~ s^-alpha; the density exponent is alpha + 1. The standard
    error alpha / sqrt(n) is returned with the parameters.

    Raises:
        FitError: With fewer than 10 tail samples, or when every tail sample
            equals x_min (the estimator diverges)
    """
    values = np.asarray(sizes, dtype=np.float64)
    if x_min is None:
        x_min = default_xmin(values)
    if x_min <= 0:
        raise FitError(f"x_min must be positive, got {x_min}")
    tail = values[values >= x_min]
    n = int(tail.size)
    if n < config.stats.min_powerlaw_samples:
        raise FitError(f"power-law fit needs at least {config.stats.min_powerlaw_samples} samples >= x_min, got {n}")
    log_sum = float(np.sum(np.log(tail / x_min)))
    if log_sum <= 0:
        raise FitError("all tail samples equal x_min, tail exponent diverges")
    alpha = n / log_sum
    log_likelihood = n * np.log(alpha / x_min) - (alpha + 1.0) * log_sum
    return DistributionFit(
        kind=FitKind.POWERLAW_CCDF,
        parameters={"alpha": alpha, "std_error": alpha / np.sqrt(n)},
        log_likelihood=float(log_likelihood),
        n_samples=n,
        x_min=float(x_min),
    )


def fit_tent(growth: Sequence[float]) -> TentFit:
    """Fit Laplace and Gaussian distributions to growth rates by maximum likelihood.

    Laplace: location = median, scale = mean absolute deviation from the
    median. Gaussian: mean and (population) standard deviation. The sample
    excess kurtosis is reported with both (about 3 for Laplace, 0 for Gaussian).

    Raises:
        FitError: With fewer than 30 samples or a constant sample
    """
    values = np.asarray(growth, dtype=np.float64)
    n = int(values.size)
    if n < config.stats.min_tent_samples:
        raise FitError(f"tent fit needs at least {config.stats.min_tent_samples} samples, got {n}")
    loc = float(np.median(values))
    scale = float(np.mean(np.abs(values - loc)))
    mean = float(np.mean(values))
    std = float(np.std(values))
    if scale == 0 or std == 0:
        raise FitError("growth rates are constant, no distribution can be fitted")

    laplace = DistributionFit(
        kind=FitKind.LAPLACE,
        parameters={"loc": loc, "scale": scale},
        log_likelihood=float(np.sum(sp_stats.laplace.logpdf(values, loc=loc, scale=scale))),
        n_samples=n,
    )
    gaussian = DistributionFit(
        kind=FitKind.GAUSSIAN,
        parameters={"loc": mean, "scale": std},
        log_likelihood=float(np.sum(sp_stats.norm.logpdf(values, loc=mean, scale=std))),
        n_samples=n,
    )
    kurtosis = float(sp_stats.kurtosis(values, fisher=True, bias=True))
    return TentFit(laplace=laplace, gaussian=gaussian, excess_kurtosis=kurtosis)


def moving_average(series: Sequence[float], window: int) -> List[float]:
    """Trailing mean over ``window`` points; the first window-1 outputs average the available prefix."""
    if window < 1:
        raise FitError("window must be at least 1")
    if len(series) == 0:
        raise FitError("cannot average an empty series")
    averaged = pd.Series(series, dtype=np.float64).rolling(window, min_periods=1).mean()
    return averaged.tolist()


def size_margin_scatter(cross: FirmCrossSection) -> List[Tuple[float, int]]:
    """(net realized margin, size) of every firm with sales; firms without a realized margin are left out."""
    return [
        (r.mu_net_realized, r.size)
        for r in cross.rows
        if r.q_sold > 0 and np.isfinite(r.mu_net_realized)
    ]


def histogram_log_binned(values: Sequence[float], bins_per_decade: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Logarithmically spaced histogram covering the data range.

    Returns:
        Tuple[np.ndarray, np.ndarray]: bin edges and counts (counts sum to len(values))

    Raises:
        FitError: On empty input or non-positive values
    """
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        raise FitError("cannot bin an empty sample")
    if np.any(data <= 0):
        raise FitError("log-binned histogram needs strictly positive values")
    per_decade = bins_per_decade or config.stats.bins_per_decade
    lo = np.floor(np.log10(data.min()) * per_decade) / per_decade
    hi = np.ceil(np.log10(data.max()) * per_decade) / per_decade
    if hi <= lo:
        hi = lo + 1.0 / per_decade
    n_edges = int(round((hi - lo) * per_decade)) + 1
    edges = np.logspace(lo, hi, n_edges)
    # float round-off must not push the extremes outside the range
    edges[0] = min(edges[0], data.min())
    edges[-1] = max(edges[-1], data.max())
    counts, _ = np.histogram(data, bins=edges)
    return edges, counts


def margin_histogram(cross: FirmCrossSection, bins: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Number of enterprises per net realized margin bin (firms with sales only)."""
    margins = np.array([m for m, _ in size_margin_scatter(cross)], dtype=np.float64)
    if margins.size == 0:
        raise FitError("no firm with sales in the cross-section")
    counts, edges = np.histogram(margins, bins=bins or config.stats.margin_bins)
    return edges, counts


def size_growth_correlation(pairs: GrowthPairs) -> float:
    """Pearson correlation between log size and the subsequent survivor growth rate."""
    if len(pairs) < 3:
        raise FitError("correlation needs at least 3 observations")
    log_size = np.log(np.asarray(pairs.sizes, dtype=np.float64))
    growth = np.asarray(pairs.growth, dtype=np.float64)
    if np.std(log_size) == 0 or np.std(growth) == 0:
        raise FitError("constant sizes or growth rates, correlation undefined")
    return float(np.corrcoef(log_size, growth)[0, 1])


def growth_width_by_size(pairs: GrowthPairs) -> Dict[str, float]:
    """Standard deviation of growth rates in the bottom and top size quartiles."""
    if len(pairs) < 8:
        raise FitError("size-conditioned width needs at least 8 observations")
    sizes = np.asarray(pairs.sizes, dtype=np.float64)
    growth = np.asarray(pairs.growth, dtype=np.float64)
    q1, q3 = np.quantile(sizes, [0.25, 0.75])
    bottom = growth[sizes <= q1]
    top = growth[sizes >= q3]
    return {
        "bottom_quartile_std": float(np.std(bottom)),
        "top_quartile_std": float(np.std(top)),
        "bottom_quartile_max_size": float(q1),
        "top_quartile_min_size": float(q3),
    }


def summarize_cross_section(cross: FirmCrossSection, xmin_quantile: Optional[float] = None) -> Dict:
    """Size tail fit, size histogram and net-margin histogram of one snapshot.

    Fits that cannot be computed are reported as ``{"error": message}``.
    """
    sizes = cross.sizes
    positive = sizes[sizes > 0]
    summary: Dict = {"t": cross.t, "n_firms": len(cross), "n_with_sales": len(size_margin_scatter(cross))}
    try:
        x_min = default_xmin(positive, xmin_quantile)
        summary["powerlaw"] = fit_powerlaw_ccdf(positive, x_min).to_dict()
    except FitError as e:
        summary["powerlaw"] = {"error": str(e)}
    try:
        edges, counts = histogram_log_binned(positive)
        summary["size_histogram"] = {"edges": edges.tolist(), "counts": counts.tolist()}
    except FitError as e:
        summary["size_histogram"] = {"error": str(e)}
    try:
        edges, counts = margin_histogram(cross)
        summary["margin_histogram"] = {"edges": edges.tolist(), "counts": counts.tolist()}
    except FitError as e:
        summary["margin_histogram"] = {"error": str(e)}
    return summary


def summarize_growth(pairs: GrowthPairs) -> Dict:
    """Tent fit, size-growth correlation and size-conditioned width of pooled survivor growth."""
    summary: Dict = {"n_samples": len(pairs)}
    try:
        summary["tent"] = fit_tent(pairs.growth).to_dict()
    except FitError as e:
        summary["tent"] = {"error": str(e)}
    try:
        summary["size_growth_correlation"] = size_growth_correlation(pairs)
    except FitError as e:
        summary["size_growth_correlation"] = None
        summary["size_growth_correlation_error"] = str(e)
    try:
        summary["width_by_size"] = growth_width_by_size(pairs)
    except FitError as e:
        summary["width_by_size"] = {"error": str(e)}
    return summary
