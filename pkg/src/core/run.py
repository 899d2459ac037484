from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.engine import advance, init_economy
from src.core.ledger import AuditError, AuditReport
from src.core.scenario import ConfigError, FirmTracking, ScenarioConfig
from src.core.state import Economy, FailureRecord
from src.services.cross_section import (
    FAILURE_COLUMNS, TIMESERIES_COLUMNS, TRAJECTORY_COLUMNS, FirmCrossSection, TimeSeriesRow, TrajectoryRow,
)
from src.services.stats import GrowthPairs, summarize_cross_section, summarize_growth, survivor_growth_by_id
from src.utils.config import config
from src.utils.file_utils import save_to_csv, save_to_json
from src.utils.output_formatter import formatter

# CCDF exponents reported for real firm-size data
TAIL_EXPONENT_RANGE = (0.8, 2.0)


@dataclass
class SeedResult:
    """Everything one seed's simulation produced, kept in memory until written."""
    seed: int
    rows: List[TimeSeriesRow] = field(default_factory=list)
    snapshots: Dict[int, FirmCrossSection] = field(default_factory=dict)
    failures: List[FailureRecord] = field(default_factory=list)
    growth: GrowthPairs = field(default_factory=GrowthPairs)
    tracked: bool = False
    trajectories: List[TrajectoryRow] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows])

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.trajectories], columns=TRAJECTORY_COLUMNS)


@dataclass
class SeedOutcome:
    seed: int
    summary: Optional[Dict[str, Any]] = None
    failure: Optional[AuditReport] = None


def tracked_rows(economy: Economy, tracking: FirmTracking, row: TimeSeriesRow) -> List[TrajectoryRow]:
    """Trajectory rows of the tracked firms for the iteration that produced ``row``.

    A firm that went bankrupt in this iteration gets its last row from its
    failure record. Margins are the ones used during the iteration, before
    recentering.
    """
    rows = [
        TrajectoryRow(t=f.t, id=f.id, size=f.size, mu=f.mu, mu_gross_realized=f.mu_gross_realized,
                      mu_net_realized=f.mu_net_realized, debt=f.debt)
        for f in economy.failures
        if tracking.matches(f.id, f.t - f.age)
    ]
    rows.extend(
        TrajectoryRow(t=row.t, id=f.id, size=f.n_workers, mu=f.mu + row.mu_shift,
                      mu_gross_realized=f.mu_gross_realized, mu_net_realized=f.mu_net_realized, debt=f.debt)
        for f in economy.firms
        if not f.is_entrant and tracking.matches(f.id, f.birth_t)
    )
    return sorted(rows, key=lambda r: r.id)


def simulate_seed(scenario: ScenarioConfig, seed: int, result: Optional[SeedResult] = None,
                  progress: bool = False) -> SeedResult:
    """Run one seed of ``scenario`` to the end, collecting rows, snapshots and growth pairs.

    ``result`` is filled in place, so a caller keeps the rows produced before an
    ``AuditError``.
    """
    params = scenario.params_for(seed)
    result = result if result is not None else SeedResult(seed=seed)
    economy = init_economy(params)
    burn_in, _ = scenario.steady_window
    history: deque = deque(maxlen=scenario.growth_lag)  # (t, sizes by id)
    snapshot_times = set(scenario.snapshot_times)
    tracking = scenario.track_firms
    result.tracked = tracking.enabled
    every = config.run.progress_every

    for _ in range(params.iterations):
        row = advance(economy)
        result.rows.append(row)
        result.failures.extend(economy.failures)
        if row.t in snapshot_times:
            result.snapshots[row.t] = FirmCrossSection.from_economy(economy, row.t)
        if tracking.enabled:
            result.trajectories.extend(tracked_rows(economy, tracking, row))
        if row.t >= burn_in:
            sizes = {f.id: f.n_workers for f in economy.firms if not f.is_entrant}
            if len(history) == scenario.growth_lag:
                base_t, base_sizes = history[0]
                ids, base, growth = survivor_growth_by_id(base_sizes, sizes)
                result.growth.extend(base, growth, t=base_t, ids=ids)
            history.append((row.t, sizes))
        if progress and (row.t % every == 0 or row.t == params.iterations - 1):
            formatter.print_progress(row.t, params.iterations, row.unemployment_rate,
                                     row.n_active_firms, row.aggregate_debt)
    return result


def steady_state_stats(frame: pd.DataFrame, burn_in: int) -> Dict[str, Any]:
    """Means and variances of the aggregate series over t >= burn_in.

    Works on the time-series CSV as well as on the in-memory frame; the extra
    in-memory columns add the flow diagnostics.
    """
    window = frame[frame["t"] >= burn_in]
    stats: Dict[str, Any] = {"n_iterations": int(len(window))}
    for column in ("unemployment_rate", "n_active_firms", "aggregate_debt", "mu_eff", "bank_equity"):
        stats[f"{column}_mean"] = float(window[column].mean())
        stats[f"{column}_var"] = float(window[column].var(ddof=0))
    stats["n_bankruptcies"] = int(window["n_bankruptcies"].sum())
    stats["job_losses_bankruptcy"] = int(window["job_losses_bankruptcy"].sum())

    if "n_employed" in window:
        employed = window["n_employed"]
        rate = window["job_losses_bankruptcy"][employed > 0] / employed[employed > 0]
        stats["job_loss_rate_mean"] = float(rate.mean()) if len(rate) else None
    if "interest_flow" in window:
        interest = float(window["interest_flow"].sum())
        write_offs = float(window["write_off_flow"].sum())
        stats["interest_income"] = interest
        stats["write_offs"] = write_offs
        stats["interest_to_write_off_ratio"] = interest / write_offs if write_offs > 0 else None
    if "mu_shift" in window:
        stats["productivity_growth"] = float(window["mu_shift"].sum())
    if "n_dissolved" in window:
        stats["n_dissolved"] = int(window["n_dissolved"].sum())
    return stats


def summarize_seed(scenario: ScenarioConfig, result: SeedResult) -> Dict[str, Any]:
    """Steady-state statistics, fits and verdicts of one seed."""
    burn_in, iterations = scenario.steady_window
    frame = result.frame()
    lifetimes = [f.age for f in result.failures if f.t >= burn_in]
    snapshots = {
        str(t): summarize_cross_section(cross, scenario.powerlaw_xmin_quantile)
        for t, cross in sorted(result.snapshots.items())
    }
    growth = summarize_growth(result.growth)

    verdicts: Dict[str, Optional[bool]] = {}
    tent = growth["tent"]
    verdicts["tent_shaped"] = tent.get("is_tent")
    corr = growth["size_growth_correlation"]
    verdicts["negative_size_growth"] = None if corr is None else corr < 0
    width = growth["width_by_size"]
    verdicts["narrower_growth_for_large_firms"] = (
        width["top_quartile_std"] < width["bottom_quartile_std"] if "error" not in width else None
    )
    if snapshots:
        last = snapshots[str(max(result.snapshots))]["powerlaw"]
        alpha = last.get("parameters", {}).get("alpha")
        lo, hi = TAIL_EXPONENT_RANGE
        verdicts["tail_exponent_in_range"] = None if alpha is None else lo <= alpha <= hi

    return {
        "seed": result.seed,
        "steady_window": [burn_in, iterations],
        "steady_state": steady_state_stats(frame, burn_in),
        "mean_lifetime": float(np.mean(lifetimes)) if lifetimes else None,
        "n_failures": len(result.failures),
        "max_abs_residual": float(frame["conservation_residual"].abs().max()),
        "final": {
            "n_firms": int(frame["n_active_firms"].iloc[-1]),
            "unemployment_rate": float(frame["unemployment_rate"].iloc[-1]),
            "bank_equity": float(frame["bank_equity"].iloc[-1]),
        },
        "snapshots": snapshots,
        "growth": growth,
        "verdicts": verdicts,
    }


def write_seed_artifacts(output_dir: Path, result: SeedResult, summary: Dict[str, Any]) -> None:
    seed = result.seed
    save_to_csv(result.frame()[TIMESERIES_COLUMNS], output_dir / f"timeseries_seed{seed}.csv")
    for t, cross in sorted(result.snapshots.items()):
        save_to_csv(cross.to_frame(), output_dir / f"cross_section_seed{seed}_t{t}.csv")
    failures = pd.DataFrame([asdict(f) for f in result.failures], columns=FAILURE_COLUMNS)
    save_to_csv(failures, output_dir / f"failures_seed{seed}.csv")
    save_to_csv(result.growth.to_frame(), output_dir / f"growth_seed{seed}.csv")
    if result.tracked:
        save_to_csv(result.trajectory_frame(), output_dir / f"trajectory_seed{seed}.csv")
    save_to_json(summary, output_dir / f"summary_seed{seed}.json")


def run_seed(scenario: ScenarioConfig, seed: int, progress: bool = False) -> SeedOutcome:
    """Simulate, summarize and write one seed; an audit failure leaves a diagnostic file instead."""
    output_dir = Path(scenario.output_dir)
    result = SeedResult(seed=seed)
    try:
        simulate_seed(scenario, seed, result, progress=progress)
    except AuditError as e:
        tail = [r.to_dict() for r in result.rows[-config.run.tail_rows_in_diagnostic:]]
        save_to_json(
            {"seed": seed, "error": str(e), "audit": e.report.to_dict(), "last_rows": tail},
            output_dir / f"diagnostic_seed{seed}.json",
        )
        return SeedOutcome(seed=seed, failure=e.report)
    summary = summarize_seed(scenario, result)
    write_seed_artifacts(output_dir, result, summary)
    return SeedOutcome(seed=seed, summary=summary)


def _run_seed_quietly(scenario: ScenarioConfig, seed: int) -> SeedOutcome:
    # worker processes must not interleave console output
    formatter.quiet = True
    return run_seed(scenario, seed)


def cross_seed_stats(summaries: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Cross-seed means of the steady-state statistics and the spread of mean unemployment."""
    if not summaries:
        return {}
    frame = pd.DataFrame([s["steady_state"] for s in summaries])
    means = {f"{k}": float(v) for k, v in frame.mean(numeric_only=True).items()}
    unemployment = frame["unemployment_rate_mean"]
    mean = float(unemployment.mean())
    lifetimes = [s["mean_lifetime"] for s in summaries if s["mean_lifetime"] is not None]
    return {
        "n_seeds": len(summaries),
        "means": means,
        "unemployment_mean_cv": float(unemployment.std(ddof=0) / mean) if mean > 0 else None,
        "mean_lifetime": float(np.mean(lifetimes)) if lifetimes else None,
    }


@dataclass
class ScenarioRun:
    """Runs every seed of a scenario and writes the artifacts.

    Seeds are share-nothing, so they run in a process pool when more than one
    job is allowed; artifacts are written per seed and the scenario summary is
    assembled in seed order, which keeps the output independent of scheduling.

    Args:
        scenario (ScenarioConfig): What to run (required)
        jobs (Optional[int]): Worker processes, None for ``config.jobs``
        quiet (bool): Suppress console output except errors

    Attributes:
        Auto-initialized (set in __post_init__):
            output_dir (Path): Directory receiving the artifacts
    """
    # Required input fields
    scenario: ScenarioConfig

    # Optional fields with defaults
    jobs: Optional[int] = None
    quiet: bool = False

    def __post_init__(self) -> None:
        self.output_dir = Path(self.scenario.output_dir)
        self.jobs = max(1, self.jobs or config.jobs)
        formatter.quiet = self.quiet
        self.setup_directories()

    def setup_directories(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _outcomes(self) -> List[SeedOutcome]:
        seeds = self.scenario.seeds
        if self.jobs == 1 or len(seeds) == 1:
            outcomes = []
            for seed in seeds:
                bottom = formatter.print_box_start(f"seed {seed}")
                outcomes.append(run_seed(self.scenario, seed, progress=not self.quiet))
                formatter.print_box_end(bottom)
            return outcomes
        formatter.print_processing(f"Running {len(seeds)} seeds on {min(self.jobs, len(seeds))} processes")
        with ProcessPoolExecutor(max_workers=min(self.jobs, len(seeds))) as pool:
            futures = [pool.submit(_run_seed_quietly, self.scenario, seed) for seed in seeds]
            return [f.result() for f in futures]

    def start(self) -> Dict[str, Any]:
        """Run all seeds and write ``summary.json``.

        Returns:
            Dict[str, Any]: The scenario summary

        Raises:
            AuditError: After all seeds finished, if any of them failed the audit
        """
        scenario = self.scenario
        formatter.print_header(f"Scenario {scenario.name or 'custom'}: {len(scenario.seeds)} seed(s)")
        outcomes = self._outcomes()

        summaries = [o.summary for o in outcomes if o.summary is not None]
        failed = [o for o in outcomes if o.failure is not None]
        summary = {
            "scenario": {"name": scenario.name, **scenario.to_document()},
            "seeds": {str(s["seed"]): s for s in summaries},
            "failed_seeds": [o.seed for o in failed],
            "cross_seed": cross_seed_stats(summaries),
        }
        save_to_json(summary, self.output_dir / "summary.json")

        for s in summaries:
            ss = s["steady_state"]
            formatter.print_success(
                f"seed {s['seed']}: unemployment {ss['unemployment_rate_mean']:.2%}, "
                f"firms {ss['n_active_firms_mean']:.1f}, debt {ss['aggregate_debt_mean']:,.0f}"
            )
        if failed:
            for o in failed:
                formatter.print_error(f"seed {o.seed}: audit failed at t={o.failure.t} (see diagnostic_seed{o.seed}.json)")
            raise AuditError(failed[0].failure)
        formatter.print_info(f"Artifacts written to {self.output_dir}")
        return summary


def run_scenario(scenario: ScenarioConfig, jobs: Optional[int] = None, quiet: bool = False) -> Dict[str, Any]:
    return ScenarioRun(scenario, jobs=jobs, quiet=quiet).start()


def run_sweep(base: ScenarioConfig, axis: str, values: Sequence[Any],
              jobs: Optional[int] = None, quiet: bool = False) -> pd.DataFrame:
    """Run ``base`` once per value of ``axis`` and tabulate the steady states.

    Each value gets its own subdirectory ``{axis}_{value}``; the base output
    directory receives ``sweep_{axis}.csv`` (one row per value and seed) and
    ``sweep_{axis}_means.csv`` (seed averages per value).

    Raises:
        ConfigError: If ``axis`` is not sweepable or ``values`` is empty
    """
    if axis not in config.sweepable_axes:
        raise ConfigError(f"`{axis}` is not sweepable; choose one of {', '.join(config.sweepable_axes)}", key=axis)
    if not values:
        raise ConfigError("a sweep needs at least one value", key="values")

    out = Path(base.output_dir)
    records = []
    for value in values:
        scenario = base.with_overrides({axis: value, "output_dir": str(out / f"{axis}_{value}")})
        summary = ScenarioRun(scenario, jobs=jobs, quiet=quiet).start()
        for seed in scenario.seeds:
            seed_summary = summary["seeds"][str(seed)]
            records.append({
                axis: value,
                "seed": seed,
                **{k: v for k, v in seed_summary["steady_state"].items() if v is not None},
                "mean_lifetime": seed_summary["mean_lifetime"],
            })

    table = pd.DataFrame(records)
    save_to_csv(table, out / f"sweep_{axis}.csv")
    means = table.drop(columns="seed").groupby(axis, sort=False).mean(numeric_only=True).reset_index()
    save_to_csv(means, out / f"sweep_{axis}_means.csv")
    return means
