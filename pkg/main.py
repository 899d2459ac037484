import sys
import re
import argparse
from pathlib import Path
from typing import Any, List, Optional

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_USAGE = 2
EXIT_AUDIT = 3


def parse_seeds(text: str) -> List[int]:
    """Seeds as an inclusive range ``a..b`` or a comma-separated list."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            if lo > hi:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seeds '{text}': use a..b or a,b,c")


def parse_values(text: str) -> List[Any]:
    """Comma-separated sweep values, each read as JSON (so 4 stays an integer)."""
    import json

    values = []
    for part in text.split(","):
        try:
            values.append(json.loads(part))
        except json.JSONDecodeError:
            raise argparse.ArgumentTypeError(f"invalid sweep value '{part}'")
    return values


def build_scenario(args):
    """ScenarioConfig from --preset or --config with --seeds, --out and --override applied."""
    # Import here to avoid loading numpy/pandas for --help
    from src.core.scenario import load_config_file, parse_overrides, preset
    from src.utils.config import config

    overrides = parse_overrides(args.override)
    if args.seeds:
        overrides["seeds"] = args.seeds
    if args.out:
        overrides["output_dir"] = args.out
    if args.preset:
        if not args.out:
            overrides["output_dir"] = str(Path(config.paths.output_dir) / args.preset)
        return preset(args.preset, overrides)
    return load_config_file(Path(args.config), overrides)


def run_command(args) -> int:
    """Run every seed of a scenario and write its artifacts."""
    from src.core.run import run_scenario

    scenario = build_scenario(args)
    run_scenario(scenario, jobs=args.jobs, quiet=args.quiet)
    return EXIT_OK


def sweep_command(args) -> int:
    """Run the scenario once per value of one parameter."""
    from src.core.run import run_sweep
    from src.utils.output_formatter import formatter

    scenario = build_scenario(args)
    means = run_sweep(scenario, args.axis, args.values, jobs=args.jobs, quiet=args.quiet)
    formatter.print_section(f"Sweep over {args.axis} (seed means)")
    for record in means.to_dict(orient="records"):
        formatter.print_item(
            f"{args.axis}={record[args.axis]}: unemployment {record['unemployment_rate_mean']:.2%}, "
            f"debt {record['aggregate_debt_mean']:,.0f}, lifetime {record.get('mean_lifetime', float('nan')):.1f}"
        )
    formatter.print_section_end()
    return EXIT_OK


def analyze_command(args) -> int:
    """Recompute fits from saved cross-section and time-series CSVs."""
    from src.core.scenario import ConfigError
    from src.services.cross_section import FirmCrossSection
    from src.services.stats import (
        FitError, GrowthPairs, fit_tent, growth_rates, moving_average, summarize_cross_section, summarize_growth,
    )
    from src.core.run import steady_state_stats
    from src.utils.file_utils import load_csv, save_to_json
    from src.utils.output_formatter import formatter

    if not args.cross_section and not args.timeseries and not args.growth:
        raise ConfigError("analyze needs --cross-section, --growth and/or --timeseries")
    report = {}

    sections = []
    for path in args.cross_section or []:
        match = re.search(r"_t(\d+)\.csv$", path)
        t = int(match.group(1)) if match else -1
        try:
            sections.append(FirmCrossSection.from_frame(load_csv(Path(path)), t))
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e.strerror}")
        except ValueError as e:
            raise ConfigError(f"{path}: {e}")

    pairs = None
    if args.growth:
        try:
            pairs = GrowthPairs.from_frame(load_csv(Path(args.growth)))
        except OSError as e:
            raise ConfigError(f"cannot read {args.growth}: {e.strerror}")
        except ValueError as e:
            raise ConfigError(f"{args.growth}: {e}")

    formatter.print_section("Analysis")
    for cross in sections:
        summary = summarize_cross_section(cross, args.xmin_quantile)
        report[f"cross_section_t{cross.t}"] = summary
        fit = summary["powerlaw"]
        if "error" in fit:
            formatter.print_item(f"t={cross.t}: {summary['n_firms']} firms, power law: {fit['error']}")
        else:
            p = fit["parameters"]
            formatter.print_item(
                f"t={cross.t}: {summary['n_firms']} firms, CCDF exponent {p['alpha']:.3f} ± {p['std_error']:.3f} "
                f"above x_min={fit['x_min']:g} (n={fit['n_samples']})"
            )

    if len(sections) == 2:
        growth = growth_rates(sections[0], sections[1], args.growth_lag)
        try:
            tent = fit_tent(growth)
            report["snapshot_growth"] = {"n_samples": len(growth), "tent": tent.to_dict()}
            formatter.print_item(
                f"growth: n={len(growth)}, Laplace ll {tent.laplace.log_likelihood:.2f} vs Gaussian "
                f"{tent.gaussian.log_likelihood:.2f}, excess kurtosis {tent.excess_kurtosis:.2f}"
            )
        except FitError as e:
            report["snapshot_growth"] = {"n_samples": len(growth), "error": str(e)}
            formatter.print_item(f"growth: {e}")

    if pairs is not None:
        report["growth"] = summarize_growth(pairs)
        tent = report["growth"]["tent"]
        width = report["growth"]["width_by_size"]
        formatter.print_item(
            f"pooled growth: n={len(pairs)}, tent shaped: {tent.get('is_tent', tent.get('error'))}, "
            f"size-growth correlation {report['growth']['size_growth_correlation']}"
        )
        if "error" not in width:
            formatter.print_item(
                f"growth std: bottom size quartile {width['bottom_quartile_std']:.4f}, "
                f"top size quartile {width['top_quartile_std']:.4f}"
            )

    if args.timeseries:
        try:
            frame = load_csv(Path(args.timeseries))
        except OSError as e:
            raise ConfigError(f"cannot read {args.timeseries}: {e.strerror}")
        report["steady_state"] = steady_state_stats(frame, args.burn_in)
        smoothed = moving_average(frame["unemployment_rate"].tolist(), args.window)
        report["unemployment_moving_average_last"] = smoothed[-1]
        ss = report["steady_state"]
        formatter.print_item(
            f"t >= {args.burn_in}: unemployment {ss['unemployment_rate_mean']:.2%}, "
            f"firms {ss['n_active_firms_mean']:.1f}, debt {ss['aggregate_debt_mean']:,.0f}"
        )
    formatter.print_section_end()

    if args.out:
        save_to_json(report, Path(args.out))
    return EXIT_OK


def presets_command(args) -> int:
    """List the named presets with the figure they reproduce."""
    from src.core.scenario import list_presets

    for name, description in list_presets():
        print(f"{name:<22} {description}")
    return EXIT_OK


def _add_scenario_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--preset', type=str, help='Named preset (see the presets command)')
    source.add_argument('--config', type=str, help='Path of a JSON config document')
    parser.add_argument('--seeds', type=parse_seeds, default=None,
                        help='Seeds to run: a..b (inclusive) or a,b,c; sets the config key seeds')
    parser.add_argument('--out', type=str, default=None,
                        help='Output directory; sets the config key output_dir')
    parser.add_argument('--override', action='append', default=[], metavar='KEY=VALUE',
                        help='Set any config key, e.g. --override interest_rate=0.02 (repeatable)')
    parser.add_argument('--jobs', type=int, default=None,
                        help='Worker processes for independent seeds (default: available CPUs or SFC_ABM_JOBS)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Stock-flow consistent agent-based economy: simulate, sweep and analyze'
    )
    parser.add_argument('--quiet', action='store_true', help='Only print errors')
    verbs = parser.add_subparsers(dest='verb', required=True)

    run = verbs.add_parser('run', help='Run a scenario over its seeds')
    _add_scenario_arguments(run)
    run.set_defaults(handler=run_command)

    sweep = verbs.add_parser('sweep', help='Run a scenario for several values of one parameter')
    _add_scenario_arguments(sweep)
    sweep.add_argument('--axis', type=str, required=True,
                       help='Parameter to vary: interest_rate, gamma, nu, mu_min or mu_max')
    sweep.add_argument('--values', type=parse_values, required=True, help='Comma-separated values, e.g. 1,2,3')
    sweep.set_defaults(handler=sweep_command)

    analyze = verbs.add_parser('analyze', help='Recompute fits from saved CSV artifacts')
    analyze.add_argument('--cross-section', action='append', default=[], metavar='FILE',
                         help='Cross-section CSV; give two to fit survivor growth rates between them')
    analyze.add_argument('--growth-lag', type=int, default=1,
                         help='Iterations between the two cross-sections (config key growth_lag)')
    analyze.add_argument('--growth', type=str, default=None, metavar='FILE',
                         help='Pooled survivor growth CSV (growth_seed{s}.csv) to fit as the run summary does')
    analyze.add_argument('--xmin-quantile', type=float, default=None,
                         help='Size quantile used as power-law cutoff (config key powerlaw_xmin_quantile)')
    analyze.add_argument('--timeseries', type=str, default=None, help='Time-series CSV to summarize')
    analyze.add_argument('--burn-in', type=int, default=500,
                         help='Iterations skipped for steady-state means (config key burn_in)')
    analyze.add_argument('--window', type=int, default=50, help='Moving-average window for unemployment')
    analyze.add_argument('--out', type=str, default=None, help='Write the analysis as JSON to this file')
    analyze.set_defaults(handler=analyze_command)

    presets = verbs.add_parser('presets', help='List named presets')
    presets.set_defaults(handler=presets_command)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    from src.core.ledger import AuditError
    from src.core.params import ParameterError
    from src.core.scenario import ConfigError
    from src.services.stats import FitError
    from src.utils.output_formatter import formatter

    formatter.quiet = args.quiet
    try:
        return args.handler(args)
    except AuditError as e:
        formatter.print_error(f"[ERROR][main] {e}", level=0)
        return EXIT_AUDIT
    except (ConfigError, ParameterError, FitError) as e:
        formatter.print_error(f"[ERROR][main] {e}", level=0)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
