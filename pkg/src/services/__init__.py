"""
Services Module of the simulator

Stateless providers the iteration protocol and the scenario runner call into.

Services Overview:
- Markets: stochastic rounding and hypergeometric allocation for the job and goods markets
- Cross sections: per-iteration rows and per-firm snapshots with their CSV schemas
- Stats: effective margin, survivor growth, power-law and tent fits, histograms

Usage:
    from src.services import allocate_without_replacement, AllocationRequest, fit_powerlaw_ccdf

    hires = allocate_without_replacement(AllocationRequest([100, 100], 100), rng)
    fit = fit_powerlaw_ccdf(sizes, x_min=20)
"""

# Import classes and functions individually to avoid circular imports
from .markets import (
    AllocationError, AllocationRequest, allocate_without_replacement,
    stochastic_round, stochastic_round_array, draw_uniform, draw_uniform_int,
)
from .cross_section import TimeSeriesRow, FirmCrossSection, TIMESERIES_COLUMNS, CROSS_SECTION_COLUMNS
from .stats import (
    FitError, DistributionFit, TentFit, mu_eff, growth_rates, fit_powerlaw_ccdf, fit_tent,
    moving_average, size_margin_scatter, histogram_log_binned, margin_histogram,
)

# Define what should be imported with 'from src.services import *'
__all__ = [
    # Markets - random allocation primitives
    'AllocationError',
    'AllocationRequest',
    'allocate_without_replacement',
    'stochastic_round',
    'stochastic_round_array',
    'draw_uniform',
    'draw_uniform_int',

    # Cross sections - exported records
    'TimeSeriesRow',
    'FirmCrossSection',
    'TIMESERIES_COLUMNS',
    'CROSS_SECTION_COLUMNS',

    # Stats - observables and fits
    'FitError',
    'DistributionFit',
    'TentFit',
    'mu_eff',
    'growth_rates',
    'fit_powerlaw_ccdf',
    'fit_tent',
    'moving_average',
    'size_margin_scatter',
    'histogram_log_binned',
    'margin_histogram',
]
