"""Core package initialization."""

# Import classes individually to avoid circular imports
from .params import SimParams, ParameterError
from .state import Economy, FirmState, WorkerState, BankState
from .ledger import Ledger, Transfer, TransferKind, AuditReport, AuditError
from .scenario import ScenarioConfig, ConfigError, load_config, preset
from .run import ScenarioRun, run_scenario, run_sweep

# Define what should be imported with 'from src.core import *'
__all__ = [
    'SimParams',
    'ParameterError',
    'Economy',
    'FirmState',
    'WorkerState',
    'BankState',
    'Ledger',
    'Transfer',
    'TransferKind',
    'AuditReport',
    'AuditError',
    'ScenarioConfig',
    'ConfigError',
    'load_config',
    'preset',
    'ScenarioRun',
    'run_scenario',
    'run_sweep',
]
