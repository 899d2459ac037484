import json
import os
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()


def dict_to_namespace(d: Dict[str, Any]) -> SimpleNamespace:
    """Convert a dictionary to a SimpleNamespace recursively
        E.g. config.audit.rel_tol instead of config["audit"]["rel_tol"]"""
    for key, value in d.items():
        if isinstance(value, dict):
            d[key] = dict_to_namespace(value)
    return SimpleNamespace(**d)


def load_json_file(file_path: Path) -> Dict:
    """Load one of the bundled JSON files (settings, presets, schema)."""
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Configuration file not found at {file_path}")
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {file_path} at line {e.lineno}: {e.msg}")


def env_int(name: str, default: int) -> int:
    """Positive integer from the environment; unset, empty or 0 gives ``default``."""
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}")
    return value if value > 0 else default


# Config directory path
CONFIG_DIR = Path(__file__).parent.parent.parent / 'config'

# Load main configuration
config = dict_to_namespace(load_json_file(CONFIG_DIR / 'config.json'))

# Defaults, presets and the document schema stay plain dictionaries
config.defaults = load_json_file(CONFIG_DIR / 'config.json')["defaults"]
config.presets = load_json_file(CONFIG_DIR / 'presets.json')
config.scenario_schema = load_json_file(CONFIG_DIR / 'scenario_schema.json')

# Optional environment overrides
config.paths.output_dir = os.getenv("SFC_ABM_OUTPUT_DIR", config.paths.output_dir)
config.jobs = env_int("SFC_ABM_JOBS", os.cpu_count() or 1)
