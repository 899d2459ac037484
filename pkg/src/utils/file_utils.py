import json
import math
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd

# 17 significant digits round-trip every float64 exactly
FLOAT_FORMAT = "%.17g"


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays to plain Python and non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def save_to_json(data: List[Any] | Dict[str, Any], file_path: Path, indent: int = 2) -> bool:
    """Save data to a JSON file with sorted keys, so equal data gives equal bytes.

    Args:
        data (List[Any] | Dict[str, Any]): Data to save
        file_path (Path): Path where to save the JSON file
        indent (int, optional): Number of spaces for JSON indentation. Defaults to 2.

    Returns:
        bool: True if save was successful, False otherwise
    """
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_jsonable(data), f, indent=indent, ensure_ascii=False, sort_keys=True, allow_nan=False)
            f.write("\n")
        return True
    except (OSError, TypeError, ValueError) as e:
        print(f"[ERROR][file_utils.save_to_json] Failed to save data to {file_path}: {str(e)}")
        return False


def save_to_csv(df: pd.DataFrame, file_path: Path) -> bool:
    """Write ``df`` without index; floats keep 17 significant digits.

    Returns:
        bool: True if save was successful, False otherwise
    """
    try:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(file_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return True
    except OSError as e:
        print(f"[ERROR][file_utils.save_to_csv] Failed to save data to {file_path}: {str(e)}")
        return False


def load_csv(file_path: Path) -> pd.DataFrame:
    """Read a CSV written by ``save_to_csv`` back with exact floats."""
    return pd.read_csv(file_path, float_precision="round_trip")
