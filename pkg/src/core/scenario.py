import difflib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from jsonschema import Draft202012Validator

from src.core.params import ParameterError, SimParams
from src.utils.config import config


# Keys of the flat config document that belong to SimParams
PARAM_KEYS = tuple(f.name for f in fields(SimParams) if f.name != "seed")
SCENARIO_KEYS = (
    "burn_in", "snapshot_times", "seeds", "output_dir", "growth_lag", "powerlaw_xmin_quantile", "track_firms",
)


class ConfigError(ValueError):
    """Raised for an unreadable or invalid scenario config.

    Attributes:
        key (Optional[str]): Offending key, when one can be named
        line (Optional[int]): Line of a JSON parse error
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self.args[0], self.key, self.line))


@dataclass
class FirmTracking:
    """Firms whose per-iteration trajectory is exported.

    A firm is tracked when its id is listed in ``ids`` or its birth iteration
    in ``born_at``. Initial firms are born at 0 and an entrant created during
    iteration t is born at t+1.
    """
    ids: List[int] = field(default_factory=list)
    born_at: List[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.ids = sorted({int(i) for i in self.ids})
        self.born_at = sorted({int(t) for t in self.born_at})
        self._ids = frozenset(self.ids)
        self._born_at = frozenset(self.born_at)

    @property
    def enabled(self) -> bool:
        return bool(self.ids or self.born_at)

    def matches(self, firm_id: int, birth_t: int) -> bool:
        return firm_id in self._ids or birth_t in self._born_at

    def to_dict(self) -> Dict[str, List[int]]:
        return {"ids": list(self.ids), "born_at": list(self.born_at)}


@dataclass
class ScenarioConfig:
    """A simulation setup plus everything needed to run and summarize it.

    Args:
        params (SimParams): Simulation parameters; ``params.seed`` is the first seed (required)

    Attributes:
        Optional fields with defaults:
            burn_in (int): Iterations excluded from steady-state statistics (default: 500)
            snapshot_times (List[int]): Iterations at which cross-sections are kept
            seeds (List[int]): One independent run per seed (default: [1])
            output_dir (str): Directory receiving the run artifacts
            growth_lag (int): Lag k of survivor growth rates (default: 1)
            powerlaw_xmin_quantile (float): Size quantile used as power-law cutoff (default: 0.9)
            track_firms (FirmTracking): Firms whose trajectories are exported (default: none)
            name (Optional[str]): Preset name, if built from a preset
    """
    # Required input fields
    params: SimParams

    # Optional fields with defaults
    burn_in: int = 500
    snapshot_times: List[int] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: [1])
    output_dir: str = field(default_factory=lambda: config.paths.output_dir)
    growth_lag: int = 1
    powerlaw_xmin_quantile: float = 0.9
    track_firms: FirmTracking = field(default_factory=FirmTracking)
    name: Optional[str] = None

    def __post_init__(self) -> None:
        iterations = self.params.iterations
        if not self.seeds:
            raise ParameterError("seeds", "at least one seed is needed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("seeds", "seeds must be distinct")
        if not 0 <= self.burn_in < iterations:
            raise ParameterError("burn_in", f"must lie in [0, iterations={iterations})")
        if self.growth_lag < 1:
            raise ParameterError("growth_lag", "must be at least 1")
        if not 0 < self.powerlaw_xmin_quantile < 1:
            raise ParameterError("powerlaw_xmin_quantile", "must lie in (0, 1)")
        late = [t for t in self.snapshot_times if not 0 <= t < iterations]
        if late:
            raise ParameterError("snapshot_times", f"{late} outside [0, iterations={iterations})")
        unborn = [t for t in self.track_firms.born_at if t > iterations]
        if unborn:
            raise ParameterError("track_firms", f"born_at {unborn} after the last iteration ({iterations})")
        self.snapshot_times = sorted(set(self.snapshot_times))

    @property
    def steady_window(self) -> Tuple[int, int]:
        """Iterations [burn_in, iterations) used for steady-state statistics."""
        return self.burn_in, self.params.iterations

    def params_for(self, seed: int) -> SimParams:
        return self.params.with_seed(seed)

    def to_document(self) -> Dict[str, Any]:
        """Flat config document equivalent to this scenario (keys as in the config file)."""
        doc = self.params.to_dict()
        doc.pop("seed")
        doc.update({
            "burn_in": self.burn_in,
            "snapshot_times": list(self.snapshot_times),
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "growth_lag": self.growth_lag,
            "powerlaw_xmin_quantile": self.powerlaw_xmin_quantile,
            "track_firms": self.track_firms.to_dict(),
        })
        return doc

    def with_overrides(self, overrides: Dict[str, Any]) -> "ScenarioConfig":
        return config_from_dict({**self.to_document(), **overrides}, name=self.name)


def _known_keys() -> List[str]:
    return list(config.scenario_schema["properties"].keys())


def _unknown_key_error(key: str) -> ConfigError:
    close = difflib.get_close_matches(key, _known_keys(), n=1, cutoff=0.5)
    hint = f"; did you mean `{close[0]}`?" if close else ""
    return ConfigError(f"unknown key `{key}`{hint}", key=key)


def config_from_dict(document: Dict[str, Any], name: Optional[str] = None) -> ScenarioConfig:
    """Validate a flat config document and fill in the documented defaults.

    Args:
        document (Dict[str, Any]): Keys exactly as named in SimParams/ScenarioConfig
        name (Optional[str]): Preset name to carry along

    Returns:
        ScenarioConfig: The complete scenario

    Raises:
        ConfigError: Unknown key, missing required key or schema violation
        ParameterError: A cross-field invariant fails (mu_min > mu_max, ...)
    """
    for key in document:
        if key not in config.scenario_schema["properties"]:
            raise _unknown_key_error(key)
    for key in config.required_keys:
        if key not in document:
            raise ConfigError(f"missing required key `{key}`", key=key)

    errors = sorted(Draft202012Validator(config.scenario_schema).iter_errors(document), key=lambda e: list(e.path))
    if errors:
        error = errors[0]
        key = str(error.path[0]) if error.path else None
        raise ConfigError(f"{key}: {error.message}" if key else error.message, key=key)

    if "seed" in document and "seeds" in document:
        raise ConfigError("give either `seed` or `seeds`, not both", key="seed")
    merged = {**config.defaults, **document}
    if "seed" in merged:
        merged["seeds"] = [merged.pop("seed")]

    seeds = [int(s) for s in merged["seeds"]]
    param_kwargs = {k: merged[k] for k in PARAM_KEYS if k in merged}
    params = SimParams(**param_kwargs, seed=seeds[0] if seeds else 1)
    return ScenarioConfig(
        params=params,
        burn_in=int(merged["burn_in"]),
        snapshot_times=[int(t) for t in merged["snapshot_times"]],
        seeds=seeds,
        output_dir=str(merged.get("output_dir", config.paths.output_dir)),
        growth_lag=int(merged["growth_lag"]),
        powerlaw_xmin_quantile=float(merged["powerlaw_xmin_quantile"]),
        track_firms=FirmTracking(
            ids=merged["track_firms"].get("ids", []),
            born_at=merged["track_firms"].get("born_at", []),
        ),
        name=name,
    )


def _merge(document: Dict[str, Any], overrides: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Overrides win; an overriding seed list replaces a single ``seed`` and vice versa."""
    merged = dict(document)
    overrides = overrides or {}
    if "seeds" in overrides:
        merged.pop("seed", None)
    if "seed" in overrides:
        merged.pop("seeds", None)
    merged.update(overrides)
    return merged


def load_config(text: str, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """Parse a JSON config document, apply ``overrides`` and validate.

    Raises:
        ConfigError: Parse errors carry the line and column
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}", line=e.lineno)
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(_merge(document, overrides))


def load_config_file(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}")
    return load_config(text, overrides)


def preset(name: str, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """Named scenario from ``config/presets.json``, with optional overrides.

    Raises:
        ConfigError: Unknown preset name
    """
    if name not in config.presets:
        close = difflib.get_close_matches(name, list(config.presets), n=1)
        hint = f"; did you mean `{close[0]}`?" if close else ""
        raise ConfigError(f"unknown preset `{name}`{hint}", key="preset")
    return config_from_dict(_merge(config.presets[name]["config"], overrides), name=name)


def list_presets() -> List[Tuple[str, str]]:
    """(name, description) of every preset, in file order."""
    return [(name, entry["description"]) for name, entry in config.presets.items()]


def parse_override(item: str) -> Tuple[str, Any]:
    """Split ``key=value``; the value is read as JSON when it parses, else kept as text."""
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override `{item}` is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def parse_overrides(items: Optional[List[str]]) -> Dict[str, Any]:
    return dict(parse_override(item) for item in (items or []))
