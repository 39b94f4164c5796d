import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union, get_args, get_origin, get_type_hints

from dotenv import dotenv_values

from .errors import ValidationError
from .fragmentation import STATISTICS
from .styleanalysis import THRESHOLD_PRESETS, LABEL_SOURCES, LevelThresholds
from .telemetry import NAN_POLICIES, SCENARIO_TAGS

logger = logging.getLogger(__name__)

CONFIG_FILENAME = ".drive_styles.env"
ENV_PREFIX = "DRIVE_STYLES_"
ORDERING_MODES = ("bins", "statistics")
# excluded from the config hash so a moved dataset hashes the same
PATH_KEYS = ("telemetry_path", "scoring_labels_path", "scoring_attributes_path", "output_dir")


@dataclass
class PipelineConfig:
    """Every tunable of a pipeline run; keys are grouped by stage prefix."""

    # Telemetry
    telemetry_path: Optional[str] = None
    telemetry_sample_rate_hz: float = 100.0
    telemetry_nan_policy: str = "reject"
    telemetry_max_gap_s: float = 0.5
    telemetry_jitter_tolerance: float = 0.01
    scenario_tag: str = "urban"
    output_dir: str = "drive_styles_out"

    # Fragments
    fragment_tau_s: float = 10.0
    fragment_stats: Tuple[str, ...] = ("max", "mean", "std")
    fragment_export: bool = False

    # Factors
    factor_count: Optional[int] = None
    factor_rotate: bool = True

    # Discretizer
    discretizer_bins: int = 5
    discretizer_prefer_gev: bool = True

    # Model
    model_styles: int = 3
    model_alpha: Optional[float] = None
    model_beta: float = 0.1
    model_iterations: int = 2000
    model_burn_in: int = 500
    model_thin: int = 10
    model_seed: int = 0
    model_chains: int = 1
    model_single_sample: bool = False

    # Scoring
    scoring_labels_path: Optional[str] = None
    scoring_attributes_path: Optional[str] = None
    scoring_label_source: Optional[str] = None
    scoring_gamma: Optional[Tuple[float, ...]] = None
    scoring_thresholds: Optional[Tuple[float, ...]] = None
    scoring_fit_thresholds: bool = False
    scoring_grid_step: float = 0.01
    scoring_ordering: str = "bins"
    scoring_significance_resamples: int = 10_000

    # Sweep
    sweep_m_values: Tuple[int, ...] = (2, 3, 4, 5, 6)
    sweep_k_values: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    sweep_seeds: Tuple[int, ...] = (0, 1, 2)
    sweep_iterations: int = 500
    sweep_burn_in: int = 100
    sweep_holdout_fraction: float = 0.0

    # Simulation
    simulation_drivers: int = 100
    simulation_duration_s: float = 1800.0
    simulation_sample_rate_hz: float = 10.0
    simulation_profiles_path: Optional[str] = None
    simulation_mixture_concentration: float = 1.0
    simulation_seed: int = 0

    @staticmethod
    def _field_types() -> Dict[str, Any]:
        return get_type_hints(PipelineConfig)

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def coerce(cls, key: str, raw: Any) -> Any:
        """Convert a raw (usually string) value to the type of ``key``."""
        types = cls._field_types()
        name = key.lower()
        if name not in types:
            raise ValidationError(f"Unknown configuration key {key!r}")
        return _coerce_value(types[name], raw, name)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional["PipelineConfig"] = None) -> "PipelineConfig":
        """Apply KEY=VALUE pairs (any case) on top of ``base`` or the defaults."""
        data = asdict(base) if base is not None else {}
        for key, raw in values.items():
            data[key.lower()] = cls.coerce(key, raw)
        return cls(**data)

    @classmethod
    def from_env(
        cls,
        config_path: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> "PipelineConfig":
        """
        Resolve the configuration.

        Precedence: defaults < config file < DRIVE_STYLES_* environment
        variables < overrides. Without an explicit path the file is looked
        up as .drive_styles.env in the working directory, then in the home
        directory.
        """
        environ = os.environ if environ is None else environ
        path = find_config_file(config_path)
        config = cls()
        if path is not None:
            logger.info("Reading configuration from %s", path)
            file_values = {k: v for k, v in dotenv_values(path).items() if v is not None}
            config = cls.from_mapping(file_values, config)

        env_values = {k[len(ENV_PREFIX) :]: v for k, v in environ.items() if k.startswith(ENV_PREFIX)}
        config = cls.from_mapping(env_values, config)
        if overrides:
            config = cls.from_mapping(overrides, config)
        return config

    def validate(self) -> "PipelineConfig":
        """Range checks for every stage; raises ValidationError on the first problem."""
        checks = [
            (self.model_styles >= 1, f"MODEL_STYLES must be at least 1, got {self.model_styles}"),
            (self.discretizer_bins >= 2, f"DISCRETIZER_BINS must be at least 2, got {self.discretizer_bins}"),
            (
                self.model_iterations > self.model_burn_in >= 0,
                f"Need MODEL_ITERATIONS > MODEL_BURN_IN >= 0, got {self.model_iterations} and {self.model_burn_in}",
            ),
            (self.model_thin >= 1, f"MODEL_THIN must be at least 1, got {self.model_thin}"),
            (self.model_chains >= 1, f"MODEL_CHAINS must be at least 1, got {self.model_chains}"),
            (self.model_beta > 0, f"MODEL_BETA must be positive, got {self.model_beta}"),
            (self.model_alpha is None or self.model_alpha > 0, f"MODEL_ALPHA must be positive, got {self.model_alpha}"),
            (self.fragment_tau_s > 0, f"FRAGMENT_TAU_S must be positive, got {self.fragment_tau_s}"),
            (
                self.telemetry_sample_rate_hz > 0,
                f"TELEMETRY_SAMPLE_RATE_HZ must be positive, got {self.telemetry_sample_rate_hz}",
            ),
            (self.factor_count is None or self.factor_count >= 1, f"FACTOR_COUNT must be at least 1, got {self.factor_count}"),
            (self.scoring_grid_step > 0, f"SCORING_GRID_STEP must be positive, got {self.scoring_grid_step}"),
            (
                self.scenario_tag in SCENARIO_TAGS,
                f"Scenario '{self.scenario_tag}' not available. Available: {', '.join(SCENARIO_TAGS)}",
            ),
            (
                self.telemetry_nan_policy in NAN_POLICIES,
                f"NaN policy '{self.telemetry_nan_policy}' not available. Available: {', '.join(NAN_POLICIES)}",
            ),
            (
                self.scoring_ordering in ORDERING_MODES,
                f"Ordering '{self.scoring_ordering}' not available. Available: {', '.join(ORDERING_MODES)}",
            ),
            (
                self.scoring_label_source is None or self.scoring_label_source in LABEL_SOURCES,
                f"Label source '{self.scoring_label_source}' not available. Available: {', '.join(LABEL_SOURCES)}",
            ),
            (
                all(stat in STATISTICS for stat in self.fragment_stats) and len(self.fragment_stats) > 0,
                f"FRAGMENT_STATS {list(self.fragment_stats)} must name statistics from {', '.join(STATISTICS)}",
            ),
            (
                self.scoring_gamma is None or len(self.scoring_gamma) == self.model_styles,
                f"SCORING_GAMMA needs {self.model_styles} weights, got {self.scoring_gamma}",
            ),
            (
                self.scoring_gamma is None or self.model_styles == 1 or min(self.scoring_gamma) < max(self.scoring_gamma),
                f"SCORING_GAMMA must not be constant, got {self.scoring_gamma}",
            ),
            (0 <= self.sweep_holdout_fraction < 1, "SWEEP_HOLDOUT_FRACTION must lie in [0, 1)"),
            (self.sweep_iterations > self.sweep_burn_in >= 0, "Need SWEEP_ITERATIONS > SWEEP_BURN_IN >= 0"),
            (self.simulation_drivers >= 0, f"SIMULATION_DRIVERS must be non-negative, got {self.simulation_drivers}"),
            (self.simulation_duration_s > 0, "SIMULATION_DURATION_S must be positive"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)
        if self.scoring_thresholds is not None:
            self.level_thresholds()
        return self

    @property
    def styles_alpha(self) -> float:
        return 50.0 / self.model_styles if self.model_alpha is None else self.model_alpha

    def score_range(self) -> Tuple[float, float]:
        """Bounds of s_obj: the smallest and largest style weight."""
        if self.scoring_gamma is None:
            return 1.0, float(self.model_styles)
        return float(min(self.scoring_gamma)), float(max(self.scoring_gamma))

    def level_thresholds(self) -> Optional[LevelThresholds]:
        """Configured cuts on the score range, else the scenario preset when it spans the same range, else None."""
        lower, upper = self.score_range()
        if self.scoring_thresholds is not None:
            return LevelThresholds(self.scenario_tag, tuple(self.scoring_thresholds), lower, upper)
        preset = THRESHOLD_PRESETS.get(self.scenario_tag)
        if preset is not None and (preset.lower, preset.upper) == (lower, upper):
            return preset
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {key: list(value) if isinstance(value, tuple) else value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        unknown = sorted(set(data) - set(cls.keys()))
        if unknown:
            raise ValidationError(f"Unknown configuration keys {unknown}")
        return cls(**{key: _coerce_value(cls._field_types()[key], value, key) for key, value in data.items()})

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every non-path setting."""
        data = {k: v for k, v in self.to_dict().items() if k not in PATH_KEYS}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode("utf-8")).hexdigest()


def find_config_file(config_path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ValidationError(f"Config file does not exist: {config_path}")
        return path
    for candidate in (Path.cwd() / CONFIG_FILENAME, Path.home() / CONFIG_FILENAME):
        if candidate.is_file():
            return candidate
    return None


def _coerce_value(annotation: Any, raw: Any, name: str) -> Any:
    if get_origin(annotation) is Union:
        inner = [a for a in get_args(annotation) if a is not type(None)][0]
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
            return None
        return _coerce_value(inner, raw, name)
    if get_origin(annotation) in (tuple, Tuple):
        item = get_args(annotation)[0]
        parts = [p.strip() for p in raw.split(",") if p.strip()] if isinstance(raw, str) else list(raw)
        return tuple(_coerce_value(item, part, name) for part in parts)
    try:
        if annotation is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return text in ("1", "true", "yes", "on")
        if annotation is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if isinstance(raw, str) else int(raw)
        if annotation is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"Invalid value {raw!r} for {name.upper()}") from None
