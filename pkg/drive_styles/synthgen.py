"""
Labeled synthetic telemetry.

A driver's true style mixture chooses style episodes of geometric length (in
fragments); inside an episode every channel follows that style's envelope
as mean-reverting noise, and acceleration carries Poisson bursts. Levels
derived from the true mixtures serve as subjective labels.
"""

import json
import logging
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import signal

from .errors import SchemaError, ValidationError
from .styleanalysis import (
    LevelThresholds,
    StyleOrdering,
    SubjectiveLabel,
    aggressive_score,
    score_to_level,
    thresholds_for,
    write_labels,
)
from .telemetry import DEFAULT_CHANNELS, SCENARIO_TAGS, TelemetrySeries, export_csv

logger = logging.getLogger(__name__)

PROFILE_VERSION = 1
DEFAULT_SAMPLE_RATE_HZ = 10.0
DEFAULT_FRAGMENT_S = 10.0

GENDERS = ("female", "male")
AGE_BANDS = ("18-25", "26-35", "36-50", "51+")
EXPERIENCE_BANDS = ("<2y", "2-5y", "5-10y", "10y+")

# fields that must grow from the calmest to the most aggressive style
DOMINANCE_FIELDS = ("speed_mean", "speed_sd", "accel_sd", "burst_rate_hz", "burst_magnitude", "yaw_sd", "lateral_noise_sd")


@dataclass(frozen=True)
class RegimeProfile:
    """Kinematic envelope of one style (km/h, m/s^2, deg/s, seconds)."""

    name: str
    speed_mean: float
    speed_sd: float
    accel_sd: float
    burst_rate_hz: float
    burst_magnitude: float
    yaw_sd: float
    speed_tau_s: float = 10.0
    accel_tau_s: float = 2.0
    burst_duration_s: float = 2.0
    yaw_tau_s: float = 3.0
    lateral_noise_sd: float = 0.1

    def __post_init__(self):
        for name in ("speed_sd", "accel_sd", "yaw_sd", "lateral_noise_sd", "speed_tau_s", "accel_tau_s", "yaw_tau_s", "burst_duration_s"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} of profile {self.name!r} must be positive")
        if self.burst_rate_hz < 0 or self.burst_magnitude < 0:
            raise ValidationError(f"Burst rate and magnitude of profile {self.name!r} must be non-negative")


@dataclass(frozen=True)
class ProfileSet:
    """Profiles ordered calmest first, with the mean episode length in fragments."""

    scenario: str
    profiles: Tuple[RegimeProfile, ...]
    dwell_fragments: float = 3.0
    version: int = PROFILE_VERSION

    def __post_init__(self):
        if not self.profiles:
            raise ValidationError("A profile set needs at least one style")
        if self.dwell_fragments < 1:
            raise ValidationError(f"dwell_fragments must be at least 1, got {self.dwell_fragments}")
        for name in DOMINANCE_FIELDS:
            values = [getattr(p, name) for p in self.profiles]
            if any(b < a for a, b in zip(values, values[1:])):
                raise ValidationError(f"Profile {name} must not decrease from calm to aggressive: {values}")

    @property
    def K(self) -> int:
        return len(self.profiles)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.profiles]


def _profile_from_dict(data: Mapping[str, Any]) -> RegimeProfile:
    known = {f.name for f in fields(RegimeProfile)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise SchemaError(f"Unknown profile keys {unknown}")
    return RegimeProfile(**data)


def load_profiles(path: Optional[Union[str, Path]] = None, scenario: str = "urban") -> ProfileSet:
    """Packaged profiles of a scenario, or a custom JSON file in the same layout."""
    if path is None:
        if scenario not in SCENARIO_TAGS or scenario == "other":
            raise ValidationError(f"No packaged profiles for scenario {scenario!r}. Available: urban, highway")
        text = resources.files("drive_styles").joinpath("profiles", f"{scenario}.json").read_text(encoding="utf-8")
    else:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"Profile file does not exist: {path}")
        text = path.read_text(encoding="utf-8")

    data = json.loads(text)
    if data.get("version") != PROFILE_VERSION:
        raise SchemaError(f"Profile version {data.get('version')} is not supported (expected {PROFILE_VERSION})")
    return ProfileSet(
        scenario=data.get("scenario", scenario),
        profiles=tuple(_profile_from_dict(p) for p in data["styles"]),
        dwell_fragments=float(data.get("dwell_fragments", 3.0)),
        version=PROFILE_VERSION,
    )


def _unit_ou(rng: np.random.Generator, n: int, tau_s: np.ndarray, dt: float) -> np.ndarray:
    """Stationary unit-variance AR(1) noise; tau may vary per sample."""
    phi = np.exp(-dt / np.broadcast_to(tau_s, (n,)))
    if np.all(phi == phi[0]):
        b, a = [np.sqrt(1 - phi[0] ** 2)], [1.0, -phi[0]]
        out, _ = signal.lfilter(b, a, rng.standard_normal(n), zi=[phi[0] * rng.standard_normal()])
        return out
    out = np.empty(n)
    shocks = rng.standard_normal(n)
    out[0] = shocks[0]
    for i in range(1, n):
        out[i] = phi[i] * out[i - 1] + np.sqrt(1 - phi[i] ** 2) * shocks[i]
    return out


def _smooth(values: np.ndarray, tau_s: float, dt: float) -> np.ndarray:
    phi = np.exp(-dt / tau_s)
    out, _ = signal.lfilter([1 - phi], [1.0, -phi], values, zi=[phi * values[0]])
    return out


def _bursts(rng: np.random.Generator, rate: np.ndarray, magnitude: np.ndarray, duration_s: float, dt: float) -> np.ndarray:
    """Half-sine acceleration pulses of random sign started by a Poisson process."""
    starts = rng.random(rate.size) < rate * dt
    impulses = np.where(starts, magnitude * rng.choice((-1.0, 1.0), size=rate.size), 0.0)
    width = max(int(round(duration_s / dt)), 1)
    pulse = np.sin(np.pi * (np.arange(width) + 0.5) / width)
    return signal.lfilter(pulse, [1.0], impulses)


def sample_episodes(theta: np.ndarray, n_fragments: int, dwell_fragments: float, rng: np.random.Generator) -> np.ndarray:
    """Style of every fragment; episodes have geometric lengths with mean dwell_fragments."""
    labels = np.empty(n_fragments, dtype=np.int64)
    position = 0
    while position < n_fragments:
        style = rng.choice(theta.size, p=theta)
        length = rng.geometric(1.0 / dwell_fragments)
        labels[position : position + length] = style
        position += length
    return labels


def _check_mixture(theta: Sequence[float], K: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.size != K or np.any(theta < 0) or abs(theta.sum() - 1.0) > 1e-6:
        raise ValidationError(f"Mixture {theta} is not a point of the {K}-style simplex")
    return theta / theta.sum()


def simulate_driver(
    theta_true: Sequence[float],
    profiles: ProfileSet,
    duration_s: float,
    seed: int,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    fragment_s: float = DEFAULT_FRAGMENT_S,
    driver_id: str = "driver",
) -> Tuple[TelemetrySeries, np.ndarray]:
    """
    Telemetry of one driver and the true style of each fragment.

    The series holds a whole number of fragments; deterministic under seed.
    """
    theta = _check_mixture(theta_true, profiles.K)
    per_fragment = int(round(fragment_s * sample_rate_hz))
    n_fragments = int(duration_s * sample_rate_hz) // per_fragment
    if per_fragment < 2 or n_fragments < 1:
        raise ValidationError(
            f"duration_s={duration_s} at {sample_rate_hz} Hz does not cover one fragment of {fragment_s} s"
        )

    rng = np.random.default_rng(seed)
    dt = 1.0 / sample_rate_hz
    labels = sample_episodes(theta, n_fragments, profiles.dwell_fragments, rng)
    style = np.repeat(labels, per_fragment)
    n = style.size

    def envelope(name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in profiles.profiles])[style]

    speed_tau = float(np.mean([p.speed_tau_s for p in profiles.profiles]))
    speed = _smooth(envelope("speed_mean"), speed_tau, dt) + envelope("speed_sd") * _unit_ou(
        rng, n, envelope("speed_tau_s"), dt
    )
    speed = np.clip(speed, 0.0, None)

    burst_duration = float(np.mean([p.burst_duration_s for p in profiles.profiles]))
    a_x = envelope("accel_sd") * _unit_ou(rng, n, envelope("accel_tau_s"), dt)
    a_x += _bursts(rng, envelope("burst_rate_hz"), envelope("burst_magnitude"), burst_duration, dt)

    yaw_rate = envelope("yaw_sd") * _unit_ou(rng, n, envelope("yaw_tau_s"), dt)
    a_y = speed / 3.6 * np.deg2rad(yaw_rate) + envelope("lateral_noise_sd") * _unit_ou(rng, n, np.full(n, 1.0), dt)

    series = TelemetrySeries(
        driver_id=driver_id,
        sample_rate_hz=sample_rate_hz,
        channels={"v": speed, "a_x": a_x, "a_y": a_y, "yaw_rate": yaw_rate},
        scenario_tag=profiles.scenario if profiles.scenario in SCENARIO_TAGS else "other",
    )
    return series, labels


def dirichlet_sampler(alpha: Sequence[float]) -> Callable[[np.random.Generator], np.ndarray]:
    alpha = np.asarray(alpha, dtype=float)
    return lambda rng: rng.dirichlet(alpha)


@dataclass(eq=False)
class SimulatedCohort:
    series: List[TelemetrySeries]
    fragment_labels: Dict[str, np.ndarray]
    theta_true: np.ndarray
    scores: Dict[str, float]
    labels: List[SubjectiveLabel]
    attributes: pd.DataFrame
    profiles: ProfileSet
    thresholds: Optional[LevelThresholds] = None
    seed: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def driver_ids(self) -> List[str]:
        return [s.driver_id for s in self.series]

    def theta_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.theta_true, columns=[f"style_{k + 1}" for k in range(self.profiles.K)])
        frame.insert(0, "driver_id", self.driver_ids)
        return frame

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """telemetry.csv, labels.csv, attributes.csv and theta_true.csv under out_dir."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "telemetry": export_csv(self.series, out_dir / "telemetry.csv", DEFAULT_CHANNELS),
            "labels": write_labels(self.labels, out_dir / "labels.csv"),
            "attributes": out_dir / "attributes.csv",
            "theta_true": out_dir / "theta_true.csv",
        }
        self.attributes.to_csv(paths["attributes"], index=False, encoding="utf-8")
        self.theta_frame().to_csv(paths["theta_true"], index=False, encoding="utf-8")
        return paths


def simulate_cohort(
    D: int,
    mixture_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None,
    profiles: Optional[ProfileSet] = None,
    duration_s: float = 1800.0,
    seed: int = 0,
    thresholds: Optional[LevelThresholds] = None,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    fragment_s: float = DEFAULT_FRAGMENT_S,
    label_source: str = "expert",
) -> SimulatedCohort:
    """
    D simulated drivers with true mixtures, levels and attributes.

    Levels come from the aggressiveness score of the true mixture (profiles
    are already ordered calmest first) mapped through the scenario thresholds.
    """
    if D < 0:
        raise ValidationError(f"D must be non-negative, got {D}")
    profiles = profiles or load_profiles(scenario="urban")
    mixture_sampler = mixture_sampler or dirichlet_sampler(np.ones(profiles.K))
    if thresholds is None and profiles.scenario in ("urban", "highway"):
        thresholds = thresholds_for(profiles.scenario)
    if thresholds is not None and thresholds.upper != profiles.K:
        raise ValidationError(f"Thresholds cover [1, {thresholds.upper}] but profiles define {profiles.K} styles")

    root = np.random.SeedSequence(seed)
    cohort_rng = np.random.default_rng(root.spawn(1)[0])
    driver_seeds = [int(s.generate_state(1)[0]) for s in root.spawn(D)] if D else []
    ordering = StyleOrdering.identity(profiles.K)

    series, fragment_labels, thetas, scores, labels, rows = [], {}, [], {}, [], []
    for d in range(D):
        driver_id = f"driver_{d + 1:03d}"
        theta = _check_mixture(mixture_sampler(cohort_rng), profiles.K)
        s, frag = simulate_driver(theta, profiles, duration_s, driver_seeds[d], sample_rate_hz, fragment_s, driver_id)
        series.append(s)
        fragment_labels[driver_id] = frag
        thetas.append(theta)
        scores[driver_id] = aggressive_score(theta, ordering)
        if thresholds is not None:
            labels.append(SubjectiveLabel(driver_id, score_to_level(scores[driver_id], thresholds), label_source))
        rows.append(
            (driver_id, cohort_rng.choice(GENDERS), cohort_rng.choice(AGE_BANDS), cohort_rng.choice(EXPERIENCE_BANDS))
        )

    logger.info("Simulated %d drivers of %s telemetry, %.0f s each", D, profiles.scenario, duration_s)
    return SimulatedCohort(
        series=series,
        fragment_labels=fragment_labels,
        theta_true=np.vstack(thetas) if thetas else np.zeros((0, profiles.K)),
        scores=scores,
        labels=labels,
        attributes=pd.DataFrame(rows, columns=["driver_id", "gender", "age_band", "experience_band"]),
        profiles=profiles,
        thresholds=thresholds,
        seed=seed,
        meta={"duration_s": duration_s, "sample_rate_hz": sample_rate_hz, "fragment_s": fragment_s},
    )
