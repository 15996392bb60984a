"""Scenario configuration and its versioned JSON file format.

A scenario file looks like::

    {
      "format": "ckmloc-scenario",
      "version": 1,
      "bs": [0.0, 0.0],
      "scatterer_region": [[10, 50], [-40, 40]],
      "ue_region": [[50, 80], [-40, 40]],
      "n_prior_scatterers": 15,
      "n_add": 0,
      "rf": {"carrier_hz": 6e9, "bandwidth_hz": 1e8, "n_subcarriers": 1024,
             "n_antennas": 32, "antenna_spacing": 0.5, "snr_db": 30.0},
      "dict": {"n_theta": 256, "n_tau": 1024, "n_tau_window": 128},
      ...
    }

Every key except ``format`` and ``version`` is optional; missing keys take
the defaults of :class:`ScenarioConfig`.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .channel import OracleNoise, RfConfig
from .geometry import SPEED_OF_LIGHT
from .spectrum import DictConfig

SCENARIO_FORMAT = "ckmloc-scenario"
SCENARIO_VERSION = 1

Region = Tuple[Tuple[float, float], Tuple[float, float]]


class ConfigError(ValueError):
    pass


def _corners(region: "Region") -> List[np.ndarray]:
    (x0, x1), (y0, y1) = region
    return [np.array((x, y)) for x in (x0, x1) for y in (y0, y1)]


@dataclass(frozen=True)
class ScenarioConfig:
    bs: Tuple[float, float] = (0.0, 0.0)
    scatterer_region: Region = ((10.0, 50.0), (-40.0, 40.0))
    ue_region: Region = ((50.0, 80.0), (-40.0, 40.0))
    n_prior_scatterers: int = 15
    n_add: int = 0
    prior_scatterers: Optional[Tuple[Tuple[float, float], ...]] = None
    rf: RfConfig = field(default_factory=RfConfig)
    n_theta: int = 256
    n_tau: int = 1024
    n_tau_window: Optional[int] = 128
    lambda_prior: float = 2.0
    k_cand: int = 10
    weight_threshold: float = 0.5
    grid_spacing: float = 1.0
    n_trials: int = 500
    ckm_mode: str = "estimated"
    offline_snr_db: Optional[float] = None
    max_paths: int = 20
    peak_threshold_rel: float = 0.05
    oracle: bool = False
    oracle_sigma_aoa: float = 0.0
    oracle_sigma_toa: float = 0.0
    fingerprint_slots: int = 20
    sweep_n_add: Optional[Tuple[int, ...]] = None
    sweep_n_antennas: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        for name in ("scatterer_region", "ue_region"):
            (x0, x1), (y0, y1) = getattr(self, name)
            if not (x0 <= x1 and y0 <= y1):
                raise ConfigError(f"{name} is not well formed: {getattr(self, name)}")
        if self.n_prior_scatterers < 0 or self.n_add < 0:
            raise ConfigError("scatterer counts must be nonnegative")
        if self.grid_spacing <= 0:
            raise ConfigError("grid spacing must be positive")
        if self.ckm_mode not in ("estimated", "true-geometry"):
            raise ConfigError(f"unknown CKM mode {self.ckm_mode!r}")
        if self.lambda_prior <= 0:
            raise ConfigError("lambda_prior must be positive")
        if self.k_cand < 1 or self.n_trials < 1:
            raise ConfigError("k_cand and n_trials must be >= 1")
        if self.n_tau_window is not None:
            reach = SPEED_OF_LIGHT * self.n_tau_window / (self.n_tau * self.rf.subcarrier_spacing_hz)
            if reach < self.longest_path():
                raise ConfigError(
                    f"delay window of {self.n_tau_window} bins covers {reach:.0f} m of path length, "
                    f"but paths in this scenario reach {self.longest_path():.0f} m"
                )

    def longest_path(self) -> float:
        """Longest single-bounce path between the two regions, in meters."""
        # the path length is convex in (s, ue), so the maximum sits on corners
        bs = np.asarray(self.bs, dtype=float)
        return max(
            float(np.linalg.norm(s - bs) + np.linalg.norm(u - s))
            for s in _corners(self.scatterer_region)
            for u in _corners(self.ue_region)
        )

    @property
    def dict_cfg(self) -> DictConfig:
        return DictConfig.from_rf(self.rf, n_theta=self.n_theta, n_tau=self.n_tau, n_tau_window=self.n_tau_window)

    @property
    def offline_rf(self) -> RfConfig:
        if self.offline_snr_db is None:
            return self.rf
        return dataclasses.replace(self.rf, snr_db=self.offline_snr_db)

    @property
    def oracle_noise(self) -> Optional[OracleNoise]:
        if not self.oracle:
            return None
        return OracleNoise(self.oracle_sigma_aoa, self.oracle_sigma_toa)

    def replace(self, **changes) -> "ScenarioConfig":
        if "n_antennas" in changes:
            changes["rf"] = dataclasses.replace(changes.get("rf", self.rf), n_antennas=changes.pop("n_antennas"))
        return dataclasses.replace(self, **changes)

    def grid_axes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates covering the UE region."""
        (x0, x1), (y0, y1) = self.ue_region
        nx = int(np.floor((x1 - x0) / self.grid_spacing + 1e-9)) + 1
        ny = int(np.floor((y1 - y0) / self.grid_spacing + 1e-9)) + 1
        return x0 + self.grid_spacing * np.arange(nx), y0 + self.grid_spacing * np.arange(ny)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"format": SCENARIO_FORMAT, "version": SCENARIO_VERSION}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "rf":
                value = dataclasses.asdict(value)
            out[f.name] = _jsonable(value)
        return out


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


def scenario_from_dict(data: Dict[str, Any], source: str = "<dict>") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    if data.get("format", SCENARIO_FORMAT) != SCENARIO_FORMAT:
        raise ConfigError(f"{source}: not a scenario file (format={data.get('format')!r})")
    version = data.get("version")
    if version != SCENARIO_VERSION:
        raise ConfigError(f"{source}: unsupported scenario version {version!r} (expected {SCENARIO_VERSION})")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    for key, value in data.items():
        if key in ("format", "version"):
            continue
        if key == "dict":
            for sub, v in value.items():
                if sub not in ("n_theta", "n_tau", "n_tau_window"):
                    raise ConfigError(f"{source}: unknown key dict.{sub}")
                kwargs[sub] = v
            continue
        if key == "rf":
            try:
                kwargs["rf"] = RfConfig(**value)
            except TypeError as exc:
                raise ConfigError(f"{source}: bad rf section: {exc}") from None
            continue
        if key not in known:
            raise ConfigError(f"{source}: unknown key {key!r}")
        kwargs[key] = _tupleize(value)
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data, str(path))


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def draw_points(region: Region, n: int, rng: np.random.Generator) -> np.ndarray:
    (x0, x1), (y0, y1) = region
    return np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)]) if n else np.zeros((0, 2))


def resolve_prior_scatterers(cfg: ScenarioConfig, seed) -> np.ndarray:
    """Explicit scatterers from the config, else a draw seeded by ``seed``."""
    if cfg.prior_scatterers is not None:
        return np.asarray(cfg.prior_scatterers, dtype=float).reshape(-1, 2)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    return draw_points(cfg.scatterer_region, cfg.n_prior_scatterers, rng)


def scatterer_list(points: np.ndarray) -> List[Tuple[float, float]]:
    return [tuple(map(float, p)) for p in np.asarray(points).reshape(-1, 2)]
