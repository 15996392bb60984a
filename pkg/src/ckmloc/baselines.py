"""Comparison localizers: CKM coarse matching and AoA/RSS fingerprinting."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ckm import Ckm
from .geometry import PathParam
from .matching import barycenter, rank_candidates
from .spectrum import DictConfig

# padding for missing paths: angles sort to the end, power sits at a floor
AOA_SENTINEL = np.pi
RSS_SENTINEL_DB = -120.0


def fingerprint_feature(paths: Sequence[PathParam], n_slots: int = 20) -> np.ndarray:
    """AoAs in ascending order followed by the matching per-path RSS in dB.

    Both halves are padded to ``n_slots`` with sentinels; extra paths beyond
    ``n_slots`` (the weakest ones) are ignored.
    """
    strongest = sorted(paths, key=lambda p: -abs(p.gain if p.gain is not None else 1.0))[:n_slots]
    strongest.sort(key=lambda p: p.aoa)
    aoa = np.full(n_slots, AOA_SENTINEL)
    rss = np.full(n_slots, RSS_SENTINEL_DB)
    for i, p in enumerate(strongest):
        aoa[i] = p.aoa
        rss[i] = max(p.power_db(), RSS_SENTINEL_DB) if p.gain is not None else 0.0
    return np.concatenate([aoa, rss])


@dataclass(frozen=True)
class FingerprintDb:
    locations: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        if self.locations.shape[0] != self.features.shape[0]:
            raise ValueError("one feature vector per reference location is required")

    def __len__(self) -> int:
        return len(self.locations)

    @classmethod
    def from_ckm(cls, ckm: Ckm, n_slots: int = 20) -> "FingerprintDb":
        return cls.from_records(ckm.locations, [e.paths for e in ckm.entries], n_slots)

    @classmethod
    def from_records(cls, locations, path_lists, n_slots: int = 20) -> "FingerprintDb":
        locations = np.asarray(locations, dtype=float).reshape(-1, 2)
        features = np.array([fingerprint_feature(p, n_slots) for p in path_lists]).reshape(len(locations), 2 * n_slots)
        return cls(locations, features)


def fingerprint_localize(feature, db: FingerprintDb) -> np.ndarray:
    """Nearest reference in feature space; ties go to the lower record index."""
    if len(db) == 0:
        raise ValueError("empty fingerprint database")
    feature = np.asarray(feature, dtype=float)
    if feature.shape != db.features.shape[1:]:
        raise ValueError(f"feature length {feature.shape} does not match database {db.features.shape[1:]}")
    dist = np.linalg.norm(db.features - feature, axis=1)
    return db.locations[int(np.argmin(dist))].copy()


def coarse_localize(obs: Sequence[PathParam], ckm: Ckm, dict_cfg: DictConfig, k: int = 10) -> np.ndarray:
    return barycenter(rank_candidates(obs, ckm, dict_cfg, k))
