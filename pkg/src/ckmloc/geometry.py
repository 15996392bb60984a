"""Single-bounce path geometry in the plane.

Angles are measured counterclockwise from the +x axis at the base station and
wrapped to (-pi, pi]. Points are plain ``(2,)`` float arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 299792458.0

# relative guard on the denominator of the closed-form scatterer inversion
DENOMINATOR_EPS = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or infeasible path geometry."""


def as_point(p, name: str = "point") -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must have exactly two coordinates, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite coordinates: {arr}")
    return arr


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def unit_vector(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class PathParam:
    """One resolvable propagation path as seen at the base station.

    ``aoa`` in radians, ``toa`` in seconds, ``gain`` an optional complex
    amplitude.
    """

    aoa: float
    toa: float
    gain: Optional[complex] = None

    def __post_init__(self):
        if not (np.isfinite(self.aoa) and np.isfinite(self.toa)):
            raise ValueError(f"non-finite path parameters: aoa={self.aoa}, toa={self.toa}")

    @property
    def length(self) -> float:
        """Total propagation distance c * toa in meters."""
        return SPEED_OF_LIGHT * self.toa

    def power_db(self) -> float:
        if self.gain is None:
            raise ValueError("path has no gain")
        return float(20.0 * np.log10(max(abs(self.gain), 1e-300)))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    @classmethod
    def from_angle(cls, origin, theta: float) -> "Ray":
        return cls(as_point(origin, "origin"), unit_vector(theta))

    def __post_init__(self):
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-12:
            raise ValueError("ray direction must be a unit vector")

    def point(self, d: float) -> np.ndarray:
        return ray_point(self, d)


def ray_point(ray: Ray, d: float) -> np.ndarray:
    """Point at distance ``d >= 0`` along ``ray``."""
    if d < 0:
        raise ValueError(f"ray distance must be nonnegative, got {d}")
    return ray.origin + d * ray.direction


def forward_path(bs, ue, scatterer) -> PathParam:
    """AoA/ToA of the UE -> scatterer -> BS path."""
    bs = as_point(bs, "bs")
    ue = as_point(ue, "ue")
    s = as_point(scatterer, "scatterer")
    to_s = s - bs
    leg_bs = float(np.hypot(*to_s))
    if leg_bs == 0.0:
        raise GeometryError("scatterer coincides with the base station")
    leg_ue = float(np.hypot(*(ue - s)))
    aoa = wrap_angle(np.arctan2(to_s[1], to_s[0]))
    return PathParam(aoa=aoa, toa=(leg_ue + leg_bs) / SPEED_OF_LIGHT)


def ray_distance_from_path(bs, ue, aoa: float, toa: float) -> float:
    """Distance from the BS to the scatterer along the AoA ray.

    Closed-form intersection of the AoA ray with the delay ellipse whose foci
    are the BS and the UE.
    """
    bs = as_point(bs, "bs")
    r = as_point(ue, "ue") - bs
    path_len = SPEED_OF_LIGHT * toa
    r_norm = float(np.hypot(*r))
    if path_len <= r_norm:
        raise GeometryError(
            f"infeasible delay: path length {path_len:.6g} m does not exceed BS-UE distance {r_norm:.6g} m"
        )
    half_den = path_len - float(r @ unit_vector(aoa))
    if abs(half_den) < DENOMINATOR_EPS * path_len:
        raise GeometryError("near-singular scatterer inversion: ray points at the UE")
    d = (path_len**2 - r_norm**2) / (2.0 * half_den)
    if d < 0:
        raise GeometryError(f"scatterer falls behind the base station (d={d:.6g} m)")
    return d


def scatterer_from_path(bs, ue, aoa: float, toa: float) -> np.ndarray:
    """Invert (AoA, ToA) to the single-bounce scatterer location."""
    d = ray_distance_from_path(bs, ue, aoa, toa)
    return as_point(bs) + d * unit_vector(aoa)
