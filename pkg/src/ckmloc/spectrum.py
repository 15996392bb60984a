"""Angle-delay DFT dictionaries, power maps and map similarity.

Grid conventions
----------------
Angle bins are indexed by ``kappa = -N_theta//2 ... N_theta - N_theta//2 - 1``
(row ``i`` of a map holds ``kappa = i - N_theta//2``), so at half-wavelength
spacing the rows cover ``sin(theta)`` in ``[-1, 1)``. Delay bins are
``n = 0 ... n_window - 1`` where ``n_window`` defaults to ``N_tau``.

Dictionaries are ``W[m, kappa] = exp(-2j*pi*m*kappa/N_theta) / sqrt(M)`` and
``V[k, n] = exp(-2j*pi*k*n/N_tau) / sqrt(N)``. A snapshot is
``sum_l beta(theta_l) v(tau_l)^H`` and its spectrum ``W^H X V``; with these
choices the spectrum of one path is the product of two Dirichlet kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import PathParam

# below this |sin(x/2)| the Dirichlet ratio is taken from its limit
_DIRICHLET_EPS = 1e-12


@dataclass(frozen=True)
class DictConfig:
    """Sizes of the angle-delay grid and of the array/subcarrier aperture.

    ``n_tau_window`` truncates the delay axis of every map to its first
    ``n_tau_window`` bins (``None`` keeps all ``n_tau``).
    """

    n_antennas: int
    n_subcarriers: int
    subcarrier_spacing_hz: float
    antenna_spacing: float = 0.5
    n_theta: int = 256
    n_tau: int = 1024
    n_tau_window: Optional[int] = None

    def __post_init__(self):
        if self.n_antennas < 1 or self.n_subcarriers < 1:
            raise ValueError("need at least one antenna and one subcarrier")
        if self.n_theta < self.n_antennas:
            raise ValueError(f"n_theta ({self.n_theta}) must be >= n_antennas ({self.n_antennas})")
        if self.n_tau < self.n_subcarriers:
            raise ValueError(f"n_tau ({self.n_tau}) must be >= n_subcarriers ({self.n_subcarriers})")
        if self.subcarrier_spacing_hz <= 0:
            raise ValueError("subcarrier spacing must be positive")
        if self.n_tau_window is not None and not 1 <= self.n_tau_window <= self.n_tau:
            raise ValueError(f"n_tau_window must lie in [1, {self.n_tau}]")

    @classmethod
    def from_rf(cls, rf, **kwargs) -> "DictConfig":
        return cls(
            n_antennas=rf.n_antennas,
            n_subcarriers=rf.n_subcarriers,
            subcarrier_spacing_hz=rf.subcarrier_spacing_hz,
            antenna_spacing=rf.antenna_spacing,
            **kwargs,
        )

    @property
    def n_delay_bins(self) -> int:
        return self.n_tau if self.n_tau_window is None else self.n_tau_window

    @property
    def shape(self) -> tuple:
        return (self.n_theta, self.n_delay_bins)

    @property
    def kappa(self) -> np.ndarray:
        return np.arange(self.n_theta) - self.n_theta // 2

    @property
    def delay_index(self) -> np.ndarray:
        return np.arange(self.n_delay_bins)

    def angle_bin(self, theta):
        """Continuous angle-axis coordinate of ``theta``."""
        return self.n_theta * self.antenna_spacing * np.sin(theta)

    def delay_bin(self, tau):
        """Continuous delay-axis coordinate of ``tau``."""
        return self.n_tau * self.subcarrier_spacing_hz * np.asarray(tau)

    @property
    def angle_bin_width(self) -> float:
        """Width of one angle bin in sin(theta) units."""
        return 1.0 / (self.n_theta * self.antenna_spacing)

    @property
    def delay_bin_width(self) -> float:
        """Width of one delay bin in seconds."""
        return 1.0 / (self.n_tau * self.subcarrier_spacing_hz)


@dataclass(frozen=True)
class AngleDelayMap:
    power: np.ndarray
    peak_normalized: bool = False

    def __post_init__(self):
        if np.any(self.power < 0):
            raise ValueError("power map entries must be nonnegative")

    @property
    def shape(self):
        return self.power.shape


def steering_vector(theta, n_antennas: int, antenna_spacing: float = 0.5) -> np.ndarray:
    """ULA receive steering vector(s); shape ``(M,)`` or ``(M, L)``."""
    m = np.arange(n_antennas)
    phase = np.multiply.outer(m, antenna_spacing * np.sin(np.asarray(theta, dtype=float)))
    return np.exp(-2j * np.pi * phase)


def delay_vector(tau, n_subcarriers: int, subcarrier_spacing_hz: float) -> np.ndarray:
    """Per-subcarrier delay phase progression; shape ``(N,)`` or ``(N, L)``."""
    k = np.arange(n_subcarriers)
    phase = np.multiply.outer(k, subcarrier_spacing_hz * np.asarray(tau, dtype=float))
    return np.exp(-2j * np.pi * phase)


def angle_dictionary(cfg: DictConfig) -> np.ndarray:
    m = np.arange(cfg.n_antennas)[:, None]
    return np.exp(-2j * np.pi * m * cfg.kappa[None, :] / cfg.n_theta) / np.sqrt(cfg.n_antennas)


def delay_dictionary(cfg: DictConfig) -> np.ndarray:
    k = np.arange(cfg.n_subcarriers)[:, None]
    return np.exp(-2j * np.pi * k * cfg.delay_index[None, :] / cfg.n_tau) / np.sqrt(cfg.n_subcarriers)


def _path_arrays(paths: Sequence[PathParam]):
    if len(paths) == 0:
        raise ValueError("empty path list")
    theta = np.array([p.aoa for p in paths], dtype=float)
    tau = np.array([p.toa for p in paths], dtype=float)
    return theta, tau


def snapshot(paths: Sequence[PathParam], cfg: DictConfig) -> np.ndarray:
    """Unit-gain virtual snapshot ``sum_l beta(theta_l) v(tau_l)^H`` (M x N)."""
    theta, tau = _path_arrays(paths)
    beta = steering_vector(theta, cfg.n_antennas, cfg.antenna_spacing)
    v = delay_vector(tau, cfg.n_subcarriers, cfg.subcarrier_spacing_hz)
    return beta @ v.conj().T


def project(X: np.ndarray, cfg: DictConfig, *, conj_delay: bool = False, full_delay: bool = False) -> np.ndarray:
    """Two-sided DFT projection ``W^H X V`` computed with FFTs.

    ``conj_delay`` projects onto ``conj(V)`` instead, which is what a physical
    channel ``sum alpha beta(theta) v(tau)^T`` needs to land its delays on
    bins ``n = N_tau * df * tau``. ``full_delay`` ignores ``n_tau_window``.
    """
    X = np.asarray(X)
    if X.shape != (cfg.n_antennas, cfg.n_subcarriers):
        raise ValueError(f"expected a {cfg.n_antennas}x{cfg.n_subcarriers} matrix, got {X.shape}")
    scale = 1.0 / np.sqrt(cfg.n_antennas * cfg.n_subcarriers)
    if conj_delay:
        B = np.fft.ifft(X, n=cfg.n_tau, axis=1) * cfg.n_tau
    else:
        B = np.fft.fft(X, n=cfg.n_tau, axis=1)
    if not full_delay:
        B = B[:, : cfg.n_delay_bins]
    # sum_m exp(+2j pi m kappa / N_theta) X[m] == N_theta * ifft
    B = np.fft.fftshift(np.fft.ifft(B, n=cfg.n_theta, axis=0), axes=0) * cfg.n_theta
    return B * scale


def power_map(X: np.ndarray, cfg: DictConfig) -> AngleDelayMap:
    B = project(X, cfg)
    return AngleDelayMap(np.abs(B) ** 2)


def dirichlet_sum(x, n: int) -> np.ndarray:
    """``sum_{k<n} exp(-1j*k*x)`` via its closed Dirichlet form."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    s = np.sin(half)
    small = np.abs(s) < _DIRICHLET_EPS
    safe = np.where(small, 1.0, s)
    ratio = np.where(small, n * np.cos(n * half) / np.cos(half), np.sin(n * half) / safe)
    return np.exp(-1j * (n - 1) * half) * ratio


def angle_response(theta, cfg: DictConfig) -> np.ndarray:
    """``W^H beta(theta)`` for each angle; shape ``(N_theta, L)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = 2 * np.pi * (cfg.antenna_spacing * np.sin(theta)[None, :] - cfg.kappa[:, None] / cfg.n_theta)
    return dirichlet_sum(phi, cfg.n_antennas) / np.sqrt(cfg.n_antennas)


def delay_response(tau, cfg: DictConfig, *, conj: bool = True, full_delay: bool = False) -> np.ndarray:
    """``V^H`` response of a delay; shape ``(n_delay_bins, L)``.

    With ``conj=True`` this is ``(v(tau)^H V)^T`` as used by snapshots,
    otherwise ``(v(tau)^T conj(V))^T`` as seen by a physical channel.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    n = np.arange(cfg.n_tau) if full_delay else cfg.delay_index
    psi = 2 * np.pi * (cfg.subcarrier_spacing_hz * tau[None, :] - n[:, None] / cfg.n_tau)
    resp = dirichlet_sum(psi, cfg.n_subcarriers) / np.sqrt(cfg.n_subcarriers)
    return resp.conj() if conj else resp


def dirichlet_spectrum(paths: Sequence[PathParam], cfg: DictConfig) -> np.ndarray:
    """Closed-form complex spectrum of the unit-gain snapshot of ``paths``."""
    theta, tau = _path_arrays(paths)
    return angle_response(theta, cfg) @ delay_response(tau, cfg).T


def dirichlet_map(paths: Sequence[PathParam], cfg: DictConfig) -> AngleDelayMap:
    """Power map of the snapshot of ``paths`` evaluated in closed form."""
    return AngleDelayMap(np.abs(dirichlet_spectrum(paths, cfg)) ** 2)


def peak_normalize(P: AngleDelayMap) -> AngleDelayMap:
    peak = float(np.max(P.power))
    if not peak > 0:
        raise ValueError("cannot peak-normalize an all-zero map")
    if P.peak_normalized and peak == 1.0:
        return P
    return AngleDelayMap(P.power / peak, peak_normalized=True)


def cosine_similarity(A: AngleDelayMap, B: AngleDelayMap) -> float:
    if A.shape != B.shape:
        raise ValueError(f"map shapes differ: {A.shape} vs {B.shape}")
    a = A.power.ravel()
    b = B.power.ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero-norm map")
    return float(np.clip((a @ b) / (na * nb), 0.0, 1.0))


@dataclass
class MapBank:
    """Unit-norm flattened maps of many path lists, for fast similarity scans.

    Stored in float32; callers needing exact similarities recompute the few
    top-ranked ones in float64.
    """

    cfg: DictConfig
    vectors: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, path_lists: Sequence[Sequence[PathParam]], cfg: DictConfig) -> "MapBank":
        n_bins = cfg.n_theta * cfg.n_delay_bins
        vectors = np.zeros((len(path_lists), n_bins), dtype=np.float32)
        for i, paths in enumerate(path_lists):
            if len(paths) == 0:
                continue
            P = np.abs(dirichlet_spectrum(paths, cfg)).astype(np.float32) ** 2
            norm = np.linalg.norm(P)
            if norm > 0:
                vectors[i] = (P / norm).ravel()
        return cls(cfg, vectors)

    def similarities(self, P: AngleDelayMap) -> np.ndarray:
        q = P.power.astype(np.float32).ravel()
        nq = np.linalg.norm(q)
        if nq == 0:
            raise ValueError("cosine similarity of a zero-norm map")
        return np.clip(self.vectors @ (q / nq), 0.0, 1.0).astype(float)
