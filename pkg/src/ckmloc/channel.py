"""Frequency-domain SIMO multipath channel and AoA/ToA extraction."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .geometry import GeometryError, PathParam, as_point, forward_path
from .spectrum import DictConfig, angle_response, delay_response, delay_vector, project, steering_vector

logger = logging.getLogger(__name__)

ObservationSet = List[PathParam]


class NoResolvablePathError(RuntimeError):
    pass


@dataclass(frozen=True)
class RfConfig:
    carrier_hz: float = 6e9
    bandwidth_hz: float = 100e6
    n_subcarriers: int = 1024
    n_antennas: int = 32
    antenna_spacing: float = 0.5
    snr_db: float = 30.0

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_antennas < 1:
            raise ValueError("need at least one antenna and one subcarrier")
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ValueError("carrier and bandwidth must be positive")

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers

    @property
    def max_delay_s(self) -> float:
        """Largest unambiguous delay, 1 / subcarrier spacing."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def wavelength_m(self) -> float:
        return 299792458.0 / self.carrier_hz


@dataclass(frozen=True)
class OracleNoise:
    """Gaussian perturbation applied to true path parameters in oracle mode."""

    sigma_aoa: float = 0.0
    sigma_toa: float = 0.0


def synth_channel(paths: Sequence[PathParam], cfg: RfConfig) -> np.ndarray:
    """``H[m, n] = sum_l alpha_l exp(-2j pi (d/lambda) m sin(theta_l)) exp(-2j pi n df tau_l)``.

    Paths without a gain are taken with unit gain.
    """
    if len(paths) == 0:
        raise ValueError("cannot synthesize a channel from an empty path list")
    theta = np.array([p.aoa for p in paths])
    tau = np.array([p.toa for p in paths])
    if np.any(tau < 0) or np.any(tau >= cfg.max_delay_s):
        raise ValueError(f"path delay outside the unambiguous range [0, {cfg.max_delay_s:.6g}) s")
    gains = np.array([1.0 if p.gain is None else p.gain for p in paths], dtype=complex)
    beta = steering_vector(theta, cfg.n_antennas, cfg.antenna_spacing)
    v = delay_vector(tau, cfg.n_subcarriers, cfg.subcarrier_spacing_hz)
    return (beta * gains) @ v.T


def add_awgn(H: np.ndarray, snr_db: float, seed) -> np.ndarray:
    """Add circular complex Gaussian noise at ``snr_db`` per matrix entry.

    The noise variance is the mean signal power per entry divided by the
    linear SNR. ``snr_db = inf`` returns a copy of ``H``.
    """
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ValueError("channel matrix has non-finite entries")
    if math.isinf(snr_db) and snr_db > 0:
        return H.copy()
    rng = np.random.default_rng(seed)
    sigma2 = float(np.mean(np.abs(H) ** 2)) / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
    return H + np.sqrt(sigma2 / 2.0) * noise


def _parabolic_offset(y_minus: float, y0: float, y_plus: float) -> float:
    den = y_minus - 2.0 * y0 + y_plus
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (y_minus - y_plus) / den, -0.5, 0.5))


class _Correlator:
    """Correlation ``r(a, b) = sum_mk R[m, k] exp(2j pi (m a / N_theta + k b / N_tau))``.

    ``a`` and ``b`` are continuous angle/delay bin coordinates; ``r`` is the
    unnormalised matched-filter output of a unit path at that bin.
    """

    def __init__(self, cfg: DictConfig):
        self.cfg = cfg
        self.wm = 2 * np.pi * np.arange(cfg.n_antennas) / cfg.n_theta
        self.wk = 2 * np.pi * np.arange(cfg.n_subcarriers) / cfg.n_tau

    def refine(self, R: np.ndarray, a: float, b: float, iters: int, max_step: float = 0.5):
        """Newton ascent of ``|r|^2`` from the bin estimate ``(a, b)``."""
        wm, wk = self.wm, self.wk
        for _ in range(iters):
            pa = np.exp(1j * wm * a)
            pb = np.exp(1j * wk * b)
            u0 = R @ pb
            u1 = R @ (1j * wk * pb)
            u2 = R @ (-(wk**2) * pb)
            r = pa @ u0
            ra = (1j * wm * pa) @ u0
            raa = (-(wm**2) * pa) @ u0
            rb = pa @ u1
            rbb = pa @ u2
            rab = (1j * wm * pa) @ u1
            grad = 2 * np.array([(r.conjugate() * ra).real, (r.conjugate() * rb).real])
            hess = 2 * np.array(
                [
                    [abs(ra) ** 2 + (r.conjugate() * raa).real, (rb.conjugate() * ra + r.conjugate() * rab).real],
                    [(rb.conjugate() * ra + r.conjugate() * rab).real, abs(rb) ** 2 + (r.conjugate() * rbb).real],
                ]
            )
            if np.all(np.linalg.eigvalsh(hess) < 0):
                step = -np.linalg.solve(hess, grad)
            else:
                break
            scale = max(1.0, float(np.max(np.abs(step))) / max_step)
            step = step / scale
            a += step[0]
            b += step[1]
            if np.max(np.abs(step)) < 1e-9:
                break
        return a, b


def _bins_to_path(a: float, b: float, cfg: DictConfig):
    sin_theta = a / (cfg.n_theta * cfg.antenna_spacing)
    theta = float(np.arcsin(np.clip(sin_theta, -1.0, 1.0)))
    tau = float(max(b, 0.0) / (cfg.n_tau * cfg.subcarrier_spacing_hz))
    return theta, tau


def _atom(theta: float, tau: float, cfg: DictConfig):
    beta = steering_vector(theta, cfg.n_antennas, cfg.antenna_spacing)
    v = delay_vector(tau, cfg.n_subcarriers, cfg.subcarrier_spacing_hz)
    return beta, v


def estimate_paths(
    H: np.ndarray,
    cfg: DictConfig,
    max_paths: int = 20,
    peak_threshold_rel: float = 0.05,
    refine_iters: int = 3,
    refit_cycles: int = 1,
) -> ObservationSet:
    """Extract AoA/ToA pairs by successive peak picking on the angle-delay grid.

    Each round takes the strongest bin of the residual spectrum, refines the
    angle and delay with a 3-point parabola per axis (on magnitude), polishes
    the estimate with ``refine_iters`` Newton steps on the matched-filter
    power, fits the complex gain by least squares and subtracts that
    component. Extraction stops after ``max_paths`` or once the residual peak
    power falls below ``peak_threshold_rel`` times the first peak power.

    ``refit_cycles`` extra passes then re-estimate every path against the
    residual with all other paths removed.

    When ``cfg.n_tau_window`` is set, peaks are only searched among the
    first ``n_tau_window`` delay bins.
    """
    H = np.array(H, dtype=complex)
    if H.shape != (cfg.n_antennas, cfg.n_subcarriers):
        raise ValueError(f"channel shape {H.shape} does not match the dictionary configuration")
    B = project(H, cfg, conj_delay=True)
    n_theta, n_tau = B.shape
    MN = cfg.n_antennas * cfg.n_subcarriers
    corr = _Correlator(cfg)

    comps = []  # (a, b, gain)
    first_peak = None
    for _ in range(max_paths):
        power = B.real**2 + B.imag**2
        i, j = divmod(int(np.argmax(power)), n_tau)
        peak = float(power[i, j])
        if first_peak is None:
            if not peak > 0:
                raise NoResolvablePathError("no resolvable path")
            first_peak = peak
        elif peak < peak_threshold_rel * first_peak:
            break

        # delay neighbours wrap modulo N_tau; a truncated window clamps instead
        jm, jp = (j - 1) % cfg.n_tau, (j + 1) % cfg.n_tau
        if jm >= n_tau or jp >= n_tau:
            jm, jp = max(j - 1, 0), min(j + 1, n_tau - 1)
        mag = np.sqrt(power[[(i - 1) % n_theta, i, (i + 1) % n_theta], :][:, [jm, j, jp]])
        a = i - n_theta // 2 + _parabolic_offset(mag[0, 1], mag[1, 1], mag[2, 1])
        b = j + _parabolic_offset(mag[1, 0], mag[1, 1], mag[1, 2])
        if refine_iters:
            a, b = corr.refine(H, a, b, refine_iters)
        theta, tau = _bins_to_path(a, b, cfg)
        beta, v = _atom(theta, tau, cfg)
        gain = complex(beta.conj() @ H @ v.conj()) / MN
        H -= gain * np.outer(beta, v)
        atom = angle_response(theta, cfg)[:, 0, None] * delay_response(tau, cfg, conj=False)[None, :, 0]
        B -= gain * atom
        comps.append([a, b, gain])

    for _ in range(refit_cycles if refine_iters else 0):
        for c in comps:
            theta, tau = _bins_to_path(c[0], c[1], cfg)
            beta, v = _atom(theta, tau, cfg)
            H += c[2] * np.outer(beta, v)
            c[0], c[1] = corr.refine(H, c[0], c[1], refine_iters)
            theta, tau = _bins_to_path(c[0], c[1], cfg)
            beta, v = _atom(theta, tau, cfg)
            c[2] = complex(beta.conj() @ H @ v.conj()) / MN
            H -= c[2] * np.outer(beta, v)

    found = [PathParam(*_bins_to_path(a, b, cfg), gain=g) for a, b, g in comps]
    found.sort(key=lambda p: -abs(p.gain))
    return found


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def split_rngs(seed, n: int = 2):
    return [np.random.default_rng(s) for s in as_seed_sequence(seed).spawn(n)]


def path_gain(bs, ue, scatterer, rng: np.random.Generator) -> complex:
    """Two-segment free-space amplitude with a uniformly random phase."""
    d1 = float(np.hypot(*(as_point(ue) - as_point(scatterer))))
    d2 = float(np.hypot(*(as_point(scatterer) - as_point(bs))))
    return complex(np.exp(2j * np.pi * rng.uniform()) / (d1 * d2))


def true_paths(bs, ue, scatterers, rng: Optional[np.random.Generator] = None) -> List[PathParam]:
    """Single-bounce paths through each scatterer, with gains when ``rng`` is given.

    Scatterers that are geometrically degenerate for this UE are skipped.
    """
    out = []
    for s in scatterers:
        try:
            p = forward_path(bs, ue, s)
        except GeometryError:
            logger.debug("skipping degenerate scatterer %s", s)
            continue
        if rng is not None:
            p = PathParam(p.aoa, p.toa, path_gain(bs, ue, s, rng))
        out.append(p)
    return out


def observe(
    bs,
    ue,
    scatterers,
    rf: RfConfig,
    dict_cfg: DictConfig,
    seed,
    *,
    oracle: Optional[OracleNoise] = None,
    max_paths: int = 20,
    peak_threshold_rel: float = 0.05,
) -> ObservationSet:
    """Simulate one uplink measurement and return the observed paths.

    In oracle mode the true path parameters are perturbed directly instead of
    running the channel and the estimator.
    """
    gain_rng, noise_rng = split_rngs(seed)
    paths = true_paths(bs, ue, scatterers, gain_rng)
    if not paths:
        raise NoResolvablePathError("no valid propagation path")
    if oracle is not None:
        out = [
            PathParam(
                aoa=p.aoa + oracle.sigma_aoa * noise_rng.standard_normal(),
                toa=p.toa + oracle.sigma_toa * noise_rng.standard_normal(),
                gain=p.gain,
            )
            for p in paths
        ]
        out.sort(key=lambda p: -abs(p.gain))
        return out
    H = add_awgn(synth_channel(paths, rf), rf.snr_db, noise_rng)
    return estimate_paths(H, dict_cfg, max_paths=max_paths, peak_threshold_rel=peak_threshold_rel)
