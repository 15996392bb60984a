"""Joint UE/scatterer estimation by weighted ray-constrained least squares."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .ckm import Ckm
from .geometry import SPEED_OF_LIGHT, PathParam, as_point, unit_vector
from .matching import WEIGHT_THRESHOLD, CandidateSet, ScattererPrior, barycenter, rank_candidates, select_priors
from .spectrum import DictConfig

logger = logging.getLogger(__name__)


@dataclass
class NlsProblem:
    """Parameters are ``[x_ue, y_ue, d_1, ..., d_L]`` with ``d_l`` the ray distances."""

    bs: np.ndarray
    aoa: np.ndarray
    toa: np.ndarray
    weights: np.ndarray
    priors: np.ndarray
    lambda_prior: float = 2.0

    def __post_init__(self):
        self.bs = as_point(self.bs, "bs")
        self.aoa = np.asarray(self.aoa, dtype=float).reshape(-1)
        self.toa = np.asarray(self.toa, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.priors = np.asarray(self.priors, dtype=float).reshape(-1, 2)
        n = len(self.aoa)
        if not (len(self.toa) == len(self.weights) == len(self.priors) == n):
            raise ValueError("paths, weights and priors must have equal counts")
        if not self.lambda_prior > 0:
            raise ValueError("lambda_prior must be positive")
        self.directions = unit_vector(self.aoa).reshape(-1, 2)

    @classmethod
    def from_priors(cls, bs, obs: Sequence[PathParam], priors: Sequence[ScattererPrior], lambda_prior: float):
        used = [obs[p.obs_path] for p in priors]
        return cls(
            bs=bs,
            aoa=[p.aoa for p in used],
            toa=[p.toa for p in used],
            weights=[p.weight for p in priors],
            priors=[p.location for p in priors],
            lambda_prior=lambda_prior,
        )

    @property
    def n_paths(self) -> int:
        return len(self.aoa)

    def scatterers(self, params) -> np.ndarray:
        d = np.asarray(params, dtype=float)[2:]
        return self.bs + d[:, None] * self.directions

    def initial_params(self, ue0) -> np.ndarray:
        """UE at ``ue0``; each scatterer at the projection of its prior on its ray."""
        d0 = np.maximum(np.einsum("ij,ij->i", self.priors - self.bs, self.directions), 0.0)
        return np.concatenate([as_point(ue0), d0])

    def residuals(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        ue, d = params[:2], params[2:]
        s = self.bs + d[:, None] * self.directions
        delay = np.hypot(*(ue - s).T) + np.abs(d) - SPEED_OF_LIGHT * self.toa
        prior = np.hypot(*(s - self.priors).T)
        return np.concatenate([np.sqrt(self.weights) * delay, np.sqrt(self.lambda_prior * self.weights) * prior])

    def jacobian(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        ue, d = params[:2], params[2:]
        L = self.n_paths
        u = self.directions
        s = self.bs + d[:, None] * u
        J = np.zeros((2 * L, L + 2))
        rows = np.arange(L)

        diff = ue - s
        dist = np.hypot(*diff.T)
        g = np.divide(diff, dist[:, None], out=np.zeros_like(diff), where=dist[:, None] > 0)
        sw = np.sqrt(self.weights)
        J[:L, :2] = sw[:, None] * g
        J[rows, 2 + rows] = sw * (np.sign(d) - np.einsum("ij,ij->i", g, u))

        off = s - self.priors
        pd = np.hypot(*off.T)
        h = np.divide(off, pd[:, None], out=np.zeros_like(off), where=pd[:, None] > 0)
        J[L + rows, 2 + rows] = np.sqrt(self.lambda_prior * self.weights) * np.einsum("ij,ij->i", h, u)
        return J

    def objective(self, params) -> float:
        """Weighted delay-consistency plus prior penalty, evaluated term by term."""
        params = np.asarray(params, dtype=float)
        ue = params[:2]
        total = 0.0
        for l, s in enumerate(self.scatterers(params)):
            mismatch = np.linalg.norm(ue - s) + np.linalg.norm(s - self.bs) - SPEED_OF_LIGHT * self.toa[l]
            total += self.weights[l] * mismatch**2
            total += self.lambda_prior * self.weights[l] * np.sum((s - self.priors[l]) ** 2)
        return float(total)

    def project(self, params) -> np.ndarray:
        params = np.array(params, dtype=float)
        params[2:] = np.maximum(params[2:], 0.0)
        return params


@dataclass
class LMDiagnostics:
    iterations: int
    converged: bool
    objective: float
    history: List[float] = field(default_factory=list)
    reason: str = ""


def levenberg_marquardt(
    x0,
    residual_fn: Callable[[np.ndarray], np.ndarray],
    jacobian_fn: Callable[[np.ndarray], np.ndarray],
    *,
    max_iter: int = 200,
    xtol: float = 1e-10,
    ftol: float = 1e-12,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Tuple[np.ndarray, LMDiagnostics]:
    """Damped Gauss-Newton with the classic multiply/divide-by-10 damping schedule.

    A trial step is accepted only if it lowers the sum of squares, so the
    accepted objective sequence is strictly decreasing. ``project`` maps a
    trial point back to the feasible set before it is evaluated.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(residual_fn(x), dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
        raise ValueError("non-finite initial point or residuals")
    f = float(r @ r)
    history = [f]
    if f == 0.0:
        return x, LMDiagnostics(0, True, f, history, "zero residual")

    J = jacobian_fn(x)
    A = J.T @ J
    g = J.T @ r
    mu = 1e-3 * max(float(np.max(np.diag(A))), np.finfo(float).tiny)
    eye = np.eye(len(x))
    reason = "max_iter"
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(A + mu * eye, -g)
        except np.linalg.LinAlgError:
            mu *= 10.0
            continue
        x_new = x + step
        if project is not None:
            x_new = project(x_new)
        actual_step = x_new - x
        if np.linalg.norm(actual_step) < xtol:
            reason, converged = "small step", True
            break
        r_new = np.asarray(residual_fn(x_new), dtype=float)
        f_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if f_new < f:
            rel = (f - f_new) / f
            x, r, f = x_new, r_new, f_new
            history.append(f)
            mu = max(mu / 10.0, 1e-300)
            if f == 0.0 or rel < ftol:
                reason, converged = "small objective decrease", True
                break
            J = jacobian_fn(x)
            A = J.T @ J
            g = J.T @ r
        else:
            mu *= 10.0
    return x, LMDiagnostics(it, converged, f, history, reason)


@dataclass
class LocalizationResult:
    ue_estimate: np.ndarray
    scatterer_estimates: np.ndarray
    objective: float
    iterations: int
    converged: bool
    fallback_used: bool
    init: np.ndarray
    candidates: Optional[CandidateSet] = None
    priors: List[ScattererPrior] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "ue_estimate": self.ue_estimate.tolist(),
            "init": self.init.tolist(),
            "scatterer_estimates": np.asarray(self.scatterer_estimates).tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "fallback_used": self.fallback_used,
            "n_priors": len(self.priors),
            "prior_weights": [p.weight for p in self.priors],
        }


def localize(
    obs: Sequence[PathParam],
    ckm: Ckm,
    dict_cfg: DictConfig,
    *,
    k_cand: int = 10,
    lambda_prior: float = 2.0,
    threshold: float = WEIGHT_THRESHOLD,
    scales: Tuple[float, float] = (1.0, 1.0),
    max_iter: int = 200,
) -> LocalizationResult:
    """Coarse CKM match, prior selection, then the joint least-squares refinement."""
    if len(obs) == 0:
        raise ValueError("empty observation")
    cands = rank_candidates(obs, ckm, dict_cfg, k_cand)
    ue0 = barycenter(cands)
    priors = select_priors(obs, cands, ckm, dict_cfg, threshold=threshold, scales=scales)
    if not priors:
        logger.debug("all observed paths rejected; returning the coarse estimate")
        return LocalizationResult(ue0, np.zeros((0, 2)), float("nan"), 0, False, True, ue0, cands, [])

    problem = NlsProblem.from_priors(ckm.bs, obs, priors, lambda_prior)
    x, diag = levenberg_marquardt(
        problem.initial_params(ue0),
        problem.residuals,
        problem.jacobian,
        max_iter=max_iter,
        project=problem.project,
    )
    return LocalizationResult(
        ue_estimate=x[:2].copy(),
        scatterer_estimates=problem.scatterers(x),
        objective=diag.objective,
        iterations=diag.iterations,
        converged=diag.converged,
        fallback_used=False,
        init=ue0,
        candidates=cands,
        priors=priors,
    )
