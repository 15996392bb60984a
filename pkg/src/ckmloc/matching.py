"""Map-level candidate ranking, path-level assignment and prior selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ckm import Ckm
from .geometry import PathParam
from .spectrum import DictConfig, cosine_similarity, dirichlet_map, peak_normalize

WEIGHT_THRESHOLD = 0.5


class EmptyCandidateSetError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateSet:
    """Top-ranked CKM entries: entry positions, locations and similarities."""

    indices: np.ndarray
    locations: np.ndarray
    similarity: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ScattererPrior:
    location: np.ndarray
    weight: float
    entry: int
    ckm_path: int
    obs_path: int


def observation_map(obs: Sequence[PathParam], dict_cfg: DictConfig):
    if len(obs) == 0:
        raise ValueError("empty observation")
    return peak_normalize(dirichlet_map(obs, dict_cfg))


def rank_candidates(obs: Sequence[PathParam], ckm: Ckm, dict_cfg: DictConfig, k: int = 10) -> CandidateSet:
    """Top-``k`` CKM entries by cosine similarity of peak-normalised power maps.

    The whole map is scanned in float32 through the cached map bank; the
    best few are then rescored exactly. Ties go to the lower entry index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(ckm) == 0:
        raise EmptyCandidateSetError("CKM has no entries")
    P_obs = observation_map(obs, dict_cfg)
    usable = ckm.usable
    if not usable.any():
        raise EmptyCandidateSetError("CKM has no entry with a usable path")

    coarse = ckm.map_bank(dict_cfg).similarities(P_obs)
    coarse[~usable] = -1.0
    n_keep = min(int(usable.sum()), max(4 * k, k + 16))
    order = np.lexsort((np.arange(len(coarse)), -coarse))[:n_keep]

    exact = np.array([cosine_similarity(P_obs, peak_normalize(dirichlet_map(ckm.entries[i].paths, dict_cfg))) for i in order])
    rerank = np.lexsort((order, -exact))[:k]
    idx = order[rerank]
    return CandidateSet(indices=idx, locations=ckm.locations[idx], similarity=exact[rerank])


def barycenter(cands: CandidateSet) -> np.ndarray:
    """Similarity-weighted mean of candidate locations."""
    if len(cands) == 0:
        raise EmptyCandidateSetError("empty candidate set")
    w = np.asarray(cands.similarity, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("candidate similarities sum to zero")
    return (w[:, None] * cands.locations).sum(axis=0) / total


def _bin_coords(paths: Sequence[PathParam], dict_cfg: DictConfig, scales: Tuple[float, float]) -> np.ndarray:
    theta = np.array([p.aoa for p in paths], dtype=float)
    tau = np.array([p.toa for p in paths], dtype=float)
    return np.column_stack([scales[0] * dict_cfg.angle_bin(theta), scales[1] * dict_cfg.delay_bin(tau)])


def pair_dissimilarity(
    obs_path: PathParam, ckm_path: PathParam, dict_cfg: DictConfig, scales: Tuple[float, float] = (1.0, 1.0)
) -> float:
    """Distance between two paths in continuous (angle-bin, delay-bin) units."""
    a = _bin_coords([obs_path], dict_cfg, scales)[0]
    b = _bin_coords([ckm_path], dict_cfg, scales)[0]
    return float(np.hypot(*(a - b)))


def dissimilarity_matrix(
    obs: Sequence[PathParam], paths: Sequence[PathParam], dict_cfg: DictConfig, scales: Tuple[float, float] = (1.0, 1.0)
) -> np.ndarray:
    a = _bin_coords(obs, dict_cfg, scales)
    b = _bin_coords(paths, dict_cfg, scales)
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def optimal_assignment(cost) -> np.ndarray:
    """Min-cost injective assignment of rows (observed) to columns (CKM paths).

    Returns the column of each row, or -1 for rows left unmatched because
    there are fewer columns than rows. Surplus rows are handled by padding
    with equal-cost virtual columns, so the rows left out are those whose
    exclusion saves the most cost.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n_rows, n_cols = cost.shape
    out = np.full(n_rows, -1, dtype=int)
    if n_rows == 0 or n_cols == 0:
        return out
    if np.any(cost < 0) or not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite and nonnegative")
    if n_cols < n_rows:
        pad = np.full((n_rows, n_rows - n_cols), 1.0 + 2.0 * float(cost.max()) * n_rows)
        cost = np.hstack([cost, pad])
    rows, cols = linear_sum_assignment(cost)
    real = cols < n_cols
    out[rows[real]] = cols[real]
    return out


def select_priors(
    obs: Sequence[PathParam],
    cands: CandidateSet,
    ckm: Ckm,
    dict_cfg: DictConfig,
    threshold: float = WEIGHT_THRESHOLD,
    scales: Tuple[float, float] = (1.0, 1.0),
) -> List[ScattererPrior]:
    """Pick, for every observed path, its best-matching CKM scatterer.

    Each candidate entry is assigned to the observation; an observed path
    keeps the candidate where its matched distance ``D`` is smallest, with
    weight ``1 / (1 + D)``. Paths whose weight falls below ``threshold``
    are discarded.
    """
    if len(obs) == 0 or len(cands) == 0:
        raise ValueError("select_priors needs observations and candidates")
    best_d = np.full(len(obs), np.inf)
    best = [None] * len(obs)
    for idx in cands.indices:
        entry = ckm.entries[int(idx)]
        if entry.n_paths == 0:
            continue
        D = dissimilarity_matrix(obs, entry.paths, dict_cfg, scales)
        match = optimal_assignment(D)
        for l, m in enumerate(match):
            if m < 0:
                continue
            if D[l, m] < best_d[l]:
                best_d[l] = D[l, m]
                best[l] = (int(idx), int(m))

    priors = []
    for l, choice in enumerate(best):
        if choice is None:
            continue
        w = 1.0 / (1.0 + best_d[l])
        if w < threshold:
            continue
        idx, m = choice
        priors.append(ScattererPrior(ckm.entries[idx].scatterers[m].copy(), float(w), idx, m, l))
    return priors
