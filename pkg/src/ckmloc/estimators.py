"""Estimator-style front end over the localization pipeline.

Training data are reference samples: ``X`` is a list of path sets and ``y``
the matching locations on a regular lattice. ``predict`` returns one 2-D
position per observed path set.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import FingerprintDb, fingerprint_feature, fingerprint_localize
from .channel import RfConfig
from .ckm import Ckm
from .matching import barycenter, rank_candidates
from .solver import localize
from .spectrum import DictConfig
from .validation import check_locations, check_path_sets


class _CkmEstimator(RegressorMixin, BaseEstimator):
    def _dict_cfg(self) -> DictConfig:
        rf = RfConfig(
            bandwidth_hz=self.bandwidth_hz,
            n_subcarriers=self.n_subcarriers,
            n_antennas=self.n_antennas,
            antenna_spacing=self.antenna_spacing,
        )
        return DictConfig.from_rf(rf, n_theta=self.n_theta, n_tau=self.n_tau, n_tau_window=self.n_tau_window)

    def fit(self, X, y=None):
        """Build the map from path sets ``X`` and lattice locations ``y``.

        ``X`` may also be a ready :class:`Ckm`, in which case ``y`` is ignored.
        """
        if isinstance(X, Ckm):
            self.ckm_ = X
        else:
            paths = check_path_sets(X, allow_empty=True)
            locations = check_locations(y, len(paths))
            self.ckm_ = Ckm.from_samples(self.bs, locations, paths, spacing=self.grid_spacing)
        self.dict_cfg_ = self._dict_cfg()
        self.n_features_in_ = 2
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "ckm_")
        return np.array([self._predict_one(obs) for obs in check_path_sets(X)]).reshape(-1, 2)


class CkmLocalizer(_CkmEstimator):
    """Candidate matching, scatterer priors and the joint least-squares fit."""

    def __init__(
        self,
        bs=(0.0, 0.0),
        n_antennas=32,
        n_subcarriers=1024,
        bandwidth_hz=100e6,
        antenna_spacing=0.5,
        n_theta=256,
        n_tau=1024,
        n_tau_window=128,
        grid_spacing=None,
        k_cand=10,
        lambda_prior=2.0,
        weight_threshold=0.5,
        max_iter=200,
    ):
        self.bs = bs
        self.n_antennas = n_antennas
        self.n_subcarriers = n_subcarriers
        self.bandwidth_hz = bandwidth_hz
        self.antenna_spacing = antenna_spacing
        self.n_theta = n_theta
        self.n_tau = n_tau
        self.n_tau_window = n_tau_window
        self.grid_spacing = grid_spacing
        self.k_cand = k_cand
        self.lambda_prior = lambda_prior
        self.weight_threshold = weight_threshold
        self.max_iter = max_iter

    def localize(self, obs):
        """Full result object for one observation, diagnostics included."""
        check_is_fitted(self, "ckm_")
        (paths,) = check_path_sets([obs])
        return self._run(paths)

    def _predict_one(self, obs):
        return self._run(obs).ue_estimate

    def _run(self, paths):
        return localize(
            paths,
            self.ckm_,
            self.dict_cfg_,
            k_cand=self.k_cand,
            lambda_prior=self.lambda_prior,
            threshold=self.weight_threshold,
            max_iter=self.max_iter,
        )


class CkmCoarseLocalizer(_CkmEstimator):
    """Similarity-weighted barycenter of the best-matching map nodes."""

    def __init__(
        self,
        bs=(0.0, 0.0),
        n_antennas=32,
        n_subcarriers=1024,
        bandwidth_hz=100e6,
        antenna_spacing=0.5,
        n_theta=256,
        n_tau=1024,
        n_tau_window=128,
        grid_spacing=None,
        k_cand=10,
    ):
        self.bs = bs
        self.n_antennas = n_antennas
        self.n_subcarriers = n_subcarriers
        self.bandwidth_hz = bandwidth_hz
        self.antenna_spacing = antenna_spacing
        self.n_theta = n_theta
        self.n_tau = n_tau
        self.n_tau_window = n_tau_window
        self.grid_spacing = grid_spacing
        self.k_cand = k_cand

    def _predict_one(self, obs):
        return barycenter(rank_candidates(obs, self.ckm_, self.dict_cfg_, self.k_cand))


class FingerprintLocalizer(RegressorMixin, BaseEstimator):
    """Nearest neighbour on sorted AoA and per-path RSS features."""

    def __init__(self, n_slots=20):
        self.n_slots = n_slots

    def fit(self, X, y=None):
        if isinstance(X, Ckm):
            self.db_ = FingerprintDb.from_ckm(X, self.n_slots)
        else:
            paths = check_path_sets(X, allow_empty=True)
            self.db_ = FingerprintDb.from_records(check_locations(y, len(paths)), paths, self.n_slots)
        self.n_features_in_ = 2 * self.n_slots
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "db_")
        feats = [fingerprint_feature(obs, self.n_slots) for obs in check_path_sets(X)]
        return np.array([fingerprint_localize(f, self.db_) for f in feats]).reshape(-1, 2)
