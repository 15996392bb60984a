import math

import numpy as np
import pytest

from ckmloc.ckm import Ckm
from ckmloc.geometry import SPEED_OF_LIGHT, PathParam, forward_path
from ckmloc.solver import NlsProblem, levenberg_marquardt, localize
from ckmloc.spectrum import DictConfig

C = SPEED_OF_LIGHT
BS = np.zeros(2)
SCATTERERS = np.array([[20.0, -20.0], [35.0, 15.0], [45.0, 35.0], [15.0, 30.0], [30.0, -5.0]])


@pytest.fixture(scope="module")
def dcfg():
    return DictConfig(n_antennas=32, n_subcarriers=1024, subcarrier_spacing_hz=100e6 / 1024, n_tau_window=128)


@pytest.fixture(scope="module")
def ckm():
    locs = [(x, y) for x in np.arange(58.0, 67.0) for y in np.arange(-4.0, 5.0)]
    paths = [[forward_path(BS, loc, s) for s in SCATTERERS] for loc in locs]
    return Ckm.from_samples(BS, locs, paths, spacing=1.0)


def problem_at(ue, scat, lam=2.0, weights=None, priors=None):
    paths = [forward_path(BS, ue, s) for s in scat]
    n = len(paths)
    return NlsProblem(
        bs=BS,
        aoa=[p.aoa for p in paths],
        toa=[p.toa for p in paths],
        weights=np.ones(n) if weights is None else weights,
        priors=scat if priors is None else priors,
        lambda_prior=lam,
    )


def truth_params(pb, ue, scat):
    return np.concatenate([ue, np.linalg.norm(np.asarray(scat) - BS, axis=1)])


def test_zero_residual_at_truth():
    ue = np.array([60.0, 2.0])
    pb = problem_at(ue, SCATTERERS)
    x = truth_params(pb, ue, SCATTERERS)
    assert np.max(np.abs(pb.residuals(x))) < 1e-8
    assert pb.objective(x) < 1e-15


def test_objective_matches_residual_norm():
    rng = np.random.default_rng(0)
    pb = problem_at(np.array([60.0, 2.0]), SCATTERERS, weights=rng.uniform(0.5, 1, 5), priors=SCATTERERS + 1.5)
    for _ in range(20):
        x = np.concatenate([rng.uniform(40, 80, 2), rng.uniform(5, 60, 5)])
        r = pb.residuals(x)
        assert pb.objective(x) == pytest.approx(r @ r, rel=1e-12)


def test_prior_term_scales_with_lambda():
    ue = np.array([60.0, 2.0])
    base = problem_at(ue, SCATTERERS, lam=1.0, priors=SCATTERERS + 2.0)
    double = problem_at(ue, SCATTERERS, lam=2.0, priors=SCATTERERS + 2.0)
    x = truth_params(base, ue, SCATTERERS)
    # the delay term is zero at the truth, so only the prior term remains
    assert double.objective(x) == pytest.approx(2 * base.objective(x), rel=1e-12)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(1)
    pb = problem_at(np.array([60.0, 2.0]), SCATTERERS, weights=rng.uniform(0.5, 1, 5), priors=SCATTERERS + 0.7)
    h = 1e-6
    for _ in range(10):
        x = np.concatenate([rng.uniform(40, 80, 2), rng.uniform(5, 60, 5)])
        J = pb.jacobian(x)
        fd = np.empty_like(J)
        for j in range(len(x)):
            e = np.zeros_like(x)
            e[j] = h
            fd[:, j] = (pb.residuals(x + e) - pb.residuals(x - e)) / (2 * h)
        assert np.max(np.abs(J - fd)) < 1e-5


def test_lm_rosenbrock():
    def res(x):
        return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])

    def jac(x):
        return np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])

    x, diag = levenberg_marquardt([-1.2, 1.0], res, jac)
    np.testing.assert_allclose(x, [1, 1], atol=1e-8)
    assert diag.converged
    assert all(b < a for a, b in zip(diag.history, diag.history[1:]))


def test_lm_zero_residual_start():
    ue = np.array([60.0, 2.0])
    pb = problem_at(ue, SCATTERERS[:1])
    x0 = np.concatenate([ue, [np.linalg.norm(SCATTERERS[0])]])
    x, diag = levenberg_marquardt(x0, pb.residuals, pb.jacobian)
    assert diag.iterations <= 1
    np.testing.assert_allclose(x, x0, atol=1e-9)


def test_lm_rejects_non_finite():
    with pytest.raises(ValueError):
        levenberg_marquardt([np.nan], lambda x: x, lambda x: np.eye(1))


def test_large_lambda_pins_scatterers_to_prior_projection():
    ue = np.array([60.0, 2.0])
    priors = SCATTERERS + np.array([0.0, 1.0])
    pb = problem_at(ue, SCATTERERS, lam=1e8, priors=priors)
    x, _ = levenberg_marquardt(pb.initial_params(ue + 1.0), pb.residuals, pb.jacobian, project=pb.project)
    proj = np.einsum("ij,ij->i", priors - BS, pb.directions)
    np.testing.assert_allclose(x[2:], proj, atol=1e-4)


def test_scatterers_stay_on_rays(ckm, dcfg):
    obs = [forward_path(BS, (61.3, 0.4), s) for s in SCATTERERS]
    res = localize(obs, ckm, dcfg)
    for p, s in zip([obs[pr.obs_path] for pr in res.priors], res.scatterer_estimates):
        d = np.linalg.norm(s - BS)
        np.testing.assert_allclose(s, BS + d * np.array([math.cos(p.aoa), math.sin(p.aoa)]), atol=1e-9)


def test_noiseless_localization_is_exact(ckm, dcfg):
    rng = np.random.default_rng(4)
    for _ in range(5):
        ue = rng.uniform([59, -3], [65, 3])
        obs = [forward_path(BS, ue, s) for s in SCATTERERS]
        res = localize(obs, ckm, dcfg)
        assert not res.fallback_used
        assert np.linalg.norm(res.ue_estimate - ue) < 1e-3
        assert res.converged


def test_all_spurious_paths_fall_back_to_coarse(ckm, dcfg):
    obs = [PathParam(-1.3, 40e-9), PathParam(1.4, 900e-9)]
    res = localize(obs, ckm, dcfg)
    assert res.fallback_used and res.priors == []
    np.testing.assert_array_equal(res.ue_estimate, res.init)


def test_initial_params_project_prior_onto_ray():
    pb = problem_at(np.array([60.0, 0.0]), SCATTERERS, priors=SCATTERERS + np.array([0.0, 3.0]))
    x0 = pb.initial_params([1.0, 2.0])
    np.testing.assert_allclose(x0[:2], [1, 2])
    np.testing.assert_allclose(x0[2:], np.einsum("ij,ij->i", pb.priors, pb.directions))
