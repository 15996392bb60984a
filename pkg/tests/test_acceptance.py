"""Acceptance checks; each test prints one ACCEPT line with its verdict.

The replication block builds three full-size maps (M = 16, 32, 64) and runs
200 trials per setting, which takes several minutes on one core. Maps are
cached in the pytest cache directory between runs.
"""
import hashlib
import itertools
import json
import math

import numpy as np
import pytest

from ckmloc.ckm import Ckm, build_ckm, load_ckm, save_ckm
from ckmloc.config import ScenarioConfig
from ckmloc.geometry import PathParam, forward_path, scatterer_from_path
from ckmloc.harness import cdf_at, errors_by_method, rmse, run_experiment
from ckmloc.matching import optimal_assignment
from ckmloc.solver import NlsProblem, localize
from ckmloc.spectrum import DictConfig, dirichlet_map, power_map, snapshot

MASTER_SEED = 0
N_TRIALS = 200


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPT {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


# property suite


def test_criterion_1_geometry_roundtrip(report):
    rng = np.random.default_rng(101)
    errs = []
    for _ in range(10_000):
        bs, ue, s = rng.uniform(-100, 100, (3, 2))
        p = forward_path(bs, ue, s)
        errs.append(np.linalg.norm(scatterer_from_path(bs, ue, p.aoa, p.toa) - s))
    worst = max(errs)
    assert report(1, worst < 1e-6, f"geometry roundtrip, 10000 triples, max error {worst:.2e} m (< 1e-6)")


def test_criterion_2_spectrum_equivalence(report):
    cfg = DictConfig(n_antennas=16, n_subcarriers=64, subcarrier_spacing_hz=1e5, n_theta=32, n_tau=64)
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        paths = [PathParam(rng.uniform(-1.5, 1.5), rng.uniform(0, 0.95e-5)) for _ in range(int(rng.integers(1, 8)))]
        a = dirichlet_map(paths, cfg).power
        b = power_map(snapshot(paths, cfg), cfg).power
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(b)))
    assert report(2, worst < 1e-9, f"closed-form map vs projection, 100 sets, max rel deviation {worst:.2e} (< 1e-9)")


def test_criterion_3_assignment_optimality(report):
    rng = np.random.default_rng(103)
    mismatches = 0
    for _ in range(200):
        rows = int(rng.integers(1, 6))
        cols = int(rng.integers(rows, 8))
        cost = rng.random((rows, cols))
        match = optimal_assignment(cost)
        total = math.fsum(cost[r, c] for r, c in enumerate(match))
        best = min(math.fsum(cost[r, c] for r, c in enumerate(p)) for p in itertools.permutations(range(cols), rows))
        mismatches += total != best
    assert report(3, mismatches == 0, f"assignment vs brute force, 200 matrices up to 5x7, {mismatches} mismatches")


def test_criterion_4_jacobian(report):
    rng = np.random.default_rng(104)
    worst = 0.0
    h = 1e-6
    for _ in range(100):
        L = int(rng.integers(1, 8))
        ue = rng.uniform([50, -40], [80, 40])
        scat = rng.uniform([10, -40], [50, 40], (L, 2))
        paths = [forward_path((0, 0), ue, s) for s in scat]
        pb = NlsProblem(
            bs=(0, 0),
            aoa=[p.aoa for p in paths],
            toa=[p.toa for p in paths],
            weights=rng.uniform(0.5, 1.0, L),
            priors=scat + rng.normal(0, 2, (L, 2)),
            lambda_prior=2.0,
        )
        x = np.concatenate([rng.uniform([50, -40], [80, 40]), rng.uniform(5, 60, L)])
        J = pb.jacobian(x)
        fd = np.column_stack(
            [(pb.residuals(x + h * e) - pb.residuals(x - h * e)) / (2 * h) for e in np.eye(len(x))]
        )
        worst = max(worst, float(np.max(np.abs(J - fd))))
    assert report(4, worst < 1e-5, f"analytic vs central-difference Jacobian, 100 points, max diff {worst:.2e} (< 1e-5)")


def test_criterion_5_zero_noise(report):
    scenario = ScenarioConfig(ue_region=((58.0, 66.0), (-4.0, 4.0)), ckm_mode="true-geometry")
    ckm = build_ckm(scenario, seed=105)
    node = ckm.entries[len(ckm) // 2]
    obs = [forward_path(ckm.bs, node.location, s) for s in ckm.prior_scatterers]
    err = float(np.linalg.norm(localize(obs, ckm, scenario.dict_cfg).ue_estimate - node.location))
    assert report(5, err < 1e-3, f"oracle noiseless UE on a grid node, error {err:.2e} m (< 1e-3)")


# replication at desk scale


def _cached_ckm(cache, scenario: ScenarioConfig, seed: int) -> Ckm:
    key = hashlib.sha256(json.dumps([scenario.to_dict(), seed], sort_keys=True).encode()).hexdigest()[:16]
    path = cache.mkdir("ckmloc-acceptance") / f"ckm-{key}.json"
    if path.exists():
        return load_ckm(path)
    ckm = build_ckm(scenario, seed=seed)
    save_ckm(ckm, path)
    return ckm


@pytest.fixture(scope="module")
def replication(request):
    cache = request.config.cache
    base = ScenarioConfig(n_trials=N_TRIALS, ckm_mode="estimated")
    results = {}
    for m in (16, 32, 64):
        sc = base.replace(n_antennas=m)
        ckm = _cached_ckm(cache, sc, MASTER_SEED)
        n_adds = (0, 4, 8) if m == 32 else (0,)
        methods = ("proposed", "coarse", "fingerprint") if m == 32 else ("proposed",)
        for n_add in n_adds:
            recs = run_experiment(sc.replace(n_add=n_add), methods, seed=MASTER_SEED, ckm=ckm)
            results[(m, n_add)] = errors_by_method(recs)
    return results


def test_criterion_6_accuracy(replication, report):
    e = replication[(32, 0)]["proposed"]
    r, within = rmse(e), cdf_at(e, 1.0)
    ok = r <= 1.0 and within >= 0.90
    assert report(6, ok, f"M=32 N_add=0, {len(e)} trials: RMSE {r:.3f} m (<= 1.0), share <= 1 m {within:.3f} (>= 0.90)")


def test_criterion_7_baseline_gap(replication, report):
    res = replication[(32, 0)]
    p, c, f = rmse(res["proposed"]), rmse(res["coarse"]), rmse(res["fingerprint"])
    ok = c >= 2 * p and f >= 2 * p
    assert report(7, ok, f"M=32 N_add=0: proposed {p:.3f} m, coarse {c:.3f} m, fingerprint {f:.3f} m (both >= 2x proposed)")


def test_criterion_8_robustness(replication, report):
    r = {n: {k: rmse(v) for k, v in replication[(32, n)].items()} for n in (0, 4, 8)}
    prop = [r[n]["proposed"] for n in (0, 4, 8)]
    monotone = prop[0] <= prop[1] <= prop[2]
    e8 = replication[(32, 8)]["proposed"]
    within2 = cdf_at(e8, 2.0)
    beats = all(r[n]["proposed"] < min(r[n]["coarse"], r[n]["fingerprint"]) for n in (0, 4, 8))
    ok = monotone and prop[2] <= 3.0 and within2 >= 0.50 and beats
    table = ", ".join(
        f"N_add={n}: proposed {r[n]['proposed']:.3f} coarse {r[n]['coarse']:.3f} fingerprint {r[n]['fingerprint']:.3f}"
        for n in (0, 4, 8)
    )
    detail = f"monotone={monotone}, N_add=8 share <= 2 m {within2:.3f} (>= 0.50), beats baselines={beats}; RMSE {table}"
    assert report(8, ok, detail)


def test_criterion_9_antenna_sweep(replication, report):
    r16, r32, r64 = (rmse(replication[(m, 0)]["proposed"]) for m in (16, 32, 64))
    ok = r64 <= 1.1 * r32 and r32 <= 1.1 * r16
    assert report(9, ok, f"N_add=0 RMSE: M=16 {r16:.3f} m, M=32 {r32:.3f} m, M=64 {r64:.3f} m (non-increasing, 10% tolerance)")
