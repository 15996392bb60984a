"""Monte Carlo experiment driver, error metrics and CSV output.

Seeding rule. With master seed ``m``:

* prior scatterers: ``SeedSequence(m, spawn_key=(0,))``
* CKM node ``k``: ``SeedSequence(m, spawn_key=(1, k))``
* trial ``t``: ``SeedSequence(m, spawn_key=(2, t))``, split into three
  children for the UE draw, the added scatterers and the channel.

A trial therefore depends only on ``(m, t)``, never on execution order.
Added scatterers are drawn one point at a time, so the first four of an
eight-scatterer draw equal the four-scatterer draw of the same trial. UE
positions and channel gains are shared the same way across ``n_add`` and
antenna counts, which keeps sweep comparisons paired.

CSV layouts (column order is stable):

* trials: ``trial,method,error_m``
* summary: ``method,N_add,M,rmse,p50,p90``
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import FingerprintDb, fingerprint_feature, fingerprint_localize
from .channel import observe
from .ckm import Ckm, build_ckm
from .config import ScenarioConfig, resolve_prior_scatterers
from .solver import localize

logger = logging.getLogger(__name__)

METHODS = ("proposed", "coarse", "fingerprint")
TRIAL_COLUMNS = ("trial", "method", "error_m")
SUMMARY_COLUMNS = ("method", "N_add", "M", "rmse", "p50", "p90")


@dataclass
class TrialRecord:
    trial: int
    seed: Tuple[int, Tuple[int, ...]]
    ue: np.ndarray
    n_scatterers: int
    estimates: Dict[str, np.ndarray] = field(default_factory=dict)
    errors: Dict[str, float] = field(default_factory=dict)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if any(e < 0 for e in self.errors.values()):
            raise ValueError("errors must be nonnegative")


def parse_methods(methods) -> Tuple[str, ...]:
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    methods = tuple(dict.fromkeys(methods))
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise ValueError(f"unknown or empty method list {sorted(unknown)}; choose from {', '.join(METHODS)}")
    return methods


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(2, trial))


def draw_added_scatterers(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    (x0, x1), (y0, y1) = cfg.scatterer_region
    pts = [(rng.uniform(x0, x1), rng.uniform(y0, y1)) for _ in range(cfg.n_add)]
    return np.array(pts, dtype=float).reshape(-1, 2)


def simulate_trial(cfg: ScenarioConfig, priors, master: int, t: int):
    """UE position, scatterer set and observed paths of trial ``t``."""
    ue_ss, add_ss, chan_ss = trial_seed(master, t).spawn(3)
    ue_rng = np.random.default_rng(ue_ss)
    (x0, x1), (y0, y1) = cfg.ue_region
    ue = np.array([ue_rng.uniform(x0, x1), ue_rng.uniform(y0, y1)])
    scat = np.vstack([np.asarray(priors, dtype=float).reshape(-1, 2), draw_added_scatterers(cfg, np.random.default_rng(add_ss))])
    obs = observe(
        cfg.bs,
        ue,
        scat,
        cfg.rf,
        cfg.dict_cfg,
        chan_ss,
        oracle=cfg.oracle_noise,
        max_paths=cfg.max_paths,
        peak_threshold_rel=cfg.peak_threshold_rel,
    )
    return ue, scat, obs


def _run_trial(cfg: ScenarioConfig, ckm: Ckm, priors, db: Optional[FingerprintDb], methods, master: int, t: int) -> TrialRecord:
    ue, scat, obs = simulate_trial(cfg, priors, master, t)
    dict_cfg = cfg.dict_cfg
    rec = TrialRecord(trial=t, seed=(master, (2, t)), ue=ue, n_scatterers=len(scat))
    rec.diagnostics["n_observed_paths"] = len(obs)
    if "proposed" in methods or "coarse" in methods:
        res = localize(obs, ckm, dict_cfg, k_cand=cfg.k_cand, lambda_prior=cfg.lambda_prior, threshold=cfg.weight_threshold)
        if "proposed" in methods:
            rec.estimates["proposed"] = res.ue_estimate
        if "coarse" in methods:
            rec.estimates["coarse"] = res.init
        rec.diagnostics.update(
            iterations=res.iterations, converged=res.converged, fallback_used=res.fallback_used, n_priors=len(res.priors)
        )
    if "fingerprint" in methods:
        rec.estimates["fingerprint"] = fingerprint_localize(fingerprint_feature(obs, cfg.fingerprint_slots), db)
    rec.errors = {m: float(np.linalg.norm(rec.estimates[m] - ue)) for m in methods}
    return rec


def run_experiment(
    cfg: ScenarioConfig,
    methods: Iterable[str] = METHODS,
    *,
    seed: int = 0,
    ckm: Optional[Ckm] = None,
    n_jobs: int = 1,
) -> List[TrialRecord]:
    """Run ``cfg.n_trials`` trials; the CKM is built from ``seed`` unless given.

    A supplied CKM must have been built over the scenario's prior
    scatterers, which are then reused for every trial.
    """
    methods = parse_methods(methods)
    if cfg.n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if ckm is None:
        ckm = build_ckm(cfg, seed=seed, n_jobs=n_jobs)
    priors = ckm.prior_scatterers if ckm.prior_scatterers is not None else resolve_prior_scatterers(cfg, seed)
    db = FingerprintDb.from_ckm(ckm, cfg.fingerprint_slots) if "fingerprint" in methods else None
    if n_jobs == 1:
        records = [_run_trial(cfg, ckm, priors, db, methods, seed, t) for t in range(cfg.n_trials)]
    else:
        from joblib import Parallel, delayed

        records = Parallel(n_jobs=n_jobs)(delayed(_run_trial)(cfg, ckm, priors, db, methods, seed, t) for t in range(cfg.n_trials))
    return sorted(records, key=lambda r: r.trial)


def _check_errors(errors) -> np.ndarray:
    e = np.asarray(list(errors), dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("empty error list")
    return e


def cdf(errors) -> List[Tuple[float, float]]:
    """Empirical CDF evaluated at each distinct error value."""
    e = np.sort(_check_errors(errors))
    values, counts = np.unique(e, return_counts=True)
    return list(zip(values.tolist(), (np.cumsum(counts) / e.size).tolist()))


def cdf_at(errors, threshold: float) -> float:
    e = _check_errors(errors)
    return float(np.mean(e <= threshold))


def rmse(errors) -> float:
    e = _check_errors(errors)
    return float(np.sqrt(np.mean(e**2)))


def errors_by_method(records: Sequence[TrialRecord]) -> Dict[str, np.ndarray]:
    out: Dict[str, List[float]] = {}
    for r in records:
        for m, e in r.errors.items():
            out.setdefault(m, []).append(e)
    return {m: np.array(v) for m, v in out.items()}


def summarize(records: Sequence[TrialRecord], n_add: int, n_antennas: int) -> List[dict]:
    rows = []
    for m, e in errors_by_method(records).items():
        rows.append(
            {
                "method": m,
                "N_add": n_add,
                "M": n_antennas,
                "rmse": rmse(e),
                "p50": float(np.percentile(e, 50)),
                "p90": float(np.percentile(e, 90)),
            }
        )
    return rows


def write_trials_csv(records: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            for m, e in r.errors.items():
                w.writerow([r.trial, m, repr(e)])


def write_summary_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def sweep_points(cfg: ScenarioConfig) -> List[Tuple[int, int]]:
    n_adds = cfg.sweep_n_add or (cfg.n_add,)
    antennas = cfg.sweep_n_antennas or (cfg.rf.n_antennas,)
    return [(m, n) for m in antennas for n in n_adds]


def run_sweep(
    cfg: ScenarioConfig,
    out_dir,
    methods: Iterable[str] = METHODS,
    *,
    seed: int = 0,
    n_jobs: int = 1,
) -> List[dict]:
    """Run every (antenna count, ``n_add``) point and write the CSV files.

    One CKM is built per antenna count and shared across ``n_add`` values.
    Trial files are named ``trials_M{M}_Nadd{N}.csv``; the combined summary
    is ``summary.csv``.
    """
    methods = parse_methods(methods)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: List[dict] = []
    ckms: Dict[int, Ckm] = {}
    for n_antennas, n_add in sweep_points(cfg):
        point = cfg.replace(n_antennas=n_antennas, n_add=n_add)
        if n_antennas not in ckms:
            logger.info("building CKM for M=%d", n_antennas)
            ckms[n_antennas] = build_ckm(point, seed=seed, n_jobs=n_jobs)
        records = run_experiment(point, methods, seed=seed, ckm=ckms[n_antennas], n_jobs=n_jobs)
        write_trials_csv(records, out_dir / f"trials_M{n_antennas}_Nadd{n_add}.csv")
        point_rows = summarize(records, n_add, n_antennas)
        for row in point_rows:
            logger.info("M=%d N_add=%d %s rmse=%.3f m", n_antennas, n_add, row["method"], row["rmse"])
        rows.extend(point_rows)
    write_summary_csv(rows, out_dir / "summary.csv")
    return rows
