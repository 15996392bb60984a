"""Channel-knowledge-map assisted NLoS localization."""
from .baselines import FingerprintDb, coarse_localize, fingerprint_feature, fingerprint_localize
from .channel import NoResolvablePathError, OracleNoise, RfConfig, estimate_paths, observe, synth_channel
from .ckm import Ckm, CkmEntry, CkmFormatError, build_ckm, load_ckm, save_ckm
from .config import ConfigError, ScenarioConfig, load_scenario, save_scenario
from .estimators import CkmCoarseLocalizer, CkmLocalizer, FingerprintLocalizer
from .geometry import GeometryError, PathParam, forward_path, scatterer_from_path
from .harness import TrialRecord, cdf, rmse, run_experiment, run_sweep
from .matching import CandidateSet, ScattererPrior, optimal_assignment, rank_candidates, select_priors
from .solver import LocalizationResult, NlsProblem, levenberg_marquardt, localize
from .spectrum import AngleDelayMap, DictConfig, cosine_similarity, dirichlet_map, power_map, snapshot

__version__ = "0.1.0"

__all__ = [
    "AngleDelayMap",
    "CandidateSet",
    "Ckm",
    "CkmCoarseLocalizer",
    "CkmEntry",
    "CkmFormatError",
    "CkmLocalizer",
    "ConfigError",
    "DictConfig",
    "FingerprintDb",
    "FingerprintLocalizer",
    "GeometryError",
    "LocalizationResult",
    "NlsProblem",
    "NoResolvablePathError",
    "OracleNoise",
    "PathParam",
    "RfConfig",
    "ScattererPrior",
    "ScenarioConfig",
    "TrialRecord",
    "build_ckm",
    "cdf",
    "coarse_localize",
    "cosine_similarity",
    "dirichlet_map",
    "estimate_paths",
    "fingerprint_feature",
    "fingerprint_localize",
    "forward_path",
    "levenberg_marquardt",
    "load_ckm",
    "load_scenario",
    "localize",
    "observe",
    "optimal_assignment",
    "power_map",
    "rank_candidates",
    "rmse",
    "run_experiment",
    "run_sweep",
    "save_ckm",
    "save_scenario",
    "scatterer_from_path",
    "select_priors",
    "snapshot",
    "synth_channel",
]
