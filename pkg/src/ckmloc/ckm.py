"""Channel knowledge map: AoA/ToA signatures on a spatial lattice.

CKM file format (JSON, ``version`` 1)::

    {
      "format": "ckmloc-ckm",
      "version": 1,
      "bs": [x, y],
      "grid": {"origin": [x0, y0], "spacing": s, "shape": [nx, ny]},
      "mode": "estimated" | "true-geometry" | "samples",
      "prior_scatterers": [[x, y], ...] | null,
      "entries": [
        {"index": [ix, iy], "location": [x, y],
         "paths": [[aoa, toa, gain_re, gain_im] | [aoa, toa], ...],
         "scatterers": [[x, y], ...]},
        ...
      ]
    }

Entries are listed in row-major lattice order (``ix`` slowest). ``paths`` is
the canonical content; ``scatterers`` caches the single-bounce inversion of
each path at the entry location. Floats are written with ``repr`` precision,
so a save/load roundtrip is bit exact.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import RfConfig, add_awgn, estimate_paths, split_rngs, synth_channel, true_paths
from .geometry import GeometryError, PathParam, as_point, scatterer_from_path
from .spectrum import DictConfig, MapBank

logger = logging.getLogger(__name__)

CKM_FORMAT = "ckmloc-ckm"
CKM_VERSION = 1


class CkmFormatError(ValueError):
    pass


@dataclass
class CkmEntry:
    index: Tuple[int, int]
    location: np.ndarray
    paths: List[PathParam]
    scatterers: np.ndarray

    @property
    def n_paths(self) -> int:
        return len(self.paths)


def derive_entry(index, location, paths: Sequence[PathParam], bs) -> CkmEntry:
    """Invert every path at ``location``; paths that fail the inversion are dropped."""
    kept, scat = [], []
    for p in paths:
        try:
            scat.append(scatterer_from_path(bs, location, p.aoa, p.toa))
        except GeometryError as exc:
            logger.debug("dropping path %s at %s: %s", p, location, exc)
            continue
        kept.append(p)
    return CkmEntry(
        index=tuple(int(i) for i in index),
        location=as_point(location),
        paths=kept,
        scatterers=np.array(scat, dtype=float).reshape(-1, 2),
    )


@dataclass
class Ckm:
    bs: np.ndarray
    origin: np.ndarray
    spacing: float
    shape: Tuple[int, int]
    entries: List[CkmEntry]
    mode: str = "samples"
    prior_scatterers: Optional[np.ndarray] = None
    _banks: Dict[DictConfig, MapBank] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.bs = as_point(self.bs, "bs")
        self.origin = as_point(self.origin, "origin")
        if self.spacing <= 0:
            raise ValueError("grid spacing must be positive")
        seen = set()
        for e in self.entries:
            if e.index in seen:
                raise ValueError(f"duplicate lattice index {e.index}")
            seen.add(e.index)
            expected = self.origin + self.spacing * np.asarray(e.index, dtype=float)
            if not np.allclose(e.location, expected, atol=1e-6 * max(1.0, self.spacing)):
                raise ValueError(f"entry {e.index} at {e.location} is off the lattice")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def locations(self) -> np.ndarray:
        return np.array([e.location for e in self.entries]).reshape(-1, 2)

    @property
    def usable(self) -> np.ndarray:
        """Mask of entries with at least one path."""
        return np.array([e.n_paths > 0 for e in self.entries], dtype=bool)

    def map_bank(self, dict_cfg: DictConfig) -> MapBank:
        """Normalised power maps of all entries (computed once per grid config)."""
        if dict_cfg not in self._banks:
            self._banks[dict_cfg] = MapBank.build([e.paths for e in self.entries], dict_cfg)
        return self._banks[dict_cfg]

    @classmethod
    def from_samples(cls, bs, locations, path_lists, spacing: Optional[float] = None, **kwargs) -> "Ckm":
        """Assemble a map from reference locations on a regular lattice.

        ``spacing`` defaults to the smallest nonzero coordinate gap.
        """
        locs = np.asarray(locations, dtype=float).reshape(-1, 2)
        if len(locs) == 0:
            raise ValueError("no reference locations")
        if len(locs) != len(path_lists):
            raise ValueError("locations and path lists differ in length")
        origin = locs.min(axis=0)
        if spacing is None:
            gaps = np.concatenate([np.diff(np.unique(locs[:, 0])), np.diff(np.unique(locs[:, 1]))])
            spacing = float(gaps.min()) if len(gaps) else 1.0
        rel = (locs - origin) / spacing
        idx = np.rint(rel).astype(int)
        if not np.allclose(rel, idx, atol=1e-6):
            raise ValueError("reference locations are not on a regular lattice")
        shape = tuple(int(v) for v in idx.max(axis=0) + 1)
        order = np.lexsort((idx[:, 1], idx[:, 0]))
        entries = [derive_entry(idx[k], origin + spacing * idx[k], path_lists[k], bs) for k in order]
        return cls(bs=bs, origin=origin, spacing=spacing, shape=shape, entries=entries, **kwargs)


def _node_paths(mode, bs, p, scatterers, rf, dict_cfg, seed, max_paths, peak_threshold_rel):
    gain_rng, noise_rng = split_rngs(seed)
    paths = true_paths(bs, p, scatterers, gain_rng)
    if mode == "true-geometry" or not paths:
        return paths
    H = add_awgn(synth_channel(paths, rf), rf.snr_db, noise_rng)
    return estimate_paths(H, dict_cfg, max_paths=max_paths, peak_threshold_rel=peak_threshold_rel)


def build_ckm(
    scenario,
    rf: Optional[RfConfig] = None,
    dict_cfg: Optional[DictConfig] = None,
    mode: Optional[str] = None,
    *,
    scatterers=None,
    seed: int = 0,
    n_jobs: int = 1,
) -> Ckm:
    """Traverse the UE-region lattice and record each node's path signature.

    ``true-geometry`` stores the exact single-bounce parameters of every
    scatterer; ``estimated`` simulates the uplink channel at the node (at
    ``rf.snr_db``) and stores what the path estimator extracts. Node ``k``
    uses the seed ``SeedSequence(seed, spawn_key=(1, k))``.
    """
    from .config import resolve_prior_scatterers

    rf = rf or scenario.offline_rf
    dict_cfg = dict_cfg or scenario.dict_cfg
    mode = mode or scenario.ckm_mode
    if mode not in ("estimated", "true-geometry"):
        raise ValueError(f"unknown CKM mode {mode!r}")
    if scatterers is None:
        scatterers = resolve_prior_scatterers(scenario, seed)
    scatterers = np.asarray(scatterers, dtype=float).reshape(-1, 2)
    bs = as_point(scenario.bs)
    xs, ys = scenario.grid_axes()
    nodes = [((ix, iy), np.array([x, y])) for ix, x in enumerate(xs) for iy, y in enumerate(ys)]
    seeds = [np.random.SeedSequence(seed, spawn_key=(1, k)) for k in range(len(nodes))]
    args = (rf, dict_cfg)
    extra = (scenario.max_paths, scenario.peak_threshold_rel)

    if n_jobs == 1:
        path_lists = [_node_paths(mode, bs, p, scatterers, *args, s, *extra) for (_, p), s in zip(nodes, seeds)]
    else:
        from joblib import Parallel, delayed

        path_lists = Parallel(n_jobs=n_jobs)(
            delayed(_node_paths)(mode, bs, p, scatterers, *args, s, *extra) for (_, p), s in zip(nodes, seeds)
        )
    entries = [derive_entry(idx, p, paths, bs) for (idx, p), paths in zip(nodes, path_lists)]
    empty = sum(e.n_paths == 0 for e in entries)
    if empty:
        logger.warning("%d CKM nodes have no usable path and are excluded from matching", empty)
    return Ckm(
        bs=bs,
        origin=np.array([xs[0], ys[0]]),
        spacing=scenario.grid_spacing,
        shape=(len(xs), len(ys)),
        entries=entries,
        mode=mode,
        prior_scatterers=scatterers,
    )


def _path_to_json(p: PathParam):
    if p.gain is None:
        return [p.aoa, p.toa]
    return [p.aoa, p.toa, p.gain.real, p.gain.imag]


def ckm_to_dict(ckm: Ckm) -> dict:
    return {
        "format": CKM_FORMAT,
        "version": CKM_VERSION,
        "bs": ckm.bs.tolist(),
        "grid": {"origin": ckm.origin.tolist(), "spacing": ckm.spacing, "shape": list(ckm.shape)},
        "mode": ckm.mode,
        "prior_scatterers": None if ckm.prior_scatterers is None else np.asarray(ckm.prior_scatterers).tolist(),
        "entries": [
            {
                "index": list(e.index),
                "location": e.location.tolist(),
                "paths": [_path_to_json(p) for p in e.paths],
                "scatterers": e.scatterers.tolist(),
            }
            for e in ckm.entries
        ],
    }


def save_ckm(ckm: Ckm, path) -> None:
    Path(path).write_text(json.dumps(ckm_to_dict(ckm), allow_nan=False))


def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise CkmFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def _path_from_json(raw, where) -> PathParam:
    if not isinstance(raw, list) or len(raw) not in (2, 4):
        raise CkmFormatError(f"{where}: a path is [aoa, toa] or [aoa, toa, gain_re, gain_im]")
    try:
        vals = [float(v) for v in raw]
        gain = complex(vals[2], vals[3]) if len(vals) == 4 else None
        return PathParam(vals[0], vals[1], gain)
    except (TypeError, ValueError) as exc:
        raise CkmFormatError(f"{where}: {exc}") from None


def ckm_from_dict(data, source: str = "<ckm>") -> Ckm:
    if not isinstance(data, dict):
        raise CkmFormatError(f"{source}: top level must be an object")
    if data.get("format") != CKM_FORMAT:
        raise CkmFormatError(f"{source}: not a CKM file (format={data.get('format')!r})")
    version = data.get("version")
    if version != CKM_VERSION:
        raise CkmFormatError(f"{source}: unsupported CKM version {version!r} (expected {CKM_VERSION})")
    grid = _require(data, "grid", source)
    entries = []
    for k, raw in enumerate(_require(data, "entries", source)):
        where = f"{source}: entries[{k}]"
        paths = [_path_from_json(p, f"{where}.paths[{j}]") for j, p in enumerate(_require(raw, "paths", where))]
        scat = np.array(_require(raw, "scatterers", where), dtype=float).reshape(-1, 2)
        if len(scat) != len(paths):
            raise CkmFormatError(f"{where}: {len(paths)} paths but {len(scat)} scatterers")
        entries.append(
            CkmEntry(
                index=tuple(int(i) for i in _require(raw, "index", where)),
                location=np.array(_require(raw, "location", where), dtype=float),
                paths=paths,
                scatterers=scat,
            )
        )
    prior = data.get("prior_scatterers")
    try:
        return Ckm(
            bs=_require(data, "bs", source),
            origin=_require(grid, "origin", f"{source}: grid"),
            spacing=float(_require(grid, "spacing", f"{source}: grid")),
            shape=tuple(int(v) for v in _require(grid, "shape", f"{source}: grid")),
            entries=entries,
            mode=data.get("mode", "samples"),
            prior_scatterers=None if prior is None else np.array(prior, dtype=float).reshape(-1, 2),
        )
    except ValueError as exc:
        raise CkmFormatError(f"{source}: {exc}") from None


def load_ckm(path) -> Ckm:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CkmFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return ckm_from_dict(data, str(path))
