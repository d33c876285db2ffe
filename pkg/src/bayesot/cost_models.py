"""Stochastic cost ensembles: hierarchical location models, profile costs, files.

A hierarchical model attaches a location distribution to every source and
target atom; each ensemble member draws one location per atom and evaluates
the ground cost between them.

Ensemble files come in two formats.  JSON holds ``{"n", "m", "samples"}``
with ``samples`` a list of row-major ``n x m`` nested lists.  CSV has the
header ``sample,i,j,value`` with zero-based indices, one row per entry.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .posterior import CostEnsemble

GROUND_COSTS = ("squared_euclidean", "euclidean")
FORMATS = ("json", "csv")


class EnsembleFormatError(ValueError):
    pass


# -- atom samplers -----------------------------------------------------------

class AtomSampler:
    dim: int

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PointMass(AtomSampler):
    location: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        if loc.ndim != 1 or not np.all(np.isfinite(loc)):
            raise ValueError("point mass location must be a finite vector")
        object.__setattr__(self, "location", loc)

    @property
    def dim(self):
        return self.location.size

    def draw(self, rng, size):
        return np.broadcast_to(self.location, (size, self.dim)).copy()


@dataclass(frozen=True, eq=False)
class Empirical(AtomSampler):
    """Uniform choice among a fixed list of points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0 or not np.all(np.isfinite(pts)):
            raise ValueError("empirical sampler needs a nonempty 2-d array of finite points")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    def draw(self, rng, size):
        return self.points[rng.integers(0, self.points.shape[0], size=size)]


@dataclass(frozen=True, eq=False)
class Gaussian(AtomSampler):
    """Isotropic normal with standard deviation ``scale``."""

    mean: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise ValueError("gaussian mean must be a finite vector")
        if not self.scale >= 0:
            raise ValueError("gaussian scale must be nonnegative")
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self):
        return self.mean.size

    def draw(self, rng, size):
        return self.mean + self.scale * rng.standard_normal((size, self.dim))


@dataclass(frozen=True, eq=False)
class HierarchicalModel:
    source_atoms: tuple
    target_atoms: tuple
    ground_cost: str = "squared_euclidean"

    def __post_init__(self):
        src, tgt = tuple(self.source_atoms), tuple(self.target_atoms)
        if not src or not tgt:
            raise ValueError("model needs at least one source and one target atom")
        if self.ground_cost not in GROUND_COSTS:
            raise ValueError(f"ground_cost must be one of {GROUND_COSTS}")
        dims = {a.dim for a in src + tgt}
        if len(dims) != 1:
            raise ValueError(f"atoms disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "source_atoms", src)
        object.__setattr__(self, "target_atoms", tgt)

    @property
    def shape(self):
        return len(self.source_atoms), len(self.target_atoms)

    @property
    def dim(self):
        return self.source_atoms[0].dim


def _atom_rng(seed, side, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(side, index)))


def sample_cost(model: HierarchicalModel, n_samples: int, seed: int = 0,
                paired: bool = False) -> CostEnsemble:
    """Draw ``n_samples`` cost matrices from ``model``.

    Each atom has its own random stream keyed by side and index.  With
    ``paired=True`` source and target atom ``i`` share a stream, so identical
    source and target models give symmetric matrices.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    xs = np.stack([a.draw(_atom_rng(seed, 0, i), n_samples)
                   for i, a in enumerate(model.source_atoms)], axis=1)
    tside = 0 if paired else 1
    ys = np.stack([a.draw(_atom_rng(seed, tside, j), n_samples)
                   for j, a in enumerate(model.target_atoms)], axis=1)
    diff = xs[:, :, None, :] - ys[:, None, :, :]
    sq = np.einsum("kijd,kijd->kij", diff, diff)
    costs = sq if model.ground_cost == "squared_euclidean" else np.sqrt(sq)
    return CostEnsemble(costs)


def profile_cost(profiles_p, profiles_e, gamma: float = 10.0) -> np.ndarray:
    """``C_ij = sqrt(2 - 2 exp(-gamma * ||p_i - e_j||))`` between two profile sets."""
    p = np.atleast_2d(np.asarray(profiles_p, dtype=float))
    e = np.atleast_2d(np.asarray(profiles_e, dtype=float))
    if p.shape[1] != e.shape[1]:
        raise ValueError(f"profile dimensions differ: {p.shape[1]} vs {e.shape[1]}")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    dist = np.sqrt(((p[:, None, :] - e[None, :, :]) ** 2).sum(axis=-1))
    # 1 - exp(-x) via expm1 keeps precision for near-identical profiles
    return np.sqrt(-2.0 * np.expm1(-gamma * dist))


# -- files -------------------------------------------------------------------

def _format_of(path, fmt):
    if fmt is None:
        fmt = Path(path).suffix.lstrip(".").lower() or "json"
    if fmt not in FORMATS:
        raise ValueError(f"unknown ensemble format {fmt!r}; expected one of {FORMATS}")
    return fmt


def ensemble_from_json(data) -> CostEnsemble:
    if not isinstance(data, dict):
        raise EnsembleFormatError("ensemble JSON must be an object with n, m and samples")
    for key in ("n", "m", "samples"):
        if key not in data:
            raise EnsembleFormatError(f"ensemble JSON lacks field {key!r}")
    n, m, samples = data["n"], data["m"], data["samples"]
    if not (isinstance(n, int) and isinstance(m, int)) or n < 1 or m < 1:
        raise EnsembleFormatError("n and m must be positive integers")
    if not isinstance(samples, list) or not samples:
        raise EnsembleFormatError("ensemble must contain at least one sample")
    out = np.empty((len(samples), n, m))
    for k, s in enumerate(samples):
        try:
            arr = np.asarray(s, dtype=float)
        except (TypeError, ValueError):
            raise EnsembleFormatError(f"sample {k}: entries are not numbers") from None
        if arr.shape != (n, m):
            raise EnsembleFormatError(f"sample {k} has shape {arr.shape}, expected ({n}, {m})")
        if not np.all(np.isfinite(arr)):
            raise EnsembleFormatError(f"sample {k}: entries must be finite")
        if np.any(arr < 0):
            raise EnsembleFormatError(f"sample {k}: entries must be nonnegative")
        out[k] = arr
    return CostEnsemble(out)


def ensemble_to_json(ensemble: CostEnsemble) -> dict:
    n, m = ensemble.shape
    return {"n": n, "m": m, "samples": ensemble.samples.tolist()}


def _read_csv(path) -> CostEnsemble:
    entries = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EnsembleFormatError("ensemble must contain at least one sample")
        if [h.strip() for h in header] != ["sample", "i", "j", "value"]:
            raise EnsembleFormatError("line 1: expected header sample,i,j,value")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise EnsembleFormatError(f"line {line}: expected 4 fields, got {len(row)}")
            try:
                k, i, j = (int(c) for c in row[:3])
                v = float(row[3])
            except ValueError:
                raise EnsembleFormatError(f"line {line}: could not parse {row!r}") from None
            if min(k, i, j) < 0:
                raise EnsembleFormatError(f"line {line}: indices must be nonnegative")
            if not math.isfinite(v) or v < 0:
                raise EnsembleFormatError(f"line {line}: value must be finite and nonnegative")
            if (k, i, j) in entries:
                raise EnsembleFormatError(f"line {line}: duplicate entry ({k}, {i}, {j})")
            entries[(k, i, j)] = v
    if not entries:
        raise EnsembleFormatError("ensemble must contain at least one sample")
    by_sample = {}
    for (k, i, j), v in entries.items():
        by_sample.setdefault(k, {})[(i, j)] = v
    ks = sorted(by_sample)
    if ks != list(range(len(ks))):
        missing = next(x for x in range(len(ks) + 1) if x not in by_sample)
        raise EnsembleFormatError(f"sample {missing} is missing")
    first = by_sample[0]
    n = 1 + max(i for i, _ in first)
    m = 1 + max(j for _, j in first)
    out = np.empty((len(ks), n, m))
    for k in ks:
        cells = by_sample[k]
        if len(cells) != n * m or any(not (i < n and j < m) for i, j in cells):
            sn = 1 + max(i for i, _ in cells)
            sm = 1 + max(j for _, j in cells)
            raise EnsembleFormatError(
                f"sample {k} has shape ({sn}, {sm}) with {len(cells)} entries, expected ({n}, {m})"
            )
        for (i, j), v in cells.items():
            out[k, i, j] = v
    return CostEnsemble(out)


def load_ensemble(path, fmt: str | None = None) -> CostEnsemble:
    """Read an ensemble; the format defaults to the file extension."""
    fmt = _format_of(path, fmt)
    if fmt == "csv":
        return _read_csv(path)
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EnsembleFormatError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    return ensemble_from_json(data)


def save_ensemble(ensemble: CostEnsemble, path, fmt: str | None = None) -> None:
    fmt = _format_of(path, fmt)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(ensemble_to_json(ensemble), fh)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "i", "j", "value"])
        for k, c in enumerate(ensemble.samples):
            for (i, j), v in np.ndenumerate(c):
                w.writerow([k, i, j, repr(float(v))])
