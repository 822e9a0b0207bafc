"""Realizing finite metric spaces inside the supported normed spaces.

Includes the two five-point configurations ``U`` (for ``1 < p < 2``) and ``V``
(for ``p > 2``), the Frechet embedding into ``l_inf``, the distortion of a map,
and multi-start simplex searches for low-distortion embeddings and for pairs
solving the isometry equations.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from .exceptions import DomainError, InvalidInputError
from .optimize import nelder_mead_batch, start_rng, thread_cap
from .spaces import FamilyKind, FiniteVector, SpaceSpec, as_vector, luxemburg_norms, parse_space

__all__ = [
    "DistanceMatrix",
    "PointConfig",
    "EmbedResult",
    "ResidualResult",
    "config_U",
    "config_V",
    "frechet_embed",
    "distortion",
    "pairwise_distances",
    "optimize_embedding",
    "minimize_isometry_residual",
    "isometry_residuals",
    "FiniteMetricEmbedder",
]

METRIC_ATOL = 1e-12
BARRIER = 1e6
DEFAULT_TEMPERATURES = (1e-1, 1e-2, 1e-3)


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidInputError(f"distance matrix must be square, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidInputError("distances must be finite")
        scale = max(1.0, float(np.abs(d).max(initial=0.0)))
        tol = METRIC_ATOL * scale
        if np.any(d < -tol):
            raise InvalidInputError("distances must be nonnegative")
        if np.any(np.abs(np.diag(d)) > tol):
            raise InvalidInputError("distance matrix must have a zero diagonal")
        if np.any(np.abs(d - d.T) > tol):
            raise InvalidInputError("distance matrix must be symmetric")
        # d[i, j] <= d[i, k] + d[k, j] for all k
        if np.any(d[:, None, :] > d[:, :, None] + d[None, :, :] + tol):
            raise InvalidInputError("distance matrix violates the triangle inequality")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        labels = tuple(str(s) for s in self.labels)
        if labels and len(labels) != d.shape[0]:
            raise InvalidInputError("one label per point expected")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def to_json(self) -> dict:
        out = {"n": self.n, "d": self.d.tolist()}
        if self.labels:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_json(cls, obj) -> "DistanceMatrix":
        if not isinstance(obj, dict) or "d" not in obj:
            raise InvalidInputError('distance JSON must be an object with a "d" field')
        try:
            d = np.asarray(obj["d"], dtype=float)
        except (TypeError, ValueError):
            raise InvalidInputError("distance rows must be numeric and equal length") from None
        if "n" in obj and (d.ndim != 2 or obj["n"] != d.shape[0]):
            raise InvalidInputError(f'"n"={obj["n"]} does not match the matrix')
        return cls(d, tuple(obj.get("labels", ())))

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
        try:
            d = np.array([[float(c) for c in r] for r in rows], dtype=float)
        except ValueError as exc:
            raise InvalidInputError(f"malformed CSV distance matrix: {exc}") from None
        if d.ndim != 2:
            raise InvalidInputError("CSV rows must have equal length")
        return cls(d)

    @classmethod
    def load(cls, path) -> "DistanceMatrix":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InvalidInputError(f"cannot read {path}: {exc}") from None
        if path.suffix.lower() == ".csv":
            return cls.from_csv(text)
        try:
            return cls.from_json(json.loads(text))
        except json.JSONDecodeError:
            if path.suffix.lower() == ".json":
                raise InvalidInputError(f"{path} is not valid JSON") from None
            return cls.from_csv(text)


@dataclass(frozen=True)
class PointConfig:
    """``n`` points as rows of a dense array; column ``j`` is coordinate ``j + 1``."""

    coords: np.ndarray
    space: SpaceSpec
    gauge: int = 0
    labels: tuple = ()

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 2:
            raise InvalidInputError(f"coordinates must be 2-d, got shape {c.shape}")
        if not 0 <= self.gauge < c.shape[0]:
            raise InvalidInputError(f"gauge index {self.gauge} out of range")
        if np.any(c[self.gauge] != 0):
            raise InvalidInputError("the gauge point must sit at the origin")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def points(self) -> list:
        return [FiniteVector.from_dense(row) for row in self.coords]

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "gauge": self.gauge,
            "labels": list(self.labels),
            "coords": self.coords.tolist(),
        }


def _pairs(n: int):
    i, j = np.triu_indices(n, k=1)
    return i, j


def pairwise_distances(config: PointConfig) -> np.ndarray:
    n = config.n
    i, j = _pairs(n)
    dists = luxemburg_norms(config.space, config.coords[i] - config.coords[j])
    out = np.zeros((n, n))
    out[i, j] = out[j, i] = dists
    return out


def _check_metric(D) -> DistanceMatrix:
    if isinstance(D, DistanceMatrix):
        return D
    return DistanceMatrix(np.asarray(D, dtype=float))


def per_pair_ratios(config: PointConfig, D: DistanceMatrix) -> np.ndarray:
    """``||f_i - f_j|| / D_ij`` off the diagonal, NaN on it."""
    D = _check_metric(D)
    if config.n != D.n:
        raise InvalidInputError(f"config has {config.n} points, matrix has {D.n}")
    off = ~np.eye(D.n, dtype=bool)
    if np.any(D.d[off] <= 0):
        raise InvalidInputError("distortion needs distinct points (positive off-diagonal distances)")
    ratios = np.full((D.n, D.n), np.nan)
    ratios[off] = pairwise_distances(config)[off] / D.d[off]
    return ratios


def distortion(config: PointConfig, D) -> float:
    """``max(expansion) * max(contraction)`` over pairs; ``inf`` if a pair collapses."""
    ratios = per_pair_ratios(config, D)
    vals = ratios[~np.isnan(ratios)]
    if vals.size == 0:
        return 1.0
    if np.any(vals <= 0):
        return math.inf
    return float(vals.max() / vals.min())


def config_U(p: float):
    """The set ``{e1, e2, -e1, -e2, 0}`` of ``l_p`` for ``1 < p < 2``."""
    p = float(p)
    if not 1 < p < 2:
        raise DomainError(f"U is used for 1 < p < 2, got {p}")
    coords = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]])
    labels = ("e1", "e2", "-e1", "-e2", "0")
    return _five_point(coords, labels, SpaceSpec.lp(p), cross=2.0 ** (1.0 / p))


def config_V(p: float):
    """``{+-2^(-1/p)(e1 + e2), +-2^(-1/p)(e1 - e2), 0}`` of ``l_p`` for ``p > 2``."""
    p = float(p)
    if not (2 < p < math.inf):
        raise DomainError(f"V is used for 2 < p < inf, got {p}")
    c = 2.0 ** (-1.0 / p)
    coords = np.array([[c, c], [c, -c], [-c, -c], [-c, c], [0.0, 0.0]])
    labels = ("s", "d", "-s", "-d", "0")
    return _five_point(coords, labels, SpaceSpec.lp(p), cross=2.0 ** (1.0 - 1.0 / p))


def _five_point(coords, labels, space, cross):
    # order (x, y, -x, -y, 0): |x| = |y| = 1, antipodes at 2, x vs +-y at `cross`
    d = np.array(
        [
            [0.0, cross, 2.0, cross, 1.0],
            [cross, 0.0, cross, 2.0, 1.0],
            [2.0, cross, 0.0, cross, 1.0],
            [cross, 2.0, cross, 0.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 0.0],
        ]
    )
    return PointConfig(coords, space, gauge=4, labels=labels), DistanceMatrix(d, labels)


def frechet_embed(D, gauge: int = 0) -> PointConfig:
    """Point ``i`` goes to ``(D[i, 0], ..., D[i, n-1])`` in ``l_inf``, shifted so the gauge point is 0."""
    D = _check_metric(D)
    coords = D.d - D.d[gauge]
    return PointConfig(coords, SpaceSpec.lp(math.inf), gauge=gauge, labels=D.labels)


@dataclass
class EmbedResult:
    config: PointConfig
    distortion: float
    per_pair_ratios: np.ndarray
    starts_used: int
    seed: int
    converged: bool
    iterations: int
    start_index: int
    start_distortions: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        ratios = np.where(np.isnan(self.per_pair_ratios), None, self.per_pair_ratios)
        return {
            "distortion": self.distortion,
            "config": self.config.to_json(),
            "per_pair_ratios": ratios.tolist(),
            "starts_used": self.starts_used,
            "best_start": self.start_index,
            "seed": self.seed,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _smooth_max(z: np.ndarray, temperature: float) -> np.ndarray:
    if temperature <= 0:
        return z.max(axis=1)
    return temperature * logsumexp(z / temperature, axis=1)


def _staged_search(fun_for_t, x0, temperatures, max_iters, tol, step, restarts):
    """Run the simplex search at each temperature, warm-starting from the last stage.

    Each round starts from the best vertex of the previous one with a simplex
    ten times smaller (floored at 1e-6); the last stage gets ``restarts``
    extra rounds.
    """
    x = x0
    total_iters = np.zeros(len(x0), dtype=int)
    converged = np.zeros(len(x0), dtype=bool)
    stages = list(temperatures)
    for k, t in enumerate(stages):
        rounds = 1 + (restarts if k == len(stages) - 1 else 0)
        for _ in range(rounds):
            res = nelder_mead_batch(
                fun_for_t(t), x, step=step, max_iters=max_iters, xatol=tol, fatol=tol
            )
            x = res.x
            total_iters += res.iterations
            converged = res.converged
            step = max(step * 0.1, 1e-6)
    return x, total_iters, converged


def _run_starts(fun_for_t, x0, temperatures, max_iters, tol, restarts):
    """Split the starts into contiguous chunks, one per worker, and rejoin in order.

    Starts never interact, so the result is the same for any worker count.
    """
    workers = max(1, min(thread_cap(), len(x0)))
    if workers == 1:
        return _staged_search(fun_for_t, x0, temperatures, max_iters, tol, 0.1, restarts)
    chunks = np.array_split(x0, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda c: _staged_search(fun_for_t, c, temperatures, max_iters, tol, 0.1, restarts),
                chunks,
            )
        )
    return tuple(np.concatenate([part[k] for part in parts]) for k in range(3))


def optimize_embedding(
    D,
    space,
    ambient_dim: int,
    starts: int = 20,
    seed: int = 0,
    max_iters: int = 3000,
    tol: float = 1e-10,
    temperatures=DEFAULT_TEMPERATURES,
    restarts: int = 3,
    gauge: int | None = None,
) -> EmbedResult:
    """Multi-start search for a low-distortion image of ``D`` in ``space``.

    Minimizes ``log(max ratio) - log(min ratio)`` with the two extrema replaced
    by softmax at a decreasing temperature (0 means the exact maximum).  When
    an isometry exists it minimizes the smoothed objective at every
    temperature, so the default schedule stops at 1e-3, below which the
    simplex search stalls.  The gauge point is pinned at the origin; start ``k`` is
    initialized uniformly in ``[-1, 1]`` from its own generator seeded by
    ``(seed, k)``.  The winner is the start with the smallest exact distortion,
    ties broken by start index.

    ``gauge`` is the point pinned at the origin; by default the point labelled
    ``"0"`` if there is one, else point 0.
    """
    D = _check_metric(D)
    space = parse_space(space)
    ambient_dim = int(ambient_dim)
    if ambient_dim < 1 or starts < 1:
        raise InvalidInputError("ambient_dim and starts must be positive")
    n = D.n
    if n < 2:
        raise InvalidInputError("need at least two points")
    if gauge is None:
        gauge = D.labels.index("0") if "0" in D.labels else 0
    if not 0 <= gauge < n:
        raise InvalidInputError(f"gauge index {gauge} out of range")
    free = [k for k in range(n) if k != gauge]
    iu, ju = _pairs(n)
    target = D.d[iu, ju]
    if np.any(target <= 0):
        raise InvalidInputError("distortion needs distinct points (positive off-diagonal distances)")
    log_target = np.log(target)
    m = len(free) * ambient_dim

    def configs(X):
        full = np.zeros((X.shape[0], n, ambient_dim))
        full[:, free] = X.reshape(X.shape[0], len(free), ambient_dim)
        return full

    def log_ratios(X):
        full = configs(X)
        diffs = (full[:, iu] - full[:, ju]).reshape(-1, ambient_dim)
        dist = luxemburg_norms(space, diffs, method="newton").reshape(X.shape[0], len(iu))
        with np.errstate(divide="ignore"):
            return np.log(dist) - log_target, dist

    def fun_for_t(t):
        def f(X):
            lr, dist = log_ratios(X)
            scale = np.max(dist, axis=1, keepdims=True)
            bad = np.any(dist <= 1e-12 * np.maximum(scale, 1e-300), axis=1)
            lr = np.where(bad[:, None], 0.0, lr)
            out = _smooth_max(lr, t) + _smooth_max(-lr, t)
            return np.where(bad, BARRIER, out)

        return f

    x0 = np.stack([start_rng(seed, k).uniform(-1.0, 1.0, m) for k in range(starts)])
    x, iters, conv = _run_starts(fun_for_t, x0, temperatures, max_iters, tol, restarts)
    lr, dist = log_ratios(x)
    with np.errstate(invalid="ignore"):
        dists = np.where(np.all(dist > 0, axis=1), np.exp(lr.max(axis=1) - lr.min(axis=1)), np.inf)
    best = int(np.argmin(dists))
    config = PointConfig(configs(x[best : best + 1])[0], space, gauge=gauge, labels=D.labels)
    ratios = per_pair_ratios(config, D)
    return EmbedResult(
        config=config,
        distortion=distortion(config, D),
        per_pair_ratios=ratios,
        starts_used=starts,
        seed=int(seed),
        converged=bool(conv[best]),
        iterations=int(iters[best]),
        start_index=best,
        start_distortions=dists,
    )


def _targets(branch: str, space: SpaceSpec) -> float:
    if branch == "p_lt_2":
        if space.kind is not FamilyKind.ORLICZ_PR:
            raise DomainError("branch p_lt_2 needs an orlicz space")
        return 2.0 ** (1.0 / space.p)
    if branch == "p_gt_2":
        if space.kind is not FamilyKind.MODULAR_PPI:
            raise DomainError("branch p_gt_2 needs a modular space")
        return 2.0 ** (1.0 - 1.0 / space.p)
    raise DomainError(f"unknown branch {branch!r}")


def isometry_residuals(branch: str, space, x, y) -> np.ndarray:
    """``(|x| - 1, |y| - 1, |x + y| - t, |x - y| - t)`` with the branch's target ``t``."""
    space = parse_space(space)
    target = _targets(branch, space)
    x, y = as_vector(x), as_vector(y)
    dim = max(x.dim, y.dim, 1)
    x, y = x.to_dense(dim), y.to_dense(dim)
    norms = luxemburg_norms(space, np.stack([x, y, x + y, x - y]))
    return norms - np.array([1.0, 1.0, target, target])


@dataclass
class ResidualResult:
    branch: str
    x: np.ndarray
    y: np.ndarray
    max_residual: float
    residuals: np.ndarray
    ambient_dim: int
    starts: int
    seed: int
    start_values: np.ndarray = field(repr=False, default=None)

    @property
    def pair(self):
        return FiniteVector.from_dense(self.x), FiniteVector.from_dense(self.y)

    def to_json(self) -> dict:
        return {
            "branch": self.branch,
            "ambient_dim": self.ambient_dim,
            "max_residual": self.max_residual,
            "residuals": self.residuals.tolist(),
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "starts": self.starts,
            "seed": self.seed,
        }


def minimize_isometry_residual(
    branch: str,
    space,
    ambient_dim: int,
    starts: int = 20,
    seed: int = 0,
    max_iters: int = 3000,
    tol: float = 1e-10,
    temperatures=DEFAULT_TEMPERATURES,
    restarts: int = 3,
) -> ResidualResult:
    """Best pair ``(x, y)`` in coordinates ``1..ambient_dim`` for the isometry equations.

    The images of ``0``, ``-x``, ``-y`` are fixed to ``0``, ``-x``, ``-y``
    (translation gauge plus uniqueness of midpoints in a strictly convex
    space), leaving ``2 * ambient_dim`` free coordinates.  The returned
    ``max_residual`` upper-bounds the per-dimension infimum.
    """
    space = parse_space(space)
    target = _targets(branch, space)
    ambient_dim = int(ambient_dim)
    if ambient_dim < 1 or starts < 1:
        raise InvalidInputError("ambient_dim and starts must be positive")
    goal = np.array([1.0, 1.0, target, target])

    def abs_residuals(X):
        x, y = X[:, :ambient_dim], X[:, ambient_dim:]
        rows = np.stack([x, y, x + y, x - y], axis=1).reshape(-1, ambient_dim)
        norms = luxemburg_norms(space, rows, method="newton").reshape(X.shape[0], 4)
        return np.abs(norms - goal)

    def fun_for_t(t):
        return lambda X: _smooth_max(abs_residuals(X), t)

    x0 = np.stack([start_rng(seed, k).uniform(-1.0, 1.0, 2 * ambient_dim) for k in range(starts)])
    X, _, _ = _run_starts(fun_for_t, x0, temperatures, max_iters, tol, restarts)
    vals = abs_residuals(X).max(axis=1)
    best = int(np.argmin(vals))
    x, y = X[best, :ambient_dim].copy(), X[best, ambient_dim:].copy()
    res = isometry_residuals(branch, space, x, y)
    return ResidualResult(
        branch=branch,
        x=x,
        y=y,
        max_residual=float(np.abs(res).max()),
        residuals=res,
        ambient_dim=ambient_dim,
        starts=int(starts),
        seed=int(seed),
        start_values=vals,
    )


class FiniteMetricEmbedder(BaseEstimator):
    """Low-distortion embedding of a precomputed distance matrix.

    Parameters
    ----------
    space : SpaceSpec or str
        Target space (``"lp:1.5"``, ``"orlicz:1.5,1.75"``, JSON, ...).
    n_components : int
        Ambient dimension of the image.
    n_starts : int
        Number of random starts.
    random_state : int
        Master seed; start ``k`` uses a generator derived from ``(random_state, k)``.
    max_iter : int
        Simplex iterations per stage.
    tol : float
        Simplex size tolerance.

    Attributes
    ----------
    embedding_ : ndarray of shape (n_points, n_components)
    distortion_ : float
    per_pair_ratios_ : ndarray of shape (n_points, n_points)
    result_ : EmbedResult
    """

    def __init__(self, space="lp:2", n_components=2, n_starts=20, random_state=0, max_iter=4000, tol=1e-10):
        self.space = space
        self.n_components = n_components
        self.n_starts = n_starts
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        if isinstance(X, DistanceMatrix):
            D = X
        else:
            D = DistanceMatrix(check_array(X, dtype=float))
        if not isinstance(self.random_state, (int, np.integer)):
            raise InvalidInputError("random_state must be an integer seed")
        result = optimize_embedding(
            D,
            parse_space(self.space),
            self.n_components,
            starts=self.n_starts,
            seed=int(self.random_state),
            max_iters=self.max_iter,
            tol=self.tol,
        )
        self.result_ = result
        self.embedding_ = np.array(result.config.coords)
        self.distortion_ = result.distortion
        self.per_pair_ratios_ = result.per_pair_ratios
        self.n_iter_ = result.iterations
        self.n_features_in_ = D.n
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_
