"""Two-stage k-means regime detection with fuzzy membership probabilities.

Stage 1 splits the months in two with Euclidean k-means; the smaller cluster
holds the outlier months and becomes Regime 0.  Stage 2 clusters the typical
months by direction (spherical k-means) into Regimes 1..r.  Distances to the
centroids of both stages are turned into a single probability vector over
Regimes 0..r.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateError, DomainError, NumericalError, ShapeError
from .ingest import FactorPanel

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterFit",
    "RegimeModel",
    "GmmFit",
    "pairwise_distances",
    "kmeans",
    "elbow_k",
    "fit_regimes",
    "membership_from_distances",
    "membership_probabilities",
    "combine_distributions",
    "classify",
    "classify_many",
    "hard_labels",
    "match_clusters",
    "relabel",
    "fit_gmm",
    "crisis_probability",
    "gmm_crisis_component",
    "regime_profile",
]

DISTANCE_KINDS = ("euclidean", "cosine")
MODEL_FORMAT = "regime_taa.regime_model"
MODEL_VERSION = 1
R0_CLAMP = 1e-9
# two-way splits of at most this many rows are also searched exhaustively
EXACT_SPLIT_MAX_ROWS = 12


@dataclass
class ClusterFit:
    """Result of a k-means run.

    For ``distance_kind="cosine"`` the centroids are unit vectors and
    ``inertia`` is the summed squared chord distance ``||x/|x| - c||^2``,
    which equals twice the summed cosine distance.
    """

    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    distance_kind: str
    seed: int
    n_iter: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)

    def to_dict(self) -> dict:
        return {
            "centroids": self.centroids.tolist(),
            "distance_kind": self.distance_kind,
            "seed": int(self.seed),
            "inertia": float(self.inertia),
        }


@dataclass
class RegimeModel:
    """Fitted two-stage regime model (Regime 0 plus ``r`` typical regimes)."""

    stage1: ClusterFit
    outlier_cluster: int
    stage2: ClusterFit
    r: int

    @property
    def n_regimes(self) -> int:
        return self.r + 1

    @property
    def outlier_centroid(self) -> np.ndarray:
        return self.stage1.centroids[self.outlier_cluster]

    @property
    def typical_centroid(self) -> np.ndarray:
        return self.stage1.centroids[1 - self.outlier_cluster]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "r": int(self.r),
            "outlier_cluster": int(self.outlier_cluster),
            "stage1": self.stage1.to_dict(),
            "stage2": self.stage2.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "RegimeModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ConfigError("not a regime model document")
        if doc.get("version") != MODEL_VERSION:
            raise ConfigError(f"unsupported regime model version {doc.get('version')}")

        def _fit(d):
            c = np.asarray(d["centroids"], dtype=float)
            return ClusterFit(c, np.zeros(0, dtype=int), d["inertia"], d["distance_kind"], d["seed"])

        return cls(_fit(doc["stage1"]), doc["outlier_cluster"], _fit(doc["stage2"]), doc["r"])

    @classmethod
    def from_json(cls, text: str) -> "RegimeModel":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------- k-means


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, FactorPanel):
        X = X.factors
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError("expected a 2-D row matrix")
    return X


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise DomainError("cosine distance is undefined for zero-norm rows")
    return X / norms[:, None]


def _sq_dist(X: np.ndarray, C: np.ndarray, kind: str) -> np.ndarray:
    """Squared Euclidean distances; for cosine, X and C must already be unit rows."""
    if kind == "cosine":
        return np.clip(2.0 - 2.0 * (X @ C.T), 0.0, 4.0)
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pairwise_distances(X, C, kind: str = "euclidean") -> np.ndarray:
    """Distance matrix between rows of ``X`` and centroids ``C``.

    Euclidean distance, or cosine distance ``1 - cos(x, c)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if X.shape[1] != C.shape[1]:
        raise ShapeError(f"dimension mismatch: {X.shape[1]} vs {C.shape[1]}")
    if kind == "cosine":
        return np.clip(1.0 - _unit_rows(X) @ _unit_rows(C).T, 0.0, 2.0)
    if kind == "euclidean":
        return np.sqrt(_sq_dist(X, C, "euclidean"))
    raise ConfigError(f"unknown distance kind {kind!r}")


def _update_centroids(X, assign, C_old, kind):
    C = C_old.copy()
    for j in range(C.shape[0]):
        members = X[assign == j]
        if len(members) == 0:
            continue
        if kind == "cosine":
            s = members.sum(axis=0)
            n = np.linalg.norm(s)
            if n > 0:
                C[j] = s / n
        else:
            C[j] = members.mean(axis=0)
    return C


def _objective(X, assign, C, kind) -> float:
    d2 = _sq_dist(X, C, kind)
    return float(d2[np.arange(len(X)), assign].sum())


def _fill_empty(X, assign, C, kind):
    """Give each empty cluster the point farthest from its own centroid."""
    k = C.shape[0]
    for j in range(k):
        sizes = np.bincount(assign, minlength=k)
        if sizes[j] > 0:
            continue
        d2 = _sq_dist(X, C, kind)[np.arange(len(X)), assign]
        d2[sizes[assign] <= 1] = -1.0
        i = int(np.argmax(d2))
        assign[i] = j
        C[j] = X[i]
    return assign, C


def _lloyd(X, C, kind, max_iter, history):
    assign = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = np.argmin(_sq_dist(X, C, kind), axis=1)
        new, C = _fill_empty(X, new, C, kind)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        C = _update_centroids(X, assign, C, kind)
        history.append(_objective(X, assign, C, kind))
    return assign, C, n_iter


def _hartigan(X, assign, kind) -> bool:
    """Single-point transfer pass; returns True if any point moved.

    Moves are taken only when they lower the objective, so the result is
    still a Lloyd fixpoint but escapes some of its poorer local optima.
    """
    k = int(assign.max()) + 1
    counts = np.bincount(assign, minlength=k).astype(float)
    sums = np.array([X[assign == j].sum(axis=0) for j in range(k)])
    moved = False
    tol = 1e-12 * max(1.0, float(np.sum(X * X)))
    for i in range(len(X)):
        a = assign[i]
        if counts[a] <= 1:
            continue
        x = X[i]
        if kind == "cosine":
            gain_out = np.linalg.norm(sums[a]) - np.linalg.norm(sums[a] - x)
            loss_in = np.linalg.norm(sums) - np.linalg.norm(sums + x, axis=1)
            delta = 2.0 * (gain_out + loss_in)
        else:
            ca = sums[a] / counts[a]
            removal = counts[a] / (counts[a] - 1) * np.sum((x - ca) ** 2)
            cb = sums / counts[:, None]
            addition = counts / (counts + 1) * np.sum((x - cb) ** 2, axis=1)
            delta = addition - removal
        delta[a] = 0.0
        b = int(np.argmin(delta))
        if delta[b] < -tol:
            sums[a] -= x
            sums[b] += x
            counts[a] -= 1
            counts[b] += 1
            assign[i] = b
            moved = True
    return moved


def _farthest_point_init(X, k, first, kind):
    chosen = [first]
    mind = _sq_dist(X, X[[first]], kind)[:, 0]
    for _ in range(1, k):
        cand = mind.copy()
        cand[chosen] = -1.0
        nxt = int(np.argmax(cand))
        if cand[nxt] <= 0:
            # all remaining rows duplicate a chosen one
            nxt = next(i for i in range(len(X)) if i not in chosen)
        chosen.append(nxt)
        mind = np.minimum(mind, _sq_dist(X, X[[nxt]], kind)[:, 0])
    return X[chosen].copy()


def _best_split(X, kind):
    """Global optimum of a two-cluster problem by enumerating every split."""
    n = X.shape[0]
    codes = np.arange(1, 2 ** (n - 1))
    # row 0 always sits in cluster 0, so each split is visited once
    masks = ((codes[:, None] >> np.arange(n - 1)[None, :]) & 1).astype(bool)
    masks = np.hstack([np.zeros((len(codes), 1), dtype=bool), masks])
    ones = masks.astype(float)
    s1 = ones @ X
    s0 = X.sum(axis=0) - s1
    if kind == "cosine":
        cost = 2.0 * n - 2.0 * (np.linalg.norm(s0, axis=1) + np.linalg.norm(s1, axis=1))
    else:
        n1 = ones.sum(axis=1)
        n0 = n - n1
        cost = float(np.sum(X * X)) - np.sum(s0**2, axis=1) / n0 - np.sum(s1**2, axis=1) / n1
    best = int(np.argmin(cost))
    return masks[best].astype(int)


def _run(X, C, kind, max_iter):
    history: list[float] = []
    assign, C, n_iter = _lloyd(X, C, kind, max_iter, history)
    for _ in range(max_iter):
        if not _hartigan(X, assign, kind):
            break
        C = _update_centroids(X, assign, C, kind)
        history.append(_objective(X, assign, C, kind))
        assign, C, extra = _lloyd(X, C, kind, max_iter, history)
        n_iter += extra
    return assign, C, n_iter, history


def kmeans(
    X,
    k: int,
    distance_kind: str = "euclidean",
    seed: int = 0,
    init=None,
    n_init: int = 10,
    max_iter: int = 300,
) -> ClusterFit:
    """Lloyd k-means with farthest-point seeding and single-point refinement.

    Two-cluster problems with at most ``EXACT_SPLIT_MAX_ROWS`` rows get one
    extra start at the centroids of the best split found by enumeration,
    so tiny problems reach the global optimum.

    Parameters
    ----------
    X : array (n, m)
        Rows to cluster.
    k : int
        Number of clusters, ``1 <= k <= n``.
    distance_kind : {"euclidean", "cosine"}
        Cosine mode is spherical k-means: rows and centroids are unit
        normalized and updated with Euclidean means projected on the sphere.
    seed : int
        Seeds the choice of first centroid for every restart.
    init : array (k, m), optional
        Warm-start centroids; when given, a single run starts from them.
    n_init : int
        Number of seeded restarts; the lowest-inertia run is returned.
    """
    if distance_kind not in DISTANCE_KINDS:
        raise ConfigError(f"unknown distance kind {distance_kind!r}")
    X = _as_matrix(X)
    n = X.shape[0]
    if not isinstance(k, (int, np.integer)) or k < 1 or k > n:
        raise ConfigError(f"k={k} must satisfy 1 <= k <= rows ({n})")
    if distance_kind == "cosine":
        X = _unit_rows(X)

    if init is not None:
        C0 = np.array(init, dtype=float)
        if C0.shape != (k, X.shape[1]):
            raise ShapeError(f"init centroids must have shape {(k, X.shape[1])}")
        if distance_kind == "cosine":
            C0 = _unit_rows(C0)
        starts = [C0]
    else:
        rng = np.random.default_rng(seed)
        firsts = rng.permutation(n)[: max(1, min(n_init, n))]
        starts = [_farthest_point_init(X, k, int(f), distance_kind) for f in firsts]

    if init is None and k == 2 and n <= EXACT_SPLIT_MAX_ROWS:
        split = _best_split(X, distance_kind)
        starts.append(_update_centroids(X, split, np.zeros((2, X.shape[1])), distance_kind))

    best = None
    for C0 in starts:
        assign, C, n_iter, history = _run(X, C0, distance_kind, max_iter)
        inertia = _objective(X, assign, C, distance_kind)
        if best is None or inertia < best.inertia - 1e-12 * max(1.0, abs(best.inertia)):
            best = ClusterFit(C, assign, inertia, distance_kind, seed, n_iter, history)
    return best


def elbow_k(X, k_max: int = 10, seed: int = 0, distance_kind: str = "cosine") -> int:
    """Pick k at the sharpest bend of the inertia curve.

    Returns the k in ``2..k_max-1`` maximizing the second difference
    ``inertia(k-1) - 2 inertia(k) + inertia(k+1)``; near-ties go to the
    smaller k.
    """
    X = _as_matrix(X)
    if k_max < 3:
        raise ConfigError("k_max must be at least 3")
    if X.shape[0] <= k_max:
        raise ConfigError(f"elbow search needs more than k_max={k_max} rows, got {X.shape[0]}")
    inertia = np.array([kmeans(X, k, distance_kind, seed).inertia for k in range(1, k_max + 1)])
    second = inertia[:-2] - 2.0 * inertia[1:-1] + inertia[2:]
    tol = 1e-9 * max(inertia[0], 0.0) + 1e-12
    best = int(np.flatnonzero(second >= second.max() - tol)[0])
    return best + 2


# --------------------------------------------------------------------------- regime model


def _stage1_outlier(fit: ClusterFit, X: np.ndarray) -> int:
    sizes = fit.sizes
    if sizes[0] != sizes[1]:
        return int(np.argmin(sizes))
    norms = np.linalg.norm(X, axis=1)
    mean_norm = [norms[fit.assignments == j].mean() for j in (0, 1)]
    return 0 if mean_norm[0] >= mean_norm[1] else 1


def fit_regimes(
    X,
    r: int | str = "auto",
    seed: int = 0,
    k_max: int = 10,
    previous: RegimeModel | None = None,
    n_init: int = 10,
) -> tuple[RegimeModel, np.ndarray]:
    """Fit the two-stage regime model and label every row.

    Parameters
    ----------
    X : array (n, m) or FactorPanel
        Monthly state vectors.
    r : int or "auto"
        Number of typical regimes; ``"auto"`` runs :func:`elbow_k` on the
        typical months.
    previous : RegimeModel, optional
        Model from the preceding window.  Both stages warm-start from its
        centroids and stage-2 labels are matched to it with
        :func:`match_clusters`, keeping regime numbers stable over time.

    Returns
    -------
    model : RegimeModel
    labels : int array (n,)
        0 for outlier months, 1..r for typical months.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if r != "auto":
        if not isinstance(r, (int, np.integer)) or r < 1:
            raise ConfigError(f"r must be a positive integer or 'auto', got {r!r}")
        if n < r + 2:
            raise ConfigError(f"need at least r + 2 = {r + 2} rows, got {n}")

    init1 = previous.stage1.centroids if previous is not None else None
    stage1 = kmeans(X, 2, "euclidean", seed, init=init1, n_init=n_init)
    if stage1.inertia == 0 and np.allclose(stage1.centroids[0], stage1.centroids[1]):
        raise DegenerateError("degenerate panel: all rows coincide")
    outlier = _stage1_outlier(stage1, X)
    typical_idx = np.flatnonzero(stage1.assignments != outlier)
    typical = X[typical_idx]

    if r == "auto":
        r = elbow_k(typical, min(k_max, typical.shape[0] - 1), seed, "cosine")
        logger.info("elbow selected r=%d", r)

    warm = previous is not None and previous.r == r
    init2 = previous.stage2.centroids if warm else None
    stage2 = kmeans(typical, r, "cosine", seed, init=init2, n_init=n_init)
    model = RegimeModel(stage1, outlier, stage2, int(r))
    if warm:
        model = relabel(model, match_clusters(previous, model))

    labels = np.zeros(n, dtype=int)
    labels[typical_idx] = model.stage2.assignments + 1
    return model, labels


def membership_from_distances(d) -> np.ndarray:
    """Fuzzy membership from centroid distances.

    ``p_i = (1 - d_i / D) / sum_m (1 - d_m / D)`` with ``D = sum_j d_j``.
    A zero distance puts all mass on the zero-distance centroid(s).
    """
    d = np.asarray(d, dtype=float)
    k = d.shape[-1]
    if k < 2:
        raise ConfigError("membership needs at least two centroids")
    if np.any(d < 0):
        raise DomainError("distances must be nonnegative")
    zero = d == 0
    if zero.any():
        return zero / zero.sum()
    w = 1.0 - d / d.sum()
    return w / w.sum()


def membership_probabilities(x, centroids, distance_kind: str = "euclidean") -> np.ndarray:
    """Membership probabilities of vector ``x`` over ``centroids``."""
    centroids = np.atleast_2d(np.asarray(centroids, dtype=float))
    if centroids.shape[0] < 2:
        raise ConfigError("membership needs at least two centroids")
    return membership_from_distances(pairwise_distances(x, centroids, distance_kind)[0])


def combine_distributions(p_r0: float, p_stage2) -> np.ndarray:
    """Merge the stage-1 outlier probability with the stage-2 distribution.

    The Regime 0 weight is ``-P_max * log2(1 - p_r0)`` where ``P_max`` is the
    largest stage-2 probability: zero when ``p_r0 = 0``, equal to ``P_max``
    at ``p_r0 = 0.5`` and unbounded as ``p_r0 -> 1`` (clamped at
    ``1 - 1e-9``).  The vector is then renormalized.
    """
    p2 = np.asarray(p_stage2, dtype=float)
    if not 0.0 <= p_r0 <= 1.0:
        raise DomainError(f"p_r0 must lie in [0, 1], got {p_r0}")
    p_max = p2.max()
    w0 = 0.0 if p_r0 == 0 else -p_max * math.log2(1.0 - min(p_r0, 1.0 - R0_CLAMP))
    out = np.concatenate(([w0], p2))
    return out / out.sum()


def _stage2_probs(model: RegimeModel, X: np.ndarray) -> np.ndarray:
    if model.r == 1:
        return np.ones((X.shape[0], 1))
    d = pairwise_distances(X, model.stage2.centroids, "cosine")
    return np.array([membership_from_distances(row) for row in d])


def classify(model: RegimeModel, x) -> np.ndarray:
    """Regime distribution (length r + 1) for a single state vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != model.stage1.centroids.shape[1]:
        raise ShapeError(
            f"state vector must have length {model.stage1.centroids.shape[1]}, got shape {x.shape}"
        )
    return classify_many(model, x[None, :])[0]


def classify_many(model: RegimeModel, X) -> np.ndarray:
    """Row-wise :func:`classify`; returns an (n, r + 1) matrix."""
    X = _as_matrix(X)
    if X.shape[1] != model.stage1.centroids.shape[1]:
        raise ShapeError("state vector dimension does not match the model")
    d1 = pairwise_distances(X, model.stage1.centroids, "euclidean")
    p2 = _stage2_probs(model, X)
    out = np.empty((X.shape[0], model.r + 1))
    for i in range(X.shape[0]):
        p_r0 = membership_from_distances(d1[i])[model.outlier_cluster]
        out[i] = combine_distributions(float(p_r0), p2[i])
    return out


def hard_labels(model: RegimeModel, X) -> np.ndarray:
    """Discrete regime labels for new rows, using nearest centroids of both stages."""
    X = _as_matrix(X)
    d1 = pairwise_distances(X, model.stage1.centroids, "euclidean")
    outlier = d1[:, model.outlier_cluster] <= d1[:, 1 - model.outlier_cluster]
    d2 = pairwise_distances(X, model.stage2.centroids, "cosine")
    return np.where(outlier, 0, np.argmin(d2, axis=1) + 1)


def match_clusters(prev: RegimeModel, new: RegimeModel) -> tuple[int, ...]:
    """Optimal relabeling of ``new``'s typical regimes onto ``prev``'s.

    Returns ``perm`` with ``perm[j - 1]`` the label (1..r) that ``new``'s
    regime ``j`` should take; total cosine distance between matched
    centroids is minimal.  Regime 0 is never permuted.
    """
    if prev.r != new.r:
        raise ConfigError(f"cannot match models with r={prev.r} and r={new.r}")
    cost = pairwise_distances(new.stage2.centroids, prev.stage2.centroids, "cosine")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(new.r, dtype=int)
    perm[rows] = cols + 1
    return tuple(int(p) for p in perm)


def relabel(model: RegimeModel, perm: Sequence[int]) -> RegimeModel:
    """Apply a 1-based stage-2 permutation as returned by :func:`match_clusters`."""
    perm = np.asarray(perm, dtype=int) - 1
    if sorted(perm.tolist()) != list(range(model.r)):
        raise ConfigError(f"not a permutation of 1..{model.r}: {tuple(perm + 1)}")
    s2 = model.stage2
    centroids = np.empty_like(s2.centroids)
    centroids[perm] = s2.centroids
    assign = perm[s2.assignments] if len(s2.assignments) else s2.assignments
    stage2 = ClusterFit(centroids, assign, s2.inertia, s2.distance_kind, s2.seed, s2.n_iter, list(s2.history))
    return RegimeModel(model.stage1, model.outlier_cluster, stage2, model.r)


# --------------------------------------------------------------------------- GMM comparator


@dataclass
class GmmFit:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    responsibilities: np.ndarray
    log_likelihood: list[float]
    converged: bool
    seed: int


def _gmm_e_step(X, weights, means, variances):
    log_pdf = -0.5 * (
        np.sum(np.log(2.0 * np.pi * variances), axis=1)[None, :]
        + np.sum((X[:, None, :] - means[None]) ** 2 / variances[None], axis=2)
    )
    joint = log_pdf + np.log(weights)[None, :]
    norm = logsumexp(joint, axis=1)
    return np.exp(joint - norm[:, None]), float(norm.sum())


def _gmm_m_step(X, resp, reg_covar):
    nk = resp.sum(axis=0)
    weights = nk / nk.sum()
    means = resp.T @ X / nk[:, None]
    variances = (resp.T @ X**2) / nk[:, None] - means**2
    return weights, means, np.maximum(variances, 0.0) + reg_covar


def _gmm_once(X, k, seed, tol, max_iter, reg_covar):
    km = kmeans(X, k, "euclidean", seed)
    resp = np.eye(k)[km.assignments]
    weights, means, variances = _gmm_m_step(X, resp, reg_covar)
    history = []
    converged = False
    for _ in range(max_iter):
        if np.any(variances < 1e-12):
            return None
        resp, ll = _gmm_e_step(X, weights, means, variances)
        if history and abs(ll - history[-1]) <= tol * abs(history[-1]):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        weights, means, variances = _gmm_m_step(X, resp, reg_covar)
    return GmmFit(weights, means, variances, resp, history, converged, seed)


def fit_gmm(X, k: int, seed: int = 0, tol: float = 1e-6, max_iter: int = 500, reg_covar: float = 1e-6) -> GmmFit:
    """Diagonal-covariance Gaussian mixture fitted by EM.

    Initialized from the Euclidean k-means fit with the same seed and run
    until the relative log-likelihood change drops below ``tol``.
    ``reg_covar`` is added to every variance; with it set to 0 a collapsing
    component triggers one re-seeded attempt and then an error.
    """
    X = _as_matrix(X)
    if k < 1 or k > X.shape[0]:
        raise ConfigError(f"k={k} must satisfy 1 <= k <= rows ({X.shape[0]})")
    for attempt_seed in (seed, seed + 1):
        fit = _gmm_once(X, k, attempt_seed, tol, max_iter, reg_covar)
        if fit is not None:
            return fit
        logger.warning("GMM component collapsed with seed %d", attempt_seed)
    raise NumericalError("GMM component variance collapsed below 1e-12 after re-seeding")


def gmm_crisis_component(fit: GmmFit) -> int:
    """Component with the largest mean norm, the GMM analogue of Regime 0."""
    return int(np.argmax(np.linalg.norm(fit.means, axis=1)))


def crisis_probability(distributions) -> np.ndarray:
    """Probability of Regime 0 per month."""
    P = np.atleast_2d(np.asarray(distributions, dtype=float))
    return P[:, 0].copy()


# --------------------------------------------------------------------------- profiling


def regime_profile(data: pd.DataFrame, labels, series_ids: Sequence[str], n_regimes: int | None = None) -> pd.DataFrame:
    """Per-regime averages of selected series, min-max scaled along each series.

    Parameters
    ----------
    data : DataFrame
        Series by column; rows aligned with ``labels`` (a Series indexed by
        date is aligned on the index, an array positionally).
    labels : Series or array
        Regime label per row.
    series_ids : list of str
        Columns to profile.
    n_regimes : int, optional
        Number of regimes; defaults to ``max(label) + 1``.

    Returns
    -------
    DataFrame
        One row per series, one column per regime.  Rows with equal minimum
        and maximum are all zero; regimes with no months are NaN.
    """
    missing = [s for s in series_ids if s not in data.columns]
    if missing:
        raise ConfigError(f"series not in panel: {missing}")
    if isinstance(labels, pd.Series):
        common = data.index.intersection(labels.index)
        frame, lab = data.loc[common, list(series_ids)], labels.loc[common].to_numpy()
    else:
        lab = np.asarray(labels, dtype=int)
        if len(lab) != len(data):
            raise ShapeError("labels and data have different lengths")
        frame = data[list(series_ids)]
    n_regimes = int(lab.max()) + 1 if n_regimes is None else n_regimes
    means = pd.DataFrame(index=list(series_ids), columns=range(n_regimes), dtype=float)
    for g in range(n_regimes):
        rows = frame.to_numpy(dtype=float)[lab == g]
        if len(rows) == 0:
            warnings.warn(f"regime {g} has no months; excluded from the profile")
            continue
        means[g] = np.nanmean(rows, axis=0)
    lo = means.min(axis=1)
    span = means.max(axis=1) - lo
    scaled = means.sub(lo, axis=0).div(span.where(span > 0, np.inf), axis=0)
    scaled.columns.name = "regime"
    return scaled
