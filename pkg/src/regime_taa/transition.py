"""Regime transition matrices, Markov propagation and graph export."""
from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, ShapeError

logger = logging.getLogger(__name__)

__all__ = [
    "TransitionMatrix",
    "estimate_transition",
    "conditional_transition",
    "propagate",
    "export_graph",
    "matrix_to_csv",
    "matrix_to_long",
]


@dataclass
class TransitionMatrix:
    """Row-stochastic regime transition matrix and the counts it came from.

    ``matrix[i, j]`` is the probability of moving from regime ``i`` to ``j``
    in one month.  Rows of regimes never seen with a successor are uniform.
    """

    matrix: np.ndarray
    counts: np.ndarray

    @property
    def n_regimes(self) -> int:
        return self.matrix.shape[0]

    @property
    def out_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def _as_matrix(E) -> np.ndarray:
    M = E.matrix if isinstance(E, TransitionMatrix) else np.asarray(E, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"transition matrix must be square, got shape {M.shape}")
    return M


def estimate_transition(labels, n_regimes: int, alpha: float = 0.0) -> TransitionMatrix:
    """Count month-to-month regime switches and normalize each row.

    ``e_ij = count(i -> j) / out_count(i)`` where ``out_count(i)`` counts the
    occurrences of ``i`` that have a successor month, so every observed row
    sums to one.  ``alpha`` adds pseudo-counts to every cell (default none).
    """
    lab = np.asarray(labels, dtype=int)
    if lab.ndim != 1 or len(lab) < 2:
        raise DataError("need a 1-D label sequence of length >= 2")
    if lab.min() < 0:
        raise ConfigError("labels must be nonnegative")
    if n_regimes <= lab.max():
        raise ConfigError(f"n_regimes={n_regimes} but labels reach {lab.max()}")
    if alpha < 0:
        raise ConfigError("smoothing alpha must be nonnegative")

    counts = np.zeros((n_regimes, n_regimes), dtype=np.int64)
    np.add.at(counts, (lab[:-1], lab[1:]), 1)
    smoothed = counts + alpha
    rows = smoothed.sum(axis=1)
    matrix = np.empty((n_regimes, n_regimes))
    empty = rows == 0
    if empty.any():
        logger.warning("regimes %s have no observed transitions; using uniform rows", np.flatnonzero(empty).tolist())
    matrix[empty] = 1.0 / n_regimes
    matrix[~empty] = smoothed[~empty] / rows[~empty, None]
    return TransitionMatrix(matrix, counts)


def conditional_transition(E) -> np.ndarray:
    """Transition probabilities given that the regime changes.

    Off-diagonal entries of row ``i`` are divided by ``1 - E[i, i]`` and the
    diagonal is zeroed.  Absorbing rows (``E[i, i] = 1``) become all-zero.
    """
    M = _as_matrix(E)
    out = M.copy()
    np.fill_diagonal(out, 0.0)
    stay = np.diag(M)
    absorbing = stay >= 1.0
    if absorbing.any():
        warnings.warn(f"absorbing regimes {np.flatnonzero(absorbing).tolist()} have no transitions")
    out[absorbing] = 0.0
    out[~absorbing] /= (1.0 - stay[~absorbing])[:, None]
    return out


def propagate(p, E) -> np.ndarray:
    """One Markov step: ``p' = (p / sum p) @ E``, renormalized."""
    M = _as_matrix(E)
    p = np.asarray(p, dtype=float)
    if p.shape != (M.shape[0],):
        raise ShapeError(f"distribution of length {p.shape} does not fit a {M.shape} matrix")
    total = np.abs(p).sum()
    if total == 0:
        raise DataError("cannot propagate an all-zero distribution")
    nxt = (p / total) @ M
    return nxt / nxt.sum()


def export_graph(C, labels: Sequence[str] | None = None, name: str = "regimes") -> str:
    """Weighted directed graph of regime transitions in DOT format.

    Every regime is a node; each nonzero off-diagonal entry is an edge whose
    ``weight`` attribute carries the probability.
    """
    M = _as_matrix(C)
    n = M.shape[0]
    labels = [f"Regime {i}" for i in range(n)] if labels is None else list(labels)
    if len(labels) != n:
        raise ShapeError(f"{len(labels)} labels for {n} regimes")
    lines = [f"digraph {name} {{"]
    for i, lab in enumerate(labels):
        lines.append(f'  {i} [label="{lab}"];')
    for i in range(n):
        for j in range(n):
            if i != j and M[i, j] != 0:
                lines.append(f'  {i} -> {j} [weight={float(M[i, j])!r}, label="{M[i, j]:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def matrix_to_csv(M) -> str:
    M = _as_matrix(M)
    n = M.shape[0]
    frame = pd.DataFrame(M, index=pd.Index(range(n), name="from"), columns=range(n))
    buf = io.StringIO()
    frame.to_csv(buf)
    return buf.getvalue()


def matrix_to_long(E, conditional=None) -> pd.DataFrame:
    """Heatmap-ready long format with columns ``from, to, prob``."""
    M = _as_matrix(E)
    n = M.shape[0]
    frm, to = np.divmod(np.arange(n * n), n)
    frame = pd.DataFrame({"from": frm, "to": to, "prob": M.ravel()})
    if conditional is not None:
        frame["conditional_prob"] = _as_matrix(conditional).ravel()
    return frame
