import logging
import re
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import transition_by_loops
from regime_taa.errors import ConfigError, DataError, ShapeError
from regime_taa.transition import (
    conditional_transition,
    estimate_transition,
    export_graph,
    matrix_to_csv,
    matrix_to_long,
    propagate,
)

T = np.array([[0.9, 0.1], [0.5, 0.5]])


def _stochastic(rng, n):
    return rng.dirichlet(np.ones(n), size=n)


def test_estimate_examples():
    np.testing.assert_array_equal(estimate_transition([0, 0, 1, 1, 0], 2).matrix, [[0.5, 0.5], [0.5, 0.5]])
    assert estimate_transition([0, 0, 0], 1).matrix[0, 0] == 1.0
    E = estimate_transition([0, 1, 0, 1], 2).matrix
    assert E[0, 1] == 1.0 and E[1, 0] == 1.0


def test_estimate_errors_and_uniform_rows(caplog):
    with pytest.raises(ConfigError):
        estimate_transition([0, 3], 2)
    with pytest.raises(DataError):
        estimate_transition([1], 2)
    with caplog.at_level(logging.WARNING, logger="regime_taa.transition"):
        E = estimate_transition([0, 0, 1], 3)
    np.testing.assert_array_equal(E.matrix[1], [1 / 3] * 3)
    np.testing.assert_array_equal(E.matrix[2], [1 / 3] * 3)
    assert "uniform" in caplog.text


def test_smoothing():
    E = estimate_transition([0, 0, 0, 1], 2, alpha=1.0)
    # row 0: counts (2, 1) + 1 each; row 1: no successor, pseudo-counts only
    np.testing.assert_allclose(E.matrix, [[0.6, 0.4], [0.5, 0.5]])
    np.testing.assert_array_equal(E.counts, [[2, 1], [0, 0]])


@settings(max_examples=80)
@given(st.lists(st.integers(0, 4), min_size=2, max_size=80))
def test_estimate_matches_loop_oracle(labels):
    E = estimate_transition(labels, 5)
    oracle, counts = transition_by_loops(labels, 5)
    np.testing.assert_allclose(E.matrix, oracle, atol=1e-15)
    np.testing.assert_array_equal(E.counts, counts)
    assert np.all(np.abs(E.matrix.sum(axis=1) - 1) < 1e-12)
    np.testing.assert_array_equal(E.counts.sum(axis=1), E.out_counts)
    np.testing.assert_array_equal(E.out_counts, np.bincount(labels[:-1], minlength=5))


def test_conditional_examples():
    C = conditional_transition(np.array([[0.8, 0.1, 0.1], [0.0, 0.6, 0.4], [0.0, 0.6, 0.4]]))
    np.testing.assert_allclose(C[0], [0, 0.5, 0.5])
    absorbing = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.4], [0.6, 0.4, 0.0]])
    with pytest.warns(UserWarning, match="absorbing"):
        C = conditional_transition(absorbing)
    np.testing.assert_array_equal(C[0], [0, 0, 0])
    np.testing.assert_allclose(C[2], [0.6, 0.4, 0.0])


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(2, 7))
def test_conditional_reconstructs(seed, n):
    E = _stochastic(np.random.default_rng(seed), n)
    C = conditional_transition(E)
    assert np.all(np.diag(C) == 0)
    np.testing.assert_allclose(C.sum(axis=1), 1.0, atol=1e-12)
    stay = np.diag(E)
    rebuilt = C * (1 - stay)[:, None] + np.diag(stay)
    np.testing.assert_allclose(rebuilt, E, atol=1e-12)


def test_propagate_examples():
    np.testing.assert_allclose(propagate([1.0, 0.0], T), [0.9, 0.1])
    p = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(propagate(p, np.eye(3)), p)
    np.testing.assert_allclose(propagate([0.5, 0.5], T), [0.7, 0.3])
    # magnitude renormalization before use
    np.testing.assert_allclose(propagate([2.0, 2.0], T), [0.7, 0.3])
    with pytest.raises(ShapeError):
        propagate([1.0, 0.0, 0.0], T)
    with pytest.raises(ShapeError):
        propagate([1.0], np.ones((1, 2)))


def test_propagate_simplex_10k_pairs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 8))
        out = propagate(rng.dirichlet(np.ones(n)), _stochastic(rng, n))
        assert np.all(out >= 0)
        worst = max(worst, abs(out.sum() - 1))
    assert worst <= 1e-12


@settings(max_examples=50)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0, 1))
def test_two_state_convergence_monotone(a, b, p0):
    E = np.array([[1 - a, a], [b, 1 - b]])
    p = np.array([p0, 1 - p0])
    steps = []
    for _ in range(30):
        nxt = propagate(p, E)
        steps.append(np.abs(nxt - p).sum())
        p = nxt
    assert np.all(np.diff(steps) <= 1e-12)


def test_export_graph_edges():
    assert export_graph(np.array([[0.0, 1.0], [1.0, 0.0]])).count("->") == 2
    dot = export_graph(np.zeros((3, 3)))
    assert "->" not in dot and dot.count("[label=") == 3
    rng = np.random.default_rng(1)
    C = conditional_transition(_stochastic(rng, 6))
    C[C < 0.15] = 0.0
    assert export_graph(C).count("->") == int(np.count_nonzero(C))
    weights = [float(w) for w in re.findall(r"weight=([0-9.e-]+)", export_graph(C))]
    assert sorted(weights) == sorted(C[C != 0].tolist())
    with pytest.raises(ShapeError):
        export_graph(np.zeros((2, 2)), labels=["a"])


def test_tabular_outputs():
    E = estimate_transition([0, 1, 1, 0], 2)
    text = matrix_to_csv(E)
    assert text.splitlines()[0] == "from,0,1"
    long = matrix_to_long(E, conditional_transition(E))
    assert list(long.columns) == ["from", "to", "prob", "conditional_prob"]
    assert len(long) == 4
    np.testing.assert_allclose(long.groupby("from")["prob"].sum(), 1.0)
