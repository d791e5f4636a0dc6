import itertools
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import best_cosine_two_partition, min_max_rows
from regime_taa.errors import ConfigError, DegenerateError, DomainError, NumericalError, ShapeError
from regime_taa.fixtures import make_fixture
from regime_taa.regimes import (
    RegimeModel,
    classify,
    classify_many,
    combine_distributions,
    crisis_probability,
    elbow_k,
    fit_gmm,
    fit_regimes,
    gmm_crisis_component,
    hard_labels,
    kmeans,
    match_clusters,
    membership_from_distances,
    membership_probabilities,
    pairwise_distances,
    regime_profile,
    relabel,
)

prob_vectors = arrays(float, st.integers(2, 8), elements=st.floats(0.0, 1.0)).filter(lambda v: v.sum() > 1e-3)


def _simplex(v):
    return v / v.sum()


def _blobs(rng, centers, n=15, spread=0.05):
    return np.vstack([c + spread * rng.standard_normal((n, len(c))) for c in centers])


# --------------------------------------------------------------------------- kmeans


def test_kmeans_separated_duplicates():
    fit = kmeans(np.array([[0.0], [0.0], [10.0], [10.0]]), 2)
    assert sorted(fit.centroids.ravel()) == [0.0, 10.0]
    assert fit.inertia == 0.0


def test_kmeans_k_equals_rows():
    X = np.random.default_rng(0).standard_normal((6, 3))
    fit = kmeans(X, 6)
    assert fit.inertia == pytest.approx(0.0, abs=1e-24)
    assert sorted(fit.assignments) == list(range(6))


def test_kmeans_cosine_matches_exhaustive_partition():
    X = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]])
    fit = kmeans(X, 2, "cosine")
    cost, split = best_cosine_two_partition(X)
    assert fit.inertia == pytest.approx(cost, abs=1e-12)
    a = fit.assignments
    assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]
    assert (a == a[0]).tolist() == (split == split[0]).tolist()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_kmeans_cosine_near_exhaustive_optimum(seed):
    X = np.random.default_rng(seed).standard_normal((9, 3))
    cost, _ = best_cosine_two_partition(X)
    assert kmeans(X, 2, "cosine", seed=seed).inertia <= cost + 1e-9 + 0.25 * cost


def test_kmeans_errors():
    X = np.ones((3, 2))
    for k in (0, 4):
        with pytest.raises(ConfigError):
            kmeans(X, k)
    with pytest.raises(ConfigError):
        kmeans(X, 2, "manhattan")
    with pytest.raises(DomainError):
        kmeans(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), 2, "cosine")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.sampled_from(["euclidean", "cosine"]))
def test_kmeans_invariants(seed, k, kind):
    X = np.random.default_rng(seed).standard_normal((20, 3))
    fit = kmeans(X, k, kind, seed=seed)
    again = kmeans(X, k, kind, seed=seed)
    np.testing.assert_array_equal(fit.centroids, again.centroids)
    assert fit.inertia >= 0
    d = pairwise_distances(X, fit.centroids, kind)
    chosen = d[np.arange(len(X)), fit.assignments]
    assert np.all(chosen <= d.min(axis=1) + 1e-12)
    hist = np.asarray(fit.history)
    assert np.all(np.diff(hist) <= 1e-9 * max(1.0, hist.max()))


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_cosine_and_euclidean_argmin_agree_on_unit_rows(seed):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((12, 4))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    C = rng.standard_normal((3, 4))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    np.testing.assert_array_equal(
        pairwise_distances(U, C, "cosine").argmin(axis=1), pairwise_distances(U, C, "euclidean").argmin(axis=1)
    )


# --------------------------------------------------------------------------- elbow


def test_elbow_three_blobs():
    rng = np.random.default_rng(1)
    X = _blobs(rng, [np.array([0.0, 0.0]), np.array([10.0, 0.0]), np.array([0.0, 10.0])])
    assert elbow_k(X, 6, distance_kind="euclidean") == 3


def test_elbow_single_blob_prefers_two():
    X = np.random.default_rng(2).uniform(size=(30, 2)) * 1e-9 + 5.0
    X[:] = 5.0
    assert elbow_k(X, 5, distance_kind="euclidean") == 2


def test_elbow_errors():
    with pytest.raises(ConfigError):
        elbow_k(np.ones((10, 2)), 2)
    with pytest.raises(ConfigError):
        elbow_k(np.ones((5, 2)), 5)


# --------------------------------------------------------------------------- two-stage model


def test_fit_regimes_isolates_large_norm_rows():
    rng = np.random.default_rng(4)
    angles = rng.uniform(0, 2 * np.pi, 40)
    ring = np.c_[np.cos(angles), np.sin(angles)] * (1 + 0.05 * rng.standard_normal(40))[:, None]
    # norm 100 within a narrow cone, so a two-way Euclidean split can separate them
    theta = np.deg2rad([40.0, 45.0, 50.0, 55.0])
    far = 100.0 * np.c_[np.cos(theta), np.sin(theta)]
    X = np.vstack([ring, far])
    model, labels = fit_regimes(X, r=3)
    assert labels[40:].tolist() == [0, 0, 0, 0]
    assert np.all(labels[:40] > 0)
    assert model.stage1.sizes[model.outlier_cluster] <= model.stage1.sizes[1 - model.outlier_cluster]


def test_fit_regimes_identical_rows_degenerate():
    with pytest.raises(DegenerateError, match="degenerate panel"):
        fit_regimes(np.ones((10, 3)), r=2)


def test_fit_regimes_antipodal_directions():
    rng = np.random.default_rng(5)
    typical = np.vstack([np.array([1.0, 0.2]) + 0.01 * rng.standard_normal((10, 2)),
                         np.array([-1.0, -0.2]) + 0.01 * rng.standard_normal((10, 2))])
    outliers = np.array([[40.0, 40.0], [41.0, 39.0]])
    model, labels = fit_regimes(np.vstack([typical, outliers]), r=2)
    assert len(set(labels[:10])) == 1 and len(set(labels[10:20])) == 1
    assert labels[0] != labels[10] and labels[20] == labels[21] == 0


def test_fit_regimes_row_requirement():
    with pytest.raises(ConfigError):
        fit_regimes(np.random.default_rng(0).standard_normal((4, 2)), r=3)
    with pytest.raises(ConfigError):
        fit_regimes(np.random.default_rng(0).standard_normal((10, 2)), r=0)


def test_fixture_recovers_planted_regimes(fixture_factors):
    _, factors, _ = fixture_factors
    planted = make_fixture().regimes
    model, labels = fit_regimes(factors.factors, "auto")
    assert model.r == 5
    assert np.array_equal(labels == 0, planted == 0)
    # typical regimes agree up to a relabeling
    pairs = {(a, b) for a, b in zip(labels, planted)}
    assert len(pairs) == 6


def test_model_json_round_trip(fixture_factors):
    _, factors, _ = fixture_factors
    model, _ = fit_regimes(factors.factors, 5)
    back = RegimeModel.from_json(model.to_json())
    np.testing.assert_array_equal(classify_many(back, factors.factors), classify_many(model, factors.factors))
    with pytest.raises(ConfigError):
        RegimeModel.from_dict({"format": "other"})


# --------------------------------------------------------------------------- memberships


def test_membership_examples():
    np.testing.assert_allclose(membership_from_distances([1.0, 1.0]), [0.5, 0.5])
    np.testing.assert_allclose(membership_from_distances([1.0, 2.0, 3.0]), [0.416667, 0.333333, 0.25], atol=1e-6)
    np.testing.assert_array_equal(membership_from_distances([0.0, 5.0]), [1.0, 0.0])
    np.testing.assert_array_equal(membership_from_distances([0.0, 0.0, 5.0]), [0.5, 0.5, 0.0])
    with pytest.raises(ConfigError):
        membership_probabilities(np.zeros(2), np.zeros((1, 2)))


@given(arrays(float, st.integers(2, 9), elements=st.floats(1e-6, 1e3)))
def test_membership_simplex_and_monotone(d):
    p = membership_from_distances(d)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12
    for i, j in itertools.permutations(range(len(d)), 2):
        if d[i] < d[j] * (1 - 1e-9):
            assert p[i] > p[j]


def test_combine_examples():
    np.testing.assert_allclose(combine_distributions(0.5, [0.5, 0.3, 0.2]), [1 / 3, 1 / 3, 0.2, 0.2 / 1.5])
    out = combine_distributions(0.0, [0.6, 0.4])
    assert out[0] == 0.0
    np.testing.assert_array_equal(out[1:], [0.6, 0.4])
    out = combine_distributions(0.75, [0.4, 0.35, 0.25])
    assert out[0] / out[1] == pytest.approx(0.8 / 0.4)
    np.testing.assert_allclose(out, np.array([0.8, 0.4, 0.35, 0.25]) / 1.8)
    assert combine_distributions(1.0, [0.5, 0.5])[0] > 0.9
    with pytest.raises(DomainError):
        combine_distributions(1.5, [1.0])


@settings(max_examples=500)
@given(st.floats(0.0, 1.0), prob_vectors)
def test_combine_argmax_consistency(p_r0, p2):
    p2 = _simplex(p2)
    out = combine_distributions(p_r0, p2)
    assert abs(out.sum() - 1) < 1e-12 and np.all(out >= 0)
    if p_r0 > 0.5 + 1e-9:
        assert np.argmax(out) == 0
    elif p_r0 < 0.5 - 1e-9:
        assert np.argmax(out) == np.argmax(p2) + 1


def test_combine_consistency_10k_draws():
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(10_000):
        p_r0 = rng.uniform()
        p2 = rng.dirichlet(np.ones(rng.integers(1, 7)))
        out = combine_distributions(p_r0, p2)
        expected = 0 if p_r0 > 0.5 else np.argmax(p2) + 1
        bad += int(np.argmax(out) != expected)
    assert bad == 0


def test_classify_at_centroids(fixture_factors):
    _, factors, _ = fixture_factors
    model, _ = fit_regimes(factors.factors, 5)
    assert np.argmax(classify(model, model.outlier_centroid)) == 0
    scale = np.linalg.norm(model.typical_centroid) + 1.0
    for j, c in enumerate(model.stage2.centroids, start=1):
        # on the ray of centroid j, near the typical stage-1 centroid's magnitude
        x = c * scale
        if hard_labels(model, x[None])[0] == 0:
            continue
        assert np.argmax(classify(model, x)) == j
    with pytest.raises(ShapeError):
        classify(model, np.zeros(factors.factors.shape[1] + 1))


def test_classify_argmax_equals_hard_label(fixture_factors):
    _, factors, _ = fixture_factors
    model, labels = fit_regimes(factors.factors, 5)
    rng = np.random.default_rng(9)
    X = rng.standard_normal((1000, factors.factors.shape[1])) * factors.factors.std(axis=0) * 2
    P = classify_many(model, X)
    np.testing.assert_array_equal(P.argmax(axis=1), hard_labels(model, X))
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(hard_labels(model, factors.factors), labels)


def test_crisis_probability_tracks_outlier_phase(fixture_factors):
    _, factors, _ = fixture_factors
    model, _ = fit_regimes(factors.factors, 5)
    P = classify_many(model, factors.factors)
    p0 = crisis_probability(P)
    planted = make_fixture().regimes
    # every injected month sits above every typical month, and Regime 0 is its argmax
    assert p0[planted == 0].min() > 2 * p0[planted != 0].max()
    assert np.all(P[planted == 0].argmax(axis=1) == 0)
    assert crisis_probability([1.0, 0.0, 0.0])[0] == 1.0
    assert crisis_probability([0.0, 0.5, 0.5])[0] == 0.0


# --------------------------------------------------------------------------- relabeling


def _model(rng, r=4, m=3):
    X = rng.standard_normal((60, m))
    X[:4] *= 30
    return fit_regimes(X, r, seed=1)[0]


def test_match_clusters_swap_and_identity():
    model = _model(np.random.default_rng(7))
    assert match_clusters(model, model) == (1, 2, 3, 4)
    swapped = relabel(model, (2, 1, 3, 4))
    assert match_clusters(model, swapped) == (2, 1, 3, 4)


@settings(max_examples=20, deadline=None)
@given(st.permutations([1, 2, 3, 4]), st.integers(0, 1000))
def test_match_clusters_recovers_inverse(perm, seed):
    model = _model(np.random.default_rng(seed))
    shuffled = relabel(model, perm)
    back = relabel(shuffled, match_clusters(model, shuffled))
    np.testing.assert_array_equal(back.stage2.centroids, model.stage2.centroids)


def test_match_clusters_noise_matches_brute_force():
    rng = np.random.default_rng(8)
    model = _model(rng)
    noisy = relabel(model, (3, 1, 4, 2))
    noisy.stage2.centroids = noisy.stage2.centroids + 1e-3 * rng.standard_normal(noisy.stage2.centroids.shape)
    cost = pairwise_distances(noisy.stage2.centroids, model.stage2.centroids, "cosine")
    best = min(itertools.permutations(range(4)), key=lambda p: sum(cost[i, p[i]] for i in range(4)))
    assert match_clusters(model, noisy) == tuple(b + 1 for b in best)
    assert match_clusters(model, noisy) == match_clusters(model, relabel(model, (3, 1, 4, 2)))


def test_match_clusters_r_mismatch():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 3))
    X[:3] *= 30
    with pytest.raises(ConfigError):
        match_clusters(fit_regimes(X, 2)[0], fit_regimes(X, 3)[0])


# --------------------------------------------------------------------------- GMM


def test_gmm_separated_blobs_nearly_binary():
    rng = np.random.default_rng(0)
    X = np.r_[rng.normal(0, 0.1, 30), rng.normal(10, 0.1, 30)][:, None]
    fit = fit_gmm(X, 2)
    r = fit.responsibilities
    assert np.all(np.minimum(r, 1 - r) < 1e-3)
    assert np.all(np.diff(fit.log_likelihood) >= -1e-9 * np.abs(fit.log_likelihood[:-1]))
    assert gmm_crisis_component(fit) == int(np.argmax(fit.means[:, 0]))


def test_gmm_single_component():
    fit = fit_gmm(np.random.default_rng(0).standard_normal((20, 2)), 1)
    np.testing.assert_array_equal(fit.responsibilities, 1.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.integers(2, 4))
def test_gmm_properties(seed, k):
    X = np.random.default_rng(seed).standard_normal((40, 3))
    fit = fit_gmm(X, k, seed=seed)
    np.testing.assert_allclose(fit.responsibilities.sum(axis=1), 1.0, atol=1e-9)
    ll = np.asarray(fit.log_likelihood)
    assert np.all(np.diff(ll) >= -1e-8 * np.abs(ll[:-1]))


def test_gmm_collapse_raises():
    X = np.r_[np.zeros(10), np.ones(10)][:, None]
    with pytest.raises(NumericalError):
        fit_gmm(X, 2, reg_covar=0.0)


# --------------------------------------------------------------------------- profiles


def test_regime_profile_examples():
    data = pd.DataFrame({"flat": [1.0, 1.0, 1.0, 1.0], "two": [1.0, 1.0, 3.0, 3.0], "three": [2.0, 4.0, 3.0, 3.0]})
    prof = regime_profile(data, [0, 1, 2, 2], ["flat", "three"])
    np.testing.assert_array_equal(prof.loc["flat"], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(prof.loc["three"], [0.0, 1.0, 0.5])
    prof2 = regime_profile(data, [0, 0, 1, 1], ["two"])
    np.testing.assert_allclose(prof2.loc["two"], [0.0, 1.0])
    with pytest.raises(ConfigError):
        regime_profile(data, [0, 0, 1, 1], ["missing"])


def test_regime_profile_empty_regime_warns():
    data = pd.DataFrame({"a": [1.0, 2.0, 3.0]})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prof = regime_profile(data, [0, 0, 2], ["a"], n_regimes=3)
    assert caught
    assert np.isnan(prof.loc["a", 1]) or np.isnan(prof.loc["a"].iloc[1])
    np.testing.assert_allclose(prof.loc["a"].iloc[[0, 2]], [0.0, 1.0])


@settings(max_examples=40)
@given(arrays(float, (12, 3), elements=st.floats(-10, 10)))
def test_regime_profile_matches_oracle(values):
    labels = np.arange(12) % 4
    data = pd.DataFrame(values, columns=list("abc"))
    prof = regime_profile(data, labels, list("abc"))
    means = np.array([[values[labels == g, j].mean() for g in range(4)] for j in range(3)])
    np.testing.assert_allclose(prof.to_numpy(), min_max_rows(means), atol=1e-9)
