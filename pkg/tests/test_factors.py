import numpy as np
import pytest

from drive_styles.errors import DataError, SchemaError, ValidationError
from drive_styles.factors import fit_factor_model, score_fragments, varimax
from drive_styles.fragmentation import FragmentStatsMatrix

LABELS = [f"{channel}_{stat}" for channel in ("v", "a_x", "a_y", "yaw_rate") for stat in ("max", "mean", "std")]


def block_data(n=5000, loading=0.9, seed=3):
    """12 features in speed / acceleration / lateral blocks driven by 3 independent factors."""
    rng = np.random.default_rng(seed)
    A = np.zeros((12, 3))
    A[0:3, 0] = loading
    A[3:6, 1] = loading
    A[6:12, 2] = loading
    F = rng.normal(size=(3, n))
    noise = rng.normal(scale=np.sqrt(1 - loading**2), size=(12, n))
    return A, FragmentStatsMatrix("*pooled*", A @ F + noise, LABELS)


def test_block_structure_is_recovered():
    A, pooled = block_data()

    model = fit_factor_model(pooled)

    assert model.factor_count == 3
    recovered = np.abs(model.loadings)
    for column in range(3):
        errors = [np.max(np.abs(recovered[:, j] - A[:, column])) for j in range(3)]
        assert min(errors) < 0.1


def test_factor_labels_follow_channel_groups():
    _, pooled = block_data()

    model = fit_factor_model(pooled)

    assert sorted(model.factor_labels) == ["acceleration", "lateral", "speed"]
    speed = model.factor_labels.index("speed")
    assert model.loadings[LABELS.index("v_max"), speed] == pytest.approx(0.9, abs=0.05)
    # the six lateral features carry the most variance
    assert model.factor_labels[0] == "lateral"


def test_single_factor_noiseless():
    rng = np.random.default_rng(0)
    f = rng.normal(size=400)
    values = np.vstack([(j + 1) * f + j for j in range(4)])
    pooled = FragmentStatsMatrix("*pooled*", values, ["v_max", "v_mean", "v_std", "a_x_max"])

    model = fit_factor_model(pooled)

    assert model.factor_count == 1
    assert model.eigenvalues[0] == pytest.approx(4.0)
    np.testing.assert_allclose(model.loadings[:, 0], 1.0, atol=1e-6)


def test_explicit_factor_count_overrides_kaiser():
    _, pooled = block_data()

    model = fit_factor_model(pooled, m=2)

    assert model.factor_count == 2
    assert model.explained_variance()["cumulative"].iloc[-1] <= 1.0


def test_zero_variance_feature_is_named():
    _, pooled = block_data(n=200)
    values = pooled.values.copy()
    values[4] = 1.5

    with pytest.raises(DataError, match="a_x_mean"):
        fit_factor_model(FragmentStatsMatrix("*pooled*", values, LABELS))


def test_kaiser_retaining_nothing():
    # orthogonal +-1 columns: the correlation matrix is exactly the identity
    values = np.array(
        [
            [1, -1, 1, -1, 1, -1, 1, -1],
            [1, 1, -1, -1, 1, 1, -1, -1],
            [1, 1, 1, 1, -1, -1, -1, -1],
        ],
        dtype=float,
    )
    pooled = FragmentStatsMatrix("*pooled*", values, ["v_max", "a_x_max", "a_y_max"])

    with pytest.raises(ValidationError, match="explicitly"):
        fit_factor_model(pooled)


def test_scores_of_training_matrix_are_whitened():
    _, pooled = block_data(n=3000)
    model = fit_factor_model(pooled)

    scores = score_fragments(model, pooled).scores

    np.testing.assert_allclose(np.cov(scores, bias=True), np.eye(3), atol=0.05)


def test_mean_fragment_scores_zero():
    _, pooled = block_data(n=1000)
    model = fit_factor_model(pooled)
    mean_fragment = FragmentStatsMatrix("alice", model.feature_means[:, None], LABELS)

    scores = score_fragments(model, mean_fragment)

    np.testing.assert_allclose(scores.scores, 0.0, atol=1e-9)
    assert scores.factor_labels == model.factor_labels


def test_score_label_mismatch():
    _, pooled = block_data(n=1000)
    model = fit_factor_model(pooled)
    renamed = FragmentStatsMatrix("alice", pooled.values[:, :5], LABELS[::-1])

    with pytest.raises(SchemaError):
        score_fragments(model, renamed)


def test_varimax_undoes_a_rotation():
    simple = np.zeros((6, 2))
    simple[:3, 0] = 0.8
    simple[3:, 1] = 0.7
    angle = np.pi / 6
    turn = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])

    rotated, rotation = varimax(simple @ turn)

    np.testing.assert_allclose(rotation.T @ rotation, np.eye(2), atol=1e-10)
    recovered = np.sort(np.abs(rotated), axis=1)[:, ::-1]
    np.testing.assert_allclose(recovered[:, 0], [0.8, 0.8, 0.8, 0.7, 0.7, 0.7], atol=1e-4)
    np.testing.assert_allclose(recovered[:, 1], 0.0, atol=1e-4)


def test_varimax_single_column_is_identity():
    loadings = np.array([[0.5], [0.7]])

    rotated, rotation = varimax(loadings)

    np.testing.assert_array_equal(rotated, loadings)
    np.testing.assert_array_equal(rotation, np.eye(1))


def test_rescaling_a_feature_leaves_scores_unchanged():
    _, pooled = block_data(n=2000)
    values = pooled.values.copy()
    values[0] = 10.0 * values[0] + 5.0
    rescaled = FragmentStatsMatrix("*pooled*", values, LABELS)

    scores = score_fragments(fit_factor_model(pooled), pooled).scores
    rescaled_scores = score_fragments(fit_factor_model(rescaled), rescaled).scores

    np.testing.assert_allclose(rescaled_scores, scores, atol=1e-8)


def test_explained_variance_matches_retained_eigenvalues():
    _, pooled = block_data()

    for rotate in (True, False):
        model = fit_factor_model(pooled, rotate=rotate)
        explained = model.explained_variance()

        expected = np.sum(model.eigenvalues[:3]) / len(LABELS)
        assert model.retained_eigen_share() == pytest.approx(expected)
        assert explained["cumulative"].iloc[-1] == pytest.approx(expected, rel=1e-10)
        assert (np.diff(explained["proportion"].to_numpy()) <= 1e-12).all()

    unrotated = fit_factor_model(pooled, rotate=False)
    np.testing.assert_allclose(unrotated.explained_variance()["variance"], unrotated.eigenvalues[:3], rtol=1e-10)


def test_communalities_complement_uniquenesses():
    _, pooled = block_data()

    model = fit_factor_model(pooled)

    np.testing.assert_allclose(model.communalities + model.uniquenesses, 1.0)
    # principal factors slightly overstate the 0.81 of the generator
    np.testing.assert_allclose(model.communalities, 0.85, atol=0.05)


def test_rotation_preserves_the_loading_product():
    _, pooled = block_data()

    unrotated = fit_factor_model(pooled, rotate=False).loadings
    rotated = fit_factor_model(pooled, rotate=True).loadings

    np.testing.assert_allclose(rotated @ rotated.T, unrotated @ unrotated.T, atol=1e-8)
