import numpy as np
import pandas as pd
import pytest

from drive_styles.discretizer import Codebook
from drive_styles.errors import DataError, RangeError, SchemaError, ValidationError
from drive_styles.fragmentation import FragmentStatsMatrix
from drive_styles.hlm import Hyperparams, StyleModel
from drive_styles.styleanalysis import (
    HIGHWAY_THRESHOLDS,
    URBAN_THRESHOLDS,
    LevelThresholds,
    StyleOrdering,
    SubjectiveLabel,
    aggressive_score,
    aggressive_scores,
    fit_thresholds,
    group_report,
    group_significance,
    order_styles,
    order_styles_by_statistics,
    read_labels,
    score_to_level,
    style_statistics,
    thresholds_for,
    weighted_confusion,
    write_labels,
)


def codebook_125():
    cuts = np.array([-1.5, -0.5, 0.5, 1.5])
    return Codebook([cuts, cuts, cuts], 5, ["speed", "acceleration", "lateral"])


def model_with(phi, theta=None, driver_ids=None):
    phi = np.asarray(phi, dtype=float)
    K, V = phi.shape
    if theta is None:
        theta = np.full((1, K), 1.0 / K)
    theta = np.asarray(theta, dtype=float)
    driver_ids = driver_ids or [f"driver_{i:03d}" for i in range(1, len(theta) + 1)]
    return StyleModel(theta, phi, Hyperparams.symmetric(K, V), driver_ids)


def labels(levels):
    return [SubjectiveLabel(f"driver_{i:03d}", level) for i, level in enumerate(levels, start=1)]


def test_extreme_words_order_styles():
    phi = np.full((2, 125), 1e-6)
    phi[0, 124] = 1.0
    phi[1, 0] = 1.0
    phi /= phi.sum(axis=1, keepdims=True)

    ordering = order_styles(model_with(phi), codebook_125())

    # learned style 0 lives on the most severe word
    assert ordering.permutation == (2, 1)
    assert ordering.ranked_styles() == [1, 0]
    np.testing.assert_allclose(ordering.reorder(np.array([0.7, 0.3])), [0.3, 0.7])


def test_identical_styles_tie(caplog):
    phi = np.full((3, 125), 1 / 125)

    ordering = order_styles(model_with(phi), codebook_125())

    assert ordering.permutation == (1, 2, 3)
    assert "tie" in caplog.text


def test_ordering_needs_matching_vocabulary():
    with pytest.raises(SchemaError):
        order_styles(model_with(np.full((2, 10), 0.1)), codebook_125())


def test_ordering_must_be_a_bijection():
    with pytest.raises(ValidationError):
        StyleOrdering((1, 1, 3), np.zeros(3))


def test_statistics_ordering_follows_fragment_means():
    values = np.array([[50.0, 90.0, 70.0, 52.0, 88.0, 71.0], [0.5, 3.0, 1.0, 0.4, 3.2, 1.1]])
    matrix = FragmentStatsMatrix("*pooled*", values, ["v_mean", "a_x_max"])
    assignments = np.array([0, 1, 2, 0, 1, 2])

    stats = style_statistics(matrix, assignments, K=3)
    ordering = order_styles_by_statistics(stats)

    assert list(stats.columns) == ["style", "feature", "fragments", "mean", "sd", "q25", "median", "q75"]
    assert stats.loc[(stats["style"] == 1) & (stats["feature"] == "v_mean"), "mean"].item() == pytest.approx(89.0)
    assert ordering.permutation == (1, 3, 2)
    assert ordering.mode == "statistics"


@pytest.mark.parametrize(
    "theta, expected",
    [((1.0, 0.0, 0.0), 1.0), ((0.0, 0.0, 1.0), 3.0), ((0.2, 0.3, 0.5), 2.3)],
)
def test_aggressive_score_calmest_first(theta, expected):
    assert aggressive_score(theta, StyleOrdering.identity(3)) == pytest.approx(expected)


def test_aggressive_score_uses_ranks():
    ordering = StyleOrdering((3, 1, 2), np.zeros(3))

    assert aggressive_score((1.0, 0.0, 0.0), ordering) == pytest.approx(3.0)
    assert aggressive_score((0.0, 1.0, 0.0), ordering, gamma=(0.0, 10.0, 20.0)) == pytest.approx(0.0)


def test_aggressive_score_is_affine():
    ordering = StyleOrdering((2, 3, 1), np.zeros(3))
    a, b, lam = np.array([0.1, 0.6, 0.3]), np.array([0.5, 0.25, 0.25]), 0.3

    mixed = aggressive_score(lam * a + (1 - lam) * b, ordering)

    assert mixed == pytest.approx(lam * aggressive_score(a, ordering) + (1 - lam) * aggressive_score(b, ordering))


def test_aggressive_score_off_simplex():
    with pytest.raises(ValidationError):
        aggressive_score((0.5, 0.6, 0.0), StyleOrdering.identity(3))


def test_scores_for_every_driver():
    model = model_with(np.full((3, 4), 0.25), theta=[[1, 0, 0], [0.2, 0.3, 0.5]], driver_ids=["x", "y"])

    scores = aggressive_scores(model, StyleOrdering.identity(3))

    assert scores["x"] == pytest.approx(1.0)
    assert scores["y"] == pytest.approx(2.3)


@pytest.mark.parametrize(
    "thresholds, score, level",
    [
        (URBAN_THRESHOLDS, 3.0, 5),
        (URBAN_THRESHOLDS, 2.97, 5),
        (URBAN_THRESHOLDS, 2.3, 4),
        (URBAN_THRESHOLDS, 1.0, 1),
        (HIGHWAY_THRESHOLDS, 1.0, 1),
        (HIGHWAY_THRESHOLDS, 1.03, 2),
        (HIGHWAY_THRESHOLDS, 2.5, 4),
    ],
)
def test_score_to_level(thresholds, score, level):
    assert score_to_level(score, thresholds) == level


def test_score_out_of_range():
    with pytest.raises(RangeError):
        score_to_level(3.5, URBAN_THRESHOLDS)


def test_threshold_presets():
    assert thresholds_for("highway") is HIGHWAY_THRESHOLDS
    with pytest.raises(ValidationError):
        thresholds_for("other")


def test_thresholds_must_ascend():
    with pytest.raises(ValidationError):
        LevelThresholds("urban", (1.2, 1.1, 2.0, 2.5))


def test_subjective_level_range():
    with pytest.raises(RangeError):
        SubjectiveLabel("x", 6)


def test_label_file(tmp_path):
    path = write_labels([SubjectiveLabel("a", 2), SubjectiveLabel("b", 5, "self_report")], tmp_path / "labels.csv")

    assert [label.level for label in read_labels(path)] == [2, 5]
    assert [label.driver_id for label in read_labels(path, source="self_report")] == ["b"]


def test_duplicate_labels(tmp_path):
    path = tmp_path / "labels.csv"
    pd.DataFrame({"driver_id": ["a", "a"], "level": [1, 2]}).to_csv(path, index=False)

    with pytest.raises(DataError):
        read_labels(path)


def test_exact_predictions():
    truth = labels([1, 2, 3, 4, 5])

    confusion = weighted_confusion({label.driver_id: label.level for label in truth}, truth)

    assert confusion.accuracy == pytest.approx(1.0)
    np.testing.assert_array_equal(confusion.raw, np.eye(5, dtype=int))


def test_off_by_one_predictions():
    truth = labels([1, 2, 3, 4, 5])
    pred = {"driver_001": 2, "driver_002": 3, "driver_003": 4, "driver_004": 5, "driver_005": 4}

    confusion = weighted_confusion(pred, truth)

    assert confusion.accuracy == pytest.approx(0.8)
    assert confusion.to_dict()["raw"][4][3] == 1


def test_far_predictions_earn_nothing():
    truth = labels([1, 5])

    confusion = weighted_confusion({"driver_001": 3, "driver_002": 1}, truth)

    assert confusion.accuracy == pytest.approx(0.0)


def test_unmatched_drivers():
    with pytest.raises(DataError, match="driver_009"):
        weighted_confusion({"driver_001": 1, "driver_009": 2}, labels([1]))


def test_fit_separated_clusters():
    rng = np.random.default_rng(0)
    centers = {1: 1.1, 2: 1.5, 3: 2.0, 4: 2.5, 5: 2.9}
    levels = [level for level in centers for _ in range(6)]
    scores = [centers[level] + rng.uniform(-0.05, 0.05) for level in levels]

    fit = fit_thresholds(scores, labels(levels), scenario_tag="urban")

    assert fit.accuracy == pytest.approx(1.0)
    assert not fit.flagged
    assert [score_to_level(s, fit.thresholds) for s in scores] == levels
    assert fit.thresholds.scenario_tag == "urban"


def test_fit_single_label_warns(caplog):
    fit = fit_thresholds([1.2, 1.8, 2.4], labels([3, 3, 3]))

    assert "degenerate" in caplog.text
    assert len(fit.thresholds.cuts) == 4


def test_fit_shuffled_labels_is_flagged():
    rng = np.random.default_rng(1)
    scores = rng.uniform(1.0, 3.0, size=400)
    levels = rng.integers(1, 6, size=400)

    fit = fit_thresholds(scores, labels(levels), grid_step=0.05)

    assert fit.flagged


def test_fit_needs_labels():
    with pytest.raises(ValidationError):
        fit_thresholds([], [])


def two_group_model():
    theta = np.array([[0.8, 0.2], [0.7, 0.3], [0.75, 0.25], [0.2, 0.8], [0.3, 0.7], [0.25, 0.75]])
    model = model_with(np.full((2, 3), 1 / 3), theta=theta)
    attributes = pd.DataFrame(
        {
            "driver_id": model.driver_ids,
            "gender": ["f", "f", "f", "m", "m", "m"],
            "age_band": ["18-25", "26-40", "26-40", "26-40", "41-60", "41-60"],
        }
    )
    return model, attributes


def test_group_report(caplog):
    model, attributes = two_group_model()

    report = group_report(
        model, attributes, columns=("gender", "age_band"), expected_groups={"age_band": ["18-25", "60+"]}
    )

    assert list(report.columns) == ["attribute", "group", "style", "drivers", "mean", "std"]
    female = report[(report["group"] == "f") & (report["style"] == "style_1")].iloc[0]
    assert female["mean"] == pytest.approx(0.75)
    assert female["drivers"] == 3
    single = report[(report["group"] == "18-25") & (report["style"] == "style_1")].iloc[0]
    assert np.isnan(single["std"])
    assert "60+" in caplog.text


def test_group_report_missing_driver():
    model, attributes = two_group_model()

    with pytest.raises(DataError):
        group_report(model, attributes.iloc[1:], columns=("gender",))


def test_group_significance():
    model, attributes = two_group_model()

    table = group_significance(model, attributes, "gender", n_resamples=500, seed=0)

    assert list(table["style"]) == ["style_1", "style_2"]
    np.testing.assert_allclose(table["statistic"], 0.5)
    # only the two label-swapping splits out of 20 reach the observed gap
    assert (table["p_value"] < 0.2).all()


def test_group_significance_needs_two_groups():
    model, attributes = two_group_model()
    attributes["gender"] = "f"

    with pytest.raises(ValidationError):
        group_significance(model, attributes, "gender", n_resamples=10)
