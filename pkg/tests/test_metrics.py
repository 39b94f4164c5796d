import numpy as np
import pytest
from scipy import stats

from drive_styles.discretizer import WordCorpus, encode_corpus, fit_codebook
from drive_styles.errors import DataError, NumericalError, SchemaError
from drive_styles.factors import FactorScores
from drive_styles.hlm import Hyperparams, StyleModel
from drive_styles.metrics import (
    SWEEP_COLUMNS,
    SweepSettings,
    heldout_perplexity,
    metrics_report,
    perplexity,
    style_entropy,
    sweep_hyperparams,
    sweep_summary,
)


def fixed_model(phi, theta=None, driver_ids=("a",)):
    phi = np.asarray(phi, dtype=float)
    K, V = phi.shape
    if theta is None:
        theta = np.full((len(driver_ids), K), 1.0 / K)
    return StyleModel(np.asarray(theta, dtype=float), phi, Hyperparams.symmetric(K, V), list(driver_ids))


def test_uniform_model_perplexity_is_vocabulary_size():
    model = fixed_model(np.full((3, 125), 1 / 125), theta=[[0.2, 0.5, 0.3]])
    corpus = WordCorpus([np.array([0, 17, 124, 3])], ["a"], vocab_size=125)

    eta, eta_bar = perplexity(model, corpus)

    assert eta == pytest.approx(125.0)
    assert eta_bar == pytest.approx(1.0)


def test_hand_computed_perplexity():
    model = fixed_model([[0.5, 0.25, 0.25]])
    corpus = WordCorpus([np.array([0, 1])], ["a"], vocab_size=3)

    eta, _ = perplexity(model, corpus)

    assert eta == pytest.approx(2 * np.sqrt(2))


def test_concentrated_model_perplexity_near_one():
    model = fixed_model([[1 - 1e-9, 5e-10, 5e-10]])
    corpus = WordCorpus([np.zeros(10, dtype=int)], ["a"], vocab_size=3)

    eta, _ = perplexity(model, corpus)

    assert eta == pytest.approx(1.0, abs=1e-6)


def test_zero_probability_token():
    model = fixed_model([[1.0, 0.0, 0.0]])
    corpus = WordCorpus([np.array([0, 1])], ["a"], vocab_size=3)

    with pytest.raises(NumericalError):
        perplexity(model, corpus)


def test_vocabulary_mismatch():
    model = fixed_model(np.full((1, 4), 0.25))
    corpus = WordCorpus([np.array([0])], ["a"], vocab_size=3)

    with pytest.raises(SchemaError):
        perplexity(model, corpus)


def test_unknown_driver():
    model = fixed_model(np.full((1, 3), 1 / 3))
    corpus = WordCorpus([np.array([0])], ["stranger"], vocab_size=3)

    with pytest.raises(DataError, match="stranger"):
        perplexity(model, corpus)


def test_heldout_perplexity_of_uniform_model():
    model = fixed_model(np.full((2, 8), 1 / 8))
    unseen = WordCorpus([np.array([1, 2, 3]), np.array([7])], ["x", "y"], vocab_size=8)

    eta, eta_bar = heldout_perplexity(model, unseen, sweeps=10)

    assert eta == pytest.approx(8.0)
    assert eta_bar == pytest.approx(1.0)


@pytest.mark.parametrize(
    "phi_row, expected",
    [
        (np.full(125, 1 / 125), np.log(125)),
        (np.eye(125)[0], 0.0),
        (np.r_[0.5, 0.5, np.zeros(123)], np.log(2)),
    ],
)
def test_style_entropy(phi_row, expected):
    entropies, mean = style_entropy(fixed_model(phi_row[None, :]))

    assert entropies[0] == pytest.approx(expected)
    assert mean == pytest.approx(expected)


def test_metrics_report_layout(tiny_corpus):
    model = fixed_model(np.full((2, 3), 1 / 3), driver_ids=tiny_corpus.driver_ids)

    report = metrics_report(model, tiny_corpus)
    frame = report.to_frame()

    assert list(frame.columns) == ["metric", "value"]
    assert set(frame["metric"]) >= {"perplexity", "normalized_perplexity", "entropy_style_1", "entropy_style_2"}
    assert report.heldout_perplexity is None


def test_sweep_table(planted_corpus):
    corpus = planted_corpus[0]
    settings = SweepSettings(base_M=4, base_K=3, iters=30, burn_in=10, seeds=(0, 1))

    table = sweep_hyperparams(lambda M: corpus, [3, 4], [1, 3], settings)

    assert list(table.columns) == SWEEP_COLUMNS
    # 4 cells x 2 seeds x 2 metrics
    assert len(table) == 16
    assert np.isfinite(table["score"]).all()
    summary = sweep_summary(table)
    assert len(summary) == 8


def test_entropy_drops_with_more_styles(planted_corpus):
    corpus = planted_corpus[0]
    settings = SweepSettings(base_M=4, alpha=0.3, beta=0.05, iters=150, burn_in=50, seeds=(0, 1, 2))

    summary = sweep_summary(sweep_hyperparams(lambda M: corpus, [], [1, 3], settings))

    entropy = summary[summary["metric"] == "mean_entropy"].set_index("value")["score"]
    assert entropy[3] < entropy[1]


def test_single_driver_sweep_with_holdout(caplog):
    corpus = WordCorpus([np.array([0, 1, 2, 2, 1])], ["solo"], vocab_size=3)
    settings = SweepSettings(base_M=2, base_K=2, iters=20, burn_in=5, holdout_fraction=0.3)

    table = sweep_hyperparams(lambda M: corpus, [2], [], settings)

    assert len(table) == 2
    assert np.isfinite(table["score"]).all()
    assert "Fewer than two drivers" in caplog.text


def leveled_cohort(groups=15, tokens=400, seed=0):
    """
    Two factors whose scores sit on four equally likely levels.

    Style k puts factor j on level (k + j) % 4 most of the time. Mixtures come in
    groups of four rotations so that pooled style use, and with it each factor's
    marginal, is balanced; the scores are then standard normal.
    """
    rng = np.random.default_rng(seed)
    K = 4
    drivers = []
    for _ in range(groups):
        theta = rng.dirichlet(np.full(K, 0.5))
        for shift in range(K):
            styles = rng.choice(K, size=tokens, p=np.roll(theta, shift))
            rows = []
            for j in range(2):
                level = np.where(rng.random(tokens) < 0.85, (styles + j) % K, rng.integers(0, K, size=tokens))
                rows.append(stats.norm.ppf((level + rng.uniform(0.005, 0.995, size=tokens)) / K))
            drivers.append(FactorScores(f"driver_{len(drivers):03d}", np.vstack(rows), ["f1", "f2"]))
    return drivers


@pytest.mark.slow
def test_sweep_recovers_four_levels_and_entropy_falls():
    drivers = leveled_cohort()
    pooled = np.hstack([d.scores for d in drivers])

    def build(M):
        return encode_corpus(drivers, fit_codebook(pooled, M, ["f1", "f2"], prefer_gev=False))

    settings = SweepSettings(base_M=4, base_K=4, alpha=0.5, iters=300, burn_in=100, seeds=(0, 1, 2))
    summary = sweep_summary(sweep_hyperparams(build, [2, 3, 4, 5, 6], [1, 2, 3, 4, 5, 6], settings))

    eta_bar = summary[(summary["param"] == "M") & (summary["metric"] == "normalized_perplexity")]
    assert eta_bar.set_index("value")["score"].idxmin() in (3, 4, 5)
    entropy = summary[(summary["param"] == "K") & (summary["metric"] == "mean_entropy")]
    entropy = entropy.set_index("value")["score"].sort_index()
    assert list(entropy.index) == [1, 2, 3, 4, 5, 6]
    assert np.all(np.diff(entropy.to_numpy()) <= 0.05)
