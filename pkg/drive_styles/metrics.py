"""Model-quality metrics: perplexity, normalized perplexity and style entropy."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import entr

from .discretizer import WordCorpus
from .errors import DataError, NumericalError, SchemaError, ValidationError
from .hlm import Hyperparams, StyleModel, fold_in, train

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["param", "value", "metric", "score", "seed"]


@dataclass(eq=False)
class MetricsReport:
    perplexity: float
    normalized_perplexity: float
    style_entropies: np.ndarray
    mean_entropy: float
    token_count: int
    vocab_size: int
    heldout_perplexity: Optional[float] = None
    heldout_normalized_perplexity: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "perplexity": self.perplexity,
            "normalized_perplexity": self.normalized_perplexity,
            "mean_entropy": self.mean_entropy,
            "token_count": self.token_count,
            "vocab_size": self.vocab_size,
        }
        for k, value in enumerate(self.style_entropies, start=1):
            data[f"entropy_style_{k}"] = float(value)
        if self.heldout_perplexity is not None:
            data["heldout_perplexity"] = self.heldout_perplexity
            data["heldout_normalized_perplexity"] = self.heldout_normalized_perplexity
        return data

    def to_frame(self) -> pd.DataFrame:
        """Two columns, metric and value; the layout of metrics.csv."""
        return pd.DataFrame(list(self.to_dict().items()), columns=["metric", "value"])


def _token_log_likelihoods(theta: np.ndarray, phi: np.ndarray, documents: Sequence[np.ndarray]) -> np.ndarray:
    # log sum_k theta_dk phi_k,w for every token, documents concatenated
    logs = []
    for theta_d, doc in zip(theta, documents):
        probs = theta_d @ phi[:, doc]
        if np.any(probs <= 0):
            raise NumericalError("A token has zero probability under the model; estimates must be smoothed")
        logs.append(np.log(probs))
    return np.concatenate(logs) if logs else np.zeros(0)


def _driver_rows(model: StyleModel, corpus: WordCorpus) -> np.ndarray:
    index = {driver_id: i for i, driver_id in enumerate(model.driver_ids)}
    missing = [d for d in corpus.driver_ids if d not in index]
    if missing:
        raise DataError(f"Drivers without a style mixture in the model: {missing}")
    return model.theta[[index[d] for d in corpus.driver_ids]]


def _check_vocab(model: StyleModel, corpus: WordCorpus) -> None:
    if corpus.vocab_size != model.V:
        raise SchemaError(f"Corpus vocabulary {corpus.vocab_size} does not match the model's {model.V}")


def _perplexity_from_logs(logs: np.ndarray, vocab_size: int) -> Tuple[float, float]:
    if logs.size == 0:
        raise ValidationError("Perplexity needs at least one token")
    eta = float(np.exp(-np.sum(logs) / logs.size))
    return eta, eta / vocab_size


def perplexity(model: StyleModel, corpus: WordCorpus) -> Tuple[float, float]:
    """
    Perplexity of a corpus whose drivers the model was trained on.

    Returns:
        (perplexity, perplexity divided by the vocabulary size)
    """
    _check_vocab(model, corpus)
    logs = _token_log_likelihoods(_driver_rows(model, corpus), model.phi, corpus.documents)
    return _perplexity_from_logs(logs, corpus.vocab_size)


def heldout_perplexity(
    model: StyleModel, corpus: WordCorpus, sweeps: int = 50, seed: int = 0
) -> Tuple[float, float]:
    """Perplexity of unseen drivers; each mixture is folded in with phi held fixed."""
    _check_vocab(model, corpus)
    seeds = np.random.SeedSequence(seed).generate_state(max(len(corpus), 1))
    theta = np.vstack(
        [fold_in(model.phi, doc, model.hyper.alpha, sweeps, int(s)) for doc, s in zip(corpus.documents, seeds)]
    ) if len(corpus) else np.zeros((0, model.K))
    logs = _token_log_likelihoods(theta, model.phi, corpus.documents)
    return _perplexity_from_logs(logs, corpus.vocab_size)


def style_entropy(model: StyleModel) -> Tuple[np.ndarray, float]:
    """Shannon entropy in nats of every style's word distribution, and their mean."""
    entropies = entr(model.phi).sum(axis=1)
    return entropies, float(entropies.mean())


def metrics_report(
    model: StyleModel, corpus: WordCorpus, heldout: Optional[WordCorpus] = None, seed: int = 0
) -> MetricsReport:
    eta, eta_bar = perplexity(model, corpus)
    entropies, mean_entropy = style_entropy(model)
    report = MetricsReport(
        perplexity=eta,
        normalized_perplexity=eta_bar,
        style_entropies=entropies,
        mean_entropy=mean_entropy,
        token_count=corpus.token_count,
        vocab_size=corpus.vocab_size,
    )
    if heldout is not None and len(heldout):
        report.heldout_perplexity, report.heldout_normalized_perplexity = heldout_perplexity(
            model, heldout, seed=seed
        )
    return report


@dataclass(frozen=True)
class SweepSettings:
    """Trainer settings shared by every sweep cell."""

    base_M: int = 5
    base_K: int = 3
    alpha: Optional[float] = None
    beta: float = 0.1
    iters: int = 500
    burn_in: int = 100
    thin: int = 10
    seeds: Tuple[int, ...] = (0,)
    holdout_fraction: float = 0.0
    max_workers: Optional[int] = None


def _sweep_cell(
    param: str, value: int, corpus: WordCorpus, K: int, seed: int, settings: SweepSettings
) -> List[Tuple[str, int, str, float, int]]:
    hyper = Hyperparams.symmetric(K, corpus.vocab_size, settings.alpha, settings.beta)
    fit_corpus, test_corpus = corpus, None
    if settings.holdout_fraction > 0:
        if len(corpus) >= 2:
            fit_corpus, test_corpus = corpus.split(settings.holdout_fraction, seed)
        else:
            logger.warning("Fewer than two drivers; %s=%d is scored on the training corpus", param, value)

    model, _ = train(fit_corpus, hyper, settings.iters, settings.burn_in, seed, settings.thin)
    if test_corpus is not None:
        _, eta_bar = heldout_perplexity(model, test_corpus, seed=seed)
    else:
        _, eta_bar = perplexity(model, fit_corpus)
    _, mean_entropy = style_entropy(model)
    return [
        (param, value, "normalized_perplexity", eta_bar, seed),
        (param, value, "mean_entropy", mean_entropy, seed),
    ]


def sweep_hyperparams(
    corpus_builder: Callable[[int], WordCorpus],
    m_values: Sequence[int],
    k_values: Sequence[int],
    settings: Optional[SweepSettings] = None,
) -> pd.DataFrame:
    """
    Train one model per (M, seed) and per (K, seed) cell.

    Args:
        corpus_builder: returns the word corpus for a bin count M (codebook rebuilt per M)
        m_values: bin counts; each cell trains with settings.base_K styles
        k_values: style counts; each cell uses the corpus for settings.base_M

    Returns:
        Long table with columns param, value, metric, score, seed
    """
    settings = settings or SweepSettings()
    if not m_values and not k_values:
        raise ValidationError("Sweep needs at least one M or K value")

    corpora = {M: corpus_builder(M) for M in sorted(set(m_values) | ({settings.base_M} if k_values else set()))}
    cells = [("M", M, corpora[M], settings.base_K, seed) for M in m_values for seed in settings.seeds]
    cells += [("K", K, corpora[settings.base_M], K, seed) for K in k_values for seed in settings.seeds]

    with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
        results = list(pool.map(lambda cell: _sweep_cell(*cell, settings), cells))

    table = pd.DataFrame([row for rows in results for row in rows], columns=SWEEP_COLUMNS)
    logger.info("Sweep finished: %d cells", len(cells))
    return table


def sweep_summary(table: pd.DataFrame) -> pd.DataFrame:
    """Median score over seeds per (param, value, metric)."""
    return table.groupby(["param", "value", "metric"], as_index=False)["score"].median()
