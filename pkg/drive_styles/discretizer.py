"""Discretization of factor scores into driving words.

Each factor is fitted independently with the candidate families, cut into M
equal-probability bins under the selected fit, and the bin tuple of a
fragment is encoded as a mixed-radix word id with factor 1 most significant.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .distributions import DistributionFactory, FittedDistribution
from .errors import DataError, NumericalError, SchemaError, ValidationError
from .factors import FactorScores

logger = logging.getLogger(__name__)

CODEBOOK_SCHEMA_VERSION = 1
MIN_FIT_SAMPLES = 50


def fit_candidates(scores: Sequence[float]) -> List[FittedDistribution]:
    """
    Fit every candidate family to one factor's scores.

    Returns:
        One fit per family that converged, sorted by AIC ascending
    """
    data = np.asarray(scores, dtype=float).ravel()
    if data.size < MIN_FIT_SAMPLES:
        raise ValidationError(f"Distribution fitting needs at least {MIN_FIT_SAMPLES} samples, got {data.size}")
    if not np.isfinite(data).all():
        raise ValidationError("Distribution fitting needs finite scores")
    if not np.std(data) > 0:
        raise NumericalError("Scores have zero variance; no maximum-likelihood fit exists")

    fits = []
    for family in DistributionFactory.get_available_families():
        try:
            fits.append(DistributionFactory.create_distribution(family).fit(data))
        except NumericalError as e:
            logger.warning("Omitting %s candidate: %s", family, e)
    if not fits:
        raise NumericalError("Every candidate distribution failed to fit")
    return sorted(fits, key=lambda fit: fit.aic)


def select_fit(fits: Sequence[FittedDistribution], prefer_gev: bool = True) -> FittedDistribution:
    """GEV when preferred and available, otherwise the minimum-AIC fit."""
    if not fits:
        raise ValidationError("No fitted distributions to select from")
    if prefer_gev:
        for fit in fits:
            if fit.family == "gev":
                return fit
        logger.warning("GEV preferred but not among the fits; selecting by AIC")
    return min(fits, key=lambda fit: fit.aic)


@dataclass(eq=False)
class Codebook:
    """Per-factor interior cut points and the mixed-radix word encoding."""

    cuts: List[np.ndarray]
    M: int
    factor_labels: List[str]
    fits: List[FittedDistribution] = field(default_factory=list)
    candidates: List[List[FittedDistribution]] = field(default_factory=list)

    def __post_init__(self):
        if self.M < 2:
            raise ValidationError(f"M must be at least 2, got {self.M}")
        self.cuts = [np.asarray(c, dtype=float) for c in self.cuts]
        if len(self.cuts) != len(self.factor_labels):
            raise SchemaError(f"{len(self.cuts)} cut lists for {len(self.factor_labels)} factors")
        for label, cuts in zip(self.factor_labels, self.cuts):
            if cuts.shape != (self.M - 1,):
                raise ValidationError(f"Factor {label} needs {self.M - 1} cut points, got {cuts.size}")
            if not np.all(np.diff(cuts) > 0):
                raise ValidationError(f"Cut points of factor {label} are not strictly increasing: {cuts}")

    @property
    def m(self) -> int:
        return len(self.factor_labels)

    @property
    def word_count(self) -> int:
        return self.M**self.m

    def bin_indices(self, scores: np.ndarray) -> np.ndarray:
        """Bins of an (m x N) score matrix; values on a cut go to the upper bin."""
        scores = np.atleast_2d(np.asarray(scores, dtype=float))
        return np.vstack([np.searchsorted(cuts, row, side="right") for cuts, row in zip(self.cuts, scores)])

    def word_ids(self, bins: np.ndarray) -> np.ndarray:
        bins = np.atleast_2d(np.asarray(bins, dtype=np.int64))
        radix = self.M ** np.arange(self.m - 1, -1, -1, dtype=np.int64)
        return radix @ bins

    def decode(self, word: int) -> Tuple[int, ...]:
        if not 0 <= word < self.word_count:
            raise ValidationError(f"Word id {word} outside [0, {self.word_count})")
        digits = []
        for _ in range(self.m):
            word, digit = divmod(int(word), self.M)
            digits.append(digit)
        return tuple(reversed(digits))

    def severities(self) -> np.ndarray:
        """Sum of bin indices of every word, in word-id order."""
        words = np.arange(self.word_count)
        total = np.zeros(self.word_count, dtype=np.int64)
        for _ in range(self.m):
            words, digit = np.divmod(words, self.M)
            total += digit
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": CODEBOOK_SCHEMA_VERSION,
            "M": self.M,
            "m": self.m,
            "word_count": self.word_count,
            "encoding": "mixed-radix, first factor most significant",
            "factor_labels": list(self.factor_labels),
            "cuts": [cuts.tolist() for cuts in self.cuts],
            "fits": [fit.to_dict() for fit in self.fits],
            "candidates": [[fit.to_dict() for fit in fits] for fits in self.candidates],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Codebook":
        return cls(
            cuts=[np.asarray(c, dtype=float) for c in data["cuts"]],
            M=int(data["M"]),
            factor_labels=list(data["factor_labels"]),
            fits=[FittedDistribution.from_dict(f) for f in data.get("fits", [])],
            candidates=[[FittedDistribution.from_dict(f) for f in fits] for fits in data.get("candidates", [])],
        )

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "Codebook":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def build_codebook(
    per_factor_fits: Sequence[FittedDistribution],
    M: int,
    factor_labels: Optional[Sequence[str]] = None,
    candidates: Optional[Sequence[Sequence[FittedDistribution]]] = None,
) -> Codebook:
    """Interior cut points at the fitted quantiles k/M, k = 1..M-1, for every factor."""
    if M < 2:
        raise ValidationError(f"M must be at least 2, got {M}")
    if not per_factor_fits:
        raise ValidationError("build_codebook needs one fit per factor")
    labels = list(factor_labels) if factor_labels is not None else [f"factor_{i + 1}" for i in range(len(per_factor_fits))]

    levels = np.arange(1, M) / M
    all_cuts = []
    for label, fit in zip(labels, per_factor_fits):
        cuts = np.asarray(fit.ppf(levels), dtype=float)
        low, high = fit.support
        if not np.isfinite(cuts).all() or np.any(cuts < low) or np.any(cuts > high) or np.any(np.diff(cuts) <= 0):
            raise NumericalError(
                f"Quantiles of the {fit.family} fit for factor {label} fall outside its support: {cuts}"
            )
        all_cuts.append(cuts)
    return Codebook(
        cuts=all_cuts,
        M=M,
        factor_labels=labels,
        fits=list(per_factor_fits),
        candidates=[list(c) for c in candidates] if candidates else [],
    )


def fit_codebook(
    scores: np.ndarray, M: int, factor_labels: Sequence[str], prefer_gev: bool = True
) -> Codebook:
    """fit_candidates + select_fit per factor row, then build_codebook."""
    scores = np.atleast_2d(scores)
    candidates = [fit_candidates(row) for row in scores]
    selected = [select_fit(fits, prefer_gev) for fits in candidates]
    return build_codebook(selected, M, factor_labels, candidates)


def encode(scores: FactorScores, cb: Codebook) -> np.ndarray:
    """Word id of every fragment of one driver, in fragment order."""
    if list(scores.factor_labels) != list(cb.factor_labels):
        raise SchemaError(f"Factor labels {scores.factor_labels} do not match the codebook's {cb.factor_labels}")
    return cb.word_ids(cb.bin_indices(scores.scores)).astype(np.int64)


def decode(word: int, cb: Codebook) -> Tuple[int, ...]:
    """Bin-index tuple of a word id."""
    return cb.decode(word)


@dataclass(eq=False)
class WordCorpus:
    """Per-driver word sequences over a vocabulary of size M^m."""

    documents: List[np.ndarray]
    driver_ids: List[str]
    vocab_size: int
    scenario_tag: str = "other"

    def __post_init__(self):
        self.documents = [np.asarray(doc, dtype=np.int64).ravel() for doc in self.documents]
        self.driver_ids = [str(d) for d in self.driver_ids]
        if len(self.documents) != len(self.driver_ids):
            raise SchemaError(f"{len(self.documents)} documents for {len(self.driver_ids)} driver ids")
        if len(set(self.driver_ids)) != len(self.driver_ids):
            raise DataError("Driver ids of a corpus must be unique")
        for driver_id, doc in zip(self.driver_ids, self.documents):
            if doc.size and (doc.min() < 0 or doc.max() >= self.vocab_size):
                raise ValidationError(f"Document of {driver_id} has word ids outside [0, {self.vocab_size})")

    @property
    def doc_lengths(self) -> List[int]:
        return [int(doc.size) for doc in self.documents]

    @property
    def token_count(self) -> int:
        return int(sum(self.doc_lengths))

    def __len__(self) -> int:
        return len(self.documents)

    def subset(self, driver_ids: Sequence[str]) -> "WordCorpus":
        index = {d: i for i, d in enumerate(self.driver_ids)}
        missing = [d for d in driver_ids if d not in index]
        if missing:
            raise DataError(f"Drivers not in corpus: {missing}")
        return WordCorpus(
            [self.documents[index[d]] for d in driver_ids], list(driver_ids), self.vocab_size, self.scenario_tag
        )

    def split(self, holdout_fraction: float, seed: int = 0) -> Tuple["WordCorpus", "WordCorpus"]:
        """Random driver-level split into (train, held-out), deterministic under seed."""
        if not 0 < holdout_fraction < 1:
            raise ValidationError(f"holdout_fraction must lie in (0, 1), got {holdout_fraction}")
        order = np.random.default_rng(seed).permutation(len(self))
        n_test = max(1, int(round(holdout_fraction * len(self))))
        test = sorted(order[:n_test])
        train = sorted(order[n_test:])
        return (
            self.subset([self.driver_ids[i] for i in train]),
            self.subset([self.driver_ids[i] for i in test]),
        )

    def to_frame(self) -> pd.DataFrame:
        """Long table of (driver, position, word); an empty document keeps one row with a missing word."""
        rows = []
        for driver_id, doc in zip(self.driver_ids, self.documents):
            if not doc.size:
                rows.append((driver_id, -1, None))
            rows.extend((driver_id, position, int(word)) for position, word in enumerate(doc))
        frame = pd.DataFrame(rows, columns=["driver_id", "fragment_index", "word_id"])
        frame["word_id"] = frame["word_id"].astype("Int64")
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], vocab_size: int, scenario_tag: str = "other") -> "WordCorpus":
        frame = pd.read_csv(path, dtype={"driver_id": str})
        missing = {"driver_id", "fragment_index", "word_id"} - set(frame.columns)
        if missing:
            raise SchemaError(f"Corpus CSV lacks columns {sorted(missing)}")
        documents, driver_ids = [], []
        for driver_id, rows in frame.groupby("driver_id", sort=False):
            rows = rows.dropna(subset=["word_id"]).sort_values("fragment_index")
            driver_ids.append(str(driver_id))
            documents.append(rows["word_id"].to_numpy(dtype=np.int64))
        return cls(documents, driver_ids, vocab_size, scenario_tag)


def encode_corpus(scores: Sequence[FactorScores], cb: Codebook, scenario_tag: str = "other") -> WordCorpus:
    return WordCorpus(
        documents=[encode(s, cb) for s in scores],
        driver_ids=[s.driver_id for s in scores],
        vocab_size=cb.word_count,
        scenario_tag=scenario_tag,
    )
