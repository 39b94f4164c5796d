"""
Hierarchical latent driving-style model.

Drivers are documents, driving words are tokens and driving styles are
topics: each driver mixes K shared styles (theta) and each style is a
distribution over the word vocabulary (phi), both under Dirichlet priors.
Inference is collapsed Gibbs sampling over the per-fragment style
assignments with theta and phi integrated out.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numba import njit
from scipy.special import gammaln

from .discretizer import WordCorpus
from .errors import InternalConsistencyError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Hyperparams:
    """Dirichlet parameters: alpha over the K styles, beta over the V words."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta"):
            values = np.array(getattr(self, name), dtype=float).ravel()
            if values.size == 0 or not np.all(np.isfinite(values)) or np.any(values <= 0):
                raise ValidationError(f"{name} must be a non-empty vector of positive reals")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def K(self) -> int:
        return self.alpha.size

    @property
    def V(self) -> int:
        return self.beta.size

    @classmethod
    def symmetric(cls, K: int, V: int, alpha: Optional[float] = None, beta: float = 0.1) -> "Hyperparams":
        """Symmetric priors; alpha defaults to 50 / K."""
        if K < 1 or V < 1:
            raise ValidationError(f"K and V must be positive, got K={K}, V={V}")
        alpha = 50.0 / K if alpha is None else alpha
        return cls(alpha=np.full(K, float(alpha)), beta=np.full(V, float(beta)))

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(), "K": self.K, "V": self.V}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Hyperparams":
        return cls(alpha=np.asarray(data["alpha"], dtype=float), beta=np.asarray(data["beta"], dtype=float))


@dataclass(eq=False)
class GibbsState:
    """Token assignments and the count matrices tallied from them.

    Tokens are stored flat (document after document); ``doc_offsets[d]`` is
    the position of document d's first token. Documents are visited in
    driver-id order and each draws its uniforms from its own stream, so
    reordering the corpus only reorders the result.
    """

    words: np.ndarray
    doc_index: np.ndarray
    doc_offsets: np.ndarray
    z: np.ndarray
    doc_topic_counts: np.ndarray
    topic_word_counts: np.ndarray
    topic_totals: np.ndarray
    rng_seed: int = 0
    doc_rngs: List[np.random.Generator] = field(default_factory=list)
    visit_order: Optional[np.ndarray] = None
    iteration: int = 0

    @staticmethod
    def _flatten(corpus: WordCorpus) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        lengths = np.asarray(corpus.doc_lengths, dtype=np.int64)
        words = np.concatenate(corpus.documents).astype(np.int64) if len(corpus) else np.zeros(0, np.int64)
        doc_index = np.repeat(np.arange(len(corpus), dtype=np.int64), lengths)
        offsets = np.concatenate(([0], np.cumsum(lengths))).astype(np.int64)
        return words, doc_index, offsets

    @classmethod
    def from_assignments(
        cls, corpus: WordCorpus, z: np.ndarray, hyper: Hyperparams, seed: int = 0
    ) -> "GibbsState":
        words, doc_index, offsets = cls._flatten(corpus)
        z = np.asarray(z, dtype=np.int64).ravel()
        if z.size != words.size:
            raise SchemaError(f"{z.size} assignments for {words.size} tokens")
        if z.size and (z.min() < 0 or z.max() >= hyper.K):
            raise ValidationError(f"Assignments must lie in [0, {hyper.K})")
        state = cls(
            words=words,
            doc_index=doc_index,
            doc_offsets=offsets,
            z=z.copy(),
            doc_topic_counts=np.zeros((len(corpus), hyper.K), dtype=np.int64),
            topic_word_counts=np.zeros((hyper.K, hyper.V), dtype=np.int64),
            topic_totals=np.zeros(hyper.K, dtype=np.int64),
            rng_seed=int(seed),
        )
        state.visit_order, state.doc_rngs = document_streams(corpus.driver_ids, offsets, seed)
        state.doc_topic_counts, state.topic_word_counts, state.topic_totals = state.tally(hyper.K, hyper.V)
        return state

    @classmethod
    def initialize(cls, corpus: WordCorpus, hyper: Hyperparams, seed: int) -> "GibbsState":
        """Uniformly random assignments drawn from the seed."""
        if corpus.vocab_size != hyper.V:
            raise SchemaError(f"Corpus vocabulary {corpus.vocab_size} does not match beta length {hyper.V}")
        offsets = np.concatenate(([0], np.cumsum(corpus.doc_lengths))).astype(np.int64)
        visit_order, doc_rngs = document_streams(corpus.driver_ids, offsets, seed)
        z = np.concatenate(
            [rng.integers(0, hyper.K, size=n) for rng, n in zip(doc_rngs, corpus.doc_lengths)] or [np.zeros(0, np.int64)]
        )
        state = cls.from_assignments(corpus, z, hyper, seed)
        state.visit_order, state.doc_rngs = visit_order, doc_rngs
        return state

    @property
    def K(self) -> int:
        return self.topic_totals.size

    def token(self, doc: int, pos: int) -> int:
        return int(self.doc_offsets[doc] + pos)

    def assignments(self) -> List[np.ndarray]:
        return [self.z[self.doc_offsets[d] : self.doc_offsets[d + 1]].copy() for d in range(len(self.doc_offsets) - 1)]

    def tally(self, K: Optional[int] = None, V: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Counts recomputed from the assignments."""
        K = self.K if K is None else K
        V = self.topic_word_counts.shape[1] if V is None else V
        ndk = np.zeros((len(self.doc_offsets) - 1, K), dtype=np.int64)
        nkw = np.zeros((K, V), dtype=np.int64)
        np.add.at(ndk, (self.doc_index, self.z), 1)
        np.add.at(nkw, (self.z, self.words), 1)
        return ndk, nkw, np.bincount(self.z, minlength=K).astype(np.int64)

    def is_consistent(self) -> bool:
        ndk, nkw, nk = self.tally()
        return (
            np.array_equal(ndk, self.doc_topic_counts)
            and np.array_equal(nkw, self.topic_word_counts)
            and np.array_equal(nk, self.topic_totals)
        )

    def decrement(self, t: int) -> None:
        k, d, w = self.z[t], self.doc_index[t], self.words[t]
        self.doc_topic_counts[d, k] -= 1
        self.topic_word_counts[k, w] -= 1
        self.topic_totals[k] -= 1

    def increment(self, t: int, k: int) -> None:
        d, w = self.doc_index[t], self.words[t]
        self.z[t] = k
        self.doc_topic_counts[d, k] += 1
        self.topic_word_counts[k, w] += 1
        self.topic_totals[k] += 1


@njit(nogil=True)
def _sweep_kernel(words, doc_index, z, ndk, nkw, nk, alpha, beta, beta_sum, uniforms, order):
    # returns the index of the first token with a negative count, or -1
    K = alpha.shape[0]
    p = np.empty(K)
    for i in range(order.shape[0]):
        t = order[i]
        d = doc_index[t]
        w = words[t]
        k = z[t]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        if ndk[d, k] < 0 or nkw[k, w] < 0 or nk[k] < 0:
            return t
        total = 0.0
        for j in range(K):
            p[j] = (nkw[j, w] + beta[w]) / (nk[j] + beta_sum) * (ndk[d, j] + alpha[j])
            total += p[j]
        threshold = uniforms[t] * total
        new = K - 1
        acc = 0.0
        for j in range(K):
            acc += p[j]
            if threshold < acc:
                new = j
                break
        z[t] = new
        ndk[d, new] += 1
        nkw[new, w] += 1
        nk[new] += 1
    return -1


@njit(nogil=True)
def _fold_in_kernel(words, z, ndk, phi, alpha, uniforms):
    K = alpha.shape[0]
    p = np.empty(K)
    for t in range(words.shape[0]):
        w = words[t]
        ndk[z[t]] -= 1
        total = 0.0
        for j in range(K):
            p[j] = phi[j, w] * (ndk[j] + alpha[j])
            total += p[j]
        threshold = uniforms[t] * total
        new = K - 1
        acc = 0.0
        for j in range(K):
            acc += p[j]
            if threshold < acc:
                new = j
                break
        z[t] = new
        ndk[new] += 1


def document_streams(
    driver_ids: Sequence[str], doc_offsets: np.ndarray, seed: int
) -> Tuple[np.ndarray, List[np.random.Generator]]:
    """
    Token visit order and one random stream per document.

    Streams are spawned from the seed and handed out by the rank of each
    driver id, so a document keeps its stream wherever it sits in the corpus.
    """
    ranked = sorted(range(len(driver_ids)), key=lambda d: driver_ids[d])
    children = np.random.SeedSequence(seed).spawn(len(driver_ids))
    rank_of = {d: rank for rank, d in enumerate(ranked)}
    doc_rngs = [np.random.default_rng(children[rank_of[d]]) for d in range(len(driver_ids))]
    spans = [np.arange(doc_offsets[d], doc_offsets[d + 1], dtype=np.int64) for d in ranked]
    order = np.concatenate(spans) if spans else np.zeros(0, np.int64)
    return order, doc_rngs


def gibbs_conditional(state: GibbsState, hyper: Hyperparams, doc: int, pos: int) -> np.ndarray:
    """
    Full conditional over the K styles for token ``pos`` of document ``doc``.

    The token must already be removed from the counts. The per-document
    normalizer is constant in k and is left out before normalizing.
    """
    w = state.words[state.token(doc, pos)]
    ndk = state.doc_topic_counts[doc]
    nkw = state.topic_word_counts[:, w]
    nk = state.topic_totals
    if (ndk < 0).any() or (nkw < 0).any() or (nk < 0).any():
        raise InternalConsistencyError(f"Negative count at document {doc}, position {pos}")
    weights = (nkw + hyper.beta[w]) / (nk + hyper.beta.sum()) * (ndk + hyper.alpha)
    return weights / weights.sum()


def gibbs_sweep(state: GibbsState, hyper: Hyperparams) -> GibbsState:
    """Resample every token once, documents in driver-id order; mutates and returns the state."""
    if state.visit_order is None:
        ids = [str(d) for d in range(len(state.doc_offsets) - 1)]
        state.visit_order, state.doc_rngs = document_streams(ids, state.doc_offsets, state.rng_seed)
    uniforms = np.empty(state.words.size)
    for d, rng in enumerate(state.doc_rngs):
        start, stop = state.doc_offsets[d], state.doc_offsets[d + 1]
        uniforms[start:stop] = rng.random(stop - start)
    failed = _sweep_kernel(
        state.words,
        state.doc_index,
        state.z,
        state.doc_topic_counts,
        state.topic_word_counts,
        state.topic_totals,
        np.asarray(hyper.alpha),
        np.asarray(hyper.beta),
        float(hyper.beta.sum()),
        uniforms,
        state.visit_order,
    )
    if failed >= 0:
        raise InternalConsistencyError(
            f"Negative count while resampling token {failed} in sweep {state.iteration + 1}"
        )
    state.iteration += 1
    return state


@dataclass(eq=False)
class StyleModel:
    """Point estimates: theta (drivers x styles) and phi (styles x words)."""

    theta: np.ndarray
    phi: np.ndarray
    hyper: Hyperparams
    driver_ids: List[str]
    provenance: Dict[str, Any] = field(default_factory=dict)
    scenario_tag: str = "other"

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    @property
    def V(self) -> int:
        return self.phi.shape[1]

    def theta_for(self, driver_id: str) -> np.ndarray:
        return self.theta[self.driver_ids.index(driver_id)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "scenario_tag": self.scenario_tag,
            "driver_ids": list(self.driver_ids),
            "theta": self.theta.tolist(),
            "phi": self.phi.tolist(),
            "hyper": self.hyper.to_dict(),
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "StyleModel":
        return cls(
            theta=np.asarray(data["theta"], dtype=float).reshape(len(data["driver_ids"]), -1),
            phi=np.asarray(data["phi"], dtype=float),
            hyper=Hyperparams.from_dict(data["hyper"]),
            driver_ids=list(data["driver_ids"]),
            provenance=dict(data.get("provenance", {})),
            scenario_tag=data.get("scenario_tag", "other"),
        )

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "StyleModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def estimate_from_counts(
    doc_topic_counts: np.ndarray,
    topic_word_counts: np.ndarray,
    hyper: Hyperparams,
    driver_ids: Sequence[str],
    provenance: Optional[Dict[str, Any]] = None,
    scenario_tag: str = "other",
) -> StyleModel:
    """Smoothed posterior means; counts may be averages over several samples."""
    theta = np.asarray(doc_topic_counts, dtype=float) + hyper.alpha
    phi = np.asarray(topic_word_counts, dtype=float) + hyper.beta
    return StyleModel(
        theta=theta / theta.sum(axis=1, keepdims=True),
        phi=phi / phi.sum(axis=1, keepdims=True),
        hyper=hyper,
        driver_ids=list(driver_ids),
        provenance=dict(provenance or {}),
        scenario_tag=scenario_tag,
    )


def estimate(
    state: GibbsState,
    hyper: Hyperparams,
    driver_ids: Optional[Sequence[str]] = None,
    scenario_tag: str = "other",
) -> StyleModel:
    """theta and phi from the current counts of a state."""
    if driver_ids is None:
        driver_ids = [str(d) for d in range(state.doc_topic_counts.shape[0])]
    return estimate_from_counts(
        state.doc_topic_counts,
        state.topic_word_counts,
        hyper,
        driver_ids,
        {"iteration": state.iteration, "seed": state.rng_seed},
        scenario_tag,
    )


def _log_dirichlet_terms(counts: np.ndarray, prior: np.ndarray) -> List[np.ndarray]:
    # log Delta(counts + prior) - log Delta(prior) for every row, as separate terms
    posterior = counts + prior
    rows = posterior.shape[0]
    return [
        gammaln(posterior).ravel(),
        -gammaln(posterior.sum(axis=1)),
        -np.tile(gammaln(prior), rows),
        np.full(rows, gammaln(prior.sum())),
    ]


def joint_log_prob_from_counts(
    doc_topic_counts: np.ndarray, topic_word_counts: np.ndarray, hyper: Hyperparams
) -> float:
    """log p(z, w | alpha, beta) from count matrices, summed exactly with math.fsum."""
    terms = _log_dirichlet_terms(np.asarray(topic_word_counts, dtype=float), hyper.beta)
    terms += _log_dirichlet_terms(np.asarray(doc_topic_counts, dtype=float).reshape(-1, hyper.K), hyper.alpha)
    return math.fsum(np.concatenate(terms))


def exact_joint_log_prob(corpus: WordCorpus, z: Sequence[np.ndarray], hyper: Hyperparams) -> float:
    """
    Exact log joint of assignments and words with theta and phi integrated out.

    Args:
        corpus: the documents
        z: one assignment array per document
        hyper: priors; beta length must equal the corpus vocabulary
    """
    if len(z) != len(corpus):
        raise SchemaError(f"{len(z)} assignment arrays for {len(corpus)} documents")
    flat = np.concatenate([np.asarray(a, dtype=np.int64).ravel() for a in z]) if len(z) else np.zeros(0, np.int64)
    state = GibbsState.from_assignments(corpus, flat, hyper)
    return joint_log_prob_from_counts(state.doc_topic_counts, state.topic_word_counts, hyper)


@dataclass(eq=False)
class TrainingDiagnostics:
    iterations: int
    burn_in: int
    thin: int
    seed: int
    samples_averaged: int
    log_prob_trace: np.ndarray
    final_assignments: List[np.ndarray] = field(default_factory=list)
    chain_traces: Dict[int, np.ndarray] = field(default_factory=dict)

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"iteration": np.arange(1, self.log_prob_trace.size + 1), "joint_log_prob": self.log_prob_trace}
        )


def _check_training_args(corpus: WordCorpus, hyper: Hyperparams, iters: int, burn_in: int, thin: int) -> None:
    if len(corpus) == 0 or corpus.token_count == 0:
        raise ValidationError("Cannot train on an empty corpus")
    if corpus.vocab_size != hyper.V:
        raise SchemaError(f"Corpus vocabulary {corpus.vocab_size} does not match beta length {hyper.V}")
    if not iters > burn_in >= 0:
        raise ValidationError(f"Need iterations > burn_in >= 0, got iterations={iters}, burn_in={burn_in}")
    if thin < 1:
        raise ValidationError(f"thin must be at least 1, got {thin}")


def train(
    corpus: WordCorpus,
    hyper: Hyperparams,
    iters: int = 2000,
    burn_in: int = 500,
    seed: int = 0,
    thin: int = 10,
    single_sample: bool = False,
) -> Tuple[StyleModel, TrainingDiagnostics]:
    """
    Collapsed Gibbs training from a random initialization.

    Args:
        iters: total sweeps
        burn_in: sweeps discarded before collecting samples
        thin: count matrices are averaged every ``thin`` sweeps after burn-in
        single_sample: estimate from the final state only

    Returns:
        (StyleModel, TrainingDiagnostics with the joint log-probability trace)
    """
    _check_training_args(corpus, hyper, iters, burn_in, thin)
    state = GibbsState.initialize(corpus, hyper, seed)
    trace = np.empty(iters)
    ndk_sum = np.zeros(state.doc_topic_counts.shape)
    nkw_sum = np.zeros(state.topic_word_counts.shape)
    samples = 0

    for it in range(1, iters + 1):
        gibbs_sweep(state, hyper)
        trace[it - 1] = joint_log_prob_from_counts(state.doc_topic_counts, state.topic_word_counts, hyper)
        if not single_sample and it > burn_in and (it - burn_in) % thin == 0:
            ndk_sum += state.doc_topic_counts
            nkw_sum += state.topic_word_counts
            samples += 1
        if it % 100 == 0:
            logger.debug("sweep %d/%d, joint log-probability %.3f", it, iters, trace[it - 1])

    if samples == 0:
        ndk_sum, nkw_sum, samples = state.doc_topic_counts.astype(float), state.topic_word_counts.astype(float), 1

    provenance = {
        "iterations": iters,
        "burn_in": burn_in,
        "thin": thin,
        "seed": seed,
        "samples_averaged": samples,
        "single_sample": single_sample,
    }
    model = estimate_from_counts(
        ndk_sum / samples, nkw_sum / samples, hyper, corpus.driver_ids, provenance, corpus.scenario_tag
    )
    diagnostics = TrainingDiagnostics(
        iterations=iters,
        burn_in=burn_in,
        thin=thin,
        seed=seed,
        samples_averaged=samples,
        log_prob_trace=trace,
        final_assignments=state.assignments(),
    )
    return model, diagnostics


def chain_seeds(seed: int, chains: int) -> List[int]:
    """The seed itself for one chain, independent spawned seeds otherwise."""
    if chains < 1:
        raise ValidationError(f"chains must be at least 1, got {chains}")
    if chains == 1:
        return [int(seed)]
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(chains)]


def train_chains(
    corpus: WordCorpus,
    hyper: Hyperparams,
    iters: int = 2000,
    burn_in: int = 500,
    seed: int = 0,
    thin: int = 10,
    chains: int = 1,
    max_workers: Optional[int] = None,
    single_sample: bool = False,
) -> Tuple[StyleModel, TrainingDiagnostics]:
    """Independent chains run concurrently; the chain with the highest final joint log-probability wins."""
    seeds = chain_seeds(seed, chains)
    with ThreadPoolExecutor(max_workers=max_workers or len(seeds)) as pool:
        results = list(pool.map(lambda s: train(corpus, hyper, iters, burn_in, s, thin, single_sample), seeds))

    finals = [diagnostics.log_prob_trace[-1] for _, diagnostics in results]
    best = int(np.argmax(finals))
    model, diagnostics = results[best]
    diagnostics.chain_traces = {s: d.log_prob_trace for s, (_, d) in zip(seeds, results)}
    model.provenance["chains"] = len(seeds)
    model.provenance["chain_seed"] = seeds[best]
    if len(seeds) > 1:
        logger.info("Selected chain %d of %d (final joint log-probability %.3f)", best + 1, len(seeds), finals[best])
    return model, diagnostics


def posterior_samples(
    corpus: WordCorpus,
    hyper: Hyperparams,
    n_samples: int,
    burn_in: int = 1000,
    seed: int = 0,
    thin: int = 1,
) -> np.ndarray:
    """Post-burn-in assignment draws, one row per kept sweep (tokens flattened in document order)."""
    _check_training_args(corpus, hyper, burn_in + 1, burn_in, thin)
    state = GibbsState.initialize(corpus, hyper, seed)
    for _ in range(burn_in):
        gibbs_sweep(state, hyper)
    draws = np.empty((n_samples, state.z.size), dtype=np.int64)
    for i in range(n_samples):
        for _ in range(thin):
            gibbs_sweep(state, hyper)
        draws[i] = state.z
    return draws


def fold_in(
    phi: np.ndarray, document: np.ndarray, alpha: np.ndarray, sweeps: int = 50, seed: int = 0
) -> np.ndarray:
    """
    Style mixture of an unseen document with phi held fixed.

    Counts are averaged over the second half of the sweeps.
    """
    alpha = np.asarray(alpha, dtype=float)
    words = np.asarray(document, dtype=np.int64).ravel()
    if words.size == 0:
        return alpha / alpha.sum()
    rng = np.random.default_rng(seed)
    z = rng.integers(0, alpha.size, size=words.size).astype(np.int64)
    ndk = np.bincount(z, minlength=alpha.size).astype(np.int64)
    phi = np.ascontiguousarray(phi, dtype=float)

    kept = np.zeros(alpha.size)
    samples = 0
    for sweep in range(1, sweeps + 1):
        _fold_in_kernel(words, z, ndk, phi, alpha, rng.random(words.size))
        if sweep > sweeps // 2:
            kept += ndk
            samples += 1
    theta = kept / max(samples, 1) + alpha
    return theta / theta.sum()


def generate_corpus(
    hyper: Hyperparams, D: int, doc_lengths: Sequence[int], seed: int = 0
) -> Tuple[WordCorpus, np.ndarray, np.ndarray, List[np.ndarray]]:
    """
    Sample a corpus from the generative model.

    Returns:
        (corpus, true theta D x K, true phi K x V, true assignments per document)
    """
    doc_lengths = [int(n) for n in doc_lengths]
    if len(doc_lengths) != D:
        raise ValidationError(f"{len(doc_lengths)} document lengths for D={D}")
    if any(n <= 0 for n in doc_lengths):
        raise ValidationError("Document lengths must be positive")

    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(hyper.beta, size=hyper.K)
    theta = rng.dirichlet(hyper.alpha, size=D) if D else np.zeros((0, hyper.K))
    documents, assignments = [], []
    for d, length in enumerate(doc_lengths):
        z = rng.choice(hyper.K, size=length, p=theta[d])
        words = np.empty(length, dtype=np.int64)
        for k in range(hyper.K):
            positions = np.flatnonzero(z == k)
            if positions.size:
                words[positions] = rng.choice(hyper.V, size=positions.size, p=phi[k])
        documents.append(words)
        assignments.append(z.astype(np.int64))
    corpus = WordCorpus(documents, [f"d{d:03d}" for d in range(D)], hyper.V)
    return corpus, theta, phi, assignments
