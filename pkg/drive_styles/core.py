import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import PipelineConfig
from .discretizer import Codebook, WordCorpus, encode_corpus, fit_codebook
from .errors import DataError, StageError, ValidationError
from .factors import FactorModel, FactorScores, fit_factor_model, score_fragments
from .fragmentation import FragmentConfig, FragmentStatsMatrix, export_matrix_csv, fragment_series, pool_matrices
from .hlm import Hyperparams, StyleModel, TrainingDiagnostics, train_chains
from .metrics import MetricsReport, SweepSettings, metrics_report, sweep_hyperparams, sweep_summary
from .provenance import SourceRevision, library_versions, sha256_file
from .styleanalysis import (
    LevelThresholds,
    StyleOrdering,
    SubjectiveLabel,
    ThresholdFit,
    aggressive_scores,
    fit_thresholds,
    group_report,
    group_significance,
    order_styles,
    order_styles_by_statistics,
    read_labels,
    score_to_level,
    style_statistics,
    weighted_confusion,
)
from .synthgen import SimulatedCohort, dirichlet_sampler, load_profiles, simulate_cohort
from .telemetry import TelemetrySeries, export_csv, ingest_csv, validate_series

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1
MANIFEST_NAME = "run-manifest.json"


@dataclass
class FragmentData:
    matrices: List[FragmentStatsMatrix]
    pooled: FragmentStatsMatrix


@dataclass
class ScoringResult:
    ordering: StyleOrdering
    scores: Dict[str, float]
    levels: Dict[str, int]
    thresholds: Optional[LevelThresholds]
    threshold_fit: Optional[ThresholdFit] = None


def _write_json(path: Path, data: Any) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


class DriveStylePipeline:
    """Telemetry to driving styles, aggressiveness levels and reports."""

    def __init__(self, config: PipelineConfig, output_dir: Optional[Union[str, Path]] = None):
        self.config = config.validate()
        self.output_dir = Path(output_dir or config.output_dir)
        self.source = SourceRevision(".")
        self.artifacts: Dict[str, Path] = {}
        self.current_stage: Optional[str] = None

    @classmethod
    def from_manifest(
        cls, manifest_path: Union[str, Path], output_dir: Optional[Union[str, Path]] = None
    ) -> "DriveStylePipeline":
        """Pipeline with the exact configuration recorded in a run manifest."""
        manifest_path = Path(manifest_path)
        if not manifest_path.is_file():
            raise ValidationError(f"Manifest does not exist: {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise ValidationError(f"Unsupported manifest schema version {manifest.get('schema_version')}")
        config = PipelineConfig.from_dict(manifest["config"])
        if config.config_hash() != manifest.get("config_hash"):
            raise ValidationError("Manifest config hash does not match its configuration")
        recorded = manifest.get("versions", {})
        for name, version in library_versions().items():
            if recorded.get(name) not in (None, version):
                logger.warning("Manifest was written with %s %s, running %s", name, recorded[name], version)
        return cls(config, output_dir)

    # ---- helpers ----

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        self.current_stage = name
        print(f"⏳ {name}...")
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, e) from e

    def _artifact(self, name: str, path: Path) -> Path:
        self.artifacts[name] = path
        return path

    def _out(self, filename: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / filename

    # ---- stages ----

    def load_telemetry(self) -> List[TelemetrySeries]:
        cfg = self.config
        if cfg.telemetry_path is None:
            raise ValidationError("TELEMETRY_PATH is not set")
        series = ingest_csv(
            cfg.telemetry_path,
            sample_rate_hz=cfg.telemetry_sample_rate_hz,
            scenario_tag=cfg.scenario_tag,
            nan_policy=cfg.telemetry_nan_policy,
            max_gap_s=cfg.telemetry_max_gap_s,
            jitter_tolerance=cfg.telemetry_jitter_tolerance,
        )
        if not series:
            raise DataError(f"No telemetry rows in {cfg.telemetry_path}")
        print(f"   📥 {len(series)} drivers loaded")
        return series

    def build_fragments(self, series: List[TelemetrySeries]) -> FragmentData:
        fragment_cfg = FragmentConfig(tau_s=self.config.fragment_tau_s, stats=tuple(self.config.fragment_stats))
        matrices = [m for m in (fragment_series(s, fragment_cfg) for s in series) if m is not None]
        if not matrices:
            raise DataError("No driver has a complete fragment")
        pooled = pool_matrices(matrices)
        if self.config.fragment_export:
            export_matrix_csv(pooled, self._artifact("fragment_stats", self._out("fragment_stats.csv")))
        print(f"   🧩 {pooled.fragment_count} fragments, {len(pooled.feature_labels)} features")
        return FragmentData(matrices, pooled)

    def fit_factors(self, fragments: FragmentData) -> Tuple[FactorModel, List[FactorScores], FactorScores]:
        model = fit_factor_model(fragments.pooled, m=self.config.factor_count, rotate=self.config.factor_rotate)
        per_driver = [score_fragments(model, matrix) for matrix in fragments.matrices]
        pooled_scores = score_fragments(model, fragments.pooled)
        model.export_loadings_csv(self._artifact("loadings", self._out("loadings.csv")))
        print(
            f"   📐 {model.factor_count} factors: {', '.join(model.factor_labels)} "
            f"({model.retained_eigen_share():.0%} of the variance)"
        )
        return model, per_driver, pooled_scores

    def discretize(self, per_driver: List[FactorScores], pooled: FactorScores) -> Tuple[Codebook, WordCorpus]:
        codebook = fit_codebook(
            pooled.scores, self.config.discretizer_bins, pooled.factor_labels, self.config.discretizer_prefer_gev
        )
        corpus = encode_corpus(per_driver, codebook, self.config.scenario_tag)
        codebook.to_json(self._artifact("codebook", self._out("codebook.json")))
        corpus.to_csv(self._artifact("corpus", self._out("corpus.csv")))
        families = ", ".join(f"{label}={fit.family}" for label, fit in zip(codebook.factor_labels, codebook.fits))
        print(f"   🔤 {codebook.word_count} words ({families})")
        return codebook, corpus

    def train_model(self, corpus: WordCorpus) -> Tuple[StyleModel, TrainingDiagnostics]:
        cfg = self.config
        hyper = Hyperparams.symmetric(cfg.model_styles, corpus.vocab_size, cfg.styles_alpha, cfg.model_beta)
        model, diagnostics = train_chains(
            corpus,
            hyper,
            iters=cfg.model_iterations,
            burn_in=cfg.model_burn_in,
            seed=cfg.model_seed,
            thin=cfg.model_thin,
            chains=cfg.model_chains,
            single_sample=cfg.model_single_sample,
        )
        model.to_json(self._artifact("model", self._out("model.json")))
        trace = diagnostics.trace_frame()
        if len(diagnostics.chain_traces) > 1:
            for seed, chain_trace in diagnostics.chain_traces.items():
                trace[f"chain_{seed}"] = chain_trace
        trace.to_csv(self._artifact("diagnostics", self._out("diagnostics.csv")), index=False)
        print(f"   🎲 {cfg.model_iterations} sweeps, final joint log-probability {diagnostics.log_prob_trace[-1]:.2f}")
        return model, diagnostics

    def evaluate(self, model: StyleModel, corpus: WordCorpus) -> MetricsReport:
        report = metrics_report(model, corpus, seed=self.config.model_seed)
        report.to_frame().to_csv(self._artifact("metrics", self._out("metrics.csv")), index=False)
        print(
            f"   📊 perplexity {report.perplexity:.3f} (normalized {report.normalized_perplexity:.4f}), "
            f"mean style entropy {report.mean_entropy:.4f}"
        )
        return report

    def load_labels(self) -> Optional[List[SubjectiveLabel]]:
        if self.config.scoring_labels_path is None:
            return None
        return read_labels(self.config.scoring_labels_path, self.config.scoring_label_source)

    def score(
        self,
        model: StyleModel,
        codebook: Codebook,
        fragments: Optional[FragmentData] = None,
        diagnostics: Optional[TrainingDiagnostics] = None,
        labels: Optional[List[SubjectiveLabel]] = None,
    ) -> ScoringResult:
        cfg = self.config
        stats = None
        if fragments is not None and diagnostics is not None and diagnostics.final_assignments:
            stats = style_statistics(fragments.pooled, np.concatenate(diagnostics.final_assignments), model.K)
            stats.to_csv(self._artifact("style_statistics", self._out("style_statistics.csv")), index=False)

        if cfg.scoring_ordering == "statistics" and stats is not None:
            ordering = order_styles_by_statistics(stats)
        else:
            if cfg.scoring_ordering == "statistics":
                logger.warning("Statistics ordering needs fragment assignments; ranking by word severity")
            ordering = order_styles(model, codebook)
        _write_json(self._artifact("ordering", self._out("ordering.json")), ordering.to_dict())

        scores = aggressive_scores(model, ordering, cfg.scoring_gamma)
        thresholds, threshold_fit = cfg.level_thresholds(), None
        if cfg.scoring_fit_thresholds:
            if not labels:
                raise ValidationError("SCORING_FIT_THRESHOLDS needs SCORING_LABELS_PATH")
            labeled = [label for label in labels if label.driver_id in scores]
            lower, upper = cfg.score_range() if cfg.scoring_gamma is not None else (1.0, float(model.K))
            threshold_fit = fit_thresholds(
                [scores[label.driver_id] for label in labeled],
                labeled,
                grid_step=cfg.scoring_grid_step,
                scenario_tag=cfg.scenario_tag,
                lower=lower,
                upper=upper,
                seed=cfg.model_seed,
            )
            thresholds = threshold_fit.thresholds
            _write_json(self._artifact("thresholds", self._out("thresholds.json")), threshold_fit.to_dict())

        levels: Dict[str, int] = {}
        if thresholds is None:
            logger.warning("No level thresholds for scenario %s with K=%d; levels are not reported", cfg.scenario_tag, model.K)
        else:
            levels = {driver_id: score_to_level(s, thresholds) for driver_id, s in scores.items()}

        frame = pd.DataFrame({"driver_id": list(scores), "s_obj": list(scores.values())})
        frame["level"] = [levels.get(d) for d in frame["driver_id"]]
        frame.to_csv(self._artifact("scores", self._out("scores.csv")), index=False)
        print(f"   🏁 scored {len(scores)} drivers")
        return ScoringResult(ordering, scores, levels, thresholds, threshold_fit)

    def report(
        self, model: StyleModel, scoring: ScoringResult, labels: Optional[List[SubjectiveLabel]] = None
    ) -> Dict[str, Any]:
        cfg = self.config
        summary: Dict[str, Any] = {}
        if labels is not None:
            if not scoring.levels:
                raise ValidationError("Labels were given but no level thresholds are available")
            pred = {label.driver_id: scoring.levels.get(label.driver_id, 0) for label in labels}
            unknown = sorted(d for d in pred if d not in scoring.levels)
            if unknown:
                raise DataError(f"Labeled drivers missing from the model: {unknown}")
            confusion = weighted_confusion(pred, labels)
            data = confusion.to_dict()
            data["thresholds"] = scoring.thresholds.to_dict() if scoring.thresholds else None
            if scoring.threshold_fit is not None:
                data["threshold_fit"] = scoring.threshold_fit.to_dict()
            _write_json(self._artifact("confusion", self._out("confusion.json")), data)
            summary["accuracy"] = confusion.accuracy
            print(f"   ✅ weighted subjective-objective accuracy {confusion.accuracy:.3f}")

        if cfg.scoring_attributes_path is not None:
            attributes = pd.read_csv(cfg.scoring_attributes_path, dtype={"driver_id": str})
            columns = [c for c in attributes.columns if c != "driver_id"]
            group_report(model, attributes, columns, scoring.ordering).to_csv(
                self._artifact("groups", self._out("groups.csv")), index=False
            )
            tests = [
                group_significance(model, attributes, c, cfg.scoring_significance_resamples, cfg.model_seed, scoring.ordering)
                for c in columns
                if attributes[c].nunique() > 1
            ]
            if tests:
                pd.concat(tests, ignore_index=True).to_csv(
                    self._artifact("group_significance", self._out("group_significance.csv")), index=False
                )
        return summary

    # ---- manifest ----

    def manifest(self, status: str, error: Optional[StageError] = None) -> Dict[str, Any]:
        artifacts = {
            name: {"file": path.name, "sha256": sha256_file(path)}
            for name, path in sorted(self.artifacts.items())
            if path.is_file()
        }
        data: Dict[str, Any] = {
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "status": status,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "seed": self.config.model_seed,
            "versions": library_versions(),
            "source": self.source.describe(),
            "artifacts": artifacts,
        }
        if error is not None:
            data["failed_stage"] = error.stage
            data["error"] = str(error.cause)
            data["partial_artifacts"] = sorted(artifacts)
        return data

    def write_manifest(self, status: str, error: Optional[StageError] = None) -> Path:
        return _write_json(self._out(MANIFEST_NAME), self.manifest(status, error))

    # ---- commands ----

    def run(self) -> Dict[str, Any]:
        """ingest, fragment, factors, discretize, train, metrics, score, report."""
        self.artifacts = {}
        print(f"\n{'='*60}")
        print(f"🚗 DRIVE STYLES RUN - scenario {self.config.scenario_tag}, K={self.config.model_styles}")
        print(f"📂 Output: {self.output_dir}")
        print(f"{'='*60}")
        try:
            with self._stage("ingest"):
                series = self.load_telemetry()
                labels = self.load_labels()
            with self._stage("fragment"):
                fragments = self.build_fragments(series)
            with self._stage("factors"):
                _, per_driver, pooled_scores = self.fit_factors(fragments)
            with self._stage("discretize"):
                codebook, corpus = self.discretize(per_driver, pooled_scores)
            with self._stage("train"):
                model, diagnostics = self.train_model(corpus)
            with self._stage("metrics"):
                metrics = self.evaluate(model, corpus)
            with self._stage("score"):
                scoring = self.score(model, codebook, fragments, diagnostics, labels)
            with self._stage("report"):
                summary = self.report(model, scoring, labels)
        except StageError as e:
            path = self.write_manifest("failed", e)
            print(f"⚠️  Partial artifacts flagged in {path}", flush=True)
            raise

        manifest_path = self.write_manifest("succeeded")
        print(f"{'='*60}")
        print(f"📦 {len(self.artifacts)} artifacts written, manifest {manifest_path}")
        return {
            "success": True,
            "artifacts": dict(self.artifacts),
            "manifest": manifest_path,
            "metrics": metrics.to_dict(),
            **summary,
        }

    def ingest(self) -> Dict[str, Path]:
        """Validation report and canonical CSV of the configured telemetry."""
        with self._stage("ingest"):
            series = self.load_telemetry()
            reports = [validate_series(s).to_dict() for s in series]
            report_path = _write_json(self._artifact("validation", self._out("validation.json")), reports)
            csv_path = export_csv(series, self._artifact("telemetry", self._out("telemetry.csv")))
        unusable = [r["driver_id"] for r in reports if not r["usable"]]
        if unusable:
            print(f"⚠️  Unusable series: {', '.join(unusable)}")
        return {"validation": report_path, "telemetry": csv_path}

    def simulate(self) -> SimulatedCohort:
        cfg = self.config
        with self._stage("simulate"):
            profiles = load_profiles(cfg.simulation_profiles_path, scenario=cfg.scenario_tag)
            if profiles.K != cfg.model_styles:
                raise ValidationError(f"Profiles define {profiles.K} styles but MODEL_STYLES is {cfg.model_styles}")
            cohort = simulate_cohort(
                cfg.simulation_drivers,
                dirichlet_sampler(np.full(profiles.K, cfg.simulation_mixture_concentration)),
                profiles,
                duration_s=cfg.simulation_duration_s,
                seed=cfg.simulation_seed,
                thresholds=cfg.level_thresholds(),
                sample_rate_hz=cfg.simulation_sample_rate_hz,
                fragment_s=cfg.fragment_tau_s,
                label_source=cfg.scoring_label_source or "expert",
            )
            for name, path in cohort.write(self.output_dir).items():
                self._artifact(name, path)
        print(f"   🧪 {len(cohort.series)} drivers simulated in {self.output_dir}")
        return cohort

    def sweep(self) -> pd.DataFrame:
        """Perplexity over the bin counts and style entropy over the style counts."""
        cfg = self.config
        with self._stage("ingest"):
            series = self.load_telemetry()
        with self._stage("fragment"):
            fragments = self.build_fragments(series)
        with self._stage("factors"):
            _, per_driver, pooled_scores = self.fit_factors(fragments)

        def corpus_for(M: int) -> WordCorpus:
            codebook = fit_codebook(pooled_scores.scores, M, pooled_scores.factor_labels, cfg.discretizer_prefer_gev)
            return encode_corpus(per_driver, codebook, cfg.scenario_tag)

        settings = SweepSettings(
            base_M=cfg.discretizer_bins,
            base_K=cfg.model_styles,
            alpha=cfg.model_alpha,
            beta=cfg.model_beta,
            iters=cfg.sweep_iterations,
            burn_in=cfg.sweep_burn_in,
            thin=cfg.model_thin,
            seeds=tuple(cfg.sweep_seeds),
            holdout_fraction=cfg.sweep_holdout_fraction,
        )
        with self._stage("sweep"):
            table = sweep_hyperparams(corpus_for, cfg.sweep_m_values, cfg.sweep_k_values, settings)
            table.to_csv(self._artifact("sweep", self._out("sweep.csv")), index=False)
            sweep_summary(table).to_csv(self._artifact("sweep_summary", self._out("sweep_summary.csv")), index=False)
        print(f"   📈 {len(table)} sweep rows written")
        return table

    def score_only(self, model_path: Union[str, Path], codebook_path: Union[str, Path]) -> ScoringResult:
        """Scores, levels and reports from a serialized model and codebook."""
        with self._stage("score"):
            model = StyleModel.from_json(model_path)
            codebook = Codebook.from_json(codebook_path)
            labels = self.load_labels()
            scoring = self.score(model, codebook, labels=labels)
        with self._stage("report"):
            self.report(model, scoring, labels)
        return scoring

    def eval_only(
        self, model_path: Union[str, Path], corpus_path: Union[str, Path], heldout_path: Optional[Union[str, Path]] = None
    ) -> MetricsReport:
        """Metrics of a serialized model on a corpus CSV, optionally with held-out drivers."""
        with self._stage("metrics"):
            model = StyleModel.from_json(model_path)
            corpus = WordCorpus.from_csv(corpus_path, model.V, model.scenario_tag)
            heldout = WordCorpus.from_csv(heldout_path, model.V, model.scenario_tag) if heldout_path else None
            return self.evaluate_with(model, corpus, heldout)

    def evaluate_with(self, model: StyleModel, corpus: WordCorpus, heldout: Optional[WordCorpus]) -> MetricsReport:
        report = metrics_report(model, corpus, heldout, seed=self.config.model_seed)
        report.to_frame().to_csv(self._artifact("metrics", self._out("metrics.csv")), index=False)
        return report


def verify_run(output_dir: Union[str, Path]) -> Dict[str, Any]:
    """Manifest of a finished run plus the artifacts whose digests no longer match."""
    output_dir = Path(output_dir)
    manifest_path = output_dir / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ValidationError(f"No {MANIFEST_NAME} in {output_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    changed = []
    for name, entry in manifest.get("artifacts", {}).items():
        path = output_dir / entry["file"]
        if not path.is_file() or sha256_file(path) != entry["sha256"]:
            changed.append(name)
    return {"manifest": manifest, "changed": changed}
