# ================================
# MAIN FUNCTION FOR CLI
# ================================

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from .config import PipelineConfig
from .core import DriveStylePipeline, verify_run
from .errors import DriveStyleError, ValidationError


def setup_parser() -> argparse.ArgumentParser:
    """Setup and configure the argument parser."""
    parser = argparse.ArgumentParser(
        description="🚗 Learn driving styles from vehicle telemetry and grade driver aggressiveness",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
🚀 Some examples:
  %(prog)s simulate -o cohort                        # Labeled synthetic cohort (urban)
  %(prog)s run --telemetry cohort/telemetry.csv --labels cohort/labels.csv --set TELEMETRY_SAMPLE_RATE_HZ=10
  %(prog)s run --manifest out/run-manifest.json -o rerun   # Reproduce a run
  %(prog)s sweep --telemetry data.csv --set SWEEP_M_VALUES=3,4,5
  %(prog)s score-only --model out/model.json --codebook out/codebook.json --labels labels.csv
  %(prog)s eval-only --model out/model.json --corpus out/corpus.csv
  %(prog)s report out                                # Summary and artifact digest check
    """,
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, help="Path to a .drive_styles.env config file")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any config key (repeatable), e.g. MODEL_STYLES=4",
    )
    common.add_argument("--output", "-o", type=str, help="Output directory (OUTPUT_DIR)")
    common.add_argument("--scenario", choices=["urban", "highway", "other"], help="Scenario tag (SCENARIO_TAG)")
    common.add_argument("--seed", type=int, help="Random seed of the stage (MODEL_SEED / SIMULATION_SEED)")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose output")

    subparsers = parser.add_subparsers(dest="command", required=True)

    ingest = subparsers.add_parser("ingest", parents=[common], help="Validate telemetry and write the canonical CSV")
    ingest.add_argument("--telemetry", "-t", type=str, help="Telemetry CSV (TELEMETRY_PATH)")
    ingest.add_argument("--sample-rate", type=float, help="Declared sampling rate in Hz")

    run = subparsers.add_parser("run", parents=[common], help="Run the full pipeline")
    run.add_argument("--telemetry", "-t", type=str, help="Telemetry CSV (TELEMETRY_PATH)")
    run.add_argument("--sample-rate", type=float, help="Declared sampling rate in Hz")
    run.add_argument("--labels", "-l", type=str, help="Subjective labels CSV (SCORING_LABELS_PATH)")
    run.add_argument("--attributes", type=str, help="Driver attributes CSV (SCORING_ATTRIBUTES_PATH)")
    run.add_argument("--styles", "-k", type=int, help="Number of driving styles K (MODEL_STYLES)")
    run.add_argument("--bins", "-m", type=int, help="Bins per factor M (DISCRETIZER_BINS)")
    run.add_argument("--iterations", type=int, help="Gibbs sweeps (MODEL_ITERATIONS)")
    run.add_argument("--burn-in", type=int, help="Burn-in sweeps (MODEL_BURN_IN)")
    run.add_argument("--chains", type=int, help="Independent chains (MODEL_CHAINS)")
    run.add_argument("--fit-thresholds", action="store_true", help="Fit level thresholds to the labels")
    run.add_argument("--manifest", type=str, help="Re-run with the configuration recorded in a run manifest")

    simulate = subparsers.add_parser("simulate", parents=[common], help="Generate a labeled synthetic cohort")
    simulate.add_argument("--drivers", "-d", type=int, help="Number of drivers (SIMULATION_DRIVERS)")
    simulate.add_argument("--duration", type=float, help="Seconds per driver (SIMULATION_DURATION_S)")
    simulate.add_argument("--profiles", type=str, help="Custom regime profile JSON (SIMULATION_PROFILES_PATH)")

    sweep = subparsers.add_parser("sweep", parents=[common], help="Perplexity over M and style entropy over K")
    sweep.add_argument("--telemetry", "-t", type=str, help="Telemetry CSV (TELEMETRY_PATH)")
    sweep.add_argument("--sample-rate", type=float, help="Declared sampling rate in Hz")
    sweep.add_argument("--m-values", type=str, help="Comma-separated bin counts (SWEEP_M_VALUES)")
    sweep.add_argument("--k-values", type=str, help="Comma-separated style counts (SWEEP_K_VALUES)")

    score_only = subparsers.add_parser("score-only", parents=[common], help="Scores and levels from a saved model")
    score_only.add_argument("--model", required=True, type=str, help="model.json of a previous run")
    score_only.add_argument("--codebook", required=True, type=str, help="codebook.json of a previous run")
    score_only.add_argument("--labels", "-l", type=str, help="Subjective labels CSV (SCORING_LABELS_PATH)")

    eval_only = subparsers.add_parser("eval-only", parents=[common], help="Metrics of a saved model")
    eval_only.add_argument("--model", required=True, type=str, help="model.json of a previous run")
    eval_only.add_argument("--corpus", required=True, type=str, help="corpus.csv of the training drivers")
    eval_only.add_argument("--heldout", type=str, help="corpus CSV of unseen drivers (fold-in perplexity)")

    report = subparsers.add_parser("report", parents=[common], help="Summarize a finished run")
    report.add_argument("run_dir", nargs="?", type=str, help="Run output directory (defaults to OUTPUT_DIR)")

    return parser


def validate_file_path(file_path: str, what: str) -> Path:
    """Validate and return an existing file path."""
    path = Path(file_path).resolve()

    if not path.exists():
        raise ValidationError(f"{what} does not exist: {file_path}")

    if not path.is_file():
        raise ValidationError(f"{what} is not a file: {file_path}")

    return path


def parse_overrides(pairs: List[str]) -> Dict[str, str]:
    """KEY=VALUE strings from --set."""
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ValidationError(f"Override must look like KEY=VALUE, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


# argparse destination -> config key
FLAG_KEYS = {
    "telemetry": "TELEMETRY_PATH",
    "sample_rate": "TELEMETRY_SAMPLE_RATE_HZ",
    "labels": "SCORING_LABELS_PATH",
    "attributes": "SCORING_ATTRIBUTES_PATH",
    "styles": "MODEL_STYLES",
    "bins": "DISCRETIZER_BINS",
    "iterations": "MODEL_ITERATIONS",
    "burn_in": "MODEL_BURN_IN",
    "chains": "MODEL_CHAINS",
    "drivers": "SIMULATION_DRIVERS",
    "duration": "SIMULATION_DURATION_S",
    "profiles": "SIMULATION_PROFILES_PATH",
    "m_values": "SWEEP_M_VALUES",
    "k_values": "SWEEP_K_VALUES",
    "output": "OUTPUT_DIR",
    "scenario": "SCENARIO_TAG",
}


def flag_overrides(args: argparse.Namespace) -> Dict[str, str]:
    """Config overrides from dedicated flags; --set wins over them."""
    overrides = {key: str(getattr(args, dest)) for dest, key in FLAG_KEYS.items() if getattr(args, dest, None) is not None}
    if getattr(args, "fit_thresholds", False):
        overrides["SCORING_FIT_THRESHOLDS"] = "true"
    if args.seed is not None:
        overrides["SIMULATION_SEED" if args.command == "simulate" else "MODEL_SEED"] = str(args.seed)
    overrides.update(parse_overrides(args.overrides))
    return overrides


def load_config(args: argparse.Namespace) -> PipelineConfig:
    config_path = validate_file_path(args.config, "Config file") if args.config else None
    return PipelineConfig.from_env(config_path, flag_overrides(args)).validate()


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def print_run_report(run_dir: Path) -> int:
    """Print the summary of a finished run and check its artifact digests."""
    checked = verify_run(run_dir)
    manifest = checked["manifest"]

    print(f"\n{'='*60}")
    print(f"📊 RUN REPORT - status: {manifest['status']}")
    print(f"📂 Path: {run_dir}")
    print(f"🔑 Config hash: {manifest['config_hash'][:12]}  seed: {manifest['seed']}")
    revision = manifest.get("source", {}).get("revision")
    if revision:
        print(f"🔖 Source revision: {revision[:12]}")
    print(f"{'='*60}")

    if manifest["status"] == "failed":
        print(f"❌ Failed in stage '{manifest.get('failed_stage')}': {manifest.get('error')}")

    metrics_path = run_dir / "metrics.csv"
    if metrics_path.is_file():
        for row in pd.read_csv(metrics_path).itertuples():
            print(f"   📈 {row.metric}: {row.value:.6g}")

    for name, entry in manifest.get("artifacts", {}).items():
        marker = "⚠️ " if name in checked["changed"] else "✅"
        print(f"   {marker} {entry['file']}")

    print(f"{'='*60}")
    if checked["changed"]:
        print(f"⚠️  Artifacts changed since the run: {', '.join(checked['changed'])}", file=sys.stderr)
        return 1
    return 0


def handle_run_action(args: argparse.Namespace) -> int:
    """Handle the full pipeline run, optionally from a manifest."""
    if args.manifest:
        manifest = validate_file_path(args.manifest, "Manifest")
        pipeline = DriveStylePipeline.from_manifest(manifest, args.output)
    else:
        pipeline = DriveStylePipeline(load_config(args))
    result = pipeline.run()
    return 0 if result["success"] else 1


def handle_ingest_action(config: PipelineConfig) -> int:
    outputs = DriveStylePipeline(config).ingest()
    print(f"📝 Validation report: {outputs['validation']}")
    print(f"📄 Canonical telemetry: {outputs['telemetry']}")
    return 0


def handle_simulate_action(config: PipelineConfig) -> int:
    cohort = DriveStylePipeline(config).simulate()
    print(
        f"💡 Run the pipeline with --set TELEMETRY_SAMPLE_RATE_HZ={cohort.meta['sample_rate_hz']:g} "
        f"to ingest the simulated telemetry"
    )
    return 0


def handle_sweep_action(config: PipelineConfig) -> int:
    DriveStylePipeline(config).sweep()
    return 0


def handle_score_only_action(config: PipelineConfig, args: argparse.Namespace) -> int:
    model = validate_file_path(args.model, "Model file")
    codebook = validate_file_path(args.codebook, "Codebook file")
    DriveStylePipeline(config).score_only(model, codebook)
    return 0


def handle_eval_only_action(config: PipelineConfig, args: argparse.Namespace) -> int:
    model = validate_file_path(args.model, "Model file")
    corpus = validate_file_path(args.corpus, "Corpus file")
    heldout = validate_file_path(args.heldout, "Held-out corpus file") if args.heldout else None
    report = DriveStylePipeline(config).eval_only(model, corpus, heldout)
    print(f"📊 perplexity {report.perplexity:.3f}, normalized {report.normalized_perplexity:.4f}")
    if report.heldout_perplexity is not None:
        print(f"📊 held-out perplexity {report.heldout_perplexity:.3f}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main function to handle command line arguments and execute operations."""
    parser = setup_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        if args.command == "run":
            return handle_run_action(args)

        if args.command == "report" and args.run_dir:
            return print_run_report(Path(args.run_dir))

        config = load_config(args)

        if args.command == "ingest":
            return handle_ingest_action(config)
        elif args.command == "simulate":
            return handle_simulate_action(config)
        elif args.command == "sweep":
            return handle_sweep_action(config)
        elif args.command == "score-only":
            return handle_score_only_action(config, args)
        elif args.command == "eval-only":
            return handle_eval_only_action(config, args)
        else:
            return print_run_report(Path(config.output_dir))

    except KeyboardInterrupt:
        print("\n\n🛑 Operation cancelled by user.", file=sys.stderr)
        return 130  # Standard exit code for SIGINT

    except DriveStyleError as e:
        if args.verbose:
            import traceback

            traceback.print_exc()
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code

    except ValueError as e:
        print(f"❌ Invalid argument: {e}", file=sys.stderr)
        return 2

    except Exception as e:
        if args.verbose:
            import traceback

            traceback.print_exc()
        else:
            print(f"❌ Error in main process: {e}", file=sys.stderr)
        return 1


def cli_entry_point():
    """Entry point for setuptools console scripts."""
    sys.exit(main())


if __name__ == "__main__":
    cli_entry_point()
