import pytest

from drive_styles.config import PipelineConfig, find_config_file
from drive_styles.errors import ValidationError
from drive_styles.styleanalysis import URBAN_THRESHOLDS


def test_defaults():
    config = PipelineConfig()

    assert config.model_styles == 3
    assert config.discretizer_bins == 5
    assert config.fragment_tau_s == 10.0
    assert config.styles_alpha == pytest.approx(50 / 3)
    assert config.validate() is config


def test_precedence(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("MODEL_STYLES=4\nMODEL_BETA=0.2\nDISCRETIZER_BINS=6\n")
    environ = {"DRIVE_STYLES_MODEL_BETA": "0.3", "DRIVE_STYLES_DISCRETIZER_BINS": "7", "UNRELATED": "x"}

    config = PipelineConfig.from_env(path, overrides={"DISCRETIZER_BINS": "8"}, environ=environ)

    assert config.model_styles == 4
    assert config.model_beta == 0.3
    assert config.discretizer_bins == 8


def test_coercion():
    config = PipelineConfig.from_mapping(
        {
            "fragment_stats": "max, mean",
            "factor_count": "none",
            "model_single_sample": "yes",
            "scoring_gamma": "1,2,4",
            "sweep_seeds": "3,4",
        }
    )

    assert config.fragment_stats == ("max", "mean")
    assert config.factor_count is None
    assert config.model_single_sample is True
    assert config.scoring_gamma == (1.0, 2.0, 4.0)
    assert config.sweep_seeds == (3, 4)


@pytest.mark.parametrize("key, value", [("MODEL_STYLES", "three"), ("FACTOR_ROTATE", "maybe"), ("MODEL_SEED", "1.5")])
def test_invalid_values(key, value):
    with pytest.raises(ValidationError, match=key):
        PipelineConfig.from_mapping({key: value})


def test_unknown_key():
    with pytest.raises(ValidationError, match="MODEL_STYLEZ"):
        PipelineConfig.from_mapping({"MODEL_STYLEZ": "3"})


def test_zero_styles_rejected():
    with pytest.raises(ValidationError) as info:
        PipelineConfig(model_styles=0).validate()

    assert info.value.exit_code == 2


@pytest.mark.parametrize(
    "changes",
    [
        {"discretizer_bins": 1},
        {"model_burn_in": 3000},
        {"scenario_tag": "rural"},
        {"scoring_gamma": (1.0, 2.0)},
        {"scoring_gamma": (2.0, 2.0, 2.0)},
        {"scoring_gamma": (0.0, 1.0, 2.0), "scoring_thresholds": (1.01, 1.37, 1.99, 2.97)},
        {"fragment_stats": ("median",)},
        {"scoring_thresholds": (1.5, 1.2, 2.0, 2.5)},
    ],
)
def test_validation(changes):
    with pytest.raises(ValidationError):
        PipelineConfig(**changes).validate()


def test_level_thresholds():
    assert PipelineConfig().level_thresholds() is URBAN_THRESHOLDS
    assert PipelineConfig(model_styles=4).level_thresholds() is None
    custom = PipelineConfig(model_styles=4, scoring_thresholds=(1.5, 2.0, 2.5, 3.5)).level_thresholds()
    assert custom.upper == 4.0


def test_level_thresholds_follow_gamma_range():
    config = PipelineConfig(scoring_gamma=(0.0, 1.0, 2.0))

    assert config.score_range() == (0.0, 2.0)
    assert config.level_thresholds() is None

    custom = PipelineConfig(scoring_gamma=(0.0, 1.0, 2.0), scoring_thresholds=(0.2, 0.6, 1.2, 1.8)).level_thresholds()
    assert (custom.lower, custom.upper) == (0.0, 2.0)


def test_hash_ignores_paths():
    a = PipelineConfig(telemetry_path="a.csv", output_dir="one")
    b = PipelineConfig(telemetry_path="b.csv", output_dir="two")

    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != PipelineConfig(model_seed=1).config_hash()


def test_dict_form_restores_config():
    config = PipelineConfig(scoring_gamma=(1.0, 2.0, 3.0), model_seed=7)

    restored = PipelineConfig.from_dict(config.to_dict())

    assert restored == config
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"nope": 1})


def test_missing_config_file(tmp_path):
    with pytest.raises(ValidationError):
        find_config_file(tmp_path / "missing.env")
