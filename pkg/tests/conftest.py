import os

import numpy as np
import pandas as pd
import pytest

from drive_styles.discretizer import WordCorpus
from drive_styles.hlm import Hyperparams, generate_corpus


def telemetry_frame(driver_rows, rate_hz=100.0, seed=0):
    """Canonical telemetry frame with ``driver_rows`` = {driver_id: row count}."""
    rng = np.random.default_rng(seed)
    frames = []
    for driver_id, rows in driver_rows.items():
        frames.append(
            pd.DataFrame(
                {
                    "driver_id": driver_id,
                    "timestamp_s": np.arange(rows) / rate_hz,
                    "v": 50.0 + rng.normal(0.0, 5.0, rows),
                    "a_x": rng.normal(0.0, 1.0, rows),
                    "a_y": rng.normal(0.0, 0.5, rows),
                    "yaw_rate": rng.normal(0.0, 3.0, rows),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


@pytest.fixture
def write_telemetry(tmp_path):
    """Write a telemetry frame to CSV and return the path."""

    def _write(frame, name="telemetry.csv"):
        path = tmp_path / name
        frame.to_csv(path, index=False)
        return path

    return _write


@pytest.fixture
def tiny_corpus():
    """Two drivers over a 3-word vocabulary."""
    return WordCorpus([np.array([0, 1, 2, 1]), np.array([2, 2, 0])], ["a", "b"], vocab_size=3)


@pytest.fixture
def planted_corpus():
    """Corpus drawn from known, well separated styles."""
    hyper = Hyperparams.symmetric(3, 30, alpha=0.3, beta=0.05)
    return generate_corpus(hyper, 40, [200] * 40, seed=7)


@pytest.fixture
def isolated(tmp_path, monkeypatch):
    """Run in an empty directory with no config file or DRIVE_STYLES_* variables in reach."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    for key in list(os.environ):
        if key.startswith("DRIVE_STYLES_"):
            monkeypatch.delenv(key)
    return tmp_path
