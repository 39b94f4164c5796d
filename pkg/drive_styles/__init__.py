"""Drive Styles - Learn driving styles from vehicle telemetry with a hierarchical latent model."""

__author__ = "Toni Miquel Llull"

from .config import PipelineConfig
from .core import DriveStylePipeline
from .distributions import DistributionFactory
from .hlm import Hyperparams, StyleModel, train

__all__ = ["DriveStylePipeline", "DistributionFactory", "Hyperparams", "PipelineConfig", "StyleModel", "train"]
