"""Seizure detection on intracranial EEG with automatic channel selection."""

from .acs import ChannelRanking, ChannelSelector, optimize_m, rank_channels, select_top
from .dataset import Dataset, Epoch, SynthConfig, generate_synthetic, load_dataset, synthesize
from .evaluation import EvalReport, PipelineConfig, TimingReport, benchmark, two_fold_cv
from .exceptions import ConfigError, DataError, NumericalError, SeizureACSError
from .features import EpochFeatures, extract_features, feature_length
from .forest import RandomForest

__version__ = "0.1.0"

__all__ = [
    "ChannelRanking",
    "ChannelSelector",
    "ConfigError",
    "DataError",
    "Dataset",
    "Epoch",
    "EpochFeatures",
    "EvalReport",
    "NumericalError",
    "PipelineConfig",
    "RandomForest",
    "SeizureACSError",
    "SynthConfig",
    "TimingReport",
    "benchmark",
    "extract_features",
    "feature_length",
    "generate_synthetic",
    "load_dataset",
    "optimize_m",
    "rank_channels",
    "select_top",
    "synthesize",
    "two_fold_cv",
]
