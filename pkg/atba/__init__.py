"""Transition-aware boundary alignment for weakly supervised action segmentation."""

from atba.config import Config, load_config
from atba.errors import AtbaError
from atba.evaluation import evaluate_corpus, mof, mof_bg, predict_labels, pseudo_label_accuracy
from atba.model import ProbabilitySequence, PseudoLabels, Segmentation, Transcript
from atba.pipeline import PipelineResult, atba_pipeline

__version__ = "0.1.0"

__all__ = [
    "AtbaError",
    "Config",
    "PipelineResult",
    "ProbabilitySequence",
    "PseudoLabels",
    "Segmentation",
    "Transcript",
    "atba_pipeline",
    "evaluate_corpus",
    "load_config",
    "mof",
    "mof_bg",
    "predict_labels",
    "pseudo_label_accuracy",
]
