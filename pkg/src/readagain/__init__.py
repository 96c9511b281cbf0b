"""Read-Again summarization: two-pass encoders, a copy decoder, training and ROUGE."""
from .inference import beam_search, greedy_decode, summarize
from .model import Model, ModelConfig
from .text import Vocabulary
from .trainer import TrainingConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Model", "ModelConfig", "TrainingConfig", "Vocabulary",
    "beam_search", "greedy_decode", "load_checkpoint", "save_checkpoint", "summarize", "train",
]
