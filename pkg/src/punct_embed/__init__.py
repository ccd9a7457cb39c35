"""Punctuation-aware sentence embeddings: a numpy autodiff engine, BiGRU and
attention encoders, constituency-tree fusion, training and similarity reports."""
from .analysis import SimilarityReport, case_study, cosine_similarity, punctuation_sensitivity_report
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, Sample, featurize, load_dataset, save_dataset
from .model import VARIANTS, Model, ModelConfig
from .text import tokenize
from .training import SplitSpec, TrainConfig, make_splits, train
from .trees import parse_bracketed, render_bracketed, traverse

__version__ = "0.1.0"
