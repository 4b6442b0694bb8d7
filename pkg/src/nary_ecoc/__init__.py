"""N-ary error-correcting output codes for multi-class classification.

Each class gets a codeword over ``{1..N}``. Each column splits the classes
into ``N`` groups and trains one N-class base learner. Prediction decodes
the stacked learner outputs to the nearest codeword.
"""

from .coding import CodingMatrix, Scheme, generate, select_best
from .datasets import Dataset, load, make_blobs, split
from .ensemble import EcocModel, evaluate, load_model, save_model, train
from .learners import LearnerKind, LearnerSpec
from .metrics import Distance, bound_report, matrix_report

__version__ = "0.1.0"

__all__ = [
    "CodingMatrix",
    "Dataset",
    "Distance",
    "EcocModel",
    "LearnerKind",
    "LearnerSpec",
    "Scheme",
    "bound_report",
    "evaluate",
    "generate",
    "load",
    "load_model",
    "make_blobs",
    "matrix_report",
    "save_model",
    "select_best",
    "split",
    "train",
]
