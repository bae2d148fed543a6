"""Feed-forward and LSTM classifiers trained with Rprop-."""

from .network import KINDS, NetworkModel, Topology, init_weights
from .persistence import ModelFormatError, load_model, save_model
from .rprop import RpropMinus
from .training import TrainingDiverged, make_model, predict_rows, train

__all__ = [
    "KINDS",
    "NetworkModel",
    "Topology",
    "init_weights",
    "ModelFormatError",
    "load_model",
    "save_model",
    "RpropMinus",
    "TrainingDiverged",
    "make_model",
    "predict_rows",
    "train",
]
