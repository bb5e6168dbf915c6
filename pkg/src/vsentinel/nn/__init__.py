from .functional import bce, cce, conv2d, dropout, linear, maxpool2d, softmax
from .layers import Conv2d, Dense, Dropout, Flatten, MaxPool2d, Module, Sequential
from .model import (
    AnomalyNet,
    Backbone,
    ClassifierHead,
    ModelConfig,
    TimeDistributed,
    build_backbone,
    classify_head,
    default_freeze_boundary,
    freeze_prefix,
    time_distributed,
)
from .recurrent import CellState, GRUCell, LSTMCell, gru_step, lstm_step

__all__ = [
    "AnomalyNet", "Backbone", "CellState", "ClassifierHead", "Conv2d", "Dense", "Dropout",
    "Flatten", "GRUCell", "LSTMCell", "MaxPool2d", "ModelConfig", "Module", "Sequential",
    "TimeDistributed", "bce", "build_backbone", "cce", "classify_head", "conv2d",
    "default_freeze_boundary", "dropout", "freeze_prefix", "gru_step", "linear", "lstm_step",
    "maxpool2d", "softmax", "time_distributed",
]
