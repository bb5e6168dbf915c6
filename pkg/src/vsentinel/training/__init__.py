from .checkpoint import Checkpoint, CheckpointError, describe_checkpoint, load_checkpoint, save_checkpoint
from .curves import CurveRow, LearningCurve
from .loop import TrainResult, TrainingDiverged, evaluate, measure, train
from .matrix import MatrixResult, MatrixRow, config_key, run_matrix
from .metrics import MetricsReport, f1_score

__all__ = [
    "Checkpoint", "CheckpointError", "CurveRow", "LearningCurve", "MatrixResult", "MatrixRow", "MetricsReport",
    "TrainResult", "TrainingDiverged", "config_key", "describe_checkpoint", "evaluate", "f1_score",
    "load_checkpoint", "measure", "run_matrix", "save_checkpoint", "train",
]
