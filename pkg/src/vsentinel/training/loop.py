"""Training and per-video evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data.manifest import DatasetManifest
from ..nn.model import AnomalyNet, ModelConfig
from ..pipeline.generator import BatchGenerator, load_sequence, plan_sequences
from ..tensor import NonFiniteError, no_grad, sgd_step
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .curves import CurveRow, LearningCurve
from .metrics import MetricsReport

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    curve: LearningCurve

    @property
    def model(self) -> AnomalyNet:
        return self.checkpoint.model


def _check_split(manifest: DatasetManifest):
    if not manifest.split:
        raise ValueError("manifest has no train/test split")
    for part in ("train", "test"):
        present = {r.label for r in manifest.records_in(part)}
        missing = [c for c in manifest.classes if c not in present]
        if missing:
            raise ValueError(f"{part} split has no videos of class(es) {missing}")


def _binary(labels) -> np.ndarray:
    return (np.asarray(labels) > 0).astype(int)


def measure(model: AnomalyNet, manifest: DatasetManifest, partition: str, mode: str = "single_sequence",
            threshold: float = 0.5) -> tuple[float, float]:
    """Eval-mode mean loss and accuracy over one partition."""
    gen = BatchGenerator(manifest, model.cfg, mode, partition, shuffle=False, threaded=False)
    model.eval()
    total_loss, correct, count = 0.0, 0, 0
    with no_grad():
        for x, y, _ in gen:
            probs = model(x)
            total_loss += float(model.loss(probs, y).item()) * len(y)
            correct += int(np.sum((model.anomaly_probability(probs) >= threshold) == (_binary(y) == 1)))
            count += len(y)
    return total_loss / count, correct / count


def train(cfg: ModelConfig, manifest: DatasetManifest, epochs: int, seed: int = 0,
          mode: str = "single_sequence", augment: bool = False, checkpoint_path=None,
          progress=None) -> TrainResult:
    """SGD on the train split, one eval pass over both splits per epoch.

    ``progress`` is called with each finished :class:`CurveRow`.
    """
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    _check_split(manifest)
    if cfg.loss == "cce" and cfg.n_classes != len(manifest.classes):
        cfg = cfg.updated(n_classes=len(manifest.classes))
    model = AnomalyNet(cfg, seed=seed)
    params = model.parameters()
    curve = LearningCurve()
    for epoch in range(1, epochs + 1):
        gen = BatchGenerator(manifest, cfg, mode, "train", seed=seed, epoch=epoch, augment=augment)
        model.train()
        for b, (x, y, _) in enumerate(gen, 1):
            try:
                loss = model.loss(model(x), y)
                loss.backward()
            except NonFiniteError as exc:
                raise TrainingDiverged(f"loss diverged at epoch {epoch}, batch {b}: {exc}") from exc
            if cfg.lr > 0:
                sgd_step(params, cfg.lr)
            else:
                model.zero_grad()
        try:
            row = CurveRow(epoch, *measure(model, manifest, "train", mode), *measure(model, manifest, "test"))
        except NonFiniteError as exc:
            raise TrainingDiverged(f"loss diverged at epoch {epoch} (evaluation): {exc}") from exc
        curve.append(row)
        log.info("epoch %d: train_loss=%.4f train_acc=%.3f val_loss=%.4f val_acc=%.3f",
                 row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc)
        if progress is not None:
            progress(row)
    ckpt = Checkpoint(model, seed=seed, epoch=epochs, classes=list(manifest.classes))
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path, seed=seed, epoch=epochs, classes=manifest.classes)
    return TrainResult(ckpt, curve)


def _as_model(source) -> AnomalyNet:
    if isinstance(source, AnomalyNet):
        return source
    if isinstance(source, Checkpoint):
        return source.model
    if isinstance(source, TrainResult):
        return source.model
    if isinstance(source, (str, Path)):
        return load_checkpoint(source).model
    raise TypeError(f"cannot evaluate {type(source).__name__}")


def evaluate(source, manifest: DatasetManifest, partition: str = "test", threshold: float = 0.5,
             mode: str = "single_sequence") -> MetricsReport:
    """One probability per video, thresholded into confusion counts.

    In sliding mode a video's probability is the max over its windows.
    """
    model = _as_model(source)
    records = manifest.records_in(partition)
    if not records:
        raise ValueError(f"partition {partition!r} is empty")
    probs, labels, ids = [], [], []
    for rec in records:
        refs = plan_sequences(rec, model.cfg.seq_len, mode, model.cfg.window_seconds)
        window_p = [
            model.predict_proba(load_sequence(manifest.video_dir(rec), ref, model.cfg.frame_size).frames[None])[0]
            for ref in refs
        ]
        probs.append(max(window_p))
        labels.append(int(manifest.label_index(rec) > 0))
        ids.append(rec.id)
    return MetricsReport.from_predictions(probs, labels, threshold, ids)
