"""Model configuration and the CNN → recurrent → head classifier."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..tensor import ShapeError, Tensor, no_grad
from .layers import Conv2d, Dense, Dropout, MaxPool2d, Module, Sequential
from .recurrent import CellState, GRUCell, LSTMCell
from . import functional as F

BACKBONES = ("conv3", "conv5", "conv8", "vgg19")
CELLS = ("gru", "lstm")
LOSSES = ("bce", "cce")

VGG19_BLOCKS = ((2, 64), (2, 128), (4, 256), (4, 512), (4, 512))


@dataclass
class ModelConfig:
    backbone: str = "vgg19"
    cell: str = "gru"
    hidden_size: int = 64
    head: list = field(default_factory=lambda: [[64, 0.3], [16, 0.0]])
    with_pred_head: bool = True
    seq_len: int = 30
    frame_size: int = 112
    channels: int = 3
    freeze_boundary: int | None = None
    lr: float = 0.001
    batch: int = 16
    loss: str = "bce"
    window_seconds: float = 1.0
    n_classes: int = 2

    def __post_init__(self):
        self.head = [[int(w), float(r)] for w, r in self.head]
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.cell not in CELLS:
            raise ValueError(f"cell must be one of {CELLS}, got {self.cell!r}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.seq_len < 1:
            raise ValueError("seq_len must be >= 1")
        if self.frame_size < 8:
            raise ValueError("frame_size must be >= 8")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.hidden_size < 1 or self.channels < 1:
            raise ValueError("hidden_size and channels must be positive")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.window_seconds <= 0:
            raise ValueError("window_seconds must be positive")
        if self.loss == "cce" and self.n_classes < 2:
            raise ValueError("cce needs n_classes >= 2")
        for w, r in self.head:
            if w < 1 or not 0 <= r < 1:
                raise ValueError(f"bad head layer {w, r}")
        if self.freeze_boundary is not None:
            n = len(backbone_layout(self.backbone))
            if not 0 <= self.freeze_boundary <= n:
                raise ValueError(f"freeze_boundary {self.freeze_boundary} outside [0, {n}]")

    @property
    def effective_freeze(self) -> int:
        if self.freeze_boundary is not None:
            return self.freeze_boundary
        return default_freeze_boundary(self.backbone)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def updated(self, **overrides) -> "ModelConfig":
        return ModelConfig.from_dict({**self.to_dict(), **overrides})

    @classmethod
    def load(cls, path, base: "ModelConfig | None" = None) -> "ModelConfig":
        """Read a JSON file whose keys override ``base`` (defaults if omitted)."""
        overrides = json.loads(Path(path).read_text())
        return (base or cls()).updated(**overrides)


# --- backbone -----------------------------------------------------------------


def backbone_layout(kind: str) -> list[tuple[str, int, int]]:
    """Layer plan as ``(kind, out_channels, block)`` tuples; pools carry 0 channels."""
    plan: list[tuple[str, int, int]] = []
    if kind == "vgg19":
        for block, (n_conv, width) in enumerate(VGG19_BLOCKS):
            plan += [("conv", width, block)] * n_conv + [("pool", 0, block)]
        return plan
    if kind not in ("conv3", "conv5", "conv8"):
        raise ValueError(f"unknown backbone {kind!r}")
    n_blocks = int(kind[4:])
    for block in range(n_blocks):
        width = min(16 * 2 ** block, 256)
        plan += [("conv", width, block)] * (1 if block == 0 else 2)
        # conv8 pools only on even (1-based) blocks so 112px survives
        if n_blocks < 8 or block % 2 == 1:
            plan.append(("pool", 0, block))
    return plan


def default_freeze_boundary(kind: str) -> int:
    """First trainable layer: the start of block 4 for vgg19, everything otherwise."""
    if kind != "vgg19":
        return 0
    return next(i for i, (_, _, block) in enumerate(backbone_layout(kind)) if block == 3)


class Backbone(Sequential):
    """Per-frame conv stack ending in a flattened feature vector."""

    def __init__(self, layers, kind: str, feature_shape: tuple[int, int, int], blocks: list[int]):
        super().__init__(layers)
        self.kind = kind
        self.feature_shape = feature_shape
        self.blocks = blocks

    @property
    def feature_dim(self) -> int:
        c, h, w = self.feature_shape
        return c * h * w

    def forward(self, x: Tensor) -> Tensor:
        return super().forward(x).flatten_from(1)


def build_backbone(cfg: ModelConfig, rng: np.random.Generator | None = None) -> Backbone:
    rng = rng if rng is not None else np.random.default_rng(0)
    channels, side = cfg.channels, cfg.frame_size
    layers, blocks = [], []
    for i, (kind, width, block) in enumerate(backbone_layout(cfg.backbone)):
        if kind == "conv":
            layers.append(Conv2d(channels, width, 3, padding="same", activation="relu", rng=rng, name=f"conv{i}"))
            channels = width
        else:
            if side < 2:
                raise ValueError(
                    f"{cfg.backbone}: frame_size {cfg.frame_size} too small, spatial extent reaches zero at block {block + 1}"
                )
            layers.append(MaxPool2d(2, 2))
            side //= 2
        blocks.append(block)
    return Backbone(layers, cfg.backbone, (channels, side, side), blocks)


def freeze_prefix(model, boundary: int):
    """Freeze every parameter in backbone layers ``[0, boundary)``; unfreeze the rest."""
    backbone = model.backbone if hasattr(model, "backbone") else model
    n = len(backbone.layers)
    if not 0 <= boundary <= n:
        raise ValueError(f"freeze boundary {boundary} outside [0, {n}]")
    for i, layer in enumerate(backbone.layers):
        for p in layer.parameters():
            p.trainable = i >= boundary


class TimeDistributed(Module):
    """Apply one backbone to every frame of a sequence with shared weights."""

    def __init__(self, backbone: Backbone, seq_len: int):
        self.backbone = backbone
        self.seq_len = seq_len

    def forward(self, seq: Tensor) -> Tensor:
        single = seq.ndim == 4
        if single:
            seq = seq.reshape((1,) + seq.shape)
        if seq.ndim != 5:
            raise ShapeError(f"time_distributed: expected [B×]L×C×H×W, got {seq.shape}")
        b, length = seq.shape[:2]
        if length != self.seq_len:
            raise ShapeError(f"time_distributed: expected {self.seq_len} frames, got {length}")
        feats = self.backbone(seq.reshape((b * length,) + seq.shape[2:]))
        feats = feats.reshape(b, length, feats.shape[1])
        return feats.reshape(length, -1) if single else feats


def time_distributed(backbone: Backbone, seq: Tensor, seq_len: int | None = None) -> Tensor:
    seq_len = seq_len if seq_len is not None else seq.shape[-4]
    return TimeDistributed(backbone, seq_len)(seq)


class ClassifierHead(Module):
    def __init__(self, in_features: int, cfg: ModelConfig, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        layers = []
        width = in_features
        if cfg.with_pred_head:
            for i, (units, rate) in enumerate(cfg.head):
                layers.append(Dense(width, units, "relu", rng=rng, name=f"head{i}"))
                if rate > 0:
                    layers.append(Dropout(rate, rng=np.random.default_rng(rng.integers(2**63))))
                width = units
        if cfg.loss == "bce":
            layers.append(Dense(width, 1, "sigmoid", rng=rng, name="out"))
        else:
            layers.append(Dense(width, cfg.n_classes, "softmax", rng=rng, name="out"))
        self.layers = layers
        self.binary = cfg.loss == "bce"

    def forward(self, h: Tensor) -> Tensor:
        for layer in self.layers:
            h = layer(h)
        return h.reshape(h.shape[0]) if self.binary else h


def classify_head(h_final: Tensor, head: ClassifierHead) -> Tensor:
    single = h_final.ndim == 1
    out = head(h_final.reshape(1, -1) if single else h_final)
    return out.reshape(out.shape[1:]) if single else out


class AnomalyNet(Module):
    """Shared per-frame backbone, recurrent cell over the feature series, dense head."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        ss = np.random.SeedSequence(seed)
        r_backbone, r_cell, r_head = (np.random.default_rng(s) for s in ss.spawn(3))
        self.backbone = build_backbone(cfg, r_backbone)
        self.frames = TimeDistributed(self.backbone, cfg.seq_len)
        cell_cls = GRUCell if cfg.cell == "gru" else LSTMCell
        self.cell = cell_cls(self.backbone.feature_dim, cfg.hidden_size, rng=r_cell, name=cfg.cell)
        self.head = ClassifierHead(cfg.hidden_size, cfg, rng=r_head)
        freeze_prefix(self, cfg.effective_freeze)

    def children(self):
        # the backbone is reachable both directly and through the time wrapper
        yield "backbone", self.backbone
        yield "cell", self.cell
        yield "head", self.head

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(x)
        feats = self.frames(x)
        if feats.ndim == 2:
            feats = feats.reshape((1,) + feats.shape)
        state: CellState = self.cell(feats)
        return self.head(state.h)

    def loss(self, probs: Tensor, targets) -> Tensor:
        targets = np.asarray(targets)
        if self.cfg.loss == "bce":
            return F.bce(probs, (targets > 0).astype(np.float32))
        return F.cce(probs, targets.astype(np.int64))

    def anomaly_probability(self, probs: Tensor) -> np.ndarray:
        """Probability of any non-normal class (class index 0 is normal)."""
        p = probs.data
        return p.astype(np.float64) if p.ndim == 1 else (1.0 - p[:, 0]).astype(np.float64)

    def predict_proba(self, x) -> np.ndarray:
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                return self.anomaly_probability(self.forward(x))
        finally:
            self.train(was_training)
