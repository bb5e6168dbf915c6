from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass
class FrameSequence:
    """``L×3×S×S`` float32 frames in [0, 1] sampled from one video."""

    frames: np.ndarray
    origin: str
    start_index: int
    step: int
    indices: tuple = ()
    padded: bool = False

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise ValueError(f"frames must be L×3×S×S, got {self.frames.shape}")
        if self.step < 1:
            raise ValueError("step must be >= 1")

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class AugmentSpec:
    flip: bool = False
    crop_fraction: float = 1.0
    zoom: float = 1.0
    seed: int = 0
    random_offset: bool = False

    def __post_init__(self):
        if not 0.5 < self.crop_fraction <= 1.0:
            raise ValueError(f"crop_fraction must be in (0.5, 1], got {self.crop_fraction}")
        if not 1.0 <= self.zoom <= 1.5:
            raise ValueError(f"zoom must be in [1, 1.5], got {self.zoom}")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "AugmentSpec":
        return cls(
            flip=bool(rng.random() < 0.5),
            crop_fraction=float(rng.uniform(0.8, 1.0)),
            zoom=float(rng.uniform(1.0, 1.2)),
            seed=int(rng.integers(2**31)),
            random_offset=True,
        )


def _axis_weights(n_in: int, n_out: int):
    # half-pixel centres, edge-clamped
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize_bilinear(frames: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of ``...×H×W`` arrays over the last two axes."""
    if height < 1 or width < 1:
        raise ValueError(f"target size must be >= 1, got {height}x{width}")
    h, w = frames.shape[-2:]
    if (h, w) == (height, width):
        return frames.copy()
    y0, y1, ty = _axis_weights(h, height)
    x0, x1, tx = _axis_weights(w, width)
    ty, tx = ty.astype(frames.dtype), tx.astype(frames.dtype)
    rows0, rows1 = frames[..., y0, :], frames[..., y1, :]
    rows = rows0 + ty[:, None] * (rows1 - rows0)
    c0, c1 = rows[..., x0], rows[..., x1]
    return (c0 + tx * (c1 - c0)).astype(frames.dtype)


def resize_frame(frame: np.ndarray, side: int) -> np.ndarray:
    """Stretch a ``3×H×W`` frame (or ``L×3×H×W`` stack) to ``side×side``."""
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    if min(frame.shape[-2:]) < 1:
        raise ValueError("frame has an empty spatial extent")
    return resize_bilinear(frame, side, side)


def augment(seq: FrameSequence, spec: AugmentSpec) -> FrameSequence:
    """Apply one crop/zoom/flip transform identically to every frame."""
    frames = seq.frames
    h, w = frames.shape[-2:]
    frac = spec.crop_fraction / spec.zoom
    ch, cw = int(round(h * frac)), int(round(w * frac))
    if ch < 2 or cw < 2:
        raise ValueError(f"degenerate crop window {ch}x{cw}")
    if (ch, cw) != (h, w):
        if spec.random_offset:
            rng = np.random.default_rng(spec.seed)
            top, left = int(rng.integers(0, h - ch + 1)), int(rng.integers(0, w - cw + 1))
        else:
            top, left = (h - ch) // 2, (w - cw) // 2
        frames = resize_bilinear(frames[..., top:top + ch, left:left + cw], h, w)
    if spec.flip:
        frames = frames[..., ::-1]
    return replace(seq, frames=np.ascontiguousarray(frames))
