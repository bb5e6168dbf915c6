"""Synthetic two-class surveillance clips that differ only in motion.

Both classes draw the same anti-aliased square sprites on the same
background. Calm clips drift every sprite along a straight line at a constant
slow velocity (wrapping at the borders). Agitated clips give sprites random
accelerations, bounce them off the borders and flash overlapping sprites white.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..pipeline.frames import VideoMeta, write_video
from .manifest import DatasetManifest, write_manifest

CLASS_KINDS = ("calm", "agitated")
BACKGROUND = 40
PALETTE = np.array(
    [[230, 70, 60], [70, 200, 90], [80, 110, 235], [235, 200, 60], [200, 80, 210], [60, 200, 210]],
    dtype=np.uint8,
)
FLASH = np.array([255, 255, 255], dtype=np.uint8)
CALM_SPEED = 0.25  # px/frame
MAX_SPEED = 6.0


@dataclass(frozen=True)
class SynthSpec:
    class_kind: str = "calm"
    n_frames: int = 64
    fps: float = 30.0
    side: int = 32
    seed: int = 0
    sprite_count: int = 3

    @property
    def sprite_size(self) -> int:
        return max(2, self.side // 4)

    def validate(self):
        if self.class_kind not in CLASS_KINDS:
            raise ValueError(f"class_kind must be one of {CLASS_KINDS}, got {self.class_kind!r}")
        if self.n_frames < 1 or self.fps <= 0 or self.sprite_count < 1:
            raise ValueError("n_frames, fps and sprite_count must be positive")
        if self.side < 8 or self.sprite_count * 4 * self.sprite_size ** 2 > self.side ** 2:
            raise ValueError(f"side {self.side} too small for {self.sprite_count} sprites")


def _initial_positions(rng, spec: SynthSpec) -> np.ndarray:
    sz, hi = spec.sprite_size, spec.side - spec.sprite_size
    pos: list[np.ndarray] = []
    for _ in range(1000 * spec.sprite_count):
        cand = rng.uniform(0, hi, size=2)
        if all(np.any(np.abs(cand - p) >= sz) for p in pos):
            pos.append(cand)
            if len(pos) == spec.sprite_count:
                return np.array(pos)
    raise ValueError(f"side {spec.side} too small for {spec.sprite_count} sprites")


def _overlapping(pos: np.ndarray, sz: int) -> np.ndarray:
    d = np.abs(pos[:, None, :] - pos[None, :, :])
    hit = np.all(d < sz, axis=-1)
    np.fill_diagonal(hit, False)
    return hit.any(axis=1)


def _coverage(start: float, size: int, n: int) -> np.ndarray:
    """Fraction of each pixel cell [i, i+1) covered by [start, start+size)."""
    cells = np.arange(n, dtype=np.float64)
    return np.clip(np.minimum(cells + 1, start + size) - np.maximum(cells, start), 0.0, 1.0)


def _draw(canvas: np.ndarray, y: float, x: float, sz: int, color, wrap: bool):
    """Box-filtered (anti-aliased) square with its top-left corner at (y, x)."""
    side = canvas.shape[0]
    ys = (y, y - side) if wrap else (y,)
    xs = (x, x - side) if wrap else (x,)
    for yy in ys:
        cy = _coverage(yy, sz, side)
        if not cy.any():
            continue
        for xx in xs:
            cx = _coverage(xx, sz, side)
            if not cx.any():
                continue
            a = np.outer(cy, cx)[..., None]
            canvas[:] = canvas * (1 - a) + np.asarray(color, dtype=np.float64) * a


def render_synthetic(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(frames, positions)``: uint8 ``N×S×S×3`` frames and the
    top-left corner (row, col) of each sprite per frame as ``N×K×2`` floats."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    side, sz, k = spec.side, spec.sprite_size, spec.sprite_count
    colors = PALETTE[rng.permutation(len(PALETTE))[np.arange(k) % len(PALETTE)]]
    pos = _initial_positions(rng, spec)
    track = np.zeros((spec.n_frames, k, 2))
    flashes = np.zeros((spec.n_frames, k), dtype=bool)

    if spec.class_kind == "calm":
        angle = rng.uniform(0, 2 * np.pi, size=k)
        vel = CALM_SPEED * np.stack([np.sin(angle), np.cos(angle)], axis=1)
        for t in range(spec.n_frames):
            track[t] = (pos + t * vel) % side
    else:
        vel = rng.normal(0.0, 3.0, size=(k, 2))
        hi = side - sz
        for t in range(spec.n_frames):
            if t:
                vel = np.clip(vel + rng.normal(0.0, 2.5, size=(k, 2)), -MAX_SPEED, MAX_SPEED)
                pos = pos + vel
                low, high = pos < 0, pos > hi
                pos = np.clip(np.where(low, -pos, np.where(high, 2 * hi - pos, pos)), 0, hi)
                vel = np.where(low | high, -vel, vel)
            track[t] = pos
            flashes[t] = _overlapping(pos, sz)

    wrap = spec.class_kind == "calm"
    frames = np.empty((spec.n_frames, side, side, 3), dtype=np.uint8)
    for t in range(spec.n_frames):
        canvas = np.full((side, side, 3), float(BACKGROUND))
        for s in range(k):
            _draw(canvas, track[t, s, 0], track[t, s, 1], sz, FLASH if flashes[t, s] else colors[s], wrap)
        frames[t] = np.round(canvas).astype(np.uint8)
    return frames, track


def generate_synthetic_video(spec: SynthSpec, out_dir, video_id: str, label: str | None = None) -> VideoMeta:
    frames, _ = render_synthetic(spec)
    meta = VideoMeta(id=video_id, fps=spec.fps, n_frames=spec.n_frames, label=label or spec.class_kind,
                     source_path=str(out_dir))
    write_video(out_dir, frames, meta)
    return meta


def generate_dataset(root, n_per_class: dict[str, int] | int = 10, n_frames: int = 64, side: int = 32,
                     fps: float = 30.0, seed: int = 0, sprite_count: int = 3) -> DatasetManifest:
    """Write ``root/<id>/`` frame directories and ``root/manifest.jsonl``.

    Video seeds are derived from ``seed`` so regeneration is byte-identical.
    """
    root = Path(root)
    if isinstance(n_per_class, int):
        n_per_class = {kind: n_per_class for kind in CLASS_KINDS}
    seeds = np.random.SeedSequence(seed).generate_state(sum(n_per_class.values()))
    records, i = [], 0
    for kind in CLASS_KINDS:
        for j in range(n_per_class.get(kind, 0)):
            vid = f"{kind}_{j:04d}"
            spec = SynthSpec(kind, n_frames, fps, side, int(seeds[i]), sprite_count)
            meta = generate_synthetic_video(spec, root / vid, vid)
            meta.source_path = vid
            records.append(meta)
            i += 1
    manifest = DatasetManifest(records, [k for k in CLASS_KINDS if n_per_class.get(k, 0)], {}, root)
    write_manifest(manifest, root / "manifest.jsonl")
    return manifest


# --- motion-energy oracle -------------------------------------------------------


def motion_energy(frames: np.ndarray) -> float:
    """Mean absolute inter-frame pixel difference, in [0, 1] units."""
    frames = np.asarray(frames)
    f = frames.astype(np.float64)
    if frames.dtype == np.uint8:
        f /= 255.0
    if len(f) < 2:
        return 0.0
    return float(np.abs(np.diff(f, axis=0)).mean())


class MotionEnergyClassifier:
    """Threshold on motion energy: above the threshold means anomalous."""

    def __init__(self, threshold: float | None = None):
        self.threshold = threshold

    def fit(self, energies, labels) -> "MotionEnergyClassifier":
        e = np.asarray(energies, dtype=np.float64)
        y = np.asarray(labels).astype(bool)
        order = np.unique(e)
        candidates = np.concatenate([[order[0] - 1e-9], (order[:-1] + order[1:]) / 2, [order[-1] + 1e-9]])
        scores = [np.mean((e > c) == y) for c in candidates]
        self.threshold = float(candidates[int(np.argmax(scores))])
        return self

    def predict(self, energies) -> np.ndarray:
        if self.threshold is None:
            raise RuntimeError("classifier is not fitted")
        return (np.asarray(energies) > self.threshold).astype(int)

    def score(self, energies, labels) -> float:
        return float(np.mean(self.predict(energies) == np.asarray(labels).astype(int)))
