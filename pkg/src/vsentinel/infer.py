"""Offline inference over one stored video."""

from __future__ import annotations

import time
from pathlib import Path

from .nn.model import AnomalyNet
from .pipeline.frames import META_NAME, VideoMeta, count_frames, read_meta
from .pipeline.generator import load_sequence, plan_sequences
from .stream import AlertRecord, label_for, percentile
from .training.checkpoint import Checkpoint, load_checkpoint


def _resolve_model(source) -> AnomalyNet:
    if isinstance(source, AnomalyNet):
        return source
    if isinstance(source, Checkpoint):
        return source.model
    return load_checkpoint(source).model


def video_meta(video_dir, fps: float | None = None) -> VideoMeta:
    """Metadata from ``meta.json`` if present, else counted frames and ``fps``."""
    video_dir = Path(video_dir)
    if not video_dir.is_dir():
        raise FileNotFoundError(f"video directory not found: {video_dir}")
    n = count_frames(video_dir)
    if n == 0:
        raise ValueError(f"empty video: no frames in {video_dir}")
    if (video_dir / META_NAME).exists():
        meta = read_meta(video_dir)
        if fps is not None:
            meta.fps = fps
        meta.n_frames = n
        return meta
    return VideoMeta(video_dir.name, fps if fps is not None else 30.0, n, "")


def infer_video(source, video_dir, mode: str = "sliding", threshold: float = 0.5,
                window_seconds: float | None = None, stride: int | None = None,
                fps: float | None = None) -> tuple[list[AlertRecord], dict]:
    """Classify every window of a stored video and return records plus a verdict.

    The verdict probability is the max over windows (a single window in
    single_sequence mode).
    """
    model = _resolve_model(source)
    cfg = model.cfg
    meta = video_meta(video_dir, fps)
    ws = window_seconds if window_seconds is not None else cfg.window_seconds
    records = []
    for ref in plan_sequences(meta, cfg.seq_len, mode, ws, stride):
        seq = load_sequence(video_dir, ref, cfg.frame_size)
        t0 = time.perf_counter()
        p = float(model.predict_proba(seq.frames[None])[0])
        ms = (time.perf_counter() - t0) * 1000.0
        start = ref.indices[0]
        records.append(AlertRecord(
            frame=min(start + cfg.seq_len * ref.step, meta.n_frames) - 1,
            probability=p,
            label=label_for(p, threshold),
            span=(start, ref.indices[-1]),
            wall_ms=ms,
            wall_clock=time.time(),
            padded=ref.padded,
        ))
    best = max(r.probability for r in records)
    latencies = [r.wall_ms for r in records]
    summary = {
        "video": meta.id,
        "mode": mode,
        "frames": meta.n_frames,
        "windows": len(records),
        "probability": best,
        "verdict": label_for(best, threshold),
        "padded": any(r.padded for r in records),
        "latency_p50_ms": percentile(latencies, 50),
        "latency_p95_ms": percentile(latencies, 95),
    }
    return records, summary
