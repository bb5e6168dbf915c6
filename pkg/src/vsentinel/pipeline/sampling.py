"""Frame index selection: fps-aware steps, whole-video and sliding samplers."""

from __future__ import annotations

import math


def compute_step(fps: float, window_seconds: float, seq_len: int) -> int:
    """Source-frame stride so ``seq_len`` samples span about ``window_seconds``.

    ``max(1, round_half_up(fps * window_seconds / seq_len))``.
    """
    if not (fps > 0 and window_seconds > 0 and seq_len > 0):
        raise ValueError(f"fps, window_seconds and seq_len must be positive, got {fps}, {window_seconds}, {seq_len}")
    return max(1, math.floor(fps * window_seconds / seq_len + 0.5))


def whole_video_step(n_frames: int, seq_len: int) -> int:
    return max(1, n_frames // seq_len)


def sample_whole_video(meta, seq_len: int) -> list[int]:
    """Indices for one sequence covering the whole video at a constant step.

    Short videos keep every frame and repeat the last one up to ``seq_len``.
    ``meta`` is a VideoMeta or a frame count.
    """
    n = meta if isinstance(meta, int) else meta.n_frames
    if n < 1:
        raise ValueError("video has no frames")
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    if n < seq_len:
        return list(range(n)) + [n - 1] * (seq_len - n)
    step = n // seq_len
    return [k * step for k in range(seq_len)]


def sliding_starts(n_frames: int, seq_len: int, step: int, stride: int) -> list[int]:
    """First source frame of every window of ``seq_len * step`` frames, ``stride`` apart."""
    if step < 1 or stride < 1:
        raise ValueError("step and stride must be >= 1")
    span = seq_len * step
    if n_frames < span:
        return []
    return list(range(0, n_frames - span + 1, stride))


def window_indices(start: int, seq_len: int, step: int) -> list[int]:
    return [start + k * step for k in range(seq_len)]


def default_stride(seq_len: int, step: int) -> int:
    """Half-window overlap, in source frames."""
    return max(1, seq_len // 2) * step
