"""Batch production from a manifest with a bounded producer thread."""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .frames import PPMError, load_frames
from .sampling import compute_step, default_stride, sample_whole_video, sliding_starts, window_indices
from .transforms import AugmentSpec, FrameSequence, augment, resize_frame

log = logging.getLogger(__name__)

MODES = ("single_sequence", "sliding")


@dataclass(frozen=True)
class SequenceRef:
    """Where one training/eval sequence comes from, before any pixels are read."""

    video_id: str
    indices: tuple[int, ...]
    step: int
    padded: bool = False


def plan_sequences(meta, seq_len: int, mode: str, window_seconds: float = 1.0,
                   stride: int | None = None) -> list[SequenceRef]:
    """Enumerate the sequences one video contributes in ``mode``.

    Sliding mode falls back to a single padded whole-video sequence when the
    video is shorter than one window.
    """
    if mode == "single_sequence":
        idx = sample_whole_video(meta, seq_len)
        step = max(1, meta.n_frames // seq_len)
        return [SequenceRef(meta.id, tuple(idx), step, padded=meta.n_frames < seq_len)]
    if mode != "sliding":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    step = compute_step(meta.fps, window_seconds, seq_len)
    stride = stride if stride is not None else default_stride(seq_len, step)
    starts = sliding_starts(meta.n_frames, seq_len, step, stride)
    if not starts:
        idx = sample_whole_video(meta, seq_len)
        return [SequenceRef(meta.id, tuple(idx), max(1, meta.n_frames // seq_len), padded=True)]
    return [SequenceRef(meta.id, tuple(window_indices(s, seq_len, step)), step) for s in starts]


def load_sequence(video_dir, ref: SequenceRef, side: int) -> FrameSequence:
    frames = load_frames(video_dir, ref.indices)
    if frames.shape[-2:] != (side, side):
        frames = resize_frame(frames, side)
    return FrameSequence(frames, ref.video_id, ref.indices[0], ref.step, ref.indices, ref.padded)


class BatchGenerator:
    """Iterable of ``(x, labels, refs)`` batches for one epoch.

    ``x`` is ``B×L×3×S×S`` float32 and ``labels`` are class indices. A single
    producer thread fills a queue of at most ``buffer_size`` batches; order is
    the seeded shuffle order regardless of timing. Videos that fail to load
    are logged, skipped and listed in :attr:`errors`.
    """

    def __init__(self, manifest, cfg, mode: str = "single_sequence", partition: str | None = "train",
                 seed: int = 0, epoch: int = 0, shuffle: bool = True, augment: bool = False,
                 buffer_size: int = 2, stride: int | None = None, threaded: bool = True):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        self.manifest = manifest
        self.cfg = cfg
        self.records = manifest.records_in(partition)
        if not self.records:
            raise ValueError(f"no videos in partition {partition!r}")
        self.mode = mode
        self.seed = seed
        self.epoch = epoch
        self.shuffle = shuffle
        self.augment = augment
        self.buffer_size = buffer_size
        self.threaded = threaded
        self.errors: list[tuple[str, str]] = []
        self.max_queued = 0
        self._by_id = {r.id: r for r in self.records}
        self.refs = [
            ref for r in self.records
            for ref in plan_sequences(r, cfg.seq_len, mode, cfg.window_seconds, stride)
        ]

    def __len__(self) -> int:
        return -(-len(self.refs) // self.cfg.batch)

    def _ordered_refs(self, rng) -> list[SequenceRef]:
        refs = list(self.refs)
        if self.shuffle:
            refs = [refs[i] for i in rng.permutation(len(refs))]
        return refs

    def _batches(self) -> Iterator[tuple[np.ndarray, np.ndarray, list[SequenceRef]]]:
        rng = np.random.default_rng([self.seed, self.epoch])
        refs = self._ordered_refs(rng)
        bad: set[str] = set()
        xs, ys, kept = [], [], []
        for ref in refs:
            if ref.video_id in bad:
                continue
            rec = self._by_id[ref.video_id]
            # draw the augmentation before loading so a failed read does not shift the stream
            spec = AugmentSpec.random(rng) if self.augment else None
            try:
                seq = load_sequence(self.manifest.video_dir(rec), ref, self.cfg.frame_size)
            except (OSError, PPMError, ValueError) as exc:
                log.warning("skipping video %s: %s", rec.id, exc)
                self.errors.append((rec.id, str(exc)))
                bad.add(rec.id)
                continue
            if spec is not None:
                seq = augment(seq, spec)
            xs.append(seq.frames)
            ys.append(self.manifest.label_index(rec))
            kept.append(ref)
            if len(xs) == self.cfg.batch:
                yield np.stack(xs), np.array(ys), kept
                xs, ys, kept = [], [], []
        if xs:
            yield np.stack(xs), np.array(ys), kept

    def __iter__(self):
        if not self.threaded:
            yield from self._batches()
            return
        buf: queue.Queue = queue.Queue(maxsize=self.buffer_size)
        stop = threading.Event()
        done = object()

        def put(item) -> bool:
            while not stop.is_set():
                try:
                    buf.put(item, timeout=0.1)
                    self.max_queued = max(self.max_queued, buf.qsize())
                    return True
                except queue.Full:
                    continue
            return False

        def produce():
            try:
                for batch in self._batches():
                    if not put(batch):
                        return
                put(done)
            except BaseException as exc:  # surfaced in the consumer
                put(exc)

        worker = threading.Thread(target=produce, name="batch-producer", daemon=True)
        worker.start()
        try:
            while True:
                item = buf.get()
                if item is done:
                    return
                if isinstance(item, BaseException):
                    raise item
                yield item
        finally:
            stop.set()
            worker.join(timeout=5)


def batch_generator(manifest, cfg, mode: str = "single_sequence", **kwargs) -> BatchGenerator:
    return BatchGenerator(manifest, cfg, mode, **kwargs)
