"""Real-time inference over a live frame feed.

Frames are pushed one at a time into a ring buffer holding ``seq_len * step``
frames. Every ``emit_stride`` frames after warm-up the buffered block is
sampled at ``step``, classified, and an :class:`AlertRecord` is produced. The
windows are the same ones offline sliding evaluation visits, so both paths
give identical probabilities.

In asynchronous mode inference runs on a worker thread. Complete windows are
handed over through a single slot; a window still waiting when a newer one
arrives is dropped and counted.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .pipeline.frames import to_chw
from .pipeline.sampling import compute_step, default_stride
from .pipeline.transforms import resize_frame


@dataclass
class AlertRecord:
    frame: int
    probability: float
    label: str
    span: tuple[int, int]
    wall_ms: float = 0.0
    wall_clock: float = 0.0
    padded: bool = False

    def to_dict(self) -> dict:
        return {"frame": self.frame, "wall_ms": round(self.wall_ms, 3), "p": self.probability,
                "label": self.label, "span": list(self.span)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def label_for(p: float, threshold: float) -> str:
    return "anomaly" if p >= threshold else "normal"


def prepare_frame(frame: np.ndarray, side: int) -> np.ndarray:
    """Raw ``H×W×3`` uint8 (or ``3×H×W`` float) frame → ``3×side×side`` float32."""
    frame = np.asarray(frame)
    if frame.dtype == np.uint8:
        frame = to_chw(frame)
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise ValueError(f"expected H×W×3 uint8 or 3×H×W float frame, got {frame.shape}")
    if frame.shape[1:] != (side, side):
        frame = resize_frame(frame, side)
    return frame


def percentile(values, q: float) -> float | None:
    return float(np.percentile(values, q)) if len(values) else None


class StreamSession:
    def __init__(self, model, fps: float, window_seconds: float | None = None, threshold: float = 0.5,
                 emit_stride: int | None = None, synchronous: bool = True, on_alert=None):
        cfg = model.cfg
        self.model = model
        self.fps = fps
        self.seq_len = cfg.seq_len
        self.side = cfg.frame_size
        self.window_seconds = window_seconds if window_seconds is not None else cfg.window_seconds
        self.step = compute_step(fps, self.window_seconds, cfg.seq_len)
        self.capacity = cfg.seq_len * self.step
        self.emit_stride = emit_stride if emit_stride is not None else default_stride(cfg.seq_len, self.step)
        if self.emit_stride < 1:
            raise ValueError("emit_stride must be >= 1")
        self.threshold = threshold
        self.synchronous = synchronous
        self.on_alert = on_alert
        self.buffer: deque[np.ndarray] = deque(maxlen=self.capacity)
        self.frames_seen = 0
        self.dropped = 0
        self.latencies: list[float] = []
        self.alerts: list[AlertRecord] = []
        self._raw_shape: tuple | None = None
        self._unreturned: deque[AlertRecord] = deque()
        self._lock = threading.Condition()
        self._pending: tuple | None = None
        self._closed = False
        self._worker = None
        if not synchronous:
            self._worker = threading.Thread(target=self._run, name="stream-inference", daemon=True)
            self._worker.start()

    # ingestion --------------------------------------------------------------------

    def push_frame(self, frame) -> AlertRecord | None:
        """Add one frame; return a new alert if one became available."""
        frame = np.asarray(frame)
        if self._raw_shape is None:
            self._raw_shape = frame.shape
        elif frame.shape != self._raw_shape:
            raise ValueError(f"frame shape {frame.shape} differs from stream geometry {self._raw_shape}")
        self.buffer.append(prepare_frame(frame, self.side))
        self.frames_seen += 1
        if self.frames_seen >= self.capacity and (self.frames_seen - self.capacity) % self.emit_stride == 0:
            start = self.frames_seen - self.capacity
            window = np.stack(list(self.buffer)[::self.step][:self.seq_len])
            job = (window, start, self.frames_seen - 1)
            if self.synchronous:
                self._infer(*job)
            else:
                with self._lock:
                    if self._pending is not None:
                        self.dropped += 1
                    self._pending = job
                    self._lock.notify()
        return self._pop_alert()

    def _pop_alert(self) -> AlertRecord | None:
        with self._lock:
            latest = None
            while self._unreturned:
                latest = self._unreturned.popleft()
            return latest

    # inference --------------------------------------------------------------------

    def _infer(self, window: np.ndarray, start: int, frame_index: int) -> AlertRecord:
        t0 = time.perf_counter()
        p = float(self.model.predict_proba(window[None])[0])
        ms = (time.perf_counter() - t0) * 1000.0
        rec = AlertRecord(
            frame=frame_index,
            probability=p,
            label=label_for(p, self.threshold),
            span=(start, start + (self.seq_len - 1) * self.step),
            wall_ms=ms,
            wall_clock=time.time(),
        )
        with self._lock:
            self.latencies.append(ms)
            self.alerts.append(rec)
            self._unreturned.append(rec)
        if self.on_alert is not None:
            self.on_alert(rec)
        return rec

    def _run(self):
        while True:
            with self._lock:
                while self._pending is None and not self._closed:
                    self._lock.wait()
                if self._pending is None and self._closed:
                    return
                job, self._pending = self._pending, None
            self._infer(*job)

    def close(self) -> list[AlertRecord]:
        """Finish any queued window and return every alert produced."""
        if self._worker is not None:
            with self._lock:
                self._closed = True
                self._lock.notify_all()
            self._worker.join()
        return list(self.alerts)

    def summary(self) -> dict:
        return {
            "frames": self.frames_seen,
            "step": self.step,
            "alerts": len(self.alerts),
            "anomalies": sum(a.label == "anomaly" for a in self.alerts),
            "dropped": self.dropped,
            "latency_p50_ms": percentile(self.latencies, 50),
            "latency_p95_ms": percentile(self.latencies, 95),
        }


def push_frame(session: StreamSession, frame) -> AlertRecord | None:
    return session.push_frame(frame)
