"""Binary PPM (P6) frames and on-disk video directories.

A video is a directory holding ``frame_000000.ppm``, ``frame_000001.ppm``, ...
plus a ``meta.json`` with the :class:`VideoMeta` fields.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence

import numpy as np

FRAME_PATTERN = "frame_{:06d}.ppm"
META_NAME = "meta.json"


class PPMError(ValueError):
    pass


@dataclass
class VideoMeta:
    id: str
    fps: float
    n_frames: int
    label: str
    source_path: str = ""

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"{self.id}: fps must be positive, got {self.fps}")
        if self.n_frames < 1:
            raise ValueError(f"{self.id}: n_frames must be >= 1, got {self.n_frames}")

    def to_dict(self) -> dict:
        return asdict(self)


def _read_token(stream: BinaryIO) -> bytes | None:
    token = b""
    while True:
        ch = stream.read(1)
        if not ch:
            return token or None
        if ch == b"#":
            while ch not in (b"\n", b"\r", b""):
                ch = stream.read(1)
            if token:
                return token
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_ppm_from(stream: BinaryIO) -> np.ndarray | None:
    """Read one P6 image from ``stream``; ``None`` at a clean end of stream.

    Returns an ``H×W×3`` uint8 array (16-bit files are scaled to 8 bits).
    """
    magic = _read_token(stream)
    if magic is None:
        return None
    if magic != b"P6":
        raise PPMError(f"not a binary PPM: magic {magic!r}")
    try:
        width, height, maxval = (int(_read_token(stream) or b"") for _ in range(3))
    except ValueError as exc:
        raise PPMError("malformed PPM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise PPMError(f"bad PPM geometry {width}x{height} maxval {maxval}")
    nbytes = width * height * 3 * (1 if maxval < 256 else 2)
    raw = stream.read(nbytes)
    if len(raw) != nbytes:
        raise PPMError(f"truncated PPM payload: expected {nbytes} bytes, got {len(raw)}")
    dtype = np.uint8 if maxval < 256 else ">u2"
    img = np.frombuffer(raw, dtype=dtype).reshape(height, width, 3)
    if maxval == 255:
        return img
    # integer round-half-up rescale to 0..255
    return ((img.astype(np.int64) * 255 + maxval // 2) // maxval).astype(np.uint8)


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        img = read_ppm_from(fh)
    if img is None:
        raise PPMError(f"{path}: empty file")
    return img


def iter_ppm_stream(stream: BinaryIO) -> Iterator[np.ndarray]:
    """Yield frames from concatenated P6 images (e.g. a capture pipe)."""
    while True:
        img = read_ppm_from(stream)
        if img is None:
            return
        yield img


def encode_ppm(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise PPMError(f"expected H×W×3 image, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w, _ = img.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def write_ppm(path, img: np.ndarray):
    Path(path).write_bytes(encode_ppm(img))


def to_chw(img: np.ndarray) -> np.ndarray:
    """uint8 ``H×W×3`` → float32 ``3×H×W`` in [0, 1]."""
    return (np.asarray(img, dtype=np.float32) / np.float32(255.0)).transpose(2, 0, 1)


def to_hwc_uint8(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(frame, 0.0, 1.0).transpose(1, 2, 0) * 255.0).astype(np.uint8)


# --- video directories ---------------------------------------------------------------


def frame_path(video_dir, index: int) -> Path:
    return Path(video_dir) / FRAME_PATTERN.format(index)


def write_video(video_dir, frames: Sequence[np.ndarray], meta: VideoMeta):
    video_dir = Path(video_dir)
    video_dir.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(frames):
        write_ppm(frame_path(video_dir, i), img)
    (video_dir / META_NAME).write_text(json.dumps(meta.to_dict(), indent=1, sort_keys=True) + "\n")


def read_meta(video_dir) -> VideoMeta:
    data = json.loads((Path(video_dir) / META_NAME).read_text())
    return VideoMeta(**data)


def count_frames(video_dir) -> int:
    return sum(1 for _ in Path(video_dir).glob("frame_*.ppm"))


def load_frames(video_dir, indices: Sequence[int]) -> np.ndarray:
    """Load the given frame indices as a float32 ``N×3×H×W`` array.

    Repeated indices are decoded once.
    """
    cache: dict[int, np.ndarray] = {}
    out = []
    for i in indices:
        if i not in cache:
            cache[i] = to_chw(read_ppm(frame_path(video_dir, i)))
        out.append(cache[i])
    shapes = {f.shape for f in out}
    if len(shapes) > 1:
        raise PPMError(f"{video_dir}: inconsistent frame sizes {sorted(shapes)}")
    return np.stack(out)


def ppm_bytes_stream(frames: Sequence[np.ndarray]) -> io.BytesIO:
    return io.BytesIO(b"".join(encode_ppm(f) for f in frames))
