"""Dataset manifests: JSON-lines video records plus sibling split/class files.

``manifest.jsonl`` holds one ``{"id", "path", "label", "fps", "n_frames"}``
object per line. ``split.json`` maps id → "train"/"test". ``classes.json``
(optional) fixes class order; index 0 is the normal class. Without it, classes
are ordered by first appearance.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..pipeline.frames import PPMError, count_frames, frame_path, read_ppm, VideoMeta

SPLIT_NAME = "split.json"
CLASSES_NAME = "classes.json"
PARTITIONS = ("train", "test")


class ManifestError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class DatasetManifest:
    records: list[VideoMeta]
    classes: list[str]
    split: dict[str, str] = field(default_factory=dict)
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        self.root = Path(self.root)
        self.validate()

    def validate(self):
        if not self.records:
            raise ManifestError("empty manifest")
        problems = []
        seen = Counter(r.id for r in self.records)
        problems += [f"{i}: duplicate id" for i, k in seen.items() if k > 1]
        problems += [f"{r.id}: unknown label {r.label!r}" for r in self.records if r.label not in self.classes]
        if self.split:
            ids = set(seen)
            problems += [f"{i}: missing from split" for i in sorted(ids - set(self.split))]
            problems += [f"{i}: split entry for unknown id" for i in sorted(set(self.split) - ids)]
            problems += [f"{i}: bad partition {p!r}" for i, p in self.split.items() if p not in PARTITIONS]
        if problems:
            raise ManifestError(problems)

    def __len__(self):
        return len(self.records)

    def label_index(self, record: VideoMeta) -> int:
        return self.classes.index(record.label)

    def video_dir(self, record: VideoMeta) -> Path:
        p = Path(record.source_path)
        return p if p.is_absolute() else self.root / p

    def records_in(self, partition: str | None) -> list[VideoMeta]:
        if partition is None:
            return list(self.records)
        if not self.split:
            raise ManifestError("manifest has no split; run split_dataset first")
        return [r for r in self.records if self.split[r.id] == partition]

    def with_split(self, split: dict[str, str]) -> "DatasetManifest":
        return replace(self, split=dict(split))

    def subset(self, ids) -> "DatasetManifest":
        keep = set(ids)
        recs = [r for r in self.records if r.id in keep]
        split = {k: v for k, v in self.split.items() if k in keep}
        return DatasetManifest(recs, list(self.classes), split, self.root)


def split_dataset(manifest: DatasetManifest, ratio: float = 0.6, seed: int = 0) -> DatasetManifest:
    """Stratified random train/test split; ``round(ratio * n_c)`` train videos per class."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    split = {}
    for cls in manifest.classes:
        ids = [r.id for r in manifest.records if r.label == cls]
        if not ids:
            continue
        if len(ids) < 2:
            raise ManifestError(f"class {cls!r} has {len(ids)} record(s); need at least 2 to split")
        order = rng.permutation(len(ids))
        n_train = min(max(int(round(ratio * len(ids))), 1), len(ids) - 1)
        for rank, k in enumerate(order):
            split[ids[k]] = "train" if rank < n_train else "test"
    return manifest.with_split(split)


def _parse_record(obj: dict, line_no: int) -> VideoMeta:
    try:
        return VideoMeta(
            id=str(obj["id"]),
            fps=float(obj["fps"]),
            n_frames=int(obj["n_frames"]),
            label=str(obj["label"]),
            source_path=str(obj["path"]),
        )
    except KeyError as exc:
        raise ManifestError(f"line {line_no}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"line {line_no} ({obj.get('id', '?')}): {exc}") from None


def ingest_manifest(path, check_frames: bool = True) -> DatasetManifest:
    """Load and validate a manifest, spot-checking each video's frames."""
    path = Path(path)
    records = []
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        records.append(_parse_record(obj, line_no))
    if not records:
        raise ManifestError("empty manifest")

    classes_file = path.parent / CLASSES_NAME
    if classes_file.exists():
        classes = list(json.loads(classes_file.read_text()))
    else:
        classes = list(dict.fromkeys(r.label for r in records))
    split_file = path.parent / SPLIT_NAME
    split = json.loads(split_file.read_text()) if split_file.exists() else {}
    manifest = DatasetManifest(records, classes, split, path.parent)

    if check_frames:
        problems = []
        for rec in records:
            vdir = manifest.video_dir(rec)
            n = count_frames(vdir) if vdir.is_dir() else 0
            if n != rec.n_frames:
                problems.append(f"{rec.id}: expected {rec.n_frames} frames, found {n} in {vdir}")
                continue
            try:
                read_ppm(frame_path(vdir, 0))
            except (OSError, PPMError) as exc:
                problems.append(f"{rec.id}: first frame unreadable ({exc})")
        if problems:
            raise ManifestError(problems)
    return manifest


def write_manifest(manifest: DatasetManifest, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps({"id": r.id, "path": r.source_path, "label": r.label, "fps": r.fps, "n_frames": r.n_frames})
        for r in manifest.records
    ]
    path.write_text("\n".join(lines) + "\n")
    (path.parent / CLASSES_NAME).write_text(json.dumps(manifest.classes) + "\n")
    split_file = path.parent / SPLIT_NAME
    if manifest.split:
        split_file.write_text(json.dumps(manifest.split, indent=1, sort_keys=True) + "\n")
    elif split_file.exists():
        split_file.unlink()
