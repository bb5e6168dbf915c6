from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path


@dataclass
class CurveRow:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class LearningCurve:
    rows: list[CurveRow] = field(default_factory=list)

    def append(self, row: CurveRow):
        if self.rows and row.epoch != self.rows[-1].epoch + 1:
            raise ValueError(f"epoch {row.epoch} does not follow {self.rows[-1].epoch}")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f.name for f in fields(CurveRow)])
        for row in self.rows:
            w.writerow([row.epoch] + [repr(float(v)) for v in astuple(row)[1:]])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "LearningCurve":
        with open(path, newline="") as fh:
            rows = [CurveRow(int(r["epoch"]), float(r["train_loss"]), float(r["train_acc"]),
                             float(r["val_loss"]), float(r["val_acc"])) for r in csv.DictReader(fh)]
        return cls(rows)

    def to_svg(self, width: int = 640, height: int = 360) -> str:
        """Two-panel line plot (loss left, accuracy right) as standalone SVG."""
        pad, gap = 40, 30
        panel_w = (width - 2 * pad - gap) / 2
        panel_h = height - 2 * pad
        epochs = [r.epoch for r in self.rows] or [1]
        e_lo, e_hi = min(epochs), max(max(epochs), min(epochs) + 1)

        def polyline(values, x0, lo, hi, color):
            span = (hi - lo) or 1.0
            pts = " ".join(
                f"{x0 + (e - e_lo) / (e_hi - e_lo) * panel_w:.1f},{pad + (1 - (v - lo) / span) * panel_h:.1f}"
                for e, v in zip(epochs, values)
            )
            return f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>'

        losses = [r.train_loss for r in self.rows] + [r.val_loss for r in self.rows]
        l_hi = max(losses, default=1.0)
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]
        for k, (title, lo, hi, keys) in enumerate([
            ("loss", 0.0, l_hi, ("train_loss", "val_loss")),
            ("accuracy", 0.0, 1.0, ("train_acc", "val_acc")),
        ]):
            x0 = pad + k * (panel_w + gap)
            parts.append(f'<rect x="{x0:.1f}" y="{pad}" width="{panel_w:.1f}" height="{panel_h}" fill="none" stroke="#999"/>')
            parts.append(f'<text x="{x0:.1f}" y="{pad - 8}">{title} (epochs {e_lo}-{max(epochs)})</text>')
            parts.append(f'<text x="{x0 - 4:.1f}" y="{pad + 4}" text-anchor="end">{hi:.2f}</text>')
            parts.append(f'<text x="{x0 - 4:.1f}" y="{pad + panel_h}" text-anchor="end">{lo:.2f}</text>')
            if self.rows:
                for key, color in zip(keys, ("#1f77b4", "#d62728")):
                    parts.append(polyline([getattr(r, key) for r in self.rows], x0, lo, hi, color))
        parts.append(f'<text x="{pad}" y="{height - 10}" fill="#1f77b4">train</text>')
        parts.append(f'<text x="{pad + 50}" y="{height - 10}" fill="#d62728">validation</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write_svg(self, path):
        Path(path).write_text(self.to_svg())
