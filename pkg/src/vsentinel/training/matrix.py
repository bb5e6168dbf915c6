"""Architecture grid: train and evaluate every backbone × cell × head combination."""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path

from ..nn.model import BACKBONES, CELLS, ModelConfig
from .loop import evaluate, train
from .metrics import MetricsReport, fmt_metric

log = logging.getLogger(__name__)

CSV_FIELDS = ("config", "accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn")
HEAD_VARIANTS = (True, False)


def config_key(backbone: str, cell: str, with_pred_head: bool) -> str:
    return f"{backbone}+{cell}" + ("+pred" if with_pred_head else "")


@dataclass
class MatrixRow:
    config: str
    cfg: ModelConfig
    report: MetricsReport | None = None
    error: str | None = None

    def as_csv_row(self) -> dict:
        if self.report is None:
            return {"config": self.config, **{k: "n/a" for k in CSV_FIELDS[1:]}}
        return {"config": self.config, **self.report.as_row()}


@dataclass
class MatrixResult:
    rows: list[MatrixRow]

    def __len__(self):
        return len(self.rows)

    @property
    def failures(self) -> list[MatrixRow]:
        return [r for r in self.rows if r.error is not None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow(row.as_csv_row())
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv())

    def to_table(self) -> str:
        """Aligned text table with one row per model, as in a results table."""
        header = ("Model", "Accuracy", "Precision", "Recall", "F1")
        body = []
        for row in self.rows:
            name = " + ".join(
                {"pred": "pred model"}.get(part, part.upper() if part in CELLS else part)
                for part in row.config.split("+")
            )
            if row.report is None:
                body.append((name, "failed", "", "", row.error or ""))
            else:
                r = row.report
                body.append((name, *(fmt_metric(v, 3) for v in (r.accuracy, r.precision, r.recall, r.f1))))
        widths = [max(len(str(line[i])) for line in [header, *body]) for i in range(len(header))]
        fmt = lambda line: "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w)
                                     for i, (c, w) in enumerate(zip(line, widths)))
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt(header), rule, *(fmt(line) for line in body)]) + "\n"


def run_matrix(base: ModelConfig, manifest, backbones=BACKBONES, cells=CELLS, heads=HEAD_VARIANTS,
               epochs: int = 1, seed: int = 0, mode: str = "single_sequence",
               threshold: float = 0.5, progress=None) -> MatrixResult:
    """Train and evaluate each configuration; a failed run is recorded and skipped.

    Rows come back in grid order (backbone, cell, head) whatever the run order.
    """
    rows = []
    for backbone, cell, head in itertools.product(backbones, cells, heads):
        key = config_key(backbone, cell, head)
        try:
            cfg = base.updated(backbone=backbone, cell=cell, with_pred_head=head, freeze_boundary=None)
            result = train(cfg, manifest, epochs=epochs, seed=seed, mode=mode)
            row = MatrixRow(key, cfg, evaluate(result, manifest, "test", threshold, mode))
        except Exception as exc:  # one bad configuration must not stop the grid
            log.warning("configuration %s failed: %s", key, exc)
            row = MatrixRow(key, base, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)
        if progress is not None:
            progress(row)
    return MatrixResult(rows)
