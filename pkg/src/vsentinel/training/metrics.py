from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def f1_score(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean of precision and recall; ``None`` when undefined."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def fmt_metric(value: float | None, digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


@dataclass
class Prediction:
    video_id: str
    probability: float
    predicted: int
    actual: int


@dataclass
class MetricsReport:
    """Binary confusion counts (positive = anomaly) and the derived scores.

    Scores with a zero denominator are ``None`` and print as ``n/a``.
    """

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    predictions: list[Prediction] = field(default_factory=list)

    @classmethod
    def from_predictions(cls, probabilities, actual, threshold: float = 0.5, ids=None) -> "MetricsReport":
        p = np.asarray(probabilities, dtype=np.float64)
        y = np.asarray(actual).astype(int)
        if p.shape != y.shape:
            raise ValueError(f"{p.shape[0]} probabilities vs {y.shape[0]} labels")
        if np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 (normal) or 1 (anomaly)")
        pred = (p >= threshold).astype(int)
        ids = list(ids) if ids is not None else [str(i) for i in range(len(p))]
        return cls(
            tp=int(np.sum((pred == 1) & (y == 1))),
            fp=int(np.sum((pred == 1) & (y == 0))),
            tn=int(np.sum((pred == 0) & (y == 0))),
            fn=int(np.sum((pred == 0) & (y == 1))),
            predictions=[Prediction(i, float(pi), int(di), int(yi)) for i, pi, di, yi in zip(ids, p, pred, y)],
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return _ratio(self.tp + self.tn, self.total)

    @property
    def precision(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1(self) -> float | None:
        if self.precision is None or self.recall is None:
            return None
        # 2PR/(P+R) written on counts, which stays defined when P = R = 0
        return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

    def as_row(self) -> dict:
        return {
            "accuracy": fmt_metric(self.accuracy),
            "precision": fmt_metric(self.precision),
            "recall": fmt_metric(self.recall),
            "f1": fmt_metric(self.f1),
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }

    def summary(self) -> str:
        r = self.as_row()
        return (f"accuracy={r['accuracy']} precision={r['precision']} recall={r['recall']} f1={r['f1']} "
                f"(tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn})")
