"""Regression metrics for affinity prediction and their fold/seed aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    """Metric undefined for the given input."""


def _pair(predictions, labels, min_len=1):
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise MetricError(f"length mismatch: {p.shape[0]} predictions vs {y.shape[0]} labels")
    if p.shape[0] < min_len:
        raise MetricError(f"need at least {min_len} values, got {p.shape[0]}")
    return p, y


def rmse(predictions, labels) -> float:
    p, y = _pair(predictions, labels)
    return float(np.sqrt(np.mean((p - y) ** 2)))


def concordance_index(predictions, labels, block: int = 1024) -> float:
    """Fraction of label-ordered pairs whose predictions agree in order.

    Only pairs with y_i > y_j count; a prediction tie scores one half.
    """
    p, y = _pair(predictions, labels, min_len=2)
    concordant = 0
    ties = 0
    total = 0
    for s in range(0, y.shape[0], block):
        yi = y[s : s + block, None]
        pi = p[s : s + block, None]
        ordered = yi > y[None, :]
        total += int(ordered.sum())
        concordant += int((ordered & (pi > p[None, :])).sum())
        ties += int((ordered & (pi == p[None, :])).sum())
    if total == 0:
        raise MetricError("concordance index undefined: all labels are tied")
    return (concordant + 0.5 * ties) / total


def pearson_r(predictions, labels) -> float:
    p, y = _pair(predictions, labels, min_len=2)
    pc = p - p.mean()
    yc = y - y.mean()
    sxx = float(pc @ pc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise MetricError("Pearson correlation undefined for a constant vector")
    # one square root of the product keeps r exactly 1 for identical vectors
    denom = math.sqrt(sxx * syy)
    if not math.isfinite(denom) or denom == 0.0:
        denom = math.sqrt(sxx) * math.sqrt(syy)
    return float(np.clip((pc @ yc) / denom, -1.0, 1.0))


def pearson_r2(predictions, labels) -> float:
    """Squared Pearson correlation."""
    return pearson_r(predictions, labels) ** 2


METRICS = {"rmse": rmse, "ci": concordance_index, "r2": pearson_r2, "r": pearson_r}


@dataclass
class MetricReport:
    metric: str
    scheme: str | None
    cells: dict[tuple[int, int], float] = field(default_factory=dict)  # (seed, fold) -> value

    @property
    def values(self) -> np.ndarray:
        return np.array([self.cells[key] for key in sorted(self.cells)], dtype=np.float64)

    @property
    def mean(self) -> float:
        # fsum keeps the result independent of cell order
        return math.fsum(self.cells.values()) / len(self.cells)

    @property
    def std(self) -> float:
        n = len(self.cells)
        if n < 2:
            return 0.0
        m = self.mean
        return math.sqrt(math.fsum((v - m) ** 2 for v in self.cells.values()) / (n - 1))

    def per_fold(self) -> dict[int, float]:
        folds = sorted({f for _, f in self.cells})
        return {f: float(np.mean([v for (s, ff), v in self.cells.items() if ff == f])) for f in folds}

    def per_seed(self) -> dict[int, float]:
        seeds = sorted({s for s, _ in self.cells})
        return {s: float(np.mean([v for (ss, f), v in self.cells.items() if ss == s])) for s in seeds}

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "scheme": self.scheme,
            "n_cells": len(self.cells),
            "mean": self.mean,
            "std": self.std,
            "per_fold": {str(k): v for k, v in self.per_fold().items()},
            "per_seed": {str(k): v for k, v in self.per_seed().items()},
            "cells": [{"seed": s, "fold": f, "value": self.cells[(s, f)]} for s, f in sorted(self.cells)],
        }


def aggregate(cells, metric: str = "", scheme: str | None = None) -> MetricReport:
    """Mean and sample standard deviation over (seed, fold) cells.

    ``cells`` is a mapping (seed, fold) -> value or a flat sequence of values.
    """
    if not isinstance(cells, dict):
        cells = {(0, i): float(v) for i, v in enumerate(cells)}
    if not cells:
        raise MetricError("aggregate needs at least one cell")
    return MetricReport(metric, scheme, {(int(s), int(f)): float(v) for (s, f), v in cells.items()})
