"""Spread-of-points metrics over a stream of moment vectors.

``bbox_sum`` is the sum of side lengths of the axis-aligned bounding box.
``nuclear_norm`` is the nuclear norm of the population (1/N) covariance
matrix; covariance is symmetric PSD, so this equals its trace, the sum of
per-dimension variances, which Welford's update tracks without ever
forming the matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CsvParseError, DimensionError, EmptyAccumulatorError

METRICS = ("bbox_sum", "nuclear_norm")
CSV_HEADER = "gameplay_frames,value"


class SpreadAccumulator:
    """Running min/max and Welford mean/M2 per dimension."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DimensionError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self.count = 0
        self.lo = np.zeros(dim)
        self.hi = np.zeros(dim)
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def push(self, v) -> SpreadAccumulator:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionError(f"expected a {self.dim}-vector, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("moment vector has non-finite entries")
        self.count += 1
        if self.count == 1:
            self.lo[:] = v
            self.hi[:] = v
            self.mean[:] = v
            return self
        np.minimum(self.lo, v, out=self.lo)
        np.maximum(self.hi, v, out=self.hi)
        delta = v - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (v - self.mean)
        return self

    def _check(self):
        if self.count == 0:
            raise EmptyAccumulatorError("metric of an empty accumulator")

    def bbox_sum(self) -> float:
        self._check()
        return float(np.sum(self.hi - self.lo))

    def variances(self) -> np.ndarray:
        self._check()
        return self.m2 / self.count

    def nuclear_norm(self) -> float:
        self._check()
        return float(np.sum(self.m2) / self.count)

    def value(self, metric: str) -> float:
        if metric == "bbox_sum":
            return self.bbox_sum()
        if metric == "nuclear_norm":
            return self.nuclear_norm()
        raise ValueError(f"unknown metric {metric!r}")


def push(acc: SpreadAccumulator, v) -> SpreadAccumulator:
    return acc.push(v)


def bbox_sum(acc: SpreadAccumulator) -> float:
    return acc.bbox_sum()


def nuclear_norm(acc: SpreadAccumulator) -> float:
    return acc.nuclear_norm()


@dataclass
class MetricSeries:
    metric: str
    embedding: str
    run: str = ""
    points: list[tuple[int, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    @property
    def final(self) -> float:
        return self.points[-1][1]

    @property
    def frames(self) -> list[int]:
        return [f for f, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.points]

    def to_csv(self) -> str:
        rows = [CSV_HEADER] + [f"{f},{float(v)!r}" for f, v in self.points]
        return "\n".join(rows) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="\n")


def parse_series_csv(text: str, metric: str = "", embedding: str = "", run: str = "") -> MetricSeries:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise CsvParseError(f"expected header {CSV_HEADER!r}", 1)
    points = []
    for row, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise CsvParseError(f"expected 2 fields, got {len(parts)}", row)
        try:
            f, v = int(parts[0]), float(parts[1])
        except ValueError:
            raise CsvParseError(f"unparseable values {line!r}", row) from None
        if not math.isfinite(v):
            raise CsvParseError("non-finite value", row)
        if points and f <= points[-1][0]:
            raise CsvParseError("gameplay_frames must be strictly increasing", row)
        points.append((f, v))
    return MetricSeries(metric, embedding, run, points)


def read_series_csv(path, **kw) -> MetricSeries:
    return parse_series_csv(Path(path).read_text(encoding="utf-8"), **kw)


def series_from_vectors(frames, vectors: np.ndarray, metrics=METRICS, embedding: str = "",
                        run: str = "") -> dict[str, MetricSeries]:
    """Push vectors in order and record every metric after each push.

    Moments sharing a gameplay-frame stamp (several forest roots at frame 0)
    collapse to one point carrying the value after the last of them.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    out = {m: MetricSeries(m, embedding, run) for m in metrics}
    if len(vectors) == 0:
        return out
    acc = SpreadAccumulator(vectors.shape[1])
    for f, v in zip(frames, vectors):
        acc.push(v)
        for m in metrics:
            pts = out[m].points
            val = acc.value(m)
            if pts and pts[-1][0] == f:
                pts[-1] = (int(f), val)
            else:
                pts.append((int(f), val))
    return out


def series_from_archive(archive, embedding, metric: str | tuple = "nuclear_norm", run: str = ""):
    """Embed each moment's screenshot and track ``metric`` over gameplay frames.

    ``metric`` may be a single id (returns one MetricSeries) or a tuple of
    ids (returns a dict keyed by metric).
    """
    metrics = (metric,) if isinstance(metric, str) else tuple(metric)
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}")
    vectors = embedding.embed_batch(archive.screenshots()) if len(archive) else np.zeros((0, embedding.dim))
    out = series_from_vectors([m.gameplay_frames for m in archive.moments], vectors, metrics,
                              embedding.id, run)
    return out[metric] if isinstance(metric, str) else out
