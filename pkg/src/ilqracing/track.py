"""Race track reference line: constant-curvature segments with per-segment corridor widths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class TrackDomainError(ValueError):
    """Arc-length query outside [0, total_length]."""


@dataclass(frozen=True)
class TrackSegment:
    """One piece of the reference line.

    length: arc length in meters, > 0.
    curvature: signed curvature in 1/m, constant over the segment (positive bends left).
    width_left / width_right: lateral corridor half-widths in meters, > 0.
    """

    length: float
    curvature: float
    width_left: float
    width_right: float

    def __post_init__(self) -> None:
        if not self.length > 0.0:
            raise ValueError(f"segment length must be > 0, got {self.length}")
        if not (self.width_left > 0.0 and self.width_right > 0.0):
            raise ValueError(
                f"corridor widths must be > 0, got ({self.width_left}, {self.width_right})"
            )
        # Keeps 1 - n*curvature > 0 for every lateral offset n inside the corridor.
        if abs(self.curvature) * max(self.width_left, self.width_right) >= 1.0:
            raise ValueError(
                "corridor reaches the curvature singularity: "
                f"|{self.curvature}| * {max(self.width_left, self.width_right)} >= 1"
            )


class Track:
    """Immutable sequence of segments, queried by arc length s.

    Lookups resolve the segment containing s; at a joint between two
    segments the later one wins, and s == total_length maps to the last
    segment.
    """

    def __init__(self, segments: Sequence[TrackSegment]):
        if len(segments) == 0:
            raise ValueError("a track needs at least one segment")
        self._segments = tuple(segments)
        self._ends = np.cumsum([seg.length for seg in self._segments])

    @classmethod
    def straight(
        cls, length: float, width_left: float = 6.0, width_right: float = 6.0
    ) -> "Track":
        return cls([TrackSegment(length, 0.0, width_left, width_right)])

    @property
    def segments(self) -> tuple[TrackSegment, ...]:
        return self._segments

    @property
    def total_length(self) -> float:
        return float(self._ends[-1])

    def _segment_at(self, s: float) -> TrackSegment:
        if not (0.0 <= s <= self.total_length):
            raise TrackDomainError(
                f"arc length {s} outside track domain [0, {self.total_length}]"
            )
        idx = int(np.searchsorted(self._ends, s, side="right"))
        return self._segments[min(idx, len(self._segments) - 1)]

    def curvature_at(self, s: float) -> float:
        return self._segment_at(s).curvature

    def width_at(self, s: float) -> tuple[float, float]:
        seg = self._segment_at(s)
        return (seg.width_left, seg.width_right)

    def __repr__(self) -> str:
        return f"Track({len(self._segments)} segments, length={self.total_length:.1f} m)"
