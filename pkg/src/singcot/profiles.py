"""Piecewise profiles: prescribed expressions on zones, quintic smoothstep blends in between."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable

Fn = tuple[Callable[[float], float], Callable[[float], float], Callable[[float], float]]


def smoothstep5(s: float) -> tuple[float, float, float]:
    """6s^5 - 15s^4 + 10s^3 and its first two derivatives; C^2 at both ends."""
    return (
        s**3 * (10 - 15 * s + 6 * s * s),
        30 * s * s * (1 - s) ** 2,
        60 * s * (1 - s) * (1 - 2 * s),
    )


def linear(a: float, b: float) -> Fn:
    """x -> a x + b."""
    return (lambda x: a * x + b, lambda x: a, lambda x: 0.0)


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    left: Fn
    right: Fn | None = None  # None: prescribed zone; otherwise blend left -> right

    def eval(self, x: float, order: int) -> float:
        if self.right is None:
            return self.left[order](x)
        w = self.hi - self.lo
        s, ds, d2s = smoothstep5((x - self.lo) / w)
        ds, d2s = ds / w, d2s / w**2
        fl = [f(x) for f in self.left]
        fr = [f(x) for f in self.right]
        if order == 0:
            return (1 - s) * fl[0] + s * fr[0]
        if order == 1:
            return (1 - s) * fl[1] + s * fr[1] + ds * (fr[0] - fl[0])
        return (1 - s) * fl[2] + s * fr[2] + 2 * ds * (fr[1] - fl[1]) + d2s * (fr[0] - fl[0])


class PiecewiseProfile:
    """Profile on [segments[0].lo, segments[-1].hi]; segments must tile the interval."""

    def __init__(self, segments: list[Segment]):
        for a, b in zip(segments, segments[1:]):
            if a.hi != b.lo:
                raise ValueError(f"segments do not tile: {a.hi} != {b.lo}")
        self.segments = segments
        self._starts = [s.lo for s in segments]

    @property
    def lo(self) -> float:
        return self.segments[0].lo

    @property
    def hi(self) -> float:
        return self.segments[-1].hi

    def _segment(self, x: float) -> Segment:
        if not self.lo <= x <= self.hi:
            raise ValueError(f"{x} outside profile range [{self.lo}, {self.hi}]")
        k = bisect.bisect_right(self._starts, x) - 1
        return self.segments[max(k, 0)]

    def __call__(self, x: float) -> float:
        return self._segment(x).eval(x, 0)

    def d1(self, x: float) -> float:
        return self._segment(x).eval(x, 1)

    def d2(self, x: float) -> float:
        return self._segment(x).eval(x, 2)
