"""Oriented rectangles and segment intersection tests used by the occlusion detector."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

_EPS = 1e-12


@dataclass(frozen=True)
class OrientedRect:
    """Rectangle of size length x width centred at (cx, cy), long axis along ``heading``."""

    cx: float
    cy: float
    heading: float
    length: float
    width: float

    @property
    def axes(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        c, s = math.cos(self.heading), math.sin(self.heading)
        return (c, s), (-s, c)

    def corners(self) -> np.ndarray:
        (ux, uy), (vx, vy) = self.axes
        hl, hw = self.length / 2.0, self.width / 2.0
        signs = ((1, 1), (1, -1), (-1, -1), (-1, 1))
        return np.array([
            (self.cx + a * hl * ux + b * hw * vx, self.cy + a * hl * uy + b * hw * vy)
            for a, b in signs
        ])

    def test_points(self) -> np.ndarray:
        """Four corners followed by the centroid."""
        return np.vstack([self.corners(), [[self.cx, self.cy]]])

    def to_local(self, x: float, y: float) -> Tuple[float, float]:
        (ux, uy), (vx, vy) = self.axes
        dx, dy = x - self.cx, y - self.cy
        return dx * ux + dy * uy, dx * vx + dy * vy

    def contains(self, x: float, y: float) -> bool:
        lx, ly = self.to_local(x, y)
        return abs(lx) <= self.length / 2.0 and abs(ly) <= self.width / 2.0

    def translated(self, dx: float, dy: float) -> "OrientedRect":
        return OrientedRect(self.cx + dx, self.cy + dy, self.heading, self.length, self.width)

    def scaled(self, factor: float) -> "OrientedRect":
        return OrientedRect(self.cx, self.cy, self.heading, self.length * factor, self.width * factor)


def segment_hits_rect(p: Tuple[float, float], q: Tuple[float, float], rect: OrientedRect) -> bool:
    """True if the closed segment p-q shares at least one point with the closed rectangle.

    Liang-Barsky clipping in the rectangle's local frame.
    """
    px, py = rect.to_local(*p)
    qx, qy = rect.to_local(*q)
    dx, dy = qx - px, qy - py
    t0, t1 = 0.0, 1.0
    for start, delta, half in ((px, dx, rect.length / 2.0), (py, dy, rect.width / 2.0)):
        if abs(delta) < _EPS:
            if abs(start) > half:
                return False
            continue
        a = (-half - start) / delta
        b = (half - start) / delta
        if a > b:
            a, b = b, a
        t0 = max(t0, a)
        t1 = min(t1, b)
        if t0 > t1:
            return False
    return True
