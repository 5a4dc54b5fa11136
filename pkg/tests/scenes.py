"""Seeded random scene generator shared by the oracle and property tests."""

from __future__ import annotations

import math
import random

import numpy as np

from scencomplex.scenario import parse_scenario, sample_times

_KINDS = (
    ("vehicle", "car", (4.0, 5.0), (1.6, 2.0)),
    ("vehicle", "truck", (8.0, 12.0), (2.3, 2.6)),
    ("pedestrian", "adult", (0.4, 0.7), (0.4, 0.7)),
    ("object", "box", (0.5, 3.0), (0.5, 2.0)),
)


def _scene_text(rng: random.Random, duration: float) -> str:
    lines = ['scenario "random" "random scene"', "road lanes=3 lane_width=3.5"]
    lines.append("actor id=ego class=vehicle subtype=car dims=4.5x1.8")
    ex, ey = rng.uniform(-5, 5), rng.uniform(0.5, 10)
    evx, evy = rng.uniform(0, 12), rng.uniform(-1, 1)
    tracks = [f"track actor=ego t=0 x={ex!r} y={ey!r}",
              f"track actor=ego t={duration!r} x={ex + evx * duration!r} y={ey + evy * duration!r}"]
    # the far actor "b" is placed freely; "a" is usually dropped near the sight line to it
    bx, by = ex + rng.uniform(15, 50), rng.uniform(-8, 18)
    for name in ("b", "a"):
        cls, sub, (l0, l1), (w0, w1) = rng.choice(_KINDS)
        length, width = rng.uniform(l0, l1), rng.uniform(w0, w1)
        lines.append(f"actor id={name} class={cls} subtype={sub} dims={length!r}x{width!r}")
        if name == "b" or rng.random() < 0.3:
            x0, y0 = (bx, by) if name == "b" else (ex + rng.uniform(5, 50), rng.uniform(-8, 18))
        else:
            f = rng.uniform(0.3, 0.7)
            x0, y0 = ex + f * (bx - ex), ey + f * (by - ey) + rng.uniform(-2, 2)
        vx, vy = rng.uniform(-12, 12), rng.uniform(-3, 3)
        if rng.random() < 0.3:
            vx = vy = 0.0
            tracks.append(f"track actor={name} t=0 x={x0!r} y={y0!r} heading={rng.uniform(-math.pi, math.pi)!r}")
        else:
            tracks.append(f"track actor={name} t=0 x={x0!r} y={y0!r}")
            tracks.append(f"track actor={name} t={duration!r} x={x0 + vx * duration!r} y={y0 + vy * duration!r}")
    return "\n".join(lines + tracks) + "\n"


def _overlaps(s, dt: float) -> bool:
    """Conservative test: bounding circles of two actors ever come within 5 cm."""
    times = sample_times(s, dt)
    ids = [a.id for a in s.actors]
    pos = {i: s.kinematics(i).xy(times) for i in ids}
    for p in range(len(ids)):
        for q in range(p + 1, len(ids)):
            a, b = s.actor(ids[p]), s.actor(ids[q])
            reach = (math.hypot(a.length, a.width) + math.hypot(b.length, b.width)) / 2
            gap = np.hypot(pos[ids[p]][0] - pos[ids[q]][0], pos[ids[p]][1] - pos[ids[q]][1])
            if gap.min() < reach + 0.05:
                return True
    return False


def random_scene(seed: int, duration: float = 5.0, dt: float = 0.1):
    """A parsed 3-actor scene (ego + two others) whose footprints never touch."""
    rng = random.Random(seed)
    while True:
        s = parse_scenario(_scene_text(rng, duration))
        if not _overlaps(s, dt):
            return s
