"""Brute-force occlusion oracle: dense angular ray sweep from the observer centroid.

Independent of the detector's five-point test. For each sample time, rays are cast on a
global 1 mrad angular grid restricted to the target's angular span; the target counts as
occluded iff no ray reaches the target before reaching some third actor. A ray sweep can
only err towards "occluded" (a gap narrower than the grid), so occluded verdicts are
confirmed by a second sweep at ``FINE`` spacing.
"""

from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from scencomplex.scenario import Scenario, sample_times

STEP = 1e-3
FINE = 1e-5


def _corners(cx, cy, h, length, width):
    c, s = math.cos(h), math.sin(h)
    hl, hw = length / 2, width / 2
    return [(cx + a * hl * c - b * hw * s, cy + a * hl * s + b * hw * c) for a, b in ((1, 1), (1, -1), (-1, -1), (-1, 1))]


def _entry(ox, oy, dirs, rect):
    """Distance along each unit ray to the first point inside ``rect`` (inf when missed)."""
    cx, cy, h, length, width = rect
    c, s = math.cos(h), math.sin(h)
    lx = (ox - cx) * c + (oy - cy) * s
    ly = -(ox - cx) * s + (oy - cy) * c
    dx = dirs[:, 0] * c + dirs[:, 1] * s
    dy = -dirs[:, 0] * s + dirs[:, 1] * c
    lo = np.full(len(dirs), -np.inf)
    hi = np.full(len(dirs), np.inf)
    for p, d, half in ((lx, dx, length / 2), (ly, dy, width / 2)):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (-half - p) / d
            b = (half - p) / d
        parallel = np.abs(d) < 1e-15
        inside = abs(p) <= half
        a = np.where(parallel, -np.inf if inside else np.inf, a)
        b = np.where(parallel, np.inf if inside else -np.inf, b)
        lo = np.maximum(lo, np.minimum(a, b))
        hi = np.minimum(hi, np.maximum(a, b))
    start = np.maximum(lo, 0.0)
    return np.where(hi >= start, start, np.inf)


def occluded(observer, target, occluders) -> bool:
    """Rects are (cx, cy, heading, length, width)."""
    return _sweep(observer, target, occluders, STEP) and _sweep(observer, target, occluders, FINE)


def _sweep(observer, target, occluders, step) -> bool:
    ox, oy = observer[0], observer[1]
    pts = _corners(*target) + [(target[0], target[1])]
    ref = math.atan2(target[1] - oy, target[0] - ox)
    rel = [math.atan2(math.sin(math.atan2(py - oy, px - ox) - ref), math.cos(math.atan2(py - oy, px - ox) - ref)) for px, py in pts]
    a0, a1 = ref + min(rel), ref + max(rel)
    k0, k1 = math.ceil(a0 / step), math.floor(a1 / step)
    angles = np.arange(k0, k1 + 1) * step
    if angles.size == 0:
        angles = np.array([ref])
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    d_target = _entry(ox, oy, dirs, target)
    reach = np.isfinite(d_target)
    if not reach.any():
        return True
    d_block = np.full(len(dirs), np.inf)
    for occ in occluders:
        d_block = np.minimum(d_block, _entry(ox, oy, dirs, occ))
    visible = reach & (d_target < d_block)
    return not bool(visible.any())


def _rects(s: Scenario, actor: str, times) -> List[Tuple[float, float, float, float, float]]:
    a = s.actor(actor)
    kin = s.kinematics(actor)
    xs, ys = kin.xy(times)
    hs = kin.heading(times)
    return [(float(x), float(y), float(h), a.length, a.width) for x, y, h in zip(xs, ys, hs)]


def _runs(times, flags) -> List[Tuple[float, float]]:
    runs, start = [], None
    for k, f in enumerate(list(flags) + [False]):
        if f and start is None:
            start = k
        elif not f and start is not None:
            runs.append((float(times[start]), float(times[k - 1])))
            start = None
    return runs


def occlusion_runs(s: Scenario, observer: str, dt: float = 0.1) -> Dict[str, List[Tuple[float, float]]]:
    """Per target: every maximal run of occluded samples (no duration filter)."""
    times = sample_times(s, dt)
    rects = {a.id: _rects(s, a.id, times) for a in s.actors}
    out: Dict[str, List[Tuple[float, float]]] = {}
    for target in sorted(a.id for a in s.actors if a.id != observer):
        others = [a.id for a in s.actors if a.id not in (observer, target)]
        flags = [
            occluded(rects[observer][k], rects[target][k], [rects[o][k] for o in others])
            for k in range(len(times))
        ]
        out[target] = _runs(times, flags)
    return out


def compare(
    detected: Dict[str, List[Tuple[float, float]]],
    oracle: Dict[str, List[Tuple[float, float]]],
    tol: float,
    min_duration: float,
) -> List[str]:
    """Mismatches between raw occlusion runs of detector and oracle.

    Every run lasting at least ``min_duration`` on either side (that is, every run that
    becomes an event) must have a counterpart on the other side whose endpoints differ
    by at most ``tol``.
    """
    problems = []
    for target in sorted(set(detected) | set(oracle)):
        for mine, other, label in ((detected, oracle, "detector"), (oracle, detected, "oracle")):
            for t0, t1 in mine.get(target, []):
                if t1 - t0 < min_duration - 1e-9:
                    continue
                if not any(abs(t0 - u0) <= tol + 1e-9 and abs(t1 - u1) <= tol + 1e-9 for u0, u1 in other.get(target, [])):
                    problems.append(f"{target}: {label} run ({t0:.2f}, {t1:.2f}) unmatched; other side {other.get(target, [])}")
    return problems
