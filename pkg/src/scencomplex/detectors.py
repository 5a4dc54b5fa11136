"""Hazard detectors over scenario ground truth: occlusion, kinematic anomalies, rule violations.

All detectors sample the scenario on a uniform grid of step ``dt_sample`` starting at the
first instant of the time domain. Actors are clamped to their first/last sample outside
their own track span, matching ``pose_at``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import OrientedRect, segment_hits_rect
from .scenario import Scenario, sample_times
from .taxonomy import TaxonomyCatalog

EVENT_KINDS = (
    "occlusion",
    "sudden_braking",
    "abrupt_lane_change",
    "weaving",
    "lane_splitting",
    "red_light_crossing",
    "jaywalk_entry",
    "stopped_in_restricted",
)

LARGE_VEHICLES = frozenset({"truck", "bus", "lorry"})
SPLITTING_SUBTYPES = frozenset({"motorcycle", "e_bike"})

_TOL = 1e-9


@dataclass(frozen=True)
class DetectorConfig:
    dt_sample: float = 0.1
    brake_decel_threshold: float = 3.5
    lane_change_window: float = 2.0
    weave_reversals: int = 2
    occlusion_min_duration: float = 0.3
    red_grace: float = 0.0
    # thresholds the detectors need beyond the headline ones
    lateral_speed_min: float = 0.2
    stop_speed: float = 0.2
    stop_dwell: float = 3.0
    split_band: float = 0.5
    split_dwell: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{f.name} must be a finite number")
            if f.name == "red_grace":
                if value < 0:
                    raise ValueError("red_grace must be >= 0")
            elif value <= 0:
                raise ValueError(f"{f.name} must be > 0")
        if int(self.weave_reversals) != self.weave_reversals:
            raise ValueError("weave_reversals must be an integer")

    @classmethod
    def from_mapping(cls, data: Optional[Mapping[str, object]]) -> "DetectorConfig":
        if not data:
            return cls()
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown detector setting(s): {', '.join(unknown)}")
        return cls(**dict(data))  # type: ignore[arg-type]


@dataclass(frozen=True)
class DetectedEvent:
    kind: str
    actors: Tuple[str, ...]
    t0: float
    t1: float
    evidence: str

    @property
    def subject(self) -> str:
        return self.actors[0]

    @property
    def interval(self) -> Tuple[float, float]:
        return (self.t0, self.t1)

    def sort_key(self) -> Tuple:
        return (self.t0, self.kind, self.actors, self.t1)


@dataclass(frozen=True)
class ElementSuggestion:
    path: str
    variant: Optional[str]
    actors: Tuple[str, ...]
    source_events: Tuple[DetectedEvent, ...]

    @property
    def source_event(self) -> DetectedEvent:
        return self.source_events[0]

    @property
    def key(self) -> Tuple[str, str, Tuple[str, ...]]:
        return (self.path, self.variant or "", tuple(sorted(self.actors)))


def _t(value: float) -> float:
    # keep grid-derived times free of accumulated float noise
    return round(float(value), 9)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs of True as inclusive (start, end) index pairs."""
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def _sorted(events: Iterable[DetectedEvent]) -> List[DetectedEvent]:
    return sorted(events, key=DetectedEvent.sort_key)


# Occlusion -------------------------------------------------------------------------------

def actor_rects(s: Scenario, times: np.ndarray) -> Dict[str, List[OrientedRect]]:
    """Oriented footprint of every actor at each grid time."""
    rects: Dict[str, List[OrientedRect]] = {}
    for a in s.actors:
        kin = s.kinematics(a.id)
        xs, ys = kin.xy(times)
        hs = kin.heading(times)
        rects[a.id] = [OrientedRect(float(x), float(y), float(h), a.length, a.width) for x, y, h in zip(xs, ys, hs)]
    return rects


def occlusion_mask(
    s: Scenario, observer: str, target: str, times: np.ndarray, rects: Optional[Dict[str, List[OrientedRect]]] = None
) -> Tuple[np.ndarray, np.ndarray, List[Tuple[str, ...]]]:
    """Per-sample full and partial occlusion of ``target`` seen from ``observer``.

    Returns (full, partial, blockers): ``full[k]`` when every test point is hidden,
    ``partial[k]`` when some but not all are, and the ids of all actors blocking the
    centroid sight line.
    """
    rects = rects if rects is not None else actor_rects(s, times)
    others = sorted(a.id for a in s.actors if a.id not in (observer, target))
    n = len(times)
    full = np.zeros(n, dtype=bool)
    partial = np.zeros(n, dtype=bool)
    blockers: List[Tuple[str, ...]] = [()] * n
    for k in range(n):
        obs = rects[observer][k]
        eye = (obs.cx, obs.cy)
        hidden = 0
        points = rects[target][k].test_points()
        for j, (px, py) in enumerate(points):
            if j == 4:
                blockers[k] = tuple(o for o in others if segment_hits_rect(eye, (px, py), rects[o][k]))
                hidden += bool(blockers[k])
            elif any(segment_hits_rect(eye, (px, py), rects[o][k]) for o in others):
                hidden += 1
        full[k] = hidden == len(points)
        partial[k] = 0 < hidden < len(points)
    return full, partial, blockers


def detect_occlusions(s: Scenario, cfg: DetectorConfig = DetectorConfig(), observer: str = "ego") -> List[DetectedEvent]:
    if not s.has_actor(observer):
        raise KeyError(f"unknown observer {observer!r}")
    times = sample_times(s, cfg.dt_sample)
    rects = actor_rects(s, times)
    events: List[DetectedEvent] = []
    for target in sorted(a.id for a in s.actors if a.id != observer):
        full, partial, blockers = occlusion_mask(s, observer, target, times, rects)
        for i, j in _runs(full):
            if times[j] - times[i] < cfg.occlusion_min_duration - _TOL:
                continue
            counts = Counter(b for k in range(i, j + 1) for b in blockers[k])
            occluder = min(counts, key=lambda oid: (-counts[oid], oid))
            lo = i
            while lo > 0 and partial[lo - 1]:
                lo -= 1
            hi = j
            while hi < len(times) - 1 and partial[hi + 1]:
                hi += 1
            obs, tgt = rects[observer], rects[target]
            rng = min(math.hypot(tgt[k].cx - obs[k].cx, tgt[k].cy - obs[k].cy) for k in range(i, j + 1))
            evidence = (
                f"{target} fully hidden from {observer} by {occluder} for {times[j] - times[i]:.2f} s "
                f"({j - i + 1} samples, min range {rng:.1f} m); partially visible "
                f"{i - lo} samples before and {hi - j} after"
            )
            events.append(DetectedEvent("occlusion", (observer, occluder, target), _t(times[i]), _t(times[j]), evidence))
    return sorted(events, key=lambda e: (e.t0, e.actors[2], e.t1))


# Kinematics ------------------------------------------------------------------------------

def _lane_index(y: np.ndarray, s: Scenario) -> np.ndarray:
    idx = np.floor(y / s.road.lane_width).astype(int)
    return np.clip(idx, 0, s.road.lane_count - 1)


def _moving_vehicles(s: Scenario, skip: Sequence[str] = ("ego",)) -> List[str]:
    return [a.id for a in s.actors if a.actor_class == "vehicle" and a.id not in skip and len(s.tracks[a.id]) >= 2]


def _braking(actor: str, times: np.ndarray, x: np.ndarray, cfg: DetectorConfig) -> List[DetectedEvent]:
    dt = cfg.dt_sample
    # road-frame longitudinal speed, so lateral motion during a cut-out does not mask braking
    v = np.abs(np.diff(x)) / dt
    if v.size < 2:
        return []
    acc = np.diff(v) / dt
    out = []
    for i, j in _runs(acc <= -cfg.brake_decel_threshold + _TOL):
        if (j - i + 1) * dt < 2 * dt - _TOL:
            continue
        t0, t1 = times[i] + dt / 2, times[j + 1] + dt / 2
        peak = float(-acc[i : j + 1].min())
        dv = float(v[i] - v[j + 1])
        out.append(DetectedEvent(
            "sudden_braking", (actor,), _t(t0), _t(t1),
            f"peak deceleration {peak:.1f} m/s^2, speed {v[i]:.1f} -> {v[j + 1]:.1f} m/s (drop {dv:.1f}) over {t1 - t0:.2f} s",
        ))
    return out


def _lateral_episodes(vy: np.ndarray, cfg: DetectorConfig) -> List[Tuple[int, int, int]]:
    """(first interval, last interval, sign) of runs with |vy| above threshold and one sign."""
    sign = np.where(vy > cfg.lateral_speed_min, 1, np.where(vy < -cfg.lateral_speed_min, -1, 0))
    episodes = []
    k = 0
    while k < len(sign):
        if sign[k] == 0:
            k += 1
            continue
        start = k
        while k + 1 < len(sign) and sign[k + 1] == sign[start]:
            k += 1
        episodes.append((start, k, int(sign[start])))
        k += 1
    return episodes


def _lane_changes(actor: str, s: Scenario, times: np.ndarray, y: np.ndarray, cfg: DetectorConfig) -> List[DetectedEvent]:
    dt = cfg.dt_sample
    vy = np.diff(y) / dt
    lanes = _lane_index(y, s)
    out = []
    for i, j, _sign in _lateral_episodes(vy, cfg):
        a, b = i, j + 1  # grid samples bounding the episode
        crossed = int(abs(lanes[b] - lanes[a]))
        if crossed == 0:
            continue
        duration = times[b] - times[a]
        shift = abs(float(y[b] - y[a]))
        per_lane = duration * s.road.lane_width / shift
        if per_lane > cfg.lane_change_window + _TOL:
            continue
        out.append(DetectedEvent(
            "abrupt_lane_change", (actor,), _t(times[a]), _t(times[b]),
            f"lane {lanes[a]} -> {lanes[b]}: lateral shift {shift:.2f} m in {duration:.2f} s "
            f"({per_lane:.2f} s per lane width, peak lateral speed {np.abs(vy[i : j + 1]).max():.2f} m/s)",
        ))
    return out


def _weaving(actor: str, s: Scenario, times: np.ndarray, y: np.ndarray, cfg: DetectorConfig) -> List[DetectedEvent]:
    dt = cfg.dt_sample
    vy = np.diff(y) / dt
    lanes = _lane_index(y, s)
    episodes = _lateral_episodes(vy, cfg)
    # a reversal happens at the start of an episode whose sign differs from the previous one
    reversals = [(m, times[episodes[m][0]]) for m in range(1, len(episodes)) if episodes[m][2] != episodes[m - 1][2]]
    need = int(cfg.weave_reversals)
    spans: List[Tuple[int, int]] = []
    for q in range(len(reversals) - need + 1):
        m0, r0 = reversals[q]
        m1, r1 = reversals[q + need - 1]
        if r1 - r0 > cfg.lane_change_window + _TOL:
            continue
        a, b = episodes[m0 - 1][0], episodes[m1][1] + 1
        if np.any(lanes[a : b + 1] != lanes[a]):
            continue
        if spans and a <= spans[-1][1]:
            spans[-1] = (spans[-1][0], max(b, spans[-1][1]))
        else:
            spans.append((a, b))
    out = []
    for a, b in spans:
        count = sum(1 for _, r in reversals if times[a] <= r <= times[b])
        amp = float(y[a : b + 1].max() - y[a : b + 1].min())
        out.append(DetectedEvent(
            "weaving", (actor,), _t(times[a]), _t(times[b]),
            f"{count} lateral direction reversals in {times[b] - times[a]:.2f} s within lane {lanes[a]} (sway {amp:.2f} m)",
        ))
    return out


def _lane_splitting(actor: str, s: Scenario, times: np.ndarray, y: np.ndarray, speed: np.ndarray, cfg: DetectorConfig) -> List[DetectedEvent]:
    w = s.road.lane_width
    bounds = np.array([k * w for k in range(1, s.road.lane_count)])
    if bounds.size == 0:
        return []
    dist = np.abs(y[:, None] - bounds[None, :]).min(axis=1)
    mask = (dist <= cfg.split_band + _TOL) & (speed > cfg.lateral_speed_min)
    out = []
    for i, j in _runs(mask):
        if times[j] - times[i] < cfg.split_dwell - _TOL:
            continue
        out.append(DetectedEvent(
            "lane_splitting", (actor,), _t(times[i]), _t(times[j]),
            f"within {dist[i : j + 1].max():.2f} m of a lane boundary for {times[j] - times[i]:.2f} s "
            f"at {speed[i : j + 1].mean():.1f} m/s",
        ))
    return out


def detect_kinematic_events(s: Scenario, cfg: DetectorConfig = DetectorConfig(), skip: Sequence[str] = ("ego",)) -> List[DetectedEvent]:
    """Sudden braking, abrupt lane change, weaving and lane splitting for every non-ego vehicle."""
    times = sample_times(s, cfg.dt_sample)
    events: List[DetectedEvent] = []
    for actor in _moving_vehicles(s, skip):
        kin = s.kinematics(actor)
        x, y = kin.xy(times)
        events += _braking(actor, times, x, cfg)
        events += _lane_changes(actor, s, times, y, cfg)
        events += _weaving(actor, s, times, y, cfg)
        if s.actor(actor).subtype in SPLITTING_SUBTYPES:
            events += _lane_splitting(actor, s, times, y, kin.speed(times), cfg)
    return _sorted(events)


# Rules -----------------------------------------------------------------------------------

def _crossing_time(t_a: float, t_b: float, v_a: float, v_b: float, level: float) -> float:
    if v_b == v_a:
        return t_a
    return t_a + (level - v_a) / (v_b - v_a) * (t_b - t_a)


def _red_light(s: Scenario, times: np.ndarray, cfg: DetectorConfig, skip: Sequence[str]) -> List[DetectedEvent]:
    out = []
    for actor in _moving_vehicles(s, skip):
        decl = s.actor(actor)
        line = s.stopline(decl.approach)
        if line is None:
            continue
        x, _ = s.kinematics(actor).xy(times)
        side = np.sign(x - line.x)
        for k in range(len(times) - 1):
            crossing = (side[k] < 0 < side[k + 1]) or (side[k] > 0 > side[k + 1]) or (side[k] != 0 and side[k + 1] == 0)
            if not crossing:
                continue
            tc = _crossing_time(times[k], times[k + 1], x[k], x[k + 1], line.x)
            phase = s.phase_at(decl.approach, tc)
            if phase != "red":
                continue
            t_red = max(ev.t for ev in s.signals if ev.approach == decl.approach and ev.t <= tc)
            if tc - t_red < cfg.red_grace - _TOL:
                continue
            out.append(DetectedEvent(
                "red_light_crossing", (actor,), _t(tc), _t(tc),
                f"crossed stop line of approach {decl.approach} at x={line.x:g} m "
                f"{tc - t_red:.2f} s after the signal turned red",
            ))
    return out


def _vehicle_active(s: Scenario, t: float) -> bool:
    for a in s.actors:
        if a.actor_class != "vehicle":
            continue
        samples = s.tracks[a.id]
        if len(samples) == 1 or samples[0].t - _TOL <= t <= samples[-1].t + _TOL:
            return True
    return False


def _jaywalk(s: Scenario, times: np.ndarray, cfg: DetectorConfig) -> List[DetectedEvent]:
    width = s.road.width
    zone = s.road.crossing_zone if s.road.crossing in ("signalized", "zebra") else None
    out = []
    for a in s.actors:
        if a.actor_class != "pedestrian" or len(s.tracks[a.id]) < 2:
            continue
        x, y = s.kinematics(a.id).xy(times)
        inside = (y >= 0) & (y <= width)
        for k in range(len(times) - 1):
            if inside[k] or not inside[k + 1]:
                continue
            edge = 0.0 if y[k] < 0 else width
            te = _crossing_time(times[k], times[k + 1], y[k], y[k + 1], edge)
            xe = float(np.interp(te, times, x))
            if zone is not None and zone[0] <= xe <= zone[1]:
                continue
            if not _vehicle_active(s, te):
                continue
            end = k + 1
            while end + 1 < len(times) and inside[end + 1]:
                end += 1
            where = "outside the marked crossing" if zone is not None else f"where crossing={s.road.crossing}"
            out.append(DetectedEvent(
                "jaywalk_entry", (a.id,), _t(te), _t(times[end]),
                f"entered the carriageway at x={xe:.1f} m {where}; on the road for {times[end] - te:.2f} s",
            ))
    return out


def _restricted_zones(s: Scenario) -> List[Tuple[str, Tuple[float, float]]]:
    zones = []
    if s.road.junction != "none" and s.road.junction_box:
        zones.append(("junction box", s.road.junction_box))
    if s.road.crossing in ("signalized", "zebra") and s.road.crossing_zone:
        zones.append(("crossing zone", s.road.crossing_zone))
    return zones


def _stopped(s: Scenario, times: np.ndarray, cfg: DetectorConfig, skip: Sequence[str]) -> List[DetectedEvent]:
    zones = _restricted_zones(s)
    if not zones:
        return []
    out = []
    width = s.road.width
    for a in s.actors:
        if a.actor_class != "vehicle" or a.id in skip:
            continue
        kin = s.kinematics(a.id)
        x, y = kin.xy(times)
        speed = kin.speed(times)
        for name, (x0, x1) in zones:
            mask = (x >= x0) & (x <= x1) & (y >= 0) & (y <= width) & (speed < cfg.stop_speed)
            for i, j in _runs(mask):
                if times[j] - times[i] < cfg.stop_dwell - _TOL:
                    continue
                out.append(DetectedEvent(
                    "stopped_in_restricted", (a.id,), _t(times[i]), _t(times[j]),
                    f"stationary in the {name} (x {x0:g}..{x1:g} m) for {times[j] - times[i]:.2f} s",
                ))
    return out


def detect_rule_violations(s: Scenario, cfg: DetectorConfig = DetectorConfig(), skip: Sequence[str] = ("ego",)) -> List[DetectedEvent]:
    times = sample_times(s, cfg.dt_sample)
    events = _red_light(s, times, cfg, skip) + _jaywalk(s, times, cfg) + _stopped(s, times, cfg, skip)
    return _sorted(events)


def detect_all(s: Scenario, cfg: DetectorConfig = DetectorConfig(), observer: str = "ego") -> List[DetectedEvent]:
    skip = (observer,)
    events = detect_occlusions(s, cfg, observer) + detect_kinematic_events(s, cfg, skip) + detect_rule_violations(s, cfg, skip)
    return _sorted(events)


# Mapping to taxonomy elements -------------------------------------------------------------

_KINEMATIC_VARIANT = {
    "sudden_braking": "following",
    "abrupt_lane_change": "lane_change",
    "weaving": "parallel",
    "lane_splitting": "parallel",
}


def _is_static(s: Scenario, actor: str, event: DetectedEvent, cfg: DetectorConfig) -> bool:
    kin = s.kinematics(actor)
    n = max(1, int(round((event.t1 - event.t0) / cfg.dt_sample)))
    times = np.linspace(event.t0, event.t1, n + 1)
    return bool(np.all(kin.speed(times) < cfg.stop_speed))


def suggest_elements(
    events: Sequence[DetectedEvent], s: Scenario, catalog: TaxonomyCatalog, cfg: DetectorConfig = DetectorConfig()
) -> List[ElementSuggestion]:
    """Map events to catalog elements; one suggestion per (path, variant, actor set)."""
    found: Dict[Tuple, Tuple[str, Optional[str], Tuple[str, ...], List[DetectedEvent]]] = {}
    for ev in _sorted(events):
        if ev.kind == "occlusion":
            target = ev.actors[2]
            state = "static" if _is_static(s, target, ev, cfg) else "dynamic"
            path, variant, actors = f"actor.{s.actor(target).actor_class}.{state}.visibility", None, (target,)
        elif ev.kind in _KINEMATIC_VARIANT:
            path, variant, actors = "actor.vehicle.dynamic.erratic", _KINEMATIC_VARIANT[ev.kind], (ev.subject,)
        elif ev.kind == "red_light_crossing":
            path, variant, actors = "actor.vehicle.dynamic.against_rules", "collision_point", (ev.subject,)
        elif ev.kind == "jaywalk_entry":
            path, variant, actors = "actor.pedestrian.dynamic.against_rules", None, (ev.subject,)
        elif ev.kind == "stopped_in_restricted":
            path, variant, actors = "actor.vehicle.static.against_rules", None, (ev.subject,)
        else:
            raise ValueError(f"unknown event kind {ev.kind!r}")
        entry = catalog.entries.get(path)
        if entry is None or (variant is not None and variant not in entry.variants):
            continue
        key = (path, variant or "", tuple(sorted(actors)))
        if key in found:
            found[key][3].append(ev)
        else:
            found[key] = (path, variant, actors, [ev])
    return [
        ElementSuggestion(path, variant, actors, tuple(evs))
        for key, (path, variant, actors, evs) in sorted(found.items(), key=lambda kv: kv[0])
    ]
