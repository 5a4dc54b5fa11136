"""Scenario description language: lexer, parser, printer, validation and pose queries.

A scenario file is line oriented. Each non-blank line is one statement; ``#`` starts a
comment outside strings; tokens are separated by whitespace; strings are double quoted
with ``\\"`` and ``\\\\`` escapes. Statements::

    scenario "<id>" "<title>"
    road lanes=<int> lane_width=<m> [junction=..] [crossing=..] [junction_box=<x0>:<x1>] [crossing_zone=<x0>:<x1>]
    actor id=<ident> class=vehicle|pedestrian|object subtype=<ident> dims=<L>x<W> [approach=<ident>]
    track actor=<ident> t=<s> x=<m> y=<m> [heading=<rad>] [speed=<mps>]
    signal t=<s> approach=<ident> phase=red|green|green_arrow|amber|off
    stopline approach=<ident> x=<m>
    element path=<dot.path> [variant=<ident>] [actors=<id>[,<id>...]] [note="..."]
    note "..."

The parser never stops at the first problem: every statement is checked and all
diagnostics are raised together in a ScenarioSyntaxError.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .diagnostics import Diagnostic, DiagnosticError
from .taxonomy import TaxonomyCatalog, nearest_paths, path_error

ACTOR_CLASSES = ("vehicle", "pedestrian", "object")
JUNCTIONS = ("none", "signalized", "unsignalized")
CROSSINGS = ("none", "signalized", "zebra", "non_crossing_area")
PHASES = ("red", "green", "green_arrow", "amber", "off")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_DIMS = re.compile(r"([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)x([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\Z")


# Domain types ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RoadSpec:
    lane_count: int
    lane_width: float
    junction: str = "none"
    crossing: str = "none"
    junction_box: Optional[Tuple[float, float]] = None
    crossing_zone: Optional[Tuple[float, float]] = None

    @property
    def width(self) -> float:
        return self.lane_count * self.lane_width


@dataclass(frozen=True)
class ActorDecl:
    id: str
    actor_class: str
    subtype: str
    length: float
    width: float
    approach: Optional[str] = None
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class TrackSample:
    actor: str
    t: float
    x: float
    y: float
    heading: Optional[float] = None
    speed: Optional[float] = None


@dataclass(frozen=True)
class SignalPhaseEvent:
    t: float
    approach: str
    phase: str


@dataclass(frozen=True)
class StopLine:
    approach: str
    x: float


@dataclass(frozen=True)
class DeclaredElement:
    path: str
    variant: Optional[str] = None
    actors: Tuple[str, ...] = ()
    note: str = ""
    line: int = field(default=0, compare=False, repr=False)


class Pose(NamedTuple):
    x: float
    y: float
    heading: float
    speed: float


class _Kinematics:
    """Per-actor sample arrays and the interpolation rules used by pose queries."""

    def __init__(self, samples: Sequence[TrackSample]):
        self.t = np.array([s.t for s in samples], dtype=float)
        self.x = np.array([s.x for s in samples], dtype=float)
        self.y = np.array([s.y for s in samples], dtype=float)
        self.h = np.array([np.nan if s.heading is None else s.heading for s in samples], dtype=float)
        self.v = np.array([np.nan if s.speed is None else s.speed for s in samples], dtype=float)
        n = len(samples)
        if n >= 2:
            dx, dy, dt = np.diff(self.x), np.diff(self.y), np.diff(self.t)
            chord = np.hypot(dx, dy)
            # denormal time gaps would overflow; cap at the largest float so poses stay finite
            with np.errstate(over="ignore"):
                self.seg_speed = np.minimum(chord / dt, np.finfo(float).max)
            direction = np.where(chord > 0, np.arctan2(dy, dx), np.nan)
            for i in np.flatnonzero(np.isnan(direction)):
                ends = [h for h in (self.h[i], self.h[i + 1]) if not np.isnan(h)]
                if ends:
                    direction[i] = ends[0]
            known = np.flatnonzero(~np.isnan(direction))
            if known.size:
                idx = np.arange(n - 1)
                # nearest known segment, preferring the earlier one on ties
                pos = np.searchsorted(known, idx)
                prev = known[np.clip(pos - 1, 0, known.size - 1)]
                nxt = known[np.clip(pos, 0, known.size - 1)]
                pick = np.where(np.abs(idx - prev) <= np.abs(nxt - idx), prev, nxt)
                direction = np.where(np.isnan(direction), direction[pick], direction)
            else:
                fallback = self.h[~np.isnan(self.h)]
                direction[:] = fallback[0] if fallback.size else 0.0
            self.seg_dir = direction
        else:
            self.seg_speed = np.zeros(0)
            self.seg_dir = np.zeros(0)

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def _locate(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        tc = np.clip(times, self.t[0], self.t[-1])
        i = np.clip(np.searchsorted(self.t, tc, side="right") - 1, 0, len(self.t) - 2)
        f = (tc - self.t[i]) / (self.t[i + 1] - self.t[i])
        return i, f

    def xy(self, times: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return np.interp(times, self.t, self.x), np.interp(times, self.t, self.y)

    def heading(self, times: np.ndarray) -> np.ndarray:
        if len(self.t) == 1:
            h = 0.0 if np.isnan(self.h[0]) else float(self.h[0])
            return np.full(np.shape(times), h)
        i, f = self._locate(times)
        h0, h1 = self.h[i], self.h[i + 1]
        both = ~np.isnan(h0) & ~np.isnan(h1)
        delta = np.arctan2(np.sin(h1 - h0), np.cos(h1 - h0))
        out = self.seg_dir[i].copy()
        out = np.where((f == 0) & ~np.isnan(h0), h0, out)
        out = np.where((f == 1) & ~np.isnan(h1), h1, out)
        out = np.where(both, h0 + f * np.nan_to_num(delta), out)
        return out

    def speed(self, times: np.ndarray) -> np.ndarray:
        if len(self.t) == 1:
            v = 0.0 if np.isnan(self.v[0]) else float(self.v[0])
            return np.full(np.shape(times), v)
        i, f = self._locate(times)
        v0, v1 = self.v[i], self.v[i + 1]
        both = ~np.isnan(v0) & ~np.isnan(v1)
        out = self.seg_speed[i].copy()
        out = np.where((f == 0) & ~np.isnan(v0), v0, out)
        out = np.where((f == 1) & ~np.isnan(v1), v1, out)
        out = np.where(both, v0 + f * (np.nan_to_num(v1) - np.nan_to_num(v0)), out)
        return out


@dataclass(frozen=True)
class Scenario:
    id: str
    title: str
    road: RoadSpec
    actors: Tuple[ActorDecl, ...]
    tracks: Mapping[str, Tuple[TrackSample, ...]]
    signals: Tuple[SignalPhaseEvent, ...] = ()
    declared: Tuple[DeclaredElement, ...] = ()
    notes: Tuple[str, ...] = ()
    stoplines: Tuple[StopLine, ...] = ()
    _kin: Dict[str, _Kinematics] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.tracks, MappingProxyType):
            object.__setattr__(self, "tracks", MappingProxyType({k: tuple(v) for k, v in self.tracks.items()}))

    def __hash__(self) -> int:
        return hash((self.id, self.title, self.actors, self.declared))

    def actor(self, actor_id: str) -> ActorDecl:
        for a in self.actors:
            if a.id == actor_id:
                return a
        raise KeyError(f"unknown actor {actor_id!r}")

    def has_actor(self, actor_id: str) -> bool:
        return any(a.id == actor_id for a in self.actors)

    @property
    def time_domain(self) -> Tuple[float, float]:
        times = [s.t for samples in self.tracks.values() for s in samples]
        return min(times), max(times)

    def kinematics(self, actor_id: str) -> _Kinematics:
        kin = self._kin.get(actor_id)
        if kin is None:
            samples = self.tracks.get(actor_id)
            if not samples:
                self.actor(actor_id)  # raises for unknown ids
                raise KeyError(f"actor {actor_id!r} has no track samples")
            kin = _Kinematics(samples)
            self._kin[actor_id] = kin
        return kin

    def stopline(self, approach: Optional[str]) -> Optional[StopLine]:
        for s in self.stoplines:
            if s.approach == approach:
                return s
        return None

    def phase_at(self, approach: str, t: float) -> Optional[str]:
        """Signal phase of ``approach`` at time ``t``; None before its first event."""
        phase = None
        for ev in self.signals:
            if ev.approach == approach and ev.t <= t:
                phase = ev.phase
        return phase


class ScenarioSyntaxError(DiagnosticError):
    pass


def pose_at(s: Scenario, actor: str, t: float) -> Pose:
    """Pose of ``actor`` at time ``t`` (clamped to the actor's sample span)."""
    kin = s.kinematics(actor)
    times = np.array([t], dtype=float)
    x, y = kin.xy(times)
    return Pose(float(x[0]), float(y[0]), float(kin.heading(times)[0]), float(kin.speed(times)[0]))


def sample_times(s: Scenario, dt: float) -> np.ndarray:
    """Uniform grid over the scenario time domain, starting at its first instant."""
    t0, t1 = s.time_domain
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    return t0 + dt * np.arange(n)


# Lexer -----------------------------------------------------------------------------------

class Token(NamedTuple):
    kind: str  # "word", "string" or "pair"
    text: str  # word text, string contents, or pair key
    value: str  # pair value (unquoted), else ""
    quoted: bool
    column: int


_STRING = r'"(?:[^"\\\n]|\\.)*"'
_TOKEN = re.compile(
    rf"(?P<pair>(?P<key>[A-Za-z_][A-Za-z0-9_]*)=(?P<val>{_STRING}|[^\s\"#]*))"
    rf"|(?P<string>{_STRING})"
    r"|(?P<word>[^\s\"=#]+)"
)


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", r"\1", body)


def _escape(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def tokenize_line(line: str, lineno: int, diags: List[Diagnostic]) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    n = len(line)
    while pos < n:
        ch = line[pos]
        if ch in " \t\r\f\v":
            pos += 1
            continue
        if ch == "#":
            break
        m = _TOKEN.match(line, pos)
        if m is None or m.end() == pos:
            if ch == '"':
                diags.append(Diagnostic(lineno, pos + 1, "unterminated string"))
            else:
                diags.append(Diagnostic(lineno, pos + 1, f"unexpected character {ch!r}"))
            return tokens
        if m.group("pair") is not None:
            raw = m.group("val")
            quoted = raw.startswith('"')
            value = _unescape(raw[1:-1]) if quoted else raw
            tokens.append(Token("pair", m.group("key"), value, quoted, pos + 1))
        elif m.group("string") is not None:
            tokens.append(Token("string", _unescape(m.group("string")[1:-1]), "", True, pos + 1))
        else:
            tokens.append(Token("word", m.group("word"), "", False, pos + 1))
        end = m.end()
        if end < n and line[end] == '"':
            diags.append(Diagnostic(lineno, end + 1, "unterminated string"))
            return tokens
        if end < n and line[end] not in " \t\r\f\v#":
            diags.append(Diagnostic(lineno, end + 1, "tokens must be separated by whitespace"))
            return tokens
        pos = end
    return tokens


# Parser ----------------------------------------------------------------------------------

_KEYS: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    # statement: (required keys, optional keys)
    "road": (("lanes", "lane_width"), ("junction", "crossing", "junction_box", "crossing_zone")),
    "actor": (("id", "class", "subtype", "dims"), ("approach",)),
    "track": (("actor", "t", "x", "y"), ("heading", "speed")),
    "signal": (("t", "approach", "phase"), ()),
    "stopline": (("approach", "x"), ()),
    "element": (("path",), ("variant", "actors", "note")),
}
_POSITIONAL = {"scenario": 2, "note": 1}


class _Stmt:
    def __init__(self, parser: "_Parser", lineno: int, keyword: Token, args: List[Token]):
        self.p = parser
        self.line = lineno
        self.keyword = keyword
        self.pairs: Dict[str, Token] = {}
        self.ok = True
        required, optional = _KEYS[keyword.text]
        for tok in args:
            if tok.kind != "pair":
                self.error(tok.column, f"expected key=value in {keyword.text} statement, found {tok.text!r}")
            elif tok.text not in required and tok.text not in optional:
                self.error(tok.column, f"unknown key {tok.text!r} in {keyword.text} statement")
            elif tok.text in self.pairs:
                self.error(tok.column, f"duplicate key {tok.text!r}")
            else:
                self.pairs[tok.text] = tok
        for key in required:
            if key not in self.pairs:
                self.error(keyword.column, f"{keyword.text} statement is missing {key}=")

    def error(self, column: int, message: str) -> None:
        self.ok = False
        self.p.diag(self.line, column, message)

    def has(self, key: str) -> bool:
        return key in self.pairs

    def col(self, key: str) -> int:
        tok = self.pairs.get(key)
        return tok.column if tok else self.keyword.column

    def raw(self, key: str) -> Optional[str]:
        tok = self.pairs.get(key)
        return None if tok is None else tok.value

    def ident(self, key: str) -> Optional[str]:
        value = self.raw(key)
        if value is None:
            return None
        if not _IDENT.match(value):
            self.error(self.col(key), f"{key}: {value!r} is not an identifier")
            return None
        return value

    def choice(self, key: str, options: Sequence[str], default: Optional[str] = None) -> Optional[str]:
        value = self.raw(key)
        if value is None:
            return default
        if value not in options:
            self.error(self.col(key), f"{key} must be one of {'|'.join(options)}, got {value!r}")
            return default
        return value

    def number(self, key: str, minimum: Optional[float] = None, strict: bool = False) -> Optional[float]:
        value = self.raw(key)
        if value is None:
            return None
        try:
            num = float(value)
        except ValueError:
            num = math.nan
        if not math.isfinite(num) or value.strip() != value or "_" in value:
            self.error(self.col(key), f"{key}: {value!r} is not a finite number")
            return None
        if minimum is not None and (num < minimum or (strict and num == minimum)):
            rel = ">" if strict else ">="
            self.error(self.col(key), f"{key} must be {rel} {minimum:g}")
            return None
        return num

    def integer(self, key: str, minimum: int) -> Optional[int]:
        value = self.raw(key)
        if value is None:
            return None
        if not re.fullmatch(r"[0-9]+", value):
            self.error(self.col(key), f"{key}: {value!r} is not an integer")
            return None
        num = int(value)
        if num < minimum:
            self.error(self.col(key), f"{key} must be >= {minimum}")
            return None
        return num

    def interval(self, key: str) -> Optional[Tuple[float, float]]:
        value = self.raw(key)
        if value is None:
            return None
        parts = value.split(":")
        try:
            lo, hi = (float(p) for p in parts)
        except ValueError:
            lo = hi = math.nan
        if len(parts) != 2 or not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            self.error(self.col(key), f"{key} must be <x0>:<x1> with x0 < x1")
            return None
        return (lo, hi)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diags: List[Diagnostic] = []
        self.header: Optional[Tuple[str, str]] = None
        self.road: Optional[RoadSpec] = None
        self.actors: List[ActorDecl] = []
        self.tracks: Dict[str, List[TrackSample]] = {}
        self.track_lines: Dict[str, List[int]] = {}
        self.signals: List[SignalPhaseEvent] = []
        self.signal_last: Dict[str, float] = {}
        self.stoplines: Dict[str, StopLine] = {}
        self.declared: List[DeclaredElement] = []
        self.notes: List[str] = []
        self.track_refs: List[Tuple[str, int, int]] = []
        self.element_refs: List[Tuple[str, int, int]] = []

    def diag(self, line: int, column: int, message: str) -> None:
        self.diags.append(Diagnostic(line, column, message))

    def run(self) -> Scenario:
        lines = self.text.split("\n")
        for lineno, line in enumerate(lines, start=1):
            tokens = tokenize_line(line, lineno, self.diags)
            if tokens:
                self.statement(lineno, tokens)
        self.finish(len(lines))
        if self.diags:
            raise ScenarioSyntaxError(sorted(self.diags, key=lambda d: (d.line or 0, d.column or 0, d.message)))
        assert self.header is not None and self.road is not None
        return Scenario(
            id=self.header[0],
            title=self.header[1],
            road=self.road,
            actors=tuple(self.actors),
            tracks={a.id: tuple(self.tracks.get(a.id, ())) for a in self.actors},
            signals=tuple(self.signals),
            declared=tuple(self.declared),
            notes=tuple(self.notes),
            stoplines=tuple(self.stoplines.values()),
        )

    def statement(self, lineno: int, tokens: List[Token]) -> None:
        head = tokens[0]
        if head.kind != "word":
            self.diag(lineno, head.column, "statement must start with a keyword")
            return
        if head.text in _POSITIONAL:
            self.positional(lineno, head, tokens[1:])
            return
        if head.text not in _KEYS:
            self.diag(lineno, head.column, f"unknown statement {head.text!r}")
            return
        st = _Stmt(self, lineno, head, tokens[1:])
        getattr(self, "stmt_" + head.text)(st)

    def positional(self, lineno: int, head: Token, args: List[Token]) -> None:
        want = _POSITIONAL[head.text]
        bad = [t for t in args if t.kind != "string"]
        if bad or len(args) != want:
            col = bad[0].column if bad else head.column
            shape = " ".join(['"..."'] * want)
            self.diag(lineno, col, f"{head.text} statement takes {shape}")
            return
        if head.text == "note":
            self.notes.append(args[0].text)
            return
        if self.header is not None:
            self.diag(lineno, head.column, "duplicate scenario header")
            return
        if not args[0].text.strip():
            self.diag(lineno, args[0].column, "scenario id must not be empty")
        self.header = (args[0].text, args[1].text)

    def stmt_road(self, st: _Stmt) -> None:
        lanes = st.integer("lanes", 1)
        width = st.number("lane_width", 0.0, strict=True)
        junction = st.choice("junction", JUNCTIONS, "none")
        crossing = st.choice("crossing", CROSSINGS, "none")
        box = st.interval("junction_box")
        zone = st.interval("crossing_zone")
        if self.road is not None:
            st.error(st.keyword.column, "duplicate road statement")
        if st.ok and lanes is not None and width is not None:
            self.road = RoadSpec(lanes, width, junction or "none", crossing or "none", box, zone)
        elif self.road is None:
            self.road = RoadSpec(1, 1.0)  # placeholder so later checks can proceed; error already recorded

    def stmt_actor(self, st: _Stmt) -> None:
        actor_id = st.ident("id")
        cls = st.choice("class", ACTOR_CLASSES)
        subtype = st.ident("subtype")
        approach = st.ident("approach")
        dims = st.raw("dims")
        length = width = None
        if dims is not None:
            m = _DIMS.match(dims)
            if m is None or float(m.group(1)) <= 0 or float(m.group(2)) <= 0:
                st.error(st.col("dims"), f"dims must be <L>x<W> with positive sizes, got {dims!r}")
            else:
                length, width = float(m.group(1)), float(m.group(2))
        if actor_id is not None and any(a.id == actor_id for a in self.actors):
            st.error(st.col("id"), f"duplicate actor id {actor_id!r}")
            return
        if st.ok:
            self.actors.append(ActorDecl(actor_id, cls, subtype, length, width, approach, line=st.line))

    def stmt_track(self, st: _Stmt) -> None:
        actor = st.ident("actor")
        t = st.number("t")
        x = st.number("x")
        y = st.number("y")
        heading = st.number("heading")
        speed = st.number("speed", 0.0)
        if not st.ok or actor is None:
            return
        samples = self.tracks.setdefault(actor, [])
        if samples and t <= samples[-1].t:
            prev = self.track_lines[actor][-1]
            st.error(st.col("t"), f"track time for actor {actor!r} must increase: t={t:g} after t={samples[-1].t:g} (line {prev})")
            return
        samples.append(TrackSample(actor, t, x, y, heading, speed))
        self.track_lines.setdefault(actor, []).append(st.line)
        self.track_refs.append((actor, st.line, st.col("actor")))

    def stmt_signal(self, st: _Stmt) -> None:
        t = st.number("t")
        approach = st.ident("approach")
        phase = st.choice("phase", PHASES)
        if not st.ok:
            return
        last = self.signal_last.get(approach)
        if last is not None and t <= last:
            st.error(st.col("t"), f"signal times for approach {approach!r} must increase")
            return
        self.signal_last[approach] = t
        self.signals.append(SignalPhaseEvent(t, approach, phase))

    def stmt_stopline(self, st: _Stmt) -> None:
        approach = st.ident("approach")
        x = st.number("x")
        if not st.ok:
            return
        if approach in self.stoplines:
            st.error(st.col("approach"), f"duplicate stopline for approach {approach!r}")
            return
        self.stoplines[approach] = StopLine(approach, x)

    def stmt_element(self, st: _Stmt) -> None:
        path = st.raw("path")
        if path is not None:
            problem = path_error(path)
            if problem:
                st.error(st.col("path"), problem)
        variant = st.ident("variant")
        actors: Tuple[str, ...] = ()
        raw = st.raw("actors")
        if raw is not None:
            actors = tuple(raw.split(","))
            bad = [a for a in actors if not _IDENT.match(a)]
            if bad:
                st.error(st.col("actors"), f"actors must be a comma-separated list of ids, got {raw!r}")
            elif len(set(actors)) != len(actors):
                st.error(st.col("actors"), "duplicate actor in actors list")
        note = st.raw("note") or ""
        if not st.ok:
            return
        for a in actors:
            self.element_refs.append((a, st.line, st.col("actors")))
        self.declared.append(DeclaredElement(path, variant, actors, note, line=st.line))

    def finish(self, nlines: int) -> None:
        if self.header is None:
            self.diag(1, 1, "missing scenario header")
        if self.road is None:
            self.diag(1, 1, "missing road statement")
        known = {a.id: a for a in self.actors}
        for actor, line, col in self.track_refs:
            if actor not in known:
                self.diag(line, col, f"track references undeclared actor {actor!r}")
        for actor, line, col in self.element_refs:
            if actor not in known:
                self.diag(line, col, f"element references undeclared actor {actor!r}")
        for a in self.actors:
            if not self.tracks.get(a.id):
                self.diag(a.line, 1, f"actor {a.id!r} has no track samples")
        ego = known.get("ego")
        if ego is None:
            self.diag(1, 1, "missing ego: exactly one actor must have id ego")
        elif ego.actor_class != "vehicle":
            self.diag(ego.line, 1, "actor ego must have class vehicle")


def parse_scenario(text: Union[str, bytes], source: str = "") -> Scenario:
    """Parse DSL text; raises ScenarioSyntaxError carrying all positioned diagnostics."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            pos = text[: exc.start].count(b"\n") + 1
            raise ScenarioSyntaxError([Diagnostic(pos, 1, "input is not valid UTF-8", source)]) from None
    try:
        return _Parser(text).run()
    except ScenarioSyntaxError as exc:
        if source:
            exc.diagnostics = [Diagnostic(d.line, d.column, d.message, source) for d in exc.diagnostics]
        raise


def parse_scenario_file(path: str) -> Scenario:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_scenario(data, source=str(path))


# Printer ---------------------------------------------------------------------------------

def _num(value: float) -> str:
    return repr(float(value))


def serialize_scenario(s: Scenario) -> str:
    """Canonical DSL text; parsing it yields a Scenario equal to ``s``."""
    out = [f"scenario {_escape(s.id)} {_escape(s.title)}"]
    r = s.road
    road = f"road lanes={r.lane_count} lane_width={_num(r.lane_width)} junction={r.junction} crossing={r.crossing}"
    if r.junction_box:
        road += f" junction_box={_num(r.junction_box[0])}:{_num(r.junction_box[1])}"
    if r.crossing_zone:
        road += f" crossing_zone={_num(r.crossing_zone[0])}:{_num(r.crossing_zone[1])}"
    out.append(road)
    for a in s.actors:
        line = f"actor id={a.id} class={a.actor_class} subtype={a.subtype} dims={_num(a.length)}x{_num(a.width)}"
        if a.approach:
            line += f" approach={a.approach}"
        out.append(line)
    for sl in s.stoplines:
        out.append(f"stopline approach={sl.approach} x={_num(sl.x)}")
    for ev in s.signals:
        out.append(f"signal t={_num(ev.t)} approach={ev.approach} phase={ev.phase}")
    for a in s.actors:
        for smp in s.tracks.get(a.id, ()):
            line = f"track actor={a.id} t={_num(smp.t)} x={_num(smp.x)} y={_num(smp.y)}"
            if smp.heading is not None:
                line += f" heading={_num(smp.heading)}"
            if smp.speed is not None:
                line += f" speed={_num(smp.speed)}"
            out.append(line)
    for el in s.declared:
        line = f"element path={el.path}"
        if el.variant:
            line += f" variant={el.variant}"
        if el.actors:
            line += f" actors={','.join(el.actors)}"
        if el.note:
            line += f" note={_escape(el.note)}"
        out.append(line)
    for note in s.notes:
        out.append(f"note {_escape(note)}")
    return "\n".join(out) + "\n"


# Validation against the catalog ----------------------------------------------------------

# Path prefix -> actor class every referenced actor must have.
_CLASS_BY_PREFIX = (
    ("actor.vehicle.", "vehicle"),
    ("actor.pedestrian.", "pedestrian"),
    ("actor.object.", "object"),
)


def required_class(path: str) -> Optional[str]:
    for prefix, cls in _CLASS_BY_PREFIX:
        if path.startswith(prefix):
            return cls
    return None


def validate_scenario(s: Scenario, catalog: TaxonomyCatalog, source: str = "") -> List[Diagnostic]:
    diags: List[Diagnostic] = []

    def bad(el: DeclaredElement, message: str) -> None:
        diags.append(Diagnostic(el.line or None, 1 if el.line else None, message, source))

    for el in s.declared:
        entry = catalog.entries.get(el.path)
        if entry is None:
            near = nearest_paths(catalog, el.path, limit=4)
            hint = f" (nearest: {', '.join(near)})" if near else ""
            bad(el, f"unknown element path {el.path}{hint}")
            continue
        if el.variant is not None and el.variant not in entry.variants:
            allowed = ", ".join(entry.variants) or "none"
            bad(el, f"variant {el.variant!r} is not defined for {el.path} (allowed: {allowed})")
        cls = required_class(el.path)
        for actor_id in el.actors:
            if not s.has_actor(actor_id):
                bad(el, f"element {el.path} references unknown actor {actor_id!r}")
            elif cls is not None and s.actor(actor_id).actor_class != cls:
                bad(el, f"element {el.path} expects a {cls} actor but {actor_id!r} is a {s.actor(actor_id).actor_class}")
    return diags


def iter_actor_ids(s: Scenario, actor_class: Optional[str] = None) -> Iterator[str]:
    for a in s.actors:
        if actor_class is None or a.actor_class == actor_class:
            yield a.id
