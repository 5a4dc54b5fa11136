"""Three-step scenario analysis: element findings, per-element complexity rows, synthesis.

Step 1 merges analyst-declared elements with detector suggestions into findings.
Step 2 expands every finding into its six-dimension catalog row and checks a small set
of cross-element interaction rules. Step 3 scores the findings and writes a templated
summary. Narrative judgement beyond the templates stays with the analyst.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .detectors import (
    LARGE_VEHICLES,
    DetectedEvent,
    DetectorConfig,
    ElementSuggestion,
    detect_all,
    suggest_elements,
)
from .diagnostics import DiagnosticError
from .scenario import Scenario, sample_times, validate_scenario
from .taxonomy import DIMENSION_GROUPS, DIMENSION_LABELS, DIMENSIONS, DimensionEntry, TaxonomyCatalog

PROVENANCES = ("declared", "detected", "both")
FLAG_KINDS = ("occluded_vru_emergence", "workzone_induced_erratic", "goal_conflict_chain", "large_vehicle_occluder")
FORMATS = ("json", "markdown")
VRU_SUBTYPES = frozenset({"e_bike", "bicycle", "cyclist", "pmd"})
SCHEMA_ID = "scencomplex.report/1"

_GROUP_LABELS = {
    "perception": "Situation Awareness / Perception",
    "situation analysis": "Situation Awareness / Situation Analysis",
    "decision making": "Decision Making / Planning",
}


class ScenarioValidationError(DiagnosticError):
    pass


@dataclass(frozen=True)
class ElementFinding:
    path: str
    variant: Optional[str]
    actors: Tuple[str, ...]
    provenance: str
    note: str = ""
    source_events: Tuple[DetectedEvent, ...] = ()

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def key(self) -> Tuple[str, str, Tuple[str, ...]]:
        return (self.path, self.variant or "", tuple(sorted(self.actors)))

    @property
    def sort_key(self) -> Tuple[str, str, str, Tuple[str, ...]]:
        first = self.actors[0] if self.actors else ""
        return (self.path, self.variant or "", first, tuple(sorted(self.actors)))


@dataclass(frozen=True)
class ElementRow:
    """Catalog row of one finding: its six dimension cells and the primary dimension."""

    path: str
    cells: Tuple[DimensionEntry, ...]
    primary_dimension: str

    def text(self, dimension: str) -> str:
        for cell in self.cells:
            if cell.dimension == dimension:
                return cell.text
        raise KeyError(dimension)


@dataclass(frozen=True)
class InteractionFlag:
    kind: str
    findings: Tuple[int, ...]  # indices into AnalysisReport.findings
    narrative: str

    def __post_init__(self) -> None:
        if self.kind not in FLAG_KINDS:
            raise ValueError(f"unknown flag kind {self.kind!r}")
        if len(set(self.findings)) < 2:
            raise ValueError("a flag references at least two findings")


@dataclass(frozen=True)
class ComplexityScore:
    per_dimension: Mapping[str, int]
    primary_hits: Mapping[str, int]
    total: int
    weighted_total: float
    weights: Mapping[str, float] = field(default_factory=lambda: MappingProxyType({d: 1.0 for d in DIMENSIONS}))

    def __post_init__(self) -> None:
        for name in ("per_dimension", "primary_hits", "weights"):
            value = getattr(self, name)
            if not isinstance(value, MappingProxyType):
                object.__setattr__(self, name, MappingProxyType(dict(value)))


@dataclass(frozen=True)
class AnalysisReport:
    scenario_id: str
    title: str
    findings: Tuple[ElementFinding, ...]
    rows: Tuple[ElementRow, ...]
    flags: Tuple[InteractionFlag, ...]
    score: ComplexityScore
    summary: str
    events: Tuple[DetectedEvent, ...] = ()
    notes: Tuple[str, ...] = ()
    detection: bool = True

    @property
    def leaves(self) -> Tuple[str, ...]:
        return tuple(sorted({f.path for f in self.findings}))


# Step 1 ----------------------------------------------------------------------------------

def _merge_note(old: str, new: str) -> str:
    if not new or new == old:
        return old
    if not old:
        return new
    parts = old.split("; ")
    return old if new in parts else f"{old}; {new}"


def consolidate(declared: Iterable, suggested: Iterable[ElementSuggestion]) -> List[ElementFinding]:
    """Union of declared elements and detector suggestions keyed by (path, variant, actor set)."""
    merged: Dict[Tuple, dict] = {}
    for el in declared:
        key = (el.path, el.variant or "", tuple(sorted(el.actors)))
        slot = merged.setdefault(key, {"path": el.path, "variant": el.variant, "actors": tuple(el.actors),
                                       "declared": False, "detected": False, "note": "", "events": []})
        slot["declared"] = True
        slot["note"] = _merge_note(slot["note"], el.note)
    for sug in suggested:
        slot = merged.setdefault(sug.key, {"path": sug.path, "variant": sug.variant, "actors": tuple(sug.actors),
                                           "declared": False, "detected": False, "note": "", "events": []})
        slot["detected"] = True
        for ev in sug.source_events:
            if ev not in slot["events"]:
                slot["events"].append(ev)
    findings = []
    for slot in merged.values():
        prov = "both" if slot["declared"] and slot["detected"] else ("declared" if slot["declared"] else "detected")
        events = tuple(sorted(slot["events"], key=DetectedEvent.sort_key))
        findings.append(ElementFinding(slot["path"], slot["variant"], slot["actors"], prov, slot["note"], events))
    findings.sort(key=lambda f: f.sort_key)
    return findings


# Step 2 ----------------------------------------------------------------------------------

def expand_row(finding: ElementFinding, catalog: TaxonomyCatalog) -> ElementRow:
    entry = catalog.entries[finding.path]
    return ElementRow(entry.path, entry.dimensions, entry.primary_dimension)


def _is_vru(s: Scenario, actor_id: str) -> bool:
    if not s.has_actor(actor_id):
        return False
    a = s.actor(actor_id)
    return a.actor_class == "pedestrian" or a.subtype in VRU_SUBTYPES


def _behind(s: Scenario, actor_id: str, reference: str) -> bool:
    """True when ``actor_id`` is longitudinally behind ``reference`` for most of the scenario."""
    if not (s.has_actor(actor_id) and s.has_actor(reference)):
        return False
    times = sample_times(s, 0.1)
    xa, _ = s.kinematics(actor_id).xy(times)
    xr, _ = s.kinematics(reference).xy(times)
    return bool(np.mean(xa < xr) > 0.5)


def _indices(findings: Sequence[ElementFinding], pred) -> List[int]:
    return [i for i, f in enumerate(findings) if pred(f)]


def apply_interaction_rules(
    findings: Sequence[ElementFinding],
    events: Sequence[DetectedEvent],
    s: Scenario,
    catalog: Optional[TaxonomyCatalog] = None,
    ego: str = "ego",
) -> List[InteractionFlag]:
    """Cross-element flags; each references at least two findings by index."""
    flags: List[InteractionFlag] = []

    # occluded VRU whose behaviour also breaks expectations
    actors = sorted({a for f in findings for a in f.actors})
    for actor_id in actors:
        if not _is_vru(s, actor_id):
            continue
        vis = _indices(findings, lambda f: f.path.endswith(".visibility") and f.path.startswith("actor.") and actor_id in f.actors)
        act = _indices(findings, lambda f: f.path.rsplit(".", 1)[-1] in ("against_rules", "erratic") and actor_id in f.actors)
        if vis and act:
            flags.append(InteractionFlag(
                "occluded_vru_emergence", tuple(sorted(vis + act)),
                f"{actor_id} is hidden from the ego and then behaves against expectations; "
                "it can emerge into the ego path with little warning",
            ))

    zone = _indices(findings, lambda f: f.path == "tmz.work_zone")
    erratic = _indices(findings, lambda f: f.path == "actor.vehicle.dynamic.erratic")
    if zone and erratic:
        who = ", ".join(sorted({a for i in erratic for a in findings[i].actors})) or "vehicles"
        flags.append(InteractionFlag(
            "workzone_induced_erratic", tuple(sorted(zone + erratic)),
            f"the work zone coincides with erratic driving by {who}; lane closures can force late manoeuvres",
        ))

    seen = set()
    for ev in sorted(events, key=DetectedEvent.sort_key):
        if ev.kind != "occlusion":
            continue
        occluder, target = ev.actors[1], ev.actors[2]
        if (occluder, target) in seen or not s.has_actor(occluder) or s.actor(occluder).subtype not in LARGE_VEHICLES:
            continue
        seen.add((occluder, target))
        vis = _indices(findings, lambda f: f.path.endswith(".visibility") and target in f.actors)
        occ = _indices(findings, lambda f: occluder in f.actors)
        refs = tuple(sorted(set(vis + occ)))
        if vis and len(refs) >= 2:
            flags.append(InteractionFlag(
                "large_vehicle_occluder", refs,
                f"{occluder}, a {s.actor(occluder).subtype}, blocks the line of sight to {target}",
            ))

    if catalog is not None:
        goal = _indices(findings, lambda f: f.path in catalog.entries and catalog.entries[f.path].has("goal_management"))
        followers = _indices(findings, lambda f: f.variant == "following" and any(_behind(s, a, ego) for a in f.actors if a != ego))
        if len(goal) >= 3 and followers:
            who = ", ".join(sorted({a for i in followers for a in findings[i].actors}))
            flags.append(InteractionFlag(
                "goal_conflict_chain", tuple(sorted(set(goal + followers))),
                f"{len(goal)} elements bear on goal management while {who} follows behind the ego; "
                "delaying or aborting the manoeuvre has a cost of its own",
            ))
    flags.sort(key=lambda fl: (FLAG_KINDS.index(fl.kind), fl.findings))
    return flags


# Step 3 ----------------------------------------------------------------------------------

def check_weights(weights: Optional[Mapping[str, float]]) -> Dict[str, float]:
    out = {d: 1.0 for d in DIMENSIONS}
    for key, value in (weights or {}).items():
        if key not in out:
            raise ValueError(f"unknown dimension {key!r} in weights")
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
            raise ValueError(f"weight for {key} must be a finite number >= 0")
        out[key] = float(value)
    return out


def score(findings: Sequence[ElementFinding], catalog: TaxonomyCatalog, weights: Optional[Mapping[str, float]] = None) -> ComplexityScore:
    w = check_weights(weights)
    per = {d: 0 for d in DIMENSIONS}
    primary = {d: 0 for d in DIMENSIONS}
    for f in findings:
        entry = catalog.entries[f.path]
        for d in entry.present_dimensions:
            per[d] += 1
        primary[entry.primary_dimension] += 1
    weighted = math.fsum(per[d] * w[d] for d in DIMENSIONS)
    return ComplexityScore(per, primary, sum(per.values()), weighted, w)


def _label(dimension: str) -> str:
    return DIMENSION_LABELS[dimension]


def summarize(scenario_id: str, findings: Sequence[ElementFinding], flags: Sequence[InteractionFlag], sc: ComplexityScore) -> str:
    if not findings:
        return f"Scenario {scenario_id} has no traffic agent hazard findings."
    leaves = len({f.path for f in findings})
    lines = [f"Scenario {scenario_id} has {len(findings)} findings on {leaves} taxonomy leaves."]
    ranked = sorted(DIMENSIONS, key=lambda d: (-sc.per_dimension[d], DIMENSIONS.index(d)))[:2]
    lines.append(
        f"Most findings load {_label(ranked[0])} ({sc.per_dimension[ranked[0]]}) "
        f"and {_label(ranked[1])} ({sc.per_dimension[ranked[1]]})."
    )
    lead = max(DIMENSIONS, key=lambda d: (sc.primary_hits[d], -DIMENSIONS.index(d)))
    lines.append(f"The most common primary impact is {_label(lead)} ({sc.primary_hits[lead]} findings).")
    if flags:
        lines.append("Interactions: " + "; ".join(f"{fl.kind} ({fl.narrative})" for fl in flags) + ".")
    else:
        lines.append("No cross-element interaction was flagged.")
    detected = sum(1 for f in findings if f.provenance != "declared")
    if detected:
        lines.append(f"{detected} findings are backed by detected events from 2D kinematics.")
    lines.append("Detectors only see 2D kinematics, so lights, signs, weather and intent come from the analyst.")
    return " ".join(lines)


def analyze(
    s: Scenario,
    catalog: TaxonomyCatalog,
    cfg: DetectorConfig = DetectorConfig(),
    weights: Optional[Mapping[str, float]] = None,
    detect: bool = True,
    observer: str = "ego",
    source: str = "",
) -> AnalysisReport:
    diags = validate_scenario(s, catalog, source)
    if diags:
        raise ScenarioValidationError(diags)
    events: List[DetectedEvent] = detect_all(s, cfg, observer) if detect and s.has_actor(observer) else []
    suggestions = suggest_elements(events, s, catalog, cfg) if events else []
    findings = consolidate(s.declared, suggestions)
    rows = tuple(expand_row(f, catalog) for f in findings)
    flags = apply_interaction_rules(findings, events, s, catalog, observer)
    sc = score(findings, catalog, weights)
    notes = tuple(s.notes)
    return AnalysisReport(
        s.id, s.title, tuple(findings), rows, tuple(flags), sc,
        summarize(s.id, findings, flags, sc), tuple(sorted(events, key=DetectedEvent.sort_key)), notes, detect,
    )


# Rendering -------------------------------------------------------------------------------

def _event_index(report: AnalysisReport) -> Dict[DetectedEvent, int]:
    return {ev: i for i, ev in enumerate(report.events)}


def report_to_dict(report: AnalysisReport) -> dict:
    index = _event_index(report)
    return {
        "schema": SCHEMA_ID,
        "scenario_id": report.scenario_id,
        "title": report.title,
        "detection": report.detection,
        "events": [
            {"kind": ev.kind, "actors": list(ev.actors), "t0": ev.t0, "t1": ev.t1, "evidence": ev.evidence}
            for ev in report.events
        ],
        "findings": [
            {
                "path": f.path,
                "variant": f.variant,
                "actors": list(f.actors),
                "provenance": f.provenance,
                "note": f.note,
                "events": [index[ev] for ev in f.source_events],
                "primary_dimension": row.primary_dimension,
                "dimensions": {c.dimension: c.text for c in row.cells},
            }
            for f, row in zip(report.findings, report.rows)
        ],
        "flags": [{"kind": fl.kind, "findings": list(fl.findings), "narrative": fl.narrative} for fl in report.flags],
        "score": {
            "per_dimension": dict(report.score.per_dimension),
            "primary_hits": dict(report.score.primary_hits),
            "total": report.score.total,
            "weighted_total": report.score.weighted_total,
            "weights": dict(report.score.weights),
        },
        "summary": report.summary,
        "notes": list(report.notes),
    }


def report_from_dict(data: Mapping) -> AnalysisReport:
    if data.get("schema") != SCHEMA_ID:
        raise ValueError(f"not a {SCHEMA_ID} document")
    events = tuple(
        DetectedEvent(e["kind"], tuple(e["actors"]), float(e["t0"]), float(e["t1"]), e["evidence"])
        for e in data["events"]
    )
    findings, rows = [], []
    for f in data["findings"]:
        findings.append(ElementFinding(
            f["path"], f["variant"], tuple(f["actors"]), f["provenance"], f["note"],
            tuple(events[i] for i in f["events"]),
        ))
        cells = tuple(DimensionEntry(d, f["dimensions"][d]) for d in DIMENSIONS)
        rows.append(ElementRow(f["path"], cells, f["primary_dimension"]))
    flags = tuple(InteractionFlag(fl["kind"], tuple(fl["findings"]), fl["narrative"]) for fl in data["flags"])
    sc = data["score"]
    score_ = ComplexityScore(
        {d: int(sc["per_dimension"][d]) for d in DIMENSIONS},
        {d: int(sc["primary_hits"][d]) for d in DIMENSIONS},
        int(sc["total"]), float(sc["weighted_total"]),
        {d: float(sc["weights"][d]) for d in DIMENSIONS},
    )
    return AnalysisReport(
        data["scenario_id"], data["title"], tuple(findings), tuple(rows), flags, score_,
        data["summary"], events, tuple(data["notes"]), bool(data["detection"]),
    )


def report_from_json(payload) -> AnalysisReport:
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    return report_from_dict(json.loads(payload))


def _cell(text: str) -> str:
    return " ".join(text.replace("|", "\\|").split())


def _markdown(report: AnalysisReport) -> str:
    out = [f"# {report.scenario_id}: {report.title}" if report.title else f"# {report.scenario_id}", ""]
    out.append(f"Findings: {len(report.findings)} on {len(report.leaves)} leaves. "
               f"Detection: {'on' if report.detection else 'off'}.")
    out.append("")
    group_of = {d: g for g, ds in DIMENSION_GROUPS for d in ds}
    header = ["Element", "Variant", "Actors", "Provenance"]
    header += [f"{_GROUP_LABELS[group_of[d]]} / {_label(d)}" for d in DIMENSIONS]
    out.append("| " + " | ".join(header) + " |")
    out.append("|" + "---|" * len(header))
    for f, row in zip(report.findings, report.rows):
        cells = [f"`{f.path}`", f.variant or "", ", ".join(f.actors), f.provenance]
        for d in DIMENSIONS:
            text = _cell(row.text(d))
            cells.append(f"**{text}**" if text and d == row.primary_dimension else text)
        out.append("| " + " | ".join(cells) + " |")
    out += ["", "Bold cells mark the primary dimension of each element.", "", "## Interaction flags", ""]
    if report.flags:
        for fl in report.flags:
            refs = ", ".join(f"#{i + 1}" for i in fl.findings)
            out.append(f"- **{fl.kind}** (findings {refs}): {fl.narrative}")
    else:
        out.append("None.")
    out += ["", "## Analyst notes", ""]
    noted = [(i, f) for i, f in enumerate(report.findings) if f.note]
    if noted or report.notes:
        out += [f"- #{i + 1} `{f.path}`: {f.note}" for i, f in noted]
        out += [f"- {n}" for n in report.notes]
    else:
        out.append("None.")
    if report.events:
        out += ["", "## Detected events", ""]
        out += [f"- {ev.kind} [{ev.t0:.2f}, {ev.t1:.2f}] {', '.join(ev.actors)}: {ev.evidence}" for ev in report.events]
    sc = report.score
    out += ["", "## Score", "", "| Dimension | Present | Primary | Weight |", "|---|---|---|---|"]
    for d in DIMENSIONS:
        out.append(f"| {_label(d)} | {sc.per_dimension[d]} | {sc.primary_hits[d]} | {sc.weights[d]:g} |")
    out += ["", f"Total: {sc.total}. Weighted total: {sc.weighted_total:g}.", "", "## Summary", "", report.summary, ""]
    return "\n".join(out)


def render_report(report: AnalysisReport, fmt: str = "markdown") -> bytes:
    if fmt == "json":
        return (json.dumps(report_to_dict(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt == "markdown":
        return _markdown(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r} (expected one of {', '.join(FORMATS)})")
