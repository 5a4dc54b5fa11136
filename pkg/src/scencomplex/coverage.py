"""Taxonomy coverage over a scenario suite, gap listing and skeleton generation.

A skeleton is a bundle of mutually compatible taxonomy elements meant as a starting
point for authoring a new test scenario. Tracks and geometry are left to the author.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from .analysis import AnalysisReport
from .diagnostics import Diagnostic, DiagnosticError
from .scenario import ACTOR_CLASSES
from .taxonomy import PARTS, TaxonomyCatalog, is_prefix

RULE_KINDS = ("requires", "excludes")


@dataclass(frozen=True)
class SuiteCoverage:
    per_leaf: Mapping[str, int]
    per_part: Mapping[str, Tuple[int, int]]
    scenarios: Tuple[str, ...]
    per_variant: Mapping[str, int]  # "path:variant" -> hits, auxiliary

    def __post_init__(self) -> None:
        for name in ("per_leaf", "per_part", "per_variant"):
            value = getattr(self, name)
            if not isinstance(value, MappingProxyType):
                object.__setattr__(self, name, MappingProxyType(dict(value)))

    @property
    def covered(self) -> Tuple[str, ...]:
        return tuple(p for p, n in self.per_leaf.items() if n > 0)

    def to_dict(self) -> dict:
        return {
            "scenarios": list(self.scenarios),
            "per_leaf": dict(self.per_leaf),
            "per_part": {p: {"covered": c, "total": t} for p, (c, t) in self.per_part.items()},
            "per_variant": dict(self.per_variant),
            "covered": len(self.covered),
            "total": len(self.per_leaf),
        }


def coverage(reports: Iterable[AnalysisReport], catalog: TaxonomyCatalog) -> SuiteCoverage:
    per_leaf = {p: 0 for p in catalog.entries}
    per_variant = {f"{p}:{v}": 0 for p, e in catalog.entries.items() for v in e.variants}
    ids = []
    for r in reports:
        ids.append(r.scenario_id)
        for f in r.findings:
            if f.path in per_leaf:
                per_leaf[f.path] += 1
            if f.variant and f"{f.path}:{f.variant}" in per_variant:
                per_variant[f"{f.path}:{f.variant}"] += 1
    per_part = {}
    for part in PARTS:
        leaves = [p for p, e in catalog.entries.items() if e.part == part]
        per_part[part] = (sum(1 for p in leaves if per_leaf[p] > 0), len(leaves))
    return SuiteCoverage(per_leaf, per_part, tuple(ids), per_variant)


def gaps(c: SuiteCoverage, catalog: TaxonomyCatalog) -> List[str]:
    return sorted(p for p in catalog.entries if c.per_leaf.get(p, 0) == 0)


def format_coverage(c: SuiteCoverage) -> str:
    width = max(len(p) for p in PARTS)
    lines = [f"{'part':<{width}}  covered  total", f"{'-' * width}  -------  -----"]
    for part, (cov, total) in c.per_part.items():
        lines.append(f"{part:<{width}}  {cov:>7}  {total:>5}")
    cov = sum(v[0] for v in c.per_part.values())
    total = sum(v[1] for v in c.per_part.values())
    touched = sum(1 for v in c.per_part.values() if v[0] > 0)
    lines.append(f"{'all':<{width}}  {cov:>7}  {total:>5}")
    lines.append(f"{len(c.scenarios)} scenarios; {touched}/{len(c.per_part)} parts touched")
    return "\n".join(lines) + "\n"


# Compatibility rules ---------------------------------------------------------------------

@dataclass(frozen=True)
class CompatibilityRule:
    """``requires``: an element under ``subject`` needs ``object`` (actor class or element prefix).

    ``excludes``: an element under ``subject`` cannot share a skeleton with ``object``.
    ``role`` names the actor a class requirement adds, for example ``occluder``.
    """

    kind: str
    subject: str
    object: str
    role: str = ""

    @property
    def on_actor(self) -> bool:
        return self.object in ACTOR_CLASSES

    def check(self, catalog: TaxonomyCatalog) -> Optional[str]:
        if self.kind not in RULE_KINDS:
            return f"unknown rule kind {self.kind!r} (expected requires or excludes)"
        if not any(is_prefix(self.subject, p) for p in catalog.entries):
            return f"rule subject {self.subject!r} matches no catalog element"
        if not self.on_actor and not any(is_prefix(self.object, p) for p in catalog.entries):
            return f"rule object {self.object!r} is neither an actor class nor a catalog prefix"
        return None


class RuleError(DiagnosticError):
    pass


class SkeletonError(ValueError):
    def __init__(self, leaf: str, reason: str):
        self.leaf = leaf
        super().__init__(f"cannot place {leaf}: {reason}")


def _occlusion_leaves(catalog: TaxonomyCatalog) -> List[str]:
    return [p for p in catalog.entries if p.endswith(".visibility") and p != "env.visibility"]


def default_rules(catalog: TaxonomyCatalog) -> List[CompatibilityRule]:
    rules = [CompatibilityRule("requires", p, "vehicle", "occluder") for p in _occlusion_leaves(catalog)]
    rules.append(CompatibilityRule("requires", "tmz", "object", "work_zone"))
    rules.append(CompatibilityRule("excludes", "tmz", "static_env.physical.infra.changes"))
    return rules


def load_rules(text: Union[str, bytes], catalog: TaxonomyCatalog, source: str = "") -> List[CompatibilityRule]:
    """Rules file: YAML mapping with a ``rules`` list of {kind, subject, object, role?}."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    diags: List[Diagnostic] = []

    def err(node, message: str) -> None:
        mark = getattr(node, "start_mark", None)
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        diags.append(Diagnostic(line, col, message, source))

    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise RuleError([Diagnostic(mark.line + 1 if mark else None, mark.column + 1 if mark else None, f"invalid YAML: {getattr(exc, 'problem', exc)}", source)])
    if not isinstance(root, yaml.MappingNode):
        raise RuleError([Diagnostic(1, 1, "rules file must be a mapping with a 'rules' list", source)])
    items = None
    for k, v in root.value:
        if k.value == "rules":
            items = v
        else:
            err(k, f"unknown key {k.value!r}")
    if not isinstance(items, yaml.SequenceNode):
        err(root, "missing 'rules' list")
        raise RuleError(diags)
    rules = []
    for node in items.value:
        if not isinstance(node, yaml.MappingNode):
            err(node, "each rule must be a mapping")
            continue
        fields: Dict[str, str] = {}
        for k, v in node.value:
            if k.value not in ("kind", "subject", "object", "role"):
                err(k, f"unknown rule key {k.value!r}")
            elif not isinstance(v, yaml.ScalarNode):
                err(v, f"{k.value} must be a string")
            else:
                fields[k.value] = str(v.value)
        missing = [k for k in ("kind", "subject", "object") if k not in fields]
        if missing:
            err(node, f"rule is missing {', '.join(missing)}")
            continue
        rule = CompatibilityRule(fields["kind"], fields["subject"], fields["object"], fields.get("role", ""))
        problem = rule.check(catalog)
        if problem:
            err(node, problem)
            continue
        rules.append(rule)
    if diags:
        raise RuleError(diags)
    return rules


# Skeletons -------------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSkeleton:
    id: str
    elements: Tuple[Tuple[str, Optional[str]], ...]
    rationale: str
    required_actors: Tuple[str, ...]

    @property
    def paths(self) -> Tuple[str, ...]:
        return tuple(p for p, _ in self.elements)


def required_actors(paths: Sequence[str], rules: Sequence[CompatibilityRule]) -> Tuple[str, ...]:
    """Actors as ``class:role``; the ego vehicle always comes first."""
    found = set()
    for p in paths:
        parts = p.split(".")
        if parts[0] == "actor" and len(parts) > 1:
            found.add(f"{parts[1]}:target")
        for r in rules:
            if r.kind == "requires" and r.on_actor and is_prefix(r.subject, p):
                found.add(f"{r.object}:{r.role or 'required'}")
    return ("vehicle:ego",) + tuple(sorted(found))


def _classes(actors: Sequence[str]) -> set:
    return {a.split(":", 1)[0] for a in actors}


def violations(paths: Sequence[str], rules: Sequence[CompatibilityRule]) -> List[str]:
    """Every rule the element set breaks; empty means the set is a valid skeleton."""
    out = []
    classes = _classes(required_actors(paths, rules))
    for r in rules:
        subjects = [p for p in paths if is_prefix(r.subject, p)]
        if not subjects:
            continue
        if r.kind == "requires" and not r.on_actor:
            if not any(is_prefix(r.object, p) for p in paths):
                out.append(f"{subjects[0]} requires an element under {r.object}")
        elif r.kind == "excludes":
            if r.on_actor:
                if r.object in classes:
                    out.append(f"{subjects[0]} excludes {r.object} actors")
            else:
                clash = [p for p in paths if is_prefix(r.object, p)]
                if clash:
                    out.append(f"{subjects[0]} excludes {clash[0]}")
    return out


def _pair_ok(a: str, b: str, rules: Sequence[CompatibilityRule]) -> bool:
    for r in rules:
        if r.kind != "excludes" or r.on_actor:
            continue
        if (is_prefix(r.subject, a) and is_prefix(r.object, b)) or (is_prefix(r.subject, b) and is_prefix(r.object, a)):
            return False
    return True


def _closure(bundle: List[str], pool: Sequence[str], limit: int, rules: Sequence[CompatibilityRule]) -> Optional[List[str]]:
    """Add elements from ``pool`` until element requirements hold; None when impossible."""
    out = list(bundle)
    for _ in range(limit + 1):
        missing = [r for r in rules if r.kind == "requires" and not r.on_actor
                   and any(is_prefix(r.subject, p) for p in out) and not any(is_prefix(r.object, p) for p in out)]
        if not missing:
            return out if not violations(out, rules) else None
        if len(out) >= limit:
            return None
        options = [p for p in pool if is_prefix(missing[0].object, p) and p not in out and all(_pair_ok(p, q, rules) for q in out)]
        if not options:
            return None
        out.append(options[0])
    return None


def _variant(path: str, catalog: TaxonomyCatalog, variant_counts: Mapping[str, int]) -> Optional[str]:
    variants = catalog.entries[path].variants
    if not variants:
        return None
    return min(variants, key=lambda v: (variant_counts.get(f"{path}:{v}", 0), variants.index(v)))


def generate_skeletons(
    gap_list: Sequence[str],
    catalog: TaxonomyCatalog,
    rules: Optional[Sequence[CompatibilityRule]] = None,
    seed: int = 0,
    max_elements_per_skeleton: int = 4,
    variant_counts: Optional[Mapping[str, int]] = None,
) -> List[ScenarioSkeleton]:
    """Greedy cover of ``gap_list`` with compatible element bundles."""
    if max_elements_per_skeleton < 1:
        raise ValueError("max_elements_per_skeleton must be >= 1")
    rules = list(default_rules(catalog) if rules is None else rules)
    for r in rules:
        problem = r.check(catalog)
        if problem:
            raise ValueError(problem)
    unknown = [p for p in gap_list if p not in catalog.entries]
    if unknown:
        raise ValueError(f"unknown element path {unknown[0]!r}")
    rng = random.Random(seed)
    counts = dict(variant_counts or {})
    remaining = sorted(set(gap_list))
    everything = list(catalog.entries)
    skeletons: List[ScenarioSkeleton] = []
    limit = max_elements_per_skeleton
    while remaining:
        partners = {p: [q for q in remaining if q != p and _pair_ok(p, q, rules)] for p in remaining}
        anchor = min(remaining, key=lambda p: (-len(partners[p]), p))
        pool = remaining + [p for p in everything if p not in remaining]
        bundle = _closure([anchor], pool, limit, rules)
        if bundle is None:
            reasons = violations([anchor], rules) or ["its requirements cannot be met within the skeleton size"]
            raise SkeletonError(anchor, reasons[0])
        order = list(partners[anchor])
        rng.shuffle(order)
        for q in order:
            if len(bundle) >= limit:
                break
            if q in bundle or not all(_pair_ok(q, b, rules) for b in bundle):
                continue
            grown = _closure(bundle + [q], pool, limit, rules)
            if grown is not None:
                bundle = grown
        taken = [p for p in bundle if p in remaining]
        remaining = [p for p in remaining if p not in bundle]
        elements = []
        for p in bundle:
            v = _variant(p, catalog, counts)
            if v is not None:
                counts[f"{p}:{v}"] = counts.get(f"{p}:{v}", 0) + 1
            elements.append((p, v))
        rationale = (
            f"anchor {anchor} has {len(partners[anchor])} compatible uncovered partners; "
            f"closes {len(taken)} gaps: {', '.join(taken)}"
        )
        skeletons.append(ScenarioSkeleton(
            f"skel_s{seed}_{len(skeletons) + 1:03d}", tuple(elements), rationale, required_actors(bundle, rules),
        ))
    return skeletons


def skeleton_to_dsl(sk: ScenarioSkeleton) -> str:
    """Element-only scenario file; tracks and geometry are left to the author."""
    lines = [
        f"# Generated skeleton {sk.id}.",
        f"# {sk.rationale}",
        "# Required actors (class:role): " + ", ".join(sk.required_actors),
        "# Declare the road, actors and tracks, then attach actors to the elements.",
        f'scenario "{sk.id}" "Skeleton {sk.id}"',
    ]
    for path, variant in sk.elements:
        lines.append(f"element path={path}" + (f" variant={variant}" if variant else ""))
    return "\n".join(lines) + "\n"
