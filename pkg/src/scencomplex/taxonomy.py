"""Hazard taxonomy catalog: the 46 leaf elements and their six-dimension complexity rows.

The catalog is a YAML document with a top-level ``version`` and ``entries`` list.
Loading goes through ``yaml.compose`` so schema problems can be reported with the
line and column of the offending node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import IO, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from .diagnostics import Diagnostic, DiagnosticError

DIMENSIONS: Tuple[str, ...] = (
    "position_state_estimation",
    "detection_tracking",
    "context_awareness",
    "prediction",
    "goal_management",
    "planning",
)

DIMENSION_GROUPS: Tuple[Tuple[str, Tuple[str, str]], ...] = (
    ("perception", ("position_state_estimation", "detection_tracking")),
    ("situation analysis", ("context_awareness", "prediction")),
    ("decision making", ("goal_management", "planning")),
)

DIMENSION_LABELS: Mapping[str, str] = MappingProxyType({
    "position_state_estimation": "Position & State Estimation",
    "detection_tracking": "Detection & Tracking",
    "context_awareness": "Context Awareness",
    "prediction": "Prediction",
    "goal_management": "Goal Management",
    "planning": "Planning",
})

PARTS: Tuple[str, ...] = ("static_env", "tmz", "actor", "env")

PART_LABELS: Mapping[str, str] = MappingProxyType({
    "static_env": "Static Environment",
    "tmz": "Traffic Management Zone",
    "actor": "Traffic Actors",
    "env": "Environmental Conditions",
})

_SEGMENT = re.compile(r"[a-z][a-z0-9_]*\Z")
_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")


def _expand(prefix: str, leaves: str) -> List[str]:
    return [f"{prefix}.{leaf}" for leaf in leaves.split()]


NORMATIVE_PATHS: Tuple[str, ...] = tuple(
    _expand(
        "static_env.physical",
        "road_visibility road_conditions interference_zones infra.lanes infra.junction_signalized "
        "infra.junction_unsignalized infra.special_zones infra.changes markings_legibility others",
    )
    + _expand("static_env.signs", "legibility visibility changes")
    + _expand("static_env.lights", "type legibility visibility changes")
    + _expand("tmz", "work_zone other human_directed visibility")
    + _expand(
        "actor.vehicle",
        "lights type.nominal type.special static.nominal static.against_rules static.visibility "
        "dynamic.nominal dynamic.erratic dynamic.against_rules dynamic.visibility",
    )
    + _expand(
        "actor.pedestrian",
        "type static.nominal static.against_rules static.visibility dynamic.nominal "
        "dynamic.against_rules dynamic.erratic dynamic.visibility",
    )
    + _expand(
        "actor.object",
        "static.permanent static.temporary static.visibility dynamic.temporary dynamic.visibility",
    )
    + _expand("env", "visibility other")
)


def path_error(path: str) -> Optional[str]:
    """Return why ``path`` is not a well-formed element path, or None if it is."""
    if not isinstance(path, str) or not path:
        return "element path is empty"
    segments = path.split(".")
    for seg in segments:
        if not _SEGMENT.match(seg):
            return f"invalid path segment {seg!r} in {path!r}"
    if segments[0] not in PARTS:
        return f"element path {path!r} must start with one of {', '.join(PARTS)}"
    return None


def is_prefix(prefix: str, path: str) -> bool:
    """Segment-wise prefix test: ``actor.vehicle`` covers ``actor.vehicle.lights``."""
    if not prefix:
        return True
    return path == prefix or path.startswith(prefix + ".")


@dataclass(frozen=True)
class DimensionEntry:
    dimension: str
    text: str

    @property
    def present(self) -> bool:
        return bool(self.text)


@dataclass(frozen=True)
class ElementEntry:
    path: str
    part: str
    title: str
    section: str
    example_categories: Tuple[str, ...]
    examples: Tuple[str, ...]
    variants: Tuple[str, ...]
    dimensions: Tuple[DimensionEntry, ...]
    primary_dimension: str

    def text(self, dimension: str) -> str:
        for entry in self.dimensions:
            if entry.dimension == dimension:
                return entry.text
        raise KeyError(dimension)

    def has(self, dimension: str) -> bool:
        return bool(self.text(dimension))

    @property
    def present_dimensions(self) -> Tuple[str, ...]:
        return tuple(d.dimension for d in self.dimensions if d.present)


@dataclass(frozen=True)
class TaxonomyCatalog:
    version: str
    entries: Mapping[str, ElementEntry]
    notes: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.entries, MappingProxyType):
            object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __contains__(self, path: object) -> bool:
        return path in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def replace_entry(self, entry: ElementEntry) -> "TaxonomyCatalog":
        entries = dict(self.entries)
        entries[entry.path] = entry
        return TaxonomyCatalog(self.version, entries, self.notes)

    def without(self, path: str) -> "TaxonomyCatalog":
        entries = {p: e for p, e in self.entries.items() if p != path}
        return TaxonomyCatalog(self.version, entries, self.notes)


class CatalogError(DiagnosticError):
    pass


class UnknownElementError(KeyError):
    def __init__(self, path: str, candidates: Sequence[str]):
        self.path = path
        self.candidates = list(candidates)
        hint = f"; nearest: {', '.join(self.candidates)}" if self.candidates else ""
        super().__init__(f"unknown element path {path!r}{hint}")

    def __str__(self) -> str:
        return self.args[0]


# Loading ---------------------------------------------------------------------------------

_ENTRY_KEYS = (
    "path", "section", "title", "part", "example_categories", "examples",
    "variants", "primary_dimension", "dimensions",
)


class _Loader:
    def __init__(self, name: str):
        self.name = name
        self.diags: List[Diagnostic] = []

    def err(self, node: Optional[yaml.Node], message: str) -> None:
        if node is None:
            self.diags.append(Diagnostic(None, None, message, self.name))
        else:
            mark = node.start_mark
            self.diags.append(Diagnostic(mark.line + 1, mark.column + 1, message, self.name))

    def mapping(self, node: yaml.Node, what: str) -> Optional[Dict[str, Tuple[yaml.Node, yaml.Node]]]:
        if not isinstance(node, yaml.MappingNode):
            self.err(node, f"{what} must be a mapping")
            return None
        out: Dict[str, Tuple[yaml.Node, yaml.Node]] = {}
        for key_node, value_node in node.value:
            key = key_node.value if isinstance(key_node, yaml.ScalarNode) else None
            if not isinstance(key, str):
                self.err(key_node, f"{what} keys must be strings")
                continue
            if key in out:
                self.err(key_node, f"duplicate key {key!r} in {what}")
                continue
            out[key] = (key_node, value_node)
        return out

    def string(self, node: yaml.Node, what: str) -> Optional[str]:
        if not isinstance(node, yaml.ScalarNode):
            self.err(node, f"{what} must be a string")
            return None
        if node.tag == "tag:yaml.org,2002:null":
            return ""
        return str(node.value)

    def strings(self, node: yaml.Node, what: str) -> Tuple[str, ...]:
        if isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null":
            return ()
        if not isinstance(node, yaml.SequenceNode):
            self.err(node, f"{what} must be a list of strings")
            return ()
        out = []
        for item in node.value:
            text = self.string(item, f"item of {what}")
            if text is not None:
                out.append(text)
        return tuple(out)

    def entry(self, node: yaml.Node, index: int) -> Optional[ElementEntry]:
        fields = self.mapping(node, f"entry {index + 1}")
        if fields is None:
            return None
        for key, (key_node, _) in fields.items():
            if key not in _ENTRY_KEYS:
                self.err(key_node, f"unknown entry key {key!r}")
        missing = [k for k in ("path", "part", "primary_dimension", "dimensions") if k not in fields]
        if missing:
            self.err(node, f"entry {index + 1} is missing {', '.join(missing)}")
            return None
        before = len(self.diags)

        path_node = fields["path"][1]
        path = self.string(path_node, "path") or ""
        problem = path_error(path)
        if problem:
            self.err(path_node, problem)
        label = path or f"entry {index + 1}"

        part_node = fields["part"][1]
        part = self.string(part_node, "part") or ""
        if part not in PARTS:
            self.err(part_node, f"{label}: unknown part {part!r}")
        elif path and not is_prefix(part, path):
            self.err(part_node, f"{label}: part {part!r} does not match the path")

        def opt_str(key: str) -> str:
            return self.string(fields[key][1], key) or "" if key in fields else ""

        def opt_list(key: str) -> Tuple[str, ...]:
            return self.strings(fields[key][1], key) if key in fields else ()

        variants = opt_list("variants")
        for v in variants:
            if not _IDENT.match(v):
                self.err(fields["variants"][1], f"{label}: invalid variant identifier {v!r}")
        if len(set(variants)) != len(variants):
            self.err(fields["variants"][1], f"{label}: duplicate variant")

        dims_node = fields["dimensions"][1]
        texts = {d: "" for d in DIMENSIONS}
        dims = self.mapping(dims_node, f"{label} dimensions")
        if dims is not None:
            for key, (key_node, value_node) in dims.items():
                if key not in texts:
                    self.err(key_node, f"{label}: unknown dimension {key!r}")
                    continue
                texts[key] = (self.string(value_node, f"dimension {key}") or "").strip()
        dimensions = tuple(DimensionEntry(d, texts[d]) for d in DIMENSIONS)
        if not any(d.present for d in dimensions):
            self.err(dims_node, f"{label}: entry has zero present dimensions")

        primary_node = fields["primary_dimension"][1]
        primary = self.string(primary_node, "primary_dimension") or ""
        if primary not in DIMENSIONS:
            self.err(primary_node, f"{label}: unknown primary_dimension {primary!r}")
        elif not texts[primary]:
            self.err(primary_node, f"{label}: primary_dimension {primary} refers to an empty cell")

        if len(self.diags) > before:
            return None
        return ElementEntry(
            path=path,
            part=part,
            title=opt_str("title"),
            section=opt_str("section"),
            example_categories=opt_list("example_categories"),
            examples=opt_list("examples"),
            variants=variants,
            dimensions=dimensions,
            primary_dimension=primary,
        )


def load_catalog(source: Union[bytes, str, IO], name: str = "<catalog>") -> TaxonomyCatalog:
    """Parse and validate a catalog document.

    Raises CatalogError carrying every positioned diagnostic found. Completeness
    against the normative path list is not enforced here; see ``validate_catalog``.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CatalogError([Diagnostic(None, None, f"not UTF-8 text: {exc}", name)]) from None
    loader = _Loader(name)
    try:
        root = yaml.compose(source)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise CatalogError([Diagnostic(line, col, f"malformed catalog: {getattr(exc, 'problem', exc)}", name)]) from None
    if root is None:
        raise CatalogError([Diagnostic(1, 1, "no entries", name)])
    top = loader.mapping(root, "catalog")
    if top is None:
        raise CatalogError(loader.diags)
    for key, (key_node, _) in top.items():
        if key not in ("version", "entries", "notes"):
            loader.err(key_node, f"unknown top-level key {key!r}")
    version = loader.string(top["version"][1], "version") if "version" in top else None
    if "version" not in top:
        loader.err(root, "missing version")
    entries_node = top.get("entries", (None, None))[1]
    if entries_node is None or (isinstance(entries_node, yaml.SequenceNode) and not entries_node.value) or (
        isinstance(entries_node, yaml.ScalarNode) and entries_node.tag == "tag:yaml.org,2002:null"
    ):
        loader.err(entries_node or root, "no entries")
        raise CatalogError(loader.diags)
    if not isinstance(entries_node, yaml.SequenceNode):
        loader.err(entries_node, "entries must be a list")
        raise CatalogError(loader.diags)
    notes = loader.strings(top["notes"][1], "notes") if "notes" in top else ()

    entries: Dict[str, ElementEntry] = {}
    sections: Dict[str, str] = {}
    for index, node in enumerate(entries_node.value):
        entry = loader.entry(node, index)
        if entry is None:
            continue
        if entry.path in entries:
            loader.err(node, f"duplicate path {entry.path}")
            continue
        if entry.section and entry.section in sections:
            loader.err(node, f"{entry.path}: section {entry.section} already used by {sections[entry.section]}")
            continue
        sections[entry.section] = entry.path
        entries[entry.path] = entry
    if loader.diags:
        raise CatalogError(loader.diags)
    return TaxonomyCatalog(version=version or "", entries=entries, notes=notes)


def load_catalog_file(path: str) -> TaxonomyCatalog:
    with open(path, "rb") as fh:
        return load_catalog(fh.read(), name=str(path))


@lru_cache(maxsize=1)
def default_catalog() -> TaxonomyCatalog:
    """The shipped catalog (cached; catalogs are immutable)."""
    data = resources.files("scencomplex").joinpath("data/catalog.yaml").read_bytes()
    return load_catalog(data, name="catalog.yaml")


def serialize_catalog(catalog: TaxonomyCatalog) -> str:
    """Dump to the documented YAML schema; ``load_catalog`` of the result equals the input."""
    doc: Dict[str, object] = {"version": catalog.version}
    if catalog.notes:
        doc["notes"] = list(catalog.notes)
    doc["entries"] = [
        {
            "path": e.path,
            "section": e.section,
            "title": e.title,
            "part": e.part,
            "example_categories": list(e.example_categories),
            "examples": list(e.examples),
            "variants": list(e.variants),
            "primary_dimension": e.primary_dimension,
            "dimensions": {d.dimension: d.text for d in e.dimensions},
        }
        for e in (catalog.entries[p] for p in sorted(catalog.entries, key=_path_rank))
    ]
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True, width=100)


def _path_rank(path: str) -> Tuple[int, str]:
    try:
        return (NORMATIVE_PATHS.index(path), path)
    except ValueError:
        return (len(NORMATIVE_PATHS), path)


# Queries ---------------------------------------------------------------------------------

def lookup(catalog: TaxonomyCatalog, path: str) -> ElementEntry:
    entry = catalog.entries.get(path)
    if entry is not None:
        return entry
    raise UnknownElementError(path, nearest_paths(catalog, path))


def nearest_paths(catalog: TaxonomyCatalog, path: str, limit: int = 8) -> List[str]:
    """Catalog paths sharing the longest segment prefix with ``path``."""
    wanted = str(path).split(".")
    best, best_len = [], 0
    for candidate in sorted(catalog.entries):
        segs = candidate.split(".")
        n = 0
        while n < min(len(segs), len(wanted)) and segs[n] == wanted[n]:
            n += 1
        if n > best_len:
            best, best_len = [candidate], n
        elif n == best_len and n > 0:
            best.append(candidate)
    return best[:limit]


def list_paths(catalog: TaxonomyCatalog, prefix: str = "") -> List[str]:
    return sorted(p for p in catalog.entries if is_prefix(prefix, p))


def validate_catalog(catalog: TaxonomyCatalog, normative: Iterable[str] = NORMATIVE_PATHS) -> List[Diagnostic]:
    diags: List[Diagnostic] = []

    def bad(message: str) -> None:
        diags.append(Diagnostic(None, None, message, "catalog"))

    sections: Dict[str, str] = {}
    for key in sorted(catalog.entries):
        e = catalog.entries[key]
        if key != e.path:
            bad(f"{key}: keyed under a different path than {e.path}")
        problem = path_error(e.path)
        if problem:
            bad(problem)
        if e.part not in PARTS or not is_prefix(e.part, e.path):
            bad(f"{e.path}: part {e.part!r} does not match the path")
        names = [d.dimension for d in e.dimensions]
        if sorted(names) != sorted(DIMENSIONS) or len(names) != len(DIMENSIONS):
            bad(f"{e.path}: dimensions must list each of the six dimensions exactly once")
        if not any(d.present for d in e.dimensions):
            bad(f"{e.path}: entry has zero present dimensions")
        if e.primary_dimension not in DIMENSIONS:
            bad(f"{e.path}: unknown primary_dimension {e.primary_dimension!r}")
        elif e.primary_dimension not in e.present_dimensions:
            bad(f"{e.path}: primary_dimension {e.primary_dimension} refers to an empty cell")
        if e.section:
            if e.section in sections:
                bad(f"{e.path}: section {e.section} already used by {sections[e.section]}")
            sections[e.section] = e.path
    for path in normative:
        if path not in catalog.entries:
            bad(f"missing normative path {path}")
    return diags
