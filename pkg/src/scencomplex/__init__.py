"""Complexity analysis of traffic scenarios against a hazard-element taxonomy."""

from .analysis import (
    AnalysisReport,
    ComplexityScore,
    ElementFinding,
    InteractionFlag,
    analyze,
    apply_interaction_rules,
    consolidate,
    render_report,
    report_from_json,
    score,
)
from .coverage import (
    CompatibilityRule,
    ScenarioSkeleton,
    SkeletonError,
    SuiteCoverage,
    coverage,
    default_rules,
    gaps,
    generate_skeletons,
)
from .detectors import (
    DetectedEvent,
    DetectorConfig,
    ElementSuggestion,
    detect_all,
    detect_kinematic_events,
    detect_occlusions,
    detect_rule_violations,
    suggest_elements,
)
from .diagnostics import Diagnostic, DiagnosticError
from .scenario import (
    Scenario,
    ScenarioSyntaxError,
    parse_scenario,
    parse_scenario_file,
    pose_at,
    serialize_scenario,
    validate_scenario,
)
from .taxonomy import (
    DIMENSIONS,
    NORMATIVE_PATHS,
    PARTS,
    TaxonomyCatalog,
    default_catalog,
    list_paths,
    load_catalog,
    lookup,
    validate_catalog,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport", "CompatibilityRule", "ComplexityScore", "DIMENSIONS", "DetectedEvent",
    "DetectorConfig", "Diagnostic", "DiagnosticError", "ElementFinding", "ElementSuggestion",
    "InteractionFlag", "NORMATIVE_PATHS", "PARTS", "Scenario", "ScenarioSkeleton",
    "ScenarioSyntaxError", "SkeletonError", "SuiteCoverage", "TaxonomyCatalog", "analyze",
    "apply_interaction_rules", "consolidate", "coverage", "default_catalog", "default_rules",
    "detect_all", "detect_kinematic_events", "detect_occlusions", "detect_rule_violations",
    "gaps", "generate_skeletons", "list_paths", "load_catalog", "lookup", "parse_scenario",
    "parse_scenario_file", "pose_at", "render_report", "report_from_json", "score",
    "serialize_scenario", "suggest_elements", "validate_catalog", "validate_scenario",
]
