"""Structured report data model: parsing raw model output (JSON object plus a
trailing "[Diagnostic Summary]" paragraph), schema validation, and canonical
serialization."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .registry import Registry

SUMMARY_MARKER = "[Diagnostic Summary]"


class Severity(enum.IntEnum):
    NORMAL = 0
    MILD = 1
    SEVERE = 2

    @classmethod
    def from_name(cls, name: str) -> "Severity":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown severity {name!r}") from None

    @property
    def json_name(self) -> str:
        return self.name.lower()


class Diagnosis(enum.IntEnum):
    CN = 0
    MCI = 1
    DEMENTIA = 2

    @classmethod
    def from_name(cls, name: str) -> "Diagnosis":
        key = name.strip().upper()
        if key == "DEMENTIA":
            return cls.DEMENTIA
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown diagnosis {name!r}") from None

    @property
    def json_name(self) -> str:
        return "Dementia" if self is Diagnosis.DEMENTIA else self.name


class ChangeDirection(str, enum.Enum):
    STABLE = "stable"
    PROGRESSIVE_ATROPHY = "progressive_atrophy"
    PROGRESSIVE_ENLARGEMENT = "progressive_enlargement"


class VisitKind(str, enum.Enum):
    BASELINE = "baseline"
    FOLLOW_UP = "follow_up"


class ParseStatus(str, enum.Enum):
    VALID = "valid"
    INVALID_JSON = "invalid_json"
    SCHEMA_VIOLATION = "schema_violation"


@dataclass(frozen=True)
class RegionAssessment:
    region: str
    label: Severity
    confidence: float
    change_direction: ChangeDirection | None = None  # follow-up only
    threshold_crossed: bool | None = None  # follow-up only


@dataclass(frozen=True)
class StructuredReport:
    imaging_observations: str
    clinical_integration: str
    regions: tuple[RegionAssessment, ...]
    diagnosis: Diagnosis
    diagnosis_confidence: float
    summary: str
    # Textual order of top-level keys as seen in the raw output; None when the
    # report was built programmatically. Excluded from equality so that
    # parse(serialize(r)) == r holds field-for-field on the content.
    raw_key_order: tuple[str, ...] | None = field(default=None, compare=False)

    @property
    def visit_kind(self) -> VisitKind:
        has_long = all(r.change_direction is not None for r in self.regions)
        return VisitKind.FOLLOW_UP if has_long and self.regions else VisitKind.BASELINE

    @property
    def reasoning_text(self) -> str:
        return self.imaging_observations + "\n" + self.clinical_integration

    def region_map(self) -> dict[str, RegionAssessment]:
        return {r.region: r for r in self.regions}


@dataclass(frozen=True)
class ParseOutcome:
    status: ParseStatus
    report: StructuredReport | None = None
    diagnostics: tuple[str, ...] = ()

    @property
    def is_valid(self) -> bool:
        return self.status is ParseStatus.VALID


_REQUIRED_KEYS = (
    "imaging_observations",
    "clinical_integration",
    "regions",
    "diagnosis",
    "diagnosis_confidence",
)

_SEVERITY_NAMES = {"normal", "mild", "severe"}
_DIRECTION_NAMES = {d.value for d in ChangeDirection}


def _extract_json_object(raw: str) -> tuple[dict | None, int, str | None]:
    """Find the first balanced top-level JSON object in arbitrary text.

    Returns (object, end_index, error). Tolerates leading/trailing prose by
    trying each '{' position in turn.
    """
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    last_err = None
    while pos != -1:
        try:
            obj, end = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError as exc:
            last_err = str(exc)
        else:
            if isinstance(obj, dict):
                return obj, end, None
            last_err = "top-level JSON value is not an object"
        pos = raw.find("{", pos + 1)
    return None, -1, last_err or "no JSON object found"


def _validate_region_entry(entry: object, idx: int, visit_kind: VisitKind,
                           registry: Registry, errors: list[str]) -> RegionAssessment | None:
    if not isinstance(entry, dict):
        errors.append(f"regions[{idx}]: expected an object")
        return None
    name = entry.get("region")
    if not isinstance(name, str):
        errors.append(f"regions[{idx}]: missing or non-string 'region'")
        return None
    if name not in registry:
        errors.append(f"regions[{idx}]: unknown region {name!r}")
        return None

    ok = True
    label_raw = entry.get("label")
    label = None
    if not isinstance(label_raw, str) or label_raw.lower() not in _SEVERITY_NAMES:
        errors.append(
            f"region {name}: label {label_raw!r} not one of normal/mild/severe")
        ok = False
    else:
        label = Severity.from_name(label_raw)

    conf = entry.get("confidence")
    if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not 0.0 <= conf <= 1.0:
        errors.append(f"region {name}: confidence {conf!r} not in [0, 1]")
        ok = False

    direction = None
    crossed = None
    if visit_kind is VisitKind.FOLLOW_UP:
        dir_raw = entry.get("change_direction")
        if not isinstance(dir_raw, str) or dir_raw not in _DIRECTION_NAMES:
            errors.append(
                f"region {name}: follow-up requires change_direction in "
                f"{sorted(_DIRECTION_NAMES)}, got {dir_raw!r}")
            ok = False
        else:
            direction = ChangeDirection(dir_raw)
        crossed_raw = entry.get("threshold_crossed")
        if not isinstance(crossed_raw, bool):
            errors.append(
                f"region {name}: follow-up requires boolean threshold_crossed, "
                f"got {crossed_raw!r}")
            ok = False
        else:
            crossed = crossed_raw
    else:
        for key in ("change_direction", "threshold_crossed"):
            if key in entry:
                errors.append(f"region {name}: {key} not allowed on a baseline visit")
                ok = False

    if not ok:
        return None
    return RegionAssessment(name, label, float(conf), direction, crossed)


def parse_raw_output(raw: str, visit_kind: VisitKind | str,
                     registry: Registry) -> ParseOutcome:
    """Parse arbitrary model output into a validated StructuredReport.

    Never raises on malformed input: every input maps to a ParseOutcome.
    """
    visit_kind = VisitKind(visit_kind)
    obj, end, err = _extract_json_object(raw)
    if obj is None:
        return ParseOutcome(ParseStatus.INVALID_JSON, diagnostics=(f"invalid JSON: {err}",))

    notes: list[str] = []
    tail = raw[end:]
    marker_at = tail.find(SUMMARY_MARKER)
    if marker_at == -1:
        summary = ""
        notes.append(f"no {SUMMARY_MARKER} marker after the JSON object; summary is empty")
    else:
        summary = tail[marker_at + len(SUMMARY_MARKER):].strip()

    errors: list[str] = []
    for key in _REQUIRED_KEYS:
        if key not in obj:
            errors.append(f"missing required key {key!r}")
    for key in obj:
        if key not in _REQUIRED_KEYS:
            notes.append(f"unknown top-level key {key!r} ignored")

    obs = obj.get("imaging_observations", "")
    integ = obj.get("clinical_integration", "")
    for field_name, value in (("imaging_observations", obs), ("clinical_integration", integ)):
        if field_name in obj and not isinstance(value, str):
            errors.append(f"{field_name} must be a string")

    dx = None
    dx_raw = obj.get("diagnosis")
    if "diagnosis" in obj:
        try:
            dx = Diagnosis.from_name(dx_raw) if isinstance(dx_raw, str) else None
        except ValueError:
            dx = None
        if dx is None:
            errors.append(f"diagnosis {dx_raw!r} not one of CN/MCI/Dementia")

    dx_conf = obj.get("diagnosis_confidence")
    if "diagnosis_confidence" in obj:
        if not isinstance(dx_conf, (int, float)) or isinstance(dx_conf, bool) \
                or not 0.0 <= dx_conf <= 1.0:
            errors.append(f"diagnosis_confidence {dx_conf!r} not in [0, 1]")
            dx_conf = None

    assessments: list[RegionAssessment] = []
    regions_raw = obj.get("regions")
    if "regions" in obj:
        if not isinstance(regions_raw, list):
            errors.append("regions must be a list")
        else:
            for i, entry in enumerate(regions_raw):
                parsed = _validate_region_entry(entry, i, visit_kind, registry, errors)
                if parsed is not None:
                    assessments.append(parsed)
            seen = [a.region for a in assessments]
            dup = {r for r in seen if seen.count(r) > 1}
            for r in sorted(dup):
                errors.append(f"duplicate assessment for region {r!r}")
            missing = [r for r in registry.ids() if r not in seen]
            for r in missing:
                errors.append(f"missing assessment for region {r!r}")

    if errors:
        return ParseOutcome(ParseStatus.SCHEMA_VIOLATION,
                            diagnostics=tuple(errors + notes))

    report = StructuredReport(
        imaging_observations=obs,
        clinical_integration=integ,
        regions=tuple(assessments),
        diagnosis=dx,
        diagnosis_confidence=float(dx_conf),
        summary=summary,
        raw_key_order=tuple(obj.keys()),
    )
    return ParseOutcome(ParseStatus.VALID, report=report, diagnostics=tuple(notes))


def serialize_report(report: StructuredReport) -> str:
    """Canonical wire form: JSON object + summary marker paragraph.

    parse_raw_output(serialize_report(r)) reproduces r field-for-field.
    """
    regions = []
    for a in report.regions:
        entry: dict = {
            "region": a.region,
            "label": a.label.json_name,
            "confidence": a.confidence,
        }
        if a.change_direction is not None:
            entry["change_direction"] = a.change_direction.value
        if a.threshold_crossed is not None:
            entry["threshold_crossed"] = a.threshold_crossed
        regions.append(entry)
    obj = {
        "imaging_observations": report.imaging_observations,
        "clinical_integration": report.clinical_integration,
        "regions": regions,
        "diagnosis": report.diagnosis.json_name,
        "diagnosis_confidence": report.diagnosis_confidence,
    }
    body = json.dumps(obj, indent=2)
    return f"{body}\n\n{SUMMARY_MARKER} {report.summary}".rstrip()


def lint_reasoning_first(report: StructuredReport) -> list[str]:
    """Warn (never fail) when verdict keys precede reasoning keys in the raw
    textual key order."""
    order = report.raw_key_order
    if order is None:
        return []
    warnings = []
    reasoning = [k for k in ("imaging_observations", "clinical_integration") if k in order]
    verdict = [k for k in ("regions", "diagnosis", "diagnosis_confidence") if k in order]
    if not reasoning or not verdict:
        return []
    last_reasoning = max(order.index(k) for k in reasoning)
    first_verdict = min(order.index(k) for k in verdict)
    if first_verdict < last_reasoning:
        offending = order[first_verdict]
        warnings.append(
            f"key {offending!r} precedes reasoning text in the raw output; "
            "reasoning-first ordering expected")
    return warnings
