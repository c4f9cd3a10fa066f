"""The three code-checkable report constraints.

C1: abnormal regions must be referenced in the reasoning text, and progression
    must be cited whenever a severity threshold is crossed.
C2: neurodegeneration is irreversible — a label two or more severity levels
    milder than the prior label is implausible.
C3: change direction and threshold-crossing flag must cohere per region.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .registry import ATROPHY, Registry, SynonymTable
from .report import ChangeDirection, Severity, StructuredReport

DEFAULT_PROGRESSION_LEXICON = [
    "progress", "worsen", "increase", "atrophy since", "interval change",
]

VIOLATION = "violation"
WARNING = "warning"


class MissingPriorError(ValueError):
    """Raised when a longitudinal constraint is checked without prior labels."""


@dataclass(frozen=True)
class ConstraintFinding:
    constraint: str  # "C1" / "C2" / "C3"
    region: str
    description: str
    severity: str = VIOLATION

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "region": self.region,
                "description": self.description, "severity": self.severity}


PriorContext = dict[str, Severity]


def _sentences(text: str) -> list[str]:
    return [s.strip().lower() for s in re.split(r"[.!?\n]+", text) if s.strip()]


def check_c1(report: StructuredReport, synonyms: SynonymTable,
             registry: Registry,
             lexicon: list[str] | None = None) -> list[ConstraintFinding]:
    """Reasoning must mention every abnormal region; crossed regions need a
    progression term in the same sentence as a mention of that region."""
    lexicon = [t.lower() for t in (lexicon or DEFAULT_PROGRESSION_LEXICON)]
    text = report.reasoning_text
    sentences = _sentences(text)
    findings: list[ConstraintFinding] = []

    for a in report.regions:
        if a.label is not Severity.NORMAL and not synonyms.mentions(a.region, text):
            findings.append(ConstraintFinding(
                "C1", a.region,
                f"{a.region} labeled {a.label.json_name} but never referenced "
                "in the reasoning text"))

    for a in report.regions:
        if not a.threshold_crossed:
            continue
        terms = synonyms.terms(a.region)
        cited = any(
            any(t in s for t in terms) and any(p in s for p in lexicon)
            for s in sentences
        )
        if not cited:
            findings.append(ConstraintFinding(
                "C1", a.region,
                f"{a.region} crossed a severity threshold but no progression "
                "term co-occurs with its mention"))
    return findings


def check_c2(report: StructuredReport, prior: PriorContext) -> list[ConstraintFinding]:
    """Flag any region whose current label is two or more severity levels
    milder than the prior label."""
    if prior is None:
        raise MissingPriorError("C2 requires prior labels (follow-up visit)")
    findings = []
    for a in report.regions:
        p = prior.get(a.region)
        if p is None:
            continue
        if int(p) - int(a.label) >= 2:
            findings.append(ConstraintFinding(
                "C2", a.region,
                f"{a.region}: {p.json_name} -> {a.label.json_name} improvement "
                "of two severity levels is biologically implausible"))
    return findings


def _required_progressive(region: str, registry: Registry) -> ChangeDirection:
    if registry.spec(region).direction == ATROPHY:
        return ChangeDirection.PROGRESSIVE_ATROPHY
    return ChangeDirection.PROGRESSIVE_ENLARGEMENT


def check_c3(report: StructuredReport, prior: PriorContext,
             registry: Registry) -> list[ConstraintFinding]:
    """Per-region coherence of (prior, current, threshold_crossed, direction):

    (a) threshold_crossed must equal (current != prior);
    (b) a crossed, worsened region must carry the progressive direction that
        matches its anatomy;
    (c) a stable direction is incompatible with a crossing — a violation for
        worsening, downgraded to a warning for the tolerated one-level
        improvement (as is any direction on such an improvement).
    """
    if prior is None:
        raise MissingPriorError("C3 requires prior labels (follow-up visit)")
    findings = []
    for a in report.regions:
        p = prior.get(a.region)
        if p is None or a.threshold_crossed is None or a.change_direction is None:
            continue
        changed = a.label != p
        if a.threshold_crossed != changed:
            findings.append(ConstraintFinding(
                "C3", a.region,
                f"{a.region}: threshold_crossed={a.threshold_crossed} but label "
                f"{'changed' if changed else 'did not change'} "
                f"({p.json_name} -> {a.label.json_name})"))
        worsened = int(a.label) > int(p)
        improved_one = int(p) - int(a.label) == 1
        if a.threshold_crossed and worsened:
            required = _required_progressive(a.region, registry)
            if a.change_direction is not required:
                findings.append(ConstraintFinding(
                    "C3", a.region,
                    f"{a.region} worsened with a crossing but direction is "
                    f"{a.change_direction.value}, expected {required.value}"))
        elif a.threshold_crossed and improved_one:
            findings.append(ConstraintFinding(
                "C3", a.region,
                f"{a.region} improved one level with a crossing; direction "
                f"{a.change_direction.value} noted", severity=WARNING))
        elif a.change_direction is ChangeDirection.STABLE and a.threshold_crossed:
            findings.append(ConstraintFinding(
                "C3", a.region,
                f"{a.region}: stable direction is inconsistent with "
                "threshold_crossed=true"))
    return findings
