"""Clinically-weighted report Verifier.

Scores one candidate report against normative ground truth as a discounted
weighted sum of five components: anatomy, diagnosis, longitudinal coherence,
reasoning coherence, and summary alignment.  A diagnosis-error multiplier
discounts the whole score (adjacent error /1.5, non-adjacent /2.0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import constraints
from .constraints import ConstraintFinding, PriorContext
from .normative import Zone
from .registry import Registry, SynonymTable
from .report import (ChangeDirection, Diagnosis, ParseOutcome, Severity,
                     StructuredReport, VisitKind)

COMPONENTS = ("anat", "dx", "long", "reason", "summary")

DEFAULT_DX_KEYWORDS: dict[str, list[str]] = {
    "CN": ["cognitively normal", "no cognitive impairment"],
    "MCI": ["mild cognitive impairment", "mci"],
    "Dementia": ["dementia"],
}

DEFAULT_SEVERITY_KEYWORDS: dict[str, list[str]] = {
    "normal": ["normal", "unremarkable", "no atrophy", "preserved"],
    "mild": ["mild"],
    "severe": ["severe", "marked", "pronounced"],
}


@dataclass(frozen=True)
class RegionTruth:
    """Ground truth for one region at one visit, derived from normative
    labeling; never visible to the generating model."""

    label: Severity
    z: float
    zone: Zone
    prior: Severity | None = None         # follow-up only
    change_direction: ChangeDirection | None = None
    threshold_crossed: bool | None = None


@dataclass(frozen=True)
class GroundTruth:
    visit_kind: VisitKind
    diagnosis: Diagnosis
    regions: dict[str, RegionTruth]

    def prior_context(self) -> PriorContext | None:
        if self.visit_kind is VisitKind.BASELINE:
            return None
        return {r: t.prior for r, t in self.regions.items() if t.prior is not None}

    def to_dict(self) -> dict:
        return {
            "visit_kind": self.visit_kind.value,
            "diagnosis": self.diagnosis.json_name,
            "regions": {
                r: {
                    "label": t.label.json_name,
                    "z": t.z,
                    "zone": t.zone.value,
                    "prior": t.prior.json_name if t.prior is not None else None,
                    "change_direction": (t.change_direction.value
                                         if t.change_direction is not None else None),
                    "threshold_crossed": t.threshold_crossed,
                }
                for r, t in self.regions.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruth":
        regions = {}
        for r, t in data["regions"].items():
            regions[r] = RegionTruth(
                label=Severity.from_name(t["label"]),
                z=float(t["z"]),
                zone=Zone(t["zone"]),
                prior=Severity.from_name(t["prior"]) if t.get("prior") is not None else None,
                change_direction=(ChangeDirection(t["change_direction"])
                                  if t.get("change_direction") is not None else None),
                threshold_crossed=t.get("threshold_crossed"),
            )
        return cls(visit_kind=VisitKind(data["visit_kind"]),
                   diagnosis=Diagnosis.from_name(data["diagnosis"]),
                   regions=regions)


@dataclass(frozen=True)
class VerifierConfig:
    # Component weights; each vector sums to 1 for its visit kind.
    lambdas_followup: dict[str, float] = field(default_factory=lambda: {
        "anat": 0.25, "dx": 0.25, "long": 0.20, "reason": 0.15, "summary": 0.15})
    lambdas_baseline: dict[str, float] = field(default_factory=lambda: {
        "anat": 0.35, "dx": 0.35, "long": 0.0, "reason": 0.15, "summary": 0.15})
    # Diagnosis-error discounts (multiplier M).
    m_correct: float = 1.0
    m_adjacent: float = 1.0 / 1.5
    m_non_adjacent: float = 1.0 / 2.0
    # Anatomical credit.
    adjacent_credit: float = 0.2
    # Tolerance credit is 0.5 + 0.5*(1 - confidence) by default: a hedged
    # boundary error earns more.  Flip to scale with confidence instead.
    tolerance_reward_hedging: bool = True
    # Longitudinal component.
    direction_weight: float = 0.6
    flag_weight: float = 0.4
    reversal_penalty: float = -0.5
    # Summary keyword maps.
    dx_keywords: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_DX_KEYWORDS.items()})
    severity_keywords: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_SEVERITY_KEYWORDS.items()})
    # C1 progression lexicon.
    progression_lexicon: tuple[str, ...] = tuple(constraints.DEFAULT_PROGRESSION_LEXICON)

    def __post_init__(self):
        for name, lam in (("follow-up", self.lambdas_followup),
                          ("baseline", self.lambdas_baseline)):
            if set(lam) != set(COMPONENTS):
                raise ValueError(f"{name} lambdas must cover {COMPONENTS}")
            if any(v < 0 for v in lam.values()):
                raise ValueError(f"{name} lambdas must be non-negative")
            if abs(math.fsum(lam.values()) - 1.0) > 1e-9:
                raise ValueError(f"{name} lambdas must sum to 1")
        for m in (self.m_correct, self.m_adjacent, self.m_non_adjacent):
            if not 0 < m <= 1:
                raise ValueError("discounts must lie in (0, 1]")

    def lambdas(self, visit_kind: VisitKind) -> dict[str, float]:
        return (self.lambdas_baseline if visit_kind is VisitKind.BASELINE
                else self.lambdas_followup)

    def with_lambdas(self, followup: dict[str, float]) -> "VerifierConfig":
        """Derive a config with new follow-up weights; the baseline vector
        reassigns the longitudinal weight equally to anatomy and diagnosis."""
        base = dict(followup)
        shift = base["long"] / 2.0
        base = {"anat": base["anat"] + shift, "dx": base["dx"] + shift,
                "long": 0.0, "reason": base["reason"], "summary": base["summary"]}
        return replace(self, lambdas_followup=dict(followup), lambdas_baseline=base)

    def to_dict(self) -> dict:
        return {
            "lambdas_followup": dict(self.lambdas_followup),
            "lambdas_baseline": dict(self.lambdas_baseline),
            "m_correct": self.m_correct,
            "m_adjacent": self.m_adjacent,
            "m_non_adjacent": self.m_non_adjacent,
            "adjacent_credit": self.adjacent_credit,
            "tolerance_reward_hedging": self.tolerance_reward_hedging,
            "direction_weight": self.direction_weight,
            "flag_weight": self.flag_weight,
            "reversal_penalty": self.reversal_penalty,
            "dx_keywords": {k: list(v) for k, v in self.dx_keywords.items()},
            "severity_keywords": {k: list(v) for k, v in self.severity_keywords.items()},
            "progression_lexicon": list(self.progression_lexicon),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VerifierConfig":
        kwargs = {}
        for key in ("lambdas_followup", "lambdas_baseline", "m_correct", "m_adjacent",
                    "m_non_adjacent", "adjacent_credit", "tolerance_reward_hedging",
                    "direction_weight", "flag_weight", "reversal_penalty",
                    "dx_keywords", "severity_keywords"):
            if key in data:
                kwargs[key] = data[key]
        if "progression_lexicon" in data:
            kwargs["progression_lexicon"] = tuple(data["progression_lexicon"])
        return cls(**kwargs)


@dataclass(frozen=True)
class VerifierScore:
    s_anat: float
    s_dx: float
    s_long: float
    s_reason: float
    s_summary: float
    multiplier: float
    total: float
    region_scores: dict[str, float]
    findings: tuple[ConstraintFinding, ...]
    valid: bool = True

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "total": self.total,
            "multiplier": self.multiplier,
            "components": {"anat": self.s_anat, "dx": self.s_dx, "long": self.s_long,
                           "reason": self.s_reason, "summary": self.s_summary},
            "region_scores": dict(self.region_scores),
            "findings": [f.to_dict() for f in self.findings],
        }


INVALID_SCORE = VerifierScore(0.0, 0.0, 0.0, 0.0, 0.0, multiplier=1.0, total=0.0,
                              region_scores={}, findings=(), valid=False)


def _zone_between(a: Severity, b: Severity) -> Zone:
    pair = {a, b}
    if pair == {Severity.NORMAL, Severity.MILD}:
        return Zone.MILD_BOUNDARY
    if pair == {Severity.MILD, Severity.SEVERE}:
        return Zone.SEVERE_BOUNDARY
    return Zone.NONE


def score_anat(report: StructuredReport, truth: GroundTruth, registry: Registry,
               cfg: VerifierConfig) -> tuple[float, dict[str, float]]:
    """Weighted per-region label agreement with tolerance-zone partial credit."""
    assessed = report.region_map()
    if set(assessed) != set(truth.regions) or set(assessed) != set(registry.ids()):
        raise ValueError("report, truth, and registry must cover the same regions")
    per_region: dict[str, float] = {}
    num = 0.0
    den = 0.0
    for spec in registry:
        a = assessed[spec.id]
        t = truth.regions[spec.id]
        gap = abs(int(a.label) - int(t.label))
        if gap == 0:
            s = 1.0
        elif gap == 1:
            boundary = _zone_between(a.label, t.label)
            if t.zone is boundary and boundary is not Zone.NONE:
                hedge = (1.0 - a.confidence) if cfg.tolerance_reward_hedging else a.confidence
                s = 0.5 + 0.5 * hedge
            else:
                s = cfg.adjacent_credit
        else:
            s = 0.0
        per_region[spec.id] = s
        num += spec.weight * s
        den += spec.weight
    return num / den, per_region


def score_dx(predicted: Diagnosis, true: Diagnosis,
             cfg: VerifierConfig) -> tuple[float, float]:
    """Diagnosis credit and the global multiplier M."""
    gap = abs(int(predicted) - int(true))
    if gap == 0:
        return 1.0, cfg.m_correct
    if gap == 1:
        return 0.5, cfg.m_adjacent
    return 0.0, cfg.m_non_adjacent


def score_long(report: StructuredReport, truth: GroundTruth,
               cfg: VerifierConfig) -> float:
    """Change-direction and crossing-flag agreement, with an asymmetric
    penalty for asserting an impossible reversal (C2)."""
    if truth.visit_kind is not VisitKind.FOLLOW_UP:
        raise ValueError("longitudinal score is undefined on baseline visits")
    total = 0.0
    n = 0
    for a in report.regions:
        t = truth.regions[a.region]
        if t.prior is not None and int(t.prior) - int(a.label) >= 2:
            base = cfg.reversal_penalty
        else:
            base = (cfg.direction_weight * (a.change_direction is t.change_direction)
                    + cfg.flag_weight * (a.threshold_crossed == t.threshold_crossed))
        total += base
        n += 1
    return min(1.0, max(0.0, total / n)) if n else 1.0


def score_reason(report: StructuredReport, prior: PriorContext | None,
                 registry: Registry, synonyms: SynonymTable,
                 cfg: VerifierConfig) -> float:
    """Fraction of applicable reasoning checks passed: C1 mentions, C1
    progression citations, and C3 coherence (follow-ups)."""
    lexicon = list(cfg.progression_lexicon)
    c1 = constraints.check_c1(report, synonyms, registry, lexicon)
    c1_mention_fails = {f.region for f in c1 if "never referenced" in f.description}
    c1_cite_fails = {f.region for f in c1 if "progression" in f.description}

    n_checks = 0
    passed = 0
    for a in report.regions:
        if a.label is not Severity.NORMAL:
            n_checks += 1
            passed += a.region not in c1_mention_fails
        if a.threshold_crossed:
            n_checks += 1
            passed += a.region not in c1_cite_fails

    if prior is not None:
        c3 = constraints.check_c3(report, prior, registry)
        c3_viol = {f.region for f in c3 if f.severity == constraints.VIOLATION}
        for a in report.regions:
            n_checks += 1
            passed += a.region not in c3_viol

    return passed / n_checks if n_checks else 1.0


def score_summary(report: StructuredReport, registry: Registry,
                  synonyms: SynonymTable, cfg: VerifierConfig) -> float:
    """Factual alignment between the summary paragraph and the report's own
    JSON fields (not ground truth)."""
    summary = report.summary
    low = summary.lower()
    checks: list[bool] = []

    # (a) summary restates the report's own diagnosis.
    keywords = cfg.dx_keywords.get(report.diagnosis.json_name, [])
    checks.append(any(k.lower() in low for k in keywords))

    # (b) every JSON-severe region is mentioned.
    severe = [a.region for a in report.regions if a.label is Severity.SEVERE]
    if severe:
        checks.append(all(synonyms.mentions(r, summary) for r in severe))

    # (c) no region mention sits next to a contradicting severity keyword.
    labels = {a.region: a.label for a in report.regions}
    contradiction = False
    for sentence in constraints._sentences(summary):
        for region, label in labels.items():
            if not any(t in sentence for t in synonyms.terms(region)):
                continue
            for sev_name, words in cfg.severity_keywords.items():
                if Severity.from_name(sev_name) is label:
                    continue
                if any(w.lower() in sentence for w in words):
                    contradiction = True
    checks.append(not contradiction)

    return sum(checks) / len(checks)


def score(outcome: ParseOutcome | StructuredReport, truth: GroundTruth,
          registry: Registry, synonyms: SynonymTable,
          cfg: VerifierConfig = None) -> VerifierScore:
    """Full Verifier score with per-component breakdown and attached
    constraint findings.  Unparseable candidates score 0.0 by convention."""
    cfg = cfg or VerifierConfig()
    if isinstance(outcome, ParseOutcome):
        if not outcome.is_valid:
            return INVALID_SCORE
        report = outcome.report
    else:
        report = outcome

    lam = cfg.lambdas(truth.visit_kind)
    prior = truth.prior_context()

    s_anat, per_region = score_anat(report, truth, registry, cfg)
    s_dx, mult = score_dx(report.diagnosis, truth.diagnosis, cfg)
    if truth.visit_kind is VisitKind.FOLLOW_UP:
        s_long = score_long(report, truth, cfg)
    else:
        s_long = 0.0  # excluded from the total by the baseline weights
    s_reason = score_reason(report, prior, registry, synonyms, cfg)
    s_summary = score_summary(report, registry, synonyms, cfg)

    findings = list(constraints.check_c1(report, synonyms, registry,
                                         list(cfg.progression_lexicon)))
    if prior is not None:
        findings += constraints.check_c2(report, prior)
        findings += constraints.check_c3(report, prior, registry)

    parts = {"anat": s_anat, "dx": s_dx, "long": s_long,
             "reason": s_reason, "summary": s_summary}
    # Normalizing by fsum(lambda) keeps a perfect report at exactly 1.0.
    weighted = math.fsum(lam[c] * parts[c] for c in COMPONENTS)
    total = mult * weighted / math.fsum(lam.values())
    return VerifierScore(s_anat=s_anat, s_dx=s_dx, s_long=s_long,
                         s_reason=s_reason, s_summary=s_summary,
                         multiplier=mult, total=total,
                         region_scores=per_region, findings=tuple(findings))
