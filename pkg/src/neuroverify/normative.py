"""Normative volumetric model: per-region least-squares fit of ICV-normalized
volume on age and sex over cognitively normal subjects, Z-scoring, severity
discretization with configurable cutoffs, and tolerance-zone membership."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .registry import ATROPHY, Registry, RegionSpec
from .report import ChangeDirection, Severity

MALE = "male"
FEMALE = "female"

DEFAULT_MIN_FIT = 30


class InsufficientDataError(ValueError):
    """Raised when a normative fit has too few rows or a rank-deficient design."""


class Zone(str, enum.Enum):
    NONE = "none"
    MILD_BOUNDARY = "mild_boundary"
    SEVERE_BOUNDARY = "severe_boundary"


@dataclass(frozen=True)
class Thresholds:
    """Severity cutoffs in Z units plus the soft-zone half-width."""

    mild_cut: float = -0.5
    severe_cut: float = -1.5
    tolerance: float = 0.25

    def __post_init__(self):
        if not self.severe_cut < self.mild_cut < 0:
            raise ValueError("require severe_cut < mild_cut < 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.mild_cut - self.severe_cut <= 2 * self.tolerance:
            raise ValueError("tolerance zones around the two cuts must not overlap")


@dataclass(frozen=True)
class VisitVolumes:
    subject_id: str
    visit_id: str
    age: float
    sex: str  # "male" or "female"
    volumes: dict[str, float]

    def __post_init__(self):
        if self.sex not in (MALE, FEMALE):
            raise ValueError(f"sex must be male/female, got {self.sex!r}")
        if self.age <= 0:
            raise ValueError("age must be positive")
        for r, v in self.volumes.items():
            if v <= 0:
                raise ValueError(f"volume for {r} must be positive, got {v}")


@dataclass(frozen=True)
class RegionCoefficients:
    alpha: float
    beta_age: float
    beta_sex: float  # offset for male; female is the reference level
    sigma: float
    n_fit: int


@dataclass(frozen=True)
class NormativeModel:
    coefficients: dict[str, RegionCoefficients]
    registry_hash: str = ""

    def predict(self, region: str, age: float, sex: str) -> float:
        c = self._coef(region)
        return c.alpha + c.beta_age * age + c.beta_sex * (1.0 if sex == MALE else 0.0)

    def _coef(self, region: str) -> RegionCoefficients:
        try:
            return self.coefficients[region]
        except KeyError:
            raise KeyError(f"region {region!r} not fitted in normative model") from None

    def to_dict(self) -> dict:
        return {
            "registry_hash": self.registry_hash,
            "regions": {
                r: {"alpha": c.alpha, "beta_age": c.beta_age, "beta_sex": c.beta_sex,
                    "sigma": c.sigma, "n_fit": c.n_fit}
                for r, c in self.coefficients.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormativeModel":
        coeffs = {
            r: RegionCoefficients(d["alpha"], d["beta_age"], d["beta_sex"],
                                  d["sigma"], int(d["n_fit"]))
            for r, d in data["regions"].items()
        }
        return cls(coefficients=coeffs, registry_hash=data.get("registry_hash", ""))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "NormativeModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_normative(cohort: list[VisitVolumes], registry: Registry,
                  min_fit: int = DEFAULT_MIN_FIT) -> NormativeModel:
    """OLS fit of v_r on (1, age, male-indicator) per region.

    The caller restricts the cohort to cognitively normal training subjects.
    Rows are sorted by (subject_id, visit_id) before fitting so the result is
    invariant to input permutation.
    """
    rows = sorted(cohort, key=lambda v: (v.subject_id, v.visit_id))
    n = len(rows)
    if n < min_fit:
        raise InsufficientDataError(f"need at least {min_fit} visits, got {n}")
    sexes = {v.sex for v in rows}
    if len(sexes) < 2:
        raise InsufficientDataError("both sexes must be represented in the fit cohort")

    X = np.column_stack([
        np.ones(n),
        np.array([v.age for v in rows]),
        np.array([1.0 if v.sex == MALE else 0.0 for v in rows]),
    ])
    if np.linalg.matrix_rank(X) < 3:
        raise InsufficientDataError("rank-deficient design matrix (collinear age/sex)")

    coeffs: dict[str, RegionCoefficients] = {}
    for spec in registry:
        y = np.array([v.volumes[spec.id] for v in rows])
        beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ beta
        sigma = float(np.sqrt(resid @ resid / (n - 3)))
        coeffs[spec.id] = RegionCoefficients(
            alpha=float(beta[0]), beta_age=float(beta[1]), beta_sex=float(beta[2]),
            sigma=sigma, n_fit=n)
    return NormativeModel(coefficients=coeffs, registry_hash=registry.content_hash())


def zscore(model: NormativeModel, visit: VisitVolumes, region: str) -> float:
    """Deviation of the observed volume from the age-sex-adjusted norm, in
    residual-SD units."""
    c = model._coef(region)
    if c.sigma <= 0:
        raise ValueError(f"region {region!r} has non-positive residual SD")
    return (visit.volumes[region] - model.predict(region, visit.age, visit.sex)) / c.sigma


def _adjusted(z: float, spec: RegionSpec) -> float:
    # Enlargement regions use mirrored thresholds: abnormality is positive z.
    return z if spec.direction == ATROPHY else -z


def discretize(z: float, spec: RegionSpec, t: Thresholds) -> Severity:
    """Map a Z-score to the three-level severity scheme.  Equality at a cut
    goes to the more severe label (normal requires strictly z > mild_cut)."""
    za = _adjusted(z, spec)
    if za > t.mild_cut:
        return Severity.NORMAL
    if za > t.severe_cut:
        return Severity.MILD
    return Severity.SEVERE


def tolerance_zone(z: float, spec: RegionSpec, t: Thresholds) -> Zone:
    """Which soft boundary zone (if any) the direction-adjusted z falls in."""
    za = _adjusted(z, spec)
    if abs(za - t.mild_cut) <= t.tolerance:
        return Zone.MILD_BOUNDARY
    if abs(za - t.severe_cut) <= t.tolerance:
        return Zone.SEVERE_BOUNDARY
    return Zone.NONE


@dataclass(frozen=True)
class RegionLabel:
    z: float
    label: Severity
    zone: Zone


def label_visit(model: NormativeModel, visit: VisitVolumes, registry: Registry,
                t: Thresholds = Thresholds()) -> dict[str, RegionLabel]:
    out = {}
    for spec in registry:
        z = zscore(model, visit, spec.id)
        out[spec.id] = RegionLabel(z=z, label=discretize(z, spec, t),
                                   zone=tolerance_zone(z, spec, t))
    return out


def derive_change_direction(z_prior: float, z_current: float, spec: RegionSpec,
                            tolerance: float = 0.25) -> ChangeDirection:
    """Ground-truth change direction from the Z trajectory: stable within the
    tolerance band, otherwise the sign of the change names the direction."""
    dz = z_current - z_prior
    if abs(dz) <= tolerance:
        return ChangeDirection.STABLE
    if dz < 0:
        return ChangeDirection.PROGRESSIVE_ATROPHY
    return ChangeDirection.PROGRESSIVE_ENLARGEMENT


# --- cohort CSV ingestion ---------------------------------------------------

@dataclass(frozen=True)
class CohortRow:
    visit: VisitVolumes
    diagnosis: str  # CN / MCI / Dementia as written in the CSV


def load_cohort_csv(path: str | Path, registry: Registry) -> list[CohortRow]:
    """Read `subject_id,visit_id,diagnosis,age,sex,<region...>` rows."""
    rows: list[CohortRow] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [r for r in registry.ids() if r not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"cohort CSV missing region columns: {missing}")
        for rec in reader:
            visit = VisitVolumes(
                subject_id=rec["subject_id"],
                visit_id=rec["visit_id"],
                age=float(rec["age"]),
                sex=rec["sex"],
                volumes={r: float(rec[r]) for r in registry.ids()},
            )
            rows.append(CohortRow(visit=visit, diagnosis=rec["diagnosis"]))
    return rows


def write_cohort_csv(path: str | Path, rows: list[CohortRow], registry: Registry) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "visit_id", "diagnosis", "age", "sex"] + registry.ids())
        for row in rows:
            v = row.visit
            writer.writerow([v.subject_id, v.visit_id, row.diagnosis,
                             repr(v.age), v.sex] +
                            [repr(v.volumes[r]) for r in registry.ids()])
