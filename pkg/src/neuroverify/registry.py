"""Region registry: which brain regions are assessed, how they change, and
how much weight each carries in the anatomical score."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


ATROPHY = "atrophy"
ENLARGEMENT = "enlargement"


@dataclass(frozen=True)
class RegionSpec:
    """One assessable region."""

    id: str
    direction: str  # "atrophy" or "enlargement"
    weight: float = 1.0

    def __post_init__(self):
        if self.direction not in (ATROPHY, ENLARGEMENT):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.weight <= 0:
            raise ValueError(f"region weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class Registry:
    """Ordered collection of RegionSpecs; order is the canonical report order."""

    regions: tuple[RegionSpec, ...]

    def __post_init__(self):
        ids = [r.id for r in self.regions]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate region ids in registry")

    def ids(self) -> list[str]:
        return [r.id for r in self.regions]

    def spec(self, region_id: str) -> RegionSpec:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(f"unknown region {region_id!r}")

    def __contains__(self, region_id: str) -> bool:
        return any(r.id == region_id for r in self.regions)

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def with_uniform_weights(self, weight: float = 1.0) -> "Registry":
        return Registry(tuple(RegionSpec(r.id, r.direction, weight) for r in self.regions))

    def to_dict(self) -> list[dict]:
        return [
            {"id": r.id, "direction": r.direction, "weight": r.weight}
            for r in self.regions
        ]

    @classmethod
    def from_dict(cls, data: list[dict]) -> "Registry":
        return cls(tuple(RegionSpec(d["id"], d["direction"], float(d.get("weight", 1.0))) for d in data))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def default_registry() -> Registry:
    """Five-region AD-signature registry with clinical weights."""
    return Registry((
        RegionSpec("hippocampus", ATROPHY, 1.2),
        RegionSpec("entorhinal_cortex", ATROPHY, 1.1),
        RegionSpec("temporal_neocortex", ATROPHY, 1.0),
        RegionSpec("amygdala", ATROPHY, 1.0),
        RegionSpec("lateral_ventricles", ENLARGEMENT, 1.0),
    ))


DEFAULT_SYNONYMS: dict[str, list[str]] = {
    "hippocampus": ["hippocampal", "hippocampi"],
    "entorhinal_cortex": ["entorhinal"],
    "temporal_neocortex": ["temporal neocortex", "temporal lobe", "neocortical temporal"],
    "amygdala": ["amygdalar", "amygdalae"],
    "lateral_ventricles": ["ventricle", "ventricles", "ventricular"],
}


@dataclass(frozen=True)
class SynonymTable:
    """Lexical terms that count as a mention of a region in free text."""

    synonyms: dict[str, list[str]] = field(default_factory=lambda: dict(DEFAULT_SYNONYMS))

    def terms(self, region_id: str) -> list[str]:
        base = [region_id.lower(), region_id.replace("_", " ").lower()]
        extra = [s.lower() for s in self.synonyms.get(region_id, [])]
        return base + extra

    def mentions(self, region_id: str, text: str) -> bool:
        low = text.lower()
        return any(t in low for t in self.terms(region_id))

    def mentioned_regions(self, registry: Registry, text: str) -> set[str]:
        return {r.id for r in registry if self.mentions(r.id, text)}

    def to_dict(self) -> dict[str, list[str]]:
        return dict(self.synonyms)

    @classmethod
    def from_dict(cls, data: dict[str, list[str]]) -> "SynonymTable":
        return cls(synonyms={k: list(v) for k, v in data.items()})
