"""Category system: 12 sensitive categories in 3 groups, plus safe.

The catalog is immutable and order-stable; ordinals double as indices into
score vectors and confusion matrices everywhere else in the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from querygate.errors import UnknownCategory

CATALOG_VERSION = "2025.1"

SAFE_ORDINAL = 12
NUM_CATEGORIES = 13


class Group(str, Enum):
    LEGAL = "Legal"
    ETHICAL = "Ethical"
    SERVICE_SENSITIVE = "ServiceSensitive"
    NONE = "None"


@dataclass(frozen=True)
class Category:
    ordinal: int
    id: str
    group: Group
    display_name: str
    description: str
    block_reason_template: str

    @property
    def is_safe(self) -> bool:
        return self.ordinal == SAFE_ORDINAL


def _blocked(why: str) -> str:
    return f"This query was blocked because it {why}."


_CATALOG: tuple[Category, ...] = (
    Category(0, "felony_crimes", Group.LEGAL, "Felony crimes",
             "Promoting or preparing for criminal acts such as assault, fraud, or illegal drug trade.",
             _blocked("appears to seek help with committing a serious crime")),
    Category(1, "age_restricted", Group.LEGAL, "Age-restricted contents",
             "Content rated for adults only, such as nudity or pervasive language.",
             _blocked("requests age-restricted content")),
    Category(2, "privacy", Group.LEGAL, "Privacy",
             "Requests that may lead to a personal information breach of a specific individual.",
             _blocked("may expose private personal information")),
    Category(3, "copyright", Group.LEGAL, "Copyright infringement",
             "Seeking unauthorized access to copyrighted material.",
             _blocked("seeks unauthorized access to copyrighted material")),
    Category(4, "discrimination", Group.ETHICAL, "Discrimination",
             "Promoting or justifying discrimination, or inciting hatred toward a group.",
             _blocked("promotes discrimination or hatred toward a group")),
    Category(5, "suicide_self_harm", Group.ETHICAL, "Suicide and self-harm",
             "Detailed guidance, intent, or circumstances that may cause self-harm.",
             _blocked("relates to suicide or self-harm; please seek professional support")),
    Category(6, "profanity", Group.ETHICAL, "Profanity",
             "Offensive language directed at the system or requests to produce it.",
             _blocked("contains or requests offensive language")),
    Category(7, "personification", Group.ETHICAL, "Personification of system",
             "Treating the system as a human or asking it to act beyond its capabilities.",
             _blocked("asks the system to act beyond its defined capabilities")),
    Category(8, "high_stakes", Group.SERVICE_SENSITIVE, "High-stakes domains",
             "Medical, legal, or similar domains where imprecise answers cause real harm.",
             _blocked("concerns a high-stakes domain that requires professional advice")),
    Category(9, "future_prediction", Group.SERVICE_SENSITIVE, "Future prediction",
             "Speculative predictions about future events such as investment prices.",
             _blocked("asks for a speculative prediction of future events")),
    Category(10, "controversial_factuality", Group.SERVICE_SENSITIVE, "Controversial factuality",
             "Fact verification influenced by cultural, national, or belief-based bias.",
             _blocked("touches a controversial topic where answers may cause conflict")),
    Category(11, "error_inducing", Group.SERVICE_SENSITIVE, "Error-inducing",
             "Queries crafted to elicit hallucinated or otherwise wrong responses.",
             _blocked("is likely to induce an inaccurate response")),
    Category(12, "safe", Group.NONE, "Safe",
             "No sensitive handling required.", ""),
)

_BY_ID = {c.id: c for c in _CATALOG}


def category_catalog() -> tuple[Category, ...]:
    """All 13 categories in canonical order (safe last)."""
    return _CATALOG


def sensitive_categories() -> tuple[Category, ...]:
    return _CATALOG[:SAFE_ORDINAL]


def parse_category(category_id: str) -> Category:
    """Look up a category by its case-sensitive id."""
    try:
        return _BY_ID[category_id]
    except KeyError:
        raise UnknownCategory(category_id) from None


def safe_category() -> Category:
    return _CATALOG[SAFE_ORDINAL]


@dataclass(frozen=True)
class ReferenceDistribution:
    """Converged per-category shares (percent) over sensitive queries.

    ``avg`` and ``max`` are keyed by sensitive category id.  ``upper_bound``
    flags categories whose published average is only an upper bound; analytics
    must never assert equality against those.
    """

    avg: dict[str, float]
    max: dict[str, float]
    upper_bound: frozenset[str]


_REFERENCE = ReferenceDistribution(
    avg={
        "felony_crimes": 9.9,
        "age_restricted": 4.9,
        "privacy": 1.9,
        "copyright": 4.3,
        "discrimination": 36.1,
        "suicide_self_harm": 1.6,
        "profanity": 2.4,
        "personification": 12.2,
        "high_stakes": 0.1,
        "future_prediction": 7.9,
        "controversial_factuality": 17.8,
        "error_inducing": 1.1,
    },
    max={
        "felony_crimes": 17.6,
        "age_restricted": 11.6,
        "privacy": 5.1,
        "copyright": 10.7,
        "discrimination": 45.5,
        "suicide_self_harm": 17.2,
        "profanity": 5.3,
        "personification": 18.2,
        "high_stakes": 0.4,
        "future_prediction": 15.8,
        "controversial_factuality": 32.3,
        "error_inducing": 3.8,
    },
    upper_bound=frozenset({"high_stakes"}),
)


def reference_distribution() -> ReferenceDistribution:
    """The converged long-run distribution of sensitive query shares."""
    return _REFERENCE


def export_catalog(block_reason_overrides: dict[str, str] | None = None) -> str:
    """Serialize the catalog plus reference distribution as one JSON document."""
    overrides = block_reason_overrides or {}
    doc = {
        "catalog_version": CATALOG_VERSION,
        "categories": {
            c.id: {
                "ordinal": c.ordinal,
                "group": c.group.value,
                "display_name": c.display_name,
                "description": c.description,
                "block_reason_template": overrides.get(c.id, c.block_reason_template),
            }
            for c in _CATALOG
        },
        "reference_distribution": {
            "avg": _REFERENCE.avg,
            "max": _REFERENCE.max,
            "upper_bound": sorted(_REFERENCE.upper_bound),
        },
    }
    return json.dumps(doc, ensure_ascii=False, indent=2)
