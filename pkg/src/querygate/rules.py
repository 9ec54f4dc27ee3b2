"""Sentence-level regex overlay: whitelist/blacklist rules over model output.

Compilation is atomic (any bad rule rejects the whole batch) so a gateway can
keep serving the previous ruleset on failure.  Backreferences are banned to
keep matching cost bounded on the request path.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from querygate.errors import (
    CategoryMissing,
    CategoryNotAllowed,
    DuplicateRuleId,
    InvalidPattern,
)
from querygate.model import LabeledExample, Prediction
from querygate.taxonomy import Category, parse_category, safe_category

SENTENCE_TERMINATORS = ".!?…\n"

_BACKREF = re.compile(r"\\[1-9]|\(\?P=")


class RuleKind(str, Enum):
    WHITELIST = "whitelist"
    BLACKLIST = "blacklist"


class DecisionSource(str, Enum):
    MODEL = "Model"
    WHITELIST_OVERRIDE = "WhitelistOverride"
    BLACKLIST_OVERRIDE = "BlacklistOverride"


@dataclass(frozen=True)
class Rule:
    id: str
    kind: RuleKind
    pattern: str
    category: Category | None = None  # required for blacklist, forbidden for whitelist
    exemplars: tuple[str, ...] = ()
    enabled: bool = True
    author: str = ""
    created_at: datetime | None = None


@dataclass(frozen=True)
class RuleMatch:
    rule_id: str
    kind: RuleKind
    category: Category | None
    sentence_index: int
    span: tuple[int, int]


@dataclass
class CompiledRuleSet:
    version: int
    rules: list[Rule] = field(default_factory=list)
    _compiled: list[tuple[Rule, re.Pattern]] = field(default_factory=list)

    @property
    def rule_ids(self) -> list[str]:
        return [r.id for r in self.rules]


def compile_rules(rules: list[Rule], version: int = 1) -> CompiledRuleSet:
    """Compile enabled rules; rejects the whole batch on any invalid rule."""
    seen: set[str] = set()
    compiled: list[tuple[Rule, re.Pattern]] = []
    active: list[Rule] = []
    for rule in rules:
        if rule.id in seen:
            raise DuplicateRuleId(rule.id)
        seen.add(rule.id)
        if rule.kind is RuleKind.BLACKLIST:
            if rule.category is None or rule.category.is_safe:
                raise CategoryMissing(rule.id)
        elif rule.category is not None:
            raise CategoryNotAllowed(rule.id)
        if _BACKREF.search(rule.pattern):
            raise InvalidPattern(rule.id, "backreferences are not supported")
        try:
            pattern = re.compile(rule.pattern)
        except re.error as exc:
            raise InvalidPattern(rule.id, str(exc)) from exc
        if rule.enabled:
            active.append(rule)
            compiled.append((rule, pattern))
    return CompiledRuleSet(version=version, rules=active, _compiled=compiled)


def split_sentences(text: str, terminators: str = SENTENCE_TERMINATORS) -> list[str]:
    """Split on terminator characters; whole text is one sentence if none fire."""
    sentences = []
    current = []
    for ch in text:
        if ch in terminators:
            chunk = "".join(current).strip()
            if chunk:
                sentences.append(chunk)
            current = []
        else:
            current.append(ch)
    tail = "".join(current).strip()
    if tail:
        sentences.append(tail)
    return sentences if sentences else [text]


def match_rules(ruleset: CompiledRuleSet, text: str,
                terminators: str = SENTENCE_TERMINATORS) -> list[RuleMatch]:
    sentences = split_sentences(text, terminators)
    matches: list[RuleMatch] = []
    for rule, pattern in ruleset._compiled:
        for i, sentence in enumerate(sentences):
            m = pattern.search(sentence)
            if m:
                matches.append(RuleMatch(
                    rule_id=rule.id,
                    kind=rule.kind,
                    category=rule.category,
                    sentence_index=i,
                    span=m.span(),
                ))
    return matches


def apply_adjustment(
    prediction: Prediction, matches: list[RuleMatch]
) -> tuple[Category, DecisionSource]:
    """Blacklist outranks whitelist outranks model; lowest ordinal breaks ties."""
    blacklist_cats = [m.category for m in matches if m.kind is RuleKind.BLACKLIST]
    if blacklist_cats:
        return min(blacklist_cats, key=lambda c: c.ordinal), DecisionSource.BLACKLIST_OVERRIDE
    has_whitelist = any(m.kind is RuleKind.WHITELIST for m in matches)
    if has_whitelist and not prediction.label.is_safe:
        return safe_category(), DecisionSource.WHITELIST_OVERRIDE
    return prediction.label, DecisionSource.MODEL


def export_training_from_rules(
    rules: list[Rule],
) -> tuple[list[LabeledExample], list[str]]:
    """Turn rule exemplars into labeled examples; returns (examples, skipped ids)."""
    examples: list[LabeledExample] = []
    skipped: list[str] = []
    for rule in rules:
        if not rule.exemplars:
            skipped.append(rule.id)
            continue
        label = safe_category() if rule.kind is RuleKind.WHITELIST else rule.category
        for text in rule.exemplars:
            examples.append(LabeledExample(text=text, label=label, origin="rule_derived"))
    return examples, skipped


# --- rule file format: versioned header + one rule object per line ----------

RULE_FILE_VERSION = 1


def write_rules(path, rules: list[Rule]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"rule_file_version": RULE_FILE_VERSION}) + "\n")
        for r in rules:
            f.write(json.dumps({
                "id": r.id,
                "kind": r.kind.value,
                "pattern": r.pattern,
                "category": r.category.id if r.category else None,
                "exemplars": list(r.exemplars),
                "enabled": r.enabled,
                "author": r.author,
                "created_at": r.created_at.isoformat() if r.created_at else None,
            }, ensure_ascii=False) + "\n")


def read_rules(path) -> list[Rule]:
    rules = []
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("rule_file_version") != RULE_FILE_VERSION:
            raise ValueError("unsupported rule file version")
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            rules.append(rule_from_dict(obj))
    return rules


def rule_from_dict(obj: dict) -> Rule:
    return Rule(
        id=obj["id"],
        kind=RuleKind(obj["kind"]),
        pattern=obj["pattern"],
        category=parse_category(obj["category"]) if obj.get("category") else None,
        exemplars=tuple(obj.get("exemplars") or ()),
        enabled=obj.get("enabled", True),
        author=obj.get("author", ""),
        created_at=datetime.fromisoformat(obj["created_at"]) if obj.get("created_at") else None,
    )


def new_rule_id(prefix: str = "rule") -> str:
    return f"{prefix}-{datetime.now(timezone.utc).strftime('%Y%m%d%H%M%S%f')}"
