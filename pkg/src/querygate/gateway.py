"""Decision gateway: classify, adjust by rules, log durably, emit cue prefix.

The append-only decision log is the substrate for all analytics, so the
gateway fails closed: a decision that cannot be written is not served.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable

from querygate.errors import (
    CorruptRecord,
    NotReady,
    StorageFailure,
    UnknownQueryId,
)
from querygate.features import FeaturizerConfig
from querygate.model import ModelWeights, predict
from querygate.rules import (
    SENTENCE_TERMINATORS,
    CompiledRuleSet,
    DecisionSource,
    Rule,
    apply_adjustment,
    compile_rules,
    match_rules,
)
from querygate.taxonomy import Category, parse_category

LOG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    text: str
    received_at: datetime
    user_pseudonym: str = ""  # pre-encrypted upstream; never logged or analyzed

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass(frozen=True)
class Decision:
    query_id: str
    text: str
    label: Category
    source: DecisionSource
    scores: tuple[float, ...]
    cue_prefix: str
    blocked: bool
    block_reason: str
    model_version: str
    ruleset_version: int
    decided_at: datetime


@dataclass(frozen=True)
class FeedbackReport:
    query_id: str
    report_type: str  # OverBlocked | UnderBlocked | Other
    note: str
    submitted_at: datetime


REPORT_TYPES = ("OverBlocked", "UnderBlocked", "Other")


def cue_prefix_for(label: Category) -> str:
    return f"[CATEGORY:{label.id}]"


def decision_to_json(d: Decision) -> str:
    return json.dumps({
        "schema": LOG_SCHEMA_VERSION,
        "query_id": d.query_id,
        "text": d.text,
        "label": d.label.id,
        "source": d.source.value,
        "scores": [round(s, 6) for s in d.scores],
        "cue_prefix": d.cue_prefix,
        "blocked": d.blocked,
        "block_reason": d.block_reason,
        "model_version": d.model_version,
        "ruleset_version": d.ruleset_version,
        "decided_at": d.decided_at.isoformat(),
    }, ensure_ascii=False)


def decision_from_json(obj: dict) -> Decision:
    return Decision(
        query_id=obj["query_id"],
        text=obj["text"],
        label=parse_category(obj["label"]),
        source=DecisionSource(obj["source"]),
        scores=tuple(obj["scores"]),
        cue_prefix=obj["cue_prefix"],
        blocked=obj["blocked"],
        block_reason=obj["block_reason"],
        model_version=obj["model_version"],
        ruleset_version=obj["ruleset_version"],
        decided_at=datetime.fromisoformat(obj["decided_at"]),
    )


def read_decision_log(path) -> list[Decision]:
    decisions = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                decisions.append(decision_from_json(obj))
            except (ValueError, KeyError) as exc:
                raise CorruptRecord(lineno, str(exc)) from exc
    return decisions


@dataclass
class _Snapshot:
    """Immutable (model, ruleset) pair; swapped atomically on reload."""
    weights: ModelWeights | None
    ruleset: CompiledRuleSet
    featurizer: FeaturizerConfig


class Gateway:
    def __init__(
        self,
        log_path,
        weights: ModelWeights | None = None,
        rules: list[Rule] | None = None,
        featurizer: FeaturizerConfig | None = None,
        clock: Callable[[], datetime] | None = None,
        sentence_terminators: str = SENTENCE_TERMINATORS,
        block_reason_overrides: dict[str, str] | None = None,
    ):
        self._log_path = log_path
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._terminators = sentence_terminators
        self._block_reasons = block_reason_overrides or {}
        self._swap_lock = threading.Lock()
        self._log_lock = threading.Lock()
        self._rules: list[Rule] = list(rules or [])
        self._snapshot = _Snapshot(
            weights=weights,
            ruleset=compile_rules(self._rules, version=1),
            featurizer=featurizer or FeaturizerConfig(),
        )
        self._decisions: dict[str, Decision] = {}
        self._feedback: list[FeedbackReport] = []
        self.review_queue: list[FeedbackReport] = []

    # --- state views ---------------------------------------------------

    @property
    def model_version(self) -> str | None:
        snap = self._snapshot
        return snap.weights.model_version if snap.weights else None

    @property
    def ruleset_version(self) -> int:
        return self._snapshot.ruleset.version

    @property
    def rules(self) -> list[Rule]:
        return list(self._rules)

    def decisions(self) -> list[Decision]:
        return list(self._decisions.values())

    def recent_queries(self, n: int = 50) -> list[dict]:
        recent = list(self._decisions.values())[-n:]
        return [{"query_id": d.query_id, "text": d.text, "label": d.label.id} for d in recent]

    # --- core path -------------------------------------------------------

    def decide(self, query: QueryRecord) -> Decision:
        snap = self._snapshot  # one coherent (model, ruleset) pair per request
        if snap.weights is None:
            raise NotReady("no model loaded")

        prediction = predict(snap.weights, query.text, snap.featurizer)
        matches = match_rules(snap.ruleset, query.text, self._terminators)
        label, source = apply_adjustment(prediction, matches)

        blocked = not label.is_safe
        reason = ""
        if blocked:
            reason = self._block_reasons.get(label.id, label.block_reason_template)
        decision = Decision(
            query_id=query.query_id,
            text=query.text,
            label=label,
            source=source,
            scores=tuple(float(s) for s in prediction.scores),
            cue_prefix=cue_prefix_for(label),
            blocked=blocked,
            block_reason=reason,
            model_version=snap.weights.model_version,
            ruleset_version=snap.ruleset.version,
            decided_at=self._clock(),
        )
        self._append(decision)  # durable before the caller sees it
        self._decisions[decision.query_id] = decision
        return decision

    def _append(self, decision: Decision) -> None:
        line = decision_to_json(decision) + "\n"
        with self._log_lock:
            try:
                with open(self._log_path, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc

    def record_feedback(self, report: FeedbackReport) -> None:
        if report.query_id not in self._decisions:
            raise UnknownQueryId(report.query_id)
        self._feedback.append(report)
        self.review_queue.append(report)

    def reload(
        self,
        weights: ModelWeights | None = None,
        rules: list[Rule] | None = None,
    ) -> tuple[str | None, int]:
        """Atomic swap; on any compile error the active snapshot is unchanged."""
        if weights is None and rules is None:
            raise ValueError("reload needs a model or rules")
        with self._swap_lock:
            old = self._snapshot
            new_rules = list(rules) if rules is not None else self._rules
            ruleset = (
                compile_rules(new_rules, version=old.ruleset.version + 1)
                if rules is not None
                else old.ruleset
            )
            self._snapshot = _Snapshot(
                weights=weights if weights is not None else old.weights,
                ruleset=ruleset,
                featurizer=old.featurizer,
            )
            if rules is not None:
                self._rules = new_rules
        return self.model_version, self.ruleset_version

    # --- downstream mock ------------------------------------------------

    def generate_response(self, decision: Decision) -> str:
        """Stand-in for the downstream generator: echoes the cue prefix."""
        if decision.blocked:
            return f"{decision.cue_prefix} {decision.block_reason}"
        return f"{decision.cue_prefix} {decision.text}"
