"""Offline review loop: daily sampling, reviewer verdicts, harm precision,
and promotion of corrections into rules and training examples."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from datetime import date, datetime, timezone
from enum import Enum

from querygate.errors import AlreadyLabeled, UndefinedMetric, UnknownSample
from querygate.gateway import Decision
from querygate.model import LabeledExample
from querygate.rules import Rule, RuleKind
from querygate.taxonomy import safe_category


class Verdict(str, Enum):
    MUST_SAFE = "MustSafe"
    LOOK_SAFE = "LookSafe"
    HARM = "Harm"
    CANNOT_DECIDE = "CannotDecide"


class SampleStatus(str, Enum):
    PENDING = "Pending"
    LABELED = "Labeled"
    SKIPPED = "Skipped"


@dataclass
class ReviewSample:
    sample_id: str
    query_id: str
    text: str
    decision: Decision
    sampled_for_date: date
    status: SampleStatus = SampleStatus.PENDING


@dataclass(frozen=True)
class ReviewRecord:
    sample_id: str
    verdict: Verdict
    reviewer: str
    labeled_at: datetime


def sample_for_review(
    decisions: list[Decision], day: date, n: int = 50, seed: int = 0,
    stratified: bool = False,
) -> list[ReviewSample]:
    """Uniform sample (without replacement) of that day's sensitive decisions."""
    pool = [d for d in decisions if not d.label.is_safe and d.decided_at.date() == day]
    rng = random.Random(seed)
    if stratified and len(pool) > n:
        by_cat: dict[str, list[Decision]] = {}
        for d in pool:
            by_cat.setdefault(d.label.id, []).append(d)
        picked: list[Decision] = []
        cats = sorted(by_cat)
        i = 0
        while len(picked) < n and any(by_cat.values()):
            cat = cats[i % len(cats)]
            if by_cat[cat]:
                picked.append(by_cat[cat].pop(rng.randrange(len(by_cat[cat]))))
            i += 1
        pool = picked
    elif len(pool) > n:
        pool = rng.sample(pool, n)
    return [
        ReviewSample(
            sample_id=f"{day.isoformat()}-{i:04d}",
            query_id=d.query_id,
            text=d.text,
            decision=d,
            sampled_for_date=day,
        )
        for i, d in enumerate(pool)
    ]


class ReviewStore:
    """Holds samples and verdicts; one verdict per (sample, reviewer)."""

    def __init__(self):
        self.samples: dict[str, ReviewSample] = {}
        self.records: list[ReviewRecord] = []

    def add_samples(self, samples: list[ReviewSample]) -> None:
        for s in samples:
            self.samples[s.sample_id] = s

    def record_verdict(
        self, sample_id: str, verdict: Verdict, reviewer: str,
        labeled_at: datetime | None = None,
    ) -> ReviewRecord:
        sample = self.samples.get(sample_id)
        if sample is None:
            raise UnknownSample(sample_id)
        if any(r.sample_id == sample_id and r.reviewer == reviewer for r in self.records):
            raise AlreadyLabeled(sample_id, reviewer)
        record = ReviewRecord(
            sample_id=sample_id,
            verdict=verdict,
            reviewer=reviewer,
            labeled_at=labeled_at or datetime.now(timezone.utc),
        )
        self.records.append(record)
        sample.status = SampleStatus.LABELED
        return record

    def pending(self, day: date | None = None) -> list[ReviewSample]:
        return [
            s for s in self.samples.values()
            if s.status is SampleStatus.PENDING
            and (day is None or s.sampled_for_date == day)
        ]


def harm_precision_from_counts(
    must_safe: int, look_safe: int, harm: int, cannot_decide: int = 0
) -> float:
    """100 * Harm / (MustSafe + LookSafe + Harm); CannotDecide excluded."""
    denom = must_safe + look_safe + harm
    if denom == 0:
        raise UndefinedMetric("all verdicts are CannotDecide")
    return 100.0 * harm / denom


def harm_precision(records: list[ReviewRecord]) -> float:
    counts = {v: 0 for v in Verdict}
    for r in records:
        counts[r.verdict] += 1
    return harm_precision_from_counts(
        counts[Verdict.MUST_SAFE], counts[Verdict.LOOK_SAFE],
        counts[Verdict.HARM], counts[Verdict.CANNOT_DECIDE],
    )


def precision_timeline(grouped: dict[str, list[ReviewRecord]]) -> dict[str, float | None]:
    """harm_precision per period; None marks undefined periods."""
    series: dict[str, float | None] = {}
    for period in sorted(grouped):
        try:
            series[period] = harm_precision(grouped[period])
        except UndefinedMetric:
            series[period] = None
    return series


def promote_corrections(
    records: list[ReviewRecord],
    store: ReviewStore,
) -> tuple[list[Rule], list[LabeledExample]]:
    """MustSafe -> draft whitelist + safe example; Harm -> category example.

    Proposals are drafts (enabled=False) requiring operator activation.
    """
    proposed_rules: list[Rule] = []
    proposed_examples: list[LabeledExample] = []
    seen_texts: set[str] = set()
    for r in records:
        sample = store.samples.get(r.sample_id)
        if sample is None:
            raise UnknownSample(r.sample_id)
        if r.verdict is Verdict.MUST_SAFE:
            proposed_examples.append(LabeledExample(
                text=sample.text, label=safe_category(), origin="rule_derived",
            ))
            if sample.text not in seen_texts:
                seen_texts.add(sample.text)
                proposed_rules.append(Rule(
                    id=f"wl-{r.sample_id}",
                    kind=RuleKind.WHITELIST,
                    pattern=re.escape(sample.text),
                    exemplars=(sample.text,),
                    enabled=False,
                    author=r.reviewer,
                    created_at=r.labeled_at,
                ))
        elif r.verdict is Verdict.HARM:
            proposed_examples.append(LabeledExample(
                text=sample.text, label=sample.decision.label, origin="rule_derived",
            ))
    return proposed_rules, proposed_examples
