"""Batch analytics over the decision log.

Everything here is a pure function of parsed decisions; rerunning on the same
log is bit-identical.  Counts always come from final (post-adjustment) labels.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from querygate.errors import EmptyInput, EmptyScope, InsufficientData, UnknownCategory
from querygate.gateway import Decision
from querygate.taxonomy import parse_category, sensitive_categories

# General search keywords omitted from keyword reports by default.
DEFAULT_STOPLIST = frozenset({"방법", "사람", "생각", "추천", "말"})

_TOKEN = re.compile(r"\w+", re.UNICODE)


@dataclass
class DailyBucket:
    date: date
    total_queries: int = 0
    sensitive_queries: int = 0
    category_counts: dict[str, int] = field(
        default_factory=lambda: {c.id: 0 for c in sensitive_categories()}
    )

    @property
    def day_of_week(self) -> int:
        return self.date.weekday()


@dataclass
class DistributionSnapshot:
    scope: str
    shares: dict[str, float]  # percent per sensitive category id
    sensitive_count: int


@dataclass
class KeywordReport:
    category_id: str
    ranked: list[tuple[str, int]]
    new_on_max_day: set[str]
    max_day: date | None


def bucketize(decisions: list[Decision]) -> list[DailyBucket]:
    """One bucket per UTC calendar date, in date order."""
    buckets: dict[date, DailyBucket] = {}
    for d in decisions:
        day = d.decided_at.date()
        bucket = buckets.get(day)
        if bucket is None:
            bucket = buckets[day] = DailyBucket(date=day)
        bucket.total_queries += 1
        if not d.label.is_safe:
            bucket.sensitive_queries += 1
            bucket.category_counts[d.label.id] += 1
    return [buckets[k] for k in sorted(buckets)]


def merge_buckets(*bucket_lists: list[DailyBucket]) -> list[DailyBucket]:
    merged: dict[date, DailyBucket] = {}
    for buckets in bucket_lists:
        for b in buckets:
            m = merged.get(b.date)
            if m is None:
                m = merged[b.date] = DailyBucket(date=b.date)
            m.total_queries += b.total_queries
            m.sensitive_queries += b.sensitive_queries
            for cid, n in b.category_counts.items():
                m.category_counts[cid] += n
    return [merged[k] for k in sorted(merged)]


def daily_volume_ratio(buckets: list[DailyBucket]) -> dict[date, float]:
    """Per-date total volume divided by the maximum daily volume."""
    if not buckets:
        raise EmptyInput("no buckets")
    peak = max(b.total_queries for b in buckets)
    return {b.date: b.total_queries / peak for b in buckets}


def sensitive_ratio(buckets: list[DailyBucket]) -> dict[date, float | None]:
    """Per-date sensitive share of total volume, in percent; None for empty days."""
    return {
        b.date: (b.sensitive_queries / b.total_queries * 100.0) if b.total_queries else None
        for b in buckets
    }


def _snapshot(buckets: list[DailyBucket], scope: str) -> DistributionSnapshot:
    counts = {c.id: 0 for c in sensitive_categories()}
    for b in buckets:
        for cid, n in b.category_counts.items():
            counts[cid] += n
    total = sum(counts.values())
    if total == 0:
        raise EmptyScope(f"no sensitive queries in scope {scope}")
    shares = {cid: n / total * 100.0 for cid, n in counts.items()}
    return DistributionSnapshot(scope=scope, shares=shares, sensitive_count=total)


def distribution(
    buckets: list[DailyBucket],
    scope: str = "overall",
    on: date | None = None,
    upto: date | None = None,
) -> DistributionSnapshot:
    """Per-category share over sensitive queries for a date, cumulative range, or overall."""
    if scope == "overall":
        return _snapshot(buckets, "overall")
    if scope == "daily":
        selected = [b for b in buckets if b.date == on]
        return _snapshot(selected, f"daily:{on.isoformat()}")
    if scope == "cumulative":
        selected = [b for b in buckets if b.date <= upto]
        return _snapshot(selected, f"cumulative:{upto.isoformat()}")
    raise ValueError(f"unknown scope {scope!r}")


def event_window(
    buckets: list[DailyBucket], start_date: date, days: int = 3
) -> tuple[DistributionSnapshot, dict[str, float]]:
    """Distribution over [start, start+days) plus percentage-point deltas vs. overall."""
    end = start_date + timedelta(days=days)
    window = [b for b in buckets if start_date <= b.date < end]
    snap = _snapshot(window, f"event:{start_date.isoformat()}+{days}d")
    overall = _snapshot(buckets, "overall")
    deltas = {cid: snap.shares[cid] - overall.shares[cid] for cid in snap.shares}
    return snap, deltas


def category_correlation(buckets: list[DailyBucket]) -> list[list[float | None]]:
    """Pearson correlation of daily per-category counts; None marks zero variance."""
    if len(buckets) < 2:
        raise InsufficientData("need at least two dates")
    cats = sensitive_categories()
    series = np.array(
        [[b.category_counts[c.id] for b in buckets] for c in cats], dtype=np.float64
    )
    stds = series.std(axis=1)
    matrix: list[list[float | None]] = []
    for i in range(len(cats)):
        row: list[float | None] = []
        for j in range(len(cats)):
            if i == j:
                row.append(1.0 if stds[i] > 0 else None)
            elif stds[i] == 0 or stds[j] == 0:
                row.append(None)
            else:
                r = float(np.corrcoef(series[i], series[j])[0, 1])
                row.append(min(1.0, max(-1.0, r)))
        matrix.append(row)
    return matrix


def tokenize(text: str) -> list[str]:
    """Default language-agnostic tokenizer; a noun tagger may substitute."""
    return _TOKEN.findall(text)


def extract_keywords(
    decisions: list[Decision],
    category_id: str,
    stoplist: frozenset[str] | set[str] = DEFAULT_STOPLIST,
    k: int = 10,
    tokenizer=tokenize,
) -> KeywordReport:
    """Top-k term frequencies among queries with the given final label.

    new_on_max_day = terms in the max-share date's top-k that never appeared
    in any earlier date's top-k.
    """
    category = parse_category(category_id)  # raises UnknownCategory
    if category.is_safe:
        raise UnknownCategory(category_id)

    in_cat = [d for d in decisions if d.label.id == category_id]

    def top_terms(ds: list[Decision]) -> list[tuple[str, int]]:
        counts: dict[str, int] = {}
        for d in ds:
            for tok in tokenizer(d.text):
                if tok not in stoplist:
                    counts[tok] = counts.get(tok, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:k]

    ranked = top_terms(in_cat)

    # max-share day: date where this category's share of sensitive volume peaks
    buckets = bucketize(decisions)
    best_day, best_share = None, -1.0
    for b in buckets:
        if b.sensitive_queries == 0:
            continue
        share = b.category_counts[category_id] / b.sensitive_queries
        if share > best_share:
            best_day, best_share = b.date, share

    new_terms: set[str] = set()
    if best_day is not None:
        max_day_top = {t for t, _ in top_terms([d for d in in_cat if d.decided_at.date() == best_day])}
        prior_top: set[str] = set()
        for b in buckets:
            if b.date >= best_day:
                break
            prior_top |= {t for t, _ in top_terms([d for d in in_cat if d.decided_at.date() == b.date])}
        new_terms = max_day_top - prior_top

    return KeywordReport(
        category_id=category_id, ranked=ranked, new_on_max_day=new_terms, max_day=best_day
    )


# --- exports ----------------------------------------------------------------

def distribution_csv(snap: DistributionSnapshot) -> str:
    lines = ["category,share_percent"]
    lines += [f"{cid},{share:.4f}" for cid, share in snap.shares.items()]
    return "\n".join(lines) + "\n"


def buckets_csv(buckets: list[DailyBucket]) -> str:
    cats = [c.id for c in sensitive_categories()]
    lines = ["date,total_queries,sensitive_queries," + ",".join(cats)]
    for b in buckets:
        counts = ",".join(str(b.category_counts[c]) for c in cats)
        lines.append(f"{b.date.isoformat()},{b.total_queries},{b.sensitive_queries},{counts}")
    return "\n".join(lines) + "\n"
