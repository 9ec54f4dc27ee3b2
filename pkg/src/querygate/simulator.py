"""Deterministic synthetic query-stream generator.

Reproduces the observed stream dynamics at desk scale: launch-peak volume on
days 1-3, a 50-85% ratio band afterwards with a weekday/weekend split, a 3-4%
sensitive rate, a configurable category distribution, and injectable events
that multiply category weights over a short window.

Each query carries a hidden planted category.  Query texts embed one
signature token per category (plus topical and noise tokens) so rules and
keyword analytics have material to match, and so an oracle classifier can
recover the planted label from the text alone.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone

from querygate.errors import InvalidConfig, WindowOutOfRange
from querygate.gateway import QueryRecord
from querygate.taxonomy import (
    Category,
    parse_category,
    reference_distribution,
    safe_category,
    sensitive_categories,
)

# Topical vocabulary per category, drawn from observed frequent keywords.
CATEGORY_KEYWORDS: dict[str, tuple[str, ...]] = {
    "felony_crimes": ("마약", "사이트", "사건", "범죄", "연예인"),
    "age_restricted": ("사진", "여자", "섹스", "친구"),
    "privacy": ("번호", "주소", "정보", "아이디", "개인"),
    "copyright": ("사이트", "무료", "다운로드", "영화", "소설"),
    "discrimination": ("남자", "여자", "이유", "친구", "문제"),
    "suicide_self_harm": ("자살", "고통", "우울", "죽음"),
    "profanity": ("욕", "단어", "뜻", "표현"),
    "personification": ("친구", "이름", "대화", "대통령", "거짓말"),
    "high_stakes": ("민원", "학부모", "사례", "위치"),
    "future_prediction": ("주식", "투자", "전망", "주가", "가격"),
    "controversial_factuality": ("대통령", "나라", "법", "정치", "윤리"),
    "error_inducing": ("꿈", "인공지능", "멸망", "세계", "지구"),
    "safe": ("방법", "사람", "생각", "추천", "말", "날씨", "요리", "여행"),
}


def signature_token(category: Category) -> str:
    return f"sig_{category.id}"


def signature_label(text: str) -> Category:
    """Oracle classifier: read the planted signature token from the text."""
    for tok in text.split():
        if tok.startswith("sig_"):
            return parse_category(tok[4:])
    return safe_category()


@dataclass(frozen=True)
class EventSpec:
    start_day: int  # 1-based day index into the stream
    duration: int = 3
    multipliers: dict[str, float] = field(default_factory=dict)
    label: str = ""


@dataclass(frozen=True)
class StreamConfig:
    days: int = 70
    peak_daily_volume: int = 10_000
    volume_ratio_band: tuple[float, float] = (0.50, 0.85)
    weekday_multiplier: float = 1.0
    weekend_multiplier: float = 0.8
    sensitive_rate_band: tuple[float, float] = (0.03, 0.04)
    base_distribution: dict[str, float] | None = None  # percent per sensitive id
    events: tuple[EventSpec, ...] = ()
    seed: int = 0
    start_date: date = date(2025, 1, 1)
    # Size of the noise-token vocabulary: lower values repeat texts more often.
    text_variants: int = 50

    def distribution(self) -> dict[str, float]:
        return dict(self.base_distribution or reference_distribution().avg)

    def validate(self) -> None:
        if self.days < 1:
            raise InvalidConfig("days", "must be >= 1")
        if self.peak_daily_volume < 1:
            raise InvalidConfig("peak_daily_volume", "must be >= 1")
        for name, band in (("volume_ratio_band", self.volume_ratio_band),
                           ("sensitive_rate_band", self.sensitive_rate_band)):
            lo, hi = band
            if not (0 < lo <= hi <= 1):
                raise InvalidConfig(name, "band must satisfy 0 < lo <= hi <= 1")
        dist = self.distribution()
        total = sum(dist.values())
        if not 95.0 <= total <= 105.0:
            raise InvalidConfig("base_distribution", f"shares sum to {total}, expected ~100")
        known = {c.id for c in sensitive_categories()}
        for cid in dist:
            if cid not in known:
                raise InvalidConfig("base_distribution", f"unknown category {cid!r}")
        for ev in self.events:
            self._check_event(ev)
        if self.text_variants < 1:
            raise InvalidConfig("text_variants", "must be >= 1")

    def _check_event(self, ev: EventSpec) -> None:
        if ev.start_day < 1 or ev.start_day + ev.duration - 1 > self.days:
            raise WindowOutOfRange(
                f"event {ev.label!r}: days {ev.start_day}..{ev.start_day + ev.duration - 1} "
                f"outside stream of {self.days} days"
            )
        for cid, factor in ev.multipliers.items():
            if factor <= 0:
                raise InvalidConfig("events", f"multiplier for {cid!r} must be > 0")


def inject_event(config: StreamConfig, event: EventSpec) -> StreamConfig:
    """Return a config with the event appended; overlaps compose multiplicatively."""
    config._check_event(event)
    return replace(config, events=config.events + (event,))


def day_weights(config: StreamConfig, day_index: int) -> dict[str, float]:
    """Event-adjusted, renormalized sensitive category weights for one day (1-based)."""
    weights = {cid: share for cid, share in config.distribution().items()}
    for ev in config.events:
        if ev.start_day <= day_index < ev.start_day + ev.duration:
            for cid, factor in ev.multipliers.items():
                if cid in weights:
                    weights[cid] *= factor
    total = sum(weights.values())
    return {cid: w / total for cid, w in weights.items()}


@dataclass(frozen=True)
class StreamItem:
    record: QueryRecord
    planted: Category


def _make_text(rng: random.Random, category: Category, variants: int) -> str:
    kws = CATEGORY_KEYWORDS[category.id]
    kw = rng.choice(kws)
    noise = f"n{rng.randrange(variants)}"
    return f"{signature_token(category)} {kw} {noise}"


def generate_stream(config: StreamConfig) -> list[StreamItem]:
    """Full stream across all configured days; deterministic under config.seed."""
    config.validate()
    rng = random.Random(config.seed)
    lo, hi = config.volume_ratio_band
    s_lo, s_hi = config.sensitive_rate_band
    cats = sensitive_categories()

    items: list[StreamItem] = []
    seq = 0
    for day_index in range(1, config.days + 1):
        day = config.start_date + timedelta(days=day_index - 1)
        if day_index <= 3:
            volume = config.peak_daily_volume
        else:
            mult = config.weekday_multiplier if day.weekday() < 5 else config.weekend_multiplier
            ratio = min(hi, max(lo, rng.uniform(lo, hi) * mult))
            volume = max(1, round(config.peak_daily_volume * ratio))
        sensitive_rate = rng.uniform(s_lo, s_hi)
        weights = day_weights(config, day_index)
        cat_ids = sorted(weights)
        cat_weights = [weights[cid] for cid in cat_ids]

        for i in range(volume):
            seq += 1
            if rng.random() < sensitive_rate:
                planted = parse_category(rng.choices(cat_ids, weights=cat_weights)[0])
            else:
                planted = safe_category()
            seconds = int(i / volume * 86399)
            received_at = datetime.combine(day, time(0, 0), tzinfo=timezone.utc) + timedelta(seconds=seconds)
            record = QueryRecord(
                query_id=f"q{day_index:03d}-{i:06d}",
                text=_make_text(rng, planted, config.text_variants),
                received_at=received_at,
                user_pseudonym=f"u{rng.getrandbits(48):012x}",
            )
            items.append(StreamItem(record=record, planted=planted))
    return items


# --- stream files: records + sidecar with planted labels ---------------------

def write_stream(stream_path, sidecar_path, items: list[StreamItem]) -> None:
    with open(stream_path, "w", encoding="utf-8") as sf, \
         open(sidecar_path, "w", encoding="utf-8") as lf:
        for item in items:
            sf.write(json.dumps({
                "query_id": item.record.query_id,
                "text": item.record.text,
                "received_at": item.record.received_at.isoformat(),
                "user_pseudonym": item.record.user_pseudonym,
            }, ensure_ascii=False) + "\n")
            lf.write(json.dumps(
                {"query_id": item.record.query_id, "planted": item.planted.id}
            ) + "\n")


def read_stream(stream_path, sidecar_path=None) -> list[StreamItem]:
    planted: dict[str, str] = {}
    if sidecar_path is not None:
        with open(sidecar_path, encoding="utf-8") as f:
            for line in f:
                obj = json.loads(line)
                planted[obj["query_id"]] = obj["planted"]
    items = []
    with open(stream_path, encoding="utf-8") as f:
        for line in f:
            obj = json.loads(line)
            record = QueryRecord(
                query_id=obj["query_id"],
                text=obj["text"],
                received_at=datetime.fromisoformat(obj["received_at"]),
                user_pseudonym=obj.get("user_pseudonym", ""),
            )
            label = parse_category(planted[record.query_id]) if planted else signature_label(record.text)
            items.append(StreamItem(record=record, planted=label))
    return items
