"""HTTP surface over the gateway, analytics, and review loop."""

from __future__ import annotations

import uuid
from datetime import date, datetime, timezone

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from pydantic import BaseModel

from querygate import analytics
from querygate.errors import (
    AlreadyLabeled,
    CategoryMissing,
    CategoryNotAllowed,
    DuplicateRuleId,
    EmptyScope,
    InsufficientData,
    InvalidPattern,
    NotReady,
    StorageFailure,
    UndefinedMetric,
    UnknownCategory,
    UnknownQueryId,
    UnknownSample,
)
from querygate.gateway import REPORT_TYPES, FeedbackReport, Gateway, QueryRecord
from querygate.review import ReviewStore, Verdict, promote_corrections, sample_for_review
from querygate.rules import Rule, rule_from_dict


class DecideRequest(BaseModel):
    text: str
    query_id: str | None = None


class FeedbackRequest(BaseModel):
    query_id: str
    report_type: str
    note: str = ""


class RuleRequest(BaseModel):
    id: str
    kind: str
    pattern: str
    category: str | None = None
    exemplars: list[str] = []
    enabled: bool = True
    author: str = ""


class VerdictRequest(BaseModel):
    sample_id: str
    verdict: str
    reviewer: str


def create_app(
    gateway: Gateway,
    sample_size: int = 50,
    operator_token: str | None = None,
) -> FastAPI:
    app = FastAPI(title="querygate")
    store = ReviewStore()
    drafts: list[Rule] = gateway.rules
    activated_rule_ids: set[str] = {r.id for r in drafts}

    def require_token(x_operator_token: str | None = Header(default=None)):
        if operator_token is not None and x_operator_token != operator_token:
            raise HTTPException(status_code=401, detail="invalid operator token")

    # --- gateway ---------------------------------------------------------

    @app.post("/v1/decide")
    def decide(req: DecideRequest):
        if not req.text.strip():
            raise HTTPException(status_code=400, detail="text must be non-empty")
        record = QueryRecord(
            query_id=req.query_id or f"q-{uuid.uuid4().hex[:12]}",
            text=req.text,
            received_at=datetime.now(timezone.utc),
        )
        try:
            d = gateway.decide(record)
        except NotReady as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except StorageFailure as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        body = {
            "query_id": d.query_id,
            "label": d.label.id,
            "source": d.source.value,
            "blocked": d.blocked,
            "cue_prefix": d.cue_prefix,
            "scores": list(d.scores),
            "model_version": d.model_version,
            "ruleset_version": d.ruleset_version,
        }
        if d.blocked:
            body["block_reason"] = d.block_reason
        return body

    @app.post("/v1/feedback")
    def feedback(req: FeedbackRequest):
        if req.report_type not in REPORT_TYPES:
            raise HTTPException(status_code=400, detail=f"report_type must be one of {REPORT_TYPES}")
        report = FeedbackReport(
            query_id=req.query_id,
            report_type=req.report_type,
            note=req.note,
            submitted_at=datetime.now(timezone.utc),
        )
        try:
            gateway.record_feedback(report)
        except UnknownQueryId as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"accepted": True}

    @app.get("/v1/healthz")
    def healthz():
        return {
            "model_version": gateway.model_version,
            "ruleset_version": gateway.ruleset_version,
        }

    # --- rules -------------------------------------------------------------

    def rule_view(r: Rule) -> dict:
        return {
            "id": r.id,
            "kind": r.kind.value,
            "pattern": r.pattern,
            "category": r.category.id if r.category else None,
            "exemplars": list(r.exemplars),
            "enabled": r.enabled,
            "author": r.author,
        }

    @app.get("/v1/rules")
    def list_rules():
        return {"rules": [rule_view(r) for r in drafts], "active_version": gateway.ruleset_version}

    @app.post("/v1/rules", dependencies=[Depends(require_token)])
    def add_rule(req: RuleRequest):
        if any(r.id == req.id for r in drafts):
            raise HTTPException(status_code=409, detail=f"duplicate rule id {req.id!r}")
        try:
            rule = rule_from_dict(req.model_dump())
        except UnknownCategory as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        drafts.append(rule)
        activated_rule_ids.add(rule.id)
        return {"added": rule.id}

    @app.delete("/v1/rules/{rule_id}", dependencies=[Depends(require_token)])
    def delete_rule(rule_id: str):
        for i, r in enumerate(drafts):
            if r.id == rule_id:
                drafts.pop(i)
                activated_rule_ids.discard(rule_id)
                return {"deleted": rule_id}
        raise HTTPException(status_code=404, detail=f"no rule {rule_id!r}")

    @app.post("/v1/reload", dependencies=[Depends(require_token)])
    def reload():
        try:
            model_version, ruleset_version = gateway.reload(rules=list(drafts))
        except (InvalidPattern, DuplicateRuleId, CategoryMissing, CategoryNotAllowed) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"model_version": model_version, "ruleset_version": ruleset_version}

    @app.get("/v1/logs/recent")
    def recent_queries(n: int = Query(default=50, ge=1, le=1000)):
        return {"queries": gateway.recent_queries(n)}

    # --- analytics -----------------------------------------------------------

    def _buckets():
        return analytics.bucketize(gateway.decisions())

    def snapshot_view(snap, deltas=None):
        body = {"scope": snap.scope, "shares": snap.shares, "sensitive_count": snap.sensitive_count}
        if deltas is not None:
            body["deltas"] = deltas
        return body

    @app.get("/v1/analytics/overall")
    def overall():
        try:
            return snapshot_view(analytics.distribution(_buckets(), "overall"))
        except EmptyScope as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/analytics/daily")
    def daily(date_: str = Query(alias="date")):
        try:
            return snapshot_view(
                analytics.distribution(_buckets(), "daily", on=date.fromisoformat(date_))
            )
        except EmptyScope as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/analytics/cumulative")
    def cumulative(upto: str):
        try:
            return snapshot_view(
                analytics.distribution(_buckets(), "cumulative", upto=date.fromisoformat(upto))
            )
        except EmptyScope as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/analytics/events")
    def events(start: str, days: int = 3):
        try:
            snap, deltas = analytics.event_window(_buckets(), date.fromisoformat(start), days)
        except EmptyScope as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return snapshot_view(snap, deltas)

    @app.get("/v1/analytics/correlation")
    def correlation():
        try:
            return {"matrix": analytics.category_correlation(_buckets())}
        except InsufficientData as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/analytics/keywords")
    def keywords(category: str, k: int = 10):
        try:
            report = analytics.extract_keywords(gateway.decisions(), category, k=k)
        except UnknownCategory as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {
            "category": report.category_id,
            "ranked": report.ranked,
            "new_on_max_day": sorted(report.new_on_max_day),
            "max_day": report.max_day.isoformat() if report.max_day else None,
        }

    @app.get("/v1/analytics/volume")
    def volume():
        buckets = _buckets()
        if not buckets:
            return {"ratio": {}, "sensitive_percent": {}}
        ratio = analytics.daily_volume_ratio(buckets)
        sens = analytics.sensitive_ratio(buckets)
        return {
            "ratio": {d.isoformat(): v for d, v in ratio.items()},
            "sensitive_percent": {d.isoformat(): v for d, v in sens.items()},
        }

    # --- review loop -----------------------------------------------------

    @app.get("/v1/review/samples")
    def review_samples(date_: str = Query(alias="date"), n: int | None = None, seed: int = 0):
        day = date.fromisoformat(date_)
        existing = [s for s in store.samples.values() if s.sampled_for_date == day]
        if not existing:
            samples = sample_for_review(gateway.decisions(), day, n=n or sample_size, seed=seed)
            store.add_samples(samples)
            existing = samples
        return {"samples": [
            {
                "sample_id": s.sample_id,
                "query_id": s.query_id,
                "text": s.text,
                "label": s.decision.label.id,
                "source": s.decision.source.value,
                "scores": list(s.decision.scores),
                "status": s.status.value,
            }
            for s in existing
        ]}

    @app.post("/v1/review/verdicts", dependencies=[Depends(require_token)])
    def post_verdict(req: VerdictRequest):
        try:
            verdict = Verdict(req.verdict)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"invalid verdict {req.verdict!r}")
        try:
            record = store.record_verdict(req.sample_id, verdict, req.reviewer)
        except UnknownSample as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except AlreadyLabeled as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"sample_id": record.sample_id, "verdict": record.verdict.value}

    @app.get("/v1/metrics/precision")
    def precision(group: str = "day"):
        if group not in ("day", "week"):
            raise HTTPException(status_code=400, detail="group must be day or week")
        grouped: dict[str, list] = {}
        for r in store.records:
            sample = store.samples[r.sample_id]
            d = sample.sampled_for_date
            key = d.isoformat() if group == "day" else f"{d.isocalendar().year}-W{d.isocalendar().week:02d}"
            grouped.setdefault(key, []).append(r)
        from querygate.review import harm_precision, precision_timeline
        timeline = precision_timeline(grouped)
        try:
            overall_value = harm_precision(store.records)
        except UndefinedMetric:
            overall_value = None
        return {"overall": overall_value, "timeline": timeline}

    @app.get("/v1/review/proposals")
    def proposals():
        rules, examples = promote_corrections(store.records, store)
        pending_rules = [rule_view(r) for r in rules if r.id not in activated_rule_ids]
        return {
            "rules": pending_rules,
            "examples": [
                {"text": e.text, "label": e.label.id, "origin": e.origin} for e in examples
            ],
        }

    app.state.gateway = gateway
    app.state.review_store = store
    return app
