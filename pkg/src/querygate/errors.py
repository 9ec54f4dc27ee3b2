"""Exception types shared across the gateway stack."""

from __future__ import annotations


class QuerygateError(Exception):
    """Base class for all errors raised by this package."""


class UnknownCategory(QuerygateError):
    def __init__(self, category_id: str):
        super().__init__(f"unknown category id: {category_id!r}")
        self.category_id = category_id


class DimensionMismatch(QuerygateError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"feature dimension {got} does not match model dimension {expected}")
        self.expected = expected
        self.got = got


class EmptyDataset(QuerygateError):
    pass


class NonFiniteLoss(QuerygateError):
    pass


class MissingCategoryExamples(QuerygateError):
    def __init__(self, category_id: str):
        super().__init__(f"corpus has no examples for category {category_id!r}")
        self.category_id = category_id


class RemoteFeaturizerUnavailable(QuerygateError):
    pass


class InvalidPattern(QuerygateError):
    def __init__(self, rule_id: str, reason: str):
        super().__init__(f"rule {rule_id!r}: invalid pattern ({reason})")
        self.rule_id = rule_id
        self.reason = reason


class DuplicateRuleId(QuerygateError):
    def __init__(self, rule_id: str):
        super().__init__(f"duplicate rule id: {rule_id!r}")
        self.rule_id = rule_id


class CategoryMissing(QuerygateError):
    def __init__(self, rule_id: str):
        super().__init__(f"blacklist rule {rule_id!r} has no category")
        self.rule_id = rule_id


class CategoryNotAllowed(QuerygateError):
    def __init__(self, rule_id: str):
        super().__init__(f"whitelist rule {rule_id!r} must not carry a category")
        self.rule_id = rule_id


class NotReady(QuerygateError):
    pass


class StorageFailure(QuerygateError):
    pass


class UnknownQueryId(QuerygateError):
    def __init__(self, query_id: str):
        super().__init__(f"no decision recorded for query id {query_id!r}")
        self.query_id = query_id


class CorruptRecord(QuerygateError):
    def __init__(self, line_number: int, reason: str = ""):
        msg = f"corrupt decision record at line {line_number}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line_number = line_number


class EmptyInput(QuerygateError):
    pass


class EmptyScope(QuerygateError):
    pass


class InsufficientData(QuerygateError):
    pass


class UnknownSample(QuerygateError):
    def __init__(self, sample_id: str):
        super().__init__(f"unknown review sample: {sample_id!r}")
        self.sample_id = sample_id


class AlreadyLabeled(QuerygateError):
    def __init__(self, sample_id: str, reviewer: str):
        super().__init__(f"sample {sample_id!r} already labeled by {reviewer!r}")
        self.sample_id = sample_id
        self.reviewer = reviewer


class UndefinedMetric(QuerygateError):
    pass


class InvalidConfig(QuerygateError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"invalid config field {field}: {reason}")
        self.field = field
        self.reason = reason


class WindowOutOfRange(QuerygateError):
    pass
