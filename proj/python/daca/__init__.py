"""Python access to the daca core: filters, mock transformations, costs and reports."""

from ._daca import (  # noqa: F401
    BackendError,
    ConfigError,
    PreconditionError,
    StorageError,
    ValidationError,
    estimate_tokens,
    filter_check,
    fixed_tokens,
    format_percent,
    parse_review_verdict,
    pipeline_ids,
    price_tokens,
    pricing_ids,
    report_jsonl,
    report_text,
    similarity,
    template_ids,
    transform,
)
