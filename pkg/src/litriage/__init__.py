"""Batch literature triage: retrieval, zero-shot classification, evaluation,
and trend reporting for scientific article metadata."""

__version__ = "0.1.0"
