"""Sentence-embedding and NLI inference behind a small HTTP/JSON contract."""

__version__ = "0.1.0"
