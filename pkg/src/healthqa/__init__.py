"""Open-domain health QA: retrieve biomedical abstracts, read, vote, evaluate."""

__version__ = "0.1.0"

INDEX_FORMAT_VERSION = 1
