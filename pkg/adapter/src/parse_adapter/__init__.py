"""Turn raw-text corpora into the CoNLL-U files pairsent consumes."""

from .backends import BACKENDS, AdapterError, SpacyBackend, StubBackend, get_backend
from .convert import AdaptReport, RawDoc, adapt, read_raw_jsonl

__version__ = "0.1.0"

__all__ = ["AdapterError", "AdaptReport", "BACKENDS", "RawDoc", "SpacyBackend",
           "StubBackend", "adapt", "get_backend", "read_raw_jsonl"]
