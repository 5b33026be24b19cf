"""Implementability checks for asynchronous multiparty protocols."""

from .events import AsyncEvent, SyncEvent, format_word, parse_word, rcv, snd, split
from .syntax import ParseError, parse_global, parse_local, render, well_formed

__version__ = "0.1.0"

__all__ = [
    "AsyncEvent",
    "SyncEvent",
    "ParseError",
    "format_word",
    "parse_global",
    "parse_local",
    "parse_word",
    "rcv",
    "render",
    "snd",
    "split",
    "well_formed",
]
