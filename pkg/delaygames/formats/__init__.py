"""File formats: pydantic schemas and the JSON codec built on them."""

from .codec import (
    dump_game,
    dump_profile,
    dump_report,
    load_delay_sequence,
    load_game,
    load_profile,
    parse_game,
    parse_profile,
    read_thread_trace,
    read_trace,
    TraceWriter,
)

__all__ = [
    "dump_game",
    "dump_profile",
    "dump_report",
    "load_delay_sequence",
    "load_game",
    "load_profile",
    "parse_game",
    "parse_profile",
    "read_thread_trace",
    "read_trace",
    "TraceWriter",
]
