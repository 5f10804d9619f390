"""The bundled protocol corpus with expected verdicts.

Seven small protocols exercise both outcomes of the decision procedure and
both violation kinds; the expected verdicts here are what the test suite
and ``bench`` compare against.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

from ..syntax import GlobalType, parse_global_type
from ..validity import ViolationKind

__all__ = ["CorpusEntry", "entries", "names", "text", "load"]


@dataclass(frozen=True)
class CorpusEntry:
    """One bundled protocol and its expected verdict."""

    name: str
    filename: str
    implementable: bool
    violation: Optional[ViolationKind]

    def text(self) -> str:
        return text(self.name)

    def load(self) -> GlobalType:
        return load(self.name)


ENTRIES: tuple[CorpusEntry, ...] = (
    CorpusEntry("odd_even", "odd_even.gt", True, None),
    CorpusEntry("g_r", "gr.gt", False, ViolationKind.RECEIVE_VALIDITY),
    CorpusEntry("g_r_prime", "gr_prime.gt", True, None),
    CorpusEntry("g_s", "gs.gt", False, ViolationKind.SEND_VALIDITY),
    CorpusEntry("g_s_prime", "gs_prime.gt", True, None),
    CorpusEntry("g_fold", "g_fold.gt", True, None),
    CorpusEntry("g_unf", "g_unf.gt", True, None),
)

_BY_NAME = {e.name: e for e in ENTRIES}


def entries() -> tuple[CorpusEntry, ...]:
    """All corpus entries, in display order."""
    return ENTRIES


def names() -> tuple[str, ...]:
    return tuple(e.name for e in ENTRIES)


def text(name: str) -> str:
    """The protocol source text of the named entry."""
    entry = _BY_NAME.get(name)
    if entry is None:
        raise KeyError(f"no corpus protocol named {name!r}")
    return resources.files(__package__).joinpath(entry.filename).read_text()


def load(name: str) -> GlobalType:
    """Parse the named entry."""
    return parse_global_type(text(name))
