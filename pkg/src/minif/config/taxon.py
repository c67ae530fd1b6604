"""Hierarchical control-point names.

Grammar: 2..8 dot-joined segments, each matching [a-z0-9_-]{1,32}; the
rendered form is at most 256 characters and the first segment names the
facility root.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import MinifError

SEGMENT_RE = re.compile(r"^[a-z0-9_-]{1,32}$")
MIN_SEGMENTS = 2
MAX_SEGMENTS = 8
MAX_RENDERED = 256


class EmptyName(MinifError):
    pass


class BadSegment(MinifError):
    pass


class TooManySegments(MinifError):
    pass


class TooLong(MinifError):
    pass


@dataclass(frozen=True)
class Taxon:
    segments: tuple[str, ...]

    def render(self) -> str:
        return ".".join(self.segments)

    def __str__(self):
        return self.render()

    @property
    def root(self) -> str:
        return self.segments[0]

    def is_prefix_of(self, other: "Taxon") -> bool:
        return other.segments[:len(self.segments)] == self.segments


def parse_taxon(text: str) -> Taxon:
    if not text:
        raise EmptyName()
    if len(text) > MAX_RENDERED:
        raise TooLong(f"{len(text)} chars")
    segments = text.split(".")
    if len(segments) > MAX_SEGMENTS:
        raise TooManySegments(f"{len(segments)} segments")
    if len(segments) < MIN_SEGMENTS:
        raise BadSegment(f"need at least {MIN_SEGMENTS} segments, got {len(segments)}")
    for seg in segments:
        if not SEGMENT_RE.match(seg):
            raise BadSegment(repr(seg))
    return Taxon(tuple(segments))


def render_taxon(t: Taxon) -> str:
    return t.render()


def is_valid_taxon(text: str) -> bool:
    try:
        parse_taxon(text)
        return True
    except MinifError:
        return False
