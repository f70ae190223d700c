"""Gate sequences and their text grammar.

A sequence is stored as a flat tuple of gate labels in *time order* (the first
label acts first on the prepared state).  Alongside the flat labels it keeps a
compressed block form, ``((labels, repetitions), ...)``, which lets germ powers
such as ``(GxGy)^512`` be evaluated by repeated squaring.  Equality and hashing
use the flat labels only.

Text grammar::

    seq   := item* | '{}'
    item  := label | '(' label+ ')' '^' int
    label := 'G' [a-z0-9_]*
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ParseError

DEFAULT_LABELS = ("Gi", "Gx", "Gy")

Block = tuple[tuple[str, ...], int]

_LABEL_RE = re.compile(r"G[a-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")


@dataclass(frozen=True)
class Provenance:
    """Where a catalog sequence came from.

    ``germ`` is None for sequences that exist only for linear inversion
    (fiducial pairs and bare-gate sandwiches that are not germ powers); those
    carry ``length == 0`` so that they are part of every fitting stage.
    """

    germ: tuple[str, ...] | None
    length: int
    prep: int
    meas: int


def _flatten(blocks: Iterable[Block]) -> tuple[str, ...]:
    out: list[str] = []
    for labels, reps in blocks:
        out.extend(labels * reps)
    return tuple(out)


@dataclass(frozen=True)
class GateSequence:
    labels: tuple[str, ...]
    blocks: tuple[Block, ...] = field(default=(), compare=False, repr=False)
    provenance: Provenance | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.blocks:
            blocks = tuple((tuple(lbls), int(r)) for lbls, r in self.blocks if lbls and r > 0)
            if _flatten(blocks) != self.labels:
                raise ValueError("blocks do not expand to labels")
        else:
            blocks = ((self.labels, 1),) if self.labels else ()
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Block], provenance: Provenance | None = None) -> "GateSequence":
        blocks = tuple((tuple(lbls), int(r)) for lbls, r in blocks)
        return cls(_flatten(blocks), blocks, provenance)

    def __len__(self) -> int:
        return len(self.labels)

    def __add__(self, other: "GateSequence") -> "GateSequence":
        return GateSequence.from_blocks(self.blocks + other.blocks)

    def __str__(self) -> str:
        return format_sequence(self)

    def with_provenance(self, provenance: Provenance | None) -> "GateSequence":
        return GateSequence(self.labels, self.blocks, provenance)


EMPTY = GateSequence(())


def seq(*labels: str) -> GateSequence:
    """Shorthand: ``seq("Gx", "Gy")``."""
    return GateSequence(tuple(labels))


def germ_power(germ: GateSequence | tuple[str, ...], reps: int) -> GateSequence:
    labels = germ.labels if isinstance(germ, GateSequence) else tuple(germ)
    return GateSequence.from_blocks([(labels, reps)])


def format_sequence(s: GateSequence) -> str:
    if not s.labels:
        return "{}"
    parts = []
    for labels, reps in s.blocks:
        body = "".join(labels)
        parts.append(body if reps == 1 else f"({body})^{reps}")
    return "".join(parts)


def parse_sequence(text: str, alphabet: Iterable[str] | None = DEFAULT_LABELS) -> GateSequence:
    """Parse ``GxGy(GxGy)^8``-style text.

    Consecutive bare labels are merged into one block, so
    ``format_sequence(parse_sequence(t)) == t`` for any text the formatter
    produces.  Pass ``alphabet=None`` to accept any label matching the grammar.
    """
    allowed = None if alphabet is None else frozenset(alphabet)
    s = text.strip()
    if s == "{}":
        return EMPTY
    if not s:
        raise ParseError("empty sequence text (use '{}')", text, 0)
    offset = len(text) - len(text.lstrip())

    def label_at(pos: int) -> tuple[str, int]:
        m = _LABEL_RE.match(s, pos)
        if not m:
            raise ParseError(f"unexpected character {s[pos]!r}", text, offset + pos)
        if allowed is not None and m.group() not in allowed:
            raise ParseError(f"unknown gate label {m.group()!r}", text, offset + pos)
        return m.group(), m.end()

    blocks: list[Block] = []
    inline: list[str] = []
    pos = 0
    while pos < len(s):
        ch = s[pos]
        if ch == "(":
            if inline:
                blocks.append((tuple(inline), 1))
                inline = []
            start = pos
            pos += 1
            body: list[str] = []
            while pos < len(s) and s[pos] != ")":
                if s[pos] == "(":
                    raise ParseError("nested parentheses", text, offset + pos)
                lbl, pos = label_at(pos)
                body.append(lbl)
            if pos >= len(s):
                raise ParseError("unbalanced '('", text, offset + start)
            if not body:
                raise ParseError("empty parentheses", text, offset + start)
            pos += 1
            if pos >= len(s) or s[pos] != "^":
                raise ParseError("expected '^' after ')'", text, offset + pos)
            pos += 1
            m = _INT_RE.match(s, pos)
            if not m:
                raise ParseError("malformed exponent", text, offset + pos)
            pos = m.end()
            reps = int(m.group())
            if reps > 0:
                blocks.append((tuple(body), reps))
        elif ch == ")":
            raise ParseError("unbalanced ')'", text, offset + pos)
        else:
            lbl, pos = label_at(pos)
            inline.append(lbl)
    if inline:
        blocks.append((tuple(inline), 1))
    return GateSequence.from_blocks(blocks)
