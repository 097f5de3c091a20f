"""Annotated-corpus types and codecs.

Two text formats are supported, both UTF-8 with LF line endings:

* APC format: blocks of three non-empty lines separated by blank lines.
  Line 1 is the sentence with the aspect replaced by the ``$T$`` marker,
  line 2 the aspect term, line 3 the polarity label. A sentence with k
  aspects is repeated k times, once per aspect.

* ATEPC format: one token per line as ``<token> <tag> <slot>`` where tag
  is one of O/B-ASP/I-ASP and slot is a polarity label or the ``-999``
  sentinel; sentences are separated by blank lines. Each sentence copy
  carries the polarity of exactly one aspect span (the focused aspect);
  every other position, including other tagged aspects, holds ``-999``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:
    from .ingest import Review


class Polarity(Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"

    def __str__(self) -> str:
        return self.value


class Sentinel(Enum):
    """Slot filler for tokens that carry no polarity; serialized as -999."""

    SENTINEL = "-999"


SENTINEL = Sentinel.SENTINEL
SENTINEL_TEXT = "-999"

TAG_OUTSIDE = "O"
TAG_BEGIN = "B-ASP"
TAG_INSIDE = "I-ASP"
TAGS = (TAG_OUTSIDE, TAG_BEGIN, TAG_INSIDE)

ASPECT_MARKER = "$T$"

# Punctuation detached as standalone tokens.
_PUNCT = ".,!?;:()'\""
_TOKEN_RE = re.compile(r"[{p}]|[^\s{p}]+".format(p=re.escape(_PUNCT)))


class ParseError(ValueError):
    """Malformed corpus text; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def tokenize(text: str) -> list[str]:
    """Split on whitespace with punctuation marks as standalone tokens.

    Joining the result with single spaces yields the canonical sentence
    form; tokenizing that form again is a no-op.
    """
    return _TOKEN_RE.findall(text)


def is_atomic_token(token: str) -> bool:
    """True when the token survives tokenization unchanged."""
    return tokenize(token) == [token]


def _check_token(token: str) -> None:
    if not token or re.search(r"\s", token):
        raise ValueError(f"invalid token {token!r}: empty or contains whitespace")


@dataclass(frozen=True)
class ApcRecord:
    """One (sentence, aspect span, polarity) triple.

    ``aspect_span`` is an inclusive (start, end) pair of token indices.
    Tokens must be in canonical form (each survives re-tokenization), so
    that serialization round-trips exactly.
    """

    tokens: tuple[str, ...]
    aspect_span: tuple[int, int]
    polarity: Polarity

    def __post_init__(self) -> None:
        start, end = self.aspect_span
        if not self.tokens:
            raise ValueError("empty sentence")
        if not (0 <= start <= end < len(self.tokens)):
            raise ValueError(f"span {self.aspect_span} out of range for {len(self.tokens)} tokens")
        for token in self.tokens:
            _check_token(token)
            if not is_atomic_token(token):
                raise ValueError(f"token {token!r} is not in canonical form")

    @property
    def aspect_term(self) -> str:
        start, end = self.aspect_span
        return " ".join(self.tokens[start : end + 1])

    @property
    def sentence(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class AtepcSentence:
    """Tokenized sentence with per-token BIO tags and polarity slots.

    All aspect spans of the sentence are tagged, but at most one maximal
    span (the focused aspect) carries a polarity in its slots; everything
    else holds the sentinel. Sentences without any tagged span are valid
    and carry no focus.
    """

    tokens: tuple[str, ...]
    tags: tuple[str, ...]
    polarity_slots: tuple[Polarity | Sentinel, ...]

    def __post_init__(self) -> None:
        n = len(self.tokens)
        if len(self.tags) != n or len(self.polarity_slots) != n:
            raise ValueError("tags and polarity_slots must match token count")
        for token in self.tokens:
            _check_token(token)
        prev = TAG_OUTSIDE
        for i, tag in enumerate(self.tags):
            if tag not in TAGS:
                raise ValueError(f"unknown tag {tag!r} at position {i}")
            if tag == TAG_INSIDE and prev == TAG_OUTSIDE:
                raise ValueError(f"I-ASP at position {i} does not continue a span")
            prev = tag
        for i, slot in enumerate(self.polarity_slots):
            if slot is not SENTINEL and self.tags[i] == TAG_OUTSIDE:
                raise ValueError(f"polarity on untagged position {i}")
        spans = self.aspect_spans()
        focused = [
            (s, e)
            for s, e in spans
            if all(self.polarity_slots[i] is not SENTINEL for i in range(s, e + 1))
        ]
        non_sentinel = sum(1 for slot in self.polarity_slots if slot is not SENTINEL)
        if spans and len(focused) != 1:
            raise ValueError(f"expected exactly one focused span, found {len(focused)}")
        if focused:
            s, e = focused[0]
            if non_sentinel != e - s + 1:
                raise ValueError("polarity slots must cover exactly the focused span")
            values = {self.polarity_slots[i] for i in range(s, e + 1)}
            if len(values) != 1:
                raise ValueError("focused span carries conflicting polarities")
        elif non_sentinel:
            raise ValueError("polarity slots present without a fully covered span")

    def aspect_spans(self) -> list[tuple[int, int]]:
        """Maximal tagged spans, in sentence order."""
        spans = []
        start = None
        for i, tag in enumerate(self.tags):
            if tag == TAG_BEGIN:
                if start is not None:
                    spans.append((start, i - 1))
                start = i
            elif tag == TAG_OUTSIDE:
                if start is not None:
                    spans.append((start, i - 1))
                    start = None
        if start is not None:
            spans.append((start, len(self.tags) - 1))
        return spans

    def focused_span(self) -> tuple[int, int] | None:
        for s, e in self.aspect_spans():
            if self.polarity_slots[s] is not SENTINEL:
                return (s, e)
        return None

    def focused_polarity(self) -> Polarity | None:
        span = self.focused_span()
        if span is None:
            return None
        slot = self.polarity_slots[span[0]]
        assert isinstance(slot, Polarity)
        return slot


@dataclass(frozen=True)
class OverallLabeledReview:
    """A review paired with its manually assigned overall sentiment."""

    review: "Review"
    overall: Polarity


def _polarity_from_text(text: str, line_no: int) -> Polarity:
    for polarity in Polarity:
        if polarity.value == text:
            return polarity
    raise ParseError(line_no, f"unknown polarity {text!r}")


def _blocks(text: str) -> Iterable[list[tuple[int, str]]]:
    """Runs of consecutive non-empty lines, with 1-based line numbers."""
    block: list[tuple[int, str]] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if line.strip():
            block.append((line_no, line.rstrip()))
        elif block:
            yield block
            block = []
    if block:
        yield block


def parse_apc(text: str) -> list[ApcRecord]:
    """Parse APC-format text into records, one per 3-line block."""
    records = []
    for block in _blocks(text):
        if len(block) != 3:
            raise ParseError(block[0][0], f"expected 3-line block, got {len(block)} lines")
        (sent_no, sent_line), (_, aspect_line), (pol_no, pol_line) = block
        parts = sent_line.split(ASPECT_MARKER)
        if len(parts) != 2:
            raise ParseError(
                sent_no, f"expected exactly one {ASPECT_MARKER} marker, found {len(parts) - 1}"
            )
        aspect_tokens = tokenize(aspect_line)
        if not aspect_tokens:
            raise ParseError(sent_no + 1, "empty aspect term")
        prefix = tokenize(parts[0])
        suffix = tokenize(parts[1])
        polarity = _polarity_from_text(pol_line.strip(), pol_no)
        span = (len(prefix), len(prefix) + len(aspect_tokens) - 1)
        records.append(
            ApcRecord(
                tokens=tuple(prefix + aspect_tokens + suffix),
                aspect_span=span,
                polarity=polarity,
            )
        )
    return records


def serialize_apc(records: Sequence[ApcRecord]) -> str:
    """Inverse of parse_apc: three-line blocks separated by blank lines."""
    blocks = []
    for record in records:
        start, end = record.aspect_span
        sentence = " ".join(
            list(record.tokens[:start]) + [ASPECT_MARKER] + list(record.tokens[end + 1 :])
        )
        blocks.append(f"{sentence}\n{record.aspect_term}\n{record.polarity.value}\n")
    return "\n".join(blocks)


def apc_to_atepc(records: Sequence[ApcRecord]) -> list[AtepcSentence]:
    """Convert APC records to one tagged sentence copy per record.

    Records of the same sentence (appearing contiguously) share their BIO
    tags: every aspect span of the sentence is tagged in every copy, but
    only the record's own span carries its polarity.
    """
    sentences: list[AtepcSentence] = []
    group: list[ApcRecord] = []

    def flush() -> None:
        if not group:
            return
        # Duplicate reviews yield repeated identical spans; only partial
        # overlaps conflict.
        spans = sorted({record.aspect_span for record in group})
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            if s2 <= e1:
                raise ValueError(f"overlapping aspect spans {(s1, e1)} and {(s2, e2)}")
        tokens = group[0].tokens
        tags = [TAG_OUTSIDE] * len(tokens)
        for s, e in spans:
            tags[s] = TAG_BEGIN
            for i in range(s + 1, e + 1):
                tags[i] = TAG_INSIDE
        for record in group:
            slots: list[Polarity | Sentinel] = [SENTINEL] * len(tokens)
            s, e = record.aspect_span
            for i in range(s, e + 1):
                slots[i] = record.polarity
            sentences.append(AtepcSentence(tokens, tuple(tags), tuple(slots)))
        group.clear()

    for record in records:
        if group and record.tokens != group[0].tokens:
            flush()
        group.append(record)
    flush()
    return sentences


def serialize_atepc(sentences: Sequence[AtepcSentence]) -> str:
    """One ``<token> <tag> <slot>`` line per token, blank line between sentences."""
    blocks = []
    for sentence in sentences:
        lines = []
        for token, tag, slot in zip(sentence.tokens, sentence.tags, sentence.polarity_slots):
            slot_text = SENTINEL_TEXT if slot is SENTINEL else slot.value
            lines.append(f"{token} {tag} {slot_text}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def parse_atepc(text: str) -> list[AtepcSentence]:
    """Inverse of serialize_atepc."""
    sentences = []
    for block in _blocks(text):
        tokens: list[str] = []
        tags: list[str] = []
        slots: list[Polarity | Sentinel] = []
        for line_no, line in block:
            columns = line.split(" ")
            if len(columns) != 3:
                raise ParseError(line_no, f"expected 3 columns, got {len(columns)}")
            token, tag, slot_text = columns
            if tag not in TAGS:
                raise ParseError(line_no, f"unknown tag {tag!r}")
            tokens.append(token)
            tags.append(tag)
            if slot_text == SENTINEL_TEXT:
                slots.append(SENTINEL)
            else:
                slots.append(_polarity_from_text(slot_text, line_no))
        try:
            sentences.append(AtepcSentence(tuple(tokens), tuple(tags), tuple(slots)))
        except ValueError as exc:
            raise ParseError(block[0][0], str(exc)) from exc
    return sentences
