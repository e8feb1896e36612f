"""Snort rule text parsing and serialization.

A snort-2.9 rule is a seven-token header (action, protocol, source address,
source port, direction, destination address, destination port) followed by an
optional parenthesized body of semicolon-terminated options. This module
parses rule text into :class:`ParsedRule` and serializes it back, keeping the
round trip lossless: ``parse_rule(serialize_rule(parse_rule(text)))`` equals
``parse_rule(text)``.

Identity metadata (``sid``, ``rev``, ``msg``, ``reference``) is split off from
the remaining options so downstream code can treat what is left as the rule's
antecedents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import RuleforgeError

# Joins the values of a repeated option key (e.g. several content options)
# into one categorical value. U+001F cannot occur in snort rule text.
VALUE_JOIN = "\x1f"

# Option keys that carry rule identity rather than match conditions.
IDENTITY_KEYS = frozenset({"sid", "rev", "msg", "reference"})

# Synthetic attribute names for the positional header fields, header order.
HEADER_ATTRIBUTES = ("protocol", "source_ip", "source_port", "target_ip", "target_port")

DIRECTIONS = ("->", "<>")

_CONTINUATION = re.compile(r"\\[ \t]*\r?\n[ \t]*")


class MalformedHeader(RuleforgeError):
    """Rule header does not have the seven required fields."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnterminatedOption(RuleforgeError):
    """Rule body is missing a closing parenthesis or quote."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class InvalidOptionValue(RuleforgeError):
    """An identity option (sid/rev) carries a non-numeric value."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MissingSid(RuleforgeError):
    """A rule flagged for emission has no sid."""


@dataclass(frozen=True)
class RuleHeader:
    action: str
    protocol: str
    src_addr: str
    src_port: str
    direction: str
    dst_addr: str
    dst_port: str

    def attribute_values(self) -> dict[str, str]:
        """Header fields keyed by their synthetic attribute names."""
        return {
            "protocol": self.protocol,
            "source_ip": self.src_addr,
            "source_port": self.src_port,
            "target_ip": self.dst_addr,
            "target_port": self.dst_port,
        }


@dataclass(frozen=True)
class RuleOption:
    """One body option. ``value`` is empty for flag-style options."""

    key: str
    value: str
    ordinal: int


@dataclass
class ParsedRule:
    header: RuleHeader
    options: tuple[RuleOption, ...]
    sid: int | None = None
    rev: int | None = None
    msg: str | None = None
    references: tuple[str, ...] = ()
    raw_text: str = field(default="", compare=False)

    def option_values(self) -> dict[str, str]:
        """Flattened option values: repeated keys joined with VALUE_JOIN."""
        merged: dict[str, list[str]] = {}
        for opt in self.options:
            merged.setdefault(opt.key, []).append(opt.value)
        return {key: VALUE_JOIN.join(vals) for key, vals in merged.items()}

    def attribute_values(self) -> dict[str, str]:
        """All antecedent values: header synthetics plus flattened options."""
        values = self.header.attribute_values()
        values.update(self.option_values())
        return values

    def attribute_keys(self) -> frozenset[str]:
        return frozenset(self.attribute_values())


@dataclass(frozen=True)
class ParseError:
    """One failed logical line from :func:`parse_ruleset`."""

    line: int
    offset: int
    message: str
    text: str


def _header_tokens(header_text: str) -> list[str]:
    """Split a header on whitespace, keeping bracketed lists as one token."""
    tokens: list[str] = []
    current: list[str] = []
    depth = 0
    for ch in header_text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth = max(depth - 1, 0)
        if ch.isspace() and depth == 0:
            if current:
                tokens.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


def _split_options(body: str, base_offset: int) -> list[tuple[str, int]]:
    """Split a rule body into option segments on unquoted, unescaped ';'.

    Returns (segment text, byte offset of segment start). A final segment
    without a trailing semicolon is accepted.
    """
    segments: list[tuple[str, int]] = []
    current: list[str] = []
    seg_start = 0
    in_quotes = False
    escaped = False
    quote_open = 0
    for i, ch in enumerate(body):
        if escaped:
            current.append(ch)
            escaped = False
            continue
        if ch == "\\":
            current.append(ch)
            escaped = True
            continue
        if ch == '"':
            in_quotes = not in_quotes
            if in_quotes:
                quote_open = i
            current.append(ch)
            continue
        if ch == ";" and not in_quotes:
            segments.append(("".join(current), base_offset + seg_start))
            current = []
            seg_start = i + 1
            continue
        current.append(ch)
    if in_quotes:
        raise UnterminatedOption("unterminated quoted value", offset=base_offset + quote_open)
    tail = "".join(current)
    if tail.strip():
        segments.append((tail, base_offset + seg_start))
    return segments


def _strip_quotes(value: str) -> str:
    if len(value) >= 2 and value.startswith('"') and value.endswith('"'):
        return value[1:-1]
    return value


def parse_rule(text: str) -> ParsedRule:
    """Parse one logical snort rule.

    Backslash-newline continuations are joined internally. Raises
    MalformedHeader, UnterminatedOption, or InvalidOptionValue with a byte
    offset into the (joined) rule text.
    """
    logical = _CONTINUATION.sub(" ", text)
    stripped = logical.strip()
    if not stripped:
        raise MalformedHeader("empty rule text", offset=0)

    lparen = stripped.find("(")
    if lparen == -1:
        header_text = stripped
        body = None
        body_offset = len(stripped)
    else:
        if not stripped.endswith(")"):
            raise UnterminatedOption("missing closing ')'", offset=len(stripped))
        header_text = stripped[:lparen]
        body = stripped[lparen + 1 : -1]
        body_offset = lparen + 1

    tokens = _header_tokens(header_text)
    if len(tokens) != 7:
        raise MalformedHeader(
            f"expected 7 header fields, found {len(tokens)}", offset=len(header_text)
        )
    direction = tokens[4]
    if direction not in DIRECTIONS:
        raise MalformedHeader(
            f"invalid direction token {direction!r}",
            offset=max(header_text.find(direction), 0),
        )
    header = RuleHeader(*tokens)

    options: list[RuleOption] = []
    sid: int | None = None
    rev: int | None = None
    msg: str | None = None
    references: list[str] = []
    if body is not None:
        for segment, seg_offset in _split_options(body, body_offset):
            segment = segment.strip()
            if not segment:
                continue
            key, _, raw_value = segment.partition(":")
            key = key.strip().lower()
            value = raw_value.strip()
            if not key:
                continue
            if key == "sid" or key == "rev":
                try:
                    number = int(value)
                except ValueError:
                    raise InvalidOptionValue(
                        f"invalid {key} value {value!r}", offset=seg_offset
                    ) from None
                if key == "sid":
                    sid = number
                else:
                    rev = number
            elif key == "msg":
                msg = _strip_quotes(value)
            elif key == "reference":
                references.append(value)
            else:
                options.append(RuleOption(key=key, value=value, ordinal=len(options)))

    return ParsedRule(
        header=header,
        options=tuple(options),
        sid=sid,
        rev=rev,
        msg=msg,
        references=tuple(references),
        raw_text=text,
    )


def serialize_rule(rule: ParsedRule, *, require_sid: bool = False) -> str:
    """Emit one-line snort syntax for a parsed rule.

    Options come first in ordinal order (flag options as ``key;``), then msg,
    references, sid, and rev. The output re-parses to an equal ParsedRule.
    """
    if require_sid and rule.sid is None:
        raise MissingSid("rule has no sid")
    head = " ".join(
        (
            rule.header.action,
            rule.header.protocol,
            rule.header.src_addr,
            rule.header.src_port,
            rule.header.direction,
            rule.header.dst_addr,
            rule.header.dst_port,
        )
    )
    body: list[str] = []
    for opt in sorted(rule.options, key=lambda o: o.ordinal):
        body.append(f"{opt.key}:{opt.value};" if opt.value else f"{opt.key};")
    if rule.msg is not None:
        body.append(f'msg:"{rule.msg}";')
    for ref in rule.references:
        body.append(f"reference:{ref};")
    if rule.sid is not None:
        body.append(f"sid:{rule.sid};")
    if rule.rev is not None:
        body.append(f"rev:{rule.rev};")
    if not body:
        return head
    return f"{head} ({' '.join(body)})"


def _logical_lines(text: str):
    """Yield (first physical line number, joined logical line) pairs."""
    buffer: list[str] = []
    start_line = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if buffer:
            if line.endswith("\\"):
                buffer.append(line[:-1].strip())
                continue
            buffer.append(line.strip())
            yield start_line, " ".join(part for part in buffer if part)
            buffer = []
            continue
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.endswith("\\"):
            buffer = [stripped[:-1].strip()]
            start_line = line_no
            continue
        yield line_no, stripped
    if buffer:
        yield start_line, " ".join(part for part in buffer if part)


def parse_ruleset(text: str) -> tuple[list[ParsedRule], list[ParseError]]:
    """Parse a whole rules file.

    Lines starting with ``#`` are comments; backslash continuations are
    joined. A malformed rule never aborts the run — it is collected as a
    ParseError (1-based line number of the rule's first physical line) and
    parsing continues with the next line.
    """
    rules: list[ParsedRule] = []
    errors: list[ParseError] = []
    for line_no, logical in _logical_lines(text):
        try:
            rules.append(parse_rule(logical))
        except RuleforgeError as exc:
            errors.append(
                ParseError(
                    line=line_no,
                    offset=getattr(exc, "offset", 0),
                    message=str(exc),
                    text=logical,
                )
            )
    return rules, errors
