"""
Answer Parsing
Boxed scalar answers for counting / true-or-false questions, structured routes
for planning questions, and the format reward
"""

import json
import re
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

from rewardmap.errors import ValidationError
from rewardmap.transit_graph import Segment

BOXED_MARKER = "\\boxed{"
ROUTE_LINE_PATTERN = re.compile(r"take\s+(.+?)\s+from\s+(.+?)\s+to\s+(.+)", re.IGNORECASE)

_TRAILING_PUNCTUATION = ".,;:!? \t\r\n"
_INTEGER = re.compile(r"([+-]?)([0-9]+)")
_OPTION_LETTER = re.compile(r"\(?([A-Da-d])\)?")
_TEXT_WRAPPER = re.compile(r"\\text\{(.*)\}", re.DOTALL)


@dataclass(frozen=True)
class RouteAnswer:
    """Candidate route as raw strings, not yet checked against any network"""

    segments: Tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("Route answer has no segments")
        segments = tuple(Segment(*segment) for segment in self.segments)
        for segment in segments:
            for value in segment:
                if not isinstance(value, str) or not value.strip():
                    raise ValidationError(f"Route answer has an empty field in {segment}")
        object.__setattr__(self, "segments", segments)


@dataclass(frozen=True)
class ParsedAnswer:
    kind: str  # scalar | route | malformed
    scalar_value: Optional[str] = None
    route_value: Optional[RouteAnswer] = None
    format_ok: bool = False

    @classmethod
    def malformed(cls) -> "ParsedAnswer":
        return cls(kind="malformed")

    @classmethod
    def scalar(cls, value: str) -> "ParsedAnswer":
        return cls(kind="scalar", scalar_value=value, format_ok=True)

    @classmethod
    def route(cls, route: RouteAnswer) -> "ParsedAnswer":
        return cls(kind="route", route_value=route, format_ok=True)


def normalize_scalar(text: str) -> str:
    """
    Canonical form of a scalar answer.

    Trims whitespace and trailing punctuation, unwraps \\text{...},
    lowercases yes/no, renders integers without sign noise or leading zeros
    ("07" -> "7") and option letters as a bare capital ("b)" -> "B").
    Idempotent.
    """
    value = text.strip().rstrip(_TRAILING_PUNCTUATION).strip()
    wrapped = _TEXT_WRAPPER.fullmatch(value)
    while wrapped:
        value = wrapped.group(1).strip().rstrip(_TRAILING_PUNCTUATION).strip()
        wrapped = _TEXT_WRAPPER.fullmatch(value)

    if value.lower() in ("yes", "no"):
        return value.lower()
    integer = _INTEGER.fullmatch(value)
    if integer:
        sign, digits = integer.groups()
        digits = digits.lstrip("0") or "0"
        return "-" + digits if sign == "-" and digits != "0" else digits
    letter = _OPTION_LETTER.fullmatch(value)
    if letter:
        return letter.group(1).upper()
    return value


def canonical_name(text: str) -> str:
    """Whitespace-collapsed, casefolded stop or line name"""
    return " ".join(text.split()).casefold()


def last_boxed_content(text: str) -> Optional[str]:
    """
    Content of the last complete \\boxed{...} span, braces matched.

    Returns:
        The inner text, or None when no span closes
    """
    # One pass; each open brace records where its content starts, or -1 for a plain brace
    opened = []
    best = None
    i = 0
    while i < len(text):
        if text.startswith(BOXED_MARKER, i):
            i += len(BOXED_MARKER)
            opened.append(i)
            continue
        char = text[i]
        if char == "{":
            opened.append(-1)
        elif char == "}" and opened:
            start = opened.pop()
            if start >= 0 and (best is None or start > best[0]):
                best = (start, i)
        i += 1
    if best is None:
        return None
    return text[best[0] : best[1]]


def parse_boxed(text: Any) -> ParsedAnswer:
    if not isinstance(text, str):
        return ParsedAnswer.malformed()
    content = last_boxed_content(text)
    if content is None:
        return ParsedAnswer.malformed()
    value = normalize_scalar(content)
    if not value:
        return ParsedAnswer.malformed()
    return ParsedAnswer.scalar(value)


def _route_from_records(records: Any) -> Optional[RouteAnswer]:
    if not isinstance(records, list) or not records:
        return None
    segments = []
    for record in records:
        if not isinstance(record, dict):
            return None
        values = (record.get("line"), record.get("from"), record.get("to"))
        if not all(isinstance(v, str) for v in values):
            return None
        segments.append(Segment(*values))
    try:
        return RouteAnswer(tuple(segments))
    except ValidationError:
        return None


def _route_from_wire(text: str) -> Optional[RouteAnswer]:
    candidates = [text]
    start, end = text.find("["), text.rfind("]")
    if 0 <= start < end:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            records = json.loads(candidate)
        except (ValueError, RecursionError):
            continue
        route = _route_from_records(records)
        if route is not None:
            return route
    return None


def _route_from_text(text: str) -> Optional[RouteAnswer]:
    segments = []
    for raw_line in text.splitlines():
        match = ROUTE_LINE_PATTERN.search(raw_line)
        if match:
            segments.append(Segment(*(group.strip() for group in match.groups())))
    if not segments:
        return None
    try:
        return RouteAnswer(tuple(segments))
    except ValidationError:
        return None


def parse_route(text: Any) -> ParsedAnswer:
    """
    Parse a planning answer.

    Accepts the wire form (JSON array of {line, from, to}, also when embedded
    in surrounding prose) and the text form (one "take <line> from <stop> to
    <stop>" per line; other lines are ignored). Never raises.
    """
    if not isinstance(text, str) or not text.strip():
        return ParsedAnswer.malformed()
    route = _route_from_wire(text.strip()) or _route_from_text(text)
    if route is None:
        return ParsedAnswer.malformed()
    return ParsedAnswer.route(route)


def serialize_route(segments: Sequence[Sequence[str]]) -> str:
    """Canonical wire form"""
    records = [{"line": s[0], "from": s[1], "to": s[2]} for s in segments]
    return json.dumps(records, ensure_ascii=False, separators=(",", ":"))


def render_route_text(segments: Sequence[Sequence[str]]) -> str:
    return "\n".join(f"take {s[0]} from {s[1]} to {s[2]}" for s in segments)


def format_reward(p: ParsedAnswer) -> float:
    return 1.0 if p.format_ok else 0.0
