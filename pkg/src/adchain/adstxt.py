"""Parsing and canonical serialization of ads.txt files.

The grammar follows the IAB Tech Lab ads.txt specification: one record per
line, ``<ad system domain>, <seller account id>, <DIRECT|RESELLER>[, <cert
authority id>]``, with ``#`` comments and ``NAME=value`` variable lines.
Parsing is lenient; anything that is not a record, variable, comment or blank
line becomes a per-line diagnostic instead of failing the whole file.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from datetime import datetime
from typing import Dict, List, Optional, Tuple, Union

__all__ = [
    "Relationship",
    "AdsTxtRecord",
    "Variable",
    "Diagnostic",
    "AdsTxtFile",
    "parse_record",
    "parse_ads_txt",
    "dedupe_records",
    "serialize",
    "split_lines",
]


class Relationship(str, enum.Enum):
    DIRECT = "DIRECT"
    RESELLER = "RESELLER"

    @classmethod
    def parse(cls, text: str) -> Optional["Relationship"]:
        try:
            return cls(text.strip().upper())
        except ValueError:
            return None


@dataclasses.dataclass(frozen=True)
class AdsTxtRecord:
    ad_system_domain: str
    seller_account_id: str
    relationship: Relationship
    cert_authority_id: Optional[str] = None
    # Position is diagnostic metadata only; two records declaring the same
    # thing on different lines are equal.
    line_no: int = dataclasses.field(default=0, compare=False)

    @property
    def key(self) -> Tuple[str, str, Relationship]:
        return (self.ad_system_domain, self.seller_account_id, self.relationship)


@dataclasses.dataclass(frozen=True)
class Variable:
    name: str
    value: str
    line_no: int = dataclasses.field(default=0, compare=False)


@dataclasses.dataclass(frozen=True)
class Diagnostic:
    line_no: int
    message: str


ParsedLine = Union[AdsTxtRecord, Variable, Diagnostic, None]


@dataclasses.dataclass
class AdsTxtFile:
    publisher_domain: str
    records: List[AdsTxtRecord] = dataclasses.field(default_factory=list)
    variables: Dict[str, List[str]] = dataclasses.field(default_factory=dict)
    diagnostics: List[Diagnostic] = dataclasses.field(default_factory=list)
    fetched_at: Optional[datetime] = None
    line_count: int = 0
    comment_lines: int = 0

    def variable(self, name: str) -> Optional[str]:
        """First value of variable ``name`` (case-insensitive), if declared."""
        values = self.variables.get(name.upper())
        return values[0] if values else None

    @property
    def line_diagnostics(self) -> List[Diagnostic]:
        return [d for d in self.diagnostics if d.line_no > 0]


_VARIABLE_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9_-]*$")
_WHITESPACE = re.compile(r"\s")


def split_lines(text: str) -> List[str]:
    """Split on LF, CRLF or lone CR; a trailing terminator adds no line."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return lines


def parse_record(line: str, line_no: int) -> ParsedLine:
    """Classify a single ads.txt line.

    Returns an :class:`AdsTxtRecord`, a :class:`Variable`, ``None`` for blank
    and comment-only lines, or a :class:`Diagnostic` for anything malformed.
    """
    content = line.split("#", 1)[0].strip()
    if not content:
        return None

    eq = content.find("=")
    comma = content.find(",")
    if eq != -1 and (comma == -1 or eq < comma):
        name, value = content[:eq].strip(), content[eq + 1 :].strip()
        if not _VARIABLE_NAME.match(name):
            return Diagnostic(line_no, f"invalid variable name {name!r}")
        return Variable(name.upper(), value, line_no)

    # Extension data after ';' is allowed by the IAB grammar and ignored here.
    fields = [f.strip() for f in content.split(";", 1)[0].split(",")]
    if len(fields) < 3:
        missing = ("seller account id", "relationship")[len(fields) - 1 :]
        return Diagnostic(line_no, f"missing {' and '.join(missing)} field")
    if len(fields) > 4:
        return Diagnostic(line_no, f"too many fields ({len(fields)})")

    domain, account_id, relationship_text = fields[0].lower(), fields[1], fields[2]
    if not domain:
        return Diagnostic(line_no, "empty ad system domain")
    if _WHITESPACE.search(domain):
        return Diagnostic(line_no, f"whitespace in ad system domain {domain!r}")
    if not account_id:
        return Diagnostic(line_no, "empty seller account id")
    relationship = Relationship.parse(relationship_text)
    if relationship is None:
        return Diagnostic(line_no, f"unknown relationship {relationship_text!r}")
    cert = fields[3] if len(fields) == 4 and fields[3] else None
    return AdsTxtRecord(domain, account_id, relationship, cert, line_no)


def parse_ads_txt(
    text: Union[str, bytes],
    publisher_domain: str,
    fetched_at: Optional[datetime] = None,
) -> AdsTxtFile:
    """Parse a whole ads.txt file.

    ``text`` may be raw bytes; they are decoded as UTF-8 with invalid
    sequences replaced, and the replacement is reported as a file-level
    diagnostic (line 0).
    """
    diagnostics: List[Diagnostic] = []
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            text = text.decode("utf-8", errors="replace")
            diagnostics.append(Diagnostic(0, "invalid UTF-8 bytes replaced"))
    if text.startswith("\ufeff"):
        text = text[1:]

    result = AdsTxtFile(publisher_domain=publisher_domain.strip().lower(), fetched_at=fetched_at)
    result.diagnostics = diagnostics
    lines = split_lines(text)
    result.line_count = len(lines)
    for line_no, line in enumerate(lines, start=1):
        parsed = parse_record(line, line_no)
        if parsed is None:
            result.comment_lines += 1
        elif isinstance(parsed, AdsTxtRecord):
            result.records.append(parsed)
        elif isinstance(parsed, Variable):
            result.variables.setdefault(parsed.name, []).append(parsed.value)
        else:
            diagnostics.append(parsed)
    return result


def dedupe_records(file: Union[AdsTxtFile, List[AdsTxtRecord]]) -> List[AdsTxtRecord]:
    """Drop repeated (domain, account id, relationship) records, keeping the first."""
    records = file.records if isinstance(file, AdsTxtFile) else file
    seen = set()
    out = []
    for record in records:
        if record.key not in seen:
            seen.add(record.key)
            out.append(record)
    return out


def format_record(record: AdsTxtRecord) -> str:
    fields = [record.ad_system_domain, record.seller_account_id, record.relationship.value]
    if record.cert_authority_id:
        fields.append(record.cert_authority_id)
    return ", ".join(fields)


def serialize(file: AdsTxtFile) -> str:
    """Canonical text form: records, then variables, LF-terminated."""
    lines = [format_record(r) for r in file.records]
    for name, values in file.variables.items():
        lines.extend(f"{name}={value}" for value in values)
    return "".join(line + "\n" for line in lines)
