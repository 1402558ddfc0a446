"""External annotations and the on-disk snapshot store.

Covers credibility labels, traffic counts, the domain-to-entity map, public
suffix list lookups, and saving/loading snapshots under
``<root>/<YYYY-MM-DD>/``.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import logging
import os
import re
from datetime import date, datetime
from importlib import resources
from pathlib import Path
from typing import Dict, Generic, Iterable, List, Optional, Set, Tuple, TypeVar, Union

from ._fs import atomic_write
from .adstxt import parse_ads_txt
from .fetcher import AdsTxtEntry, FetchResult, FetchStatus, SellersJsonEntry, Snapshot, normalize_domain
from .sellersjson import parse_sellers_json

__all__ = [
    "Credibility",
    "FactualReporting",
    "ReliabilityTier",
    "TrafficLabel",
    "SiteLabel",
    "TrafficRecord",
    "Ingested",
    "ingest_labels",
    "ingest_traffic",
    "load_entities",
    "entity_of",
    "PublicSuffixList",
    "load_psl",
    "etld_plus_one",
    "SnapshotError",
    "MissingManifest",
    "DigestMismatch",
    "save_snapshot",
    "load_snapshot",
    "list_snapshots",
    "resolve_snapshot_date",
]

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]
T = TypeVar("T")


def _enum_key(text: str) -> str:
    return re.sub(r"[\s_\-]+", "_", text.strip()).upper()


class _LabelEnum(str, enum.Enum):
    @classmethod
    def parse(cls, text: str):
        """Case-insensitive lookup with spaces, hyphens and underscores interchangeable."""
        key = _enum_key(text)
        if key in cls.__members__:
            return cls.__members__[key]
        return cls._aliases().get(key)

    @classmethod
    def _aliases(cls) -> dict:
        return {}


class Credibility(_LabelEnum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"
    UNKNOWN = "UNKNOWN"

    @classmethod
    def _aliases(cls) -> dict:
        return {f"{m}_CREDIBILITY": cls[m] for m in ("LOW", "MEDIUM", "HIGH")}


class FactualReporting(_LabelEnum):
    VERY_LOW = "VERY_LOW"
    LOW = "LOW"
    MIXED = "MIXED"
    MOSTLY_FACTUAL = "MOSTLY_FACTUAL"
    HIGH = "HIGH"
    VERY_HIGH = "VERY_HIGH"
    UNKNOWN = "UNKNOWN"


class ReliabilityTier(_LabelEnum):
    LEAST_RELIABLE = "LEAST_RELIABLE"
    GENERALLY_UNRELIABLE = "GENERALLY_UNRELIABLE"
    MIXED = "MIXED"
    GENERALLY_RELIABLE = "GENERALLY_RELIABLE"
    MOST_RELIABLE = "MOST_RELIABLE"


class TrafficLabel(_LabelEnum):
    MINIMAL = "MINIMAL"
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"

    @property
    def ordinal(self) -> int:
        return list(TrafficLabel).index(self)


@dataclasses.dataclass(frozen=True)
class SiteLabel:
    domain: str
    credibility: Credibility = Credibility.UNKNOWN
    factual_reporting: FactualReporting = FactualReporting.UNKNOWN
    reliability_tier: Optional[ReliabilityTier] = None
    traffic_label: Optional[TrafficLabel] = None


@dataclasses.dataclass(frozen=True)
class TrafficRecord:
    domain: str
    monthly_visits: int
    as_of: Optional[date] = None


@dataclasses.dataclass
class Ingested(Generic[T]):
    """Rows keyed by domain plus the per-row warnings raised while reading them."""

    data: Dict[str, T]
    warnings: List[str] = dataclasses.field(default_factory=list)


LABEL_COLUMNS = ("domain", "credibility", "factual_reporting", "reliability_tier", "traffic_label")
TRAFFIC_COLUMNS = ("domain", "monthly_visits", "as_of")


def _read_rows(path: PathLike, expected: Tuple[str, ...], warnings: List[str]):
    # utf-8-sig: spreadsheets love to prepend a BOM.
    with open(path, newline="", encoding="utf-8-sig") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            warnings.append(f"{path}: MissingHeader (empty file)")
            return
        header = [h.strip().lower() for h in header]
        if "domain" not in header:
            warnings.append(f"{path}: MissingHeader (expected {','.join(expected)})")
            return
        missing = [c for c in expected if c not in header]
        if missing:
            warnings.append(f"{path}: MissingHeader (columns absent: {','.join(missing)})")
        for row in reader:
            line_no = reader.line_num
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                warnings.append(f"{path}:{line_no}: UnparsableRow (expected {len(header)} cells, got {len(row)})")
                continue
            yield line_no, {k: v.strip() for k, v in zip(header, row)}


def _parse_enum(cls, text: str, fallback, where: str, warnings: List[str]):
    if not text:
        return fallback
    value = cls.parse(text)
    if value is None:
        warnings.append(f"{where}: unknown {cls.__name__} {text!r}")
        return fallback
    return value


def ingest_labels(csv_path: PathLike) -> Ingested[SiteLabel]:
    """Read ``domain,credibility,factual_reporting,reliability_tier,traffic_label``.

    Unknown enum text falls back to UNKNOWN (or ``None`` for the optional
    columns) with a warning; duplicate domains keep the last row.
    """
    warnings: List[str] = []
    labels: Dict[str, SiteLabel] = {}
    for line_no, row in _read_rows(csv_path, LABEL_COLUMNS, warnings):
        where = f"{csv_path}:{line_no}"
        domain = normalize_domain(row.get("domain", ""))
        if not domain:
            warnings.append(f"{where}: UnparsableRow (empty domain)")
            continue
        label = SiteLabel(
            domain=domain,
            credibility=_parse_enum(Credibility, row.get("credibility", ""), Credibility.UNKNOWN, where, warnings),
            factual_reporting=_parse_enum(
                FactualReporting, row.get("factual_reporting", ""), FactualReporting.UNKNOWN, where, warnings
            ),
            reliability_tier=_parse_enum(ReliabilityTier, row.get("reliability_tier", ""), None, where, warnings),
            traffic_label=_parse_enum(TrafficLabel, row.get("traffic_label", ""), None, where, warnings),
        )
        if domain in labels:
            warnings.append(f"{where}: duplicate domain {domain}; last row wins")
        labels[domain] = label
    return Ingested(labels, warnings)


def ingest_traffic(csv_path: PathLike) -> Ingested[TrafficRecord]:
    """Read ``domain,monthly_visits,as_of``; negative or non-integer visits are rejected per row."""
    warnings: List[str] = []
    traffic: Dict[str, TrafficRecord] = {}
    for line_no, row in _read_rows(csv_path, TRAFFIC_COLUMNS, warnings):
        where = f"{csv_path}:{line_no}"
        domain = normalize_domain(row.get("domain", ""))
        raw_visits = row.get("monthly_visits", "").replace("_", "")
        try:
            visits = int(raw_visits)
        except ValueError:
            try:
                as_float = float(raw_visits)
            except ValueError:
                as_float = None
            if as_float is None or not as_float.is_integer():
                warnings.append(f"{where}: UnparsableRow (monthly_visits {raw_visits!r})")
                continue
            visits = int(as_float)
        if not domain:
            warnings.append(f"{where}: UnparsableRow (empty domain)")
            continue
        if visits < 0:
            warnings.append(f"{where}: UnparsableRow (negative monthly_visits {visits})")
            continue
        as_of = None
        if row.get("as_of"):
            try:
                as_of = date.fromisoformat(row["as_of"])
            except ValueError:
                warnings.append(f"{where}: unparsable as_of {row['as_of']!r}")
        if domain in traffic:
            warnings.append(f"{where}: duplicate domain {domain}; last row wins")
        traffic[domain] = TrafficRecord(domain, visits, as_of)
    return Ingested(traffic, warnings)


def load_entities(json_path: PathLike) -> Dict[str, str]:
    """Load a flat ``{domain: entity_name}`` JSON object."""
    with open(json_path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValueError(f"{json_path}: expected a JSON object mapping domain to entity name")
    return {normalize_domain(str(k)): str(v) for k, v in raw.items()}


def entity_of(domain: str, entity_map: Optional[Dict[str, str]]) -> str:
    """Owning entity of ``domain``; the domain itself when unmapped."""
    domain = normalize_domain(domain)
    if entity_map:
        return entity_map.get(domain, domain)
    return domain


def _to_ascii(label: str) -> str:
    if label.isascii():
        return label
    try:
        return label.encode("idna").decode("ascii")
    except UnicodeError:
        return label


class PublicSuffixList:
    """Rules from a ``public_suffix_list.dat`` file, stored in punycode."""

    def __init__(self, rules: Iterable[str] = ()) -> None:
        self.rules: Set[str] = set()
        self.wildcards: Set[str] = set()
        self.exceptions: Set[str] = set()
        for rule in rules:
            self.add_rule(rule)

    def add_rule(self, rule: str) -> None:
        rule = rule.strip().lower()
        if not rule or rule.startswith("//"):
            return
        # Only the first whitespace-delimited token is the rule.
        rule = rule.split()[0]
        if rule.startswith("!"):
            self.exceptions.add(".".join(_to_ascii(p) for p in rule[1:].split(".")))
        elif rule.startswith("*."):
            self.wildcards.add(".".join(_to_ascii(p) for p in rule[2:].split(".")))
        else:
            self.rules.add(".".join(_to_ascii(p) for p in rule.split(".")))

    @classmethod
    def from_text(cls, text: str) -> "PublicSuffixList":
        return cls(text.splitlines())

    @classmethod
    def from_file(cls, path: PathLike) -> "PublicSuffixList":
        with open(path, encoding="utf-8") as handle:
            return cls(handle)

    def public_suffix_length(self, labels: List[str]) -> int:
        """Number of trailing labels forming the public suffix of ``labels``."""
        n = len(labels)
        best = 1  # the implicit "*" rule
        for i in range(n):
            candidate = ".".join(labels[i:])
            if candidate in self.exceptions:
                # Exception rules win outright and drop their leftmost label.
                return n - i - 1
            size = n - i
            if size <= best:
                continue
            if candidate in self.rules:
                best = size
            elif i + 1 < n and ".".join(labels[i + 1 :]) in self.wildcards:
                best = size
        return best


_DEFAULT_PSL: Optional[PublicSuffixList] = None


def load_psl(path: Optional[PathLike] = None) -> PublicSuffixList:
    """Load a PSL file, or the bundled snapshot (see ``data/PSL_SOURCE.txt``) when ``path`` is None."""
    global _DEFAULT_PSL
    if path is not None:
        return PublicSuffixList.from_file(path)
    if _DEFAULT_PSL is None:
        text = resources.files("adchain").joinpath("data/public_suffix_list.dat").read_text(encoding="utf-8")
        _DEFAULT_PSL = PublicSuffixList.from_text(text)
    return _DEFAULT_PSL


def etld_plus_one(hostname: str, psl: Optional[PublicSuffixList] = None) -> Optional[str]:
    """Registrable domain of ``hostname``, or None if it is itself a public suffix."""
    psl = psl or load_psl()
    hostname = hostname.strip().lower().rstrip(".")
    if not hostname or hostname.startswith(".") or ".." in hostname:
        return None
    original = hostname.split(".")
    if len(original) < 2:
        return None
    suffix_len = psl.public_suffix_length([_to_ascii(p) for p in original])
    if suffix_len >= len(original):
        return None
    # Labels come back in the caller's form (Unicode stays Unicode).
    return ".".join(original[-(suffix_len + 1) :])


# --------------------------------------------------------------------------
# Snapshot persistence
# --------------------------------------------------------------------------


class SnapshotError(Exception):
    pass


class MissingManifest(SnapshotError):
    pass


class DigestMismatch(SnapshotError):
    pass


MANIFEST = "manifest.json"
_SAFE_DOMAIN = re.compile(r"^[a-z0-9_][a-z0-9_.-]*$")


def _file_name(domain: str, suffix: str) -> str:
    if not _SAFE_DOMAIN.match(domain) or ".." in domain:
        raise SnapshotError(f"refusing to store unsafe domain name {domain!r}")
    return domain + suffix


def _manifest_entry(result: FetchResult) -> dict:
    return {
        "status": result.status.value,
        "http_status": result.http_status,
        "url_requested": result.url_requested,
        "final_url": result.final_url,
        "fetched_at": result.fetched_at.isoformat(),
        "sha256": result.content_digest,
        "error": result.error,
    }


def save_snapshot(snapshot: Snapshot, root_dir: PathLike) -> Path:
    """Write ``snapshot`` under ``root_dir/<date>/`` and return that directory.

    Bodies go to ``adstxt/<domain>.txt`` and ``sellersjson/<domain>.json``;
    ``manifest.json`` is written last so a reader never sees a manifest that
    points at missing bodies.
    """
    base = Path(root_dir) / snapshot.snapshot_date.isoformat()
    manifest = {"snapshot_date": snapshot.snapshot_date.isoformat(), "adstxt": {}, "sellersjson": {}}
    for kind, files, suffix in (
        ("adstxt", snapshot.adstxt_files, ".txt"),
        ("sellersjson", snapshot.sellersjson_files, ".json"),
    ):
        for domain in sorted(files):
            result = files[domain].result
            if result.body is not None:
                atomic_write(base / kind / _file_name(domain, suffix), result.body)
            manifest[kind][domain] = _manifest_entry(result)
    payload = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write(base / MANIFEST, payload.encode("utf-8"))
    return base


def _load_result(base: Path, kind: str, domain: str, suffix: str, entry: dict) -> FetchResult:
    body = None
    digest = entry.get("sha256")
    if digest:
        body_path = base / kind / _file_name(domain, suffix)
        try:
            body = body_path.read_bytes()
        except FileNotFoundError as exc:
            raise DigestMismatch(f"{body_path}: body missing but manifest lists sha256 {digest}") from exc
        actual = hashlib.sha256(body).hexdigest()
        if actual != digest:
            raise DigestMismatch(f"{body_path}: sha256 {actual} != manifest {digest}")
    return FetchResult(
        url_requested=entry.get("url_requested") or entry.get("final_url") or "",
        final_url=entry.get("final_url") or "",
        status=FetchStatus(entry["status"]),
        fetched_at=datetime.fromisoformat(entry["fetched_at"]),
        http_status=entry.get("http_status"),
        body=body,
        error=entry.get("error"),
    )


def load_snapshot(root_dir: PathLike, snapshot_date: Union[date, str]) -> Snapshot:
    """Load and re-parse the snapshot for ``snapshot_date``, verifying every body digest."""
    if isinstance(snapshot_date, str):
        snapshot_date = resolve_snapshot_date(root_dir, snapshot_date)
    base = Path(root_dir) / snapshot_date.isoformat()
    try:
        manifest = json.loads((base / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MissingManifest(f"no manifest at {base / MANIFEST}") from exc

    snapshot = Snapshot(snapshot_date)
    for domain, entry in sorted(manifest.get("adstxt", {}).items()):
        result = _load_result(base, "adstxt", domain, ".txt", entry)
        parsed = parse_ads_txt(result.body, domain, result.fetched_at) if result.ok else None
        snapshot.adstxt_files[domain] = AdsTxtEntry(result, parsed)
    for domain, entry in sorted(manifest.get("sellersjson", {}).items()):
        result = _load_result(base, "sellersjson", domain, ".json", entry)
        parsed = parse_sellers_json(result.body, domain, result.fetched_at) if result.ok else None
        snapshot.sellersjson_files[domain] = SellersJsonEntry(result, parsed)
    return snapshot


def list_snapshots(root_dir: PathLike) -> List[date]:
    root = Path(root_dir)
    if not root.is_dir():
        return []
    out = []
    for child in root.iterdir():
        try:
            day = date.fromisoformat(child.name)
        except ValueError:
            continue
        if (child / MANIFEST).is_file():
            out.append(day)
    return sorted(out)


def resolve_snapshot_date(root_dir: PathLike, text: str) -> date:
    """Accept ``YYYY-MM-DD`` or a unique prefix such as ``YYYY-MM``."""
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    matches = [d for d in list_snapshots(root_dir) if d.isoformat().startswith(text)]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise MissingManifest(f"no snapshot under {root_dir} matches {text!r}")
    raise SnapshotError(f"{text!r} is ambiguous: {', '.join(d.isoformat() for d in matches)}")
