"""Polite collection of ads.txt and sellers.json files into a dated snapshot.

Each domain is contacted once per crawl: one initial request for its file,
plus whatever redirects the server answers with, plus a single plain-HTTP
retry when the HTTPS handshake fails.  robots.txt is deliberately not
consulted; a single root-path file fetch is the whole interaction.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import logging
import os
import socket
import ssl
import threading
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, timezone
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import httpx

from .adstxt import AdsTxtFile, parse_ads_txt
from .sellersjson import SellersJsonFile, parse_sellers_json

__all__ = [
    "FetchStatus",
    "FetchResult",
    "FetchConfig",
    "RequestLog",
    "AdsTxtEntry",
    "SellersJsonEntry",
    "Snapshot",
    "fetch_ads_txt",
    "fetch_sellers_json",
    "crawl",
    "normalize_domain",
]

log = logging.getLogger(__name__)

TIMEOUT_ENV = "ADCHAIN_TIMEOUT_SECS"
DEFAULT_USER_AGENT = "adchain/0.1 (+https://example.org/adchain-contact)"


class FetchStatus(str, enum.Enum):
    OK = "Ok"
    NOT_FOUND = "NotFound"
    TIMEOUT = "Timeout"
    DNS_FAILURE = "DnsFailure"
    TOO_MANY_REDIRECTS = "TooManyRedirects"
    TRANSPORT_ERROR = "TransportError"


@dataclasses.dataclass(frozen=True)
class FetchResult:
    url_requested: str
    final_url: str
    status: FetchStatus
    fetched_at: datetime
    http_status: Optional[int] = None
    body: Optional[bytes] = None
    error: Optional[str] = None

    @property
    def content_digest(self) -> Optional[str]:
        return hashlib.sha256(self.body).hexdigest() if self.body is not None else None

    @property
    def ok(self) -> bool:
        return self.status is FetchStatus.OK


def _default_timeout() -> float:
    raw = os.environ.get(TIMEOUT_ENV)
    if raw:
        try:
            return float(raw)
        except ValueError:
            log.warning("ignoring non-numeric %s=%r", TIMEOUT_ENV, raw)
    return 30.0


@dataclasses.dataclass(frozen=True)
class FetchConfig:
    timeout: float = dataclasses.field(default_factory=_default_timeout)
    max_redirects: int = 5
    max_concurrency: int = 8
    user_agent: str = DEFAULT_USER_AGENT
    # Schemes tried in order; later ones are used only after a TLS failure.
    schemes: Tuple[str, ...] = ("https", "http")
    # Lets tests route every domain to a local server.
    url_template: str = "{scheme}://{domain}{path}"
    trust_env: bool = True

    def url(self, scheme: str, domain: str, path: str) -> str:
        return self.url_template.format(scheme=scheme, domain=domain, path=path)


class RequestLog:
    """Append-only, thread-safe record of issued requests."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: List[Tuple[str, str, str]] = []

    def record(self, domain: str, url: str, kind: str = "initial") -> None:
        with self._lock:
            self._entries.append((domain, url, kind))

    @property
    def entries(self) -> List[Tuple[str, str, str]]:
        with self._lock:
            return list(self._entries)

    def initial_requests(self) -> List[Tuple[str, str]]:
        return [(d, u) for d, u, kind in self.entries if kind == "initial"]


def normalize_domain(domain: str) -> str:
    return domain.strip().lower().rstrip(".")


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _caused_by(exc: BaseException, kind: type) -> bool:
    seen = set()
    while exc is not None and id(exc) not in seen:
        if isinstance(exc, kind):
            return True
        seen.add(id(exc))
        exc = exc.__cause__ or exc.__context__
    return False


def _fetch(
    domain: str,
    path: str,
    config: FetchConfig,
    client: Optional[httpx.Client] = None,
    request_log: Optional[RequestLog] = None,
) -> FetchResult:
    domain = normalize_domain(domain)
    own_client = client is None
    if own_client:
        client = _make_client(config)
    first_url = config.url(config.schemes[0], domain, path)
    try:
        for attempt, scheme in enumerate(config.schemes):
            url = config.url(scheme, domain, path)
            if request_log is not None:
                request_log.record(domain, url, "initial" if attempt == 0 else "fallback")
            try:
                response = client.get(url)
            except httpx.TooManyRedirects as exc:
                return FetchResult(first_url, url, FetchStatus.TOO_MANY_REDIRECTS, _now(), error=str(exc))
            except httpx.TimeoutException as exc:
                return FetchResult(first_url, url, FetchStatus.TIMEOUT, _now(), error=str(exc) or "timeout")
            except httpx.HTTPError as exc:
                if _caused_by(exc, socket.gaierror):
                    return FetchResult(first_url, url, FetchStatus.DNS_FAILURE, _now(), error=str(exc))
                if _caused_by(exc, ssl.SSLError) and attempt + 1 < len(config.schemes):
                    log.debug("TLS failure for %s, falling back: %s", url, exc)
                    continue
                return FetchResult(first_url, url, FetchStatus.TRANSPORT_ERROR, _now(), error=str(exc))
            return _from_response(first_url, response)
        raise AssertionError("unreachable: schemes exhausted without result")
    finally:
        if own_client:
            client.close()


def _from_response(url_requested: str, response: httpx.Response) -> FetchResult:
    final_url = str(response.url)
    code = response.status_code
    if 200 <= code < 300:
        return FetchResult(url_requested, final_url, FetchStatus.OK, _now(), code, response.content)
    if code in (404, 410):
        return FetchResult(url_requested, final_url, FetchStatus.NOT_FOUND, _now(), code)
    return FetchResult(url_requested, final_url, FetchStatus.TRANSPORT_ERROR, _now(), code, error=f"HTTP {code}")


def _make_client(config: FetchConfig) -> httpx.Client:
    return httpx.Client(
        follow_redirects=True,
        max_redirects=config.max_redirects,
        timeout=config.timeout,
        headers={"User-Agent": config.user_agent},
        trust_env=config.trust_env,
        limits=httpx.Limits(max_connections=max(1, config.max_concurrency)),
    )


def fetch_ads_txt(
    publisher_domain: str,
    config: Optional[FetchConfig] = None,
    client: Optional[httpx.Client] = None,
    request_log: Optional[RequestLog] = None,
) -> FetchResult:
    """Fetch ``/ads.txt`` from a publisher. Never raises for network failures."""
    return _fetch(publisher_domain, "/ads.txt", config or FetchConfig(), client, request_log)


def fetch_sellers_json(
    ad_system_domain: str,
    config: Optional[FetchConfig] = None,
    client: Optional[httpx.Client] = None,
    request_log: Optional[RequestLog] = None,
) -> FetchResult:
    """Fetch ``/sellers.json`` from an advertising system."""
    return _fetch(ad_system_domain, "/sellers.json", config or FetchConfig(), client, request_log)


class AdsTxtEntry(NamedTuple):
    result: FetchResult
    parsed: Optional[AdsTxtFile]


class SellersJsonEntry(NamedTuple):
    result: FetchResult
    parsed: Optional[SellersJsonFile]


@dataclasses.dataclass
class Snapshot:
    snapshot_date: date
    adstxt_files: Dict[str, AdsTxtEntry] = dataclasses.field(default_factory=dict)
    sellersjson_files: Dict[str, SellersJsonEntry] = dataclasses.field(default_factory=dict)

    def parsed_adstxt(self) -> Dict[str, AdsTxtFile]:
        return {d: e.parsed for d, e in self.adstxt_files.items() if e.parsed is not None}

    def parsed_sellersjson(self) -> Dict[str, SellersJsonFile]:
        return {d: e.parsed for d, e in self.sellersjson_files.items() if e.parsed is not None}

    def failures(self) -> List[Tuple[str, str, FetchResult]]:
        out = [("adstxt", d, e.result) for d, e in self.adstxt_files.items() if not e.result.ok]
        out += [("sellersjson", d, e.result) for d, e in self.sellersjson_files.items() if not e.result.ok]
        return out

    def add_adstxt(self, result: FetchResult, domain: str) -> None:
        domain = normalize_domain(domain)
        parsed = parse_ads_txt(result.body, domain, result.fetched_at) if result.ok else None
        self.adstxt_files[domain] = AdsTxtEntry(result, parsed)

    def add_sellersjson(self, result: FetchResult, domain: str) -> None:
        domain = normalize_domain(domain)
        parsed = parse_sellers_json(result.body, domain, result.fetched_at) if result.ok else None
        self.sellersjson_files[domain] = SellersJsonEntry(result, parsed)


def _unique(domains: Iterable[str]) -> List[str]:
    out: Dict[str, None] = {}
    for domain in domains:
        domain = normalize_domain(domain)
        if domain:
            out.setdefault(domain, None)
    return list(out)


def crawl(
    publishers: Iterable[str],
    ad_systems: Iterable[str],
    config: Optional[FetchConfig] = None,
    snapshot_date: Optional[date] = None,
    request_log: Optional[RequestLog] = None,
) -> Snapshot:
    """Fetch every unique publisher ads.txt and ad-system sellers.json once.

    Requests run on at most ``config.max_concurrency`` worker threads. Each
    successful body is parsed; failures are kept in the snapshot with their
    status so coverage can be reported.
    """
    config = config or FetchConfig()
    request_log = request_log if request_log is not None else RequestLog()
    publishers = _unique(publishers)
    ad_systems = _unique(ad_systems)
    snapshot = Snapshot(snapshot_date or _now().date())
    if not publishers and not ad_systems:
        return snapshot

    jobs = [("adstxt", d) for d in publishers] + [("sellersjson", d) for d in ad_systems]
    with _make_client(config) as client, ThreadPoolExecutor(max_workers=max(1, config.max_concurrency)) as pool:
        futures = []
        for kind, domain in jobs:
            fetch = fetch_ads_txt if kind == "adstxt" else fetch_sellers_json
            futures.append(pool.submit(fetch, domain, config, client, request_log))
        results = [f.result() for f in futures]

    # Insert in input order so the snapshot layout does not depend on timing.
    for (kind, domain), result in zip(jobs, results):
        if kind == "adstxt":
            snapshot.add_adstxt(result, domain)
        else:
            snapshot.add_sellersjson(result, domain)
        if not result.ok:
            log.info("%s %s: %s", kind, domain, result.status.value)
    return snapshot
