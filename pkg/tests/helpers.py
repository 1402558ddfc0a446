"""Small builders for in-memory snapshots."""

from __future__ import annotations

import json
from datetime import date, datetime, timezone

from adchain.fetcher import FetchResult, FetchStatus, Snapshot

WHEN = datetime(2024, 1, 15, tzinfo=timezone.utc)


def ok(url: str, body: bytes) -> FetchResult:
    return FetchResult(url, url, FetchStatus.OK, WHEN, 200, body)


def make_snapshot(adstxt=None, sellers=None, day=date(2024, 1, 15)) -> Snapshot:
    """``adstxt``: domain -> text (None = 404). ``sellers``: domain -> list of (id, type) (None = timeout)."""
    snap = Snapshot(day)
    for domain, text in (adstxt or {}).items():
        url = f"https://{domain}/ads.txt"
        if text is None:
            snap.add_adstxt(FetchResult(url, url, FetchStatus.NOT_FOUND, WHEN, 404), domain)
        else:
            snap.add_adstxt(ok(url, text.encode()), domain)
    for domain, entries in (sellers or {}).items():
        url = f"https://{domain}/sellers.json"
        if entries is None:
            snap.add_sellersjson(FetchResult(url, url, FetchStatus.TIMEOUT, WHEN), domain)
        else:
            doc = {"sellers": [{"seller_id": i, "seller_type": t} for i, t in entries]}
            snap.add_sellersjson(ok(url, json.dumps(doc).encode()), domain)
    return snap
