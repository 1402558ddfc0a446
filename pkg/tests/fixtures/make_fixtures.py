"""Regenerate the checked-in test fixtures.

    python tests/fixtures/make_fixtures.py

Parser corpus: every ads.txt / sellers.json file is assembled from line (or
entry) templates whose classification is fixed in the template table below,
so ``expected.json`` is known by construction and never comes from running
the parser.

End-to-end corpus: two hand-written snapshot dates plus label, traffic and
entity files.  The golden outputs in ``e2e/golden`` were enumerated by hand
from these inputs; this script does not write them.
"""

from __future__ import annotations

import json
import random
import sys
from datetime import date, datetime, timezone
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parents[1] / "src"))

from adchain.fetcher import FetchResult, FetchStatus, Snapshot  # noqa: E402
from adchain.registry import save_snapshot  # noqa: E402

# Line templates per kind; each takes (rng, i). "direct" and "reseller" lines
# are records, "comment" covers comments and blanks, "diag" lines must each
# produce one diagnostic.
AD_SYSTEMS = ["google.com", "appnexus.com", "rubiconproject.com", "openx.com", "pubmatic.com", "lijit.com"]


def _sys(rng):
    return rng.choice(AD_SYSTEMS)


LINE_TEMPLATES = {
    "direct": [
        lambda r, i: f"{_sys(r)}, pub-{i:05d}, DIRECT",
        lambda r, i: f"{_sys(r)}, {i}, DIRECT, f08c47fec0942fa0",
        lambda r, i: f"  {_sys(r).upper()} ,  ACC{i} ,  direct  ",
        lambda r, i: f"{_sys(r)},{i},Direct # inline comment",
        lambda r, i: f"{_sys(r)}, {i}, DIRECT, abc123;extension=data",
    ],
    "reseller": [
        lambda r, i: f"{_sys(r)}, res-{i}, RESELLER",
        lambda r, i: f"{_sys(r)}, {i}, reseller, 5jyxf8k54",
        lambda r, i: f"{_sys(r).title()}, R{i}, ReSeLlEr",
    ],
    "variable": [
        lambda r, i: f"CONTACT=ads{i}@example.com",
        lambda r, i: f"contact = sales{i}@example.org",
        lambda r, i: f"OWNERDOMAIN=owner{i % 3}.example",
        lambda r, i: f"SUBDOMAIN=sub{i}.example.com",
        lambda r, i: f"MANAGERDOMAIN=manager{i}.example, US",
    ],
    "comment": [
        lambda r, i: "# placements follow",
        lambda r, i: "",
        lambda r, i: "   ",
        lambda r, i: f"#{_sys(r)}, {i}, DIRECT",
        lambda r, i: "\t# indented comment",
    ],
    "diag": [
        lambda r, i: f"{_sys(r)}, {i}",
        lambda r, i: f"{_sys(r)}, {i}, PARTNER",
        lambda r, i: f"{_sys(r)}, , DIRECT",
        lambda r, i: f", {i}, DIRECT",
        lambda r, i: f"{_sys(r)}, {i}, DIRECT, cert, extra",
        lambda r, i: "<html><body>Not Found</body></html>",
        lambda r, i: f"bad domain.com, {i}, DIRECT",
        lambda r, i: "=orphan-value",
    ],
}

PROFILES = {
    "wellformed": {"direct": (3, 12), "reseller": (2, 10), "variable": (0, 0), "comment": (0, 0), "diag": (0, 0)},
    "commented": {"direct": (2, 8), "reseller": (1, 5), "variable": (0, 0), "comment": (3, 10), "diag": (0, 0)},
    "variables": {"direct": (1, 6), "reseller": (1, 4), "variable": (2, 5), "comment": (1, 3), "diag": (0, 0)},
    "malformed": {"direct": (0, 4), "reseller": (0, 3), "variable": (0, 1), "comment": (0, 2), "diag": (3, 9)},
    "mixedcase": {"direct": (4, 8), "reseller": (2, 4), "variable": (0, 2), "comment": (0, 2), "diag": (0, 1)},
}


def make_adstxt_corpus(out: Path, rng: random.Random) -> dict:
    expected = {}
    (out / "adstxt").mkdir(parents=True, exist_ok=True)
    counter = 0
    for profile, mix in PROFILES.items():
        for n in range(11):
            kinds = []
            for kind, (lo, hi) in mix.items():
                kinds += [kind] * rng.randint(lo, hi)
            rng.shuffle(kinds)
            # Duplicate some DIRECT lines verbatim to exercise dedupe counts.
            lines, dup_source = [], None
            counts = {"records": 0, "direct": 0, "variables": 0, "comments": 0, "diagnostics": 0, "duplicates": 0}
            for kind in kinds:
                counter += 1
                template = rng.choice(LINE_TEMPLATES[kind])
                line = template(rng, counter)
                if kind == "direct" and "DIRECT" in line.upper() and dup_source is not None and rng.random() < 0.3:
                    line = dup_source
                    counts["duplicates"] += 1
                if kind == "direct" and template is LINE_TEMPLATES["direct"][0]:
                    dup_source = line
                lines.append(line)
                if kind in ("direct", "reseller"):
                    counts["records"] += 1
                    counts["direct"] += kind == "direct"
                elif kind == "variable":
                    counts["variables"] += 1
                elif kind == "comment":
                    counts["comments"] += 1
                else:
                    counts["diagnostics"] += 1
            eol = "\r\n" if n % 4 == 3 else "\n"
            # A final blank line only exists if it is terminated.
            terminate = lines and (n % 5 != 4 or lines[-1] == "")
            text = eol.join(lines) + (eol if terminate else "")
            if n % 7 == 6:
                text = "\ufeff" + text
            name = f"{profile}_{n:02d}.txt"
            (out / "adstxt" / name).write_bytes(text.encode("utf-8"))
            counts["lines"] = len(lines)
            expected[name] = counts
    # Edge cases written by hand.
    hand = {
        "empty.txt": ("", dict(records=0, direct=0, variables=0, comments=0, diagnostics=0, duplicates=0, lines=0)),
        "only_contact.txt": (
            "CONTACT=ads@example.com\n",
            dict(records=0, direct=0, variables=1, comments=0, diagnostics=0, duplicates=0, lines=1),
        ),
        "two_records_comment.txt": (
            "greenadexchange.com, XF7342, DIRECT, 5jyxf8k54\n# placements follow\nADNET.COM , 12345 , direct\n",
            dict(records=2, direct=2, variables=0, comments=1, diagnostics=0, duplicates=0, lines=3),
        ),
    }
    for name, (text, counts) in hand.items():
        (out / "adstxt" / name).write_text(text, encoding="utf-8")
        expected[name] = counts
    return expected


def _seller(i, kind):
    if kind == "valid":
        t = ["PUBLISHER", "INTERMEDIARY", "BOTH", "publisher", "Both"][i % 5]
        entry = {"seller_id": f"S{i}", "seller_type": t, "name": f"Seller {i}", "domain": f"Seller{i}.Example"}
        if i % 4 == 0:
            entry = {"seller_id": str(i), "seller_type": t, "is_confidential": 1}
        if i % 6 == 1:
            entry["seller_id"] = i  # numeric id
        return entry
    if kind == "no_id":
        return {"seller_type": "PUBLISHER", "name": "anon"}
    if kind == "empty_id":
        return {"seller_id": "  ", "seller_type": "PUBLISHER"}
    if kind == "no_type":
        return {"seller_id": f"T{i}", "name": "typeless"}
    if kind == "bad_type":
        return {"seller_id": f"B{i}", "seller_type": "RESELLER"}
    if kind == "not_object":
        return ["S", i]
    raise ValueError(kind)


def make_sellers_corpus(out: Path, rng: random.Random) -> dict:
    expected = {}
    (out / "sellersjson").mkdir(parents=True, exist_ok=True)
    for n in range(20):
        n_valid = rng.randint(0, 15)
        bad = {k: rng.randint(0, 2) for k in ("no_id", "empty_id", "no_type", "bad_type", "not_object")}
        n_dup = rng.randint(0, 3) if n_valid else 0
        entries = [_seller(1000 * n + i, "valid") for i in range(n_valid)]
        for kind, count in bad.items():
            entries += [_seller(1000 * n + 500 + j, kind) for j in range(count)]
        for _ in range(n_dup):
            dup = dict(rng.choice(entries[:n_valid]))
            dup["name"] = "duplicate"
            entries.append(dup)
        rng.shuffle(entries)
        # Duplicates must come after their original for "first wins" to keep
        # the valid one; move every duplicate to the end.
        entries.sort(key=lambda e: isinstance(e, dict) and e.get("name") == "duplicate")
        doc = {"version": "1.0", "contact_email": f"ops{n}@example.com", "sellers": entries, "ext": {"x": 1}}
        name = f"sellers_{n:02d}.json"
        (out / "sellersjson" / name).write_text(json.dumps(doc, indent=1 if n % 2 else None), encoding="utf-8")
        expected[name] = {"sellers": n_valid, "diagnostics": sum(bad.values()) + n_dup, "entries": len(entries)}
    hand = {
        "not_json.json": ("<html>oops</html>", {"sellers": 0, "diagnostics": 1, "entries": 0}),
        "array_top.json": ('[{"seller_id": "1", "seller_type": "PUBLISHER"}]', {"sellers": 0, "diagnostics": 1, "entries": 0}),
        "no_sellers.json": ('{"version": "1.0"}', {"sellers": 0, "diagnostics": 1, "entries": 0}),
        "dup_seven.json": (
            '{"sellers": [{"seller_id": "7", "seller_type": "PUBLISHER", "name": "first"},'
            ' {"seller_id": "7", "seller_type": "INTERMEDIARY", "name": "second"}]}',
            {"sellers": 1, "diagnostics": 1, "entries": 2},
        ),
    }
    for name, (text, counts) in hand.items():
        (out / "sellersjson" / name).write_text(text, encoding="utf-8")
        expected[name] = counts
    return expected


# --------------------------------------------------------------------------
# End-to-end corpus
# --------------------------------------------------------------------------

BEFORE_ADSTXT = {
    "alpha.example": "# alpha ads.txt\nbidhub.example, H1, DIRECT\nadnet.example, N1, DIRECT, abc123\nexch.example, X1, DIRECT\n",
    "bravo.example": "bidhub.example, H2, DIRECT\nbidhub.example, H2, DIRECT\nadnet.example, N9, RESELLER\n",
    "charlie.example": "bidhub.example, H3, DIRECT\nadnet.example, N3, DIRECT\n",
    "delta.example": "BIDHUB.example, H4, direct\r\nadnet.example, N4, DIRECT\r\n",
    "echo.example": None,
    "foxtrot.example": "bidhub.example, H9, DIRECT\n",
}
BEFORE_SELLERS = {
    "bidhub.example": [("H1", "PUBLISHER"), ("H2", "PUBLISHER"), ("H3", "BOTH"), ("H4", "PUBLISHER"), ("POOL1", "PUBLISHER")],
    "adnet.example": [("N1", "PUBLISHER"), ("N3", "INTERMEDIARY"), ("N4", "PUBLISHER")],
    "exch.example": None,
}
AFTER_ADSTXT = {
    "alpha.example": (
        "CONTACT=ads@alpha.example\nbidhub.example, H1, DIRECT\nbidhub.example, H2, DIRECT\n"
        "adnet.example, N1, DIRECT, abc123\nexch.example, X1, DIRECT\nbidhub.example, POOL1, DIRECT\n"
    ),
    "bravo.example": "OWNERDOMAIN=alpha.example\nbidhub.example, H2, DIRECT\nbidhub.example, POOL1, DIRECT\n",
    "charlie.example": "adnet.example, N3, DIRECT\nadnet.example, SHARED, DIRECT\n",
    "delta.example": "bidhub.example, H4, DIRECT\nthis line is not a record\n",
    "echo.example": "bidhub.example, H5, DIRECT\n",
    "foxtrot.example": "bidhub.example, H9, DIRECT\n",
    "golf.example": "bidhub.example, POOL1, DIRECT\nadnet.example, SHARED, DIRECT\n",
}
AFTER_SELLERS = {
    "bidhub.example": [("H1", "PUBLISHER"), ("H2", "PUBLISHER"), ("H4", "PUBLISHER"), ("H5", "PUBLISHER"), ("POOL1", "PUBLISHER")],
    "adnet.example": [("N1", "PUBLISHER"), ("N3", "INTERMEDIARY")],
    "exch.example": None,
}


def _result(domain, path, body, when):
    url = f"https://{domain}{path}"
    if body is None:
        return FetchResult(url, url, FetchStatus.NOT_FOUND, when, 404)
    return FetchResult(url, url, FetchStatus.OK, when, 200, body.encode("utf-8"))


def build_snapshot(day, adstxt, sellers) -> Snapshot:
    when = datetime(day.year, day.month, day.day, 12, 0, tzinfo=timezone.utc)
    snapshot = Snapshot(day)
    for domain, body in adstxt.items():
        snapshot.add_adstxt(_result(domain, "/ads.txt", body, when), domain)
    for domain, rows in sellers.items():
        body = None
        if rows is not None:
            doc = {"version": "1.0", "sellers": [{"seller_id": s, "seller_type": t, "name": s} for s, t in rows]}
            body = json.dumps(doc, indent=2)
        snapshot.add_sellersjson(_result(domain, "/sellers.json", body, when), domain)
    return snapshot


def make_e2e(out: Path) -> None:
    root = out / "snapshots"
    save_snapshot(build_snapshot(date(2021, 12, 1), BEFORE_ADSTXT, BEFORE_SELLERS), root)
    save_snapshot(build_snapshot(date(2024, 1, 15), AFTER_ADSTXT, AFTER_SELLERS), root)
    (out / "labels.csv").write_text(
        "domain,credibility,factual_reporting,reliability_tier,traffic_label\n"
        "alpha.example,LOW,MIXED,GENERALLY_RELIABLE,HIGH\n"
        "bravo.example,LOW,VERY_LOW,LEAST_RELIABLE,MEDIUM\n"
        "charlie.example,LOW,LOW,Least reliable,Minimal\n"
        "delta.example,LOW,LOW,GENERALLY_UNRELIABLE,LOW\n"
        "echo.example,LOW,VERY LOW,LEAST_RELIABLE,MINIMAL\n"
        "foxtrot.example,LOW,MIXED,generally unreliable,LOW\n",
        encoding="utf-8",
    )
    (out / "traffic.csv").write_text(
        "domain,monthly_visits,as_of\n"
        "alpha.example,5000000,2024-01-01\n"
        "bravo.example,1200000,2024-01-01\n"
        "charlie.example,800,2024-01-01\n"
        "delta.example,290000,2024-01-01\n"
        "echo.example,1500,2024-01-01\n"
        "foxtrot.example,12000,2024-01-01\n"
        "golf.example,290000,2024-01-01\n",
        encoding="utf-8",
    )
    (out / "entities.json").write_text(
        json.dumps(
            {"alpha.example": "Alpha Media Group", "doubleclick.net": "Google LLC", "googleadservices.com": "Google LLC"},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def main() -> None:
    rng = random.Random(20240115)
    corpus = HERE / "corpus"
    expected = {"adstxt": make_adstxt_corpus(corpus, rng), "sellersjson": make_sellers_corpus(corpus, rng)}
    (corpus / "expected.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    make_e2e(HERE / "e2e")
    print(f"{len(expected['adstxt'])} ads.txt and {len(expected['sellersjson'])} sellers.json fixtures")


if __name__ == "__main__":
    main()
