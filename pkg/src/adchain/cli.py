"""Command-line pipeline: fetch -> verify -> analyse -> report.

Every command reads from and writes to plain files so runs can be repeated
and diffed.  Exit status is 0 on success, 2 when the run completed but some
items were skipped (see ``warnings.txt`` in the output directory) and 1 on a
fatal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set

from . import analytics, crossref, registry
from ._fs import atomic_write
from .fetcher import FetchConfig, Snapshot, crawl

log = logging.getLogger("adchain")

DEFAULT_BIN_EDGES = (0, 1, 2, 5, 10, 20, 50, 100, 200, 500)


class FatalError(Exception):
    pass


# --------------------------------------------------------------------------
# Output tables
# --------------------------------------------------------------------------


def _fmt_rate(v: Optional[float]) -> str:
    return "NA" if v is None else f"{v:.4f}"


def _fmt_pct(v: Optional[float]) -> str:
    return "NA" if v is None else f"{v:.2f}"


def _fmt_sci(v: Optional[float]) -> str:
    return "NA" if v is None else f"{v:.6e}"


def _fmt_plain(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return "" if v is None else str(v)


FORMATTERS: Dict[str, Callable] = {"rate": _fmt_rate, "pct": _fmt_pct, "sci": _fmt_sci, "plain": _fmt_plain}


class Table:
    def __init__(self, name: str, columns: Sequence[str], kinds: Optional[Dict[str, str]] = None):
        self.name = name
        self.columns = list(columns)
        self.kinds = kinds or {}
        self.rows: List[dict] = []

    def add(self, **row) -> None:
        self.rows.append(row)

    def render(self, fmt: str) -> bytes:
        if fmt == "json":
            out = []
            for row in self.rows:
                item = {}
                for col in self.columns:
                    value = row.get(col)
                    kind = self.kinds.get(col, "plain")
                    if isinstance(value, float) and kind in ("rate", "pct"):
                        value = round(value, 4 if kind == "rate" else 2)
                    item[col] = value
                out.append(item)
            return (json.dumps(out, indent=2) + "\n").encode("utf-8")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(FORMATTERS[self.kinds.get(c, "plain")](row.get(c)) for c in self.columns)
        return buf.getvalue().encode("utf-8")

    def write(self, out_dir: Path, fmt: str) -> Path:
        path = out_dir / f"{self.name}.{fmt}"
        atomic_write(path, self.render(fmt))
        return path


def relationships_table(relationships) -> Table:
    table = Table(
        "relationships",
        ["snapshot_date", "publisher_domain", "ad_system_domain", "seller_account_id", "seller_type", "strict"],
    )
    for rel in sorted(relationships, key=lambda r: (r.publisher_domain, r.ad_system_domain, r.seller_account_id)):
        table.add(
            snapshot_date=rel.snapshot_date.isoformat(),
            publisher_domain=rel.publisher_domain,
            ad_system_domain=rel.ad_system_domain,
            seller_account_id=rel.seller_account_id,
            seller_type=rel.seller_type.value,
            strict=rel.strict,
        )
    return table


def histogram_table(counts: Dict[str, int], edges: Sequence[int]) -> Table:
    edges = list(edges)
    top = max(counts.values(), default=0)
    if top > edges[-1]:
        edges[-1] = top
    table = Table("histogram", ["lower", "upper", "count"])
    for b in analytics.histogram_relationship_counts(counts, edges):
        table.add(lower=b.lower, upper=b.upper, count=b.count)
    return table


def diff_table(diffs: List[analytics.RelationshipDiff], name: str = "diff") -> Table:
    table = Table(
        name,
        ["ad_system", "before", "after", "percent_change", "n_retained", "n_dropped", "n_added"],
        {"percent_change": "pct"},
    )
    for d in diffs:
        table.add(
            ad_system=d.ad_system_domain,
            before=d.before_count,
            after=d.after_count,
            percent_change=d.percent_change,
            n_retained=len(d.retained),
            n_dropped=len(d.dropped),
            n_added=len(d.added),
        )
    return table


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


class Run:
    """Shared state for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.fmt = args.format
        self.warnings: List[str] = []
        self.snapshot_root = Path(args.snapshot_root)
        self._psl = None
        self._snapshots: Dict[str, Snapshot] = {}

    def emit(self, table: Table) -> None:
        path = table.write(self.out, self.fmt)
        print(f"wrote {path} ({len(table.rows)} rows)")

    def snapshot(self, text: str) -> Snapshot:
        if text not in self._snapshots:
            self._snapshots[text] = registry.load_snapshot(self.snapshot_root, text)
        return self._snapshots[text]

    @property
    def mode(self) -> crossref.VerificationMode:
        return crossref.VerificationMode(self.args.mode)

    @property
    def psl(self):
        if self._psl is None:
            self._psl = registry.load_psl(getattr(self.args, "psl", None))
        return self._psl

    def labels(self) -> Dict[str, registry.SiteLabel]:
        ingested = registry.ingest_labels(self.args.labels)
        self.warnings.extend(ingested.warnings)
        return ingested.data

    def traffic(self) -> Dict[str, registry.TrafficRecord]:
        ingested = registry.ingest_traffic(self.args.traffic)
        self.warnings.extend(ingested.warnings)
        return ingested.data

    def entities(self) -> Optional[Dict[str, str]]:
        path = getattr(self.args, "entities", None)
        return registry.load_entities(path) if path else None


def _read_domain_list(path: str) -> List[str]:
    domains = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.split("#", 1)[0].strip()
            if line:
                domains.append(line)
    return domains


def _check_inputs(args: argparse.Namespace) -> None:
    for attr in ("publishers", "ad_systems", "labels", "traffic", "entities", "psl"):
        path = getattr(args, attr, None)
        if path and not Path(path).is_file():
            raise FatalError(f"--{attr.replace('_', '-')}: no such file {path}")


def _networks(run: Run, before_rels, after_rels=()) -> List[str]:
    if run.args.network:
        return sorted({n.strip().lower() for n in run.args.network})
    return sorted(analytics.sites_by_network(list(before_rels) + list(after_rels)))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_fetch(run: Run) -> None:
    args = run.args
    publishers = _read_domain_list(args.publishers) if args.publishers else []
    ad_systems = _read_domain_list(args.ad_systems) if args.ad_systems else []
    kwargs = {"max_concurrency": args.max_concurrency}
    if args.timeout is not None:
        kwargs["timeout"] = args.timeout
    day = date.fromisoformat(args.date) if args.date else datetime.now(timezone.utc).date()
    snapshot = crawl(publishers, ad_systems, FetchConfig(**kwargs), snapshot_date=day)
    base = registry.save_snapshot(snapshot, run.snapshot_root)
    for kind, domain, result in snapshot.failures():
        run.warnings.append(f"{kind} {domain}: {result.status.value} {result.error or ''}".rstrip())
    print(
        f"snapshot {base}: {len(snapshot.parsed_adstxt())}/{len(snapshot.adstxt_files)} ads.txt, "
        f"{len(snapshot.parsed_sellersjson())}/{len(snapshot.sellersjson_files)} sellers.json"
    )


def cmd_verify(run: Run) -> None:
    snapshot = run.snapshot(run.args.date)
    relationships = crossref.verify_relationships(snapshot, run.mode)
    run.emit(relationships_table(relationships))
    counts = crossref.relationship_counts_per_publisher(snapshot, run.mode)
    run.emit(histogram_table(counts, run.args.bins))
    coverage = crossref.coverage_report(snapshot)
    print(
        f"DIRECT entries: {coverage.direct_entries} "
        f"(verifiable {coverage.verifiable_entries}, unverifiable {coverage.unverifiable_entries})"
    )
    try:
        summary = crossref.sites_with_verified(snapshot, run.mode)
        print(f"publishers with a verified relationship: {summary.count}/{summary.total} ({summary.percent:.1f}%)")
    except crossref.EmptyCorpus:
        run.warnings.append(f"snapshot {snapshot.snapshot_date}: no publisher served a parsed ads.txt")


def _diffs(run: Run, before_rels, after_rels, before, after, publishers=None):
    return [
        analytics.diff_relationships(
            before_rels, after_rels, network, publishers, before.snapshot_date, after.snapshot_date
        )
        for network in _networks(run, before_rels, after_rels)
    ]


def cmd_diff(run: Run) -> None:
    before = run.snapshot(run.args.before)
    after = run.snapshot(run.args.after)
    before_rels = crossref.verify_relationships(before, run.mode)
    after_rels = crossref.verify_relationships(after, run.mode)
    run.emit(diff_table(_diffs(run, before_rels, after_rels, before, after)))
    if getattr(run.args, "traffic", None):
        split = analytics.popularity_split(
            {d: r.monthly_visits for d, r in run.traffic().items()}, run.args.percentile
        )
        for segment, members in (("popular", split.popular), ("unpopular", split.unpopular)):
            diffs = _diffs(run, before_rels, after_rels, before, after, set(members))
            run.emit(diff_table(diffs, f"diff_{segment}"))


def cmd_correlate(run: Run) -> None:
    before = run.snapshot(run.args.before)
    after = run.snapshot(run.args.after)
    before_rels = crossref.verify_relationships(before, run.mode)
    after_rels = crossref.verify_relationships(after, run.mode)
    tiers = {d: label.traffic_label for d, label in run.labels().items()}
    table = Table(
        "correlation",
        ["ad_system", "n", "rho", "p_value", "minimal_drop_rate"],
        {"rho": "rate", "p_value": "sci", "minimal_drop_rate": "rate"},
    )
    for network in _networks(run, before_rels):
        retained = analytics.retention_by_site(before_rels, after_rels, network)
        try:
            result = analytics.traffic_retention_correlation(tiers, retained)
        except analytics.DegenerateInput as exc:
            run.warnings.append(f"correlation {network}: {exc}")
            continue
        table.add(
            ad_system=network,
            n=result.correlation.n,
            rho=result.correlation.rho,
            p_value=result.correlation.p_value,
            minimal_drop_rate=result.drop_rate(registry.TrafficLabel.MINIMAL),
        )
    run.emit(table)


def cmd_split(run: Run) -> None:
    traffic = {d: r.monthly_visits for d, r in run.traffic().items()}
    if not traffic:
        raise FatalError(f"{run.args.traffic}: no usable traffic rows")
    split = analytics.popularity_split(traffic, run.args.percentile)
    table = Table("split", ["domain", "monthly_visits", "segment"])
    for domain in sorted(traffic, key=lambda d: (-traffic[d], d)):
        table.add(
            domain=domain,
            monthly_visits=traffic[domain],
            segment="popular" if domain in split.popular else "unpopular",
        )
    run.emit(table)
    print(
        f"percentile {split.percentile:g}: {len(split.popular)} popular, {len(split.unpopular)} unpopular, "
        f"threshold {split.threshold_visits} monthly visits"
    )


def cmd_tiers(run: Run) -> None:
    snapshot = run.snapshot(run.args.date)
    relationships = crossref.verify_relationships(snapshot, run.mode)
    result = analytics.network_site_rates(
        relationships, run.labels(), analytics.GroupBy(run.args.group_by), snapshot.parsed_adstxt().keys()
    )
    table = Table("tiers", ["ad_system", "tier", "count", "total", "rate"], {"rate": "rate"})
    for row in result.rows:
        table.add(ad_system=row.ad_system_domain, tier=row.tier, count=row.count, total=row.total, rate=row.rate)
    run.emit(table)
    print(f"publishers without a {run.args.group_by} label: {result.unlabeled_publishers}")


def cmd_pools(run: Run) -> None:
    snapshot = run.snapshot(run.args.date)
    candidates = crossref.detect_pooling(snapshot, run.entities(), run.psl)
    table = Table("pools", ["ad_system_domain", "seller_account_id", "n_publishers", "n_entities", "publishers"])
    for c in candidates:
        table.add(
            ad_system_domain=c.ad_system_domain,
            seller_account_id=c.seller_account_id,
            n_publishers=len(c.claiming_publishers),
            n_entities=len(c.distinct_owner_entities),
            publishers=";".join(sorted(c.claiming_publishers)),
        )
    run.emit(table)


def cmd_report(run: Run) -> None:
    args = run.args
    args.date = args.after
    cmd_verify(run)
    cmd_diff(run)
    if args.labels:
        cmd_correlate(run)
        cmd_tiers(run)
    cmd_pools(run)
    if args.traffic:
        cmd_split(run)


COMMANDS = {
    "fetch": cmd_fetch,
    "verify": cmd_verify,
    "diff": cmd_diff,
    "correlate": cmd_correlate,
    "split": cmd_split,
    "tiers": cmd_tiers,
    "pools": cmd_pools,
    "report": cmd_report,
}


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _edges(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad bin edges {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--snapshot-root", default="snapshots", help="directory holding <YYYY-MM-DD>/ snapshots")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--mode", choices=[m.value for m in crossref.VerificationMode], default="idmatch")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="adchain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", parents=[common], help="crawl ads.txt and sellers.json files into a snapshot")
    p.add_argument("--publishers", help="file with one publisher domain per line")
    p.add_argument("--ad-systems", help="file with one ad system domain per line")
    p.add_argument("--date", help="snapshot date (default: today, UTC)")
    p.add_argument("--max-concurrency", type=int, default=8)
    p.add_argument("--timeout", type=float, help="per-request timeout in seconds (env: ADCHAIN_TIMEOUT_SECS)")

    p = sub.add_parser("verify", parents=[common], help="write verified relationships of one snapshot")
    p.add_argument("--date", "--snapshot", dest="date", required=True)
    p.add_argument("--bins", type=_edges, default=list(DEFAULT_BIN_EDGES), help="comma-separated histogram edges")

    def before_after(p):
        p.add_argument("--before", required=True)
        p.add_argument("--after", required=True)
        p.add_argument("--network", action="append", help="ad system domain (repeatable; default: all)")

    p = sub.add_parser("diff", parents=[common], help="compare verified sites per network across two snapshots")
    before_after(p)
    p.add_argument("--traffic", help="traffic.csv; adds popular/unpopular diffs")
    p.add_argument("--percentile", type=float, default=80.0)

    p = sub.add_parser("correlate", parents=[common], help="Spearman correlation of traffic tier and retention")
    before_after(p)
    p.add_argument("--labels", required=True)

    p = sub.add_parser("split", parents=[common], help="popular/unpopular split by monthly visits")
    p.add_argument("--traffic", required=True)
    p.add_argument("--percentile", type=float, default=80.0)

    p = sub.add_parser("tiers", parents=[common], help="per-network verified rates by credibility tier")
    p.add_argument("--date", "--snapshot", dest="date", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--group-by", choices=[g.value for g in analytics.GroupBy], default="reliability")

    p = sub.add_parser("pools", parents=[common], help="seller accounts shared across unrelated owners")
    p.add_argument("--date", "--snapshot", dest="date", required=True)
    p.add_argument("--entities", help="entities.json mapping domain to owner")
    p.add_argument("--psl", help="public_suffix_list.dat (default: bundled copy)")

    p = sub.add_parser("report", parents=[common], help="run every analysis for a before/after pair")
    before_after(p)
    p.add_argument("--labels")
    p.add_argument("--traffic")
    p.add_argument("--entities")
    p.add_argument("--psl")
    p.add_argument("--percentile", type=float, default=80.0)
    p.add_argument("--group-by", choices=[g.value for g in analytics.GroupBy], default="reliability")
    p.add_argument("--bins", type=_edges, default=list(DEFAULT_BIN_EDGES))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    run = Run(args)
    try:
        _check_inputs(args)
        run.out.mkdir(parents=True, exist_ok=True)
        (run.out / "warnings.txt").unlink(missing_ok=True)
        COMMANDS[args.command](run)
    except (FatalError, registry.SnapshotError, analytics.BadEdges, OSError, ValueError) as exc:
        print(f"adchain {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if run.warnings:
        atomic_write(run.out / "warnings.txt", "".join(w + "\n" for w in run.warnings).encode("utf-8"))
        print(f"{len(run.warnings)} warnings written to {run.out / 'warnings.txt'}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
