"""Longitudinal and cross-sectional statistics over verified relationships."""

from __future__ import annotations

import dataclasses
import enum
import math
from collections import defaultdict
from datetime import date
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import stats

from .crossref import VerifiedRelationship
from .registry import (
    FactualReporting,
    PublicSuffixList,
    ReliabilityTier,
    SiteLabel,
    TrafficLabel,
    entity_of,
    etld_plus_one,
)

__all__ = [
    "ZeroBaseline",
    "EmptyInput",
    "LengthMismatch",
    "DegenerateInput",
    "BadEdges",
    "percentage_change",
    "RelationshipDiff",
    "sites_by_network",
    "diff_relationships",
    "PopularitySplit",
    "popularity_split",
    "CorrelationResult",
    "average_ranks",
    "spearman",
    "RetentionCorrelation",
    "retention_by_site",
    "traffic_retention_correlation",
    "Bin",
    "histogram_relationship_counts",
    "GroupBy",
    "TierRate",
    "TierTable",
    "network_site_rates",
    "top_networks",
]


class ZeroBaseline(ZeroDivisionError):
    pass


class EmptyInput(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


class BadEdges(ValueError):
    pass


def percentage_change(before: int, after: int) -> float:
    """``(after - before) / |before| * 100``, evaluated exactly then rounded once to float."""
    if before == 0:
        raise ZeroBaseline("percentage change is undefined for a zero baseline")
    return float(Fraction(after - before, abs(before)) * 100)


# --------------------------------------------------------------------------
# Relationship diffs
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RelationshipDiff:
    ad_system_domain: str
    before_count: int
    after_count: int
    # None when the baseline is empty.
    percent_change: Optional[float]
    retained: frozenset
    dropped: frozenset
    added: frozenset
    before_date: Optional[date] = None
    after_date: Optional[date] = None


def sites_by_network(relationships: Iterable[VerifiedRelationship]) -> Dict[str, Set[str]]:
    out: Dict[str, Set[str]] = defaultdict(set)
    for rel in relationships:
        out[rel.ad_system_domain].add(rel.publisher_domain)
    return dict(out)


def _single_date(relationships: Sequence[VerifiedRelationship]) -> Optional[date]:
    dates = {r.snapshot_date for r in relationships}
    return dates.pop() if len(dates) == 1 else None


def diff_relationships(
    before: Iterable[VerifiedRelationship],
    after: Iterable[VerifiedRelationship],
    ad_system: str,
    publishers: Optional[Set[str]] = None,
    before_date: Optional[date] = None,
    after_date: Optional[date] = None,
) -> RelationshipDiff:
    """Compare the sites verified with ``ad_system`` in two snapshots.

    ``publishers`` optionally restricts both sides to a population, e.g. the
    popular half of a :func:`popularity_split`.
    """
    before, after = list(before), list(after)
    ad_system = ad_system.strip().lower()
    b = {r.publisher_domain for r in before if r.ad_system_domain == ad_system}
    a = {r.publisher_domain for r in after if r.ad_system_domain == ad_system}
    if publishers is not None:
        b &= publishers
        a &= publishers
    change = percentage_change(len(b), len(a)) if b else None
    return RelationshipDiff(
        ad_system_domain=ad_system,
        before_count=len(b),
        after_count=len(a),
        percent_change=change,
        retained=frozenset(b & a),
        dropped=frozenset(b - a),
        added=frozenset(a - b),
        before_date=before_date or _single_date(before),
        after_date=after_date or _single_date(after),
    )


# --------------------------------------------------------------------------
# Popularity split
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class PopularitySplit:
    percentile: float
    threshold_visits: int
    popular: frozenset
    unpopular: frozenset


def popularity_split(traffic: Mapping[str, int], percentile: float = 80) -> PopularitySplit:
    """Label the top ``ceil((1 - percentile/100) * n)`` sites by visits as popular.

    Splitting by rank count rather than by a visits threshold keeps the group
    sizes exact when many sites share a visit count.  Ties are ordered by
    domain name.
    """
    if not traffic:
        raise EmptyInput("popularity split needs at least one site")
    if not 0 < percentile < 100:
        raise ValueError(f"percentile must lie strictly between 0 and 100, got {percentile}")
    visits = {d: int(getattr(v, "monthly_visits", v)) for d, v in traffic.items()}
    ranked = sorted(visits, key=lambda d: (-visits[d], d))
    top_fraction = 1 - Fraction(repr(float(percentile))) / 100
    n_popular = math.ceil(top_fraction * len(ranked))
    popular = ranked[:n_popular]
    return PopularitySplit(
        percentile=float(percentile),
        threshold_visits=visits[popular[-1]],
        popular=frozenset(popular),
        unpopular=frozenset(ranked[n_popular:]),
    )


# --------------------------------------------------------------------------
# Spearman rank correlation
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    return stats.rankdata(np.asarray(values, dtype=float), method="average")


def spearman(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    """Spearman's rho with a two-sided p-value from the t approximation.

    Doubling average ranks makes them integers, so the covariance sums are
    computed exactly and perfect rank agreement yields rho of exactly +/-1.
    """
    if len(x) != len(y):
        raise LengthMismatch(f"x has {len(x)} values, y has {len(y)}")
    n = len(x)
    if n < 3:
        raise DegenerateInput(f"need at least 3 pairs, got {n}")
    if np.isnan(np.asarray(x, dtype=float)).any() or np.isnan(np.asarray(y, dtype=float)).any():
        raise DegenerateInput("NaN in input")

    # 2*rank - (n + 1) is an integer centred on zero.
    cx = [int(round(2 * r)) - (n + 1) for r in average_ranks(x)]
    cy = [int(round(2 * r)) - (n + 1) for r in average_ranks(y)]
    sxx = sum(a * a for a in cx)
    syy = sum(b * b for b in cy)
    if sxx == 0 or syy == 0:
        raise DegenerateInput("a constant variable has no rank correlation")
    sxy = sum(a * b for a, b in zip(cx, cy))

    if sxy * sxy == sxx * syy:
        rho = 1.0 if sxy > 0 else -1.0
        return CorrelationResult(rho, 0.0, n)
    rho = sxy / (math.sqrt(sxx) * math.sqrt(syy))
    rho = max(-1.0, min(1.0, rho))
    dof = n - 2
    t = rho * math.sqrt(dof / ((1.0 - rho) * (1.0 + rho)))
    p = float(2.0 * stats.t.sf(abs(t), dof))
    return CorrelationResult(rho, min(1.0, p), n)


@dataclasses.dataclass(frozen=True)
class RetentionCorrelation:
    correlation: CorrelationResult
    # tier -> (sites in tier, sites dropped); only tiers present are listed.
    tier_counts: Dict[TrafficLabel, Tuple[int, int]]

    def drop_rate(self, tier: TrafficLabel) -> Optional[float]:
        total, dropped = self.tier_counts.get(tier, (0, 0))
        return dropped / total if total else None


def retention_by_site(
    before: Iterable[VerifiedRelationship], after: Iterable[VerifiedRelationship], ad_system: str
) -> Dict[str, bool]:
    """Sites verified with ``ad_system`` before, mapped to whether they still are after."""
    diff = diff_relationships(before, after, ad_system)
    return {d: d in diff.retained for d in sorted(diff.retained | diff.dropped)}


def traffic_retention_correlation(
    labels: Mapping[str, Optional[TrafficLabel]], retained: Mapping[str, bool]
) -> RetentionCorrelation:
    """Correlate ordinal traffic tier (MINIMAL=0 .. HIGH=3) with retention (0/1).

    Only domains present in both mappings with a known tier are used.
    """
    domains = sorted(d for d in retained if labels.get(d) is not None)
    tiers = [labels[d] for d in domains]
    flags = [bool(retained[d]) for d in domains]
    if len(set(tiers)) < 2:
        raise DegenerateInput("need at least two traffic tiers")
    result = spearman([t.ordinal for t in tiers], [int(f) for f in flags])
    counts: Dict[TrafficLabel, Tuple[int, int]] = {}
    for tier in TrafficLabel:
        members = [f for t, f in zip(tiers, flags) if t is tier]
        if members:
            counts[tier] = (len(members), sum(1 for f in members if not f))
    return RetentionCorrelation(result, counts)


# --------------------------------------------------------------------------
# Histograms and per-tier tables
# --------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Bin:
    lower: float
    upper: float
    count: int
    closed: bool = False


def histogram_relationship_counts(counts: Mapping[str, int], bin_edges: Sequence[float]) -> List[Bin]:
    """Bin per-publisher counts into ``[e0, e1), [e1, e2), ..., [e_{k-1}, e_k]``."""
    edges = list(bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise BadEdges(f"bin edges must be strictly increasing with at least two values: {edges}")
    totals = [0] * (len(edges) - 1)
    for domain, value in counts.items():
        if value < edges[0] or value > edges[-1]:
            raise BadEdges(f"{domain}: value {value} outside [{edges[0]}, {edges[-1]}]")
        if value == edges[-1]:
            totals[-1] += 1
            continue
        for i in range(len(totals)):
            if edges[i] <= value < edges[i + 1]:
                totals[i] += 1
                break
    return [
        Bin(edges[i], edges[i + 1], totals[i], closed=(i == len(totals) - 1)) for i in range(len(totals))
    ]


class GroupBy(str, enum.Enum):
    RELIABILITY_TIER = "reliability"
    FACTUAL_REPORTING = "factual"


@dataclasses.dataclass(frozen=True)
class TierRate:
    ad_system_domain: str
    tier: str
    count: int
    total: int

    @property
    def rate(self) -> float:
        return self.count / self.total


@dataclasses.dataclass(frozen=True)
class TierTable:
    rows: List[TierRate]
    unlabeled_publishers: int


def _tier_of(label: Optional[SiteLabel], group_by: GroupBy):
    if label is None:
        return None
    if group_by is GroupBy.RELIABILITY_TIER:
        return label.reliability_tier
    if label.factual_reporting is FactualReporting.UNKNOWN:
        return None
    return label.factual_reporting


def network_site_rates(
    relationships: Iterable[VerifiedRelationship],
    labels: Mapping[str, SiteLabel],
    group_by: GroupBy = GroupBy.RELIABILITY_TIER,
    publishers: Optional[Iterable[str]] = None,
) -> TierTable:
    """Per ad system and tier: share of the tier's ads.txt publishers verified with that network.

    ``publishers`` is the population serving a parsed ads.txt (the rate
    denominator); it defaults to the publishers appearing in
    ``relationships``.  Publishers without a tier are left out and counted
    in ``unlabeled_publishers``.
    """
    relationships = list(relationships)
    group_by = GroupBy(group_by)
    population = set(publishers) if publishers is not None else {r.publisher_domain for r in relationships}
    order = list(ReliabilityTier) if group_by is GroupBy.RELIABILITY_TIER else list(FactualReporting)

    members: Dict[object, Set[str]] = defaultdict(set)
    unlabeled = 0
    for publisher in population:
        tier = _tier_of(labels.get(publisher), group_by)
        if tier is None:
            unlabeled += 1
        else:
            members[tier].add(publisher)

    linked = sites_by_network(r for r in relationships if r.publisher_domain in population)
    rows = []
    for ad_system in sorted(linked):
        for tier in order:
            if not members.get(tier):
                continue
            count = len(members[tier] & linked[ad_system])
            rows.append(TierRate(ad_system, tier.value, count, len(members[tier])))
    return TierTable(rows, unlabeled)


def top_networks(
    relationships: Iterable[VerifiedRelationship],
    k: int,
    entity_map: Optional[Mapping[str, str]] = None,
    psl: Optional[PublicSuffixList] = None,
    rollup: bool = False,
) -> List[Tuple[str, int]]:
    """Networks (or owning entities, with ``rollup``) ranked by distinct verified publishers."""
    if k < 1:
        raise ValueError("k must be at least 1")
    groups: Dict[str, Set[str]] = defaultdict(set)
    for rel in relationships:
        name = rel.ad_system_domain
        if rollup:
            name = entity_of(etld_plus_one(name, psl) or name, dict(entity_map or {}))
        groups[name].add(rel.publisher_domain)
    ranked = sorted(((name, len(sites)) for name, sites in groups.items()), key=lambda item: (-item[1], item[0]))
    return ranked[:k]
