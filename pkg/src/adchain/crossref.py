"""Cross-referencing publisher ads.txt claims with ad-system sellers.json files.

A relationship between publisher P and ad system S is verified only when P's
ads.txt lists a DIRECT record for S with account id X *and* S's sellers.json
discloses seller X.  Two modes are offered:

``IdMatch``
    the seller id merely has to exist in the sellers.json file;
``Strict``
    the seller must additionally be typed PUBLISHER or BOTH.

DIRECT entries pointing at ad systems whose sellers.json is not in the
snapshot are *unverifiable*: neither confirmed nor refuted, only counted.
"""

from __future__ import annotations

import dataclasses
import enum
from collections import defaultdict
from datetime import date
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .adstxt import AdsTxtFile, AdsTxtRecord, Relationship, dedupe_records
from .fetcher import Snapshot
from .registry import PublicSuffixList, entity_of, etld_plus_one
from .sellersjson import SellerType, lookup_seller

__all__ = [
    "VerificationMode",
    "VerifiedRelationship",
    "Coverage",
    "SiteCount",
    "PoolingCandidate",
    "EmptyCorpus",
    "direct_entries",
    "verify_relationships",
    "coverage_report",
    "sites_with_verified",
    "relationship_counts_per_publisher",
    "owner_entity",
    "detect_pooling",
]

PUBLISHER_TYPES = frozenset({SellerType.PUBLISHER, SellerType.BOTH})


class VerificationMode(str, enum.Enum):
    ID_MATCH = "idmatch"
    STRICT = "strict"


class EmptyCorpus(ValueError):
    """No publisher in the snapshot served a parseable ads.txt."""


@dataclasses.dataclass(frozen=True, order=True)
class VerifiedRelationship:
    publisher_domain: str
    ad_system_domain: str
    seller_account_id: str
    seller_type: SellerType
    snapshot_date: date
    # True iff the seller is typed PUBLISHER or BOTH, whatever mode produced it.
    strict: bool


@dataclasses.dataclass(frozen=True)
class Coverage:
    direct_entries: int
    verifiable_entries: int
    unverifiable_entries: int
    unverifiable_ad_systems: Tuple[str, ...]


@dataclasses.dataclass(frozen=True)
class SiteCount:
    count: int
    total: int

    @property
    def fraction(self) -> float:
        return self.count / self.total

    @property
    def percent(self) -> float:
        """Percentage rounded to 0.1."""
        return round(100.0 * self.count / self.total, 1)


@dataclasses.dataclass(frozen=True)
class PoolingCandidate:
    ad_system_domain: str
    seller_account_id: str
    claiming_publishers: FrozenSet[str]
    distinct_owner_entities: FrozenSet[str]


def direct_entries(file: AdsTxtFile) -> List[AdsTxtRecord]:
    return [r for r in dedupe_records(file) if r.relationship is Relationship.DIRECT]


def _mode(mode) -> VerificationMode:
    return mode if isinstance(mode, VerificationMode) else VerificationMode(str(mode).lower())


def verify_relationships(
    snapshot: Snapshot, mode: VerificationMode = VerificationMode.ID_MATCH
) -> Set[VerifiedRelationship]:
    mode = _mode(mode)
    sellers_files = snapshot.parsed_sellersjson()
    out: Set[VerifiedRelationship] = set()
    for publisher, adstxt in snapshot.parsed_adstxt().items():
        for record in direct_entries(adstxt):
            sellers = sellers_files.get(record.ad_system_domain)
            if sellers is None:
                continue
            seller = lookup_seller(sellers, record.seller_account_id)
            if seller is None:
                continue
            strict = seller.seller_type in PUBLISHER_TYPES
            if mode is VerificationMode.STRICT and not strict:
                continue
            out.add(
                VerifiedRelationship(
                    publisher_domain=publisher,
                    ad_system_domain=record.ad_system_domain,
                    seller_account_id=record.seller_account_id,
                    seller_type=seller.seller_type,
                    snapshot_date=snapshot.snapshot_date,
                    strict=strict,
                )
            )
    return out


def coverage_report(snapshot: Snapshot) -> Coverage:
    """How many DIRECT entries could be checked against a collected sellers.json."""
    collected = snapshot.parsed_sellersjson()
    total = verifiable = 0
    missing: Set[str] = set()
    for adstxt in snapshot.parsed_adstxt().values():
        for record in direct_entries(adstxt):
            total += 1
            if record.ad_system_domain in collected:
                verifiable += 1
            else:
                missing.add(record.ad_system_domain)
    return Coverage(total, verifiable, total - verifiable, tuple(sorted(missing)))


def sites_with_verified(snapshot: Snapshot, mode: VerificationMode = VerificationMode.ID_MATCH) -> SiteCount:
    """Publishers with at least one verified relationship, over those serving a parsed ads.txt."""
    total = len(snapshot.parsed_adstxt())
    if total == 0:
        raise EmptyCorpus("no publisher with a parsed ads.txt in snapshot")
    verified = {r.publisher_domain for r in verify_relationships(snapshot, mode)}
    return SiteCount(len(verified), total)


def relationship_counts_per_publisher(
    snapshot: Snapshot, mode: VerificationMode = VerificationMode.ID_MATCH
) -> Dict[str, int]:
    """Distinct verified ad systems per publisher; publishers with none map to 0."""
    systems: Dict[str, Set[str]] = {p: set() for p in snapshot.parsed_adstxt()}
    for rel in verify_relationships(snapshot, mode):
        systems[rel.publisher_domain].add(rel.ad_system_domain)
    return {p: len(s) for p, s in sorted(systems.items())}


def owner_entity(
    adstxt: AdsTxtFile,
    entity_map: Optional[Dict[str, str]] = None,
    psl: Optional[PublicSuffixList] = None,
) -> str:
    """Entity owning a publisher: its OWNERDOMAIN declaration, else its own registrable domain."""
    domain = adstxt.variable("OWNERDOMAIN") or adstxt.publisher_domain
    domain = domain.strip().lower()
    return entity_of(etld_plus_one(domain, psl) or domain, entity_map)


def detect_pooling(
    snapshot: Snapshot,
    entity_map: Optional[Dict[str, str]] = None,
    psl: Optional[PublicSuffixList] = None,
) -> List[PoolingCandidate]:
    """Flag DIRECT seller accounts shared by publishers of different owners.

    One account claimed as DIRECT by sites that are not run by the same
    organisation suggests the inventory is being pooled.
    """
    claims: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
    owners: Dict[str, str] = {}
    for publisher, adstxt in snapshot.parsed_adstxt().items():
        owners[publisher] = owner_entity(adstxt, entity_map, psl)
        for record in direct_entries(adstxt):
            claims[(record.ad_system_domain, record.seller_account_id)].add(publisher)

    candidates = []
    for (ad_system, account_id), publishers in claims.items():
        entities = {owners[p] for p in publishers}
        if len(publishers) >= 2 and len(entities) >= 2:
            candidates.append(PoolingCandidate(ad_system, account_id, frozenset(publishers), frozenset(entities)))
    candidates.sort(key=lambda c: (-len(c.claiming_publishers), c.ad_system_domain, c.seller_account_id))
    return candidates
