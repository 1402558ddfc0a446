"""Collect, parse and cross-reference ads.txt and sellers.json files."""

from .adstxt import AdsTxtFile, AdsTxtRecord, Relationship, dedupe_records, parse_ads_txt, parse_record, serialize
from .crossref import (
    VerificationMode,
    VerifiedRelationship,
    detect_pooling,
    direct_entries,
    relationship_counts_per_publisher,
    sites_with_verified,
    verify_relationships,
)
from .fetcher import FetchConfig, FetchResult, FetchStatus, Snapshot, crawl, fetch_ads_txt, fetch_sellers_json
from .sellersjson import Seller, SellersJsonFile, SellerType, lookup_seller, parse_sellers_json

__version__ = "0.1.0"

__all__ = [
    "AdsTxtFile",
    "AdsTxtRecord",
    "Relationship",
    "dedupe_records",
    "parse_ads_txt",
    "parse_record",
    "serialize",
    "VerificationMode",
    "VerifiedRelationship",
    "detect_pooling",
    "direct_entries",
    "relationship_counts_per_publisher",
    "sites_with_verified",
    "verify_relationships",
    "FetchConfig",
    "FetchResult",
    "FetchStatus",
    "Snapshot",
    "crawl",
    "fetch_ads_txt",
    "fetch_sellers_json",
    "Seller",
    "SellersJsonFile",
    "SellerType",
    "lookup_seller",
    "parse_sellers_json",
]
