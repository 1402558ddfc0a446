"""Parsing and lookup for sellers.json files (IAB Tech Lab sellers.json 1.0)."""

from __future__ import annotations

import dataclasses
import enum
import json
from datetime import datetime
from typing import Any, Dict, List, Optional, Union

__all__ = ["SellerType", "Seller", "SellersJsonFile", "parse_sellers_json", "lookup_seller"]


class SellerType(str, enum.Enum):
    PUBLISHER = "PUBLISHER"
    INTERMEDIARY = "INTERMEDIARY"
    BOTH = "BOTH"

    @classmethod
    def parse(cls, value: Any) -> Optional["SellerType"]:
        if not isinstance(value, str):
            return None
        try:
            return cls(value.strip().upper())
        except ValueError:
            return None


@dataclasses.dataclass(frozen=True)
class Seller:
    seller_id: str
    seller_type: SellerType
    name: Optional[str] = None
    domain: Optional[str] = None
    is_confidential: bool = False
    is_passthrough: bool = False


@dataclasses.dataclass
class SellersJsonFile:
    ad_system_domain: str
    sellers: Dict[str, Seller] = dataclasses.field(default_factory=dict)
    contact_email: Optional[str] = None
    contact_address: Optional[str] = None
    version: Optional[str] = None
    diagnostics: List[str] = dataclasses.field(default_factory=list)
    fetched_at: Optional[datetime] = None
    entry_count: int = 0


def _optional_text(value: Any) -> Optional[str]:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def _flag(value: Any) -> bool:
    # The IAB schema uses 0/1; booleans and numeric strings show up in the wild.
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes")
    return bool(value)


def _seller_id(value: Any) -> Optional[str]:
    # Numeric ids are common even though the schema says string.
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, str)):
        text = str(value).strip()
        return text or None
    return None


def parse_sellers_json(
    text: Union[str, bytes],
    ad_system_domain: str,
    fetched_at: Optional[datetime] = None,
) -> SellersJsonFile:
    """Parse a sellers.json document.

    Never raises on bad input. A document that is not a JSON object yields an
    empty seller map with a fatal diagnostic; malformed seller entries are
    skipped with one diagnostic each, and duplicate ``seller_id`` values keep
    the first entry.
    """
    result = SellersJsonFile(ad_system_domain=ad_system_domain.strip().lower(), fetched_at=fetched_at)
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    text = text.lstrip("\ufeff")

    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        result.diagnostics.append(f"fatal: not JSON ({exc.msg} at line {exc.lineno})")
        return result
    if not isinstance(document, dict):
        result.diagnostics.append(f"fatal: top-level value is {type(document).__name__}, not an object")
        return result

    result.contact_email = _optional_text(document.get("contact_email"))
    result.contact_address = _optional_text(document.get("contact_address"))
    result.version = _optional_text(document.get("version"))

    entries = document.get("sellers")
    if entries is None:
        result.diagnostics.append("missing sellers array")
        return result
    if not isinstance(entries, list):
        result.diagnostics.append("sellers is not an array")
        return result

    result.entry_count = len(entries)
    for index, entry in enumerate(entries):
        if not isinstance(entry, dict):
            result.diagnostics.append(f"sellers[{index}]: not an object")
            continue
        seller_id = _seller_id(entry.get("seller_id"))
        if seller_id is None:
            result.diagnostics.append(f"sellers[{index}]: missing seller_id")
            continue
        seller_type = SellerType.parse(entry.get("seller_type"))
        if seller_type is None:
            result.diagnostics.append(
                f"sellers[{index}]: missing or invalid seller_type {entry.get('seller_type')!r}"
            )
            continue
        if seller_id in result.sellers:
            result.diagnostics.append(f"sellers[{index}]: duplicate seller_id {seller_id!r} ignored")
            continue
        domain = _optional_text(entry.get("domain"))
        result.sellers[seller_id] = Seller(
            seller_id=seller_id,
            seller_type=seller_type,
            name=_optional_text(entry.get("name")),
            domain=domain.lower() if domain else None,
            is_confidential=_flag(entry.get("is_confidential", 0)),
            is_passthrough=_flag(entry.get("is_passthrough", 0)),
        )
    return result


def lookup_seller(file: SellersJsonFile, seller_id: str) -> Optional[Seller]:
    return file.sellers.get(seller_id.strip())
