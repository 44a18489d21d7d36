"""Input records and file formats: tweet JSON-lines and market-bar CSV."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .text import surface_tokens

logger = logging.getLogger(__name__)

# fraction of malformed lines tolerated before the whole file is rejected
MALFORMED_FATAL_FRACTION = 0.10


class IngestError(ValueError):
    """Raised when an input file cannot be used at all."""


@dataclass(frozen=True)
class TweetRecord:
    """One microblog post with author statistics and optional coordinates."""

    timestamp: int
    text: str
    author_id: str
    followers: int
    verified: bool
    latitude: float | None = None
    longitude: float | None = None

    def __post_init__(self) -> None:
        if self.timestamp <= 0:
            raise ValueError(f"timestamp must be positive, got {self.timestamp}")
        if self.followers < 0:
            raise ValueError(f"followers must be >= 0, got {self.followers}")
        if (self.latitude is None) != (self.longitude is None):
            raise ValueError("latitude and longitude must be given together")
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")

    @property
    def has_coordinates(self) -> bool:
        return self.latitude is not None


@dataclass(frozen=True)
class MarketBar:
    """One intraday index observation."""

    timestamp: int
    price: float

    def __post_init__(self) -> None:
        if self.price <= 0:
            raise ValueError(f"price must be positive, got {self.price}")


def _record_from_obj(obj: dict) -> TweetRecord:
    lat = obj.get("lat")
    lon = obj.get("lon")
    return TweetRecord(
        timestamp=int(obj["ts"]),
        text=str(obj["text"]),
        author_id=str(obj["user"]),
        followers=int(obj["followers"]),
        verified=bool(obj["verified"]),
        latitude=None if lat is None else float(lat),
        longitude=None if lon is None else float(lon),
    )


def record_to_obj(rec: TweetRecord) -> dict:
    obj = {
        "ts": rec.timestamp,
        "text": rec.text,
        "user": rec.author_id,
        "followers": rec.followers,
        "verified": rec.verified,
    }
    if rec.has_coordinates:
        obj["lat"] = rec.latitude
        obj["lon"] = rec.longitude
    return obj


def parse_tweet_stream(path: str | Path) -> list[TweetRecord]:
    """Read tweet records from a JSON-lines file, sorted by timestamp.

    Malformed lines are skipped and counted; more than
    ``MALFORMED_FATAL_FRACTION`` of them is treated as systemic
    corruption and rejects the file, listing the offending line numbers.
    Out-of-order records are stably sorted by timestamp.
    """
    path = Path(path)
    try:
        lines = path.read_text("utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read tweet file {path}: {exc}") from exc

    records: list[TweetRecord] = []
    bad_lines: list[int] = []
    total = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        total += 1
        try:
            records.append(_record_from_obj(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            bad_lines.append(lineno)
    if total and len(bad_lines) > MALFORMED_FATAL_FRACTION * total:
        shown = ", ".join(map(str, bad_lines[:20]))
        raise IngestError(
            f"{len(bad_lines)}/{total} malformed lines in {path} "
            f"(lines {shown}{'...' if len(bad_lines) > 20 else ''})"
        )
    if bad_lines:
        logger.warning("skipped %d malformed lines in %s", len(bad_lines), path)
    records.sort(key=lambda r: r.timestamp)
    return records


def write_tweet_stream(records: Iterable[TweetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_obj(rec)) + "\n")


def count_malformed(path: str | Path) -> int:
    """Number of malformed lines in a tweet file (diagnostic helper)."""
    bad = 0
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        try:
            _record_from_obj(json.loads(line))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            bad += 1
    return bad


def read_market_csv(path: str | Path) -> list[MarketBar]:
    """Read intraday bars from a CSV with header ``ts,price``.

    Timestamps must be strictly increasing and prices positive; anything
    else is a fatal input error.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read market file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["ts", "price"]:
            raise IngestError(f"{path}: expected header 'ts,price', got {header}")
        bars: list[MarketBar] = []
        prev_ts = None
        for row in reader:
            if not row:
                continue
            try:
                bar = MarketBar(int(row[0]), float(row[1]))
            except (IndexError, ValueError) as exc:
                raise IngestError(f"{path}: bad bar row {row}: {exc}") from exc
            if prev_ts is not None and bar.timestamp <= prev_ts:
                raise IngestError(
                    f"{path}: timestamps not strictly increasing at {bar.timestamp}"
                )
            prev_ts = bar.timestamp
            bars.append(bar)
    return bars


def write_market_csv(bars: Iterable[MarketBar], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ts", "price"])
        for bar in bars:
            writer.writerow([bar.timestamp, repr(bar.price)])


def filter_by_terms(
    records: Sequence[TweetRecord], required_terms: frozenset[str] | set[str]
) -> list[TweetRecord]:
    """Keep records whose surface tokens intersect ``required_terms``.

    Matching is case-insensitive and happens before stemming, so terms
    like "greece" match the literal word only.
    """
    if not required_terms:
        raise ValueError("required_terms must be non-empty")
    wanted = {t.lower() for t in required_terms}
    return [r for r in records if wanted.intersection(surface_tokens(r.text))]
