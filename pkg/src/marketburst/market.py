"""Market calendar, intraday volatility, and volatility-based labels.

Volatility is the rolling sample standard deviation of intraday log
returns, computed per session so no window ever spans an overnight or
weekend gap. Slots whose volatility slope rises above a multiple of
the average slope magnitude form the "true" (market-moving) set; a
band just below it forms the discard ("neutral") set; everything else
is "false". Event vectors are mapped to the first market-open time at
or after their snapshot and labeled by proximity to those slot sets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .events import EventVector
from .records import MarketBar

DAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


class CalendarError(RuntimeError):
    """Raised when a query falls outside the calendar's horizon."""


class LabelingError(RuntimeError):
    """Raised when the slope baseline cannot be established."""


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    return int(hh) * 3600 + int(mm) * 60


@dataclass(frozen=True)
class MarketCalendar:
    """Weekly session template plus holidays, at a fixed UTC offset.

    ``weekly`` maps weekday index (Monday=0) to (open, close) second
    offsets from local midnight. Holiday dates drop all sessions for
    that local day.
    """

    weekly: dict[int, tuple[tuple[int, int], ...]]
    holidays: frozenset[str] = frozenset()
    utc_offset_hours: float = 0.0
    start_date: str | None = None
    end_date: str | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "MarketCalendar":
        weekly: dict[int, tuple[tuple[int, int], ...]] = {}
        for name, spans in obj.get("weekly", {}).items():
            idx = DAY_NAMES.index(name.lower())
            parsed = []
            for open_s, close_s in spans:
                lo, hi = _parse_hhmm(open_s), _parse_hhmm(close_s)
                if hi <= lo:
                    raise ValueError(f"session close before open on {name}")
                parsed.append((lo, hi))
            weekly[idx] = tuple(sorted(parsed))
        return cls(
            weekly=weekly,
            holidays=frozenset(obj.get("holidays", ())),
            utc_offset_hours=float(obj.get("utc_offset_hours", 0.0)),
            start_date=obj.get("start_date"),
            end_date=obj.get("end_date"),
        )

    def to_dict(self) -> dict:
        def fmt(sec: int) -> str:
            return f"{sec // 3600:02d}:{sec % 3600 // 60:02d}"

        weekly = {
            DAY_NAMES[idx]: [[fmt(a), fmt(b)] for a, b in spans]
            for idx, spans in sorted(self.weekly.items())
        }
        obj: dict = {
            "weekly": weekly,
            "holidays": sorted(self.holidays),
            "utc_offset_hours": self.utc_offset_hours,
        }
        if self.start_date:
            obj["start_date"] = self.start_date
        if self.end_date:
            obj["end_date"] = self.end_date
        return obj

    def _local_date(self, t: float) -> date:
        shifted = t + self.utc_offset_hours * 3600.0
        return datetime.fromtimestamp(shifted, tz=timezone.utc).date()

    def _midnight_utc(self, day: date) -> float:
        local = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
        return local.timestamp() - self.utc_offset_hours * 3600.0

    def sessions_on(self, day: date) -> list[tuple[float, float]]:
        """UTC (open, close) pairs for one local calendar day."""
        if day.isoformat() in self.holidays:
            return []
        base = self._midnight_utc(day)
        return [(base + lo, base + hi) for lo, hi in self.weekly.get(day.weekday(), ())]

    def session_at(self, t: float) -> tuple[float, float] | None:
        """The session interval containing ``t``, if the market is open."""
        day = self._local_date(t)
        for probe in (day - timedelta(days=1), day):
            for lo, hi in self.sessions_on(probe):
                if lo <= t < hi:
                    return lo, hi
        return None

    def is_open(self, t: float) -> bool:
        return self.session_at(t) is not None

    def next_open_time(self, t: float, max_days: int = 366) -> float:
        """``t`` itself if the market is open, else the next session open."""
        self._check_horizon(t)
        if self.is_open(t):
            return t
        day = self._local_date(t)
        for offset in range(max_days):
            for lo, _ in self.sessions_on(day + timedelta(days=offset)):
                if lo >= t:
                    self._check_horizon(lo)
                    return lo
        raise CalendarError(f"no market open within {max_days} days after {t}")

    def _check_horizon(self, t: float) -> None:
        day = self._local_date(t)
        if self.start_date and day < date.fromisoformat(self.start_date):
            raise CalendarError(f"{day} precedes calendar start {self.start_date}")
        if self.end_date and day > date.fromisoformat(self.end_date):
            raise CalendarError(f"{day} exceeds calendar end {self.end_date}")


def load_calendar(path: str | Path) -> MarketCalendar:
    return MarketCalendar.from_dict(json.loads(Path(path).read_text("utf-8")))


def save_calendar(path: str | Path, calendar: MarketCalendar) -> None:
    Path(path).write_text(json.dumps(calendar.to_dict(), indent=2) + "\n", "utf-8")


@dataclass(frozen=True)
class VolatilitySeries:
    """Per-slot volatility and slope, with session bookkeeping.

    Slots start at the first bar of each session with two returns
    behind it; near a session open the trailing window is truncated at
    the open so it never reaches across a gap. ``session_ids`` marks
    which session a slot belongs to; the slope at each session's first
    slot is 0.
    """

    timestamps: np.ndarray
    v: np.ndarray
    vprime: np.ndarray
    session_ids: np.ndarray

    def __post_init__(self) -> None:
        if not (len(self.timestamps) == len(self.v) == len(self.vprime)
                == len(self.session_ids)):
            raise ValueError("volatility series arrays must align")
        if len(self.timestamps) and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("volatility timestamps must be strictly increasing")
        if len(self.v) and np.any(self.v < 0):
            raise ValueError("volatility must be non-negative")


def compute_volatility(
    bars: Sequence[MarketBar], window: int, calendar: MarketCalendar
) -> VolatilitySeries:
    """Rolling stdev of log returns over the trailing ``window`` bars.

    Windows stay inside a single session: near the open the trailing
    window is truncated at the session start rather than reaching back
    across the gap. Slots begin at the first bar with two returns
    behind it, and the first slot of each session carries slope 0.
    """
    if window < 2:
        raise ValueError("window must cover at least two bars")
    if len(bars) < window + 2:
        raise ValueError(f"need at least {window + 2} bars, got {len(bars)}")
    ts_out: list[float] = []
    v_out: list[float] = []
    vp_out: list[float] = []
    sid_out: list[int] = []

    sid = -1
    current: tuple[float, float] | None = None
    sess_ts: list[float] = []
    sess_price: list[float] = []

    def flush() -> None:
        if len(sess_ts) < 3:
            return
        prices = np.asarray(sess_price)
        if np.any(prices <= 0):
            raise ValueError("prices must be positive")
        returns = np.log(prices[1:] / prices[:-1])
        prev_v: float | None = None
        prev_t = 0.0
        for i in range(2, len(sess_ts)):
            chunk = returns[max(0, i - window + 1) : i]
            val = float(np.std(chunk, ddof=1))
            t = sess_ts[i]
            slope = 0.0 if prev_v is None else (val - prev_v) / (t - prev_t)
            ts_out.append(t)
            v_out.append(val)
            vp_out.append(slope)
            sid_out.append(sid)
            prev_v, prev_t = val, t

    for bar in bars:
        session = calendar.session_at(bar.timestamp)
        if session is None:
            raise ValueError(
                f"bar at {bar.timestamp} falls outside every market session")
        if session != current:
            flush()
            current = session
            sid += 1
            sess_ts, sess_price = [], []
        sess_ts.append(float(bar.timestamp))
        sess_price.append(bar.price)
    flush()
    if not ts_out:
        raise ValueError("no session has enough bars for a volatility slot")
    return VolatilitySeries(
        np.asarray(ts_out), np.asarray(v_out), np.asarray(vp_out),
        np.asarray(sid_out, dtype=np.int64),
    )


@dataclass(frozen=True)
class LabelSets:
    """Disjoint slot sets partitioning the market timestamps."""

    t_true: np.ndarray
    t_false: np.ndarray
    t_neutral: np.ndarray
    t_true_val: float
    t_false_val: float

    def __post_init__(self) -> None:
        if not self.t_true_val > self.t_false_val > 0:
            raise ValueError("need t_true_val > t_false_val > 0")


def slope_baseline(
    vol: VolatilitySeries,
    mode: str = "abs",
    span: tuple[float, float] | None = None,
) -> float:
    """Average slope magnitude used to scale the label thresholds.

    Modes: "abs" (mean |slope|, default), "positive" (mean over
    positive slopes only), "signed" (raw mean).
    """
    values = vol.vprime
    if span is not None:
        mask = (vol.timestamps >= span[0]) & (vol.timestamps <= span[1])
        values = values[mask]
    if len(values) == 0:
        raise LabelingError("no volatility slots in the baseline span")
    if mode == "abs":
        base = float(np.abs(values).mean())
    elif mode == "positive":
        pos = values[values > 0]
        base = float(pos.mean()) if len(pos) else 0.0
    elif mode == "signed":
        base = float(values.mean())
    else:
        raise ValueError(f"unknown baseline mode {mode!r}")
    if not base > 0:
        raise LabelingError("slope baseline is not positive; cannot set thresholds")
    return base


def build_label_sets(
    vol: VolatilitySeries,
    multiplier: float,
    *,
    mode: str = "abs",
    baseline_span: tuple[float, float] | None = None,
) -> LabelSets:
    """Partition slots by slope against multiplier-scaled thresholds.

    The upper threshold is ``multiplier`` times the baseline slope; the
    lower one is 80% of the upper. Slopes above the upper go to the
    true set, below the lower to the false set, the band between to the
    neutral set.
    """
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    base = slope_baseline(vol, mode=mode, span=baseline_span)
    t_true_val = multiplier * base
    t_false_val = 0.8 * t_true_val
    above = vol.vprime > t_true_val
    below = vol.vprime < t_false_val
    return LabelSets(
        t_true=vol.timestamps[above],
        t_false=vol.timestamps[below],
        t_neutral=vol.timestamps[~above & ~below],
        t_true_val=t_true_val,
        t_false_val=t_false_val,
    )


def restrict_sets(sets: LabelSets, end: float) -> LabelSets:
    """Drop slots after ``end``, keeping the thresholds unchanged.

    Trailing-window volatility at a slot never looks past the slot, so
    restricting the slot sets is exactly what labeling against a price
    series truncated at ``end`` would produce.
    """
    return LabelSets(
        t_true=sets.t_true[sets.t_true <= end],
        t_false=sets.t_false[sets.t_false <= end],
        t_neutral=sets.t_neutral[sets.t_neutral <= end],
        t_true_val=sets.t_true_val,
        t_false_val=sets.t_false_val,
    )


def _min_distance(slots: np.ndarray, t: float) -> float:
    if len(slots) == 0:
        return math.inf
    i = int(np.searchsorted(slots, t))
    best = math.inf
    if i < len(slots):
        best = min(best, abs(float(slots[i]) - t))
    if i > 0:
        best = min(best, abs(float(slots[i - 1]) - t))
    return best


def assign_label(t_prime: float, sets: LabelSets, t_time: float = 3600.0) -> int:
    """Label a market time: 1 near a true slot, else -1 near a neutral
    slot, else 0; precedence exactly in that order, strict distance."""
    if _min_distance(sets.t_true, t_prime) < t_time:
        return 1
    if _min_distance(sets.t_neutral, t_prime) < t_time:
        return -1
    return 0


def map_to_market_opens(
    vectors: Iterable[EventVector], calendar: MarketCalendar
) -> list[tuple[EventVector, float]]:
    """Pair each vector with the first open time at/after its snapshot."""
    mapped = [(v, calendar.next_open_time(v.snapshot_ts)) for v in vectors]
    mapped.sort(key=lambda pair: (pair[0].snapshot_ts, pair[0].event_start_ts))
    return mapped


def dedupe_same_open(
    mapped: Sequence[tuple[EventVector, float]],
) -> list[tuple[EventVector, float]]:
    """Keep only the latest snapshot per (event start, market open) pair.

    Distinct events mapping to the same open all survive.
    """
    latest: dict[tuple[float, float], tuple[EventVector, float]] = {}
    for vec, t_prime in mapped:
        key = (vec.event_start_ts, t_prime)
        cur = latest.get(key)
        if cur is None or vec.snapshot_ts >= cur[0].snapshot_ts:
            latest[key] = (vec, t_prime)
    out = list(latest.values())
    out.sort(key=lambda pair: (pair[0].snapshot_ts, pair[0].event_start_ts))
    return out


@dataclass(frozen=True)
class LabeledEvent:
    """An event vector mapped to a market open and labeled there."""

    event_start_ts: float
    t_prime: float
    label: int
    features: np.ndarray

    def __post_init__(self) -> None:
        if self.label not in (-1, 0, 1):
            raise ValueError(f"label must be -1, 0, or 1: {self.label}")
        object.__setattr__(
            self, "features", np.asarray(self.features, dtype=np.float64)
        )


def label_events(
    mapped: Sequence[tuple[EventVector, float]],
    sets: LabelSets,
    t_time: float = 3600.0,
) -> list[LabeledEvent]:
    return [
        LabeledEvent(
            event_start_ts=vec.event_start_ts,
            t_prime=t_prime,
            label=assign_label(t_prime, sets, t_time),
            features=vec.features,
        )
        for vec, t_prime in mapped
    ]


def write_labeled_events(path: str | Path, events: Iterable[LabeledEvent]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps({
                "event_start_ts": ev.event_start_ts,
                "t_prime": ev.t_prime,
                "label": ev.label,
                "features": [float(x) for x in ev.features],
            }) + "\n")
            n += 1
    return n


def read_labeled_events(path: str | Path) -> list[LabeledEvent]:
    out: list[LabeledEvent] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(LabeledEvent(
                event_start_ts=float(obj["event_start_ts"]),
                t_prime=float(obj["t_prime"]),
                label=int(obj["label"]),
                features=np.asarray(obj["features"], dtype=np.float64),
            ))
    return out
