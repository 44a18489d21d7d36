"""Comparison detectors: sentiment-threshold events and window labeling.

The sentiment detector ignores word dynamics altogether: it tracks the
follower-weighted sentiment strength over a sliding window and opens
an event whenever the current value reaches its own running historical
mean, closing when it falls back below. Its events carry a single
feature (the sentiment value) and flow through the same market
labeling and classification path as the full detector.

The windowed labeler scores any detector that reports fixed-length
windows: a window is a true positive opportunity if a market jitter
slot falls inside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import TokenizedTweet
from .market import LabelSets, LabeledEvent, MarketCalendar, assign_label


@dataclass(frozen=True)
class SentimentSeries:
    """Uniformly stepped follower-weighted sentiment magnitudes."""

    timestamps: np.ndarray
    values: np.ndarray
    step: float

    def __post_init__(self) -> None:
        if len(self.timestamps) != len(self.values):
            raise ValueError("series arrays must align")
        if len(self.timestamps) > 1:
            gaps = np.diff(self.timestamps)
            if np.any(np.abs(gaps - self.step) > 1e-9):
                raise ValueError("series step must be uniform")
        if np.any(self.values < 0):
            raise ValueError("sentiment magnitudes cannot be negative")


def windowed_ssi(
    ssi: np.ndarray, followers: np.ndarray
) -> float:
    """|follower-weighted mean sentiment|, plain mean if no followers."""
    if len(ssi) == 0:
        return 0.0
    total = float(followers.sum())
    if total > 0:
        return abs(float((followers / total * ssi).sum()))
    return abs(float(ssi.mean()))


def sentiment_series(
    tweets: Sequence[TokenizedTweet],
    window: float = 7200.0,
    step: float = 300.0,
) -> SentimentSeries:
    """Trailing-window sentiment magnitude sampled every ``step`` seconds.

    Each sample at time t covers tweets in (t - window, t]; empty
    windows score 0.
    """
    if window <= 0 or step <= 0:
        raise ValueError("window and step must be positive")
    if not tweets:
        return SentimentSeries(np.array([]), np.array([]), step)
    ts = np.array([t.ts for t in tweets])
    if np.any(np.diff(ts) < 0):
        raise ValueError("tweets must be time-sorted")
    ssi = np.array([t.ssi for t in tweets])
    followers = np.array([float(t.followers) for t in tweets])
    first = math.ceil(ts[0] / step) * step
    last = math.ceil(ts[-1] / step) * step
    grid = np.arange(first, last + step / 2.0, step)
    values = np.empty(len(grid))
    for i, t in enumerate(grid):
        lo = int(np.searchsorted(ts, t - window, side="right"))
        hi = int(np.searchsorted(ts, t, side="right"))
        values[i] = windowed_ssi(ssi[lo:hi], followers[lo:hi])
    return SentimentSeries(grid, values, step)


@dataclass
class SentimentEvent:
    """One run of above-average sentiment with its emission history."""

    start_ts: float
    updates: list[tuple[float, float]] = field(default_factory=list)

    @property
    def last_value(self) -> float:
        return self.updates[-1][1]


def sentiment_detect(
    series: SentimentSeries, update_factor: float = 1.1
) -> list[SentimentEvent]:
    """Threshold the series against its own causal running mean.

    An event opens at any sample whose value reaches the mean of all
    samples so far (inclusive), re-emits whenever the value gains the
    update factor over the last emission, and closes at the first
    sample below the running mean.
    """
    if len(series.timestamps) == 0:
        raise ValueError("empty sentiment series")
    events: list[SentimentEvent] = []
    current: SentimentEvent | None = None
    running = 0.0
    for i, (t, value) in enumerate(zip(series.timestamps, series.values)):
        running += float(value)
        mean = running / (i + 1)
        if current is None:
            if value >= mean:
                current = SentimentEvent(start_ts=float(t))
                current.updates.append((float(t), float(value)))
                events.append(current)
        else:
            if value < mean:
                current = None
            elif value >= update_factor * current.last_value:
                current.updates.append((float(t), float(value)))
    return events


def baseline_labeled_events(
    events: Sequence[SentimentEvent],
    calendar: MarketCalendar,
    sets: LabelSets,
    *,
    t_time: float = 3600.0,
    max_shift: float = 86400.0,
) -> list[LabeledEvent]:
    """Map sentiment events to market opens and label them.

    Per event, each open time keeps only the latest emission; an
    emission whose open lies more than ``max_shift`` ahead is dropped.
    When different events land on the same open, only the strongest
    (largest sentiment value) survives.
    """
    per_open: dict[float, tuple[float, float, float]] = {}
    for event in events:
        chosen: dict[float, tuple[float, float]] = {}
        for ts, value in event.updates:
            t_prime = calendar.next_open_time(ts)
            if t_prime - ts > max_shift:
                continue
            chosen[t_prime] = (ts, value)  # later updates overwrite
        for t_prime, (_, value) in chosen.items():
            cur = per_open.get(t_prime)
            if cur is None or value > cur[1]:
                per_open[t_prime] = (event.start_ts, value, t_prime)
    out = [
        LabeledEvent(
            event_start_ts=start,
            t_prime=t_prime,
            label=assign_label(t_prime, sets, t_time),
            features=np.array([value]),
        )
        for start, value, t_prime in per_open.values()
    ]
    out.sort(key=lambda ev: (ev.t_prime, ev.event_start_ts))
    return out


def window_label(
    t_w: float, window_len: float, sets: LabelSets
) -> int:
    """Label a fixed window: 1 if a true slot falls inside [t_w, t_w +
    window_len] (ends inclusive), else -1 for a neutral slot, else 0."""

    def contains(slots: np.ndarray) -> bool:
        if len(slots) == 0:
            return False
        i = int(np.searchsorted(slots, t_w, side="left"))
        return i < len(slots) and float(slots[i]) <= t_w + window_len

    if contains(np.asarray(sets.t_true, dtype=np.float64)):
        return 1
    if contains(np.asarray(sets.t_neutral, dtype=np.float64)):
        return -1
    return 0
