"""Streaming burst-event detection and event feature vectors.

The detector consumes a time-ordered tweet stream, feeds per-word
rate tracks, and maintains at most one active event. An event opens
when a word turns bursty, grows its word set as further words burst,
emits an updated vector whenever the combined rate of its words gains
at least 10% over the previous emission, and closes when every word
has fallen back to normal (or after 24 hours).

Each emitted vector has ``2 * n_categories + 10`` features: a
(burst word count, peak rate) pair per word category followed by ten
whole-event features. Emitted vectors are cumulative elementwise
maxima over the event's raw snapshots, so the last vector of an event
is its strongest version.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .rates import KERNEL_SUPPORT, BurstThresholds, WordClustering, WordRateTrack
from .records import TweetRecord
from .sentiment import SentimentLexicon, default_lexicon, score_tokens
from .text import default_stopwords, tokenize_and_stem

EARTH_RADIUS_KM = 6371.0

#: features appended after the per-category (count, peak rate) pairs
TAIL_FEATURES = (
    "peak_rate",
    "peak_slope",
    "verified_ratio",
    "followers_mean",
    "followers_max",
    "market_dist_mean",
    "market_dist_weighted",
    "location_dispersion",
    "sentiment_index",
    "sentiment_index_weighted",
)


def feature_names(n_categories: int) -> list[str]:
    """Ordered names for a ``2 * n_categories + 10`` feature vector."""
    names: list[str] = []
    for i in range(n_categories):
        names.append(f"burst_count_c{i}")
        names.append(f"peak_rate_c{i}")
    names.extend(TAIL_FEATURES)
    return names


def haversine_km(
    lat1: float, lon1: float, lat2: float, lon2: float,
    radius: float = EARTH_RADIUS_KM,
) -> float:
    """Great-circle distance between two lat/lon points in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return radius * 2.0 * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class TokenizedTweet:
    """A tweet reduced to what detection needs.

    ``tokens`` is the deduplicated stemmed content-token set; ``ssi``
    is the tweet's precomputed sentiment strength.
    """

    ts: float
    tokens: frozenset[str]
    followers: int
    verified: bool
    lat: float | None
    lon: float | None
    ssi: float

    @property
    def has_coordinates(self) -> bool:
        return self.lat is not None


def tokenize_tweet(
    record: TweetRecord,
    stopwords: frozenset[str],
    lexicon: SentimentLexicon,
) -> TokenizedTweet:
    tokens = tokenize_and_stem(record.text, stopwords)
    return TokenizedTweet(
        ts=float(record.timestamp),
        tokens=frozenset(tokens),
        followers=record.followers,
        verified=record.verified,
        lat=record.latitude,
        lon=record.longitude,
        ssi=float(score_tokens(tokens, lexicon)[2]),
    )


@dataclass(frozen=True)
class EventVector:
    """One emitted (cumulatively max-merged) event snapshot."""

    event_start_ts: float
    snapshot_ts: float
    features: np.ndarray
    n_categories: int

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if len(feats) != 2 * self.n_categories + 10:
            raise ValueError(
                f"expected {2 * self.n_categories + 10} features, got {len(feats)}"
            )
        if not np.all(np.isfinite(feats)):
            raise ValueError("event features must be finite")

    def feature(self, name: str) -> float:
        return float(self.features[feature_names(self.n_categories).index(name)])


@dataclass
class ActiveEvent:
    """Mutable state of the single in-flight event."""

    t_s: float
    n_categories: int
    update_times: list[float] = field(default_factory=list)
    words: dict[str, int] = field(default_factory=dict)  # word -> category
    last_sum: float = 0.0
    # running per-word maxima since t_s, over the whole vocabulary
    peak_rate: dict[str, float] = field(default_factory=dict)
    peak_slope: dict[str, float] = field(default_factory=dict)
    # accumulated statistics over associated tweets
    tweet_count: int = 0
    verified_count: int = 0
    followers: list[float] = field(default_factory=list)
    ssi_values: list[float] = field(default_factory=list)
    geo: list[tuple[float, float, float]] = field(default_factory=list)
    geo_missing: bool = False
    # tweets seen since t_s whose tokens do not yet touch the word set
    pending: list[TokenizedTweet] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)

    def note_rates(self, word: str, rate: float, slope: float) -> None:
        if rate > self.peak_rate.get(word, 0.0):
            self.peak_rate[word] = rate
        if slope > self.peak_slope.get(word, -math.inf):
            self.peak_slope[word] = slope

    def add_words(self, words: Iterable[str], clustering_of) -> bool:
        added = False
        for w in words:
            if w not in self.words:
                self.words[w] = clustering_of(w)
                added = True
        return added

    def offer_tweet(self, tweet: TokenizedTweet) -> None:
        if tweet.ts < self.t_s:
            return
        if tweet.tokens & self.words.keys():
            self._absorb(tweet)
        else:
            self.pending.append(tweet)

    def rescan_pending(self) -> None:
        keep: list[TokenizedTweet] = []
        for tweet in self.pending:
            if tweet.tokens & self.words.keys():
                self._absorb(tweet)
            else:
                keep.append(tweet)
        self.pending = keep

    def _absorb(self, tweet: TokenizedTweet) -> None:
        self.tweet_count += 1
        if tweet.verified:
            self.verified_count += 1
        self.followers.append(float(tweet.followers))
        self.ssi_values.append(tweet.ssi)
        if tweet.has_coordinates:
            self.geo.append((tweet.lat, tweet.lon, float(tweet.followers)))


def word_features(event: ActiveEvent) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Per-category burst counts and peak rates, plus overall R and S.

    Peak rates/slopes cover the whole event lifetime at tick
    granularity, including ticks before a word joined the set.
    """
    counts = np.zeros(event.n_categories)
    peaks = np.zeros(event.n_categories)
    top_slope = 0.0
    for word, cat in event.words.items():
        counts[cat] += 1
        rate = event.peak_rate.get(word, 0.0)
        if rate > peaks[cat]:
            peaks[cat] = rate
        slope = event.peak_slope.get(word, 0.0)
        if slope > top_slope:
            top_slope = slope
    return counts, peaks, float(peaks.max(initial=0.0)), top_slope


def audience_features(event: ActiveEvent) -> tuple[float, float, float]:
    """Verified-tweet ratio, mean and max follower count; zeros if empty."""
    if event.tweet_count == 0:
        return 0.0, 0.0, 0.0
    followers = np.asarray(event.followers)
    return (
        event.verified_count / event.tweet_count,
        float(followers.mean()),
        float(followers.max()),
    )


def geo_features(
    event: ActiveEvent, market_lat: float, market_lon: float
) -> tuple[float, float, float]:
    """Distance-to-market statistics and location dispersion.

    Only geo-tagged associated tweets participate. Dispersion is the
    coefficient of variation of distances from the event centre (the
    mean coordinate); with no geo-tagged tweets all three are 0 and the
    event is flagged geo-missing.
    """
    if not event.geo:
        event.geo_missing = True
        return 0.0, 0.0, 0.0
    lats = np.array([g[0] for g in event.geo])
    lons = np.array([g[1] for g in event.geo])
    weights = np.array([g[2] for g in event.geo])
    dists = np.array([
        haversine_km(la, lo, market_lat, market_lon) for la, lo in zip(lats, lons)
    ])
    d_avg = float(dists.mean())
    total = float(weights.sum())
    if total > 0:
        d_w = float((weights / total * dists).sum())
    else:
        d_w = d_avg
    centre_lat, centre_lon = float(lats.mean()), float(lons.mean())
    spread = np.array([
        haversine_km(la, lo, centre_lat, centre_lon) for la, lo in zip(lats, lons)
    ])
    mean_spread = float(spread.mean())
    disp = float(spread.std() / mean_spread) if mean_spread > 0 else 0.0
    return d_avg, d_w, disp


def sentiment_features(event: ActiveEvent) -> tuple[float, float]:
    """Absolute mean and absolute follower-weighted mean tweet sentiment."""
    if not event.ssi_values:
        return 0.0, 0.0
    ssi = np.asarray(event.ssi_values)
    followers = np.asarray(event.followers)
    total = float(followers.sum())
    if total > 0:
        weighted = float((followers / total * ssi).sum())
    else:
        weighted = float(ssi.mean())
    return abs(float(ssi.mean())), abs(weighted)


def raw_snapshot(
    event: ActiveEvent, market_lat: float, market_lon: float
) -> np.ndarray:
    counts, peaks, top_rate, top_slope = word_features(event)
    vec = np.empty(2 * event.n_categories + 10)
    vec[0 : 2 * event.n_categories : 2] = counts
    vec[1 : 2 * event.n_categories : 2] = peaks
    vec[-10], vec[-9] = top_rate, top_slope
    vec[-8], vec[-7], vec[-6] = audience_features(event)
    vec[-5], vec[-4], vec[-3] = geo_features(event, market_lat, market_lon)
    vec[-2], vec[-1] = sentiment_features(event)
    return vec


def merge_max(snapshots: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise maximum over an event's raw snapshots."""
    if not snapshots:
        raise ValueError("need at least one snapshot to merge")
    return np.maximum.reduce([np.asarray(s, dtype=np.float64) for s in snapshots])


class EventDetector:
    """The single-threaded detection loop over a tokenized stream.

    Owns the word tracks, the burst state machine, and the one active
    event. ``tick`` drives everything at a fixed time step; ``process``
    wraps a whole record stream.

    The evaluation clock runs four bandwidths behind the newest tweet.
    The kernel is symmetric, so at the stream head only past arrivals
    exist and the estimated slope can never be positive; the burst rule
    (which needs a positive slope) would be unsatisfiable there. With a
    look-ahead of the full kernel support the truncated-kernel rate and
    slope at the clock are exact, at the cost of a fixed detection
    delay (40 minutes at the default bandwidth). Event timestamps are
    clock times, i.e. the burst time, not the time the detector fired.
    """

    def __init__(
        self,
        thresholds: BurstThresholds,
        clustering: WordClustering,
        *,
        bandwidth: float = 600.0,
        tick_seconds: float = 60.0,
        market_lat: float = 0.0,
        market_lon: float = 0.0,
        update_factor: float = 1.1,
        max_event_seconds: float = 86400.0,
        stopwords: frozenset[str] | None = None,
        lexicon: SentimentLexicon | None = None,
    ):
        if tick_seconds <= 0 or bandwidth <= 0:
            raise ValueError("tick_seconds and bandwidth must be positive")
        self.thresholds = thresholds
        self.clustering = clustering
        # one extra category collects words outside the clustered vocabulary
        self.n_categories = clustering.n_categories + 1
        self.bandwidth = bandwidth
        self.tick_seconds = tick_seconds
        self.market_lat = market_lat
        self.market_lon = market_lon
        self.update_factor = update_factor
        self.max_event_seconds = max_event_seconds
        self.stopwords = stopwords if stopwords is not None else default_stopwords()
        self.lexicon = lexicon if lexicon is not None else default_lexicon()
        self.lookahead_seconds = KERNEL_SUPPORT * bandwidth
        self.tracks: dict[str, WordRateTrack] = {}
        self.state: ActiveEvent | None = None
        self._last_tick: float | None = None
        # tweets already in the tracks but still ahead of the clock
        self._ahead: list[TokenizedTweet] = []

    def category_of(self, word: str) -> int:
        cat = self.clustering.category_of(word)
        return self.n_categories - 1 if cat is None else cat

    def tick(self, now: float, tweets: Sequence[TokenizedTweet]) -> list[EventVector]:
        """Advance the loop to ``now`` with the tweets delivered since
        the previous tick.

        Delivered tweets may run ahead of ``now`` (the caller is
        expected to hand them over as soon as they arrive, up to one
        look-ahead early). They feed the rate tracks immediately but
        join events only once the clock reaches their timestamp.
        """
        if self._last_tick is not None and now <= self._last_tick:
            raise RuntimeError(f"tick time not increasing: {now} <= {self._last_tick}")
        self._last_tick = now

        for tweet in tweets:
            for word in tweet.tokens:
                track = self.tracks.get(word)
                if track is None:
                    track = self.tracks[word] = WordRateTrack(word, self.bandwidth)
                track.add_arrival(tweet.ts)
        self._ahead.extend(tweets)
        split = 0
        while split < len(self._ahead) and self._ahead[split].ts <= now:
            split += 1
        due, self._ahead = self._ahead[:split], self._ahead[split:]

        bursty: list[str] = []
        rates: dict[str, float] = {}
        for word, track in self.tracks.items():
            track.prune_before(now)
            if track.count == 0 and not track.bursty:
                if self.state is not None:
                    self.state.note_rates(word, 0.0, 0.0)
                continue
            rate, slope = track.rate_and_slope_at(now)
            track.apply_burst_rule(now, rate, slope, self.thresholds)
            rates[word] = rate
            if self.state is not None:
                self.state.note_rates(word, rate, slope)
            if track.bursty:
                bursty.append(word)

        emitted: list[EventVector] = []
        if self.state is not None and now - self.state.t_s >= self.max_event_seconds:
            self.state = None  # age cap: close; reopen below if bursts persist

        if self.state is None:
            if bursty:
                self._open(now, bursty, rates, due)
                emitted.append(self._emit(now))
            return emitted

        event = self.state
        grew = event.add_words(bursty, self.category_of)
        for tweet in due:
            event.offer_tweet(tweet)
        if grew:
            event.rescan_pending()

        if not any(self.tracks[w].bursty for w in event.words):
            self.state = None
            return emitted

        total = sum(rates.get(w, 0.0) for w in event.words)
        if total > self.update_factor * event.last_sum:
            event.last_sum = total
            emitted.append(self._emit(now))
        return emitted

    def _open(
        self,
        now: float,
        bursty: Sequence[str],
        rates: dict[str, float],
        tweets: Sequence[TokenizedTweet],
    ) -> None:
        event = ActiveEvent(t_s=now, n_categories=self.n_categories)
        event.add_words(bursty, self.category_of)
        for word, track in self.tracks.items():
            if track.count or track.bursty:
                rate, slope = track.rate_and_slope_at(now)
                event.note_rates(word, rate, slope)
        for tweet in tweets:
            event.offer_tweet(tweet)
        event.rescan_pending()
        event.last_sum = sum(rates.get(w, 0.0) for w in event.words)
        self.state = event

    def _emit(self, now: float) -> EventVector:
        event = self.state
        assert event is not None
        event.update_times.append(now)
        event.snapshots.append(raw_snapshot(event, self.market_lat, self.market_lon))
        return EventVector(
            event_start_ts=event.t_s,
            snapshot_ts=now,
            features=merge_max(event.snapshots),
            n_categories=event.n_categories,
        )

    def process(self, records: Iterable[TweetRecord]) -> Iterator[EventVector]:
        """Tokenize and tick through a time-ordered record stream.

        Ticks run once the stream is a full look-ahead past them, so
        every estimate is final; the clock is then flushed past the
        last arrival so trailing bursts still get evaluated.
        """
        batch: list[TokenizedTweet] = []
        next_tick: float | None = None
        last_ts = 0.0
        step = self.tick_seconds
        for record in records:
            tweet = tokenize_tweet(record, self.stopwords, self.lexicon)
            if next_tick is None:
                next_tick = math.ceil(tweet.ts / step) * step
            while tweet.ts > next_tick + self.lookahead_seconds:
                yield from self.tick(next_tick, batch)
                batch = []
                next_tick += step
            batch.append(tweet)
            last_ts = tweet.ts
        if next_tick is None:
            return
        while next_tick <= last_ts + step:
            yield from self.tick(next_tick, batch)
            batch = []
            next_tick += step


def write_events(path: str | Path, vectors: Iterable[EventVector]) -> int:
    """Append-order JSON-lines dump of emitted vectors; returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for vec in vectors:
            fh.write(json.dumps({
                "event_start_ts": vec.event_start_ts,
                "snapshot_ts": vec.snapshot_ts,
                "features": [float(x) for x in vec.features],
                "n_categories": vec.n_categories,
            }) + "\n")
            n += 1
    return n


def read_events(path: str | Path) -> list[EventVector]:
    vectors: list[EventVector] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            vectors.append(EventVector(
                event_start_ts=float(obj["event_start_ts"]),
                snapshot_ts=float(obj["snapshot_ts"]),
                features=np.asarray(obj["features"], dtype=np.float64),
                n_categories=int(obj["n_categories"]),
            ))
    return vectors
