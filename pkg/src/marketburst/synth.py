"""Seeded synthetic data: tweet stream, price bars, calendar, truth.

The generated world is small but complete: a Poisson background of
uncorrelated chatter, one high-volume chat word that pins the burst
thresholds during the training half, planted tweet surges with
class-specific audience/geo/sentiment profiles, and a market whose
volatility spikes shortly after each market-moving event (plus a couple
of spurious spikes nobody tweeted about). Everything is a pure function
of the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .config import PipelineConfig, write_config
from .market import MarketCalendar, save_calendar
from .records import MarketBar, TweetRecord, write_market_csv, write_tweet_stream
from .text import default_stopwords, porter_stem

DAY = 86400.0

# Topic vocabulary. Coined tokens chosen to be their own stems so the
# words planted here survive tokenization unchanged.
HOT_WORDS = ("zorvex", "quantor", "meridun", "talvon", "kresta", "dolvin")
MILD_WORDS = ("farlow", "betrix", "gorbel", "plinta", "varnex", "mostin")
BACKGROUND_WORDS = (
    "arbel", "bindor", "corvat", "delmor", "ervint", "fandor",
    "gelbin", "hartol", "ivenor", "jolbek", "kandrel", "lomvit",
    "mandor", "nervok", "ostrel", "pelvin", "questor", "rondel",
    "selvok", "tarnix", "umbrel", "vintor", "welbor", "xandel",
)
ANCHOR_WORD = "finchat"

# Sentiment words per class, picked from the packaged lexicon with
# comparable strengths so a sentiment-only view cannot tell the classes
# apart once follower weighting is accounted for.
IMPACT_SENTIMENT = ("crash", "collapse", "panic", "crisis")
CALM_SENTIMENT = ("plunge", "plummet", "turmoil", "worst")
BACKGROUND_SENTIMENT = ("deal", "risk", "debt", "stable")


@dataclass(frozen=True)
class PlantedEvent:
    """One scripted tweet surge and its audience profile."""

    time: float
    impact: bool
    words: tuple[str, ...]
    n_tweets: int
    duration: float = 1200.0
    followers_log_mean: float = math.log(150.0)
    followers_log_sigma: float = 0.8
    verified_p: float = 0.04
    geo_p: float = 0.4
    geo_near_market: bool = False
    sentiment_words: tuple[str, ...] = CALM_SENTIMENT
    sentiment_p: float = 0.55


@dataclass(frozen=True)
class SyntheticScenario:
    """Full recipe for one generated data set."""

    seed: int = 0
    start_ts: float = 1433116800.0  # a Monday, 00:00 UTC
    days: int = 14
    events: tuple[PlantedEvent, ...] = ()
    background_rate: float = 0.03
    background_sentiment_p: float = 0.04
    anchor_rate: float = 0.02
    anchor_until: float | None = None  # default: mid-stream
    bar_step: int = 300
    base_price: float = 100.0
    sigma0: float = 4e-4
    wave_amp: float = 0.3
    spike_factor: float = 10.0
    spike_bars: int = 4
    spike_delay: float = 600.0
    spurious_bars: int = 3
    spurious_spikes: tuple[float, ...] = ()
    market_lat: float = 37.9838
    market_lon: float = 23.7275
    market_open: str = "09:00"
    market_close: str = "17:00"

    @property
    def end_ts(self) -> float:
        return self.start_ts + self.days * DAY

    @property
    def split_ts(self) -> float:
        return self.start_ts + self.days * DAY / 2.0


def _impact_event(t: float, words: tuple[str, ...]) -> PlantedEvent:
    return PlantedEvent(
        time=t, impact=True, words=words, n_tweets=220,
        followers_log_mean=math.log(5000.0), followers_log_sigma=1.0,
        verified_p=0.5, geo_p=0.7, geo_near_market=True,
        sentiment_words=IMPACT_SENTIMENT, sentiment_p=0.25,
    )


def _calm_event(t: float, words: tuple[str, ...]) -> PlantedEvent:
    return PlantedEvent(time=t, impact=False, words=words, n_tweets=150)


def _rotate(pool: tuple[str, ...], k: int, take: int) -> tuple[str, ...]:
    return tuple(pool[(k + j) % len(pool)] for j in range(take))


def standard_scenario(seed: int = 0) -> SyntheticScenario:
    """The stock two-week scenario: ten train and ten eval events.

    Odd hours keep every event at least two hours away from any other
    event's volatility spike, so planted labels are unambiguous. One
    event sits on the second Saturday and one overnight to exercise the
    shift to the next market open, and two volatility spikes in the
    training half have no event at all.
    """
    t0 = SyntheticScenario(seed=seed).start_ts

    def at(day: int, hours: float) -> float:
        return t0 + day * DAY + hours * 3600.0

    impact_times = [(0, 10.5), (1, 11.0), (2, 10.0), (3, 11.5), (4, 10.5),
                    (7, 10.5), (8, 11.0), (9, 10.0), (10, 11.5), (12, 12.0)]
    calm_times = [(0, 14.0), (1, 15.5), (2, 22.0), (3, 14.5), (4, 15.0),
                  (7, 15.5), (8, 15.0), (9, 14.5), (10, 15.0), (11, 10.5)]
    events = [
        _impact_event(at(d, h), _rotate(HOT_WORDS, k, 4))
        for k, (d, h) in enumerate(impact_times)
    ] + [
        _calm_event(at(d, h), _rotate(MILD_WORDS, k, 4))
        for k, (d, h) in enumerate(calm_times)
    ]
    events.sort(key=lambda e: e.time)
    return SyntheticScenario(
        seed=seed,
        events=tuple(events),
        spurious_spikes=(at(2, 13.0), at(4, 13.5)),
    )


def _check_vocabulary(scenario: SyntheticScenario) -> None:
    stop = default_stopwords()
    planted = set(BACKGROUND_WORDS) | {ANCHOR_WORD}
    for ev in scenario.events:
        planted.update(ev.words)
    for word in sorted(planted):
        if word in stop:
            raise ValueError(f"planted word {word!r} is a stop word")
        if porter_stem(word) != word:
            raise ValueError(f"planted word {word!r} is not stem-stable")


def _scenario_calendar(scenario: SyntheticScenario) -> MarketCalendar:
    # pad the horizon generously so open-time lookups near the end of
    # the stream stay in range
    start_day = date(1970, 1, 1) + timedelta(days=int(scenario.start_ts // 86400) - 7)
    end_day = date(1970, 1, 1) + timedelta(days=int(scenario.end_ts // 86400) + 45)
    session = [scenario.market_open, scenario.market_close]
    return MarketCalendar.from_dict({
        "weekly": {day: [session] for day in ("mon", "tue", "wed", "thu", "fri")},
        "holidays": [],
        "utc_offset_hours": 0.0,
        "start_date": start_day.isoformat(),
        "end_date": end_day.isoformat(),
    })


def _spike_windows(
    scenario: SyntheticScenario, calendar: MarketCalendar
) -> tuple[list[tuple[float, int]], list[float | None]]:
    """Bar-aligned volatility spike windows plus each event's spike start."""
    windows: list[tuple[float, int]] = []
    event_spikes: list[float | None] = []
    step = scenario.bar_step
    for ev in scenario.events:
        if not ev.impact:
            event_spikes.append(None)
            continue
        t_prime = calendar.next_open_time(ev.time)
        session = calendar.session_at(t_prime)
        assert session is not None
        anchor = t_prime + scenario.spike_delay
        k = max(2, math.ceil((anchor - session[0]) / step))
        start = session[0] + k * step
        if start + scenario.spike_bars * step > session[1]:
            raise ValueError(f"spike for event at {ev.time} overruns its session")
        if start - t_prime > 3600.0:
            raise ValueError(f"spike for event at {ev.time} lands too late")
        windows.append((start, scenario.spike_bars))
        event_spikes.append(start)
    for t in scenario.spurious_spikes:
        session = calendar.session_at(t)
        if session is None:
            raise ValueError(f"spurious spike at {t} is outside market hours")
        k = max(2, math.ceil((t - session[0]) / step))
        windows.append((session[0] + k * step, scenario.spurious_bars))
    return windows, event_spikes


def _market_bars(
    scenario: SyntheticScenario,
    calendar: MarketCalendar,
    windows: list[tuple[float, int]],
) -> list[MarketBar]:
    """Alternating-sign log returns with a slow intraday volatility wave.

    The strict sign alternation keeps the rolling stdev smooth except
    where a spike window multiplies the local scale, so the volatility
    slope is negligible everywhere but the engineered spikes.
    """
    step = scenario.bar_step
    bars: list[MarketBar] = []
    price = scenario.base_price
    direction = 1.0
    day0 = date(1970, 1, 1) + timedelta(days=int(scenario.start_ts // 86400))
    # one extra day of bars so a weekend event's next-open spike (up to
    # two days past a Friday-evening event) still has market data
    for d in range(scenario.days + 1):
        for lo, hi in calendar.sessions_on(day0 + timedelta(days=d)):
            t = lo
            while t < hi:
                sigma = scenario.sigma0 * (
                    1.0 + scenario.wave_amp
                    * math.sin(2.0 * math.pi * (t - scenario.start_ts) / DAY)
                )
                boost = 1.0
                for start, nbars in windows:
                    if start <= t < start + nbars * step:
                        boost = scenario.spike_factor
                        break
                price *= math.exp(direction * sigma * boost)
                direction = -direction
                bars.append(MarketBar(int(t), price))
                t += step
    return bars


def _coords(rng: np.random.Generator, near_market: bool,
            scenario: SyntheticScenario) -> tuple[float, float]:
    if near_market:
        lat = scenario.market_lat + rng.normal(0.0, 0.25)
        lon = scenario.market_lon + rng.normal(0.0, 0.3)
        return float(np.clip(lat, -89.0, 89.0)), float(np.clip(lon, -179.0, 179.0))
    return float(rng.uniform(-45.0, 60.0)), float(rng.uniform(-179.0, 179.0))


def _background_tweets(
    scenario: SyntheticScenario, rng: np.random.Generator
) -> list[TweetRecord]:
    span = scenario.days * DAY
    n = int(rng.poisson(scenario.background_rate * span))
    ts = scenario.start_ts + rng.uniform(0.0, span, n)
    first = rng.integers(0, len(BACKGROUND_WORDS), n)
    second = (first + 1 + rng.integers(0, len(BACKGROUND_WORDS) - 1, n)) % len(
        BACKGROUND_WORDS
    )
    senti = rng.random(n) < scenario.background_sentiment_p
    senti_idx = rng.integers(0, len(BACKGROUND_SENTIMENT), n)
    followers = rng.lognormal(math.log(120.0), 1.0, n).astype(np.int64)
    verified = rng.random(n) < 0.02
    has_geo = rng.random(n) < 0.15
    out: list[TweetRecord] = []
    for i in range(n):
        parts = [BACKGROUND_WORDS[first[i]], "the", BACKGROUND_WORDS[second[i]]]
        if senti[i]:
            parts.append(BACKGROUND_SENTIMENT[senti_idx[i]])
        lat = lon = None
        if has_geo[i]:
            lat, lon = _coords(rng, False, scenario)
        out.append(TweetRecord(
            timestamp=int(ts[i]), text=" ".join(parts),
            author_id=f"bg{i}", followers=int(followers[i]),
            verified=bool(verified[i]), latitude=lat, longitude=lon,
        ))
    return out


def _anchor_tweets(
    scenario: SyntheticScenario, rng: np.random.Generator
) -> list[TweetRecord]:
    until = scenario.anchor_until
    if until is None:
        until = scenario.split_ts
    span = max(0.0, until - scenario.start_ts)
    n = int(rng.poisson(scenario.anchor_rate * span))
    ts = scenario.start_ts + rng.uniform(0.0, span, n)
    followers = rng.lognormal(math.log(110.0), 0.9, n).astype(np.int64)
    out: list[TweetRecord] = []
    for i in range(n):
        out.append(TweetRecord(
            timestamp=int(ts[i]), text=f"the {ANCHOR_WORD}",
            author_id=f"ch{i}", followers=int(followers[i]),
            verified=bool(rng.random() < 0.015),
        ))
    return out


def _event_tweets(
    event: PlantedEvent, tag: str, scenario: SyntheticScenario,
    rng: np.random.Generator,
) -> list[TweetRecord]:
    n = event.n_tweets
    ts = event.time + rng.uniform(0.0, event.duration, n)
    followers = rng.lognormal(
        event.followers_log_mean, event.followers_log_sigma, n
    ).astype(np.int64)
    out: list[TweetRecord] = []
    for i in range(n):
        pair = rng.choice(len(event.words), size=2, replace=False)
        parts = [event.words[pair[0]], "the", event.words[pair[1]]]
        if rng.random() < event.sentiment_p:
            parts.append(str(rng.choice(event.sentiment_words)))
        lat = lon = None
        if rng.random() < event.geo_p:
            lat, lon = _coords(rng, event.geo_near_market, scenario)
        out.append(TweetRecord(
            timestamp=int(ts[i]), text=" ".join(parts),
            author_id=f"{tag}u{i}", followers=int(followers[i]),
            verified=bool(rng.random() < event.verified_p),
            latitude=lat, longitude=lon,
        ))
    return out


def generate_synthetic(
    out_dir: str | Path, scenario: SyntheticScenario | None = None
) -> dict:
    """Write tweets.jsonl, market.csv, calendar.json, truth.json, config.ini.

    Returns a small summary dict with the paths and counts. The same
    scenario (and seed) always produces byte-identical files.
    """
    scenario = scenario if scenario is not None else standard_scenario()
    if not scenario.events:
        stock = standard_scenario(scenario.seed)
        scenario = replace(scenario, events=stock.events,
                           spurious_spikes=stock.spurious_spikes)
    _check_vocabulary(scenario)
    for ev in scenario.events:
        if not scenario.start_ts <= ev.time < scenario.end_ts:
            raise ValueError(f"event at {ev.time} outside the generated span")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    calendar = _scenario_calendar(scenario)
    windows, event_spikes = _spike_windows(scenario, calendar)
    bars = _market_bars(scenario, calendar, windows)

    seeds = np.random.SeedSequence(scenario.seed).spawn(2 + len(scenario.events))
    tweets = _background_tweets(scenario, np.random.default_rng(seeds[0]))
    tweets += _anchor_tweets(scenario, np.random.default_rng(seeds[1]))
    for idx, ev in enumerate(scenario.events):
        tweets += _event_tweets(ev, f"e{idx}", scenario,
                                np.random.default_rng(seeds[2 + idx]))
    tweets.sort(key=lambda r: r.timestamp)

    write_tweet_stream(tweets, out / "tweets.jsonl")
    write_market_csv(bars, out / "market.csv")
    save_calendar(out / "calendar.json", calendar)
    truth = {
        "seed": scenario.seed,
        "start_ts": scenario.start_ts,
        "end_ts": scenario.end_ts,
        "split_ts": scenario.split_ts,
        "bar_step": scenario.bar_step,
        "sigma0": scenario.sigma0,
        "spike_factor": scenario.spike_factor,
        "market_lat": scenario.market_lat,
        "market_lon": scenario.market_lon,
        "anchor_word": ANCHOR_WORD,
        "hot_words": list(HOT_WORDS),
        "mild_words": list(MILD_WORDS),
        "events": [
            {
                "time": ev.time,
                "impact": ev.impact,
                "words": list(ev.words),
                "n_tweets": ev.n_tweets,
                "t_prime": calendar.next_open_time(ev.time),
                "spike_start": event_spikes[i],
            }
            for i, ev in enumerate(scenario.events)
        ],
        "spurious_spikes": [
            {"start": s, "bars": b} for s, b in windows[sum(e.impact for e in scenario.events):]
        ],
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=2) + "\n", "utf-8")
    write_config(out / "config.ini", PipelineConfig(
        market_lat=scenario.market_lat, market_lon=scenario.market_lon,
        seed=scenario.seed,
    ))
    return {
        "out_dir": str(out),
        "n_tweets": len(tweets),
        "n_bars": len(bars),
        "n_events": len(scenario.events),
        "paths": {
            "tweets": str(out / "tweets.jsonl"),
            "market": str(out / "market.csv"),
            "calendar": str(out / "calendar.json"),
            "truth": str(out / "truth.json"),
            "config": str(out / "config.ini"),
        },
    }
