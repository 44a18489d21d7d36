"""Sentiment-threshold baseline detector and generic window labeling."""

import numpy as np
import pytest

from marketburst.baseline import (SentimentEvent, SentimentSeries,
                                  baseline_labeled_events, sentiment_detect,
                                  sentiment_series, window_label,
                                  windowed_ssi)
from marketburst.events import TokenizedTweet
from marketburst.market import LabelSets, MarketCalendar

MON = 1_433_116_800  # 2015-06-01 00:00 UTC, a Monday
DAY = 86_400
HOUR = 3_600


def weekday_calendar():
    return MarketCalendar.from_dict({
        "weekly": {d: [["09:00", "17:00"]]
                   for d in ("mon", "tue", "wed", "thu", "fri")},
    })


def tweet(ts, ssi, followers=0):
    return TokenizedTweet(ts=float(ts), tokens=frozenset(), ssi=float(ssi),
                          followers=int(followers), verified=False,
                          lat=None, lon=None)


def series(values, step=300.0, t0=0.0):
    vals = np.asarray(values, dtype=float)
    ts = t0 + step * np.arange(len(vals))
    return SentimentSeries(ts, vals, step)


def sets_of(true=(), neutral=(), false=()):
    return LabelSets(np.asarray(true, float), np.asarray(false, float),
                     np.asarray(neutral, float), 2.0, 1.0)


class TestWindowedSsi:
    def test_empty(self):
        assert windowed_ssi(np.array([]), np.array([])) == 0.0

    def test_follower_weighting(self):
        got = windowed_ssi(np.array([2.0, -4.0]), np.array([1.0, 3.0]))
        assert got == pytest.approx(2.5)

    def test_zero_followers_fall_back_to_plain_mean(self):
        got = windowed_ssi(np.array([2.0, -4.0]), np.array([0.0, 0.0]))
        assert got == pytest.approx(1.0)

    def test_magnitude_only(self):
        pos = windowed_ssi(np.array([3.0, 1.0]), np.array([1.0, 1.0]))
        neg = windowed_ssi(np.array([-3.0, -1.0]), np.array([1.0, 1.0]))
        assert pos == neg == pytest.approx(2.0)


class TestSentimentSeries:
    def test_grid_spans_rounded_tweet_times(self):
        got = sentiment_series([tweet(250, 1.0), tweet(1000, 2.0)],
                               window=600.0, step=300.0)
        assert got.timestamps.tolist() == [300.0, 600.0, 900.0, 1200.0]
        assert got.step == 300.0

    def test_window_is_left_open_right_closed(self):
        tweets = [tweet(0, 5.0), tweet(300, 3.0)]
        got = sentiment_series(tweets, window=300.0, step=300.0)
        assert got.timestamps.tolist() == [0.0, 300.0]
        assert got.values[0] == pytest.approx(5.0)   # tweet at t included
        # at t=300 the window (0, 300] drops the tweet at exactly t-window
        assert got.values[1] == pytest.approx(3.0)

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(0)
        times = np.sort(rng.uniform(0, 20_000, 120))
        tweets = [tweet(t, rng.normal(), int(rng.integers(0, 50)))
                  for t in times]
        window, step = 1_800.0, 450.0
        got = sentiment_series(tweets, window=window, step=step)
        for t, value in zip(got.timestamps, got.values):
            inside = [tw for tw in tweets if t - window < tw.ts <= t]
            want = windowed_ssi(np.array([tw.ssi for tw in inside]),
                                np.array([float(tw.followers)
                                          for tw in inside]))
            assert value == pytest.approx(want, abs=1e-12)

    def test_empty_input_gives_empty_series(self):
        got = sentiment_series([], window=600.0, step=300.0)
        assert len(got.timestamps) == 0 and got.step == 300.0

    def test_validation(self):
        with pytest.raises(ValueError, match="positive"):
            sentiment_series([tweet(0, 1.0)], window=0.0)
        with pytest.raises(ValueError, match="positive"):
            sentiment_series([tweet(0, 1.0)], step=-1.0)
        with pytest.raises(ValueError, match="time-sorted"):
            sentiment_series([tweet(100, 1.0), tweet(50, 1.0)])

    def test_series_invariants(self):
        with pytest.raises(ValueError, match="align"):
            SentimentSeries(np.array([0.0]), np.array([]), 300.0)
        with pytest.raises(ValueError, match="uniform"):
            SentimentSeries(np.array([0.0, 300.0, 700.0]), np.zeros(3), 300.0)
        with pytest.raises(ValueError, match="negative"):
            SentimentSeries(np.array([0.0]), np.array([-1.0]), 300.0)


def detect_oracle(values, times, factor):
    """Straight-line re-enactment of the open/re-emit/close walk."""
    out = []
    open_updates = None
    total = 0.0
    for i, (t, v) in enumerate(zip(times, values)):
        total += v
        mean = total / (i + 1)
        if open_updates is None:
            if v >= mean:
                open_updates = [(t, v)]
                out.append((t, open_updates))
        elif v < mean:
            open_updates = None
        elif v >= factor * open_updates[-1][1]:
            open_updates.append((t, v))
    return out


class TestSentimentDetect:
    def test_hand_traced_runs(self):
        s = series([1.0, 2.0, 1.0, 0.0, 5.0, 6.0, 0.0])
        events = sentiment_detect(s, update_factor=1.1)
        assert len(events) == 2
        first, second = events
        assert first.start_ts == 0.0
        assert first.updates == [(0.0, 1.0), (300.0, 2.0)]
        assert second.start_ts == 1200.0
        assert second.updates == [(1200.0, 5.0), (1500.0, 6.0)]
        assert second.last_value == 6.0

    def test_small_gains_do_not_re_emit(self):
        s = series([1.0, 1.05, 1.08])
        events = sentiment_detect(s, update_factor=1.5)
        assert len(events) == 1
        assert events[0].updates == [(0.0, 1.0)]

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError, match="empty sentiment series"):
            sentiment_detect(series([]))

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(30):
            n = int(rng.integers(3, 80))
            vals = np.abs(rng.normal(1.0, 1.0, n))
            factor = float(rng.uniform(1.05, 2.0))
            s = series(vals)
            got = [(e.start_ts, e.updates) for e in sentiment_detect(s, factor)]
            want = detect_oracle(s.values, s.timestamps, factor)
            assert got == want


class TestWindowLabel:
    def test_ends_inclusive(self):
        sets = sets_of(true=[1000.0])
        assert window_label(1000.0, 500.0, sets) == 1      # slot at start
        assert window_label(500.0, 500.0, sets) == 1       # slot at end
        assert window_label(1000.1, 500.0, sets) == 0
        assert window_label(400.0, 599.9, sets) == 0

    def test_precedence_true_over_neutral(self):
        sets = sets_of(true=[1200.0], neutral=[1100.0])
        assert window_label(1000.0, 400.0, sets) == 1
        assert window_label(1000.0, 150.0, sets) == -1
        assert window_label(0.0, 50.0, sets) == 0

    def test_growing_window_keeps_true(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            sets = sets_of(true=np.sort(rng.uniform(0, 10_000, 3)),
                           neutral=np.sort(rng.uniform(0, 10_000, 3)))
            t_w = float(rng.uniform(0, 10_000))
            length = float(rng.uniform(100, 2_000))
            if window_label(t_w, length, sets) == 1:
                assert window_label(t_w, length * 2, sets) == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            true = np.sort(rng.uniform(0, 5_000, rng.integers(0, 4)))
            neutral = np.sort(rng.uniform(0, 5_000, rng.integers(0, 4)))
            sets = sets_of(true=true, neutral=neutral)
            t_w = float(rng.uniform(-500, 5_500))
            length = float(rng.uniform(10, 1_500))
            if any(t_w <= s <= t_w + length for s in true):
                want = 1
            elif any(t_w <= s <= t_w + length for s in neutral):
                want = -1
            else:
                want = 0
            assert window_label(t_w, length, sets) == want


class TestBaselineLabeling:
    def test_latest_emission_wins_per_open(self):
        cal = weekday_calendar()
        thursday_night = MON + 3 * DAY + 20 * HOUR
        event = SentimentEvent(start_ts=thursday_night)
        event.updates = [(thursday_night, 3.0),
                         (thursday_night + 2 * HOUR, 2.0)]
        friday_open = MON + 4 * DAY + 9 * HOUR
        out = baseline_labeled_events([event], cal,
                                      sets_of(true=[friday_open]))
        assert len(out) == 1
        assert out[0].t_prime == friday_open
        assert out[0].features.tolist() == [2.0]           # later, not larger
        assert out[0].label == 1

    def test_strongest_event_wins_across_events(self):
        cal = weekday_calendar()
        thursday_night = MON + 3 * DAY + 20 * HOUR
        weak = SentimentEvent(start_ts=thursday_night)
        weak.updates = [(thursday_night, 2.0)]
        strong = SentimentEvent(start_ts=thursday_night + HOUR)
        strong.updates = [(thursday_night + HOUR, 7.0)]
        out = baseline_labeled_events([weak, strong], cal, sets_of())
        assert len(out) == 1
        assert out[0].event_start_ts == strong.start_ts
        assert out[0].features.tolist() == [7.0]

    def test_max_shift_drops_distant_opens(self):
        cal = weekday_calendar()
        friday_night = MON + 4 * DAY + 20 * HOUR           # open is 2.5 days out
        event = SentimentEvent(start_ts=friday_night)
        event.updates = [(friday_night, 3.0)]
        assert baseline_labeled_events([event], cal, sets_of(),
                                       max_shift=DAY) == []
        kept = baseline_labeled_events([event], cal, sets_of(),
                                       max_shift=3 * DAY)
        assert len(kept) == 1

    def test_in_session_maps_to_itself(self):
        cal = weekday_calendar()
        during = MON + 11 * HOUR
        event = SentimentEvent(start_ts=during)
        event.updates = [(during, 4.0)]
        out = baseline_labeled_events([event], cal, sets_of())
        assert out[0].t_prime == during

    def test_output_sorted(self):
        cal = weekday_calendar()
        times = [MON + 14 * HOUR, MON + 10 * HOUR, MON + DAY + 10 * HOUR]
        events = []
        for t in times:
            ev = SentimentEvent(start_ts=t)
            ev.updates = [(t, 1.0)]
            events.append(ev)
        out = baseline_labeled_events(events, cal, sets_of())
        primes = [ev.t_prime for ev in out]
        assert primes == sorted(primes)
