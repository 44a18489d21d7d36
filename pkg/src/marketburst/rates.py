"""Per-word arrival-rate tracking, burst detection, and word clustering.

Each word's arrivals are modeled as an inhomogeneous Poisson process
whose rate is estimated by a truncated Gaussian kernel sum over arrival
timestamps. A word turns bursty when both its rate and the rate's slope
exceed global thresholds; it turns normal again on rate alone, so a
word that keeps a high rate stays bursty even once its growth stalls.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

# kernel support in bandwidths; truncation error per arrival < 3.2e-5 of peak
KERNEL_SUPPORT = 4.0


class CalibrationError(RuntimeError):
    """Raised when thresholds cannot be derived from the training data."""


class BurstTransition(enum.Enum):
    ENTERED = "entered_burst"
    EXITED = "exited_burst"
    UNCHANGED = "unchanged"


@dataclass(frozen=True)
class BurstThresholds:
    """Global rate (events/s) and slope (events/s^2) burst thresholds."""

    t_r: float
    t_s: float

    def __post_init__(self) -> None:
        if self.t_r <= 0 or self.t_s <= 0:
            raise ValueError(f"thresholds must be positive: {self}")


class WordRateTrack:
    """Arrival buffer plus kernel rate/slope evaluation for one word.

    Arrivals must be appended in non-decreasing time order. The buffer
    keeps everything by default; call :meth:`prune_before` from a
    streaming loop to drop arrivals that can no longer influence any
    future query (older than the latest query time minus 4 bandwidths).
    """

    __slots__ = ("word", "bandwidth", "_buf", "_n", "_start", "bursty",
                 "burst_entry_time", "_last_state_time")

    def __init__(self, word: str, bandwidth: float = 600.0):
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        self.word = word
        self.bandwidth = float(bandwidth)
        self._buf = np.empty(16, dtype=np.float64)
        self._n = 0
        self._start = 0
        self.bursty = False
        self.burst_entry_time: float | None = None
        self._last_state_time: float | None = None

    def __repr__(self) -> str:
        return (f"WordRateTrack({self.word!r}, n={self.count}, "
                f"bursty={self.bursty})")

    @property
    def count(self) -> int:
        return self._n - self._start

    @property
    def arrivals(self) -> np.ndarray:
        return self._buf[self._start:self._n]

    def add_arrival(self, t: float) -> None:
        if self._n and t < self._buf[self._n - 1]:
            raise ValueError(
                f"arrivals must be time-ordered: {t} < {self._buf[self._n - 1]}"
            )
        if self._n == len(self._buf):
            self._compact_or_grow()
        self._buf[self._n] = t
        self._n += 1

    def add_arrivals(self, times: Iterable[float]) -> None:
        for t in times:
            self.add_arrival(t)

    def _compact_or_grow(self) -> None:
        live = self._buf[self._start:self._n]
        if self._start > len(self._buf) // 2:
            self._buf[: len(live)] = live
        else:
            buf = np.empty(max(32, 2 * len(self._buf)), dtype=np.float64)
            buf[: len(live)] = live
            self._buf = buf
        self._n = len(live)
        self._start = 0

    def prune_before(self, query_time: float) -> None:
        """Drop arrivals older than ``query_time - 4 * bandwidth``."""
        horizon = query_time - KERNEL_SUPPORT * self.bandwidth
        self._start += int(
            np.searchsorted(self._buf[self._start:self._n], horizon, side="left")
        )

    def _window(self, t: float) -> np.ndarray:
        radius = KERNEL_SUPPORT * self.bandwidth
        live = self._buf[self._start:self._n]
        lo = np.searchsorted(live, t - radius, side="left")
        hi = np.searchsorted(live, t + radius, side="right")
        return live[lo:hi]

    def rate_at(self, t: float) -> float:
        """Kernel-sum arrival rate (events/second) at time ``t``."""
        return self.rate_and_slope_at(t)[0]

    def slope_at(self, t: float) -> float:
        """Analytic time derivative of :meth:`rate_at` (events/second^2)."""
        return self.rate_and_slope_at(t)[1]

    def rate_and_slope_at(self, t: float) -> tuple[float, float]:
        arrivals = self._window(t)
        if len(arrivals) == 0:
            return 0.0, 0.0
        d = self.bandwidth
        x = t - arrivals
        g = np.exp(x * x / (-2.0 * d * d)) * (1.0 / (d * math.sqrt(2.0 * math.pi)))
        rate = float(g.sum())
        slope = float((x * g).sum() / (-d * d))
        return rate, slope

    def rate_on_grid(self, grid: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`rate_at` over a sorted sample grid."""
        return self._grid_eval(grid)[0]

    def slope_on_grid(self, grid: np.ndarray) -> np.ndarray:
        return self._grid_eval(grid)[1]

    def _grid_eval(self, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grid = np.asarray(grid, dtype=np.float64)
        live = self._buf[self._start:self._n]
        rate = np.zeros(len(grid))
        slope = np.zeros(len(grid))
        if len(live) == 0 or len(grid) == 0:
            return rate, slope
        d = self.bandwidth
        norm = 1.0 / (d * math.sqrt(2.0 * math.pi))
        # chunk the broadcast to bound memory on long grids
        step = max(1, int(4e6 / max(1, len(live))))
        for i in range(0, len(grid), step):
            x = grid[i:i + step, None] - live[None, :]
            outside = np.abs(x) > KERNEL_SUPPORT * d
            g = np.exp(x * x / (-2.0 * d * d)) * norm
            g[outside] = 0.0
            rate[i:i + step] = g.sum(axis=1)
            slope[i:i + step] = (x * g).sum(axis=1) / (-d * d)
        return rate, slope

    def update_burst_state(
        self, t: float, thresholds: BurstThresholds
    ) -> BurstTransition:
        """Advance the bursty/normal state machine at time ``t``.

        Entry needs rate > t_r and slope > t_s; exit needs rate < t_r
        only. Calls must use non-decreasing times.
        """
        rate, slope = self.rate_and_slope_at(t)
        return self.apply_burst_rule(t, rate, slope, thresholds)

    def apply_burst_rule(
        self, t: float, rate: float, slope: float, thresholds: BurstThresholds
    ) -> BurstTransition:
        """State-machine step with rate/slope already evaluated at ``t``."""
        if self._last_state_time is not None and t < self._last_state_time:
            raise RuntimeError(
                f"burst-state time went backwards for {self.word!r}: "
                f"{t} < {self._last_state_time}"
            )
        self._last_state_time = t
        if not self.bursty:
            if rate > thresholds.t_r and slope > thresholds.t_s:
                self.bursty = True
                self.burst_entry_time = t
                return BurstTransition.ENTERED
        elif rate < thresholds.t_r:
            self.bursty = False
            self.burst_entry_time = None
            return BurstTransition.EXITED
        return BurstTransition.UNCHANGED


def build_tracks(
    arrivals_by_word: Mapping[str, Sequence[float]], bandwidth: float
) -> dict[str, WordRateTrack]:
    """Build batch tracks (no pruning) from per-word arrival times."""
    tracks: dict[str, WordRateTrack] = {}
    for word, times in arrivals_by_word.items():
        track = WordRateTrack(word, bandwidth)
        track.add_arrivals(sorted(times))
        tracks[word] = track
    return tracks


def calibrate_thresholds(
    tracks: Iterable[WordRateTrack], grid: np.ndarray
) -> BurstThresholds:
    """Derive global burst thresholds from training tracks.

    The rate threshold is the maximum over words of the grid-average
    rate; the slope threshold is the maximum grid-average slope, with
    non-positive per-word averages floored at zero so stationary words
    cannot drag the threshold negative.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) == 0:
        raise CalibrationError("empty calibration grid")
    best_rate = 0.0
    best_slope = 0.0
    any_arrivals = False
    for track in tracks:
        if track.count == 0:
            continue
        any_arrivals = True
        rate, slope = track._grid_eval(grid)
        best_rate = max(best_rate, float(rate.mean()))
        best_slope = max(best_slope, max(0.0, float(slope.mean())))
    if not any_arrivals:
        raise CalibrationError("no arrivals in any training track")
    if best_rate <= 0.0:
        raise CalibrationError("calibration grid sees no kernel mass")
    if best_slope <= 0.0:
        raise CalibrationError(
            "no word shows a positive average slope on the calibration grid"
        )
    return BurstThresholds(t_r=best_rate, t_s=best_slope)


def rate_correlation(
    track_a: WordRateTrack, track_b: WordRateTrack, grid: np.ndarray
) -> float:
    """Pearson correlation of two sampled rate series.

    A zero-variance series (flat rate on the grid) correlates as 0 with
    everything: it shares no burst pattern.
    """
    a = track_a.rate_on_grid(grid)
    b = track_b.rate_on_grid(grid)
    return _pearson(a, b)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    na = float(np.sqrt((da * da).sum()))
    nb = float(np.sqrt((db * db).sum()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip((da * db).sum() / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class WordClustering:
    """Partition of tracked words into rate-correlated categories.

    Category indices follow the order of first appearance in ``words``.
    """

    words: tuple[str, ...]
    labels: dict[str, int]
    n_categories: int

    def category_of(self, word: str) -> int | None:
        return self.labels.get(word)

    def category_words(self) -> list[list[str]]:
        groups: list[list[str]] = [[] for _ in range(self.n_categories)]
        for word in self.words:
            groups[self.labels[word]].append(word)
        return groups


def cluster_words(
    tracks: Sequence[WordRateTrack],
    grid: np.ndarray,
    cutoff: float = 0.7,
    method: str = "average",
) -> WordClustering:
    """Group words by agglomerative clustering on 1 - rate correlation.

    The dendrogram is cut at ``cutoff``: merges at distance <= cutoff
    are applied. Linkage defaults to average; single/complete can be
    swapped in via ``method``.
    """
    if not tracks:
        raise ValueError("need at least one track to cluster")
    words = tuple(t.word for t in tracks)
    if len(tracks) == 1:
        return WordClustering(words, {words[0]: 0}, 1)

    series = np.vstack([t.rate_on_grid(grid) for t in tracks])
    n = len(tracks)
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = 1.0 - _pearson(series[i], series[j])
            dist[i, j] = dist[j, i] = max(0.0, d)
    merges = linkage(squareform(dist, checks=False), method=method)
    raw = fcluster(merges, t=cutoff, criterion="distance")

    labels: dict[str, int] = {}
    remap: dict[int, int] = {}
    for word, cluster_id in zip(words, raw):
        if cluster_id not in remap:
            remap[cluster_id] = len(remap)
        labels[word] = remap[cluster_id]
    return WordClustering(words, labels, len(remap))


def save_burst_model(
    path: str | Path,
    thresholds: BurstThresholds,
    bandwidth: float,
    clustering: WordClustering,
) -> None:
    """Write the calibrated thresholds and clustering sidecar JSON."""
    payload = {
        "t_r": thresholds.t_r,
        "t_s": thresholds.t_s,
        "delta_s": bandwidth,
        "categories": clustering.category_words(),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", "utf-8")


def load_burst_model(
    path: str | Path,
) -> tuple[BurstThresholds, float, WordClustering]:
    payload = json.loads(Path(path).read_text("utf-8"))
    categories: list[list[str]] = payload["categories"]
    words: list[str] = []
    labels: dict[str, int] = {}
    for idx, group in enumerate(categories):
        for word in group:
            labels[word] = idx
            words.append(word)
    clustering = WordClustering(tuple(words), labels, len(categories))
    thresholds = BurstThresholds(payload["t_r"], payload["t_s"])
    return thresholds, float(payload["delta_s"]), clustering
