"""Independent reference implementations the tests compare against.

Everything here is written the slow, obvious way: direct formulas,
exhaustive scans, brute-force merges. None of it shares code with the
package internals it cross-checks.
"""

from __future__ import annotations

import math

import numpy as np

from marketburst.rates import BurstThresholds, WordRateTrack, cluster_words

KERNEL_RADIUS = 4.0


def kernel_rate_slope(arrivals, t, bandwidth):
    """Truncated-gaussian rate and derivative, summed term by term."""
    rate = 0.0
    slope = 0.0
    norm = 1.0 / (bandwidth * math.sqrt(2.0 * math.pi))
    for ti in arrivals:
        x = t - ti
        if abs(x) > KERNEL_RADIUS * bandwidth:
            continue
        g = norm * math.exp(-(x * x) / (2.0 * bandwidth * bandwidth))
        rate += g
        slope += -x * g / (bandwidth * bandwidth)
    return rate, slope


def slope_fd_errors(n_fixtures, seed):
    """Relative error of the analytic slope against central differences.

    Each fixture is a random track and query point with all arrivals
    well inside the kernel support, so the finite difference never
    straddles the truncation boundary. The error is measured against
    the local magnitude with a floor at a characteristic slope scale
    (n / bw^2): the slope crosses zero at every rate peak, where a
    plain relative error would just divide finite-difference noise by
    itself.
    """
    rng = np.random.default_rng(seed)
    errors = np.empty(n_fixtures)
    for i in range(n_fixtures):
        bw = rng.uniform(60.0, 1200.0)
        t = rng.uniform(0.0, 1e6)
        n = int(rng.integers(1, 50))
        arrivals = np.sort(t + rng.uniform(-3.5 * bw, 3.5 * bw, n))
        track = WordRateTrack("w", bw)
        track.add_arrivals(arrivals)
        h = 1e-5 * bw
        fd = (track.rate_at(t + h) - track.rate_at(t - h)) / (2.0 * h)
        analytic = track.slope_at(t)
        scale = max(abs(fd), abs(analytic), 1e-4 * n / (bw * bw))
        errors[i] = abs(fd - analytic) / scale
    return errors


def kernel_mass_errors(n_fixtures, seed):
    """Relative error of the integrated rate against the arrival count."""
    rng = np.random.default_rng(seed)
    errors = np.empty(n_fixtures)
    for i in range(n_fixtures):
        bw = rng.uniform(100.0, 900.0)
        n = int(rng.integers(1, 40))
        arrivals = np.sort(rng.uniform(0.0, 20.0 * bw, n))
        track = WordRateTrack("w", bw)
        track.add_arrivals(arrivals)
        grid = np.arange(arrivals[0] - KERNEL_RADIUS * bw,
                         arrivals[-1] + KERNEL_RADIUS * bw + bw / 50.0,
                         bw / 50.0)
        mass = float(np.trapezoid(track.rate_on_grid(grid), grid))
        errors[i] = abs(mass - n) / n
    return errors


def burst_step(bursty, rate, slope, t_r, t_s):
    """Reference burst-state update: one transliterated rule."""
    if not bursty:
        return rate > t_r and slope > t_s
    return rate >= t_r


def burst_suite_violations(n_cases, seed):
    """Random (rate, slope) walks through the state machine vs the rule.

    Returns (violations, cases). A violation is any disagreement with
    the reference step, an entry without both thresholds exceeded, an
    exit with the rate still at/above threshold, or a slope-triggered
    exit.
    """
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_cases):
        t_r = float(rng.uniform(0.5, 2.0))
        t_s = float(rng.uniform(0.1, 1.0))
        thresholds = BurstThresholds(t_r, t_s)
        track = WordRateTrack("w", 600.0)
        expected = False
        for step in range(int(rng.integers(3, 12))):
            # mix boundary-exact values in so ties exercise strictness
            rate = float(rng.choice([t_r, rng.uniform(0.0, 3.0 * t_r)]))
            slope = float(rng.choice([t_s, rng.uniform(-2.0 * t_s, 3.0 * t_s)]))
            was = track.bursty
            track.apply_burst_rule(float(step), rate, slope, thresholds)
            expected = burst_step(expected, rate, slope, t_r, t_s)
            if track.bursty != expected:
                violations += 1
            if not was and track.bursty and not (rate > t_r and slope > t_s):
                violations += 1
            if was and not track.bursty and rate >= t_r:
                violations += 1
    return violations, n_cases


def linkage_partition(dist, cutoff, method):
    """Brute-force agglomerative clustering cut at ``cutoff``.

    Greedy nearest-pair merging with freshly recomputed linkage
    distances over the original matrix; returns the partition as a set
    of frozen index sets.
    """
    clusters = [[i] for i in range(len(dist))]

    def link(a, b):
        vals = [dist[i][j] for i in a for j in b]
        if method == "single":
            return min(vals)
        if method == "complete":
            return max(vals)
        return sum(vals) / len(vals)

    while len(clusters) > 1:
        best = None
        for p in range(len(clusters)):
            for q in range(p + 1, len(clusters)):
                d = link(clusters[p], clusters[q])
                if best is None or d < best[0]:
                    best = (d, p, q)
        if best[0] > cutoff:
            break
        _, p, q = best
        clusters[p] = clusters[p] + clusters[q]
        del clusters[q]
    return {frozenset(c) for c in clusters}


def clustering_disagreements(n_fixtures, seed, cutoffs=(0.3, 0.7, 1.2)):
    """Compare cluster_words partitions with the brute-force merger.

    Fixtures are random small vocabularies (2 to 10 words) whose
    arrival bursts overlap to varying degrees. Returns (mismatches,
    fixtures compared).
    """
    rng = np.random.default_rng(seed)
    checked = 0
    mismatches = 0
    for _ in range(n_fixtures):
        bw = 300.0
        span = 40_000.0
        n_words = int(rng.integers(2, 11))
        n_centers = int(rng.integers(1, 4))
        centers = rng.uniform(0.1 * span, 0.9 * span, n_centers)
        tracks = []
        for w in range(n_words):
            c = centers[int(rng.integers(0, n_centers))]
            jitter = rng.uniform(0.0, 2.0 * bw)
            n_arr = int(rng.integers(3, 25))
            arr = np.sort(c + jitter + rng.normal(0.0, 2.0 * bw, n_arr))
            track = WordRateTrack(f"w{w}", bw)
            track.add_arrivals(arr)
            tracks.append(track)
        grid = np.linspace(0.0, span, 160)
        series = [t.rate_on_grid(grid) for t in tracks]
        dist = np.zeros((n_words, n_words))
        for i in range(n_words):
            for j in range(i + 1, n_words):
                r = np.corrcoef(series[i], series[j])[0, 1]
                dist[i, j] = dist[j, i] = max(0.0, 1.0 - float(r))
        for method in ("average", "single", "complete"):
            for cutoff in cutoffs:
                got = cluster_words(tracks, grid, cutoff=cutoff, method=method)
                got_partition = {
                    frozenset(int(w[1:]) for w in group)
                    for group in got.category_words()
                }
                want = linkage_partition(dist, cutoff, method)
                checked += 1
                if got_partition != want:
                    mismatches += 1
    return mismatches, checked


def nearest_distance(slots, t):
    return min((abs(float(s) - t) for s in slots), default=math.inf)


def label_by_scan(t_prime, true_slots, neutral_slots, t_time):
    """Reference event label: full scans, true before neutral."""
    if nearest_distance(true_slots, t_prime) < t_time:
        return 1
    if nearest_distance(neutral_slots, t_prime) < t_time:
        return -1
    return 0


def pairwise_auc(decisions, labels):
    """Mann-Whitney AUC: fraction of correctly ordered pos/neg pairs."""
    pos = [d for d, y in zip(decisions, labels) if y == 1]
    neg = [d for d, y in zip(decisions, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))
