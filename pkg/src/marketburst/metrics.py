"""Evaluation of predicted vs market-derived event label streams.

Two aligned binary streams are compared: C (did the market jitter near
the event's mapped open time) and L (did the classifier flag the
event). Market jitters that no detected event covered are inserted as
(C=1, L=0) misses so recall reflects undetected movements. Beyond
precision/recall/F1 and ROC/AUC, the streams are modeled as low-order
Markov chains to estimate entropy rates and their mutual information
rate in bits per symbol.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .market import LabelSets

MATCHED = "matched-event"
INSERTED = "inserted-miss"


@dataclass(frozen=True)
class StreamEntry:
    t: float
    c: int
    l: int
    provenance: str = MATCHED
    decision: float = math.nan

    def __post_init__(self) -> None:
        if self.c not in (0, 1) or self.l not in (0, 1):
            raise ValueError("stream values must be binary")
        if self.provenance not in (MATCHED, INSERTED):
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class LabelStreamPair:
    """Time-ordered (C, L) entries with per-entry provenance."""

    entries: tuple[StreamEntry, ...]

    def __post_init__(self) -> None:
        times = [e.t for e in self.entries]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("stream entries must be time-ordered")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def c(self) -> np.ndarray:
        return np.array([e.c for e in self.entries], dtype=np.int64)

    @property
    def l(self) -> np.ndarray:
        return np.array([e.l for e in self.entries], dtype=np.int64)

    @property
    def inserted_count(self) -> int:
        return sum(e.provenance == INSERTED for e in self.entries)


def build_streams(
    predicted: Sequence[tuple[float, float, int]],
    true_labels: Sequence[tuple[float, float, int]],
    sets: LabelSets,
    *,
    t_time: float = 3600.0,
    decisions: Sequence[float] | None = None,
    span: tuple[float, float] | None = None,
) -> LabelStreamPair:
    """Align per-event predictions with truth and insert missed jitters.

    ``predicted`` and ``true_labels`` carry (event_start, t_prime,
    value) triples over the same events; discarded events must already
    be gone. Every true-set slot (optionally restricted to ``span``)
    with no event open-time within ``t_time`` becomes an inserted
    (C=1, L=0) entry whose decision value is -inf.
    """
    pred_keys = [(ts, tp) for ts, tp, _ in predicted]
    true_keys = [(ts, tp) for ts, tp, _ in true_labels]
    if pred_keys != true_keys:
        raise ValueError("predicted and true sequences disagree on events")
    if len(set(pred_keys)) != len(pred_keys):
        raise ValueError("duplicate (event_start, t_prime) pairs; dedupe first")
    if decisions is not None and len(decisions) != len(predicted):
        raise ValueError("decision values must align with predictions")

    entries: list[StreamEntry] = []
    for i, ((_, t_prime, l_val), (_, _, c_val)) in enumerate(
        zip(predicted, true_labels)
    ):
        if c_val == -1 or l_val == -1:
            raise ValueError("discarded (-1) entries must be removed upstream")
        dec = float(decisions[i]) if decisions is not None else math.nan
        entries.append(StreamEntry(t_prime, int(c_val), int(l_val),
                                   MATCHED, dec))

    open_times = np.array(sorted(tp for _, tp in pred_keys))
    for slot in np.asarray(sets.t_true, dtype=np.float64):
        if span is not None and not (span[0] <= slot <= span[1]):
            continue
        covered = False
        if len(open_times):
            i = int(np.searchsorted(open_times, slot))
            for j in (i - 1, i):
                if 0 <= j < len(open_times) and abs(open_times[j] - slot) < t_time:
                    covered = True
                    break
        if not covered:
            entries.append(StreamEntry(float(slot), 1, 0, INSERTED, -math.inf))
    entries.sort(key=lambda e: e.t)
    return LabelStreamPair(tuple(entries))


@dataclass(frozen=True)
class Prf1:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    degenerate: bool = False


def prf1(pair: LabelStreamPair) -> Prf1:
    """Precision/recall/F1 of L against C; zero divisions yield 0."""
    return prf1_from_counts(
        tp=int(np.sum((pair.c == 1) & (pair.l == 1))),
        fp=int(np.sum((pair.c == 0) & (pair.l == 1))),
        fn=int(np.sum((pair.c == 1) & (pair.l == 0))),
    )


def prf1_from_counts(tp: int, fp: int, fn: int) -> Prf1:
    degenerate = (tp + fp == 0) or (tp + fn == 0) or tp == 0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return Prf1(precision, recall, f1, tp, fp, fn, degenerate)


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


def roc_curve(
    decisions: Sequence[float], labels: Sequence[int]
) -> list[RocPoint]:
    """Threshold sweep over the distinct decision values.

    A sample is predicted positive when its decision value is >= the
    threshold. Points come out sorted by (FPR, TPR) and always include
    (0, 0) and (1, 1).
    """
    dec = np.asarray(decisions, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.int64)
    if len(dec) != len(lab) or len(dec) == 0:
        raise ValueError("need aligned, non-empty decisions and labels")
    pos = int((lab == 1).sum())
    neg = int((lab == 0).sum())
    if pos == 0 or neg == 0:
        raise ValueError("ROC needs both classes present")
    points = [RocPoint(0.0, 0.0, math.inf)]
    for theta in sorted(set(dec.tolist()), reverse=True):
        predicted = dec >= theta
        tpr = float((predicted & (lab == 1)).sum()) / pos
        fpr = float((predicted & (lab == 0)).sum()) / neg
        points.append(RocPoint(fpr, tpr, float(theta)))
    if points[-1].fpr != 1.0 or points[-1].tpr != 1.0:
        points.append(RocPoint(1.0, 1.0, -math.inf))
    points.sort(key=lambda p: (p.fpr, p.tpr))
    return points


def auc(points: Sequence[RocPoint]) -> float:
    """Trapezoidal area under a sorted ROC point list."""
    area = 0.0
    for a, b in zip(points, points[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return area


@dataclass(frozen=True)
class MarkovChainModel:
    """Empirical Markov chain over fixed-length state tuples.

    ``pi`` holds the empirical occupancy of each state across the whole
    stream; ``transitions`` rows are conditional next-state
    distributions. States never observed leaving get a uniform
    (add-half smoothed) row so entropies stay finite.
    """

    states: tuple[tuple[int, ...], ...]
    pi: np.ndarray
    transitions: np.ndarray
    order: int

    def __post_init__(self) -> None:
        rows = self.transitions.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("transition rows must sum to 1")
        if abs(float(self.pi.sum()) - 1.0) > 1e-12:
            raise ValueError("state occupancy must sum to 1")


def fit_markov(
    stream: Sequence[int], order: int = 1, alphabet: int = 2
) -> MarkovChainModel:
    """Maximum-likelihood chain over length-``order`` symbol windows.

    Only states with zero outgoing transitions are smoothed (add-half,
    which collapses to a uniform row); observed rows stay exact.
    """
    sym = np.asarray(stream, dtype=np.int64)
    if len(sym) < order + 1:
        raise ValueError(f"stream too short for order {order}")
    if np.any(sym < 0) or np.any(sym >= alphabet):
        raise ValueError("symbols outside the alphabet")
    states = tuple(itertools.product(range(alphabet), repeat=order))
    index = {s: i for i, s in enumerate(states)}
    m = len(states)
    grams = [index[tuple(sym[i : i + order])] for i in range(len(sym) - order + 1)]
    counts = np.zeros((m, m))
    for a, b in zip(grams, grams[1:]):
        counts[a, b] += 1.0
    occupancy = np.bincount(grams, minlength=m).astype(np.float64)
    pi = occupancy / occupancy.sum()
    transitions = np.zeros((m, m))
    for i in range(m):
        row = counts[i]
        total = row.sum()
        if total == 0:
            transitions[i] = (row + 0.5) / (0.5 * m)
        else:
            transitions[i] = row / total
    return MarkovChainModel(states, pi, transitions, order)


def entropy_rate(model: MarkovChainModel) -> float:
    """Bits per symbol: -sum_i pi_i sum_j p(j|i) log2 p(j|i)."""
    p = model.transitions
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return float(-(model.pi[:, None] * p * logs).sum())


def mir(pair: LabelStreamPair, order: int = 1) -> float:
    """Mutual information rate between the C and L streams.

    H(C) + H(L) - H(C, L) with each stream (and the joint pair stream
    over a 4-letter alphabet) modeled as an order-``order`` chain;
    tiny negative results from estimation noise are clamped to 0.
    """
    if len(pair) < order + 1:
        raise ValueError("stream pair too short for the chain order")
    c = pair.c
    l = pair.l
    h_c = entropy_rate(fit_markov(c, order))
    h_l = entropy_rate(fit_markov(l, order))
    h_joint = entropy_rate(fit_markov(2 * c + l, order, alphabet=4))
    value = h_c + h_l - h_joint
    if -1e-9 < value < 0.0:
        return 0.0
    return value


@dataclass(frozen=True)
class MetricsReport:
    """The per-multiplier evaluation summary written to disk."""

    multiplier: float
    precision: float
    recall: float
    f1: float
    auc: float
    mir_bits: float
    stream_length: int
    inserted_misses: int
    detector: str | None = None

    def to_dict(self) -> dict:
        obj = {
            "multiplier": self.multiplier,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "mir_bits": self.mir_bits,
            "stream_length": self.stream_length,
            "inserted_misses": self.inserted_misses,
        }
        if self.detector is not None:
            obj["detector"] = self.detector
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricsReport":
        return cls(
            multiplier=float(obj["multiplier"]),
            precision=float(obj["precision"]),
            recall=float(obj["recall"]),
            f1=float(obj["f1"]),
            auc=float(obj["auc"]),
            mir_bits=float(obj["mir_bits"]),
            stream_length=int(obj["stream_length"]),
            inserted_misses=int(obj["inserted_misses"]),
            detector=obj.get("detector"),
        )


def evaluate_pair(
    pair: LabelStreamPair,
    multiplier: float,
    detector: str | None = None,
    *,
    order: int = 1,
) -> tuple[MetricsReport, list[RocPoint]]:
    """Full metric set for one aligned stream pair.

    The ROC is computed from per-entry decision values when both
    classes are present and every matched entry carries one; otherwise
    the AUC is reported as 0.5 (uninformative).
    """
    scores = prf1(pair)
    decisions = np.array([e.decision for e in pair.entries])
    c = pair.c
    points: list[RocPoint] = []
    if (not np.any(np.isnan(decisions)) and len(np.unique(c)) == 2):
        points = roc_curve(decisions, c)
        area = auc(points)
    else:
        area = 0.5
    mir_bits = mir(pair, order) if len(pair) > order else 0.0
    report = MetricsReport(
        multiplier=multiplier,
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        auc=area,
        mir_bits=mir_bits,
        stream_length=len(pair),
        inserted_misses=pair.inserted_count,
        detector=detector,
    )
    return report, points


def write_report(path: str | Path, report: MetricsReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", "utf-8")


def read_report(path: str | Path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text("utf-8")))


def write_roc_csv(path: str | Path, points: Iterable[RocPoint]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for p in points:
            fh.write(f"{p.fpr!r},{p.tpr!r},{p.threshold!r}\n")


def read_roc_csv(path: str | Path) -> list[RocPoint]:
    points: list[RocPoint] = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "fpr,tpr,threshold":
            raise ValueError(f"unexpected ROC header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            fpr, tpr, theta = line.split(",")
            points.append(RocPoint(float(fpr), float(tpr), float(theta)))
    return points
