"""End-to-end orchestration: calibrate, detect, label, train, classify,
evaluate, and the sentiment-only comparison, all file-to-file.

Every stage reads its inputs from the artifact files of earlier stages
and writes its own, so stages can be re-run independently and a full
run equals the stage-by-stage sequence. All randomness is seeded from
the config; outputs are deterministic functions of the input files.

The time split is leak-proof by construction: the training half of the
stream calibrates thresholds, clusters words, and sets the label
baseline; training events (market time at or before the split) are
labeled against the volatility slots of the training half only, while
evaluation uses the full series with the same frozen thresholds.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .events import (EventDetector, EventVector, read_events, tokenize_tweet,
                     write_events)
from .market import (LabeledEvent, LabelSets, MarketCalendar, assign_label,
                     build_label_sets, compute_volatility, dedupe_same_open,
                     label_events, load_calendar, map_to_market_opens,
                     read_labeled_events, restrict_sets, write_labeled_events)
from .metrics import (LabelStreamPair, build_streams, entropy_rate,
                      evaluate_pair, fit_markov, mir, write_report,
                      write_roc_csv)
from .rates import (build_tracks, calibrate_thresholds, cluster_words,
                    load_burst_model, save_burst_model)
from .records import TweetRecord, parse_tweet_stream, read_market_csv
from .select import CfsSelector, ColumnNormalizer, InfoGainSelector
from .sentiment import default_lexicon, load_lexicon
from .svm import (KernelSpec, ModelBundle, cross_validate, load_model,
                  save_model, train)
from .text import default_stopwords, load_stopwords, tokenize_and_stem
from .baseline import baseline_labeled_events, sentiment_detect, sentiment_series

logger = logging.getLogger(__name__)


def mult_tag(multiplier: float) -> str:
    """Filename-safe multiplier tag: 2.0 -> '2', 2.5 -> '2p5'."""
    return f"{multiplier:g}".replace(".", "p").replace("-", "m")


@dataclass(frozen=True)
class PipelinePaths:
    """All artifact locations under one output directory."""

    out_dir: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    @property
    def burst_model(self) -> Path:
        return self.out_dir / "burst_model.json"

    @property
    def events(self) -> Path:
        return self.out_dir / "events.jsonl"

    def labeled_train(self, m: float) -> Path:
        return self.out_dir / f"labeled_train_mult{mult_tag(m)}.jsonl"

    def labeled_eval(self, m: float) -> Path:
        return self.out_dir / f"labeled_eval_mult{mult_tag(m)}.jsonl"

    def model(self, m: float) -> Path:
        return self.out_dir / f"model_mult{mult_tag(m)}.json"

    def predictions(self, m: float) -> Path:
        return self.out_dir / f"predictions_mult{mult_tag(m)}.jsonl"

    def metrics(self, m: float) -> Path:
        return self.out_dir / f"metrics_mult{mult_tag(m)}.json"

    def roc(self, m: float) -> Path:
        return self.out_dir / f"roc_mult{mult_tag(m)}.csv"

    def baseline_metrics(self, m: float) -> Path:
        return self.out_dir / f"baseline_metrics_mult{mult_tag(m)}.json"

    @property
    def summary(self) -> Path:
        return self.out_dir / "summary.json"


def _resolve(base: Path, setting: str) -> Path:
    p = Path(setting)
    return p if p.is_absolute() else base / p


@dataclass
class PipelineInputs:
    """Loaded input files plus the derived train/eval time split."""

    config: PipelineConfig
    records: list[TweetRecord]
    stopwords: frozenset[str]
    lexicon: object
    calendar: MarketCalendar
    t_start: float
    t_end: float
    t_split: float

    @classmethod
    def load(cls, config: PipelineConfig, data_dir: str | Path) -> "PipelineInputs":
        base = Path(data_dir)
        records = parse_tweet_stream(_resolve(base, config.tweets))
        if not records:
            raise ValueError("tweet stream is empty")
        stop = (load_stopwords(_resolve(base, config.stopwords))
                if config.stopwords else default_stopwords())
        lex = (load_lexicon(_resolve(base, config.lexicon))
               if config.lexicon else default_lexicon())
        calendar = load_calendar(_resolve(base, config.calendar))
        t_start = float(records[0].timestamp)
        t_end = float(records[-1].timestamp)
        t_split = t_start + config.training_fraction * (t_end - t_start)
        return cls(config, records, stop, lex, calendar, t_start, t_end, t_split)

    def market_bars(self, data_dir: str | Path):
        return read_market_csv(_resolve(Path(data_dir), self.config.market))


def stage_calibrate(inputs: PipelineInputs, paths: PipelinePaths) -> dict:
    """Thresholds and word categories from the training half of the stream."""
    cfg = inputs.config
    arrivals: dict[str, list[float]] = {}
    for rec in inputs.records:
        if rec.timestamp > inputs.t_split:
            break
        for word in set(tokenize_and_stem(rec.text, inputs.stopwords)):
            arrivals.setdefault(word, []).append(float(rec.timestamp))
    vocab = sorted(w for w, ts in arrivals.items()
                   if len(ts) >= cfg.min_word_count)
    if not vocab:
        raise ValueError(
            f"no word reaches {cfg.min_word_count} training occurrences")
    tracks = build_tracks({w: arrivals[w] for w in vocab}, cfg.bandwidth_s)

    cal_grid = np.arange(inputs.t_start, inputs.t_split, cfg.calibration_grid_s)
    thresholds = calibrate_thresholds(tracks.values(), cal_grid)
    corr_grid = np.arange(inputs.t_start, inputs.t_split, cfg.corr_grid_s)
    clustering = cluster_words([tracks[w] for w in vocab], corr_grid,
                               cutoff=cfg.cluster_cutoff, method=cfg.linkage)
    paths.out_dir.mkdir(parents=True, exist_ok=True)
    save_burst_model(paths.burst_model, thresholds, cfg.bandwidth_s, clustering)
    logger.info("calibrated t_r=%.6g t_s=%.6g over %d words, %d categories",
                thresholds.t_r, thresholds.t_s, len(vocab),
                clustering.n_categories)
    return {"t_r": thresholds.t_r, "t_s": thresholds.t_s,
            "n_words": len(vocab), "n_categories": clustering.n_categories}


def stage_detect(inputs: PipelineInputs, paths: PipelinePaths) -> list[EventVector]:
    """Run the burst detector over the whole stream and dump the vectors."""
    cfg = inputs.config
    thresholds, bandwidth, clustering = load_burst_model(paths.burst_model)
    detector = EventDetector(
        thresholds, clustering,
        bandwidth=bandwidth, tick_seconds=cfg.tick_s,
        market_lat=cfg.market_lat, market_lon=cfg.market_lon,
        update_factor=cfg.update_factor,
        max_event_seconds=cfg.max_event_hours * 3600.0,
        stopwords=inputs.stopwords, lexicon=inputs.lexicon,
    )
    vectors = list(detector.process(inputs.records))
    write_events(paths.events, vectors)
    logger.info("detected %d event vectors", len(vectors))
    return vectors


def _label_sets(
    inputs: PipelineInputs, data_dir: str | Path, multiplier: float
) -> tuple[LabelSets, LabelSets]:
    """(training-half sets, full-series sets) with one shared baseline."""
    cfg = inputs.config
    bars = inputs.market_bars(data_dir)
    vol = compute_volatility(bars, cfg.volatility_window, inputs.calendar)
    full = build_label_sets(
        vol, multiplier, mode=cfg.slope_baseline_mode,
        baseline_span=(inputs.t_start, inputs.t_split),
    )
    return restrict_sets(full, inputs.t_split), full


def stage_label(
    inputs: PipelineInputs, paths: PipelinePaths, data_dir: str | Path,
    multiplier: float,
) -> tuple[list[LabeledEvent], list[LabeledEvent]]:
    """Map event vectors to market opens and label both stream halves."""
    cfg = inputs.config
    vectors = read_events(paths.events)
    sets_train, sets_full = _label_sets(inputs, data_dir, multiplier)
    mapped = dedupe_same_open(map_to_market_opens(vectors, inputs.calendar))
    train_part = [(v, tp) for v, tp in mapped if tp <= inputs.t_split]
    eval_part = [(v, tp) for v, tp in mapped if tp > inputs.t_split]
    train_labeled = label_events(train_part, sets_train, cfg.t_time_s)
    eval_labeled = label_events(eval_part, sets_full, cfg.t_time_s)
    write_labeled_events(paths.labeled_train(multiplier), train_labeled)
    write_labeled_events(paths.labeled_eval(multiplier), eval_labeled)
    logger.info("multiplier %g: %d training and %d evaluation rows",
                multiplier, len(train_labeled), len(eval_labeled))
    return train_labeled, eval_labeled


def kernel_specs(cfg: PipelineConfig) -> list[KernelSpec]:
    specs: list[KernelSpec] = []
    for name in cfg.kernels:
        name = name.strip().lower()
        if name == "linear":
            specs.append(KernelSpec("linear"))
        elif name == "gaussian":
            specs.append(KernelSpec("gaussian", width=cfg.gaussian_width))
        elif name.startswith("poly"):
            degree = int(name[4:] or 3)
            specs.append(KernelSpec("poly", degree=degree, coef0=cfg.poly_coef0))
        else:
            raise ValueError(f"unknown kernel name {name!r}")
    return specs


def _fit_bundle(
    cfg: PipelineConfig, X: np.ndarray, y: np.ndarray, meta: dict
) -> ModelBundle:
    """Normalize, select features, cross-validate, and fit the final model."""
    normalizer = ColumnNormalizer().fit(X)
    Z = normalizer.transform(X)
    if cfg.selection == "cfs" and Z.shape[1] > 1:
        selector = CfsSelector().fit(Z, y)
    elif Z.shape[1] > 1:
        selector = InfoGainSelector(bins=cfg.infogain_bins).fit(Z, y)
    else:
        selector = None
    selected = (np.arange(Z.shape[1], dtype=np.int64) if selector is None
                else np.asarray(selector.support_, dtype=np.int64))
    # keep the ranked alternative view in the sidecar for inspection
    if Z.shape[1] > 1:
        try:
            gain = InfoGainSelector(bins=cfg.infogain_bins).fit(Z, y)
            meta["infogain_ranking"] = [int(i) for i in gain.support_]
        except ValueError:
            meta["infogain_ranking"] = []
    cv = cross_validate(
        Z[:, selected], y, cfg.folds, kernel_specs(cfg), cfg.c_grid,
        cfg.weight_grid, seed=cfg.seed, tol=cfg.kkt_tol,
        max_sweeps=cfg.max_sweeps,
    )
    clf = train(
        Z[:, selected], y, cv.kernel, cv.c, {0: 1.0, 1: cv.positive_weight},
        tol=cfg.kkt_tol, max_sweeps=cfg.max_sweeps, seed=cfg.seed,
    )
    meta.update({
        "selection": cfg.selection,
        "selected_columns": [int(normalizer.kept_[i]) for i in selected],
        "cv": {"kernel": str(cv.kernel), "c": cv.c,
               "positive_weight": cv.positive_weight,
               "mean_f1": cv.mean_f1, "folds": cv.folds},
        "n_train": int(len(y)),
    })
    return ModelBundle(normalizer, selected, clf, meta)


def stage_train(
    inputs: PipelineInputs, paths: PipelinePaths, multiplier: float
) -> ModelBundle:
    """Fit the market-impact classifier on labeled training events."""
    cfg = inputs.config
    rows = [r for r in read_labeled_events(paths.labeled_train(multiplier))
            if r.label != -1]
    if not rows:
        raise ValueError("no usable training rows (all discarded?)")
    X = np.vstack([r.features for r in rows])
    y = np.array([r.label for r in rows], dtype=np.int64)
    bundle = _fit_bundle(cfg, X, y, {"multiplier": multiplier})
    save_model(paths.model(multiplier), bundle)
    logger.info("multiplier %g: trained on %d rows, cv %s", multiplier,
                len(rows), bundle.meta.get("cv"))
    return bundle


def stage_classify(
    inputs: PipelineInputs, paths: PipelinePaths, multiplier: float
) -> list[dict]:
    """Predict each evaluation event, then fold its label in (prequential)."""
    cfg = inputs.config
    bundle = load_model(paths.model(multiplier))
    rows = read_labeled_events(paths.labeled_eval(multiplier))
    rows.sort(key=lambda r: (r.t_prime, r.event_start_ts))
    out: list[dict] = []
    for row in rows:
        if row.label == -1:
            continue
        decision = float(bundle.decision_raw(row.features)[0])
        out.append({
            "event_start_ts": row.event_start_ts,
            "t_prime": row.t_prime,
            "predicted": int(decision >= 0.0),
            "decision": decision,
            "label": int(row.label),
        })
        bundle = bundle.updated(row.features, int(row.label),
                                seed=cfg.seed, max_sweeps=cfg.max_sweeps)
    with open(paths.predictions(multiplier), "w", encoding="utf-8") as fh:
        for obj in out:
            fh.write(json.dumps(obj) + "\n")
    logger.info("multiplier %g: %d predictions", multiplier, len(out))
    return out


def read_predictions(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _stream_pair(
    inputs: PipelineInputs, rows: list[dict], sets_full: LabelSets
) -> LabelStreamPair:
    cfg = inputs.config
    predicted = [(r["event_start_ts"], r["t_prime"], r["predicted"])
                 for r in rows]
    true_labels = [(r["event_start_ts"], r["t_prime"], r["label"])
                   for r in rows]
    decisions = [r["decision"] for r in rows]
    return build_streams(
        predicted, true_labels, sets_full, t_time=cfg.t_time_s,
        decisions=decisions, span=(inputs.t_split, math.inf),
    )


def stage_evaluate(
    inputs: PipelineInputs, paths: PipelinePaths, data_dir: str | Path,
    multiplier: float,
) -> dict:
    """Score the prediction stream against the truth stream."""
    cfg = inputs.config
    rows = read_predictions(paths.predictions(multiplier))
    _, sets_full = _label_sets(inputs, data_dir, multiplier)
    pair = _stream_pair(inputs, rows, sets_full)
    report, roc_points = evaluate_pair(pair, multiplier, order=cfg.markov_order)
    write_report(paths.metrics(multiplier), report)
    write_roc_csv(paths.roc(multiplier), roc_points)
    logger.info("multiplier %g: f1=%.3f auc=%.3f mir=%.4f bits", multiplier,
                report.f1, report.auc, report.mir_bits)
    return report.to_dict()


def stage_mir(
    inputs: PipelineInputs, paths: PipelinePaths, data_dir: str | Path,
    multiplier: float,
) -> dict:
    """Markov information measures of the aligned streams, from artifacts."""
    cfg = inputs.config
    rows = read_predictions(paths.predictions(multiplier))
    _, sets_full = _label_sets(inputs, data_dir, multiplier)
    pair = _stream_pair(inputs, rows, sets_full)
    order = cfg.markov_order
    h_c = entropy_rate(fit_markov(pair.c, order=order, alphabet=2))
    h_l = entropy_rate(fit_markov(pair.l, order=order, alphabet=2))
    return {
        "multiplier": multiplier,
        "order": order,
        "stream_length": len(pair),
        "entropy_rate_truth_bits": h_c,
        "entropy_rate_detector_bits": h_l,
        "mir_bits": mir(pair, order),
    }


def stage_baseline(
    inputs: PipelineInputs, paths: PipelinePaths, data_dir: str | Path,
    multiplier: float,
) -> dict:
    """Score the sentiment-only detector through the same protocol."""
    cfg = inputs.config
    tokenized = [tokenize_tweet(r, inputs.stopwords, inputs.lexicon)
                 for r in inputs.records]
    series = sentiment_series(tokenized, window=cfg.sentiment_window_s,
                              step=cfg.sentiment_step_s)
    detected = sentiment_detect(series, update_factor=cfg.update_factor)
    sets_train, sets_full = _label_sets(inputs, data_dir, multiplier)
    labeled = baseline_labeled_events(
        detected, inputs.calendar, sets_full,
        t_time=cfg.t_time_s, max_shift=cfg.baseline_max_shift_s,
    )
    train_rows = [
        LabeledEvent(r.event_start_ts, r.t_prime,
                     assign_label(r.t_prime, sets_train, cfg.t_time_s),
                     r.features)
        for r in labeled if r.t_prime <= inputs.t_split
    ]
    eval_rows = [r for r in labeled if r.t_prime > inputs.t_split]
    train_rows = [r for r in train_rows if r.label != -1]

    y = np.array([r.label for r in train_rows], dtype=np.int64)
    degenerate = len(train_rows) == 0 or len(np.unique(y)) < 2 or min(
        np.bincount(y, minlength=2)[0], np.bincount(y, minlength=2)[1]) < 2
    bundle = None
    majority = 0
    if degenerate:
        majority = int(np.bincount(y, minlength=2).argmax()) if len(y) else 0
        logger.warning(
            "baseline training is single-class; predicting constant %d",
            majority)
    else:
        X = np.vstack([r.features for r in train_rows])
        bundle = _fit_bundle(cfg, X, y, {"multiplier": multiplier,
                                         "detector": "sentiment"})

    rows: list[dict] = []
    for row in sorted(eval_rows, key=lambda r: (r.t_prime, r.event_start_ts)):
        if row.label == -1:
            continue
        if bundle is None:
            decision, pred = 0.0, majority
        else:
            decision = float(bundle.decision_raw(row.features)[0])
            pred = int(decision >= 0.0)
        rows.append({
            "event_start_ts": row.event_start_ts, "t_prime": row.t_prime,
            "predicted": pred, "decision": decision, "label": int(row.label),
        })
        if bundle is not None:
            bundle = bundle.updated(row.features, int(row.label),
                                    seed=cfg.seed, max_sweeps=cfg.max_sweeps)

    pair = _stream_pair(inputs, rows, sets_full)
    report, _ = evaluate_pair(pair, multiplier, detector="sentiment",
                              order=cfg.markov_order)
    write_report(paths.baseline_metrics(multiplier), report)
    logger.info("baseline multiplier %g: f1=%.3f mir=%.4f bits", multiplier,
                report.f1, report.mir_bits)
    return report.to_dict()


def run_pipeline(
    config: PipelineConfig, data_dir: str | Path, out_dir: str | Path,
    multipliers: tuple[float, ...] | None = None,
) -> dict:
    """All stages in order; returns (and writes) the run summary."""
    paths = PipelinePaths(Path(out_dir))
    paths.out_dir.mkdir(parents=True, exist_ok=True)
    inputs = PipelineInputs.load(config, data_dir)
    mults = multipliers if multipliers else config.multipliers

    summary: dict = {
        "t_split": inputs.t_split,
        "calibration": stage_calibrate(inputs, paths),
        "n_event_vectors": len(stage_detect(inputs, paths)),
        "multipliers": {},
    }
    for m in mults:
        stage_label(inputs, paths, data_dir, m)
        stage_train(inputs, paths, m)
        stage_classify(inputs, paths, m)
        entry = {
            "detector": stage_evaluate(inputs, paths, data_dir, m),
            "baseline": stage_baseline(inputs, paths, data_dir, m),
        }
        summary["multipliers"][mult_tag(m)] = entry
    paths.summary.write_text(json.dumps(summary, indent=2) + "\n", "utf-8")
    return summary
