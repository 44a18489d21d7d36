"""Burst event detection over microblog streams with market-impact
classification, volatility-derived labels, and information-rate scoring.
"""

from .baseline import (SentimentSeries, baseline_labeled_events,
                       sentiment_detect, sentiment_series, window_label)
from .config import PipelineConfig, load_config, write_config
from .events import (EventDetector, EventVector, TokenizedTweet,
                     feature_names, read_events, tokenize_tweet, write_events)
from .market import (LabelSets, LabeledEvent, MarketCalendar,
                     VolatilitySeries, assign_label, build_label_sets,
                     compute_volatility, dedupe_same_open, label_events,
                     load_calendar, map_to_market_opens, read_labeled_events,
                     restrict_sets, save_calendar, write_labeled_events)
from .metrics import (LabelStreamPair, MarkovChainModel, MetricsReport,
                      StreamEntry, auc, build_streams, entropy_rate,
                      evaluate_pair, fit_markov, mir, prf1, read_report,
                      roc_curve, write_report, write_roc_csv)
from .pipeline import (PipelineInputs, PipelinePaths, run_pipeline,
                       stage_baseline, stage_calibrate, stage_classify,
                       stage_detect, stage_evaluate, stage_label, stage_mir,
                       stage_train)
from .rates import (BurstThresholds, CalibrationError, WordClustering,
                    WordRateTrack, build_tracks, calibrate_thresholds,
                    cluster_words, load_burst_model, rate_correlation,
                    save_burst_model)
from .records import (MarketBar, TweetRecord, filter_by_terms,
                      parse_tweet_stream, read_market_csv, write_market_csv,
                      write_tweet_stream)
from .select import CfsSelector, ColumnNormalizer, InfoGainSelector
from .sentiment import SentimentLexicon, default_lexicon, load_lexicon, score_tokens
from .svm import (ConvergenceError, KernelClassifier, KernelSpec, ModelBundle,
                  cross_validate, kernel_matrix, load_model, online_update,
                  save_model, train)
from .synth import (PlantedEvent, SyntheticScenario, generate_synthetic,
                    standard_scenario)
from .text import (default_stopwords, load_stopwords, porter_stem,
                   rake_keywords, surface_tokens, tokenize_and_stem)

__version__ = "0.1.0"
