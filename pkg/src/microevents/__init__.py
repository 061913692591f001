"""Detection of software-release micro-events in time-bucketed forum messages.

The package is organised around the stages of the detection pipeline:

- :mod:`microevents.corpus` -- message/event ingestion and chronological splits
- :mod:`microevents.timegrid` -- 7-day time-step construction and labeling
- :mod:`microevents.textprep` -- markup stripping, tokenization, vocabulary
- :mod:`microevents.topics` -- Gibbs-sampled LDA, coherence, topic-count selection
- :mod:`microevents.sentiment` -- lexicon-based sentiment components
- :mod:`microevents.features` -- per-step pooling, standardization, outlier capping
- :mod:`microevents.learners` -- logistic regression (IRLS), random forest, GBDT
- :mod:`microevents.tuning` -- time-series CV, RFECV, grid search
- :mod:`microevents.stats` -- metrics, permutation tests, effect sizes, diagnostics
- :mod:`microevents.synthlab` -- synthetic corpora and the detectability sweep
- :mod:`microevents.runner` -- end-to-end experiment orchestration
"""

__version__ = "0.1.0"
