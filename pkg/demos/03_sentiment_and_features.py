"""Sentiment components and per-step feature assembly: markup stripping,
lexicon scoring, mean pooling, Tukey capping and train-fitted
standardization.
"""

import numpy as np

from microevents.features import (
    FeatureMatrix,
    apply_standardizer,
    apply_tukey,
    fit_standardizer,
    fit_tukey,
    pool_timestep,
)
from microevents.sentiment import load_lexicon, score_sentiment
from microevents.textprep import strip_markup

lexicon = load_lexicon()

posts = [
    "<p>The new release is <b>great</b>, upgrade went smooth!</p>",
    "<p>Broken build again <code>assert fail()</code> this is terrible</p>",
    "<p>not good: the driver crashes on every run</p>",
    "<p>Documentation question about the query syntax</p>",
]
print("per-message sentiment (negative / neutral / positive / compound):")
for post in posts:
    clean = strip_markup(post)
    s = score_sentiment(clean, lexicon)
    print(f"  {clean[:48]!r:52} -> {s.negative:.2f} / {s.neutral:.2f} / {s.positive:.2f} / {s.compound:+.3f}")

# pooling: the step vector is the mean of its message vectors
vectors = [np.array(score_sentiment(strip_markup(p), lexicon).as_tuple()) for p in posts]
pooled = pool_timestep(vectors)
print(f"\npooled step vector: {np.round(pooled, 3)}")

# capping + standardization, fitted on the training partition only
rng = np.random.default_rng(4)
train = rng.normal(size=(40, 2)) * [1.0, 3.0]
train[5, 0] = 40.0  # an outlier to cap
test = rng.normal(size=(10, 2))
fm = FeatureMatrix(
    x=np.vstack([train, test]),
    columns=["sentiment_compound", "lda_topic__0"],
    labels=np.array([i % 2 for i in range(50)]),
    partition=np.array(["train"] * 40 + ["test"] * 10, dtype=object),
    step_ids=[f"s{i}" for i in range(50)],
)
capper = fit_tukey(fm)
print(f"\nTukey fences for {fm.columns[0]}: "
      f"[{capper.lower[0]:.2f}, {capper.upper[0]:.2f}] (train value 40.0 will clamp)")
capped = apply_tukey(capper, fm)
standardizer = fit_standardizer(capped)
z = apply_standardizer(standardizer, capped)
print(f"train column means after standardization: {np.round(z.x_train().mean(axis=0), 12)}")
print(f"train column sds   after standardization: {np.round(z.x_train().std(axis=0, ddof=1), 12)}")
