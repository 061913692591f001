"""Topic modeling on a controllable corpus: train LDA by collapsed Gibbs
sampling, inspect topics, score coherence, and pick the topic count by the
elbow of the multi-seed coherence curve.
"""

import numpy as np

from microevents.textprep import TokenStream, Vocabulary
from microevents.topics import LdaConfig, coherence_cv, infer_theta, select_k, top_words, train_lda

# corpus with three disjoint 12-word vocabularies ("themes")
rng = np.random.default_rng(0)
themes = [[f"{name}{i:02d}" for i in range(12)] for name in ("net", "gui", "db")]
vocab = Vocabulary({w: i for i, w in enumerate(t for theme in themes for t in theme)})

streams, bows = [], []
for d in range(240):
    theme = themes[d % 3]
    words = [theme[i] for i in rng.integers(0, 12, size=18)]
    streams.append(TokenStream(str(d), words))
    bow = {}
    for w in words:
        bow[vocab.token_to_id[w]] = bow.get(vocab.token_to_id[w], 0) + 1
    bows.append(bow)

config = LdaConfig(k=3, alpha=0.2, beta=0.01, burn_in=40, total_iterations=120, seed=1)
model = train_lda(bows, vocab, config)
print(f"trained LDA: K={model.k}, V={model.vocab_size}")
for k in range(model.k):
    words = ", ".join(t for t, _ in top_words(model, k, 5))
    print(f"  topic {k}: {words}")

theta = infer_theta(model, bows[0], fold_in_sweeps=40, seed=2)
print(f"\ntheta for document 0 (true theme 'net'): {np.round(theta, 3)}")

coherence = coherence_cv(model, streams, top_n=8)
print(f"\nC_V coherence: mean={coherence.mean:.3f}, per topic "
      f"{[round(c, 3) for c in coherence.per_topic]}")

selection = select_k(
    bows, vocab, streams, candidate_ks=[2, 3, 5, 7], n_seeds=2,
    base_config=LdaConfig(k=2, alpha=0.2, burn_in=20, total_iterations=60, seed=0),
    top_n=6,
)
print("\ncoherence curve (mean over seeds):")
for k, score in selection.mean_curve:
    marker = "  <- elbow" if k == selection.chosen_k else ""
    print(f"  K={k}: {score:.3f}{marker}")
print(f"chosen K = {selection.chosen_k} (no_elbow={selection.no_elbow})")
