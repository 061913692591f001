"""LDA via collapsed Gibbs sampling, C_V coherence, topic-count selection.

The sampler keeps integer count state and draws from an internal splitmix64
stream, so a fixed seed gives bit-identical models across runs and
platforms.  Kernels are numba-compiled; the corpus is the token-occurrence
expansion of the bag-of-words encodings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .textprep import TokenStream, Vocabulary


class TopicsError(ValueError):
    pass


@dataclass(frozen=True)
class LdaConfig:
    k: int
    alpha: Optional[float] = None  # None -> 50 / k
    beta: float = 0.01
    burn_in: int = 200
    total_iterations: int = 500
    seed: int = 0

    def resolved_alpha(self) -> float:
        return 50.0 / self.k if self.alpha is None else self.alpha

    def validate(self) -> None:
        if self.k < 1:
            raise TopicsError("topic count must be >= 1")
        if self.resolved_alpha() <= 0 or self.beta <= 0:
            raise TopicsError("alpha and beta must be positive")
        if not self.total_iterations > self.burn_in >= 0:
            raise TopicsError("need total_iterations > burn_in >= 0")


@dataclass
class TopicModel:
    topic_word_counts: np.ndarray  # (K, V) int64
    topic_totals: np.ndarray  # (K,) int64
    config: LdaConfig
    vocabulary: Vocabulary
    sweep_log_likelihood: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def k(self) -> int:
        return int(self.topic_word_counts.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.topic_word_counts.shape[1])

    def phi(self) -> np.ndarray:
        """Per-topic word distributions, rows summing to 1."""
        beta = self.config.beta
        return (self.topic_word_counts + beta) / (
            self.topic_totals[:, None] + self.vocab_size * beta
        )

    def save(self, header_path: str, counts_path: str) -> None:
        header = {
            "schema_version": 1,
            "k": self.k,
            "vocab_size": self.vocab_size,
            "alpha": self.config.resolved_alpha(),
            "beta": self.config.beta,
            "burn_in": self.config.burn_in,
            "total_iterations": self.config.total_iterations,
            "seed": self.config.seed,
        }
        with open(header_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(header, fh, indent=1, sort_keys=True)
            fh.write("\n")
        np.savez_compressed(
            counts_path,
            topic_word_counts=self.topic_word_counts,
            topic_totals=self.topic_totals,
            sweep_log_likelihood=self.sweep_log_likelihood,
        )

    @classmethod
    def load(cls, header_path: str, counts_path: str, vocabulary: Vocabulary) -> "TopicModel":
        with open(header_path, "r", encoding="utf-8") as fh:
            header = json.load(fh)
        data = np.load(counts_path)
        config = LdaConfig(
            k=header["k"],
            alpha=header["alpha"],
            beta=header["beta"],
            burn_in=header["burn_in"],
            total_iterations=header["total_iterations"],
            seed=header["seed"],
        )
        return cls(
            topic_word_counts=data["topic_word_counts"],
            topic_totals=data["topic_totals"],
            config=config,
            vocabulary=vocabulary,
            sweep_log_likelihood=data["sweep_log_likelihood"],
        )


# ---------------------------------------------------------------------------
# numba kernels

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _rand_uniform(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)) * _INV53


@njit(cache=True)
def _init_assignments(doc_ids, word_ids, z, ndk, nkw, nk, nd, state):
    k_topics = nkw.shape[0]
    for i in range(doc_ids.shape[0]):
        k = int(_rand_uniform(state) * k_topics)
        if k >= k_topics:
            k = k_topics - 1
        z[i] = k
        ndk[doc_ids[i], k] += 1
        nkw[k, word_ids[i]] += 1
        nk[k] += 1
        nd[doc_ids[i]] += 1


@njit(cache=True)
def _gibbs_sweeps(doc_ids, word_ids, z, ndk, nkw, nk, nd, alpha, beta, n_sweeps, state, ll_out):
    k_topics = nkw.shape[0]
    v = nkw.shape[1]
    vbeta = v * beta
    kalpha = k_topics * alpha
    cum = np.empty(k_topics)
    for sweep in range(n_sweeps):
        for i in range(doc_ids.shape[0]):
            d = doc_ids[i]
            w = word_ids[i]
            k_old = z[i]
            ndk[d, k_old] -= 1
            nkw[k_old, w] -= 1
            nk[k_old] -= 1
            total = 0.0
            for k in range(k_topics):
                total += (ndk[d, k] + alpha) * (nkw[k, w] + beta) / (nk[k] + vbeta)
                cum[k] = total
            u = _rand_uniform(state) * total
            k_new = 0
            while k_new < k_topics - 1 and cum[k_new] < u:
                k_new += 1
            z[i] = k_new
            ndk[d, k_new] += 1
            nkw[k_new, w] += 1
            nk[k_new] += 1
        ll = 0.0
        for i in range(doc_ids.shape[0]):
            d = doc_ids[i]
            w = word_ids[i]
            p = 0.0
            for k in range(k_topics):
                p += ((ndk[d, k] + alpha) / (nd[d] + kalpha)) * (
                    (nkw[k, w] + beta) / (nk[k] + vbeta)
                )
            ll += math.log(p)
        ll_out[sweep] = ll


@njit(cache=True)
def _fold_in_doc(word_ids, nkw_frozen, nk_frozen, alpha, beta, n_sweeps, state, ndk_row):
    k_topics = nkw_frozen.shape[0]
    v = nkw_frozen.shape[1]
    vbeta = v * beta
    n_tokens = word_ids.shape[0]
    z = np.empty(n_tokens, dtype=np.int64)
    cum = np.empty(k_topics)
    for i in range(n_tokens):
        k = int(_rand_uniform(state) * k_topics)
        if k >= k_topics:
            k = k_topics - 1
        z[i] = k
        ndk_row[k] += 1
    for _ in range(n_sweeps):
        for i in range(n_tokens):
            w = word_ids[i]
            k_old = z[i]
            ndk_row[k_old] -= 1
            total = 0.0
            for k in range(k_topics):
                total += (ndk_row[k] + alpha) * (nkw_frozen[k, w] + beta) / (nk_frozen[k] + vbeta)
                cum[k] = total
            u = _rand_uniform(state) * total
            k_new = 0
            while k_new < k_topics - 1 and cum[k_new] < u:
                k_new += 1
            z[i] = k_new
            ndk_row[k_new] += 1


# ---------------------------------------------------------------------------
# training and inference

def _expand_bows(bows: Sequence[dict[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    doc_ids: list[int] = []
    word_ids: list[int] = []
    for d, bow in enumerate(bows):
        for w in sorted(bow):
            count = bow[w]
            doc_ids.extend([d] * count)
            word_ids.extend([w] * count)
    return np.asarray(doc_ids, dtype=np.int64), np.asarray(word_ids, dtype=np.int64)


def _seed_state(seed: int, stream: int = 0) -> np.ndarray:
    mask = 0xFFFFFFFFFFFFFFFF
    mixed = ((seed & mask) * 0x100000001B3) & mask
    mixed ^= ((stream + 1) * 0x9E3779B97F4A7C15) & mask
    return np.array([np.uint64(mixed)], dtype=np.uint64)


def train_lda(bows: Sequence[dict[int, int]], vocabulary: Vocabulary, config: LdaConfig) -> TopicModel:
    """Fit LDA on bag-of-words encodings by collapsed Gibbs sampling.

    Full conditional per token: P(z=k) ~ (n_dk + alpha) * (n_kw + beta) /
    (n_k + V*beta).  Counts after the final sweep define the model.
    """
    config.validate()
    if not bows:
        raise TopicsError("empty corpus")
    v = vocabulary.size
    if v < 1:
        raise TopicsError("empty vocabulary")
    doc_ids, word_ids = _expand_bows(bows)
    if doc_ids.shape[0] == 0:
        raise TopicsError("corpus holds no in-vocabulary tokens")
    n_docs = len(bows)
    k = config.k
    alpha = config.resolved_alpha()

    z = np.zeros(doc_ids.shape[0], dtype=np.int64)
    ndk = np.zeros((n_docs, k), dtype=np.int64)
    nkw = np.zeros((k, v), dtype=np.int64)
    nk = np.zeros(k, dtype=np.int64)
    nd = np.zeros(n_docs, dtype=np.int64)
    state = _seed_state(config.seed)
    ll = np.zeros(config.total_iterations)

    _init_assignments(doc_ids, word_ids, z, ndk, nkw, nk, nd, state)
    _gibbs_sweeps(
        doc_ids, word_ids, z, ndk, nkw, nk, nd, alpha, config.beta,
        config.total_iterations, state, ll,
    )
    return TopicModel(
        topic_word_counts=nkw,
        topic_totals=nk,
        config=config,
        vocabulary=vocabulary,
        sweep_log_likelihood=ll,
    )


def infer_theta(
    model: TopicModel, bow: dict[int, int], fold_in_sweeps: int = 30, seed: int = 0
) -> np.ndarray:
    """Document-topic distribution by fold-in Gibbs with frozen word counts.

    theta_k = (n_dk + alpha) / (n_d + K*alpha); an empty document returns the
    uniform prior.
    """
    k = model.k
    alpha = model.config.resolved_alpha()
    word_ids = []
    for w in sorted(bow):
        word_ids.extend([w] * bow[w])
    n_tokens = len(word_ids)
    if n_tokens == 0:
        return np.full(k, 1.0 / k)
    ndk_row = np.zeros(k, dtype=np.int64)
    state = _seed_state(seed, stream=1)
    _fold_in_doc(
        np.asarray(word_ids, dtype=np.int64),
        model.topic_word_counts,
        model.topic_totals,
        alpha,
        model.config.beta,
        fold_in_sweeps,
        state,
        ndk_row,
    )
    return (ndk_row + alpha) / (n_tokens + k * alpha)


def infer_theta_batch(
    model: TopicModel, bows: Sequence[dict[int, int]], fold_in_sweeps: int = 30, seed: int = 0
) -> np.ndarray:
    """Row-stacked fold-in distributions; each document gets its own
    deterministic stream derived from ``seed`` and its position."""
    out = np.empty((len(bows), model.k))
    for i, bow in enumerate(bows):
        out[i] = infer_theta(model, bow, fold_in_sweeps=fold_in_sweeps, seed=seed + 1000003 * i)
    return out


def top_words(model: TopicModel, k: int, n: int) -> list[tuple[str, float]]:
    """Top ``n`` tokens of topic ``k`` by descending phi, ties by token id."""
    if not 0 <= k < model.k:
        raise TopicsError(f"topic index out of range: {k}")
    phi_k = model.phi()[k]
    n = min(max(n, 0), model.vocab_size)
    order = np.lexsort((np.arange(model.vocab_size), -phi_k))[:n]
    id2tok = model.vocabulary.id_to_token()
    return [(id2tok[i], float(phi_k[i])) for i in order]


# ---------------------------------------------------------------------------
# C_V coherence

NPMI_EPS = 1e-12


@dataclass
class CoherenceResult:
    mean: float
    per_topic: list[float]
    flags: list[str] = field(default_factory=list)


def _window_masks(streams: Sequence[TokenStream], tracked: dict[str, int], window: int):
    """Presence bitmask per boolean sliding window, deduplicated into counts."""
    mask_counts: dict[int, int] = {}
    n_windows = 0
    for stream in streams:
        ids = [tracked.get(t, -1) for t in stream.tokens]
        if not ids:
            continue
        if len(ids) <= window:
            spans = [(0, len(ids))]
        else:
            spans = [(i, i + window) for i in range(len(ids) - window + 1)]
        # incremental presence counting across the sliding spans
        counts = [0] * len(tracked)
        mask = 0
        lo, hi = spans[0]
        for j in range(lo, hi):
            if ids[j] >= 0:
                counts[ids[j]] += 1
                mask |= 1 << ids[j]
        mask_counts[mask] = mask_counts.get(mask, 0) + 1
        n_windows += 1
        for lo, hi in spans[1:]:
            out_id = ids[lo - 1]
            if out_id >= 0:
                counts[out_id] -= 1
                if counts[out_id] == 0:
                    mask &= ~(1 << out_id)
            in_id = ids[hi - 1]
            if in_id >= 0:
                counts[in_id] += 1
                mask |= 1 << in_id
            mask_counts[mask] = mask_counts.get(mask, 0) + 1
            n_windows += 1
    return mask_counts, n_windows


def coherence_cv(
    model: TopicModel,
    reference_streams: Sequence[TokenStream],
    top_n: int = 10,
    window: int = 110,
) -> CoherenceResult:
    """C_V topic coherence on boolean sliding windows.

    One-set segmentation: each top word's NPMI context vector is compared by
    cosine against the summed vector of the full top set; topic coherence is
    the mean over words, model coherence the mean over topics.
    """
    flags: list[str] = []
    topic_words = [[tok for tok, _ in top_words(model, k, top_n)] for k in range(model.k)]
    tracked_tokens = sorted({t for words in topic_words for t in words})
    tracked = {t: i for i, t in enumerate(tracked_tokens)}

    mask_counts, n_windows = _window_masks(reference_streams, tracked, window)
    if n_windows == 0:
        raise TopicsError("no reference windows: empty token streams")
    if n_windows == 1:
        flags.append("degenerate: single reference window")

    m = len(tracked)
    occ = np.zeros(m)
    joint = np.zeros((m, m))
    for mask, count in mask_counts.items():
        present = []
        bit = 0
        while mask:
            if mask & 1:
                present.append(bit)
            mask >>= 1
            bit += 1
        for a_i, a in enumerate(present):
            occ[a] += count
            for b in present[a_i + 1:]:
                joint[a, b] += count
                joint[b, a] += count
    np.fill_diagonal(joint, occ)

    p_single = occ / n_windows
    p_joint = joint / n_windows

    def npmi(i: int, j: int) -> float:
        pj = p_joint[i, j]
        denom = -math.log(pj + NPMI_EPS)
        if denom == 0.0:
            return 1.0
        return math.log((pj + NPMI_EPS) / (p_single[i] * p_single[j])) / denom

    per_topic: list[float] = []
    for k, words in enumerate(topic_words):
        usable = [w for w in words if occ[tracked[w]] > 0]
        if len(usable) < len(words):
            flags.append(f"topic {k}: only {len(usable)} of {len(words)} top words in corpus")
        if len(usable) < 2:
            flags.append(f"topic {k}: degenerate (fewer than 2 usable words)")
            per_topic.append(0.0)
            continue
        idx = [tracked[w] for w in usable]
        vectors = np.array([[npmi(i, j) for j in idx] for i in idx])
        v_set = vectors.sum(axis=0)
        set_norm = np.linalg.norm(v_set)
        sims = []
        for row in vectors:
            row_norm = np.linalg.norm(row)
            if row_norm == 0.0 or set_norm == 0.0:
                flags.append(f"topic {k}: zero-norm context vector")
                sims.append(0.0)
            else:
                sims.append(float(np.dot(row, v_set) / (row_norm * set_norm)))
        per_topic.append(float(np.mean(sims)))

    return CoherenceResult(mean=float(np.mean(per_topic)), per_topic=per_topic, flags=flags)


# ---------------------------------------------------------------------------
# topic-count selection

@dataclass
class KSelection:
    chosen_k: int
    mean_curve: list[tuple[int, float]]
    per_seed: list[tuple[int, int, float]]  # (k, seed, coherence)
    no_elbow: bool = False


def _elbow_point(ks: list[int], values: list[float]) -> tuple[int, bool]:
    """Max perpendicular distance from the chord joining curve endpoints."""
    x0, y0 = float(ks[0]), values[0]
    x1, y1 = float(ks[-1]), values[-1]
    dx, dy = x1 - x0, y1 - y0
    chord = math.hypot(dx, dy)
    if chord == 0.0:
        return ks[int(np.argmax(values))], True
    distances = [abs(dx * (v - y0) - dy * (k - x0)) / chord for k, v in zip(ks, values)]
    best = max(distances)
    if best <= 1e-12:
        return ks[int(np.argmax(values))], True
    return ks[int(np.argmax(distances))], False


def select_k(
    bows: Sequence[dict[int, int]],
    vocabulary: Vocabulary,
    reference_streams: Sequence[TokenStream],
    candidate_ks: Sequence[int],
    n_seeds: int = 3,
    base_config: Optional[LdaConfig] = None,
    top_n: int = 10,
    window: int = 110,
) -> KSelection:
    """Pick the topic count by the elbow of the multi-seed mean C_V curve."""
    ks = sorted(candidate_ks)
    if len(ks) < 3:
        raise TopicsError("need at least 3 candidate topic counts")
    base = base_config or LdaConfig(k=ks[0])
    per_seed: list[tuple[int, int, float]] = []
    means: list[float] = []
    for k in ks:
        scores = []
        for s in range(n_seeds):
            config = replace(base, k=k, seed=base.seed + s)
            model = train_lda(bows, vocabulary, config)
            score = coherence_cv(model, reference_streams, top_n=top_n, window=window).mean
            per_seed.append((k, config.seed, score))
            scores.append(score)
        means.append(float(np.mean(scores)))
    chosen, no_elbow = _elbow_point(ks, means)
    return KSelection(
        chosen_k=chosen,
        mean_curve=list(zip(ks, means)),
        per_seed=per_seed,
        no_elbow=no_elbow,
    )


def write_coherence_csv(selection: KSelection, path: str) -> None:
    """Selection curve as CSV: k,seed,coherence (seed -1 rows carry means)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,seed,coherence\n")
        for k, seed, score in selection.per_seed:
            fh.write(f"{k},{seed},{score:.10f}\n")
        for k, mean in selection.mean_curve:
            fh.write(f"{k},-1,{mean:.10f}\n")
