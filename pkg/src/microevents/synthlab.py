"""Synthetic forum corpora with controlled event strength, corpus-similarity
validation, and the detectability-threshold sweep.

Background messages come from a topic-mixture generator over a fixed
vocabulary; event-related messages are background-style text with injected
seed phrases (community-compound noun + change verb).  Seed-phrase verbs are
excluded from the background vocabulary, so the only signal knob is the
fraction of event-related messages per positive time step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import learners
from .corpus import CorpusSplit, Message, chronological_split
from .features import (
    FeatureMatrix,
    apply_standardizer,
    apply_tukey,
    assemble_features,
    drop_redundant_simplex_columns,
    fit_standardizer,
    fit_tukey,
    topic_feature_names,
)
from .seeds import derive_seed
from .sentiment import feature_names as sentiment_feature_names
from .sentiment import load_lexicon, score_sentiment
from .stats import permutation_test, pr_auc_mean
from .textprep import TokenStream, build_vocabulary, detect_collocations, encode_bow, load_stopwords
from .timegrid import CONTROL, StepDataset, TimeStep, assemble_dataset
from .topics import LdaConfig, infer_theta_batch, train_lda

DEFAULT_FRACTION_GRID = [round(0.10 + 0.05 * i, 2) for i in range(8)]  # 0.10 .. 0.45
_BASE_INSTANT = datetime(2020, 1, 6, tzinfo=timezone.utc)  # a Monday


class SynthError(ValueError):
    pass


# ---------------------------------------------------------------------------
# seed lexicon (three community compounds + change verbs)

@dataclass
class SeedLexicon:
    nouns: dict[str, list[str]]  # compound -> nouns
    verbs: dict[str, list[str]]  # "addition" / "removal" -> verbs

    COMPOUNDS = ("rules", "people", "products")

    def all_phrases(self) -> list[tuple[str, str]]:
        phrases = []
        for compound in self.COMPOUNDS:
            for noun in self.nouns.get(compound, []):
                for direction in ("addition", "removal"):
                    for verb in self.verbs.get(direction, []):
                        phrases.append((noun, verb))
        return phrases

    def all_verbs(self) -> set[str]:
        return {v for vs in self.verbs.values() for v in vs}

    def all_nouns(self) -> list[str]:
        return [n for compound in self.COMPOUNDS for n in self.nouns.get(compound, [])]

    def active_subset(self, size: int, rng: np.random.Generator) -> list[tuple[str, str]]:
        phrases = self.all_phrases()
        if not phrases:
            raise SynthError("empty seed lexicon")
        if size > len(phrases):
            raise SynthError(f"requested {size} active phrases, lexicon has {len(phrases)}")
        idx = rng.choice(len(phrases), size=size, replace=False)
        return [phrases[i] for i in sorted(idx)]

    @classmethod
    def load(cls, path: str | None = None) -> "SeedLexicon":
        if path is not None:
            with open(path, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        else:
            obj = json.loads(
                resources.files("microevents.assets").joinpath("seed_lexicon.json")
                .read_text(encoding="utf-8")
            )
        return cls(nouns=obj["nouns"], verbs=obj["verbs"])


def load_background_vocab(v_background: int, lexicon: SeedLexicon) -> list[str]:
    """Background vocabulary: compound nouns plus generic forum words.

    The community discusses its compounds (people, rules, products) all the
    time, so seed nouns belong to the background; only the change verbs are
    event-exclusive, keeping the event fraction the sole signal knob.
    """
    words = [
        w.strip()
        for w in resources.files("microevents.assets").joinpath("background_vocab.txt")
        .read_text(encoding="utf-8").splitlines()
        if w.strip() and not w.startswith("#")
    ]
    verbs = lexicon.all_verbs()
    nouns = [n for n in lexicon.all_nouns() if n not in verbs]
    merged = nouns + [w for w in words if w not in verbs and w not in set(nouns)]
    if v_background <= len(merged):
        return merged[:v_background]
    return merged + [f"term{i:04d}" for i in range(v_background - len(merged))]


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class SyntheticConfig:
    fraction_event: float = 0.25
    n_steps: int = 335
    messages_per_step: int = 60
    positive_ratio: float = 0.25
    n_instances: int = 15
    v_background: int = 300
    n_background_topics: int = 6
    doc_topic_alpha: float = 0.15
    topic_word_concentration: float = 0.08
    length_mean: float = 15.0
    length_min: int = 3
    active_phrases: int = 100
    min_phrases_per_message: int = 1
    max_phrases_per_message: int = 1
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.fraction_event <= 1.0:
            raise SynthError("fraction_event must be in [0, 1]")
        if not 0.0 < self.positive_ratio < 1.0:
            raise SynthError("positive_ratio must be in (0, 1)")
        if self.n_steps < 2 or self.messages_per_step < 1:
            raise SynthError("degenerate step layout")


def _background_topics(config: SyntheticConfig, vocab_size: int) -> np.ndarray:
    """Per-topic word distributions; a deterministic function of the seed."""
    rng = np.random.default_rng(derive_seed(config.seed, "topics"))
    return rng.dirichlet(
        np.full(vocab_size, config.topic_word_concentration), size=config.n_background_topics
    )


def _draw_message_tokens(rng, topics, vocab, config) -> list[str]:
    theta = rng.dirichlet(np.full(config.n_background_topics, config.doc_topic_alpha))
    length = max(config.length_min, int(rng.poisson(config.length_mean)))
    topic_ids = rng.choice(config.n_background_topics, size=length, p=theta)
    return [vocab[rng.choice(len(vocab), p=topics[z])] for z in topic_ids]


def generate_background(config: SyntheticConfig, n: int) -> list[Message]:
    """Background messages from the topic mixture; ids ``bg-<i>``."""
    config.validate()
    lexicon = SeedLexicon.load()
    vocab = load_background_vocab(config.v_background, lexicon)
    topics = _background_topics(config, len(vocab))
    rng = np.random.default_rng(derive_seed(config.seed, "background"))
    out = []
    for i in range(n):
        tokens = _draw_message_tokens(rng, topics, vocab, config)
        out.append(
            Message(
                id=f"bg-{i:06d}",
                timestamp=_BASE_INSTANT + timedelta(seconds=i),
                body_raw=" ".join(tokens),
            )
        )
    return out


def generate_event_related(config: SyntheticConfig, n: int) -> list[Message]:
    """Background-style messages carrying at least one active seed phrase."""
    config.validate()
    if config.min_phrases_per_message < 1:
        raise SynthError("not event-related: phrase injection rate is zero")
    lexicon = SeedLexicon.load()
    vocab = load_background_vocab(config.v_background, lexicon)
    topics = _background_topics(config, len(vocab))
    rng = np.random.default_rng(derive_seed(config.seed, "event"))
    active = lexicon.active_subset(config.active_phrases, rng)
    out = []
    for i in range(n):
        tokens = _draw_message_tokens(rng, topics, vocab, config)
        n_phrases = int(rng.integers(config.min_phrases_per_message, config.max_phrases_per_message + 1))
        for _ in range(n_phrases):
            noun, verb = active[rng.integers(0, len(active))]
            slot = int(rng.integers(0, len(tokens) + 1))
            tokens[slot:slot] = [noun, verb]
        out.append(
            Message(
                id=f"ev-{i:06d}",
                timestamp=_BASE_INSTANT + timedelta(seconds=i),
                body_raw=" ".join(tokens),
            )
        )
    return out


# ---------------------------------------------------------------------------
# bagging messages into labeled time steps

def _round_half_down(x: float) -> int:
    return math.ceil(x - 0.5)


def bag_timesteps(
    background: list[Message],
    event_related: list[Message],
    fraction_event: float,
    n_steps: int,
    positive_ratio: float,
    messages_per_step: int,
    seed: int = 0,
    train_fraction: float = 0.6,
) -> tuple[StepDataset, list[Message], CorpusSplit]:
    """Bag pool messages into labeled steps with chronological pseudo-times.

    Positive steps hold ceil(fraction * messages_per_step) event-related
    messages plus background; negatives are background only.  The positive
    count is positive_ratio * n_steps rounded to nearest (ties down).  Draws
    are without replacement; the returned dataset is already split 60/40 by
    the pseudo-timestamps.
    """
    n_pos = _round_half_down(positive_ratio * n_steps)
    if not 0 < n_pos < n_steps:
        raise SynthError("positive_ratio leaves no steps for one of the classes")
    n_event_per_pos = math.ceil(fraction_event * messages_per_step)
    need_event = n_pos * n_event_per_pos
    need_bg = n_steps * messages_per_step - need_event
    if need_event > len(event_related):
        raise SynthError(f"insufficient event-related pool: need {need_event}, have {len(event_related)}")
    if need_bg > len(background):
        raise SynthError(f"insufficient background pool: need {need_bg}, have {len(background)}")

    rng = np.random.default_rng(seed)
    positive_steps = set(rng.choice(n_steps, size=n_pos, replace=False).tolist())
    bg_order = rng.permutation(len(background))
    ev_order = rng.permutation(len(event_related))
    bg_cursor = ev_cursor = 0

    spacing = (7 * 24 * 3600) // messages_per_step
    steps: list[TimeStep] = []
    all_messages: list[Message] = []
    for s in range(n_steps):
        start = _BASE_INSTANT + timedelta(days=7 * s)
        members: list[Message] = []
        if s in positive_steps:
            for _ in range(n_event_per_pos):
                members.append(event_related[ev_order[ev_cursor]])
                ev_cursor += 1
            n_bg = messages_per_step - n_event_per_pos
        else:
            n_bg = messages_per_step
        for _ in range(n_bg):
            members.append(background[bg_order[bg_cursor]])
            bg_cursor += 1
        for j, msg in enumerate(members):
            msg.timestamp = start + timedelta(seconds=j * spacing)
        members.sort(key=lambda m: (m.timestamp, m.id))
        steps.append(
            TimeStep(
                start_day=start.date(),
                end_day=(start + timedelta(days=6)).date(),
                design="synthetic",
                message_ids=[m.id for m in members],
                label="event" if s in positive_steps else CONTROL,
            )
        )
        all_messages.extend(members)

    all_messages.sort(key=lambda m: (m.timestamp, m.id))
    split = chronological_split(all_messages, train_fraction)
    dataset = assemble_dataset(steps, split, name=f"synthetic[event][f={fraction_event}]", target_kind="event")
    return dataset, all_messages, split


# ---------------------------------------------------------------------------
# corpus similarity (novelty / diversity / KL)

def jaccard_similarity(tokens_a: set, tokens_b: set) -> float:
    if not tokens_a and not tokens_b:
        return 1.0
    union = len(tokens_a | tokens_b)
    return len(tokens_a & tokens_b) / union


def kl_divergence(p_hist, q_hist, eps: float = 1e-10) -> float:
    """KL(p || q) in nats over a shared binning, with epsilon smoothing."""
    p = np.asarray(p_hist, dtype=float) + eps
    q = np.asarray(q_hist, dtype=float) + eps
    if p.shape != q.shape:
        raise SynthError("histograms must share a binning")
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))


def _token_sets(messages: Sequence[Message]) -> list[frozenset[str]]:
    return [frozenset(m.body_raw.lower().split()) for m in messages]


def _pairwise_distances(sets_a: list[frozenset], sets_b: list[frozenset]) -> np.ndarray:
    """1 - Jaccard for every cross pair, via binary incidence matrices."""
    vocab: dict[str, int] = {}
    for s in sets_a:
        for t in s:
            vocab.setdefault(t, len(vocab))
    for s in sets_b:
        for t in s:
            vocab.setdefault(t, len(vocab))
    if not vocab:
        return np.zeros((len(sets_a), len(sets_b)))
    a = np.zeros((len(sets_a), len(vocab)), dtype=np.float32)
    b = np.zeros((len(sets_b), len(vocab)), dtype=np.float32)
    for i, s in enumerate(sets_a):
        for t in s:
            a[i, vocab[t]] = 1.0
    for i, s in enumerate(sets_b):
        for t in s:
            b[i, vocab[t]] = 1.0
    inter = a @ b.T
    sizes_a = a.sum(axis=1)[:, None]
    sizes_b = b.sum(axis=1)[None, :]
    union = sizes_a + sizes_b - inter
    jac = np.where(union > 0, inter / np.maximum(union, 1e-12), 1.0)
    return 1.0 - jac


@dataclass
class SimilarityReport:
    novelty_mean: float
    novelty_std: float
    diversity_a_mean: float
    diversity_a_std: float
    diversity_b_mean: float
    diversity_b_std: float
    kl_divergence: float
    sample_size: int
    repeats: int
    flags: list[str] = field(default_factory=list)


def novelty_diversity(
    corpus_a: Sequence[Message],
    corpus_b: Sequence[Message],
    sample_size: int = 500,
    repeats: int = 30,
    seed: int = 0,
) -> SimilarityReport:
    """Cross-corpus novelty and per-corpus diversity from repeated samples.

    Novelty is the mean pairwise (1 - Jaccard) between samples of A and B;
    diversity uses two disjoint samples of the same corpus.  The KL term
    compares the within-A and within-B distance histograms (64 uniform bins
    on [0, 1]).  Corpora too small for disjoint samples are sampled with
    replacement and flagged.
    """
    rng = np.random.default_rng(seed)
    sets_a = _token_sets(corpus_a)
    sets_b = _token_sets(corpus_b)
    flags: list[str] = []

    def draw(sets: list, k: int, disjoint_pairs: bool):
        if disjoint_pairs:
            if len(sets) >= 2 * k:
                idx = rng.choice(len(sets), size=2 * k, replace=False)
                return [sets[i] for i in idx[:k]], [sets[i] for i in idx[k:]]
            flags.append("corpus smaller than 2x sample size: sampling with replacement")
            i1 = rng.choice(len(sets), size=k, replace=True)
            i2 = rng.choice(len(sets), size=k, replace=True)
            return [sets[i] for i in i1], [sets[i] for i in i2]
        replace_draw = len(sets) < k
        if replace_draw:
            flags.append("corpus smaller than sample size: sampling with replacement")
        idx = rng.choice(len(sets), size=k, replace=replace_draw)
        return [sets[i] for i in idx]

    novelty_vals, div_a_vals, div_b_vals = [], [], []
    hist_a = np.zeros(64)
    hist_b = np.zeros(64)
    bins = np.linspace(0.0, 1.0, 65)
    for _ in range(repeats):
        sample_a = draw(sets_a, sample_size, disjoint_pairs=False)
        sample_b = draw(sets_b, sample_size, disjoint_pairs=False)
        novelty_vals.append(float(_pairwise_distances(sample_a, sample_b).mean()))
        a1, a2 = draw(sets_a, sample_size, disjoint_pairs=True)
        d_a = _pairwise_distances(a1, a2)
        div_a_vals.append(float(d_a.mean()))
        hist_a += np.histogram(d_a.ravel(), bins=bins)[0]
        b1, b2 = draw(sets_b, sample_size, disjoint_pairs=True)
        d_b = _pairwise_distances(b1, b2)
        div_b_vals.append(float(d_b.mean()))
        hist_b += np.histogram(d_b.ravel(), bins=bins)[0]

    return SimilarityReport(
        novelty_mean=float(np.mean(novelty_vals)),
        novelty_std=float(np.std(novelty_vals, ddof=1)) if repeats > 1 else 0.0,
        diversity_a_mean=float(np.mean(div_a_vals)),
        diversity_a_std=float(np.std(div_a_vals, ddof=1)) if repeats > 1 else 0.0,
        diversity_b_mean=float(np.mean(div_b_vals)),
        diversity_b_std=float(np.std(div_b_vals, ddof=1)) if repeats > 1 else 0.0,
        kl_divergence=kl_divergence(hist_a, hist_b),
        sample_size=sample_size,
        repeats=repeats,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# the synthetic analysis pipeline (features -> estimators -> permutation test)

@dataclass(frozen=True)
class SweepPipelineParams:
    lda_k: int = 8
    lda_alpha: float = 0.5
    lda_beta: float = 0.01
    lda_burn_in: int = 50
    lda_iterations: int = 150
    fold_in_sweeps: int = 25
    min_df: int = 5
    max_df_fraction: float = 0.5
    collocations: bool = True
    colloc_min_count: int = 20
    colloc_threshold: float = 10.0
    n_permutations: int = 1000
    forest_n_trees: int = 100
    forest_depth: int = 8
    forest_class_weighting: str = "balanced"
    gbdt_n_trees: int = 100
    gbdt_depth: int = 3
    gbdt_learning_rate: float = 0.1
    gbdt_l2_lambda: float = 1.0


ESTIMATORS = ("logistic", "forest", "gbdt")


@dataclass
class CellResult:
    estimator: str
    fraction: float
    instance: int
    metric: Optional[float]
    p_value: Optional[float]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _fit_named_estimator(name: str, params: SweepPipelineParams, seed: int):
    if name == "logistic":
        return lambda x, y: learners.fit_logistic(x, y)
    if name == "forest":
        return lambda x, y: learners.fit_forest(
            x, y,
            n_trees=params.forest_n_trees,
            max_depth=params.forest_depth,
            class_weighting=params.forest_class_weighting,
            seed=seed,
        )
    if name == "gbdt":
        return lambda x, y: learners.fit_boosted(
            x, y,
            n_trees=params.gbdt_n_trees,
            depth=params.gbdt_depth,
            learning_rate=params.gbdt_learning_rate,
            l2_lambda=params.gbdt_l2_lambda,
            seed=seed,
        )
    raise SynthError(f"unknown estimator: {name}")


def build_synthetic_features(
    dataset: StepDataset,
    messages: list[Message],
    split: CorpusSplit,
    params: SweepPipelineParams,
    seed: int,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Token streams -> LDA thetas + sentiment -> pooled, standardized
    matrices.  Returns (tree_matrix, capped_lr_matrix)."""
    stopwords = load_stopwords()
    lexicon = load_lexicon()
    train_ids = {m.id for m in split.train}

    streams = {m.id: TokenStream(m.id, m.body_raw.lower().split()) for m in messages}
    if params.collocations:
        phrase_model = detect_collocations(
            [streams[m.id] for m in split.train],
            min_count=params.colloc_min_count,
            score_threshold=params.colloc_threshold,
        )
        streams = {mid: phrase_model.apply_stream(s) for mid, s in streams.items()}

    vocab = build_vocabulary(
        [streams[mid] for mid in sorted(train_ids)],
        min_df=params.min_df,
        max_df_fraction=params.max_df_fraction,
    )
    ordered_ids = [m.id for m in messages]
    bows = [encode_bow(streams[mid], vocab) for mid in ordered_ids]
    train_bows = [encode_bow(streams[m.id], vocab) for m in split.train]

    model = train_lda(
        train_bows,
        vocab,
        LdaConfig(
            k=params.lda_k,
            alpha=params.lda_alpha,
            beta=params.lda_beta,
            burn_in=params.lda_burn_in,
            total_iterations=params.lda_iterations,
            seed=derive_seed(seed, "lda"),
        ),
    )
    thetas = infer_theta_batch(model, bows, fold_in_sweeps=params.fold_in_sweeps,
                               seed=derive_seed(seed, "fold-in"))

    by_id = {m.id: m for m in messages}
    vectors = {}
    for i, mid in enumerate(ordered_ids):
        senti = score_sentiment(by_id[mid].body_raw, lexicon)
        vectors[mid] = np.concatenate([thetas[i], np.asarray(senti.as_tuple())])

    columns = topic_feature_names(None, params.lda_k) + sentiment_feature_names()
    fm = assemble_features(dataset, vectors, columns)

    standardizer = fit_standardizer(fm)
    tree_matrix = apply_standardizer(standardizer, fm)
    lr_base = drop_redundant_simplex_columns(fm)
    capper = fit_tukey(lr_base)
    capped = apply_tukey(capper, lr_base)
    lr_standardizer = fit_standardizer(capped)
    lr_matrix = apply_standardizer(lr_standardizer, capped)
    return tree_matrix, lr_matrix


def run_synthetic_cell(
    config: SyntheticConfig,
    params: SweepPipelineParams,
    estimators: Sequence[str],
    seed: int,
) -> list[CellResult]:
    """Generate one dataset instance and evaluate every estimator on it."""
    config = replace(config, seed=derive_seed(seed, "generator"))
    n_pos = _round_half_down(config.positive_ratio * config.n_steps)
    n_event_needed = n_pos * math.ceil(config.fraction_event * config.messages_per_step)
    n_total = config.n_steps * config.messages_per_step

    event_pool = generate_event_related(config, n_event_needed) if n_event_needed else []
    background_pool = generate_background(config, n_total - n_event_needed)
    dataset, messages, split = bag_timesteps(
        background_pool,
        event_pool,
        config.fraction_event,
        config.n_steps,
        config.positive_ratio,
        config.messages_per_step,
        seed=derive_seed(seed, "bagging"),
    )
    tree_matrix, lr_matrix = build_synthetic_features(dataset, messages, split, params, seed)

    results = []
    for name in estimators:
        fm = lr_matrix if name == "logistic" else tree_matrix
        fit_fn = _fit_named_estimator(name, params, derive_seed(seed, name))
        try:
            model = fit_fn(fm.x_train(), fm.y_train())
            scores = learners.predict_proba(model, fm.x_test())
            metric = pr_auc_mean(fm.y_test(), scores)
            perm = permutation_test(
                fm.y_test(), scores,
                metric=pr_auc_mean,
                n_perm=params.n_permutations,
                seed=derive_seed(seed, name, "perm"),
            )
            results.append(CellResult(name, config.fraction_event, -1, metric, perm.p_value))
        except learners.LearnerError as exc:
            results.append(CellResult(name, config.fraction_event, -1, None, None, error=str(exc)))
    return results


# ---------------------------------------------------------------------------
# detectability sweep

@dataclass
class SweepSummaryRow:
    estimator: str
    fraction: float
    worst_p: Optional[float]
    metric_mean: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    n_failed: int


@dataclass
class SweepResult:
    cells: list[CellResult]
    summary: list[SweepSummaryRow]
    thresholds: dict[str, Optional[float]]  # estimator -> min significant fraction
    alpha: float

    def cells_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("estimator,f,instance,metric,p_value\n")
            for c in self.cells:
                metric = "" if c.metric is None else f"{c.metric:.10f}"
                p = "" if c.p_value is None else f"{c.p_value:.10f}"
                fh.write(f"{c.estimator},{c.fraction},{c.instance},{metric},{p}\n")

    def summary_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("estimator,f,worst_p,metric_mean,ci_low,ci_high,n_failed\n")
            for row in self.summary:
                cols = [
                    row.estimator,
                    str(row.fraction),
                    "" if row.worst_p is None else f"{row.worst_p:.10f}",
                    "" if row.metric_mean is None else f"{row.metric_mean:.10f}",
                    "" if row.ci_low is None else f"{row.ci_low:.10f}",
                    "" if row.ci_high is None else f"{row.ci_high:.10f}",
                    str(row.n_failed),
                ]
                fh.write(",".join(cols) + "\n")


def _sweep_cell_job(args) -> list[CellResult]:
    base_config, params, estimators, f, instance, master_seed = args
    config = replace(base_config, fraction_event=float(f))
    cell_seed = derive_seed(master_seed, "sweep", f, instance)
    results = run_synthetic_cell(config, params, estimators, cell_seed)
    for r in results:
        r.instance = instance
    return results


def detectability_sweep(
    base_config: SyntheticConfig,
    fractions: Sequence[float] = tuple(DEFAULT_FRACTION_GRID),
    n_instances: int = 15,
    estimators: Sequence[str] = ESTIMATORS,
    params: SweepPipelineParams = SweepPipelineParams(),
    alpha: float = 0.05,
    master_seed: int = 0,
    n_jobs: int = 1,
) -> SweepResult:
    """Sweep the event fraction grid; per (fraction, estimator) report the
    worst-case permutation p over instances, the metric mean with its 0.95
    t-interval, and the minimal significant fraction.  Cells run in
    parallel when ``n_jobs`` > 1; per-cell seeds keep the result identical
    either way."""
    if not fractions:
        raise SynthError("empty fraction grid")
    jobs = [
        (base_config, params, tuple(estimators), f, instance, master_seed)
        for f in fractions
        for instance in range(n_instances)
    ]
    cells: list[CellResult] = []
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for results in pool.map(_sweep_cell_job, jobs):
                cells.extend(results)
    else:
        for job in jobs:
            cells.extend(_sweep_cell_job(job))

    summary: list[SweepSummaryRow] = []
    thresholds: dict[str, Optional[float]] = {}
    for name in estimators:
        threshold = None
        for f in sorted(set(float(v) for v in fractions)):
            rows = [c for c in cells if c.estimator == name and c.fraction == f]
            ok = [c for c in rows if not c.failed]
            n_failed = len(rows) - len(ok)
            if not ok:
                summary.append(SweepSummaryRow(name, f, None, None, None, None, n_failed))
                continue
            worst_p = max(c.p_value for c in ok)
            metrics = np.array([c.metric for c in ok])
            mean = float(metrics.mean())
            if len(metrics) > 1:
                half = sps.t.ppf(0.975, len(metrics) - 1) * metrics.std(ddof=1) / math.sqrt(len(metrics))
            else:
                half = 0.0
            summary.append(
                SweepSummaryRow(name, f, worst_p, mean, mean - half, mean + half, n_failed)
            )
            if threshold is None and worst_p <= alpha:
                threshold = f
        thresholds[name] = threshold
    return SweepResult(cells=cells, summary=summary, thresholds=thresholds, alpha=alpha)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    return float(sps.spearmanr(x, y).statistic)
