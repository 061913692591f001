"""End-to-end experiment orchestration.

Each stage reads its inputs from, and persists its outputs to, a single
output directory, so every CLI subcommand can run standalone on the
artifacts of the previous stages.  All randomness fans out from the master
seed via :func:`microevents.seeds.derive_seed`; reports carry no wall-clock
fields, so a rerun with the same config is byte-identical (timings live in
``run_meta.json`` only).

Artifact hashing: JSON payloads embed ``config_hash``; internal CSV/TSV,
Markdown and SVG artifacts carry a hash comment line; interchange files
(canonical-jsonl messages, the events CSV) stay format-pure and are covered
by ``manifest.json``, which records the hash for every written file.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import time
from dataclasses import asdict, replace
from importlib import resources
from typing import Callable, Optional

import jsonschema
import numpy as np

from . import __version__, learners, plots
from .corpus import (
    chronological_split,
    filter_by_packages,
    import_messages,
    load_events_csv,
    parse_utc,
    union_corpus,
    write_events_csv,
    write_messages_jsonl,
)
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
from .reporting import (
    EstimatorResult,
    ExperimentReport,
    build_report,
    report_markdown,
)
from .seeds import derive_seed
from .sentiment import feature_names as sentiment_feature_names
from .sentiment import load_lexicon, score_sentiment
from .stats import cliffs_delta, lr_diagnostics, metric_report, permutation_test, pr_auc_mean
from .synthlab import (
    SweepPipelineParams,
    SyntheticConfig,
    bag_timesteps,
    detectability_sweep,
    generate_background,
    generate_event_related,
)
from .textprep import (
    build_vocabulary,
    detect_collocations,
    encode_bow,
    load_stopwords,
    strip_markup,
    tokenize_normalize,
)
from .timegrid import (
    StepDataset,
    assemble_dataset,
    build_calendar_week_steps,
    build_event_based_steps,
    read_steps_csv,
    write_steps_csv,
)
from .topics import (
    LdaConfig,
    coherence_cv,
    infer_theta_batch,
    select_k,
    top_words,
    train_lda,
    write_coherence_csv,
)

REFERENCE_THRESHOLD = 0.25  # threshold observed with the original generator; comparison only
DEFAULT_K_GRID = [6, 10, 14, 18, 22, 26, 30]  # default topic-count candidates


class RunnerError(RuntimeError):
    pass


class ConfigError(RunnerError):
    pass


# ---------------------------------------------------------------------------
# configuration

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "textprep": {
        "min_df": 5,
        "max_df_fraction": 0.5,
        "collocations": True,
        "colloc_min_count": 20,
        "colloc_threshold": 10.0,
        "stopwords_path": None,
    },
    "lda": {
        "k": 8,
        "alpha": None,
        "beta": 0.01,
        "burn_in": 200,
        "total_iterations": 500,
        "fold_in_sweeps": 30,
    },
    "sentiment": {"lexicon_path": None},
    "tuning": {"cv_folds": 2, "rfecv_step": 1, "grids": {}},
    "estimators": {
        "logistic": {"enabled": True},
        "forest": {"enabled": True, "n_trees": 100, "max_depth": 8, "class_weighting": "balanced"},
        "gbdt": {
            "enabled": True,
            "n_trees": 100,
            "depth": 3,
            "learning_rate": 0.1,
            "l2_lambda": 1.0,
            "preserve_input_order": False,
        },
    },
    "evaluation": {"n_permutations": 1000, "alpha": 0.05, "family": "default"},
    "report": {"formats": ["json", "markdown"]},
}

ENV_PREFIX = "MICROEVENTS_"


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_env_overrides(config: dict, env: dict) -> dict:
    """``MICROEVENTS_LDA__K=12`` sets config["lda"]["k"] = 12; values parse
    as JSON with a plain-string fallback."""
    out = copy.deepcopy(config)
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in name[len(ENV_PREFIX):].split("__") if p]
        if not path:
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"env override {name} collides with a non-object key")
        node[path[-1]] = value
    return out


def validate_config(config: dict) -> None:
    schema = json.loads(
        resources.files("microevents.assets").joinpath("config_schema.json").read_text("utf-8")
    )
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} (at {'/'.join(map(str, exc.path))})") from exc
    lda = config.get("lda", {})
    if "k" in lda and "select" in lda:
        raise ConfigError("invalid config: lda.k and lda.select are mutually exclusive")


def load_config(path: Optional[str] = None, env: Optional[dict] = None, overrides: Optional[dict] = None) -> dict:
    user: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    config = _deep_merge(DEFAULT_CONFIG, user)
    if overrides:
        config = _deep_merge(config, overrides)
    config = _apply_env_overrides(config, env if env is not None else dict(os.environ))
    if "select" in config.get("lda", {}) and "k" in config["lda"]:
        # a user-supplied selection grid replaces the default fixed k
        if "lda" not in user or "k" not in user.get("lda", {}):
            config["lda"].pop("k")
    validate_config(config)
    return config


def config_hash(config: dict) -> str:
    """Identity hash of the resolved config.

    Report formats are excluded: they choose which report files to render,
    not what any artifact contains, so re-rendering with another --format
    must not read as a different experiment.
    """
    hashable = copy.deepcopy(config)
    hashable.get("report", {}).pop("formats", None)
    canonical = json.dumps(hashable, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(canonical).hexdigest()[:16]


# ---------------------------------------------------------------------------
# output directory with lock, manifest and hash stamping

class OutputDir:
    def __init__(self, root: str, config: dict):
        self.root = root
        self.config = config
        self.hash = config_hash(config)
        os.makedirs(root, exist_ok=True)
        self._lock_fd: Optional[int] = None

    # -- locking (at most one writer per output directory)

    def __enter__(self) -> "OutputDir":
        lock_path = os.path.join(self.root, ".lock")
        try:
            self._lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(self._lock_fd, str(os.getpid()).encode())
        except FileExistsError:
            raise RunnerError(f"output directory is locked by another run: {lock_path}")
        self._check_or_write_config()
        return self

    def __exit__(self, *exc_info) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            os.unlink(os.path.join(self.root, ".lock"))
            self._lock_fd = None

    def _check_or_write_config(self) -> None:
        path = os.path.join(self.root, "resolved_config.json")
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                stored = json.load(fh)
            if stored.get("config_hash") != self.hash:
                raise RunnerError(
                    f"config hash mismatch: output dir was created with "
                    f"{stored.get('config_hash')}, current config is {self.hash}"
                )
        else:
            payload = {"config_hash": self.hash, "config": self.config}
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(payload, fh, indent=1, sort_keys=True)
                fh.write("\n")

    # -- writing

    def path(self, *parts: str) -> str:
        full = os.path.join(self.root, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def _register(self, relpath: str) -> None:
        manifest_path = os.path.join(self.root, "manifest.json")
        manifest = {"config_hash": self.hash, "files": {}}
        if os.path.exists(manifest_path):
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        manifest["config_hash"] = self.hash
        manifest["files"][relpath] = self.hash
        with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_text(self, relpath: str, content: str, stamp: bool = True) -> str:
        full = self.path(relpath)
        if stamp:
            if relpath.endswith((".csv", ".tsv")):
                content = f"# config_hash={self.hash}\n{content}"
            elif relpath.endswith((".md",)):
                content = f"<!-- config_hash={self.hash} -->\n{content}"
            elif relpath.endswith(".svg"):
                content = f"<!-- config_hash={self.hash} -->\n{content}"
        with open(full, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self._register(relpath)
        return full

    def stamp_existing(self, relpath: str) -> None:
        """Prepend the hash comment to a file a helper already wrote."""
        full = os.path.join(self.root, relpath)
        with open(full, "r", encoding="utf-8") as fh:
            content = fh.read()
        self.write_text(relpath, content)

    def write_json(self, relpath: str, payload: dict) -> str:
        full = self.path(relpath)
        stamped = {"config_hash": self.hash, **payload}
        with open(full, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(stamped, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self._register(relpath)
        return full

    def register_file(self, relpath: str) -> None:
        self._register(relpath)

    def read_json(self, relpath: str) -> dict:
        full = os.path.join(self.root, relpath)
        if not os.path.exists(full):
            raise RunnerError(f"missing artifact: {relpath} (run the earlier stage first)")
        with open(full, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def require(self, relpath: str) -> str:
        full = os.path.join(self.root, relpath)
        if not os.path.exists(full):
            raise RunnerError(f"missing artifact: {relpath} (run the earlier stage first)")
        return full


# ---------------------------------------------------------------------------
# pipeline stages

def _dataset_config(config: dict) -> dict:
    dataset = config.get("dataset")
    if not dataset:
        raise ConfigError("config has no dataset section")
    for key in ("messages", "events"):
        if not os.path.exists(dataset[key]):
            raise RunnerError(f"missing input: {key} ({dataset[key]})")
    return dataset


def stage_ingest(config: dict, out: OutputDir) -> None:
    """Import messages and events, filter by package, split chronologically."""
    dataset = _dataset_config(config)
    result = import_messages(dataset["messages"], dataset.get("format", "canonical-jsonl"))
    events = load_events_csv(dataset["events"])
    per_package = filter_by_packages(result.messages, dataset["packages"])
    merged = union_corpus(per_package)
    if not merged:
        raise RunnerError("no messages matched the configured packages")
    packages = set(dataset["packages"])
    events = [e for e in events if e.package in packages]
    split = chronological_split(merged, dataset.get("train_fraction", 0.6))

    write_messages_jsonl(merged, out.path("ingest", "messages.jsonl"))
    out.register_file("ingest/messages.jsonl")
    write_events_csv(events, out.path("ingest", "events.csv"))
    out.register_file("ingest/events.csv")
    out.write_json(
        "ingest/split.json",
        {
            "split_instant": split.split_instant.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "n_train": len(split.train),
            "n_test": len(split.test),
            "n_skipped_rows": result.n_skipped,
            "import_errors": result.errors[:100],
            "per_package_counts": {p: len(v) for p, v in per_package.items()},
        },
    )


def _load_ingested(out: OutputDir):
    messages = import_messages(out.require("ingest/messages.jsonl"), "canonical-jsonl").messages
    events = load_events_csv(out.require("ingest/events.csv"))
    split_info = out.read_json("ingest/split.json")
    # rebuild the split from the persisted counts so the boundary cannot drift
    fraction = split_info["n_train"] / (split_info["n_train"] + split_info["n_test"])
    split = chronological_split(messages, fraction)
    if split.split_instant != parse_utc(split_info["split_instant"]):
        raise RunnerError("split boundary drifted from the persisted ingest artifact")
    return messages, events, split


def stage_timesteps(config: dict, out: OutputDir) -> None:
    dataset = config["dataset"]
    messages, events, split = _load_ingested(out)
    kind = dataset["event_kind"]
    design = dataset["design"]
    if design == "calendar_week":
        steps = build_calendar_week_steps(messages, events, kind)
    else:
        steps = build_event_based_steps(messages, events, kind)
    name = f"{'+'.join(dataset['packages'])}-{kind}-{design}"
    step_dataset = assemble_dataset(steps, split, name=name, target_kind=kind)

    write_steps_csv(
        step_dataset.steps,
        out.path("timesteps", "steps.csv"),
        out.path("timesteps", "steps_messages.json"),
    )
    out.register_file("timesteps/steps.csv")
    out.register_file("timesteps/steps_messages.json")
    out.write_json(
        "timesteps/dataset.json",
        {
            "name": name,
            "target_kind": kind,
            "design": design,
            "split_instant": split.split_instant.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "n_train_steps": len(step_dataset.train_steps),
            "n_test_steps": len(step_dataset.test_steps),
            "dropped_straddlers": step_dataset.dropped_straddlers,
            "dropped_empty": step_dataset.dropped_empty,
            "train_step_ids": [s.step_id for s in step_dataset.train_steps],
        },
    )


def _load_step_dataset(out: OutputDir) -> StepDataset:
    meta = out.read_json("timesteps/dataset.json")
    steps = read_steps_csv(
        out.require("timesteps/steps.csv"), out.require("timesteps/steps_messages.json")
    )
    train_ids = set(meta["train_step_ids"])
    return StepDataset(
        name=meta["name"],
        target_kind=meta["target_kind"],
        design=meta["design"],
        train_steps=[s for s in steps if s.step_id in train_ids],
        test_steps=[s for s in steps if s.step_id not in train_ids],
        split_instant=parse_utc(meta["split_instant"]),
    )


def stage_features(config: dict, out: OutputDir) -> None:
    """Token streams -> (optional) collocations -> vocabulary -> LDA thetas
    plus sentiment -> pooled + standardized matrices (tree and capped LR)."""
    messages, events, split = _load_ingested(out)
    dataset = _load_step_dataset(out)
    tp = config["textprep"]
    seed = config["seed"]

    stopwords = load_stopwords(tp.get("stopwords_path"))
    lexicon = load_lexicon(config["sentiment"].get("lexicon_path"))

    clean = {m.id: strip_markup(m.body_raw) for m in messages}
    streams = {m.id: tokenize_normalize(clean[m.id], stopwords, m.id) for m in messages}
    train_ids = [m.id for m in split.train]
    if tp["collocations"]:
        phrase_model = detect_collocations(
            [streams[mid] for mid in train_ids],
            min_count=tp["colloc_min_count"],
            score_threshold=tp["colloc_threshold"],
        )
        streams = {mid: phrase_model.apply_stream(s) for mid, s in streams.items()}
    vocab = build_vocabulary(
        [streams[mid] for mid in train_ids],
        min_df=tp["min_df"],
        max_df_fraction=tp["max_df_fraction"],
    )
    vocab.save_tsv(out.path("features", "vocab.tsv"))
    out.register_file("features/vocab.tsv")

    lda_cfg = config["lda"]
    train_bows = [encode_bow(streams[mid], vocab) for mid in train_ids]
    train_streams = [streams[mid] for mid in train_ids]
    if "select" in lda_cfg:
        sel = lda_cfg["select"]
        grid = sel.get("grid", DEFAULT_K_GRID)
        selection = select_k(
            train_bows,
            vocab,
            train_streams,
            grid,
            n_seeds=sel.get("n_seeds", 3),
            base_config=LdaConfig(
                k=grid[0],
                alpha=lda_cfg["alpha"],
                beta=lda_cfg["beta"],
                burn_in=lda_cfg["burn_in"],
                total_iterations=lda_cfg["total_iterations"],
                seed=derive_seed(seed, "lda-select"),
            ),
            top_n=sel.get("top_n", 10),
            window=sel.get("window", 110),
        )
        chosen_k = selection.chosen_k
        write_coherence_csv(selection, out.path("features", "coherence.csv"))
        out.stamp_existing("features/coherence.csv")
    else:
        chosen_k = lda_cfg["k"]

    model = train_lda(
        train_bows,
        vocab,
        LdaConfig(
            k=chosen_k,
            alpha=lda_cfg["alpha"],
            beta=lda_cfg["beta"],
            burn_in=lda_cfg["burn_in"],
            total_iterations=lda_cfg["total_iterations"],
            seed=derive_seed(seed, "lda"),
        ),
    )
    model.save(out.path("features", "lda_model.json"), out.path("features", "lda_model.npz"))
    out.register_file("features/lda_model.json")
    out.register_file("features/lda_model.npz")
    out.write_json(
        "features/topic_top_words.json",
        {str(k): [[t, p] for t, p in top_words(model, k, 10)] for k in range(model.k)},
    )

    coherence = coherence_cv(model, train_streams)
    out.write_json(
        "features/coherence_final.json",
        {"mean": coherence.mean, "per_topic": coherence.per_topic, "flags": coherence.flags},
    )

    ordered_ids = [m.id for m in messages]
    bows = [encode_bow(streams[mid], vocab) for mid in ordered_ids]
    thetas = infer_theta_batch(
        model, bows, fold_in_sweeps=lda_cfg["fold_in_sweeps"], seed=derive_seed(seed, "fold-in")
    )
    vectors = {}
    for i, mid in enumerate(ordered_ids):
        senti = score_sentiment(clean[mid], lexicon)
        vectors[mid] = np.concatenate([thetas[i], np.asarray(senti.as_tuple())])
    columns = topic_feature_names(None, model.k) + sentiment_feature_names()
    fm = assemble_features(dataset, vectors, columns)

    standardizer = fit_standardizer(fm)
    tree_matrix = apply_standardizer(standardizer, fm)
    lr_base = drop_redundant_simplex_columns(fm)
    capper = fit_tukey(lr_base)
    capped = apply_tukey(capper, lr_base)
    lr_matrix = apply_standardizer(fit_standardizer(capped), capped)

    for name, matrix in (("features_tree.csv", tree_matrix), ("features_lr.csv", lr_matrix)):
        matrix.to_csv(out.path("features", name))
        out.stamp_existing(f"features/{name}")
    if standardizer.dropped:
        out.write_json("features/dropped_columns.json", {"dropped": standardizer.dropped})


ESTIMATOR_NAMES = ("logistic", "forest", "gbdt")


def _estimator_builder(name: str, config: dict, seed: int) -> Callable[..., Callable]:
    conf = config["estimators"][name]

    if name == "logistic":
        def build(**params):
            return lambda x, y: learners.fit_logistic(x, y)
        return build
    if name == "forest":
        def build(**params):
            merged = {
                "n_trees": conf["n_trees"],
                "max_depth": conf["max_depth"],
                "class_weighting": conf["class_weighting"],
                **params,
            }
            return lambda x, y: learners.fit_forest(x, y, seed=seed, **merged)
        return build
    if name == "gbdt":
        def build(**params):
            merged = {
                "n_trees": conf["n_trees"],
                "depth": conf["depth"],
                "learning_rate": conf["learning_rate"],
                "l2_lambda": conf["l2_lambda"],
                "preserve_input_order": conf.get("preserve_input_order", False),
                **params,
            }
            return lambda x, y: learners.fit_boosted(x, y, seed=seed, **merged)
        return build
    raise ConfigError(f"unknown estimator: {name}")


def _matrix_for(name: str, out: OutputDir) -> FeatureMatrix:
    artifact = "features/features_lr.csv" if name == "logistic" else "features/features_tree.csv"
    return FeatureMatrix.from_csv(out.require(artifact))


def _enabled_estimators(config: dict) -> list[str]:
    return [n for n in ESTIMATOR_NAMES if config["estimators"].get(n, {}).get("enabled")]


def stage_train(config: dict, out: OutputDir) -> None:
    """Feature selection (RFECV), optional grid search, final fits."""
    from .tuning import grid_search, rfecv, time_series_split

    seed = config["seed"]
    tuning_cfg = config["tuning"]
    for name in _enabled_estimators(config):
        fm = _matrix_for(name, out)
        x_train, y_train = fm.x_train(), fm.y_train()
        plan = time_series_split(x_train.shape[0], tuning_cfg["cv_folds"])
        build = _estimator_builder(name, config, derive_seed(seed, name))

        step_conf = tuning_cfg["rfecv_step"]
        step = step_conf.get(name, 0) if isinstance(step_conf, dict) else step_conf
        if step > 0:
            selection = rfecv(
                build(), x_train, y_train, fm.columns,
                step=int(step) if float(step) >= 1 else float(step),
                cv_plan=plan, metric=pr_auc_mean,
            )
            selected = selection.selected
            curve_lines = ["n_features,metric"] + [f"{n},{s:.10f}" for n, s in selection.curve]
            out.write_text(f"train/selection_{name}.csv", "\n".join(curve_lines) + "\n")
        else:
            selected = list(fm.columns)
            selection = None

        sub = fm.select(selected)
        tuned_params: dict = {}
        grid = tuning_cfg.get("grids", {}).get(name)
        if grid:
            result = grid_search(build, grid, sub.x_train(), sub.y_train(), cv_plan=plan, metric=pr_auc_mean)
            tuned_params = result.best_params
            result.table_csv(out.path("train", f"grid_{name}.csv"))
            out.stamp_existing(f"train/grid_{name}.csv")

        model = build(**tuned_params)(sub.x_train(), sub.y_train())
        payload = learners.serialize_model(model)
        payload["selected_features"] = selected
        payload["tuned_params"] = tuned_params
        payload["selection_curve"] = [[n, s] for n, s in (selection.curve if selection else [])]
        out.write_json(f"train/model_{name}.json", payload)


def stage_evaluate(config: dict, out: OutputDir) -> None:
    """Test-set scores, metric reports and permutation tests per estimator."""
    seed = config["seed"]
    evaluation = config["evaluation"]
    results = {}
    for name in _enabled_estimators(config):
        payload = out.read_json(f"train/model_{name}.json")
        model = learners.deserialize_model(payload)
        fm = _matrix_for(name, out).select(payload["selected_features"])
        scores = learners.predict_proba(model, fm.x_test())
        report = metric_report(fm.y_test(), scores)
        perm = permutation_test(
            fm.y_test(), scores,
            metric=pr_auc_mean,
            n_perm=evaluation["n_permutations"],
            seed=derive_seed(seed, name, "permutation"),
        )
        drops = learners.permutation_importance(
            model, fm.x_test(), fm.y_test(), pr_auc_mean,
            n_repeats=20, seed=derive_seed(seed, name, "perm-importance"),
        )
        results[name] = {
            "metrics": report.as_dict(),
            "permutation_p": perm.p_value,
            "observed_metric": perm.observed,
            "selected_features": payload["selected_features"],
            "tuned_params": payload["tuned_params"],
            "selection_curve": payload.get("selection_curve", []),
            "permutation_importance": {c: float(d) for c, d in zip(fm.columns, drops)},
        }
        score_lines = ["step_id,label,score"] + [
            f"{sid},{label},{s:.10f}"
            for sid, label, s in zip(
                [i for i, p in zip(fm.step_ids, fm.partition) if p == "test"],
                fm.y_test(),
                scores,
            )
        ]
        out.write_text(f"evaluate/scores_{name}.csv", "\n".join(score_lines) + "\n")
    out.write_json("evaluate/results.json", {"results": results})


def stage_diagnose(config: dict, out: OutputDir) -> None:
    """LR diagnostic battery plus per-feature Cliff's delta effect sizes."""
    evaluation = config["evaluation"]
    fm_lr = FeatureMatrix.from_csv(out.require("features/features_lr.csv"))

    effect_sizes = []
    x_train, y_train = fm_lr.x_train(), fm_lr.y_train()
    m = len(fm_lr.columns)
    for j, column in enumerate(fm_lr.columns):
        effect_sizes.append(
            cliffs_delta(
                x_train[y_train == 1, j], x_train[y_train == 0, j],
                alpha=1.0 - 0.95, m_comparisons=m, feature=column,
            )
        )
    out.write_json("diagnose/effect_sizes.json", {"effect_sizes": [asdict(e) for e in effect_sizes]})

    if not config["estimators"].get("logistic", {}).get("enabled"):
        return
    payload = out.read_json("train/model_logistic.json")
    selected = payload["selected_features"]
    sub = fm_lr.select(selected)
    model = learners.fit_logistic(sub.x_train(), sub.y_train())
    null_model = learners.fit_logistic(np.empty((len(sub.y_train()), 0)), sub.y_train())
    diag = lr_diagnostics(
        model, null_model, sub.x_train(), sub.y_train(),
        m_corrections=len(selected), alpha=evaluation["alpha"], feature_names=selected,
    )
    out.write_json("diagnose/diagnostics.json", {"diagnostics": asdict(diag)})


def _diag_from_payload(payload: dict):
    from .stats import CoefficientRow, LrDiagnostics

    diag = payload["diagnostics"]
    diag["coefficients"] = [CoefficientRow(**row) for row in diag["coefficients"]]
    return LrDiagnostics(**diag)


def stage_report(config: dict, out: OutputDir) -> ExperimentReport:
    from .stats import EffectSize

    meta = out.read_json("timesteps/dataset.json")
    evaluation = config["evaluation"]
    results = out.read_json("evaluate/results.json")["results"]

    estimator_results = []
    for name in _enabled_estimators(config):
        r = results[name]
        from .stats import MetricReport

        metrics = MetricReport(
            pr_auc_mean=r["metrics"]["pr_auc_mean"],
            roc_auc=r["metrics"]["roc_auc"],
            f1_mean=r["metrics"]["f1_mean"],
            confusion=np.asarray(r["metrics"]["confusion"]),
            no_information_rate=r["metrics"]["no_information_rate"],
        )
        estimator_results.append(
            EstimatorResult(
                estimator=name,
                metrics=metrics,
                permutation_p=r["permutation_p"],
                selected_features=r["selected_features"],
                tuned_params=r["tuned_params"],
                selection_curve=[(n, s) for n, s in r["selection_curve"]],
                permutation_importance=r["permutation_importance"],
            )
        )

    diag = None
    if os.path.exists(os.path.join(out.root, "diagnose/diagnostics.json")):
        diag = _diag_from_payload(out.read_json("diagnose/diagnostics.json"))
    effect_sizes = []
    if os.path.exists(os.path.join(out.root, "diagnose/effect_sizes.json")):
        effect_sizes = [
            EffectSize(**e) for e in out.read_json("diagnose/effect_sizes.json")["effect_sizes"]
        ]

    report = build_report(
        dataset_name=meta["name"],
        family=evaluation["family"],
        alpha=evaluation["alpha"],
        estimator_results=estimator_results,
        lr_diagnostics=diag,
        effect_sizes=effect_sizes,
        provenance={
            "config_hash": out.hash,
            "seed": config["seed"],
            "n_permutations": evaluation["n_permutations"],
            "dataset": meta["name"],
            "version": __version__,
        },
    )

    formats = config["report"]["formats"]
    if "json" in formats:
        out.write_json("report/report.json", report.as_dict())
    if "markdown" in formats:
        out.write_text("report/report.md", report_markdown(report))
    if "svg" in formats:
        if diag is not None:
            rows = [
                (row.predictor, row.odds_ratio, row.or_ci_low, row.or_ci_high)
                for row in diag.coefficients
            ]
            out.write_text(
                "report/odds_ratios.svg",
                plots.forest_plot_svg(rows, "Odds ratios (corrected CIs)", reference=1.0, log_x=True),
            )
        if effect_sizes:
            rows = [(e.feature, e.delta, e.ci_low, e.ci_high) for e in effect_sizes]
            out.write_text(
                "report/effect_sizes.svg",
                plots.forest_plot_svg(rows, "Cliff's delta (corrected CIs)", reference=0.0, log_x=False),
            )
        curves = {
            r.estimator: [(float(n), float(s)) for n, s in r.selection_curve]
            for r in estimator_results
            if r.selection_curve
        }
        if curves:
            out.write_text(
                "report/selection_curves.svg",
                plots.curve_svg(curves, "RFECV metric curves", "subset size", "mean PR-AUC"),
            )
    return report


PIPELINE_STAGES: list[tuple[str, Callable[[dict, OutputDir], object]]] = [
    ("ingest", stage_ingest),
    ("timesteps", stage_timesteps),
    ("features", stage_features),
    ("train", stage_train),
    ("evaluate", stage_evaluate),
    ("diagnose", stage_diagnose),
    ("report", stage_report),
]


def run_stage(stage_name: str, config: dict, out_dir: str):
    stages = dict(PIPELINE_STAGES)
    if stage_name not in stages:
        raise ConfigError(f"unknown stage: {stage_name}")
    with OutputDir(out_dir, config) as out:
        started = time.time()
        try:
            result = stages[stage_name](config, out)
        except Exception as exc:
            raise RunnerError(f"stage '{stage_name}' failed: {exc}") from exc
        _append_meta(out, stage_name, time.time() - started)
        return result


def run_pipeline(config: dict, out_dir: str) -> ExperimentReport:
    """Execute every stage in order; artifacts land in ``out_dir``."""
    report = None
    with OutputDir(out_dir, config) as out:
        for stage_name, fn in PIPELINE_STAGES:
            started = time.time()
            try:
                result = fn(config, out)
            except Exception as exc:
                raise RunnerError(f"stage '{stage_name}' failed: {exc}") from exc
            _append_meta(out, stage_name, time.time() - started)
            if stage_name == "report":
                report = result
    assert report is not None
    return report


def _append_meta(out: OutputDir, stage_name: str, elapsed: float) -> None:
    # wall-clock timings are quarantined here so reports stay byte-identical
    meta_path = os.path.join(out.root, "run_meta.json")
    meta = {"stages": {}}
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    meta["stages"][stage_name] = {"elapsed_seconds": round(elapsed, 3)}
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# synthetic data commands

def _synthetic_config(config: dict) -> tuple[SyntheticConfig, SweepPipelineParams, dict]:
    synth = config.get("synthetic", {})
    base_fields = {
        k: synth[k]
        for k in (
            "n_steps", "messages_per_step", "positive_ratio", "v_background",
            "n_background_topics", "doc_topic_alpha", "topic_word_concentration",
            "length_mean", "length_min", "active_phrases",
            "min_phrases_per_message", "max_phrases_per_message",
        )
        if k in synth
    }
    base = SyntheticConfig(seed=config["seed"], **base_fields)
    params = SweepPipelineParams(**synth.get("pipeline", {}))
    return base, params, synth


def run_synth(config: dict, out_dir: str) -> None:
    """Generate one synthetic dataset instance and persist it."""
    base, _, synth = _synthetic_config(config)
    fraction = synth.get("fractions", [0.25])[0]
    base = replace(base, fraction_event=float(fraction), seed=derive_seed(config["seed"], "synth"))
    base.validate()
    import math as _math

    from .synthlab import _round_half_down

    n_pos = _round_half_down(base.positive_ratio * base.n_steps)
    n_event = n_pos * _math.ceil(base.fraction_event * base.messages_per_step)
    n_total = base.n_steps * base.messages_per_step
    event_pool = generate_event_related(base, n_event) if n_event else []
    background = generate_background(base, n_total - n_event)
    dataset, messages, _split = bag_timesteps(
        background, event_pool, base.fraction_event, base.n_steps,
        base.positive_ratio, base.messages_per_step, seed=derive_seed(config["seed"], "synth-bag"),
    )
    with OutputDir(out_dir, config) as out:
        write_messages_jsonl(messages, out.path("synth", "messages.jsonl"))
        out.register_file("synth/messages.jsonl")
        write_steps_csv(
            dataset.steps, out.path("synth", "steps.csv"), out.path("synth", "steps_messages.json")
        )
        out.register_file("synth/steps.csv")
        out.register_file("synth/steps_messages.json")
        out.write_json(
            "synth/dataset.json",
            {
                "name": dataset.name,
                "fraction_event": base.fraction_event,
                "n_train_steps": len(dataset.train_steps),
                "n_test_steps": len(dataset.test_steps),
            },
        )


def run_synth_sweep(config: dict, out_dir: str, n_jobs: int = 1) -> dict:
    """Drive the detectability sweep and persist curves plus the summary."""
    base, params, synth = _synthetic_config(config)
    fractions = synth.get("fractions")
    if not fractions:
        raise ConfigError("synthetic.fractions must be a nonempty grid")
    estimators = synth.get("estimators", ["logistic", "forest", "gbdt"])
    n_instances = synth.get("n_instances", 15)
    alpha = config["evaluation"]["alpha"]

    sweep = detectability_sweep(
        base,
        fractions=fractions,
        n_instances=n_instances,
        estimators=estimators,
        params=params,
        alpha=alpha,
        master_seed=config["seed"],
        n_jobs=n_jobs,
    )
    with OutputDir(out_dir, config) as out:
        sweep.cells_csv(out.path("sweep", "cells.csv"))
        out.stamp_existing("sweep/cells.csv")
        sweep.summary_csv(out.path("sweep", "summary.csv"))
        out.stamp_existing("sweep/summary.csv")

        payload = {
            "alpha": alpha,
            "thresholds": sweep.thresholds,
            "reference_comparison": {
                "reference_threshold": REFERENCE_THRESHOLD,
                "band": 0.10,
                "note": (
                    "comparison target only: the bundled generator replaces the "
                    "original one, so thresholds are not expected to coincide"
                ),
            },
        }
        out.write_json("sweep/sweep.json", payload)
        if "svg" in config["report"]["formats"]:
            series: dict = {}
            for row in sweep.summary:
                if row.metric_mean is None:
                    continue
                series.setdefault(row.estimator, []).append(
                    (row.fraction, row.metric_mean, row.ci_low, row.ci_high, row.worst_p)
                )
            if series:
                out.write_text(
                    "sweep/sweep_scatter.svg",
                    plots.ci_scatter_svg(
                        series,
                        "Detectability sweep (filled = significant worst case)",
                        "event-related message fraction",
                        "mean test PR-AUC",
                        alpha=alpha,
                    ),
                )
    return payload
