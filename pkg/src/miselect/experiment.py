"""Declarative experiment orchestration.

One JSON config describes the full pipeline: load or generate data, corrupt
the training split, embed, score, select, train, evaluate. Outputs are
machine-readable (JSON report, per-sample score CSV, accuracy-curve CSV)
and byte-identical across reruns with the same config and seed, including
under different worker-thread counts. Stage seeds are derived from the
master seed by hashing the stage name with SHA-256, so each stage is
independently reproducible.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .corruption import (
    KIND_AFFINE_MILD,
    KIND_AFFINE_STRONG,
    KIND_GAUSSIAN,
    KIND_LABEL_FLIP,
    AffineParams,
    CorruptionSpec,
    apply_corruption,
)
from .data import (
    LabeledDataset,
    SyntheticSpec,
    generate_pattern_images,
    generate_synthetic,
    load_idx,
    train_test_split,
)
from .embedding import fit_pca, transform
from .errors import ConfigError, MiselectError, StageError
from .ksg import (
    VARIANT_DISCRETE,
    VARIANT_ONEHOT,
    dataset_content_hash,
    load_scores,
    per_class_summary,
    save_scores,
    score_dataset,
)
from .logreg import TrainConfig, evaluate, train
from .selection import SelectionPlan, save_selection, select

CONFIG_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1

_STAGES = ("score", "select", "train", "full")
_CORRUPTION_KINDS = (KIND_LABEL_FLIP, KIND_GAUSSIAN, KIND_AFFINE_STRONG, KIND_AFFINE_MILD)

SCORES_CSV_COLUMNS = (
    "index", "label", "original_label", "provenance",
    "local_mi", "n_x", "n_y", "k_effective", "degenerate",
)
ACCURACY_CSV_COLUMNS = ("strategy", "ratio", "accuracy")


def stage_seed(master_seed, stage):
    """Derive a stage seed: first 8 bytes of SHA-256("<stage>\\x00<seed>")."""
    digest = hashlib.sha256(f"{stage}\x00{int(master_seed)}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def load_config(path):
    with open(path) as f:
        return json.load(f)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate_config(config):
    """Range and consistency checks; returns a list of violation strings.

    Accepts a config dict or a path to a JSON file. Performs no side
    effects beyond reading referenced files' existence.
    """
    if isinstance(config, (str, Path)):
        try:
            config = load_config(config)
        except (OSError, json.JSONDecodeError) as exc:
            return [f"config: cannot parse ({exc})"]
    bad = []

    if config.get("schema_version") != CONFIG_SCHEMA_VERSION:
        bad.append(f"schema_version: must be {CONFIG_SCHEMA_VERSION}")
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        bad.append("seed: must be a non-negative integer")
    out_dir = config.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        bad.append("output_dir: must be a string path when given")

    ds = config.get("dataset")
    if not isinstance(ds, dict):
        bad.append("dataset: required section missing")
    else:
        kind = ds.get("type")
        if kind == "idx":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                path = ds.get(key)
                if not isinstance(path, str):
                    bad.append(f"dataset.{key}: required path missing")
                elif not Path(path).exists():
                    bad.append(f"dataset.{key}: file not found: {path}")
        elif kind in ("synthetic", "synthetic_images"):
            for key in ("num_classes", "per_class_count"):
                if not isinstance(ds.get(key), int) or ds.get(key, 0) < 1:
                    bad.append(f"dataset.{key}: must be a positive integer")
            frac = ds.get("test_fraction", 0.25)
            if not _is_num(frac) or not (0.0 < frac < 1.0):
                bad.append("dataset.test_fraction: must lie in (0, 1)")
            if kind == "synthetic":
                if not isinstance(ds.get("dim"), int) or ds.get("dim", 0) < 1:
                    bad.append("dataset.dim: must be a positive integer")
                if not _is_num(ds.get("class_stddev")) or ds.get("class_stddev", -1) < 0:
                    bad.append("dataset.class_stddev: must be a non-negative number")
                has_sep = _is_num(ds.get("class_separation")) and ds.get("class_separation", 0) > 0
                has_means = isinstance(ds.get("class_means"), list)
                if not (has_sep or has_means):
                    bad.append("dataset: need class_separation > 0 or explicit class_means")
            else:
                if not isinstance(ds.get("num_classes"), int) or not (
                    1 <= ds.get("num_classes", 0) <= 6
                ):
                    bad.append("dataset.num_classes: pattern images support 1..6 classes")
                for key in ("height", "width"):
                    if not isinstance(ds.get(key, 12), int) or ds.get(key, 12) < 4:
                        bad.append(f"dataset.{key}: must be an integer >= 4")
        else:
            bad.append("dataset.type: must be one of idx, synthetic, synthetic_images")

    emb = config.get("embedding", {})
    if not isinstance(emb, dict):
        bad.append("embedding: must be a mapping")
    else:
        if not isinstance(emb.get("dim", 16), int) or emb.get("dim", 16) < 1:
            bad.append("embedding.dim: must be a positive integer")
        if not isinstance(emb.get("whiten", False), bool):
            bad.append("embedding.whiten: must be a boolean")

    for i, cor in enumerate(config.get("corruptions", [])):
        if not isinstance(cor, dict) or cor.get("kind") not in _CORRUPTION_KINDS:
            bad.append(f"corruptions[{i}].kind: must be one of {_CORRUPTION_KINDS}")
            continue
        kind = cor["kind"]
        if kind == KIND_LABEL_FLIP:
            rate = cor.get("rate")
            if not _is_num(rate) or not (0.0 <= rate <= 1.0):
                bad.append(f"corruptions[{i}].rate: must lie in [0, 1]")
        else:
            frac = cor.get("fraction")
            if not _is_num(frac) or not (0.0 <= frac <= 1.0):
                bad.append(f"corruptions[{i}].fraction: must lie in [0, 1]")
        if kind == KIND_GAUSSIAN:
            nf = cor.get("noise_factor")
            if not _is_num(nf) or nf < 0:
                bad.append(f"corruptions[{i}].noise_factor: must be non-negative")

    est = config.get("estimator", {})
    if not isinstance(est, dict):
        bad.append("estimator: must be a mapping")
    else:
        if est.get("variant", VARIANT_DISCRETE) not in (VARIANT_DISCRETE, VARIANT_ONEHOT):
            bad.append("estimator.variant: must be discrete_label or onehot_continuous")
        if not isinstance(est.get("k", 3), int) or est.get("k", 3) < 1:
            bad.append("estimator.k: must be a positive integer")
        if not isinstance(est.get("strict", True), bool):
            bad.append("estimator.strict: must be a boolean")
        scale = est.get("label_scale")
        if scale is not None and (not _is_num(scale) or scale <= 0):
            bad.append("estimator.label_scale: must be positive when given")

    sel = config.get("selection")
    if not isinstance(sel, dict):
        bad.append("selection: required section missing")
    else:
        plans = sel.get("plans")
        if not isinstance(plans, list) or not plans:
            bad.append("selection.plans: need at least one plan")
        else:
            for i, plan in enumerate(plans):
                if not isinstance(plan, dict) or plan.get("scope") not in ("global", "class_wise"):
                    bad.append(f"selection.plans[{i}].scope: must be global or class_wise")
                elif plan.get("band") not in ("top", "middle", "bottom", "random"):
                    bad.append(f"selection.plans[{i}].band: must be top, middle, bottom or random")
        ratios = sel.get("ratios")
        if not isinstance(ratios, list) or not ratios:
            bad.append("selection.ratios: need at least one ratio")
        else:
            for i, r in enumerate(ratios):
                if not _is_num(r) or not (0.0 < r <= 1.0):
                    bad.append(f"selection.ratios[{i}]: must lie in (0, 1]")

    clf = config.get("classifier", {})
    if not isinstance(clf, dict):
        bad.append("classifier: must be a mapping")
    else:
        if not _is_num(clf.get("learning_rate", 0.1)) or clf.get("learning_rate", 0.1) <= 0:
            bad.append("classifier.learning_rate: must be positive")
        if not isinstance(clf.get("epochs", 300), int) or clf.get("epochs", 300) < 1:
            bad.append("classifier.epochs: must be a positive integer")
        if not _is_num(clf.get("l2", 0.0)) or clf.get("l2", 0.0) < 0:
            bad.append("classifier.l2: must be non-negative")
        bs = clf.get("batch_size")
        if bs is not None and (not isinstance(bs, int) or bs < 1):
            bad.append("classifier.batch_size: must be a positive integer or null")

    return bad


@dataclass
class ExperimentReport:
    """Full run result: the JSON-shaped report plus in-memory artifacts."""

    data: dict
    scores: object          # final-stage MIScoreSet
    accuracy: dict          # (strategy, ratio) -> accuracy
    out_files: list


def _build_dataset(ds_cfg, master_seed):
    kind = ds_cfg["type"]
    if kind == "idx":
        train = load_idx(ds_cfg["train_images"], ds_cfg["train_labels"])
        test = load_idx(ds_cfg["test_images"], ds_cfg["test_labels"])
        if train.dim != test.dim or train.num_classes != test.num_classes:
            raise ConfigError("train and test IDX datasets are inconsistent")
        return train, test
    data_seed = ds_cfg.get("seed")
    if data_seed is None:
        data_seed = stage_seed(master_seed, "dataset")
    if kind == "synthetic":
        if "class_means" in ds_cfg and ds_cfg["class_means"] is not None:
            spec = SyntheticSpec(
                num_classes=ds_cfg["num_classes"],
                per_class_count=ds_cfg["per_class_count"],
                dim=ds_cfg["dim"],
                class_means=np.asarray(ds_cfg["class_means"], dtype=np.float64),
                class_stddev=float(ds_cfg["class_stddev"]),
                seed=data_seed,
            )
        else:
            spec = SyntheticSpec.separated(
                num_classes=ds_cfg["num_classes"],
                per_class_count=ds_cfg["per_class_count"],
                dim=ds_cfg["dim"],
                separation=float(ds_cfg["class_separation"]),
                stddev=float(ds_cfg["class_stddev"]),
                seed=data_seed,
            )
        full = generate_synthetic(spec)
    else:
        full = generate_pattern_images(
            num_classes=ds_cfg["num_classes"],
            per_class_count=ds_cfg["per_class_count"],
            height=ds_cfg.get("height", 12),
            width=ds_cfg.get("width", 12),
            noise=ds_cfg.get("noise", 0.05),
            jitter_px=ds_cfg.get("jitter_px", 1),
            seed=data_seed,
        )
    frac = ds_cfg.get("test_fraction", 0.25)
    return train_test_split(full, frac, stage_seed(master_seed, "split"))


def _corruption_spec(cor_cfg, index, master_seed):
    seed = cor_cfg.get("seed")
    if seed is None:
        seed = stage_seed(master_seed, f"corrupt.{index}")
    params = None
    if "params" in cor_cfg and cor_cfg["params"] is not None:
        p = cor_cfg["params"]
        params = AffineParams(
            rotation_deg=p["rotation_deg"],
            scale_range=tuple(p["scale_range"]),
            shear_deg=p["shear_deg"],
            translate_frac=p["translate_frac"],
        )
    return CorruptionSpec(
        kind=cor_cfg["kind"],
        rate=cor_cfg.get("rate", 0.0),
        fraction=cor_cfg.get("fraction", 0.0),
        noise_factor=cor_cfg.get("noise_factor", 0.0),
        params=params,
        seed=seed,
    )


def _score_stage(ds, emb_cfg, est_cfg, cache_dir):
    model = fit_pca(ds, emb_cfg.get("dim", 16), whiten=emb_cfg.get("whiten", False))
    embedded = transform(model, ds)
    key_material = json.dumps(
        {
            "hash": dataset_content_hash(embedded.points, embedded.labels),
            "k": est_cfg.get("k", 3),
            "variant": est_cfg.get("variant", VARIANT_DISCRETE),
            "strict": est_cfg.get("strict", True),
            "label_scale": est_cfg.get("label_scale"),
            "jitter_seed": est_cfg.get("jitter_seed"),
        },
        sort_keys=True,
    )
    cache_key = hashlib.sha256(key_material.encode()).hexdigest()
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"scores-{cache_key}.json"
        if cache_path.exists():
            scores, _ = load_scores(cache_path)
            return model, embedded, scores, cache_key
    scores = score_dataset(
        embedded,
        est_cfg.get("k", 3),
        variant=est_cfg.get("variant", VARIANT_DISCRETE),
        strict=est_cfg.get("strict", True),
        label_scale=est_cfg.get("label_scale"),
        jitter_seed=est_cfg.get("jitter_seed"),
    )
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_scores(scores, cache_path, dataset_hash=cache_key)
    return model, embedded, scores, cache_key


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _sanitize(obj):
    """Make a structure JSON-safe: NaN/inf floats become None."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _write_json(path, payload):
    with open(path, "w", newline="\n") as f:
        json.dump(_sanitize(payload), f, sort_keys=True, indent=2)
        f.write("\n")


def _scores_rows(ds, scores):
    provenance = ds.provenance()
    rows = []
    for i in range(ds.n):
        rows.append(
            (
                i,
                int(ds.labels[i]),
                int(ds.original_labels[i]),
                str(provenance[i]),
                float(scores.local_scores[i]),
                int(scores.per_sample_n_x[i]),
                int(scores.per_sample_n_y[i]),
                int(scores.k_effective[i]),
                int(scores.degenerate[i]),
            )
        )
    return rows


def run_experiment(config, out_dir=None, seed_override=None, threads=1, through="full"):
    """Execute the configured pipeline and write machine-readable outputs.

    ``through`` stops the pipeline early: "score" (per-sample MI only),
    "select" (adds selection exports), "train" (adds the accuracy grid) or
    "full" (adds the JSON report). ``out_dir`` falls back to the config's
    optional ``output_dir`` field. Reruns with identical config and seed
    produce byte-identical files regardless of ``threads``.
    """
    if through not in _STAGES:
        raise ConfigError(f"through must be one of {_STAGES}")
    cfg = load_config(config) if isinstance(config, (str, Path)) else config
    violations = validate_config(cfg)
    if violations:
        raise ConfigError("invalid config: " + "; ".join(violations))
    master = int(cfg.get("seed", 0)) if seed_override is None else int(seed_override)

    if out_dir is None:
        out_dir = cfg.get("output_dir")
    out = Path(out_dir) if out_dir is not None else None
    written = []

    def emit(name):
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        written.append(path)
        return path

    current_stage = "dataset"
    try:
        train_ds, test_ds = _build_dataset(cfg["dataset"], master)

        current_stage = "corruption"
        stage_list = [("clean", train_ds)]
        corruption_meta = []
        for i, cor_cfg in enumerate(cfg.get("corruptions", [])):
            spec = _corruption_spec(cor_cfg, i, master)
            before = stage_list[-1][1]
            after = apply_corruption(before, spec)
            stage_list.append((f"{i + 1}:{spec.kind}", after))
            affected = int(
                (after.labels != before.labels).sum()
                + (after.input_corruption != before.input_corruption).sum()
            )
            corruption_meta.append({"kind": spec.kind, "seed": spec.seed, "affected": affected})
        final_train = stage_list[-1][1]

        current_stage = "scoring"
        est_cfg = dict(cfg.get("estimator", {}))
        emb_cfg = dict(cfg.get("embedding", {}))
        cache_dir = out / "cache" if out is not None else None
        mi_by_stage = []
        model = embedded_train = scores = None
        for name, ds in stage_list:
            model, embedded_train, scores, cache_key = _score_stage(
                ds, emb_cfg, est_cfg, cache_dir
            )
            mi_by_stage.append(
                {
                    "stage": name,
                    "global_mi": scores.global_mi,
                    "global_mi_bits": scores.global_mi_bits,
                    "degenerate_count": int(scores.degenerate.sum()),
                    "k_substitutions": scores.k_substitutions,
                }
            )
        embedded_test = transform(model, test_ds)
        class_summary = per_class_summary(scores, final_train.labels)

        if out is not None:
            _write_csv(emit("scores.csv"), SCORES_CSV_COLUMNS, _scores_rows(final_train, scores))
            _write_json(
                emit("mi_summary.json"),
                {
                    "schema_version": REPORT_SCHEMA_VERSION,
                    "mi_by_stage": mi_by_stage,
                    "per_class_mi": class_summary,
                    "estimator": {
                        "variant": scores.variant,
                        "k": scores.k,
                        "strict": scores.strict,
                        "label_scale": scores.label_scale,
                        "jitter_seed": scores.jitter_seed,
                    },
                },
            )
        if through == "score":
            return ExperimentReport(
                data={"mi_by_stage": mi_by_stage, "per_class_mi": class_summary},
                scores=scores, accuracy={}, out_files=written,
            )

        current_stage = "selection"
        sel_cfg = cfg["selection"]
        ratios = sorted(sel_cfg["ratios"])
        cells = []
        for plan_cfg in sel_cfg["plans"]:
            for ratio in ratios:
                scope, band = plan_cfg["scope"], plan_cfg["band"]
                seed = None
                if band == "random":
                    seed = stage_seed(master, f"selection.{scope}/{band}@{ratio!r}")
                plan = SelectionPlan(scope=scope, band=band, retention_ratio=float(ratio), seed=seed)
                cells.append(plan)
        selections = {}
        for plan in cells:
            result = select(scores, final_train.labels, plan, num_classes=final_train.num_classes)
            selections[(plan.strategy, plan.retention_ratio)] = result
            if out is not None:
                tag = f"{plan.scope}-{plan.band}_r{plan.retention_ratio:g}"
                save_selection(
                    result,
                    json_path=emit(f"selection/{tag}.json"),
                    index_path=emit(f"selection/{tag}.idx"),
                )
        if through == "select":
            return ExperimentReport(
                data={"mi_by_stage": mi_by_stage, "per_class_mi": class_summary},
                scores=scores, accuracy={}, out_files=written,
            )

        current_stage = "classifier"
        clf_cfg = dict(cfg.get("classifier", {}))
        on_raw = bool(clf_cfg.pop("on_raw_features", False))
        clf_seed = clf_cfg.pop("seed", None)
        if clf_seed is None:
            clf_seed = stage_seed(master, "classifier") % (2**32)
        tcfg = TrainConfig(
            learning_rate=clf_cfg.get("learning_rate", 0.1),
            epochs=clf_cfg.get("epochs", 300),
            l2=clf_cfg.get("l2", 1e-4),
            batch_size=clf_cfg.get("batch_size"),
            seed=clf_seed,
        )
        train_data = final_train if on_raw else embedded_train
        test_data = test_ds if on_raw else embedded_test

        def run_cell(item):
            key, result = item
            model_c = train(train_data, result.retained_indices, tcfg)
            return key, evaluate(model_c, test_data)["accuracy"]

        items = sorted(selections.items())
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run_cell, items))
        else:
            results = [run_cell(item) for item in items]
        accuracy = dict(results)

        if out is not None:
            rows = [
                (strategy, float(ratio), float(acc))
                for (strategy, ratio), acc in sorted(accuracy.items())
            ]
            _write_csv(emit("accuracy.csv"), ACCURACY_CSV_COLUMNS, rows)
        if through == "train":
            return ExperimentReport(
                data={"mi_by_stage": mi_by_stage, "per_class_mi": class_summary},
                scores=scores, accuracy=accuracy, out_files=written,
            )

        current_stage = "report"
        report = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "package_version": __version__,
            "master_seed": master,
            "stage_seeds": {
                name: stage_seed(master, name)
                for name in ("dataset", "split", "classifier")
            },
            "config": cfg,
            "dataset": {
                "n_train": final_train.n,
                "n_test": test_ds.n,
                "num_classes": final_train.num_classes,
                "dim": final_train.dim,
                "image_shape": list(final_train.image_shape) if final_train.image_shape else None,
            },
            "corruption_stages": corruption_meta,
            "mi_by_stage": mi_by_stage,
            "per_class_mi": class_summary,
            "estimator": {
                "variant": scores.variant,
                "k": scores.k,
                "strict": scores.strict,
                "label_scale": scores.label_scale,
                "jitter_seed": scores.jitter_seed,
            },
            "accuracy": [
                {"strategy": strategy, "ratio": float(ratio), "accuracy": float(acc)}
                for (strategy, ratio), acc in sorted(accuracy.items())
            ],
            "content_hashes": {
                "embedded_train": dataset_content_hash(
                    embedded_train.points, embedded_train.labels
                ),
                "scores": hashlib.sha256(
                    json.dumps(
                        [None if d else s for s, d in
                         zip(scores.local_scores.tolist(), scores.degenerate.tolist())]
                    ).encode()
                ).hexdigest(),
            },
        }
        if out is not None:
            _write_json(emit("report.json"), report)
        return ExperimentReport(data=report, scores=scores, accuracy=accuracy, out_files=written)

    except MiselectError as exc:
        if out is not None and written:
            quarantine = out / "quarantine"
            quarantine.mkdir(parents=True, exist_ok=True)
            for path in written:
                if path.exists():
                    shutil.move(str(path), quarantine / path.name)
        if isinstance(exc, StageError):
            raise
        raise StageError(current_stage, str(exc)) from exc
