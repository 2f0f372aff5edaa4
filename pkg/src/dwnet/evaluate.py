"""Evaluation harness: k-fold cross-validation, confusion matrices,
per-sample inference timing, and enhancement-node sweeps.

Reports are plain dataclasses with ``to_dict`` methods whose JSON form is
stable (sorted keys, no timestamps except explicit wall-clock fields) and
validates against the schemas shipped in ``dwnet/schemas``.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json
import platform
import time
from dataclasses import dataclass, field
from typing import Callable

import jsonschema
import numpy as np

from .bls import BlsConfig, FlatBlsConfig, bls_fit, bls_predict, flat_bls_fit, flat_bls_predict
from .data import DatasetManifest, SkeletonSequence, encode_batch, kfold_splits
from .hcn import (
    HcnConfig,
    as_clip_batch,
    build_hcn,
    forward_batch,
    hcn_forward,
    hcn_train,
    prune,
    pruhcn_features,
)
from .models import dwnet_fit, dwnet_predict, hcnbls_fit, hcnbls_predict

MODEL_KINDS = ("hcn", "bls-flat", "hcnbls", "dwnet")

#: Report keys holding wall-clock measurements; excluded from determinism
#: comparisons between re-runs.
WALLCLOCK_KEYS = ("seconds_per_sample", "refit_seconds", "hardware", "entries")


def strip_wallclock(doc):
    """Recursively drop wall-clock fields from a report dict."""
    if isinstance(doc, dict):
        return {k: strip_wallclock(v) for k, v in doc.items()
                if k not in WALLCLOCK_KEYS}
    if isinstance(doc, list):
        return [strip_wallclock(v) for v in doc]
    return doc


# ---------------------------------------------------------------------------
# Confusion matrices
# ---------------------------------------------------------------------------

def confusion_matrix(preds, labels, num_classes: int) -> np.ndarray:
    """Count matrix [C, C]: rows are true labels, columns predictions."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise ValueError(
            f"preds and labels must be equal-length vectors, got "
            f"{preds.shape} and {labels.shape}"
        )
    for name, v in (("preds", preds), ("labels", labels)):
        if v.size and (v.min() < 0 or v.max() >= num_classes):
            raise ValueError(
                f"{name} must lie in [0, {num_classes}), got range "
                f"[{v.min()}, {v.max()}]"
            )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels.astype(np.intp), preds.astype(np.intp)), 1)
    return counts


def normalize_confusion(counts: np.ndarray) -> np.ndarray:
    """Row-stochastic variant; rows without samples stay all-zero."""
    counts = np.asarray(counts, dtype=np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


# ---------------------------------------------------------------------------
# Model runners
# ---------------------------------------------------------------------------

@dataclass
class ModelRunner:
    """Uniform fit/predict closure set for one model kind."""

    name: str
    fit: Callable[[list[SkeletonSequence]], object]
    predict: Callable[[object, list[SkeletonSequence]], np.ndarray]
    predict_single: Callable[[object, object], int]
    config: dict = field(default_factory=dict)


def make_runner(kind: str, hcn_config: HcnConfig,
                bls_config: BlsConfig | None = None,
                flat_config: FlatBlsConfig | None = None,
                n_mappers: int = 15, seed: int = 0) -> ModelRunner:
    """Build the fit/predict closures for one of the four model kinds.

    ``hcn_config`` always supplies the clip dimensions and class count,
    even for the flat baseline.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}, expected one of {MODEL_KINDS}")
    bls_config = bls_config or BlsConfig()
    flat_config = flat_config or FlatBlsConfig()
    t, k = hcn_config.t_frames, hcn_config.joints
    echo = {"model": kind, "hcn": hcn_config.to_dict(), "seed": seed}

    if kind == "hcn":
        def fit(train):
            model = build_hcn(hcn_config, seed)
            return hcn_train(model, train)[0]

        def predict(model, seqs):
            batch, _ = encode_batch(seqs, t, k)
            logits, _ = forward_batch(model, batch)
            return logits.argmax(axis=1)

        def predict_single(model, clip):
            return int(hcn_forward(model, clip).argmax())

        return ModelRunner(kind, fit, predict, predict_single, echo)

    if kind == "dwnet":
        echo["bls"] = bls_config.to_dict()

        def fit(train):
            return dwnet_fit(train, None, hcn_config, bls_config, init_seed=seed)

        def predict(model, seqs):
            batch, _ = encode_batch(seqs, t, k)
            classes, _ = dwnet_predict(model, batch)
            return classes

        def predict_single(model, clip):
            return dwnet_predict(model, clip)[0]

        return ModelRunner(kind, fit, predict, predict_single, echo)

    if kind == "hcnbls":
        echo["bls"] = bls_config.to_dict()
        echo["n_mappers"] = n_mappers

        def fit(train):
            return hcnbls_fit(train, hcn_config, bls_config,
                              n_mappers=n_mappers, seed=seed)

        def predict(model, seqs):
            batch, _ = encode_batch(seqs, t, k)
            classes, _ = hcnbls_predict(model, batch)
            return classes

        def predict_single(model, clip):
            return hcnbls_predict(model, clip)[0]

        return ModelRunner(kind, fit, predict, predict_single, echo)

    # bls-flat
    echo["flat"] = flat_config.to_dict()

    def fit(train):
        batch, labels = encode_batch(train, t, k)
        return flat_bls_fit(batch, labels, flat_config,
                            num_classes=hcn_config.num_classes)

    def predict(model, seqs):
        batch, _ = encode_batch(seqs, t, k)
        _, classes = flat_bls_predict(model, batch)
        return classes

    def predict_single(model, clip):
        batch, _ = as_clip_batch(hcn_config, clip)
        _, classes = flat_bls_predict(model, batch)
        return int(classes[0])

    return ModelRunner(kind, fit, predict, predict_single, echo)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    """Cross-validation outcome in published-table layout."""

    model: str
    k: int
    seed: int
    fold_accuracies: list[float]
    average_accuracy: float
    confusion: np.ndarray
    confusion_normalized: np.ndarray
    class_names: list[str]
    n_samples: int
    config: dict
    warnings: list[str]
    reference_diff: dict | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "k": self.k,
            "seed": self.seed,
            "fold_accuracies": [float(a) for a in self.fold_accuracies],
            "average_accuracy": float(self.average_accuracy),
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "confusion_normalized": [[float(v) for v in row]
                                     for row in self.confusion_normalized],
            "class_names": list(self.class_names),
            "n_samples": int(self.n_samples),
            "config": self.config,
            "warnings": list(self.warnings),
            "reference_diff": self.reference_diff,
        }


def _fold_partition(split, manifest: DatasetManifest,
                    by_id: dict[str, SkeletonSequence]
                    ) -> tuple[list[SkeletonSequence], list[SkeletonSequence]]:
    train = [by_id[e.id] for e in manifest.entries
             if split.assignments[e.id] != split.fold]
    test = [by_id[e.id] for e in manifest.entries
            if split.assignments[e.id] == split.fold]
    return train, test


def run_cv(runner: ModelRunner, seqs: list[SkeletonSequence],
           manifest: DatasetManifest, k: int, seed: int) -> EvalReport:
    """Fit on each k-fold training split, score the held-out fold, and
    aggregate per-fold accuracy plus the summed confusion matrix."""
    by_id = {s.id: s for s in seqs}
    missing = [e.id for e in manifest.entries if e.id not in by_id]
    if missing:
        raise ValueError(f"manifest entries without sequences: {missing[:5]}")
    num_classes = manifest.num_classes
    splits = kfold_splits(manifest, k, seed)
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    fold_accuracies: list[float] = []
    warnings: list[str] = []
    for split in splits:
        train, test = _fold_partition(split, manifest, by_id)
        if not test:
            raise ValueError(f"fold {split.fold} has no test samples")
        train_classes = {s.label for s in train}
        absent = sorted(set(range(num_classes)) - train_classes)
        if absent:
            warnings.append(
                f"fold {split.fold}: classes {absent} absent from the training split"
            )
        model = runner.fit(train)
        preds = np.asarray(runner.predict(model, test))
        truth = np.array([s.label for s in test])
        fold_accuracies.append(float(100.0 * np.mean(preds == truth)))
        confusion += confusion_matrix(preds, truth, num_classes)
    average = float(np.mean(fold_accuracies))
    return EvalReport(
        model=runner.name, k=k, seed=seed, fold_accuracies=fold_accuracies,
        average_accuracy=average, confusion=confusion,
        confusion_normalized=normalize_confusion(confusion),
        class_names=manifest.class_names, n_samples=len(seqs),
        config=runner.config, warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Inference timing
# ---------------------------------------------------------------------------

@dataclass
class TimingReport:
    """Mean single-sample prediction time per model."""

    dataset: str
    entries: dict[str, float]
    reps: int
    n_samples: int
    hardware: str

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "entries": {k: float(v) for k, v in self.entries.items()},
            "reps": int(self.reps),
            "n_samples": int(self.n_samples),
            "hardware": self.hardware,
        }


def time_inference(predictors: dict[str, Callable[[object], int]],
                   samples: list, reps: int = 100,
                   dataset: str = "dataset") -> TimingReport:
    """Wall-clock mean seconds per single-sample prediction.

    One full warm-up pass per model is excluded; then every sample is
    predicted ``reps`` times (reps >= 10 enforced).
    """
    if reps < 10:
        raise ValueError(f"reps must be >= 10, got {reps}")
    if not samples:
        raise ValueError("at least one sample required")
    entries: dict[str, float] = {}
    for name, predict in predictors.items():
        for sample in samples:
            predict(sample)
        start = time.perf_counter()
        for _ in range(reps):
            for sample in samples:
                predict(sample)
        elapsed = time.perf_counter() - start
        entries[name] = elapsed / (reps * len(samples))
    hardware = f"{platform.platform()} / {platform.machine()}"
    return TimingReport(dataset, entries, reps, len(samples), hardware)


# ---------------------------------------------------------------------------
# Enhancement-node sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    """(enhancement node count, average accuracy) grid results."""

    model: str
    k: int
    seed: int
    points: list[dict]
    best_m: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "k": self.k,
            "seed": self.seed,
            "points": self.points,
            "best_m": int(self.best_m),
            "config": self.config,
        }


def dwnet_fold_features(seqs: list[SkeletonSequence], manifest: DatasetManifest,
                        k: int, hcn_config: HcnConfig, seed: int
                        ) -> list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Train one HCN per fold and cache PruHCN features for train and test.

    The cached (Z_train, y_train, Z_test, y_test) tuples let the sweep refit
    only the BLS head per grid point.
    """
    by_id = {s.id: s for s in seqs}
    splits = kfold_splits(manifest, k, seed)
    fold_seeds = np.random.SeedSequence(seed).generate_state(k)
    out = []
    for split in splits:
        train, test = _fold_partition(split, manifest, by_id)
        model = build_hcn(hcn_config, int(fold_seeds[split.fold]))
        model, _ = hcn_train(model, train)
        mapper = prune(model)
        batch_tr, y_tr = encode_batch(train, hcn_config.t_frames, hcn_config.joints)
        batch_te, y_te = encode_batch(test, hcn_config.t_frames, hcn_config.joints)
        out.append((pruhcn_features(mapper, batch_tr), y_tr,
                    pruhcn_features(mapper, batch_te), y_te))
    return out


def sweep_enhancement(fold_features, base_config: BlsConfig, m_start: int,
                      m_end: int, m_step: int, num_classes: int,
                      k: int = 0, seed: int = 0) -> SweepReport:
    """Refit the BLS head per enhancement-node count on cached features."""
    if m_start < 1 or m_step < 1 or m_end < m_start:
        raise ValueError(
            f"invalid sweep grid: start {m_start}, end {m_end}, step {m_step}"
        )
    if not fold_features:
        raise ValueError("no cached fold features supplied")
    points: list[dict] = []
    for m in range(m_start, m_end + 1, m_step):
        config = dataclasses.replace(base_config, m=m)
        start = time.perf_counter()
        fold_accs = []
        for z_tr, y_tr, z_te, y_te in fold_features:
            head = bls_fit(z_tr, y_tr, config, num_classes=num_classes)
            _, preds = bls_predict(head, z_te)
            fold_accs.append(float(100.0 * np.mean(preds == y_te)))
        refit_seconds = time.perf_counter() - start
        points.append({
            "m": m,
            "average_accuracy": float(np.mean(fold_accs)),
            "fold_accuracies": fold_accs,
            "refit_seconds": refit_seconds,
        })
    best = max(points, key=lambda p: (p["average_accuracy"], -p["m"]))
    return SweepReport(model="dwnet", k=k, seed=seed, points=points,
                       best_m=best["m"], config=base_config.to_dict())


# ---------------------------------------------------------------------------
# Report schema validation
# ---------------------------------------------------------------------------

def load_schema(name: str) -> dict:
    ref = importlib.resources.files("dwnet") / "schemas" / f"{name}.schema.json"
    return json.loads(ref.read_text())


def validate_report(doc: dict, schema_name: str) -> None:
    """Raise jsonschema.ValidationError if the report violates its schema."""
    jsonschema.validate(doc, load_schema(schema_name))
