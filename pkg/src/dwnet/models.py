"""DWnet and HCNBLS: compositions of PruHCN feature mappers with BLS heads.

DWnet trains a full HCN with SGD, prunes it to a frozen PruHCN, extracts
features for every training clip in inference mode, and ridge-solves a BLS
head on top. HCNBLS skips gradient training entirely: several untrained,
independently seeded PruHCN mappers run side by side and their concatenated
outputs feed one BLS head.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bls import BlsConfig, BlsHead, bls_fit, bls_predict, load_head, save_head
from .data import encode_batch
from .hcn import (
    HcnConfig,
    PruHcn,
    as_clip_batch,
    as_labeled_data,
    build_hcn,
    config_hash,
    hcn_train,
    load_hcn,
    prune,
    pruhcn_features,
    save_hcn,
    weights_hash,
)


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it, the cause is chained."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class DwnetModel:
    """Frozen trained PruHCN composed with a fitted BLS head."""

    pruhcn: PruHcn
    head: BlsHead
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.head.feature_dim != self.pruhcn.feature_dim:
            raise ValueError(
                f"head expects {self.head.feature_dim}-dim features but the "
                f"PruHCN produces {self.pruhcn.feature_dim}"
            )


def dwnet_fit(train, valid,
              hcn_config: HcnConfig, bls_config: BlsConfig,
              init_seed: int = 0) -> DwnetModel:
    """Train HCN, prune, extract inference-mode features, fit the head.

    ``train`` and ``valid`` are sequence lists or (clip batch, labels)
    pairs. Any failure is re-raised as a StageError naming the stage
    (hcn_train | prune | extract | bls_fit).
    """
    with _stage("hcn_train"):
        seqs, batch, labels = as_labeled_data(hcn_config, train)
        model = build_hcn(hcn_config, init_seed)
        model, history = hcn_train(model, train, valid)
    with _stage("prune"):
        mapper = prune(model)
        frozen = weights_hash(mapper)
    with _stage("extract"):
        if batch is None:
            batch, _ = encode_batch(seqs, hcn_config.t_frames, hcn_config.joints)
        features = pruhcn_features(mapper, batch)
    with _stage("bls_fit"):
        head = bls_fit(features, labels, bls_config,
                       num_classes=hcn_config.num_classes)
    if weights_hash(mapper) != frozen:
        raise StageError("bls_fit", RuntimeError(
            "PruHCN weights changed while fitting the head"))
    provenance = {
        "kind": "dwnet",
        "hcn_config_hash": config_hash(hcn_config),
        "bls_config": bls_config.to_dict(),
        "seeds": {"init": init_seed, "sgd": hcn_config.sgd.seed,
                  "bls": bls_config.seed},
        "pruhcn_weights_hash": frozen,
        "epochs_run": len(history),
        "final_train_accuracy": history[-1]["train_accuracy"] if history else None,
    }
    return DwnetModel(mapper, head, provenance)


def dwnet_predict(model: DwnetModel, clips) -> tuple[np.ndarray, np.ndarray]:
    """(class, scores) for one clip, (classes [N], scores [N, C]) for a batch."""
    batch, single = as_clip_batch(model.pruhcn.config, clips)
    features = pruhcn_features(model.pruhcn, batch)
    scores, classes = bls_predict(model.head, features)
    if single:
        return int(classes[0]), scores[0]
    return classes, scores


@dataclass
class HcnblsModel:
    """Untrained random PruHCN mappers feeding one BLS head.

    ``seed`` is the root seed whose spawned children initialized each
    mapper, so the mappers are fully regenerable from the config + seed.
    """

    mappers: list[PruHcn]
    head: BlsHead
    hcn_config: HcnConfig
    seed: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mappers:
            raise ValueError("at least one mapper required")
        if self.head.feature_dim != len(self.mappers) * self.hcn_config.feature_dim:
            raise ValueError(
                f"head expects {self.head.feature_dim}-dim features but "
                f"{len(self.mappers)} mappers produce "
                f"{len(self.mappers) * self.hcn_config.feature_dim}"
            )


def _build_mappers(hcn_config: HcnConfig, n_mappers: int,
                   seed: int) -> list[PruHcn]:
    children = np.random.SeedSequence(seed).spawn(n_mappers)
    return [prune(build_hcn(hcn_config, np.random.default_rng(child)))
            for child in children]


def hcnbls_features(model: HcnblsModel, clips) -> np.ndarray:
    """Concatenated mapper outputs: [N, n_mappers * D] (or [n_mappers * D])."""
    batch, single = as_clip_batch(model.hcn_config, clips)
    features = np.hstack([pruhcn_features(m, batch) for m in model.mappers])
    return features[0] if single else features


def hcnbls_fit(train, hcn_config: HcnConfig,
               bls_config: BlsConfig, n_mappers: int = 15,
               seed: int = 0) -> HcnblsModel:
    """Fit HCNBLS: no gradient training anywhere, ridge solve only.

    ``train`` is a sequence list or an (encoded clip batch, labels) pair.
    """
    if n_mappers < 1:
        raise ValueError(f"n_mappers must be >= 1, got {n_mappers}")
    with _stage("build_mappers"):
        seqs, batch, labels = as_labeled_data(hcn_config, train)
        mappers = _build_mappers(hcn_config, n_mappers, seed)
    with _stage("extract"):
        if batch is None:
            batch, _ = encode_batch(seqs, hcn_config.t_frames, hcn_config.joints)
        features = np.hstack([pruhcn_features(m, batch) for m in mappers])
    with _stage("bls_fit"):
        head = bls_fit(features, labels, bls_config,
                       num_classes=hcn_config.num_classes)
    provenance = {
        "kind": "hcnbls",
        "hcn_config_hash": config_hash(hcn_config),
        "bls_config": bls_config.to_dict(),
        "n_mappers": n_mappers,
        "seeds": {"mappers_root": seed, "bls": bls_config.seed},
    }
    return HcnblsModel(mappers, head, hcn_config, seed, provenance)


def hcnbls_predict(model: HcnblsModel, clips) -> tuple[np.ndarray, np.ndarray]:
    """(class, scores) for one clip, (classes [N], scores [N, C]) for a batch."""
    batch, single = as_clip_batch(model.hcn_config, clips)
    features = hcnbls_features(model, batch)
    scores, classes = bls_predict(model.head, features)
    if single:
        return int(classes[0]), scores[0]
    return classes, scores


# ---------------------------------------------------------------------------
# Bundle serialization
# ---------------------------------------------------------------------------

def _dump_provenance(doc: dict, directory: Path) -> None:
    (directory / "provenance.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def save_dwnet(model: DwnetModel, directory) -> None:
    """Bundle directory: pruhcn/ + head/ + provenance.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_hcn(model.pruhcn, directory / "pruhcn")
    save_head(model.head, directory / "head")
    _dump_provenance(model.provenance, directory)


def load_dwnet(directory) -> DwnetModel:
    directory = Path(directory)
    pruhcn = load_hcn(directory / "pruhcn")
    if not isinstance(pruhcn, PruHcn):
        raise ValueError(f"{directory / 'pruhcn'} holds a full HCN, not a PruHCN")
    head = load_head(directory / "head")
    provenance = json.loads((directory / "provenance.json").read_text())
    return DwnetModel(pruhcn, head, provenance)


def save_hcnbls(model: HcnblsModel, directory) -> None:
    """Bundle directory: head/ + provenance.json; mapper weights are not
    stored, they regenerate from the recorded seed."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_head(model.head, directory / "head", store_enhancement=not model.head.seeded)
    doc = dict(model.provenance)
    doc.update({
        "kind": "hcnbls",
        "hcn_config": model.hcn_config.to_dict(),
        "n_mappers": len(model.mappers),
        "mappers_root_seed": model.seed,
    })
    _dump_provenance(doc, directory)


def load_hcnbls(directory) -> HcnblsModel:
    directory = Path(directory)
    doc = json.loads((directory / "provenance.json").read_text())
    if doc.get("kind") != "hcnbls":
        raise ValueError(f"{directory} is not an HCNBLS bundle")
    hcn_config = HcnConfig.from_dict(doc["hcn_config"])
    mappers = _build_mappers(hcn_config, int(doc["n_mappers"]),
                             int(doc["mappers_root_seed"]))
    head = load_head(directory / "head")
    return HcnblsModel(mappers, head, hcn_config, int(doc["mappers_root_seed"]),
                       provenance=doc)
