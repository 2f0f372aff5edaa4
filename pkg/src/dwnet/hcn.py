"""Hierarchical co-occurrence network: build, run, train, prune.

The full HCN classifies a two-stream skeleton clip. Each stream (position,
motion) passes through its own Conv1..Conv4 stack, streams are concatenated
along channels before Conv5, persons are fused by elementwise maximum, and
two dense layers finish the classifier. PruHCN is the same network with
Dropout and the final dense layer removed; its post-ReLU Fc6 output is the
D-dimensional feature-mapping function that DWnet feeds to a BLS head.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import ClipTensors, SkeletonSequence, encode_batch, random_crop, stack_clips


@dataclass
class HcnConfig:
    """Architecture and training settings.

    ``channels`` are the five convolution widths in network order. The
    second width doubles as the post-transpose image width, so it must
    survive two halving pools, as must ``t_frames``.
    """

    t_frames: int = 16
    joints: int = 15
    persons: int = 2
    num_classes: int = 8
    channels: tuple[int, int, int, int, int] = (64, 32, 32, 64, 128)
    feature_dim: int = 64
    dropout_rate: float = 0.5
    crop_ratio: float | None = None
    sgd: nn.SgdConfig = field(default_factory=nn.SgdConfig)

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != 5 or min(self.channels) < 1:
            raise ValueError(f"channels must be 5 positive widths, got {self.channels}")
        if self.t_frames < 4:
            raise ValueError(f"t_frames must be >= 4 (two halving pools), got {self.t_frames}")
        if self.channels[1] < 4:
            raise ValueError(
                f"conv2 width must be >= 4 (two halving pools), got {self.channels[1]}"
            )
        if self.joints < 1 or self.persons < 1:
            raise ValueError("joints and persons must be positive")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.crop_ratio is not None and not 0.0 < self.crop_ratio <= 1.0:
            raise ValueError(f"crop_ratio must lie in (0, 1], got {self.crop_ratio}")
        if isinstance(self.sgd, dict):
            self.sgd = nn.SgdConfig(**self.sgd)

    @property
    def pooled_frames(self) -> int:
        return self.t_frames // 4

    @property
    def pooled_width(self) -> int:
        return self.channels[1] // 4

    @property
    def flat_dim(self) -> int:
        return self.channels[4] * self.pooled_frames * self.pooled_width

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["channels"] = list(self.channels)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "HcnConfig":
        doc = dict(doc)
        doc["channels"] = tuple(doc["channels"])
        doc["sgd"] = nn.SgdConfig(**doc["sgd"])
        return cls(**doc)


def config_hash(config: HcnConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class StreamConvs:
    """Per-stream convolution stack (position or motion)."""

    conv1: nn.ConvLayer
    conv2: nn.ConvLayer
    conv3: nn.ConvLayer
    conv4: nn.ConvLayer


@dataclass
class HcnModel:
    """Full classifier: two conv streams, fused Conv5, Fc6, Dropout, Fc7."""

    config: HcnConfig
    position: StreamConvs
    motion: StreamConvs
    conv5: nn.ConvLayer
    fc6: nn.DenseLayer
    fc7: nn.DenseLayer


@dataclass
class PruHcn:
    """HCN with Dropout and Fc7 removed: a frozen feature-mapping function.

    Layer objects are shared with the source model, never copied.
    """

    config: HcnConfig
    position: StreamConvs
    motion: StreamConvs
    conv5: nn.ConvLayer
    fc6: nn.DenseLayer
    parent_hash: str | None = None

    @property
    def feature_dim(self) -> int:
        return self.config.feature_dim


def _check_spatial(config: HcnConfig) -> None:
    # convs pad to preserve; the joint-axis transpose puts conv2's width on
    # the W axis, so only t_frames and channels[1] shrink through the pools
    t, w = config.t_frames, config.channels[1]
    for name in ("pool after conv4", "pool after conv5"):
        if t < 2 or w < 2:
            raise ValueError(f"spatial dims collapse at {name}: {t}x{w} input")
        t, w = t // 2, w // 2


def build_hcn(config: HcnConfig, rng: np.random.Generator | int) -> HcnModel:
    """Initialize all layers with uniform(-a, a), a = sqrt(6/(fan_in+fan_out)).

    Deterministic for a given seed; draw order is position stream, motion
    stream, Conv5, Fc6, Fc7.
    """
    _check_spatial(config)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    c1, c2, c3, c4, c5 = config.channels

    def stream() -> StreamConvs:
        return StreamConvs(
            conv1=nn.init_conv(rng, c1, 3, (1, 1)),
            conv2=nn.init_conv(rng, c2, c1, (3, 1), padding=(1, 0)),
            conv3=nn.init_conv(rng, c3, config.joints, (3, 3), padding=(1, 1)),
            conv4=nn.init_conv(rng, c4, c3, (3, 3), padding=(1, 1)),
        )

    position = stream()
    motion = stream()
    conv5 = nn.init_conv(rng, c5, 2 * c4, (3, 3), padding=(1, 1))
    fc6 = nn.init_dense(rng, config.flat_dim, config.feature_dim)
    fc7 = nn.init_dense(rng, config.feature_dim, config.num_classes)
    return HcnModel(config, position, motion, conv5, fc6, fc7)


def named_params(model: HcnModel | PruHcn) -> dict[str, np.ndarray]:
    """Stable name -> array view over every trainable tensor."""
    out: dict[str, np.ndarray] = {}
    for stream_name in ("position", "motion"):
        convs = getattr(model, stream_name)
        for layer_name in ("conv1", "conv2", "conv3", "conv4"):
            layer = getattr(convs, layer_name)
            out[f"{stream_name}.{layer_name}.weights"] = layer.weights
            out[f"{stream_name}.{layer_name}.bias"] = layer.bias
    for layer_name in ("conv5", "fc6") + (("fc7",) if hasattr(model, "fc7") else ()):
        layer = getattr(model, layer_name)
        out[f"{layer_name}.weights"] = layer.weights
        out[f"{layer_name}.bias"] = layer.bias
    return out


def assign_params(model: HcnModel | PruHcn, params: dict[str, np.ndarray]) -> None:
    """Copy arrays into the model's tensors; names and shapes must match."""
    target = named_params(model)
    if set(target) != set(params):
        raise ValueError(
            f"parameter names mismatch: missing {sorted(set(target) - set(params))}, "
            f"unexpected {sorted(set(params) - set(target))}"
        )
    for name, arr in params.items():
        if target[name].shape != np.shape(arr):
            raise ValueError(
                f"parameter {name!r}: shape {np.shape(arr)} does not match "
                f"{target[name].shape}"
            )
        target[name][...] = arr


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def as_clip_batch(config: HcnConfig, clips) -> tuple[np.ndarray, bool]:
    """Normalize clip input to ([N, 2, P, 3, T, K], was_single).

    Accepts one ClipTensors, a list of them, a single [2, P, 3, T, K] array
    or a full batch array.
    """
    single = False
    if isinstance(clips, ClipTensors):
        batch = stack_clips([clips])
        single = True
    elif isinstance(clips, (list, tuple)):
        batch = stack_clips(list(clips))
    else:
        batch = np.asarray(clips, dtype=np.float64)
        if batch.ndim == 5:
            batch = batch[None]
            single = True
    expected = (2, config.persons, 3, config.t_frames, config.joints)
    if batch.ndim != 6 or batch.shape[1:] != expected:
        raise ValueError(
            f"clip batch shape {np.shape(clips)} does not match "
            f"[N, 2, {config.persons}, 3, {config.t_frames}, {config.joints}]"
        )
    return batch, single


def _stream_forward(x: np.ndarray, convs: StreamConvs) -> tuple[np.ndarray, dict]:
    a1 = nn.conv2d_forward(x, convs.conv1)
    r1 = nn.relu(a1)
    a2 = nn.conv2d_forward(r1, convs.conv2)
    # joints (image width) become channels; conv2 width becomes image width
    t2 = np.ascontiguousarray(a2.transpose(0, 3, 2, 1))
    a3 = nn.conv2d_forward(t2, convs.conv3)
    a4 = nn.conv2d_forward(a3, convs.conv4)
    r4 = nn.relu(a4)
    p4, arg4 = nn.maxpool2d_forward(r4)
    cache = {"x": x, "a1": a1, "r1": r1, "t2": t2, "a3": a3, "a4": a4,
             "r4_shape": r4.shape, "arg4": arg4}
    return p4, cache


def _stream_backward(grad_p4: np.ndarray, convs: StreamConvs, cache: dict,
                     prefix: str, grads: dict) -> None:
    grad_r4 = nn.maxpool2d_backward(grad_p4, cache["arg4"], cache["r4_shape"])
    grad_a4 = nn.relu_backward(grad_r4, cache["a4"])
    grad_a3, gw4, gb4 = nn.conv2d_backward(grad_a4, cache["a3"], convs.conv4)
    grad_t2, gw3, gb3 = nn.conv2d_backward(grad_a3, cache["t2"], convs.conv3)
    grad_a2 = np.ascontiguousarray(grad_t2.transpose(0, 3, 2, 1))
    grad_r1, gw2, gb2 = nn.conv2d_backward(grad_a2, cache["r1"], convs.conv2)
    grad_a1 = nn.relu_backward(grad_r1, cache["a1"])
    _, gw1, gb1 = nn.conv2d_backward(grad_a1, cache["x"], convs.conv1)
    for i, (gw, gb) in enumerate([(gw1, gb1), (gw2, gb2), (gw3, gb3), (gw4, gb4)], 1):
        grads[f"{prefix}.conv{i}.weights"] = gw
        grads[f"{prefix}.conv{i}.bias"] = gb


def _core_forward(model: HcnModel | PruHcn, batch: np.ndarray
                  ) -> tuple[np.ndarray, dict]:
    """Everything up to and including the post-ReLU Fc6 features."""
    cfg = model.config
    n, p = batch.shape[0], cfg.persons
    x_pos = batch[:, 0].reshape(n * p, 3, cfg.t_frames, cfg.joints)
    x_mot = batch[:, 1].reshape(n * p, 3, cfg.t_frames, cfg.joints)
    p4_pos, cache_pos = _stream_forward(x_pos, model.position)
    p4_mot, cache_mot = _stream_forward(x_mot, model.motion)
    cat = np.concatenate([p4_pos, p4_mot], axis=1)
    a5 = nn.conv2d_forward(cat, model.conv5)
    r5 = nn.relu(a5)
    p5, arg5 = nn.maxpool2d_forward(r5)
    per_person = p5.reshape(n, p, *p5.shape[1:])
    fuse_arg = per_person.argmax(axis=1)
    fused = np.take_along_axis(per_person, fuse_arg[:, None], axis=1)[:, 0]
    flat = fused.reshape(n, cfg.flat_dim)
    a6 = nn.dense_forward(flat, model.fc6)
    features = nn.relu(a6)
    cache = {"pos": cache_pos, "mot": cache_mot, "cat": cat, "a5": a5,
             "r5_shape": r5.shape, "arg5": arg5, "p5_shape": p5.shape,
             "fuse_arg": fuse_arg, "flat": flat, "a6": a6, "n": n, "p": p}
    return features, cache


def _core_backward(model: HcnModel | PruHcn, cache: dict,
                   grad_features: np.ndarray, grads: dict) -> None:
    cfg = model.config
    n, p = cache["n"], cache["p"]
    grad_a6 = nn.relu_backward(grad_features, cache["a6"])
    grad_flat, gw6, gb6 = nn.dense_backward(grad_a6, cache["flat"], model.fc6)
    grads["fc6.weights"], grads["fc6.bias"] = gw6, gb6
    grad_fused = grad_flat.reshape(
        n, cfg.channels[4], cfg.pooled_frames, cfg.pooled_width
    )
    grad_per = np.zeros((n, p, *grad_fused.shape[1:]))
    np.put_along_axis(grad_per, cache["fuse_arg"][:, None],
                      grad_fused[:, None], axis=1)
    grad_p5 = grad_per.reshape(cache["p5_shape"])
    grad_r5 = nn.maxpool2d_backward(grad_p5, cache["arg5"], cache["r5_shape"])
    grad_a5 = nn.relu_backward(grad_r5, cache["a5"])
    grad_cat, gw5, gb5 = nn.conv2d_backward(grad_a5, cache["cat"], model.conv5)
    grads["conv5.weights"], grads["conv5.bias"] = gw5, gb5
    c4 = cfg.channels[3]
    _stream_backward(grad_cat[:, :c4], model.position, cache["pos"], "position", grads)
    _stream_backward(grad_cat[:, c4:], model.motion, cache["mot"], "motion", grads)


def forward_batch(model: HcnModel, batch: np.ndarray, training: bool = False,
                  rng: np.random.Generator | None = None
                  ) -> tuple[np.ndarray, dict]:
    """Forward pass over a clip batch; returns (logits [N, C], cache)."""
    features, core = _core_forward(model, batch)
    mask = None
    dropped = features
    if training and model.config.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training-mode forward requires an rng for dropout")
        mask = nn.dropout_mask(rng, features.shape, model.config.dropout_rate)
        dropped = features * mask
    logits = nn.dense_forward(dropped, model.fc7)
    cache = {"core": core, "features": features, "mask": mask, "dropped": dropped}
    return logits, cache


def backward_batch(model: HcnModel, cache: dict, grad_logits: np.ndarray
                   ) -> dict[str, np.ndarray]:
    """Gradients for every trainable tensor, keyed like named_params."""
    grads: dict[str, np.ndarray] = {}
    grad_dropped, gw7, gb7 = nn.dense_backward(grad_logits, cache["dropped"], model.fc7)
    grads["fc7.weights"], grads["fc7.bias"] = gw7, gb7
    grad_features = grad_dropped if cache["mask"] is None else grad_dropped * cache["mask"]
    _core_backward(model, cache["core"], grad_features, grads)
    return grads


def hcn_forward(model: HcnModel, clip, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Class logits for one clip (or a batch of clips)."""
    batch, single = as_clip_batch(model.config, clip)
    logits, _ = forward_batch(model, batch, training=training, rng=rng)
    return logits[0] if single else logits


def prune(model: HcnModel | PruHcn) -> PruHcn:
    """Drop Dropout and Fc7; the result shares every retained layer object.

    Idempotent: pruning a PruHcn returns it unchanged.
    """
    if isinstance(model, PruHcn):
        return model
    return PruHcn(model.config, model.position, model.motion, model.conv5,
                  model.fc6, parent_hash=config_hash(model.config))


def pruhcn_features(model: HcnModel | PruHcn, clips) -> np.ndarray:
    """Post-ReLU Fc6 feature vector(s): [D] for one clip, [N, D] for a batch."""
    batch, single = as_clip_batch(model.config, clips)
    features, _ = _core_forward(model, batch)
    return features[0] if single else features


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def evaluate_accuracy(model: HcnModel, batch: np.ndarray,
                      labels: np.ndarray) -> float:
    logits, _ = forward_batch(model, batch, training=False)
    return float(np.mean(logits.argmax(axis=1) == labels))


def as_labeled_data(config: HcnConfig, data
                    ) -> tuple[list[SkeletonSequence] | None, np.ndarray | None,
                               np.ndarray]:
    """Normalize a training/validation set to (sequences, batch, labels).

    Accepts a list of SkeletonSequence (labels read from them, batch left
    to the caller to encode) or an (encoded clip batch, labels) pair.
    """
    if isinstance(data, tuple):
        batch, labels = data
        batch, _ = as_clip_batch(config, batch)
        labels = np.asarray(labels, dtype=np.intp)
        if labels.shape != (batch.shape[0],):
            raise ValueError(
                f"labels must be a length-{batch.shape[0]} vector, "
                f"got shape {labels.shape}"
            )
        if labels.size < 1:
            raise ValueError("training set is empty")
        return None, batch, labels
    seqs = list(data)
    if not seqs:
        raise ValueError("training set is empty")
    labels = np.array([s.label for s in seqs], dtype=np.intp)
    return seqs, None, labels


def hcn_train(model: HcnModel,
              train,
              valid=None,
              config: HcnConfig | None = None
              ) -> tuple[HcnModel, list[dict]]:
    """Minibatch momentum-SGD on softmax cross-entropy, in place.

    ``train`` and ``valid`` are sequence lists (encoded internally) or
    (clip batch, labels) pairs. When ``config.crop_ratio`` is set each
    sequence is randomly cropped anew every epoch before encoding, which
    requires raw sequences. With a validation set, the parameters giving
    the best validation accuracy are restored at the end. Returns
    (model, per-epoch history).
    """
    config = config or model.config
    train_seqs, fixed_batch, labels = as_labeled_data(config, train)
    if config.crop_ratio is not None and train_seqs is None:
        raise ValueError("crop augmentation requires raw sequences, not encoded clips")
    sgd = config.sgd
    rng = np.random.default_rng(sgd.seed)
    params = named_params(model)
    names = list(params)
    velocity = nn.zero_velocity([params[k] for k in names])

    if fixed_batch is None and config.crop_ratio is None:
        fixed_batch, _ = encode_batch(train_seqs, config.t_frames, config.joints)
    valid_batch = valid_labels = None
    if valid is not None and (not isinstance(valid, list) or valid):
        valid_seqs, valid_batch, valid_labels = as_labeled_data(config, valid)
        if valid_batch is None:
            valid_batch, valid_labels = encode_batch(valid_seqs, config.t_frames,
                                                     config.joints)

    n = labels.size
    best_acc = -1.0
    best_params: dict[str, np.ndarray] | None = None
    history: list[dict] = []
    for epoch in range(sgd.epochs):
        if config.crop_ratio is not None:
            cropped = [random_crop(s, config.crop_ratio, rng)
                       for s in train_seqs]
            batch_all, _ = encode_batch(cropped, config.t_frames, config.joints)
        else:
            batch_all = fixed_batch
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, sgd.batch_size):
            idx = order[start:start + sgd.batch_size]
            logits, cache = forward_batch(model, batch_all[idx], training=True,
                                          rng=rng)
            loss, grad_logits = nn.softmax_cross_entropy(logits, labels[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"training diverged at epoch {epoch}: loss {loss}"
                )
            grads = backward_batch(model, cache, grad_logits)
            nn.sgd_step([params[k] for k in names], [grads[k] for k in names],
                        sgd, velocity)
            total_loss += loss * len(idx)
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
        entry = {"epoch": epoch, "train_loss": total_loss / n,
                 "train_accuracy": correct / n}
        if valid_batch is not None:
            acc = evaluate_accuracy(model, valid_batch, valid_labels)
            entry["valid_accuracy"] = acc
            if acc > best_acc:
                best_acc = acc
                best_params = {k: params[k].copy() for k in names}
        history.append(entry)
    if best_params is not None:
        assign_params(model, best_params)
    return model, history


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_hcn(model: HcnModel | PruHcn, directory) -> None:
    """Write architecture manifest + parameters in the shared format."""
    pruned = isinstance(model, PruHcn)
    manifest = {
        "kind": "pruhcn" if pruned else "hcn",
        "config": model.config.to_dict(),
        "config_hash": config_hash(model.config),
    }
    if pruned:
        manifest["parent_hash"] = model.parent_hash
    nn.save_params(directory, manifest, named_params(model))


def load_hcn(directory) -> HcnModel | PruHcn:
    manifest, params = nn.load_params(directory)
    if manifest.get("kind") not in ("hcn", "pruhcn"):
        raise ValueError(f"not an HCN parameter directory: kind={manifest.get('kind')!r}")
    config = HcnConfig.from_dict(manifest["config"])
    model: HcnModel | PruHcn = build_hcn(config, 0)
    if manifest["kind"] == "pruhcn":
        model = prune(model)
        model.parent_hash = manifest.get("parent_hash")
    assign_params(model, params)
    return model


def weights_hash(model: HcnModel | PruHcn) -> str:
    """Digest of every parameter's exact float64 contents."""
    digest = hashlib.sha256()
    for name, arr in named_params(model).items():
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return digest.hexdigest()
