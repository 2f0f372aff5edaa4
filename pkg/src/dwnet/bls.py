"""Broad Learning System head: random enhancement nodes + ridge solve.

A BLS head never trains its hidden weights. Enhancement nodes are a fixed
random projection squashed by tansig; only the output weights are learned,
in closed form, by ridge regression on the stacked design matrix
``A = [Z | H]``. The flat BLS baseline prepends a random linear feature map
over raw flattened clips.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import nn


def tansig(x: np.ndarray) -> np.ndarray:
    """Hyperbolic tangent sigmoid 2/(1+exp(-2x)) - 1, identically tanh(x)."""
    return np.tanh(np.asarray(x, dtype=np.float64))


@dataclass
class BlsConfig:
    """Enhancement-node count, projection scale, ridge strength, seed."""

    m: int = 550
    scale: float = 0.8
    ridge_lambda: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"enhancement node count must be >= 1, got {self.m}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge lambda must be >= 0, got {self.ridge_lambda}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BlsHead:
    """Fitted head: fixed random (W_h, beta_h) and ridge-solved W_out.

    ``seeded`` records whether (W_h, beta_h) came from a fresh generator
    built from ``config.seed``, in which case the seed alone reproduces them.
    """

    enh_weights: np.ndarray
    enh_bias: np.ndarray
    out_weights: np.ndarray
    config: BlsConfig
    seeded: bool = False

    def __post_init__(self):
        self.enh_weights = np.asarray(self.enh_weights, dtype=np.float64)
        self.enh_bias = np.asarray(self.enh_bias, dtype=np.float64)
        self.out_weights = np.asarray(self.out_weights, dtype=np.float64)
        d, m = self.enh_weights.shape
        if self.enh_bias.shape != (m,):
            raise ValueError("enhancement bias length must equal node count")
        if self.out_weights.shape[0] != d + m:
            raise ValueError(
                f"output weights must have {d + m} rows (features + nodes), "
                f"got {self.out_weights.shape[0]}"
            )

    @property
    def feature_dim(self) -> int:
        return self.enh_weights.shape[0]

    @property
    def num_classes(self) -> int:
        return self.out_weights.shape[1]


def gen_enhancement_params(feature_dim: int, config: BlsConfig,
                           rng: np.random.Generator
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Draw (W_h [D, m], beta_h [m]) i.i.d. uniform(-1, 1); W_h scaled by
    ``config.scale``."""
    if feature_dim < 1:
        raise ValueError(f"feature dimension must be >= 1, got {feature_dim}")
    w = rng.uniform(-1.0, 1.0, size=(feature_dim, config.m)) * config.scale
    b = rng.uniform(-1.0, 1.0, size=config.m)
    return w, b


def enhance(z: np.ndarray, enh_weights: np.ndarray,
            enh_bias: np.ndarray) -> np.ndarray:
    """Enhancement activations H = tansig(Z @ W_h + beta_h)."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != enh_weights.shape[0]:
        raise ValueError(
            f"feature matrix must be [N, {enh_weights.shape[0]}], got shape {z.shape}"
        )
    return tansig(z @ enh_weights + enh_bias)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """{0,1} indicator matrix [N, num_classes]."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be a vector, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    y = np.zeros((labels.size, num_classes))
    y[np.arange(labels.size), labels.astype(np.intp)] = 1.0
    return y


RIDGE_RESIDUAL_RTOL = 1e-8


def ridge_fit(design: np.ndarray, targets: np.ndarray,
              ridge_lambda: float) -> np.ndarray:
    """Solve W = (A'A + lambda I)^-1 A'Y without explicit inversion.

    Uses a Cholesky solve of the (D+m)-sized normal equations when N is at
    least the design width, otherwise the equivalent N-sized dual system
    W = A'(AA' + lambda I)^-1 Y. Iterative refinement reusing the
    factorization sharpens borderline-conditioned solves. Every solution
    is checked against the normal-equation residual bound
    ``max|(A'A + lambda I) W - A'Y| <= 1e-8 * max(1, max|A'Y|)``.
    """
    a = np.asarray(design, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if a.ndim != 2 or y.ndim != 2 or a.shape[0] != y.shape[0]:
        raise ValueError(
            f"design [N, D] and targets [N, C] must share N; got {a.shape} and {y.shape}"
        )
    n, d = a.shape
    if n < 1:
        raise ValueError("at least one sample required")
    if ridge_lambda < 0:
        raise ValueError(f"ridge lambda must be >= 0, got {ridge_lambda}")
    if ridge_lambda == 0.0 and n < d:
        raise np.linalg.LinAlgError(
            f"normal matrix is singular at lambda=0: rank(A'A) <= {n} < {d}; "
            "supply a positive lambda"
        )

    aty = a.T @ y
    if n >= d:
        gram = a.T @ a + ridge_lambda * np.eye(d)
    else:
        gram = a @ a.T + ridge_lambda * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"normal matrix is not positive definite at lambda={ridge_lambda:g} "
            f"(condition number ~{np.linalg.cond(gram):.3e}); increase lambda"
        ) from None
    if n >= d:
        rhs = aty
        w = scipy.linalg.cho_solve(factor, rhs)
    else:
        rhs = y
        w = scipy.linalg.cho_solve(factor, rhs)

    bound = RIDGE_RESIDUAL_RTOL * max(1.0, np.abs(aty).max())
    residual = np.inf
    for _ in range(4):
        # refinement reuses the factorization; stop once the bound is met
        if n >= d:
            candidate = np.ascontiguousarray(w)
        else:
            candidate = np.ascontiguousarray(a.T @ w)
        residual = np.abs(a.T @ (a @ candidate) + ridge_lambda * candidate - aty).max()
        if residual <= bound:
            break
        w = w + scipy.linalg.cho_solve(factor, rhs - (gram @ w))
    # C order keeps later matmuls bit-identical across save/load round-trips
    w = candidate
    if not residual <= bound:
        raise np.linalg.LinAlgError(
            f"ridge solution failed the residual bound: {residual:.3e} > {bound:.3e} "
            f"(lambda={ridge_lambda:g}, condition number ~{np.linalg.cond(gram):.3e})"
        )
    return w


def bls_fit(features: np.ndarray, labels: np.ndarray, config: BlsConfig,
            rng: np.random.Generator | None = None,
            num_classes: int | None = None) -> BlsHead:
    """Generate enhancement params, stack A = [Z | H], ridge-solve W_out.

    Without an explicit ``rng`` a fresh generator is built from
    ``config.seed`` (making the head reproducible from the seed alone).
    """
    z = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ValueError(f"features must be a non-empty [N, D] matrix, got {z.shape}")
    if labels.shape != (z.shape[0],):
        raise ValueError(
            f"labels must be a length-{z.shape[0]} vector, got shape {labels.shape}"
        )
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if len(np.unique(labels)) < 2:
        raise ValueError("at least 2 distinct classes required to fit a head")
    seeded = rng is None
    if rng is None:
        rng = np.random.default_rng(config.seed)
    enh_w, enh_b = gen_enhancement_params(z.shape[1], config, rng)
    design = np.hstack([z, enhance(z, enh_w, enh_b)])
    out_w = ridge_fit(design, one_hot(labels, num_classes), config.ridge_lambda)
    return BlsHead(enh_w, enh_b, out_w, config, seeded=seeded)


def bls_scores(head: BlsHead, features: np.ndarray) -> np.ndarray:
    z = np.asarray(features, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != head.feature_dim:
        raise ValueError(
            f"features must be [N, {head.feature_dim}], got shape {z.shape}"
        )
    design = np.hstack([z, enhance(z, head.enh_weights, head.enh_bias)])
    return design @ head.out_weights


def bls_predict(head: BlsHead, features: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """(scores [N, C], argmax classes [N]); ties break to the lowest index."""
    scores = bls_scores(head, features)
    return scores, scores.argmax(axis=1)


# ---------------------------------------------------------------------------
# Flat BLS baseline over raw clips
# ---------------------------------------------------------------------------

@dataclass
class FlatBlsConfig:
    """Flat baseline: random linear feature nodes over flattened clips."""

    n_feature_nodes: int = 100
    m: int = 8000
    input_width: int | None = None
    scale: float = 0.8
    ridge_lambda: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.n_feature_nodes < 1 or self.m < 1:
            raise ValueError("node counts must be >= 1")
        if self.input_width is not None and self.input_width < 1:
            raise ValueError(f"input width must be >= 1, got {self.input_width}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge lambda must be >= 0, got {self.ridge_lambda}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class FlatBlsModel:
    """Random linear feature map plus a fitted BLS head over its outputs."""

    feature_weights: np.ndarray
    feature_bias: np.ndarray
    head: BlsHead
    config: FlatBlsConfig


def flatten_clips(batch: np.ndarray) -> np.ndarray:
    """Flatten a clip batch [N, 2, P, 3, T, K] to [N, P*2*3*T*K].

    Per person the position image comes first, then motion; persons are
    concatenated in order (720 + 720 per person at SBU dims, 2880 total).
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 6 or batch.shape[1] != 2:
        raise ValueError(
            f"clip batch must be [N, 2, P, 3, T, K], got shape {batch.shape}"
        )
    persons_first = batch.transpose(0, 2, 1, 3, 4, 5)
    return persons_first.reshape(batch.shape[0], -1)


def flat_bls_fit(batch: np.ndarray, labels: np.ndarray, config: FlatBlsConfig,
                 rng: np.random.Generator | None = None,
                 num_classes: int | None = None) -> FlatBlsModel:
    """Fit the flat baseline: X -> Z = X @ W_f + b_f -> BLS head on Z."""
    x = flatten_clips(batch)
    if config.input_width is not None and x.shape[1] != config.input_width:
        raise ValueError(
            f"flattened width {x.shape[1]} does not match configured "
            f"input width {config.input_width}"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    feat_w = rng.uniform(-1.0, 1.0, size=(x.shape[1], config.n_feature_nodes))
    feat_b = rng.uniform(-1.0, 1.0, size=config.n_feature_nodes)
    z = x @ feat_w + feat_b
    head_config = BlsConfig(m=config.m, scale=config.scale,
                            ridge_lambda=config.ridge_lambda, seed=config.seed)
    head = bls_fit(z, labels, head_config, rng=rng, num_classes=num_classes)
    return FlatBlsModel(feat_w, feat_b, head, config)


def flat_bls_predict(model: FlatBlsModel, batch: np.ndarray
                     ) -> tuple[np.ndarray, np.ndarray]:
    x = flatten_clips(batch)
    if x.shape[1] != model.feature_weights.shape[0]:
        raise ValueError(
            f"flattened width {x.shape[1]} does not match the fitted "
            f"width {model.feature_weights.shape[0]}"
        )
    z = x @ model.feature_weights + model.feature_bias
    return bls_predict(model.head, z)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_head(head: BlsHead, directory, store_enhancement: bool = True,
              extra_manifest: dict | None = None) -> None:
    """Write the head to the shared parameter format.

    With ``store_enhancement=False`` only W_out is stored and (W_h, beta_h)
    are left to be regenerated from the seed; that requires a head fitted
    from its own seed (``head.seeded``).
    """
    if not store_enhancement and not head.seeded:
        raise ValueError(
            "cannot drop enhancement params: this head was fitted from an "
            "external rng, so the seed alone cannot regenerate them"
        )
    manifest = {
        "kind": "bls-head",
        "config": head.config.to_dict(),
        "feature_dim": head.feature_dim,
        "num_classes": head.num_classes,
        "stored_enhancement": bool(store_enhancement),
        "seeded": bool(head.seeded),
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    params = {"out_weights": head.out_weights}
    if store_enhancement:
        params["enh_weights"] = head.enh_weights
        params["enh_bias"] = head.enh_bias
    nn.save_params(directory, manifest, params)


def load_head(directory) -> BlsHead:
    manifest, params = nn.load_params(directory)
    if manifest.get("kind") != "bls-head":
        raise ValueError(f"not a BLS head directory: kind={manifest.get('kind')!r}")
    config = BlsConfig(**manifest["config"])
    if manifest["stored_enhancement"]:
        enh_w, enh_b = params["enh_weights"], params["enh_bias"]
    else:
        rng = np.random.default_rng(config.seed)
        enh_w, enh_b = gen_enhancement_params(manifest["feature_dim"], config, rng)
    return BlsHead(enh_w, enh_b, params["out_weights"], config,
                   seeded=manifest["seeded"])


def save_flat(model: FlatBlsModel, directory) -> None:
    """Write the flat baseline (feature map + head) in the shared format."""
    manifest = {"kind": "flat-bls", "config": model.config.to_dict(),
                "head_config": model.head.config.to_dict(),
                "seeded": bool(model.head.seeded)}
    nn.save_params(directory, manifest, {
        "feature_weights": model.feature_weights,
        "feature_bias": model.feature_bias,
        "enh_weights": model.head.enh_weights,
        "enh_bias": model.head.enh_bias,
        "out_weights": model.head.out_weights,
    })


def load_flat(directory) -> FlatBlsModel:
    manifest, params = nn.load_params(directory)
    if manifest.get("kind") != "flat-bls":
        raise ValueError(f"not a flat BLS directory: kind={manifest.get('kind')!r}")
    head = BlsHead(params["enh_weights"], params["enh_bias"],
                   params["out_weights"], BlsConfig(**manifest["head_config"]),
                   seeded=manifest.get("seeded", False))
    return FlatBlsModel(params["feature_weights"], params["feature_bias"],
                        head, FlatBlsConfig(**manifest["config"]))
