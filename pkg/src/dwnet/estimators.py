"""Estimator-style interface: fit/predict classifiers and a feature transformer.

Thin adapters over the functional layer following the scikit-learn
conventions (constructor stores hyperparameters verbatim, ``fit`` validates
and learns, fitted state lives in trailing-underscore attributes, so
``get_params``/``set_params``/``clone`` work). X is skeleton data (a list of
SkeletonSequence, a list of ClipTensors, or a clip batch array
[N, 2, P, 3, T, K]), not a 2D feature matrix, except for BlsClassifier
which consumes precomputed feature rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from . import nn
from .bls import (
    BlsConfig,
    FlatBlsConfig,
    bls_fit,
    bls_predict,
    flat_bls_fit,
    flat_bls_predict,
)
from .data import encode_batch
from .hcn import HcnConfig, build_hcn, forward_batch, hcn_train, prune, pruhcn_features
from .models import dwnet_fit, dwnet_predict, hcnbls_fit, hcnbls_predict
from .validation import (
    check_features,
    encode_labels,
    labels_from,
    relabel_sequences,
    split_input,
)


def _spawn_seeds(random_state: int, n: int) -> list[int]:
    """Derive n independent integer seeds from one root seed."""
    return [int(s) for s in np.random.SeedSequence(random_state).generate_state(n)]


class _ClipClassifier(ClassifierMixin, BaseEstimator):
    """Shared plumbing: label encoding and input dispatch."""

    def _encode_y(self, X, y):
        y = labels_from(X, y)
        kind, data = split_input(X)
        n = len(data) if kind == "sequences" else data.shape[0]
        self.classes_, y_idx = encode_labels(y, n)
        if kind == "sequences":
            return "sequences", relabel_sequences(data, y_idx), y_idx
        return "batch", data, y_idx

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError(
                f"this {type(self).__name__} instance is not fitted yet"
            )

    @staticmethod
    def _as_batch(X, t_frames, joints):
        kind, data = split_input(X)
        if kind == "sequences":
            batch, _ = encode_batch(data, t_frames, joints)
            return batch
        return data


class HcnClassifier(_ClipClassifier):
    """Full HCN trained with minibatch momentum SGD.

    Parameters mirror HcnConfig plus the SGD settings; ``random_state``
    seeds both the weight init and the training-loop randomness.
    """

    def __init__(self, t_frames=16, joints=15, persons=2,
                 channels=(64, 32, 32, 64, 128), feature_dim=64,
                 dropout_rate=0.5, crop_ratio=None, learning_rate=0.01,
                 momentum=0.9, weight_decay=1e-4, epochs=300, batch_size=32,
                 random_state=0):
        self.t_frames = t_frames
        self.joints = joints
        self.persons = persons
        self.channels = channels
        self.feature_dim = feature_dim
        self.dropout_rate = dropout_rate
        self.crop_ratio = crop_ratio
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _config(self, num_classes: int, sgd_seed: int) -> HcnConfig:
        return HcnConfig(
            t_frames=self.t_frames, joints=self.joints, persons=self.persons,
            num_classes=num_classes, channels=tuple(self.channels),
            feature_dim=self.feature_dim, dropout_rate=self.dropout_rate,
            crop_ratio=self.crop_ratio,
            sgd=nn.SgdConfig(learning_rate=self.learning_rate,
                             momentum=self.momentum,
                             weight_decay=self.weight_decay,
                             epochs=self.epochs, batch_size=self.batch_size,
                             seed=sgd_seed),
        )

    def fit(self, X, y=None):
        kind, data, y_idx = self._encode_y(X, y)
        init_seed, sgd_seed = _spawn_seeds(self.random_state, 2)
        self.config_ = self._config(len(self.classes_), sgd_seed)
        model = build_hcn(self.config_, init_seed)
        train = data if kind == "sequences" else (data, y_idx)
        self.model_, self.history_ = hcn_train(model, train)
        return self

    def decision_function(self, X):
        self._check_fitted()
        batch = self._as_batch(X, self.config_.t_frames, self.config_.joints)
        logits, _ = forward_batch(self.model_, batch)
        return logits

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class PruHcnFeatures(TransformerMixin, BaseEstimator):
    """Trains an HCN, prunes it, and transforms clips to D-dim features.

    ``hcn`` is a nested HcnClassifier carrying architecture and SGD
    settings (a default one is used when omitted).
    """

    def __init__(self, hcn=None):
        self.hcn = hcn

    def fit(self, X, y=None):
        base = self.hcn if self.hcn is not None else HcnClassifier()
        self.hcn_ = base.__class__(**base.get_params())
        self.hcn_.fit(X, y)
        self.pruhcn_ = prune(self.hcn_.model_)
        return self

    def transform(self, X):
        if not hasattr(self, "pruhcn_"):
            raise RuntimeError("this PruHcnFeatures instance is not fitted yet")
        batch = _ClipClassifier._as_batch(X, self.pruhcn_.config.t_frames,
                                          self.pruhcn_.config.joints)
        return pruhcn_features(self.pruhcn_, batch)


class DwnetClassifier(_ClipClassifier):
    """DWnet: trained-then-pruned HCN features plus a BLS head."""

    def __init__(self, hcn=None, m=550, scale=0.8, ridge_lambda=1e-8,
                 random_state=0):
        self.hcn = hcn
        self.m = m
        self.scale = scale
        self.ridge_lambda = ridge_lambda
        self.random_state = random_state

    def fit(self, X, y=None):
        kind, data, y_idx = self._encode_y(X, y)
        init_seed, sgd_seed, bls_seed = _spawn_seeds(self.random_state, 3)
        base = self.hcn if self.hcn is not None else HcnClassifier()
        hcn_config = base._config(len(self.classes_), sgd_seed)
        bls_config = BlsConfig(m=self.m, scale=self.scale,
                               ridge_lambda=self.ridge_lambda, seed=bls_seed)
        train = data if kind == "sequences" else (data, y_idx)
        self.model_ = dwnet_fit(train, None, hcn_config, bls_config,
                                init_seed=init_seed)
        return self

    def decision_function(self, X):
        self._check_fitted()
        cfg = self.model_.pruhcn.config
        batch = self._as_batch(X, cfg.t_frames, cfg.joints)
        _, scores = dwnet_predict(self.model_, batch)
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class HcnblsClassifier(_ClipClassifier):
    """HCNBLS baseline: untrained random PruHCN mappers plus a BLS head."""

    def __init__(self, hcn=None, n_mappers=15, m=550, scale=0.8,
                 ridge_lambda=1e-8, random_state=0):
        self.hcn = hcn
        self.n_mappers = n_mappers
        self.m = m
        self.scale = scale
        self.ridge_lambda = ridge_lambda
        self.random_state = random_state

    def fit(self, X, y=None):
        kind, data, y_idx = self._encode_y(X, y)
        mappers_seed, bls_seed = _spawn_seeds(self.random_state, 2)
        base = self.hcn if self.hcn is not None else HcnClassifier()
        hcn_config = base._config(len(self.classes_), sgd_seed=0)
        bls_config = BlsConfig(m=self.m, scale=self.scale,
                               ridge_lambda=self.ridge_lambda, seed=bls_seed)
        train = data if kind == "sequences" else (data, y_idx)
        self.model_ = hcnbls_fit(train, hcn_config, bls_config,
                                 n_mappers=self.n_mappers, seed=mappers_seed)
        return self

    def decision_function(self, X):
        self._check_fitted()
        cfg = self.model_.hcn_config
        batch = self._as_batch(X, cfg.t_frames, cfg.joints)
        _, scores = hcnbls_predict(self.model_, batch)
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class FlatBlsClassifier(_ClipClassifier):
    """Flat BLS over raw flattened clips (no convolution anywhere)."""

    def __init__(self, n_feature_nodes=100, m=8000, scale=0.8,
                 ridge_lambda=1e-8, t_frames=16, joints=15, random_state=0):
        self.n_feature_nodes = n_feature_nodes
        self.m = m
        self.scale = scale
        self.ridge_lambda = ridge_lambda
        self.t_frames = t_frames
        self.joints = joints
        self.random_state = random_state

    def fit(self, X, y=None):
        y = labels_from(X, y)
        batch = self._as_batch(X, self.t_frames, self.joints)
        self.classes_, y_idx = encode_labels(y, batch.shape[0])
        config = FlatBlsConfig(n_feature_nodes=self.n_feature_nodes, m=self.m,
                               scale=self.scale, ridge_lambda=self.ridge_lambda,
                               seed=self.random_state)
        self.model_ = flat_bls_fit(batch, y_idx, config)
        return self

    def decision_function(self, X):
        self._check_fitted()
        batch = self._as_batch(X, self.t_frames, self.joints)
        scores, _ = flat_bls_predict(self.model_, batch)
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]


class BlsClassifier(ClassifierMixin, BaseEstimator):
    """BLS head over precomputed feature rows (X is a plain [N, D] matrix)."""

    def __init__(self, m=550, scale=0.8, ridge_lambda=1e-8, random_state=0):
        self.m = m
        self.scale = scale
        self.ridge_lambda = ridge_lambda
        self.random_state = random_state

    def fit(self, X, y):
        x = check_features(X)
        self.classes_, y_idx = encode_labels(y, x.shape[0])
        config = BlsConfig(m=self.m, scale=self.scale,
                           ridge_lambda=self.ridge_lambda,
                           seed=self.random_state)
        self.model_ = bls_fit(x, y_idx, config)
        return self

    def decision_function(self, X):
        if not hasattr(self, "model_"):
            raise RuntimeError("this BlsClassifier instance is not fitted yet")
        x = check_features(X, expected_dim=self.model_.feature_dim)
        scores, _ = bls_predict(self.model_, x)
        return scores

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]
