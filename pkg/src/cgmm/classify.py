"""Multinomial logistic regression on fingerprints, plus stratified splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from .errors import DataError

__all__ = [
    "LinearModel",
    "accuracy",
    "softmax_loss",
    "stratified_folds",
    "stratified_split",
    "train_linear",
]


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Per-class affine scores on standardized features.

    ``weights`` has shape ``(n_classes, n_features + 1)``; the last column
    is the bias.
    """

    classes: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        Xs = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Xs @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def softmax_loss(W: np.ndarray, Xs: np.ndarray, Y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` (bias excluded) and its gradient.

    ``W`` is ``(K, d+1)``, ``Xs`` is ``(n, d)`` and ``Y`` one-hot ``(n, K)``.
    """
    n = Xs.shape[0]
    logits = Xs @ W[:, :-1].T + W[:, -1]
    logp = log_softmax(logits, axis=1)
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W[:, :-1] ** 2)
    delta = (np.exp(logp) - Y) / n
    grad = np.empty_like(W)
    grad[:, :-1] = delta.T @ Xs + l2 * W[:, :-1]
    grad[:, -1] = delta.sum(axis=0)
    return loss, grad


def train_linear(X, y, l2: float = 1e-2, max_iter: int = 200, tol: float = 1e-6) -> LinearModel:
    """Fit by L-BFGS on the mean regularized logistic loss.

    The loss is an average over samples, so duplicating the training set
    leaves the optimum unchanged. Weights start at zero and biases at the
    class log-frequencies; ``max_iter=0`` therefore predicts the majority
    class.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("feature matrix and targets have inconsistent shapes")
    if np.isnan(X).any():
        raise DataError("NaN in features")
    classes, yi = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise DataError("need at least two classes to train a classifier")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    K, d = len(classes), X.shape[1]
    Y = np.eye(K)[yi]

    W0 = np.zeros((K, d + 1))
    W0[:, -1] = np.log(np.bincount(yi, minlength=K) / len(yi))
    if max_iter > 0:
        res = minimize(
            lambda w: _flat(softmax_loss(w.reshape(K, d + 1), Xs, Y, l2)),
            W0.ravel(), jac=True, method="L-BFGS-B",
            options=dict(maxiter=max_iter, gtol=tol),
        )
        W0 = res.x.reshape(K, d + 1)
    return LinearModel(classes, mean, scale, W0)


def _flat(loss_grad):
    loss, grad = loss_grad
    return loss, grad.ravel()


def accuracy(model: LinearModel, X, y) -> float:
    return float(np.mean(model.predict(X) == np.asarray(y)))


def stratified_folds(y, n_folds: int, seed) -> list[np.ndarray]:
    """Split sample indices into ``n_folds`` test folds with balanced class counts."""
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if np.any(counts < n_folds):
        raise DataError(
            f"stratified {n_folds}-fold split needs >= {n_folds} samples per class "
            f"(smallest class has {counts.min()})"
        )
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        fold_of[members] = (offset + np.arange(len(members))) % n_folds
        offset += len(members)
    return [np.flatnonzero(fold_of == k) for k in range(n_folds)]


def stratified_split(y, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Hold out about ``fraction`` of each class; returns ``(train_idx, holdout_idx)``.

    Classes with a single member stay entirely in the training part.
    """
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    hold = []
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        k = int(round(fraction * len(members)))
        if len(members) >= 2:
            k = min(max(k, 1), len(members) - 1)
        else:
            k = 0
        hold.append(members[:k])
    hold = np.sort(np.concatenate(hold))
    train = np.setdiff1d(np.arange(len(y)), hold)
    return train, hold
