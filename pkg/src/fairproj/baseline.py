"""Self-contained multinomial logistic regression.

Used for the base label model and the group-membership model so the package
carries no ML-framework dependency.  Deterministic by construction: features
are standardized, weights start at zero, and training is full-batch gradient
descent on the softmax cross-entropy with an L2 penalty on the non-bias rows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .divergence import clip_scores, softmax
from .exceptions import InvalidModelError

FORMAT_HEADER = "fairproj-linmodel v1"


@dataclass
class LinearModel:
    weights: np.ndarray  # (d + 1) x C, last row is the bias
    feature_mean: np.ndarray
    feature_std: np.ndarray
    final_grad_norm: float = 0.0
    dropped: tuple = ()

    @property
    def num_classes(self) -> int:
        return self.weights.shape[1]

    @property
    def num_features(self) -> int:
        return self.weights.shape[0] - 1


def _standardize(features: np.ndarray):
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be N x d")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    dropped = tuple(int(j) for j in np.nonzero(std == 0.0)[0])
    if dropped:
        warnings.warn(f"zero-variance feature columns dropped: {dropped}")
        std = std.copy()
        std[list(dropped)] = 1.0
    return mean, std, dropped


def loss_and_grad(weights: np.ndarray, xa: np.ndarray, onehot: np.ndarray, l2: float):
    """Penalized cross-entropy loss and its gradient on augmented features.

    The bias row (last) is excluded from the L2 term.
    """
    n = xa.shape[0]
    logits = xa @ weights
    m = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    mask = np.ones_like(weights)
    mask[-1, :] = 0.0
    loss = float(np.mean(lse - np.sum(logits * onehot, axis=1))) + 0.5 * l2 * float(
        np.sum((mask * weights) ** 2)
    )
    p = softmax(logits)
    grad = xa.T @ (p - onehot) / n + l2 * (mask * weights)
    return loss, grad


def fit_logreg(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int | None = None,
    l2: float = 1e-4,
    lr: float = 0.1,
    epochs: int = 500,
    seed: int = 0,
) -> LinearModel:
    """Fit by full-batch gradient descent.

    ``seed`` is accepted for interface stability but unused: zero
    initialization makes the fit deterministic on its own.
    """
    del seed
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if y.ndim != 1 or y.size != x.shape[0]:
        raise ValueError("labels must be 1-D and match features")
    if l2 < 0 or lr <= 0 or epochs < 1:
        raise ValueError("l2 must be >= 0, lr > 0, epochs >= 1")
    num_c = int(num_classes or y.max() + 1)
    n = x.shape[0]
    mean, std, dropped = _standardize(x)
    xs = (x - mean) / std
    xa = np.hstack([xs, np.ones((n, 1))])
    onehot = np.zeros((n, num_c))
    onehot[np.arange(n), y] = 1.0

    w = np.zeros((xa.shape[1], num_c))
    for _ in range(epochs):
        _, grad = loss_and_grad(w, xa, onehot, l2)
        w = w - lr * grad
    _, grad = loss_and_grad(w, xa, onehot, l2)
    return LinearModel(
        weights=w,
        feature_mean=mean,
        feature_std=std,
        final_grad_norm=float(np.linalg.norm(grad)),
        dropped=dropped,
    )


def predict_proba(model: LinearModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise InvalidModelError(
            f"model expects {model.num_features} features, got {x.shape[1] if x.ndim == 2 else 'non-matrix'}"
        )
    xs = (x - model.feature_mean) / model.feature_std
    xa = np.hstack([xs, np.ones((x.shape[0], 1))])
    return clip_scores(softmax(xa @ model.weights))


@dataclass
class GroupPredictor:
    """Predicts group membership from features and a hypothetical label."""

    model: LinearModel
    num_classes: int

    @property
    def num_groups(self) -> int:
        return self.model.num_classes

    def membership(self, features: np.ndarray) -> np.ndarray:
        """N x A x C tensor of P(S = a | x, Y = c) over hypothetical labels c."""
        x = np.asarray(features, dtype=float)
        n = x.shape[0]
        out = np.zeros((n, self.num_groups, self.num_classes))
        for c in range(self.num_classes):
            onehot = np.zeros((n, self.num_classes))
            onehot[:, c] = 1.0
            out[:, :, c] = predict_proba(self.model, np.hstack([x, onehot]))
        return out


def fit_group_model(
    features: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    num_classes: int | None = None,
    num_groups: int | None = None,
    **fit_kwargs,
) -> GroupPredictor:
    """Fit the group model on features augmented with the one-hot label."""
    y = np.asarray(labels)
    g = np.asarray(groups)
    num_c = int(num_classes or y.max() + 1)
    num_a = int(num_groups or g.max() + 1)
    onehot = np.zeros((y.size, num_c))
    onehot[np.arange(y.size), y] = 1.0
    aug = np.hstack([np.asarray(features, dtype=float), onehot])
    model = fit_logreg(aug, g, num_classes=num_a, **fit_kwargs)
    return GroupPredictor(model=model, num_classes=num_c)


def save_model(model: LinearModel, path: str) -> None:
    """Versioned flat text: header, dims, row-major weights, then the
    standardization vectors.  Floats use repr precision so loads round-trip
    exactly."""
    lines = [FORMAT_HEADER, f"{model.num_features} {model.num_classes}"]
    for row in model.weights:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append(" ".join(f"{v:.17g}" for v in model.feature_mean))
    lines.append(" ".join(f"{v:.17g}" for v in model.feature_std))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> LinearModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != FORMAT_HEADER:
        raise InvalidModelError(f"bad header; expected {FORMAT_HEADER!r}")
    try:
        d, c = (int(t) for t in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise InvalidModelError("missing or malformed dims line") from exc
    expected = 2 + (d + 1) + 2
    if len(lines) < expected:
        raise InvalidModelError("truncated file: missing weights or standardization section")
    try:
        weights = np.array([[float(t) for t in lines[2 + r].split()] for r in range(d + 1)])
        mean = np.array([float(t) for t in lines[2 + d + 1].split()])
        std = np.array([float(t) for t in lines[2 + d + 2].split()])
    except ValueError as exc:
        raise InvalidModelError("malformed numeric row") from exc
    if weights.shape != (d + 1, c) or mean.size != d or std.size != d:
        raise InvalidModelError("dims line disagrees with row lengths")
    return LinearModel(weights=weights, feature_mean=mean, feature_std=std)
