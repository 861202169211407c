"""Decision-based fairness metrics and the soft criterion evaluator.

``evaluate`` works on hard predictions.  For class ``i`` and group ``s``:

* TPR_i(s) = P(Yhat = i | Y = i, S = s)
* FPR_i(s) = P(Yhat = i | Y != i, S = s)
* Rate_i(s) = P(Yhat = i | S = s)

MEO is the largest over classes of the mean TPR-gap plus FPR-gap over group
pairs; statistical parity is the largest selection-rate gap.  Both are 0 by
definition when there is a single group.

``criterion_value`` measures how far soft scores sit from the multiplicative
band form of each criterion: it returns ``max |ratio - 1|`` over the
criterion's cells, the quantity the constraint rows bound by alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import GroupModel
from .exceptions import UndefinedRateError


@dataclass
class EvaluationReport:
    accuracy: float
    meo: float
    statistical_parity: float
    tpr: np.ndarray  # A x C
    fpr: np.ndarray  # A x C
    rate: np.ndarray  # A x C


def decide(scores: np.ndarray) -> np.ndarray:
    """Argmax decisions; ties go to the lowest class index."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ValueError("scores must be N x C")
    return scores.argmax(axis=1)


def _pair_gap(table: np.ndarray) -> np.ndarray:
    """Per-class max over group pairs of |table[s1, c] - table[s2, c]|."""
    return table.max(axis=0) - table.min(axis=0)


def evaluate(
    pred: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    num_classes: int | None = None,
    num_groups: int | None = None,
) -> EvaluationReport:
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if not (pred.shape == labels.shape == groups.shape) or pred.ndim != 1:
        raise ValueError("pred, labels, groups must be equal-length 1-D arrays")
    if pred.size == 0:
        raise ValueError("empty evaluation input")
    num_c = int(num_classes or max(labels.max(), pred.max()) + 1)
    num_a = int(num_groups or groups.max() + 1)

    accuracy = float(np.mean(pred == labels))
    tpr = np.full((num_a, num_c), np.nan)
    fpr = np.full((num_a, num_c), np.nan)
    rate = np.full((num_a, num_c), np.nan)
    for a in range(num_a):
        in_a = groups == a
        if not in_a.any():
            raise ValueError(f"group {a} has no samples")
        for c in range(num_c):
            pos = in_a & (labels == c)
            neg = in_a & (labels != c)
            hit = pred == c
            rate[a, c] = np.mean(hit[in_a])
            if pos.any():
                tpr[a, c] = np.mean(hit[pos])
            if neg.any():
                fpr[a, c] = np.mean(hit[neg])
    if num_a == 1:
        return EvaluationReport(accuracy, 0.0, 0.0, tpr, fpr, rate)
    for name, table in (("TPR", tpr), ("FPR", fpr)):
        if np.isnan(table).any():
            a, c = np.argwhere(np.isnan(table))[0]
            raise UndefinedRateError(f"{name} undefined: (group {a}, class {c}) cell is empty")
    meo = float(np.max(0.5 * (_pair_gap(tpr) + _pair_gap(fpr))))
    sp = float(np.max(_pair_gap(rate)))
    return EvaluationReport(accuracy, meo, sp, tpr, fpr, rate)


def criterion_value(
    scores: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    metric: str,
    base_scores: np.ndarray | None = None,
    group_model: GroupModel | None = None,
) -> float:
    """Largest relative deviation ``|ratio - 1|`` of the criterion's cells.

    Rates are computed from the soft scores.  For eo and oae the class of a
    sample is taken from ``labels`` unless ``base_scores`` is given, in which
    case class membership is weighted by the base scores; that variant
    reproduces the constraint rows' algebra exactly.  Reference marginals come
    from ``group_model`` when supplied, else from empirical frequencies.
    """
    h = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    if h.ndim != 2 or labels.shape != (h.shape[0],) or groups.shape != (h.shape[0],):
        raise ValueError("shape mismatch between scores, labels and groups")
    n, num_c = h.shape
    num_a = int(groups.max()) + 1 if group_model is None else group_model.num_groups
    onehot_g = np.zeros((n, num_a))
    onehot_g[np.arange(n), groups] = 1.0
    if base_scores is not None:
        w = np.asarray(base_scores, dtype=float)
        if w.shape != h.shape:
            raise ValueError("base_scores shape mismatch")
    else:
        w = np.zeros((n, num_c))
        w[np.arange(n), labels] = 1.0

    if group_model is not None:
        p_s = group_model.p_s
        p_s_given_y = group_model.p_s_given_y
    else:
        p_s = onehot_g.mean(axis=0)
        cls_count = np.array([(labels == c).sum() for c in range(num_c)], dtype=float)
        if np.any(cls_count == 0):
            raise UndefinedRateError("a class has no samples; conditional marginals undefined")
        p_s_given_y = (onehot_g.T @ (labels[:, None] == np.arange(num_c))) / cls_count
    if np.any(p_s <= 0.0):
        raise UndefinedRateError("a group has no mass")

    if metric == "sp":
        total = h.sum(axis=0)  # mass of each predicted class
        share = onehot_g.T @ h  # A x C: group share of that mass
        ratio = share / total[None, :] / p_s[:, None]
    elif metric == "eo":
        # mass[a, y, c'] of samples in group a, class y (by weight w), predicted c'
        mass = np.einsum("ia,iy,ic->ayc", onehot_g, w, h)
        total = mass.sum(axis=0)  # y, c'
        if np.any(total <= 0.0):
            raise UndefinedRateError("an (class, prediction) cell carries no mass")
        if np.any(p_s_given_y <= 0.0):
            raise UndefinedRateError("a (group, class) marginal is zero")
        ratio = mass / total[None, :, :] / p_s_given_y[:, :, None]
    elif metric == "oae":
        agree = np.sum(w * h, axis=1)  # soft per-sample accuracy
        total = agree.sum()
        share = onehot_g.T @ agree
        ratio = share / total / p_s
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return float(np.max(np.abs(ratio - 1.0)))
