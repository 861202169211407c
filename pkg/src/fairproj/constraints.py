"""Linear group-fairness constraints on the post-processed classifier.

Each fairness criterion is a family of bounds ``E[G(X) h(X)] <= 0`` where
``G(X)`` is a per-sample K x C matrix assembled from the base scores, the
sample's group memberships, and the group marginals.  Rows come in pairs
indexed by ``delta`` in {0, 1}: ``delta = 0`` bounds a conditional rate above
by ``(1 + alpha)`` times its reference, ``delta = 1`` bounds it below by
``(1 - alpha)`` times the reference.

Group membership is a tensor ``s[i, a, c] = P(S = a | X = x_i, Y = c)``; for
observed groups it is an indicator independent of ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateMarginalError

METRICS = ("sp", "eo", "oae")

_MARGINAL_FLOOR = 1e-12


@dataclass
class GroupModel:
    """Per-sample group memberships plus the marginals constraints divide by.

    ``group_probs`` may be None for a marginals-only model (what a fitted
    projection carries); ``empty_cells[a, c]`` flags (group, class) cells with
    no raw probability mass, which poison equalized-odds denominators.
    """

    group_probs: np.ndarray | None
    p_s: np.ndarray
    p_s_given_y: np.ndarray
    empty_cells: np.ndarray = field(default=None)

    def __post_init__(self):
        self.p_s = np.asarray(self.p_s, dtype=float)
        self.p_s_given_y = np.asarray(self.p_s_given_y, dtype=float)
        if self.empty_cells is None:
            self.empty_cells = np.zeros(self.p_s_given_y.shape, dtype=bool)
        if self.p_s.ndim != 1 or self.p_s_given_y.shape[0] != self.p_s.size:
            raise ValueError("marginal shapes disagree")
        if np.any(self.p_s <= 0.0) or np.any(self.p_s_given_y <= 0.0):
            raise ValueError("marginals must be strictly positive (floored)")
        if self.group_probs is not None:
            self.group_probs = np.asarray(self.group_probs, dtype=float)
            n, a, c = self.group_probs.shape
            if (a, c) != self.p_s_given_y.shape:
                raise ValueError("group_probs shape disagrees with marginals")
            if np.any(self.group_probs < 0.0) or np.any(self.group_probs > 1.0):
                raise ValueError("group_probs entries must lie in [0, 1]")
            col_sums = self.group_probs.sum(axis=1)
            if np.max(np.abs(col_sums - 1.0)) > 1e-6:
                raise ValueError("group_probs must sum to 1 over groups per class slice")

    @property
    def num_groups(self) -> int:
        return self.p_s.size

    @property
    def num_classes(self) -> int:
        return self.p_s_given_y.shape[1]


def _floor_normalize(raw: np.ndarray, axis: int = -1) -> np.ndarray:
    floored = np.maximum(raw, _MARGINAL_FLOOR)
    return floored / floored.sum(axis=axis, keepdims=True)


def membership_tensor(groups: np.ndarray, num_groups: int, num_classes: int) -> np.ndarray:
    """Indicator membership tensor for observed integer group ids."""
    groups = np.asarray(groups)
    if groups.ndim != 1:
        raise ValueError("observed groups must be a 1-D id array")
    if groups.min() < 0 or groups.max() >= num_groups:
        raise ValueError("group id out of range")
    probs = np.zeros((groups.size, num_groups, num_classes))
    probs[np.arange(groups.size), groups, :] = 1.0
    return probs


def estimate_group_model(
    groups: np.ndarray,
    labels: np.ndarray,
    num_groups: int | None = None,
    num_classes: int | None = None,
) -> GroupModel:
    """Estimate group marginals from observed ids or a membership tensor.

    ``groups`` is either a length-N id array or an N x A x C probability
    tensor.  Marginals are floored at 1e-12 and renormalized; cells whose raw
    mass is zero are flagged in ``empty_cells``.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError("labels must be 1-D")
    n = labels.size
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("label out of range")

    groups = np.asarray(groups)
    if groups.ndim == 1:
        if groups.size != n:
            raise ValueError("groups and labels length mismatch")
        if num_groups is None:
            num_groups = int(groups.max()) + 1
        probs = membership_tensor(groups, num_groups, num_classes)
    elif groups.ndim == 3:
        probs = np.asarray(groups, dtype=float)
        if probs.shape[0] != n or (num_classes and probs.shape[2] != num_classes):
            raise ValueError("membership tensor shape mismatch")
        num_groups = probs.shape[1]
    else:
        raise ValueError("groups must be ids or an N x A x C tensor")

    # Mass of group a among samples, and among samples of each class, taking
    # each sample's membership at its observed label.
    at_label = probs[np.arange(n), :, labels]  # N x A
    raw_p_s = at_label.sum(axis=0) / n
    raw_cond = np.zeros((num_groups, num_classes))
    counts = np.zeros(num_classes)
    for c in range(num_classes):
        mask = labels == c
        counts[c] = mask.sum()
        if counts[c] > 0:
            raw_cond[:, c] = at_label[mask].sum(axis=0) / counts[c]
    empty = raw_cond <= 0.0
    return GroupModel(
        group_probs=probs,
        p_s=_floor_normalize(raw_p_s),
        p_s_given_y=_floor_normalize(raw_cond, axis=0),
        empty_cells=empty,
    )


def group_model_for(
    frozen: GroupModel, groups: np.ndarray, num_classes: int | None = None
) -> GroupModel:
    """A GroupModel for new samples reusing frozen marginals."""
    if num_classes is None:
        num_classes = frozen.num_classes
    groups = np.asarray(groups)
    if groups.ndim == 3:
        probs = groups
    else:
        probs = membership_tensor(groups, frozen.num_groups, num_classes)
    return GroupModel(
        group_probs=probs,
        p_s=frozen.p_s,
        p_s_given_y=frozen.p_s_given_y,
        empty_cells=frozen.empty_cells,
    )


@dataclass
class ConstraintSet:
    """Stacked per-sample constraint matrices for one criterion at level alpha."""

    metric: str
    alpha: float
    g: np.ndarray  # N x K x C
    row_index: list

    def __post_init__(self):
        if not np.all(np.isfinite(self.g)):
            raise ValueError("constraint matrices must be finite")

    @property
    def num_rows(self) -> int:
        return self.g.shape[1]


def _check_alpha(alpha: float):
    # alpha >= 1 keeps the upper band only; still a valid (slack) constraint.
    if not (alpha > 0.0 and np.isfinite(alpha)):
        raise ValueError("alpha must be a positive real")


def _signs():
    # delta = 0 row uses +1, delta = 1 row uses -1.
    return np.array([1.0, -1.0])


def build_sp(scores: np.ndarray, gm: GroupModel, alpha: float) -> ConstraintSet:
    """Statistical parity: each class's selection rate within a group stays
    within a (1 +/- alpha) band of the overall rate.  K = 2AC rows."""
    _check_alpha(alpha)
    p = np.asarray(scores, dtype=float)
    n, num_c = p.shape
    num_a = gm.num_groups
    # soft_s[i, a] estimates P(S = a | x_i) by marginalizing memberships over
    # the base scores.
    soft_s = np.einsum("iac,ic->ia", gm.group_probs, p)
    sign = _signs()
    coef = (
        sign[None, :, None] * soft_s[:, None, :] / gm.p_s[None, None, :]
        - (alpha + sign)[None, :, None]
    )  # N x 2 x A
    g = np.zeros((n, 2, num_a, num_c, num_c))
    idx = np.arange(num_c)
    g[:, :, :, idx, idx] = coef[:, :, :, None]
    rows = [(d, a, cp) for d in (0, 1) for a in range(num_a) for cp in range(num_c)]
    return ConstraintSet(metric="sp", alpha=alpha, g=g.reshape(n, 2 * num_a * num_c, num_c), row_index=rows)


def build_eo(scores: np.ndarray, gm: GroupModel, alpha: float) -> ConstraintSet:
    """Equalized odds: each confusion rate P(Yhat = c' | Y = y, S = a) stays
    within a (1 +/- alpha) band of P(Yhat = c' | Y = y).  K = 2AC^2 rows."""
    _check_alpha(alpha)
    p = np.asarray(scores, dtype=float)
    n, num_c = p.shape
    num_a = gm.num_groups
    if np.any(gm.empty_cells):
        a, c = np.argwhere(gm.empty_cells)[0]
        raise DegenerateMarginalError(
            f"equalized odds needs mass in every (group, class) cell; cell ({a}, {c}) is empty"
        )
    sign = _signs()
    weighted = gm.group_probs * p[:, None, :]  # s_a(x, c) * p_c
    coef = (
        sign[None, :, None, None] * weighted[:, None, :, :] / gm.p_s_given_y[None, None, :, :]
        - (alpha + sign)[None, :, None, None] * p[:, None, None, :]
    )  # N x 2 x A x C
    g = np.zeros((n, 2, num_a, num_c, num_c, num_c))
    idx = np.arange(num_c)
    g[:, :, :, :, idx, idx] = coef[:, :, :, :, None]
    rows = [
        (d, a, y, cp)
        for d in (0, 1)
        for a in range(num_a)
        for y in range(num_c)
        for cp in range(num_c)
    ]
    return ConstraintSet(
        metric="eo", alpha=alpha, g=g.reshape(n, 2 * num_a * num_c * num_c, num_c), row_index=rows
    )


def build_oae(scores: np.ndarray, gm: GroupModel, alpha: float) -> ConstraintSet:
    """Overall accuracy equality: soft accuracy within each group stays within
    a (1 +/- alpha) band of the population's.  K = 2A rows."""
    _check_alpha(alpha)
    p = np.asarray(scores, dtype=float)
    n, num_c = p.shape
    num_a = gm.num_groups
    sign = _signs()
    weighted = gm.group_probs * p[:, None, :]
    g = (
        sign[None, :, None, None] * weighted[:, None, :, :] / gm.p_s[None, None, :, None]
        - (alpha + sign)[None, :, None, None] * p[:, None, None, :]
    )  # N x 2 x A x C
    rows = [(d, a) for d in (0, 1) for a in range(num_a)]
    return ConstraintSet(metric="oae", alpha=alpha, g=g.reshape(n, 2 * num_a, num_c), row_index=rows)


_BUILDERS = {"sp": build_sp, "eo": build_eo, "oae": build_oae}


def build_constraints(metric: str, scores: np.ndarray, gm: GroupModel, alpha: float) -> ConstraintSet:
    if metric not in _BUILDERS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    if gm.group_probs is None:
        raise ValueError("GroupModel has no per-sample memberships")
    if gm.group_probs.shape[0] != np.asarray(scores).shape[0]:
        raise ValueError("scores and group memberships disagree on sample count")
    if gm.num_classes != np.asarray(scores).shape[1]:
        raise ValueError("scores and group memberships disagree on class count")
    return _BUILDERS[metric](scores, gm, alpha)
