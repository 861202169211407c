"""Tabular data loading, splitting, and the seeded synthetic generator.

CSV files are comma-delimited UTF-8 with a header row.  Label and group
columns hold either nonnegative integers (used directly as dense ids) or
categorical strings, which are mapped to dense ids in order of first
appearance; the mapping is recorded on the dataset.  Score files carry one
column per class; rows are clipped and renormalized on load.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .divergence import clip_scores
from .exceptions import CsvParseError, CsvSchemaError


@dataclass
class TabularDataset:
    features: np.ndarray | None
    labels: np.ndarray
    groups: np.ndarray
    scores: np.ndarray | None = None
    feature_names: list = field(default_factory=list)
    label_mapping: dict = field(default_factory=dict)
    group_mapping: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.labels.size

    def take(self, idx: np.ndarray) -> "TabularDataset":
        return TabularDataset(
            features=None if self.features is None else self.features[idx],
            labels=self.labels[idx],
            groups=self.groups[idx],
            scores=None if self.scores is None else self.scores[idx],
            feature_names=self.feature_names,
            label_mapping=self.label_mapping,
            group_mapping=self.group_mapping,
            notes=self.notes,
        )


def _map_ids(raw: list, colname: str):
    """Integer literals pass through as ids; anything else gets dense ids by
    first appearance."""
    try:
        ids = [int(v) for v in raw]
    except ValueError:
        mapping = {}
        ids = []
        for v in raw:
            if v not in mapping:
                mapping[v] = len(mapping)
            ids.append(mapping[v])
        return np.array(ids, dtype=int), mapping
    if min(ids) < 0:
        raise CsvParseError(f"column {colname!r} holds a negative id")
    return np.array(ids, dtype=int), {str(v): v for v in sorted(set(ids))}


def load_csv(
    path: str,
    label_col: str = "label",
    group_col: str = "group",
    feature_cols: list | None = None,
    score_cols: list | None = None,
    eps_clip: float = 1e-6,
) -> TabularDataset:
    """Load a dataset or score file.

    With no explicit column lists, columns named ``score_*`` are treated as
    scores when present, otherwise every non-label, non-group column is a
    feature (in file order).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    for col in (label_col, group_col):
        if col not in header:
            raise CsvSchemaError(f"{path}: missing required column {col!r}")
    if feature_cols is None and score_cols is None:
        auto = [c for c in header if c.startswith("score_")]
        if auto:
            score_cols = auto
        else:
            feature_cols = [c for c in header if c not in (label_col, group_col)]
    value_cols = score_cols if score_cols is not None else feature_cols
    for col in value_cols:
        if col not in header:
            raise CsvSchemaError(f"{path}: missing column {col!r}")
    pos = {c: header.index(c) for c in header}

    n = len(rows)
    width = len(value_cols)
    values = np.empty((n, width))
    raw_labels, raw_groups = [], []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvParseError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        for j, col in enumerate(value_cols):
            cell = row[pos[col]]
            if cell == "":
                raise CsvParseError(f"{path}: row {i + 2}, column {col!r}: missing value")
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise CsvParseError(
                    f"{path}: row {i + 2}, column {col!r}: not a number: {cell!r}"
                ) from None
        for col in (label_col, group_col):
            if row[pos[col]] == "":
                raise CsvParseError(f"{path}: row {i + 2}, column {col!r}: missing value")
        raw_labels.append(row[pos[label_col]])
        raw_groups.append(row[pos[group_col]])

    labels, label_mapping = _map_ids(raw_labels, label_col)
    groups, group_mapping = _map_ids(raw_groups, group_col)
    notes = []
    scores = None
    features = None
    if score_cols is not None:
        sums = values.sum(axis=1)
        off = np.abs(sums - 1.0) > 1e-9
        if off.any():
            notes.append(f"{int(off.sum())} score rows renormalized (first at row {int(np.nonzero(off)[0][0]) + 2})")
        scores = clip_scores(values, eps=eps_clip)
    else:
        features = values
    return TabularDataset(
        features=features,
        labels=labels,
        groups=groups,
        scores=scores,
        feature_names=list(value_cols),
        label_mapping=label_mapping,
        group_mapping=group_mapping,
        notes=notes,
    )


def write_dataset_csv(ds: TabularDataset, path: str) -> None:
    """Feature datasets round-trip exactly: floats are written at repr precision."""
    names = ds.feature_names or [f"f{j}" for j in range(ds.features.shape[1])]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names + ["label", "group"]) + "\n")
        for i in range(ds.n):
            cells = [f"{v:.17g}" for v in ds.features[i]]
            fh.write(",".join(cells + [str(int(ds.labels[i])), str(int(ds.groups[i]))]) + "\n")


def write_scores_csv(path: str, scores: np.ndarray, labels: np.ndarray, groups: np.ndarray) -> None:
    scores = np.asarray(scores, dtype=float)
    header = [f"score_{c}" for c in range(scores.shape[1])] + ["label", "group"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(scores.shape[0]):
            cells = [f"{v:.17g}" for v in scores[i]]
            fh.write(",".join(cells + [str(int(labels[i])), str(int(groups[i]))]) + "\n")


def split(ds: TabularDataset, test_fraction: float, seed: int):
    """Deterministic train/test split.

    Stratified by (label, group) cell when every occupied cell has at least 2
    members, plain otherwise.  Test counts use largest-remainder apportionment
    toward ``round(test_fraction * n)``.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError("test_fraction must lie in (0, 1)")
    n = ds.n
    rng = np.random.default_rng(seed)
    target = int(round(test_fraction * n))
    target = min(max(target, 1), n - 1)

    cells = {}
    for i in range(n):
        cells.setdefault((int(ds.labels[i]), int(ds.groups[i])), []).append(i)
    stratified = all(len(v) >= 2 for v in cells.values())
    test_idx = []
    if stratified:
        keys = sorted(cells)
        quotas = np.array([test_fraction * len(cells[k]) for k in keys])
        base = np.floor(quotas).astype(int)
        leftover = target - int(base.sum())
        if leftover > 0:
            order = np.argsort(-(quotas - base), kind="stable")
            for k in order[:leftover]:
                base[k] += 1
        elif leftover < 0:
            order = np.argsort(quotas - base, kind="stable")
            take = 0
            for k in order:
                if take == -leftover:
                    break
                if base[k] > 0:
                    base[k] -= 1
                    take += 1
        for k, count in zip(keys, base):
            members = np.array(cells[k])
            perm = rng.permutation(members.size)
            test_idx.extend(members[perm[:count]])
    else:
        perm = rng.permutation(n)
        test_idx = list(perm[:target])
    mask = np.zeros(n, dtype=bool)
    mask[test_idx] = True
    return ds.take(np.nonzero(~mask)[0]), ds.take(np.nonzero(mask)[0])


@dataclass
class SynthSpec:
    n: int
    num_features: int = 4
    num_classes: int = 2
    num_groups: int = 2
    group_weights: tuple | None = None
    class_bias: np.ndarray | None = None  # A x C, rows sum to 1
    cluster_separation: float = 1.0
    group_shift: float = 0.3
    seed: int = 0


def generate_synth(spec: SynthSpec) -> TabularDataset:
    """Gaussian clusters per class, shifted per group, with group-dependent
    class frequencies.  Fully determined by the seed."""
    rng = np.random.default_rng(spec.seed)
    a, c, d = spec.num_groups, spec.num_classes, spec.num_features
    weights = np.full(a, 1.0 / a) if spec.group_weights is None else np.asarray(spec.group_weights, float)
    if weights.size != a or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("group_weights must be a distribution over groups")
    bias = (
        np.full((a, c), 1.0 / c) if spec.class_bias is None else np.asarray(spec.class_bias, float)
    )
    if bias.shape != (a, c) or np.any(bias < 0) or np.max(np.abs(bias.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("class_bias must be A x C with rows summing to 1")

    mu = rng.standard_normal((c, d))
    mu *= spec.cluster_separation / np.linalg.norm(mu, axis=1, keepdims=True)
    nu = rng.standard_normal((a, d))
    nu *= spec.group_shift / np.linalg.norm(nu, axis=1, keepdims=True)

    groups = rng.choice(a, size=spec.n, p=weights)
    u = rng.random(spec.n)
    cum = np.cumsum(bias, axis=1)
    # rounding in cumsum could push the last edge a hair under u
    labels = np.minimum((u[:, None] > cum[groups]).sum(axis=1), c - 1)
    feats = mu[labels] + nu[groups] + rng.standard_normal((spec.n, d))
    return TabularDataset(
        features=feats,
        labels=labels,
        groups=groups,
        feature_names=[f"f{j}" for j in range(d)],
        label_mapping={str(i): i for i in range(c)},
        group_mapping={str(i): i for i in range(a)},
    )


def biased_preset(
    n: int, num_classes: int = 2, num_groups: int = 2, seed: int = 0
) -> SynthSpec:
    """A generator configuration whose base classifier is measurably unfair.

    Group 0 leans toward class 0 (0.8 on C=2); each later group leans toward
    the class matching its index modulo C, less sharply.
    """
    bias = np.full((num_groups, num_classes), 1.0)
    for a in range(num_groups):
        bias[a, a % num_classes] *= 4.0 if a == 0 else 1.5
    bias /= bias.sum(axis=1, keepdims=True)
    return SynthSpec(
        n=n,
        num_features=4,
        num_classes=num_classes,
        num_groups=num_groups,
        class_bias=bias,
        cluster_separation=1.6,
        group_shift=0.5,
        seed=seed,
    )
