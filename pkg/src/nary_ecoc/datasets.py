"""Dataset container, file loaders, splitting and synthetic blobs."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InvalidParametersError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense features with class labels in ``{1..n_classes}``.

    ``label_values[k - 1]`` is the original label that was remapped to ``k``.
    A subset may leave some classes without instances.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    label_values: tuple = ()
    feature_names: tuple | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64).reshape(-1)
        if x.ndim != 2:
            raise InvalidParametersError("features must be a 2-D matrix")
        if x.shape[0] != y.size:
            raise InvalidParametersError(f"{x.shape[0]} feature rows but {y.size} labels")
        if y.size == 0:
            raise InvalidParametersError("a dataset needs at least one instance")
        if not np.isfinite(x).all():
            raise InvalidParametersError("features must be finite")
        n_classes = int(self.n_classes)
        if y.min() < 1 or y.max() > n_classes:
            raise InvalidParametersError(f"labels must lie in 1..{n_classes}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "n_classes", n_classes)
        values = tuple(self.label_values) or tuple(range(1, n_classes + 1))
        if len(values) != n_classes or len(set(values)) != n_classes:
            raise InvalidParametersError("label_values must list one distinct value per class")
        object.__setattr__(self, "label_values", values)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_instances(self) -> int:
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes,
                       self.label_values, self.feature_names)

    def original_labels(self) -> list:
        return [self.label_values[k - 1] for k in self.labels]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.label_values == other.label_values
            and np.array_equal(self.labels, other.labels)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )


def _number(tok: str):
    value = float(tok)
    if not math.isfinite(value):
        raise ValueError(tok)
    return int(value) if value.is_integer() else value


def _remap(raw_labels):
    values = tuple(sorted(set(raw_labels)))
    index = {v: k for k, v in enumerate(values, 1)}
    return np.array([index[v] for v in raw_labels], dtype=np.int64), values


def load_sparse(path, n_features: int | None = None) -> Dataset:
    """Read the ``label index:value ...`` text format (1-based indices).

    Labels are remapped to ``1..N_C`` in increasing numeric order. Text after
    ``#`` on a line is ignored.
    """
    raw_labels, rows = [], []
    max_index = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = _number(tokens[0])
            except ValueError:
                raise DataFormatError(f"non-numeric label {tokens[0]!r}", lineno) from None
            row = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"expected index:value, got {tok!r}", lineno)
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise DataFormatError(f"malformed pair {tok!r}", lineno) from None
                if j < 1:
                    raise DataFormatError(f"feature index {j} is not 1-based", lineno)
                if not math.isfinite(v):
                    raise DataFormatError(f"non-finite value in {tok!r}", lineno)
                row[j] = v
                max_index = max(max_index, j)
            raw_labels.append(label)
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: no instances")
    d = max_index if n_features is None else int(n_features)
    if d < max_index:
        raise DataFormatError(f"feature index {max_index} exceeds n_features={d}")
    x = np.zeros((len(rows), d))
    for i, row in enumerate(rows):
        for j, v in row.items():
            x[i, j - 1] = v
    labels, values = _remap(raw_labels)
    return Dataset(x, labels, len(values), values)


def write_sparse(data: Dataset, path) -> None:
    """Write ``data`` in the sparse text format using its original labels."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(data.original_labels(), data.features):
            pairs = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(row) if v != 0)
            fh.write(f"{label} {pairs}".rstrip() + "\n")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: int = -1, header: bool | None = None) -> Dataset:
    """Read a comma-separated file with one label column.

    ``header=None`` treats the first row as a header when any of its fields
    is non-numeric. Labels may be arbitrary strings; they are remapped to
    ``1..N_C`` in sorted order.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        table = [r for r in csv.reader(fh) if any(tok.strip() for tok in r)]
    if not table:
        raise DataFormatError(f"{path}: empty file")
    first = 1
    if header is None:
        header = not all(_is_number(tok) for tok in table[0])
    names = None
    if header:
        names = [tok.strip() for tok in table[0]]
        table = table[1:]
        first = 2
    if not table:
        raise DataFormatError(f"{path}: no data rows")
    width = len(table[0])
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataFormatError(f"label column {label_column} out of range for {width} columns")

    raw_labels, rows = [], []
    for lineno, rec in enumerate(table, first):
        if len(rec) != width:
            raise DataFormatError(f"expected {width} fields, got {len(rec)}", lineno)
        label = rec[col].strip()
        if not label:
            raise DataFormatError("missing label", lineno)
        vals = []
        for k, tok in enumerate(rec):
            if k == col:
                continue
            tok = tok.strip()
            if not tok:
                raise DataFormatError(f"missing value in column {k}", lineno)
            try:
                v = float(tok)
            except ValueError:
                raise DataFormatError(f"non-numeric value {tok!r} in column {k}", lineno) from None
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite value in column {k}", lineno)
            vals.append(v)
        raw_labels.append(_number(label) if _is_number(label) else label)
        rows.append(vals)
    if len({type(v) is str for v in raw_labels}) > 1:
        raw_labels = [str(v) for v in raw_labels]
    labels, values = _remap(raw_labels)
    feature_names = None
    if names is not None:
        feature_names = tuple(n for k, n in enumerate(names) if k != col)
    return Dataset(np.array(rows, dtype=np.float64).reshape(len(rows), width - 1),
                   labels, len(values), values, feature_names)


def load(path, label_column: int = -1, header: bool | None = None) -> Dataset:
    """Dispatch on the file extension: ``.csv`` is CSV, anything else sparse text."""
    if Path(path).suffix.lower() == ".csv":
        return load_csv(path, label_column=label_column, header=header)
    return load_sparse(path)


def _n_train(n: int, fraction: float) -> int:
    k = math.floor(n * fraction)
    if n >= 2:
        k = min(max(k, 1), n - 1)
    return k


def _allocate(sizes, fraction):
    """Training count per group: floors plus largest remainders up to the total."""
    sizes = np.asarray(sizes)
    exact = sizes * fraction
    counts = np.floor(exact).astype(np.int64)
    target = _n_train(int(sizes.sum()), fraction)
    order = np.argsort(-(exact - counts), kind="stable")
    for g in order[: max(0, target - int(counts.sum()))]:
        counts[g] += 1
    return np.clip(counts, np.minimum(1, sizes - 1), sizes - 1)


def split_indices(labels, train_fraction: float, stratified: bool = True, seed: int = 0):
    """Disjoint, exhaustive train and test index arrays in ascending order.

    The training side gets ``floor(n * fraction)`` instances (at least one on
    each side). When stratified, each class contributes the floor or ceiling
    of its share, and a singleton class goes to the training side.
    """
    if not 0 < train_fraction < 1:
        raise InvalidParametersError("train_fraction must lie strictly between 0 and 1")
    labels = np.asarray(labels).reshape(-1)
    rng = np.random.default_rng(seed)
    if stratified:
        groups = [np.flatnonzero(labels == c) for c in np.unique(labels)]
    else:
        groups = [np.arange(labels.size)]
    train, test = [], []
    for members in groups:
        if members.size == 1 and stratified:
            logger.warning("class %s has a single instance; assigned to train",
                           labels[members[0]])
            train.append(members)
    groups = [g for g in groups if g.size > 1 or not stratified]
    if groups:
        counts = _allocate([g.size for g in groups], train_fraction)
        for members, k in zip(groups, counts):
            perm = rng.permutation(members)
            train.append(perm[:k])
            test.append(perm[k:])
    train = np.sort(np.concatenate(train)) if train else np.empty(0, dtype=np.int64)
    test = np.sort(np.concatenate(test)) if test else np.empty(0, dtype=np.int64)
    return train, test


def split(data: Dataset, train_fraction: float, stratified: bool = True, seed: int = 0):
    train, test = split_indices(data.labels, train_fraction, stratified, seed)
    if test.size == 0:
        raise InvalidParametersError("split leaves no test instances")
    return data.subset(train), data.subset(test)


def kfold_indices(n_instances: int, k: int = 5, seed: int = 0):
    """``k`` (train, test) index pairs; test folds partition ``range(n)``."""
    if not 2 <= k <= n_instances:
        raise InvalidParametersError(f"need 2 <= k <= {n_instances}")
    perm = np.random.default_rng(seed).permutation(n_instances)
    folds = np.array_split(perm, k)
    out = []
    for i, fold in enumerate(folds):
        rest = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(rest), np.sort(fold)))
    return out


def make_blobs(n_classes: int, per_class: int, n_features: int, spread: float,
               seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters centred on distinct integer lattice points.

    Centres are drawn from ``{0..L-1}^d`` with ``L = 3`` (larger if needed
    for distinctness); points are ``centre + spread * N(0, I)``, grouped by
    class.
    """
    if min(n_classes, per_class, n_features) < 1:
        raise InvalidParametersError("counts must be at least 1")
    if spread < 0:
        raise InvalidParametersError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    side = 3
    while side**n_features < 2 * n_classes:
        side += 1
    centres = []
    seen = set()
    while len(centres) < n_classes:
        c = rng.integers(0, side, size=n_features)
        key = c.tobytes()
        if key not in seen:
            seen.add(key)
            centres.append(c)
    centres = np.array(centres, dtype=np.float64)
    labels = np.repeat(np.arange(1, n_classes + 1), per_class)
    noise = rng.standard_normal((labels.size, n_features))
    return Dataset(centres[labels - 1] + spread * noise, labels, n_classes)
