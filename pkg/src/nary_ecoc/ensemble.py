"""The ECOC engine: per-column training, code prediction and distance decoding."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import coding, learners
from .coding import CodingMatrix
from .datasets import Dataset
from .errors import (
    DegenerateTaskError,
    DimensionMismatchError,
    InvalidParametersError,
    UndefinedBoundError,
    UntrainableMatrixError,
)
from .learners import LearnerSpec
from .metrics import Distance, code_distances, distance_terms, min_row_distance

logger = logging.getLogger(__name__)

DEGENERATE = 0
"""Code value emitted for a degenerate column; never part of a decode."""

MODEL_FORMAT_VERSION = 1


def nearest_rows(entries, codes, distance=Distance.HAMMING, active=None) -> np.ndarray:
    """1-based index of the closest row for every code.

    Only ``active`` columns take part. Ties go to the lowest class index.
    """
    entries = np.asarray(entries)
    codes = np.atleast_2d(np.asarray(codes))
    if codes.shape[1] != entries.shape[1]:
        raise DimensionMismatchError(
            f"codes have length {codes.shape[1]}, matrix has {entries.shape[1]} columns"
        )
    if active is not None:
        active = np.asarray(active, dtype=bool)
        entries, codes = entries[:, active], codes[:, active]
    if codes.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return np.argmin(code_distances(entries, codes, distance), axis=1) + 1


def half_rho_violations(entries, codes, labels, distance=Distance.HAMMING,
                            active=None) -> int:
    """Count misdecoded codes lying closer than rho/2 to their true row.

    A correct minimum-distance decoder always yields zero.
    """
    entries = np.asarray(entries)
    codes = np.atleast_2d(np.asarray(codes))
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if active is not None:
        active = np.asarray(active, dtype=bool)
        entries, codes = entries[:, active], codes[:, active]
    rho = min_row_distance(entries, distance)
    if rho <= 0:
        raise UndefinedBoundError("minimum row distance is zero")
    decoded = nearest_rows(entries, codes, distance)
    to_truth = distance_terms(codes, entries[labels - 1], distance).sum(axis=1)
    return int(np.count_nonzero((decoded != labels) & (to_truth < rho / 2)))


@dataclass(frozen=True, eq=False)
class EcocModel:
    """A coding matrix with one fitted base model per column.

    ``models[s]`` is ``None`` for a degenerate column. ``group_values[s][k-1]``
    is the matrix value predicted when model ``s`` outputs label ``k``.
    """

    matrix: CodingMatrix
    models: tuple
    group_values: tuple
    decoding: Distance
    learner_spec: LearnerSpec
    n_features: int

    @property
    def active(self) -> np.ndarray:
        return np.array([m is not None for m in self.models], dtype=bool)

    @property
    def degenerate_columns(self) -> list:
        return [s for s, m in enumerate(self.models) if m is None]

    @property
    def rho(self) -> float:
        return min_row_distance(self.matrix.entries[:, self.active], self.decoding)

    def predict_codes(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.size == 0:
            return np.empty((0, self.matrix.code_length), dtype=np.int64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"model expects {self.n_features} features, got shape {x.shape}"
            )
        codes = np.full((x.shape[0], self.matrix.code_length), DEGENERATE, dtype=np.int64)
        for s, model in enumerate(self.models):
            if model is not None:
                codes[:, s] = self.group_values[s][model.predict(x) - 1]
        return codes

    def decode(self, code) -> int:
        code = np.asarray(code).reshape(1, -1)
        return int(self.decode_codes(code)[0])

    def decode_codes(self, codes) -> np.ndarray:
        return nearest_rows(self.matrix.entries, codes, self.decoding, self.active)

    def predict(self, features) -> np.ndarray:
        return self.decode_codes(self.predict_codes(features))


def _fit_column(matrix, spec, features, labels, s):
    kept, groups = coding.relabel_column(matrix, s, labels)
    present = np.unique(groups)
    if present.size < 2:
        return None, None
    compact = np.searchsorted(present, groups) + 1
    model = learners.fit(spec.with_seed(spec.seed + s), features[kept], compact)
    values = np.array([coding.group_to_value(matrix, g) for g in present], dtype=np.int64)
    return model, values


def train(matrix: CodingMatrix, spec: LearnerSpec, data: Dataset,
          decoding=Distance.HAMMING, jobs: int = 1) -> EcocModel:
    """Fit one base model per column of ``matrix``.

    Column ``s`` is trained with seed ``spec.seed + s``, so the result does not
    depend on training order or on ``jobs``. Columns whose training instances
    fall into fewer than two groups are marked degenerate and skipped when
    decoding.
    """
    decoding = Distance.parse(decoding)
    labels = data.labels
    if labels.max() > matrix.n_classes:
        raise InvalidParametersError(
            f"data has labels up to {labels.max()}, matrix has {matrix.n_classes} rows"
        )
    missing = np.setdiff1d(np.arange(1, matrix.n_classes + 1), labels)
    if missing.size:
        logger.warning("classes %s have no training instance", missing.tolist())

    columns = range(matrix.code_length)
    if jobs is not None and jobs != 1:
        from joblib import Parallel, delayed

        fitted = Parallel(n_jobs=jobs)(
            delayed(_fit_column)(matrix, spec, data.features, labels, s) for s in columns
        )
    else:
        fitted = [_fit_column(matrix, spec, data.features, labels, s) for s in columns]

    models = tuple(m for m, _ in fitted)
    degenerate = [s for s, m in enumerate(models) if m is None]
    if len(degenerate) == matrix.code_length:
        raise UntrainableMatrixError("every column is degenerate on the training data")
    if degenerate:
        logger.warning("degenerate columns %s excluded from decoding", degenerate)
    values = tuple(v for _, v in fitted)
    return EcocModel(matrix, models, values, decoding, spec, data.n_features)


@dataclass(frozen=True)
class EvalReport:
    """Accuracy plus a confusion matrix in per-true-class percentages.

    Precision and recall are percentages, ``None`` where undefined (class
    never predicted, or absent from the data).
    """

    n_instances: int
    accuracy: float
    confusion_counts: list
    confusion_percent: list
    precision_percent: list
    recall_percent: list
    mean_precision_percent: float | None
    mean_recall_percent: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_defined(values):
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def evaluation_report(y_true, y_pred, n_classes: int) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.size != y_pred.size:
        raise DimensionMismatchError("true and predicted label counts differ")
    if y_true.size == 0:
        raise InvalidParametersError("no instances to evaluate")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true - 1, y_pred - 1), 1)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    diag = np.diag(counts)
    percent = [
        (100.0 * counts[i] / support[i]).tolist() if support[i] else None
        for i in range(n_classes)
    ]
    recall = [100.0 * diag[i] / support[i] if support[i] else None for i in range(n_classes)]
    precision = [
        100.0 * diag[i] / predicted[i] if predicted[i] else None for i in range(n_classes)
    ]
    return EvalReport(
        n_instances=int(y_true.size),
        accuracy=float(diag.sum() / y_true.size),
        confusion_counts=counts.tolist(),
        confusion_percent=percent,
        precision_percent=[None if v is None else float(v) for v in precision],
        recall_percent=[None if v is None else float(v) for v in recall],
        mean_precision_percent=_mean_defined(precision),
        mean_recall_percent=_mean_defined(recall),
    )


def evaluate(model: EcocModel, data: Dataset) -> EvalReport:
    return evaluation_report(data.labels, model.predict(data.features), model.matrix.n_classes)


def half_rho_check(model: EcocModel, data: Dataset) -> int:
    """Misclassified instances whose code is within rho/2 of the true row."""
    codes = model.predict_codes(data.features)
    return half_rho_violations(model.matrix.entries, codes, data.labels,
                                   model.decoding, model.active)


def fit_direct(spec: LearnerSpec, data: Dataset):
    """The base learner fit on all classes at once, as a baseline."""
    return learners.fit(spec, data.features, data.labels)


def select_n_by_cv(data: Dataset, n_values, spec: LearnerSpec, code_length=None,
                   k: int = 5, pool_size: int = 1, seed: int = 0, jobs: int = 1):
    """Choose the group count with the best mean k-fold accuracy.

    Returns ``(best_n, {n: mean_accuracy})``; ties go to the smaller N.
    """
    from .datasets import kfold_indices

    folds = kfold_indices(data.n_instances, k, seed)
    scores = {}
    for n in n_values:
        matrix = coding.select_best(coding.Scheme.NARY, data.n_classes, code_length, n,
                                    pool_size=pool_size, seed=seed, jobs=jobs)
        accs = []
        for train_idx, test_idx in folds:
            try:
                model = train(matrix, spec, data.subset(train_idx), jobs=jobs)
            except (UntrainableMatrixError, DegenerateTaskError):
                continue
            accs.append(evaluate(model, data.subset(test_idx)).accuracy)
        scores[int(n)] = float(np.mean(accs)) if accs else float("nan")
    best = max(scores, key=lambda n: (np.nan_to_num(scores[n], nan=-1.0), -n))
    return best, scores


def save_model(model: EcocModel, directory) -> None:
    """Write ``matrix.csv``, ``manifest.json`` and one JSON file per column."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    coding.save(model.matrix, out / "matrix.csv")
    columns = []
    for s, m in enumerate(model.models):
        if m is None:
            columns.append(None)
            continue
        name = f"column_{s:04d}.json"
        (out / name).write_text(json.dumps(learners.model_to_dict(m)), encoding="utf-8")
        columns.append(name)
    manifest = {
        "format_version": MODEL_FORMAT_VERSION,
        "matrix": "matrix.csv",
        "decoding": model.decoding.value,
        "learner": model.learner_spec.to_dict(),
        "n_features": model.n_features,
        "degenerate_columns": model.degenerate_columns,
        "group_values": [None if v is None else v.tolist() for v in model.group_values],
        "columns": columns,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                       encoding="utf-8")


def load_model(directory) -> EcocModel:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != MODEL_FORMAT_VERSION:
        raise InvalidParametersError(
            f"unsupported model archive version {manifest.get('format_version')!r}"
        )
    matrix = coding.load(src / manifest["matrix"])
    models = tuple(
        None if name is None
        else learners.model_from_dict(json.loads((src / name).read_text(encoding="utf-8")))
        for name in manifest["columns"]
    )
    if len(models) != matrix.code_length:
        raise InvalidParametersError("manifest column count does not match the matrix")
    values = tuple(None if v is None else np.asarray(v, dtype=np.int64)
                   for v in manifest["group_values"])
    return EcocModel(matrix, models, values, Distance.parse(manifest["decoding"]),
                     LearnerSpec.from_dict(manifest["learner"]), int(manifest["n_features"]))
