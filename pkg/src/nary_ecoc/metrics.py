"""Row distances, coding-matrix diagnostics and the distance-based error bound."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coding import CodingMatrix, Scheme, generate
from .errors import DimensionMismatchError, InvalidParametersError, UndefinedBoundError

logger = logging.getLogger(__name__)


class Distance(str, enum.Enum):
    HAMMING = "hamming"
    ABSOLUTE = "absolute"

    @classmethod
    def parse(cls, value) -> "Distance":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidParametersError(f"unknown distance {value!r}") from None


def hamming_terms(a, b) -> np.ndarray:
    """Position-wise generalized Hamming terms (0, 1, or 0.5 at a zero entry).

    Broadcasts like ``a - b``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    terms = (a != b).astype(np.float64)
    return np.where((a == 0) | (b == 0), 0.5, terms)


def absolute_terms(a, b) -> np.ndarray:
    return np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))


def distance_terms(a, b, distance=Distance.HAMMING) -> np.ndarray:
    if Distance.parse(distance) is Distance.HAMMING:
        return hamming_terms(a, b)
    return absolute_terms(a, b)


def _check_rows(a, b):
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"code lengths differ ({a.size} vs {b.size})")
    return a, b


def hamming_distance(row_a, row_b) -> float:
    """Generalized Hamming distance between two codewords."""
    a, b = _check_rows(row_a, row_b)
    return float(hamming_terms(a, b).sum())


def absolute_distance(row_a, row_b) -> float:
    """Sum of position-wise absolute differences."""
    a, b = _check_rows(row_a, row_b)
    return float(absolute_terms(a, b).sum())


def row_distance(row_a, row_b, distance=Distance.HAMMING) -> float:
    if Distance.parse(distance) is Distance.HAMMING:
        return hamming_distance(row_a, row_b)
    return absolute_distance(row_a, row_b)


def code_distances(entries, codes, distance=Distance.HAMMING) -> np.ndarray:
    """Distances from every code to every matrix row, shape (n_codes, n_rows)."""
    entries = np.asarray(entries)
    codes = np.atleast_2d(np.asarray(codes))
    if codes.shape[1] != entries.shape[1]:
        raise DimensionMismatchError(
            f"codes have length {codes.shape[1]}, matrix has {entries.shape[1]} columns"
        )
    return distance_terms(codes[:, None, :], entries[None, :, :], distance).sum(axis=2)


def pairwise_row_distances(entries, distance=Distance.HAMMING) -> np.ndarray:
    entries = np.asarray(entries)
    return code_distances(entries, entries, distance)


def _upper(d: np.ndarray) -> np.ndarray:
    return d[np.triu_indices(d.shape[0], k=1)]


def min_row_distance(entries, distance=Distance.HAMMING) -> float:
    """Minimum distance over all pairs of distinct rows."""
    return float(_upper(pairwise_row_distances(entries, distance)).min())


def min_absolute_distance(entries) -> int:
    entries = np.asarray(entries, dtype=np.int64)
    d = np.abs(entries[:, None, :] - entries[None, :, :]).sum(axis=2)
    return int(_upper(d).min())


def expected_hamming(n: int, code_length: int) -> float:
    """Expected Hamming distance between two rows of a uniform N-ary matrix."""
    if n < 2 or code_length < 1:
        raise InvalidParametersError("need n >= 2 and code_length >= 1")
    return code_length * (1.0 - 1.0 / n)


def expected_absolute(n: int, code_length: int) -> float:
    """Expected absolute distance between two rows of a uniform N-ary matrix."""
    if n < 1 or code_length < 1:
        raise InvalidParametersError("need n >= 1 and code_length >= 1")
    return code_length * (n * n - 1) / (3.0 * n)


def scheme_min_distances(scheme, n_classes: int, code_length: int | None = None,
                   n: int | None = None) -> tuple[float, float]:
    """Closed-form row separation as ``(hamming, absolute)`` for a scheme.

    OVA and OVO values are exact minima; random and N-ary values are the
    expected pairwise distances.
    """
    scheme = Scheme.parse(scheme)
    if n_classes < 2:
        raise InvalidParametersError("n_classes must be at least 2")
    if scheme is Scheme.OVA:
        return 2.0, 4.0
    if scheme is Scheme.OVO:
        pairs = math.comb(n_classes, 2)
        return (pairs - 1) / 2 + 1, float(2 * n_classes - 2)
    if code_length is None or code_length < 1:
        raise InvalidParametersError("code_length is required for random schemes")
    if scheme is Scheme.NARY:
        if n is None or n < 2:
            raise InvalidParametersError("N-ary closed forms need n >= 2")
        return expected_hamming(n, code_length), expected_absolute(n, code_length)
    return code_length / 2.0, float(code_length)


def column_correlations(entries):
    """Absolute Pearson correlations between all pairs of non-constant columns.

    Returns ``(abs_pcc, constant)`` where ``abs_pcc`` is the condensed vector
    over column pairs and ``constant`` flags the excluded columns.
    """
    x = np.asarray(entries, dtype=np.float64)
    sd = x.std(axis=0)
    constant = sd == 0
    x = x[:, ~constant]
    if x.shape[1] < 2:
        return np.empty(0), constant
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    corr = (z.T @ z) / x.shape[0]
    return np.clip(np.abs(_upper(corr)), 0.0, 1.0), constant


def mean_column_pcc(entries) -> float | None:
    pcc, _ = column_correlations(entries)
    return float(pcc.mean()) if pcc.size else None


@dataclass(frozen=True)
class MatrixReport:
    """Row-separation and column-correlation diagnostics of one matrix."""

    scheme: str
    n_classes: int
    code_length: int
    n: int
    distance: str
    rho: float
    rho_hamming: float
    rho_absolute: int
    mean_hamming: float
    mean_absolute: float
    expected_hamming: float | None
    expected_absolute: float | None
    mean_column_pcc: float | None
    constant_columns: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def matrix_report(matrix: CodingMatrix, distance=Distance.HAMMING) -> MatrixReport:
    distance = Distance.parse(distance)
    m = matrix.entries
    ham = _upper(pairwise_row_distances(m, Distance.HAMMING))
    ab = _upper(pairwise_row_distances(m, Distance.ABSOLUTE))
    pcc, constant = column_correlations(m)
    if constant.any():
        logger.warning("constant columns %s excluded from PCC", np.flatnonzero(constant).tolist())
    nary = matrix.scheme is Scheme.NARY
    return MatrixReport(
        scheme=matrix.scheme.value,
        n_classes=matrix.n_classes,
        code_length=matrix.code_length,
        n=matrix.n,
        distance=distance.value,
        rho=float(ham.min() if distance is Distance.HAMMING else ab.min()),
        rho_hamming=float(ham.min()),
        rho_absolute=int(ab.min()),
        mean_hamming=float(ham.mean()),
        mean_absolute=float(ab.mean()),
        expected_hamming=expected_hamming(matrix.n, matrix.code_length) if nary else None,
        expected_absolute=expected_absolute(matrix.n, matrix.code_length) if nary else None,
        mean_column_pcc=float(pcc.mean()) if pcc.size else None,
        constant_columns=np.flatnonzero(constant).tolist(),
    )


def monte_carlo_mean_distance(n_classes: int, n: int, code_length: int, trials: int = 1000,
                              seed: int = 0, distance=Distance.HAMMING) -> float:
    """Average pairwise row distance over ``trials`` random N-ary matrices.

    Matrix ``t`` is ``generate("nary", ..., seed=seed + t)``.
    """
    distance = Distance.parse(distance)
    iu = np.triu_indices(n_classes, k=1)
    total = 0.0
    for t in range(trials):
        m = generate(Scheme.NARY, n_classes, code_length, n, seed + t).entries
        a, b = m[iu[0]], m[iu[1]]
        if distance is Distance.HAMMING:
            total += (a != b).sum(axis=1).mean()
        else:
            total += np.abs(a - b).sum(axis=1).mean()
    return total / trials


@dataclass(frozen=True)
class BoundReport:
    """Empirical per-column losses and the resulting error bound.

    ``b_per_column`` has one entry per matrix column; columns that are
    degenerate or have no applicable instance are ``None`` and listed in
    ``excluded_columns``. ``n_columns`` counts the contributing columns and is
    the code length used in ``bound = 2 * n_columns * b_bar / rho``.
    """

    decoding: str
    b_bar: float
    b_per_column: list
    rho: float
    n_columns: int
    bound: float
    excluded_columns: list = field(default_factory=list)

    @property
    def b_over_rho(self) -> float:
        return self.b_bar / self.rho

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(model, data) -> BoundReport:
    """Error bound of a fitted ECOC model on labelled evaluation data.

    ``B_s`` is the mean distance between the true class's entry and the
    prediction of column ``s`` over instances whose class has a non-zero entry
    in that column. Under Hamming decoding this is the column's error rate.
    """
    features = data.features
    labels = np.asarray(data.labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        raise InvalidParametersError("evaluation data is empty")
    matrix = model.matrix
    if labels.min() < 1 or labels.max() > matrix.n_classes:
        raise InvalidParametersError(f"labels must lie in 1..{matrix.n_classes}")
    distance = Distance.parse(model.decoding)
    active = np.asarray(model.active, dtype=bool)
    codes = model.predict_codes(features)
    truth = matrix.entries[labels - 1]

    b_per_column = []
    excluded = []
    for s in range(matrix.code_length):
        applicable = truth[:, s] != 0
        if not active[s] or not applicable.any():
            if active[s]:
                logger.warning("column %d has no applicable evaluation instance; excluded", s)
            b_per_column.append(None)
            excluded.append(s)
            continue
        loss = distance_terms(truth[applicable, s], codes[applicable, s], distance)
        b_per_column.append(float(loss.mean()))

    used = [b for b in b_per_column if b is not None]
    if not used:
        raise UndefinedBoundError("no column contributes to the bound")
    rho = min_row_distance(matrix.entries[:, active], distance)
    if rho <= 0:
        raise UndefinedBoundError("minimum row distance is zero")
    b_bar = float(np.mean(used))
    return BoundReport(
        decoding=distance.value,
        b_bar=b_bar,
        b_per_column=b_per_column,
        rho=rho,
        n_columns=len(used),
        bound=2.0 * len(used) * b_bar / rho,
        excluded_columns=excluded,
    )
