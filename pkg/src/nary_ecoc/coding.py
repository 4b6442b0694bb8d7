"""Coding matrices: construction, validation, persistence and pool selection.

A coding matrix has one row per class (the class codeword) and one column per
base task. Signed schemes (OVA, OVO, dense and sparse random) use the alphabet
{-1, 0, +1} where 0 means "class not used by this task"; the N-ary scheme uses
{1, ..., N} and never contains zeros.
"""

from __future__ import annotations

import enum
import io
import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import (
    GenerationFailureError,
    InvalidParametersError,
    InvariantViolationError,
    MatrixFormatError,
)

COLUMN_RETRIES = 100
MATRIX_RETRIES = 100
DEFAULT_POOL_SIZE = 1000
_U64 = 2**64


class Scheme(str, enum.Enum):
    OVA = "ova"
    OVO = "ovo"
    DENSE = "dense"
    SPARSE = "sparse"
    NARY = "nary"

    @property
    def signed(self) -> bool:
        return self is not Scheme.NARY

    @property
    def random(self) -> bool:
        return self in (Scheme.DENSE, Scheme.SPARSE, Scheme.NARY)

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        aliases = {
            "ova": cls.OVA, "onevsall": cls.OVA,
            "ovo": cls.OVO, "onevsone": cls.OVO,
            "dense": cls.DENSE, "denserandom": cls.DENSE, "binary": cls.DENSE,
            "sparse": cls.SPARSE, "sparserandom": cls.SPARSE, "ternary": cls.SPARSE,
            "nary": cls.NARY, "n-ary": cls.NARY,
        }
        key = str(value).strip().lower().replace("_", "")
        try:
            return aliases[key]
        except KeyError:
            raise InvalidParametersError(f"unknown coding scheme {value!r}") from None


@dataclass(frozen=True, eq=False)
class CodingMatrix:
    """Immutable class-by-task assignment matrix.

    Parameters
    ----------
    entries : array-like of int, shape (n_classes, code_length)
    scheme : Scheme
    n : int
        Number of groups per column (2 for signed schemes).
    seed : int
        Seed the matrix was generated from; 0 for deterministic schemes.
    """

    entries: np.ndarray
    scheme: Scheme
    n: int
    seed: int = 0
    _key: bytes = field(init=False, repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.int64, copy=True)
        if entries.ndim != 2:
            raise InvariantViolationError("coding matrix must be two-dimensional")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed) % _U64)
        object.__setattr__(self, "_key", entries.tobytes())
        self._validate()

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def code_length(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def row(self, class_label: int) -> np.ndarray:
        """Codeword of a 1-based class label."""
        return self.entries[class_label - 1]

    def __eq__(self, other):
        if not isinstance(other, CodingMatrix):
            return NotImplemented
        return (
            self.scheme is other.scheme
            and self.n == other.n
            and self.seed == other.seed
            and self.entries.shape == other.entries.shape
            and self._key == other._key
        )

    def __hash__(self):
        return hash((self.scheme, self.n, self.seed, self.entries.shape, self._key))

    def _validate(self):
        m = self.entries
        n_classes, code_length = m.shape
        if n_classes < 2:
            raise InvariantViolationError("a coding matrix needs at least 2 classes")
        if code_length < 1:
            raise InvariantViolationError("a coding matrix needs at least 1 column")

        if self.scheme.signed:
            if self.n != 2:
                raise InvariantViolationError("signed schemes have exactly 2 groups")
            if not np.isin(m, (-1, 0, 1)).all():
                raise InvariantViolationError("signed matrix entries must be in {-1, 0, +1}")
            if self.scheme in (Scheme.OVA, Scheme.DENSE) and (m == 0).any():
                raise InvariantViolationError(f"{self.scheme.value} matrices have no zero entries")
        else:
            if self.n < 2:
                raise InvariantViolationError("N-ary matrices need N >= 2")
            if m.min() < 1 or m.max() > self.n:
                raise InvariantViolationError(f"N-ary entries must lie in 1..{self.n}")

        bad = np.flatnonzero(~_valid_columns(m, self.scheme)).tolist()
        if bad:
            raise InvariantViolationError(
                f"columns {bad} have fewer than 2 distinct non-zero values"
            )
        if _has_duplicate_rows(m):
            raise InvariantViolationError("coding matrix has duplicate rows")

        if self.scheme is Scheme.OVA:
            if not np.array_equal(m, _ova_entries(n_classes)):
                raise InvariantViolationError("not a one-vs-all matrix")
        elif self.scheme is Scheme.OVO:
            if not np.array_equal(m, _ovo_entries(n_classes)):
                raise InvariantViolationError("not a one-vs-one matrix")


def _column_valid(col: np.ndarray) -> bool:
    return np.unique(col[col != 0]).size >= 2


def _valid_columns(m: np.ndarray, scheme: Scheme) -> np.ndarray:
    if scheme is Scheme.NARY:
        return m.min(axis=0) != m.max(axis=0)
    return (m == 1).any(axis=0) & (m == -1).any(axis=0)


def _has_duplicate_rows(m: np.ndarray) -> bool:
    m = np.ascontiguousarray(m)
    return len({row.tobytes() for row in m}) != m.shape[0]


def _ova_entries(n_classes: int) -> np.ndarray:
    return 2 * np.eye(n_classes, dtype=np.int64) - 1


def _ovo_entries(n_classes: int) -> np.ndarray:
    pairs = list(combinations(range(n_classes), 2))
    m = np.zeros((n_classes, len(pairs)), dtype=np.int64)
    for s, (i, j) in enumerate(pairs):
        m[i, s] = 1
        m[j, s] = -1
    return m


def default_code_length(scheme, n_classes: int) -> int:
    """Code length used when none is given.

    Dense and sparse random codes use ``ceil(10 log2 N_C)`` and
    ``ceil(15 log2 N_C)``; N-ary codes use ``N_C (N_C - 1) / 2``.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.OVA:
        return n_classes
    if scheme is Scheme.OVO:
        return n_classes * (n_classes - 1) // 2
    if scheme is Scheme.DENSE:
        return max(1, math.ceil(10 * math.log2(n_classes)))
    if scheme is Scheme.SPARSE:
        return max(1, math.ceil(15 * math.log2(n_classes)))
    return max(1, n_classes * (n_classes - 1) // 2)


def _check_parameters(scheme: Scheme, n_classes, code_length, n):
    if n_classes is None or int(n_classes) < 2:
        raise InvalidParametersError("n_classes must be at least 2")
    if scheme is Scheme.NARY:
        if n is None or not 2 <= int(n) <= int(n_classes):
            raise InvalidParametersError(f"N must satisfy 2 <= N <= n_classes, got N={n}")
    if scheme.random:
        if code_length is not None and int(code_length) < 1:
            raise InvalidParametersError("code_length must be at least 1")
        length = int(code_length) if code_length is not None else default_code_length(scheme, n_classes)
        alphabet = {Scheme.DENSE: 2, Scheme.SPARSE: 3, Scheme.NARY: n}[scheme]
        # alphabet ** length < n_classes makes distinct rows impossible
        if length * math.log(int(alphabet)) < math.log(int(n_classes)) - 1e-12:
            raise InvalidParametersError(
                f"code_length={length} cannot give {n_classes} distinct codewords"
            )


def _sample(rng: np.random.Generator, scheme: Scheme, n: int, size):
    if scheme is Scheme.DENSE:
        return rng.integers(0, 2, size=size) * 2 - 1
    if scheme is Scheme.SPARSE:
        # P(0) = 1/2, P(-1) = P(+1) = 1/4
        u = rng.integers(0, 4, size=size)
        return np.where(u == 0, -1, np.where(u == 3, 1, 0))
    return rng.integers(1, n + 1, size=size)


def _random_entries(scheme: Scheme, n_classes: int, code_length: int, n: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(MATRIX_RETRIES):
        m = _sample(rng, scheme, n, (n_classes, code_length))
        for s in np.flatnonzero(~_valid_columns(m, scheme)):
            tries = 0
            while not _column_valid(m[:, s]):
                if tries == COLUMN_RETRIES:
                    raise GenerationFailureError(
                        f"could not sample a valid column for {scheme.value} "
                        f"with {n_classes} classes in {COLUMN_RETRIES} tries"
                    )
                m[:, s] = _sample(rng, scheme, n, n_classes)
                tries += 1
        if not _has_duplicate_rows(m):
            return m
    raise GenerationFailureError(
        f"could not sample {n_classes} distinct codewords in {MATRIX_RETRIES} tries"
    )


def generate(scheme, n_classes: int, code_length: int | None = None, n: int | None = None,
             seed: int = 0) -> CodingMatrix:
    """Build a coding matrix.

    ``code_length`` is ignored for OVA and OVO and defaults to
    :func:`default_code_length` for random schemes. ``n`` is only used by the
    N-ary scheme. Random schemes are a pure function of ``seed``.
    """
    scheme = Scheme.parse(scheme)
    _check_parameters(scheme, n_classes, code_length, n)
    n_classes = int(n_classes)
    if scheme is Scheme.OVA:
        return CodingMatrix(_ova_entries(n_classes), scheme, 2, 0)
    if scheme is Scheme.OVO:
        return CodingMatrix(_ovo_entries(n_classes), scheme, 2, 0)
    if code_length is None:
        code_length = default_code_length(scheme, n_classes)
    groups = int(n) if scheme is Scheme.NARY else 2
    seed = int(seed) % _U64
    entries = _random_entries(scheme, n_classes, int(code_length), groups, seed)
    return CodingMatrix(entries, scheme, groups, seed)


def pool_seeds(seed: int, pool_size: int) -> list[int]:
    """Seeds of the pool members scanned by :func:`select_best`, in order."""
    return [(int(seed) + k) % _U64 for k in range(pool_size)]


def _score_chunk(scheme, n_classes, code_length, n, seeds):
    from .metrics import min_absolute_distance

    if code_length is None:
        code_length = default_code_length(scheme, n_classes)
    groups = int(n) if scheme is Scheme.NARY else 2
    return [
        min_absolute_distance(_random_entries(scheme, int(n_classes), int(code_length), groups, s))
        for s in seeds
    ]


def select_best(scheme, n_classes: int, code_length: int | None = None, n: int | None = None,
                pool_size: int = DEFAULT_POOL_SIZE, seed: int = 0, jobs: int = 1) -> CodingMatrix:
    """Pick the pool member with the largest minimum absolute row distance.

    Pool member ``k`` is ``generate(..., seed=seed + k)``, so a singleton pool
    returns exactly ``generate(..., seed=seed)`` and the winner can be
    regenerated from its stored seed. Ties go to the earliest member.
    """
    scheme = Scheme.parse(scheme)
    if not scheme.random:
        raise InvalidParametersError("pool selection only applies to random schemes")
    if int(pool_size) < 1:
        raise InvalidParametersError("pool_size must be at least 1")
    _check_parameters(scheme, n_classes, code_length, n)
    seeds = pool_seeds(seed, int(pool_size))

    if jobs is not None and jobs != 1 and len(seeds) > 1:
        from joblib import Parallel, delayed, effective_n_jobs

        n_chunks = min(len(seeds), effective_n_jobs(jobs))
        chunks = [list(c) for c in np.array_split(np.array(seeds, dtype=np.uint64), n_chunks)]
        parts = Parallel(n_jobs=jobs)(
            delayed(_score_chunk)(scheme, n_classes, code_length, n, [int(x) for x in c])
            for c in chunks
        )
        scores = [x for part in parts for x in part]
    else:
        scores = _score_chunk(scheme, n_classes, code_length, n, seeds)

    best = int(np.argmax(scores))  # first maximum
    return generate(scheme, n_classes, code_length, n, seeds[best])


def relabel_column(matrix: CodingMatrix, column: int, labels):
    """Map class labels to the group ids of one column.

    Returns ``(kept, groups)``: indices of the instances whose class takes a
    non-zero value in the column (in input order) and their group ids. Signed
    values map -1 -> 1 and +1 -> 2; N-ary values are their own group id.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if not 0 <= column < matrix.code_length:
        raise InvalidParametersError(f"column {column} out of range 0..{matrix.code_length - 1}")
    if labels.size and (labels.min() < 1 or labels.max() > matrix.n_classes):
        raise InvalidParametersError(f"labels must lie in 1..{matrix.n_classes}")
    values = matrix.entries[labels - 1, column]
    kept = np.flatnonzero(values != 0)
    values = values[kept]
    if matrix.scheme.signed:
        groups = np.where(values < 0, 1, 2)
    else:
        groups = values.copy()
    return kept, groups.astype(np.int64)


def group_to_value(matrix: CodingMatrix, group: int) -> int:
    """Inverse of the group mapping used by :func:`relabel_column`."""
    if matrix.scheme.signed:
        return -1 if group == 1 else 1
    return int(group)


_HEADER = re.compile(r"#\s*scheme=(\S+)\s+n=(\d+)\s+seed=(\d+)\s*$")


def dumps(matrix: CodingMatrix) -> str:
    buf = io.StringIO()
    buf.write(f"# scheme={matrix.scheme.value} n={matrix.n} seed={matrix.seed}\n")
    for row in matrix.entries:
        buf.write(",".join(str(int(v)) for v in row))
        buf.write("\n")
    return buf.getvalue()


def loads(text: str) -> CodingMatrix:
    """Parse the CSV matrix format.

    The header line is optional; without one the scheme is inferred from the
    alphabet (positive entries -> N-ary with N = max entry, otherwise dense or
    sparse random depending on the presence of zeros).
    """
    lines = [ln.strip() for ln in text.splitlines()]
    header = None
    rows = []
    for lineno, ln in enumerate(lines, 1):
        if not ln:
            continue
        if ln.startswith("#"):
            if header is None and not rows:
                match = _HEADER.match(ln)
                if match is None:
                    raise MatrixFormatError(f"line {lineno}: malformed header {ln!r}")
                header = match.groups()
            continue
        try:
            rows.append([int(tok) for tok in ln.split(",")])
        except ValueError:
            raise MatrixFormatError(f"line {lineno}: non-integer entry in {ln!r}") from None
    if not rows:
        raise MatrixFormatError("no matrix rows found")
    if len({len(r) for r in rows}) != 1:
        raise MatrixFormatError("rows have different lengths")
    entries = np.array(rows, dtype=np.int64)

    if header is not None:
        scheme, n, seed = Scheme.parse(header[0]), int(header[1]), int(header[2])
    elif entries.min() >= 1:
        scheme, n, seed = Scheme.NARY, int(entries.max()), 0
    else:
        scheme = Scheme.SPARSE if (entries == 0).any() else Scheme.DENSE
        n, seed = 2, 0
    return CodingMatrix(entries, scheme, n, seed)


def save(matrix: CodingMatrix, path) -> None:
    Path(path).write_text(dumps(matrix), encoding="utf-8")


def load(path) -> CodingMatrix:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise MatrixFormatError(f"{path}: not UTF-8 text") from exc
    return loads(text)


EXAMPLE_NARY_MATRIX = CodingMatrix(
    [
        [1, 1, 2, 4, 1, 1],
        [2, 1, 1, 3, 2, 1],
        [3, 2, 1, 2, 3, 1],
        [4, 3, 1, 1, 4, 2],
        [4, 3, 2, 2, 4, 3],
        [4, 3, 3, 3, 3, 4],
        [3, 4, 4, 4, 2, 4],
    ],
    Scheme.NARY,
    4,
)
"""Seven-class, six-column N-ary example matrix with N = 4."""
