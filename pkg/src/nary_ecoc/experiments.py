"""Sweeps over N, code length and scheme that back the CLI reports.

Every random choice is derived from one integer seed, so a sweep is a pure
function of its arguments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import coding
from .coding import Scheme
from .datasets import Dataset, split
from .ensemble import evaluate, train
from .errors import EcocError
from .learners import LearnerSpec
from .metrics import Distance, bound_report, mean_column_pcc

logger = logging.getLogger(__name__)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 63-bit child seed for ``(seed, *keys)``."""
    state = np.random.SeedSequence([int(seed) % 2**64, *map(int, keys)]).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0] >> np.uint64(1))


@dataclass
class SweepCell:
    rep: int
    n: int
    code_length: int
    accuracy: float = float("nan")
    rho: float = float("nan")
    b_bar: float = float("nan")
    b_over_rho: float = float("nan")
    bound: float = float("nan")
    status: str = "ok"


def _run_cell(data_train, data_test, n, code_length, spec, decoding, pool_size,
              matrix_seed, rep, jobs):
    cell = SweepCell(rep=rep, n=n, code_length=code_length)
    try:
        matrix = coding.select_best(Scheme.NARY, data_train.n_classes, code_length, n,
                                    pool_size=pool_size, seed=matrix_seed, jobs=jobs)
        model = train(matrix, spec, data_train, decoding=decoding, jobs=jobs)
        cell.accuracy = evaluate(model, data_test).accuracy
        report = bound_report(model, data_test)
        cell.rho = report.rho
        cell.b_bar = report.b_bar
        cell.b_over_rho = report.b_over_rho
        cell.bound = report.bound
    except EcocError as exc:
        logger.warning("cell rep=%d N=%d N_L=%d failed: %s", rep, n, code_length, exc)
        cell.status = f"error: {exc}"
    return cell


def _splits(data, reps, train_fraction, seed):
    for r in range(reps):
        yield r, split(data, train_fraction, stratified=True, seed=derive_seed(seed, 1, r))


def sweep_n(data: Dataset, n_values, code_length: int, spec: LearnerSpec,
            decoding=Distance.HAMMING, pool_size: int = coding.DEFAULT_POOL_SIZE,
            reps: int = 10, train_fraction: float = 0.5, seed: int = 0,
            jobs: int = 1) -> list[SweepCell]:
    """Accuracy, rho and the error bound for every N and repetition.

    Repetition ``r`` uses one stratified split shared by all N; the matrix for
    ``(r, N)`` is pool-selected from seed ``derive_seed(seed, 2, r, N)``.
    """
    cells = []
    for r, (tr, te) in _splits(data, reps, train_fraction, seed):
        for n in n_values:
            cells.append(_run_cell(tr, te, int(n), int(code_length), spec, decoding,
                                   pool_size, derive_seed(seed, 2, r, n), r, jobs))
    return cells


def sweep_length(data: Dataset, n_values, lengths, spec: LearnerSpec,
                 decoding=Distance.HAMMING, pool_size: int = coding.DEFAULT_POOL_SIZE,
                 reps: int = 10, train_fraction: float = 0.5, seed: int = 0,
                 jobs: int = 1) -> list[SweepCell]:
    """Accuracy for every (N, N_L) pair and repetition."""
    cells = []
    for r, (tr, te) in _splits(data, reps, train_fraction, seed):
        for n in n_values:
            for length in lengths:
                cell = SweepCell(rep=r, n=int(n), code_length=int(length))
                try:
                    matrix = coding.select_best(
                        Scheme.NARY, tr.n_classes, int(length), int(n), pool_size=pool_size,
                        seed=derive_seed(seed, 3, r, n, length), jobs=jobs,
                    )
                    model = train(matrix, spec, tr, decoding=decoding, jobs=jobs)
                    cell.accuracy = evaluate(model, te).accuracy
                except EcocError as exc:
                    logger.warning("cell rep=%d N=%d N_L=%d failed: %s", r, n, length, exc)
                    cell.status = f"error: {exc}"
                cells.append(cell)
    return cells


def mean_by(cells, key):
    """Mean accuracy / rho / bound per ``key(cell)`` over successful cells."""
    groups: dict = {}
    for c in cells:
        if c.status == "ok":
            groups.setdefault(key(c), []).append(c)
    out = {}
    for k, members in groups.items():
        out[k] = {
            field: float(np.mean([getattr(c, field) for c in members]))
            for field in ("accuracy", "rho", "b_bar", "b_over_rho", "bound")
        }
        out[k]["count"] = len(members)
    return out


def correlation_study(n_classes: int = 20, n: int = 5, lengths=range(10, 81, 10),
                      seeds: int = 100, schemes=(Scheme.NARY, Scheme.SPARSE),
                      seed: int = 0):
    """Mean absolute column PCC per (scheme, N_L), averaged over ``seeds`` matrices.

    Matrix ``i`` of every cell is generated with seed ``seed + i``.
    """
    rows = []
    for scheme in map(Scheme.parse, schemes):
        for length in lengths:
            values = []
            for i in range(seeds):
                m = coding.generate(scheme, n_classes, int(length), n, seed + i)
                v = mean_column_pcc(m.entries)
                if v is not None:
                    values.append(v)
            rows.append((scheme.value, int(length), float(np.mean(values))))
    return rows
