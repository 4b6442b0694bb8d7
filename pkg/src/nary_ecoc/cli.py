"""Command-line interface.

Subcommands: gen, analyze, train, eval, sweep-n, sweep-len, correlation.
Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/model error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from . import coding, datasets, ensemble, experiments, metrics
from .coding import Scheme
from .errors import (
    DataFormatError,
    EcocError,
    InvalidParametersError,
    InvariantViolationError,
    MatrixFormatError,
)
from .learners import LearnerSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

SWEEP_N_HEADER = ["rep", "n", "code_length", "accuracy", "rho", "b_bar", "b_over_rho",
                  "bound", "status"]
SWEEP_LEN_HEADER = ["rep", "n", "code_length", "accuracy", "status"]
CORRELATION_HEADER = ["scheme", "code_length", "mean_pcc"]

BENCHMARK_BLOBS = {"classes": 10, "per_class": 200, "dim": 16, "spread": 1.25}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("NARY_ECOC_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NARY_ECOC_SEED must be an integer, got {raw!r}") from None


def parse_range(text: str) -> list[int]:
    """``"2:10"`` (inclusive), ``"10:80:10"`` or ``"3,5,8"``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            if step < 1 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        values = [int(p) for p in text.split(",") if p.strip()]
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise UsageError(f"bad range {text!r}; use LO:HI[:STEP] or a comma list") from None


def _add_common(p, learner=True, decoding=True):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: $NARY_ECOC_SEED or 0)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="parallel workers for pool scans and column training")
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    if decoding:
        p.add_argument("--decoding", choices=["hamming", "absolute"], default="hamming")
    if learner:
        p.add_argument("--learner", choices=["lr", "tree", "centroid"], default="tree")
        p.add_argument("--learning-rate", type=float, default=0.5)
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--l2", type=float, default=1e-4)
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--max-depth", type=int, default=20)
        p.add_argument("--min-leaf", type=int, default=1)


def _add_data(p, split=True):
    g = p.add_argument_group("data (a file, or synthetic blobs when --data is omitted)")
    g.add_argument("--data", help="sparse 'label idx:val' text file, or .csv")
    g.add_argument("--label-column", type=int, default=-1, help="label column for CSV input")
    g.add_argument("--blob-classes", type=int, default=BENCHMARK_BLOBS["classes"])
    g.add_argument("--blob-per-class", type=int, default=BENCHMARK_BLOBS["per_class"])
    g.add_argument("--blob-dim", type=int, default=BENCHMARK_BLOBS["dim"])
    g.add_argument("--blob-spread", type=float, default=BENCHMARK_BLOBS["spread"])
    g.add_argument("--blob-seed", type=int, default=0)
    g.add_argument("--train-fraction", type=float, default=0.5)
    if split:
        g.add_argument("--split-seed", type=int, default=None,
                       help="seed of the stratified split (default: --seed)")


def _add_matrix_params(p, pool_default):
    p.add_argument("--scheme", default="nary", choices=[s.value for s in Scheme])
    p.add_argument("--length", type=int, default=None, help="code length N_L")
    p.add_argument("--n", type=int, default=None, help="groups per column N (N-ary)")
    p.add_argument("--pool", type=int, default=pool_default,
                   help="pool size for minimum-distance selection")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nary-ecoc", description="N-ary error-correcting output codes")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a coding matrix")
    _add_common(p, learner=False, decoding=False)
    p.add_argument("--classes", type=int, required=True)
    _add_matrix_params(p, pool_default=1)

    p = sub.add_parser("analyze", help="row distances and column correlation of a matrix")
    p.add_argument("matrix")
    _add_common(p, learner=False)

    p = sub.add_parser("train", help="train an ECOC model and write a model directory")
    _add_common(p)
    _add_data(p)
    p.add_argument("--matrix", help="coding matrix CSV (else generated from --scheme ...)")
    _add_matrix_params(p, pool_default=coding.DEFAULT_POOL_SIZE)
    p.add_argument("--part", choices=["train", "all"], default="train",
                   help="train on the training split or on all data")

    p = sub.add_parser("eval", help="evaluate a model directory")
    _add_common(p, learner=False, decoding=False)
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--part", choices=["train", "test", "all"], default="test")

    p = sub.add_parser("sweep-n", help="accuracy, rho and bound versus N")
    _add_common(p)
    _add_data(p, split=False)
    p.add_argument("--n-range", default="2:10")
    p.add_argument("--length", type=int, default=45)
    p.add_argument("--pool", type=int, default=coding.DEFAULT_POOL_SIZE)
    p.add_argument("--reps", type=int, default=10)

    p = sub.add_parser("sweep-len", help="accuracy versus N and code length")
    _add_common(p)
    _add_data(p, split=False)
    p.add_argument("--n-range", default="2:10")
    p.add_argument("--lengths", default="5:45:5")
    p.add_argument("--pool", type=int, default=coding.DEFAULT_POOL_SIZE)
    p.add_argument("--reps", type=int, default=10)

    p = sub.add_parser("correlation", help="mean column PCC versus code length")
    _add_common(p, learner=False, decoding=False)
    p.add_argument("--classes", type=int, default=20)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--lengths", default="10:80:10")
    p.add_argument("--seeds", type=int, default=100, help="matrices per cell")
    p.add_argument("--schemes", default="nary,sparse")
    return parser


# --------------------------------------------------------------------------


def _seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _learner(args, seed) -> LearnerSpec:
    try:
        return LearnerSpec(kind=args.learner, learning_rate=args.learning_rate,
                           epochs=args.epochs, l2=args.l2, batch_size=args.batch_size,
                           max_depth=args.max_depth, min_leaf=args.min_leaf, seed=seed)
    except InvalidParametersError as exc:
        raise UsageError(str(exc)) from None


def _check_fraction(args):
    if not 0 < args.train_fraction < 1:
        raise UsageError("--train-fraction must lie strictly between 0 and 1")


def _load_data(args) -> datasets.Dataset:
    if args.data:
        if not Path(args.data).is_file():
            raise DataFormatError(f"{args.data}: no such file")
        return datasets.load(args.data, label_column=args.label_column)
    if min(args.blob_classes, args.blob_per_class, args.blob_dim) < 1 or args.blob_spread < 0:
        raise UsageError("blob parameters must be positive")
    return datasets.make_blobs(args.blob_classes, args.blob_per_class, args.blob_dim,
                               args.blob_spread, seed=args.blob_seed)


def _select_part(data, args, part, seed):
    if part == "all":
        return data
    split_seed = args.split_seed if args.split_seed is not None else seed
    train, test = datasets.split(data, args.train_fraction, stratified=True, seed=split_seed)
    return train if part == "train" else test


def _check_matrix_params(scheme, n_classes, length, n, pool):
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.NARY and (n is None or not 2 <= n <= n_classes):
        raise UsageError(f"--n must satisfy 2 <= N <= {n_classes} for the nary scheme")
    if length is not None and length < 1:
        raise UsageError("--length must be at least 1")
    if pool < 1:
        raise UsageError("--pool must be at least 1")
    if n_classes < 2:
        raise UsageError("need at least 2 classes")


def _make_matrix(scheme, n_classes, length, n, pool, seed, jobs):
    scheme = Scheme.parse(scheme)
    if scheme.random and pool > 1:
        return coding.select_best(scheme, n_classes, length, n, pool_size=pool, seed=seed,
                                  jobs=jobs)
    return coding.generate(scheme, n_classes, length, n, seed)


def _emit(args, text: str):
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def cmd_gen(args):
    seed = _seed(args)
    _check_matrix_params(args.scheme, args.classes, args.length, args.n, args.pool)
    matrix = _make_matrix(args.scheme, args.classes, args.length, args.n, args.pool, seed,
                          args.jobs)
    _emit(args, coding.dumps(matrix))


def analyze_matrix(matrix, decoding="hamming") -> dict:
    report = metrics.matrix_report(matrix, decoding).to_dict()
    n = matrix.n if matrix.scheme is Scheme.NARY else None
    hamming, absolute = metrics.scheme_min_distances(matrix.scheme, matrix.n_classes,
                                               matrix.code_length, n)
    report["closed_form"] = {"hamming": hamming, "absolute": absolute}
    return report


def cmd_analyze(args):
    matrix = coding.load(args.matrix)
    _emit(args, _json(analyze_matrix(matrix, args.decoding)))


def cmd_train(args):
    seed = _seed(args)
    _check_fraction(args)
    spec = _learner(args, seed)
    data = _load_data(args)
    if args.matrix:
        matrix = coding.load(args.matrix)
        if matrix.n_classes < data.n_classes:
            raise DataFormatError(f"matrix has {matrix.n_classes} rows but the data has "
                                  f"{data.n_classes} classes")
    else:
        _check_matrix_params(args.scheme, data.n_classes, args.length, args.n, args.pool)
        matrix = _make_matrix(args.scheme, data.n_classes, args.length, args.n, args.pool,
                              seed, args.jobs)
    if args.out == "-":
        raise UsageError("train needs --out DIR")
    part = _select_part(data, args, args.part, seed)
    model = ensemble.train(matrix, spec, part, decoding=args.decoding, jobs=args.jobs)
    ensemble.save_model(model, args.out)


def cmd_eval(args):
    seed = _seed(args)
    _check_fraction(args)
    if not (Path(args.model) / "manifest.json").is_file():
        raise DataFormatError(f"{args.model}: not a model directory")
    model = ensemble.load_model(args.model)
    data = _select_part(_load_data(args), args, args.part, seed)
    report = ensemble.evaluate(model, data).to_dict()
    try:
        report["bound"] = metrics.bound_report(model, data).to_dict()
    except EcocError as exc:
        logging.getLogger(__name__).warning("bound undefined: %s", exc)
        report["bound"] = None
    report["half_rho_violations"] = ensemble.half_rho_check(model, data)
    _emit(args, _json(report))


def _sweep_rows(cells, fields):
    rows = [[getattr(c, f) for f in fields] for c in cells]
    means = experiments.mean_by(cells, lambda c: (c.n, c.code_length))
    for (n, length), agg in sorted(means.items()):
        row = {"rep": "mean", "n": n, "code_length": length, "status": f"ok:{agg['count']}",
               **agg}
        rows.append([row[f] for f in fields])
    return rows


def _check_sweep(args, data, n_values):
    _check_fraction(args)
    if args.reps < 1 or args.pool < 1:
        raise UsageError("--reps and --pool must be at least 1")
    bad = [n for n in n_values if not 2 <= n <= data.n_classes]
    if bad:
        raise UsageError(f"N values {bad} outside [2, {data.n_classes}]")


def cmd_sweep_n(args):
    seed = _seed(args)
    spec = _learner(args, seed)
    n_values = parse_range(args.n_range)
    data = _load_data(args)
    _check_sweep(args, data, n_values)
    if args.length < 1:
        raise UsageError("--length must be at least 1")
    cells = experiments.sweep_n(data, n_values, args.length, spec, decoding=args.decoding,
                                pool_size=args.pool, reps=args.reps,
                                train_fraction=args.train_fraction, seed=seed, jobs=args.jobs)
    _emit(args, _csv(SWEEP_N_HEADER, _sweep_rows(cells, SWEEP_N_HEADER)))


def cmd_sweep_len(args):
    seed = _seed(args)
    spec = _learner(args, seed)
    n_values = parse_range(args.n_range)
    lengths = parse_range(args.lengths)
    data = _load_data(args)
    _check_sweep(args, data, n_values)
    if min(lengths) < 1:
        raise UsageError("code lengths must be at least 1")
    cells = experiments.sweep_length(data, n_values, lengths, spec, decoding=args.decoding,
                                     pool_size=args.pool, reps=args.reps,
                                     train_fraction=args.train_fraction, seed=seed,
                                     jobs=args.jobs)
    _emit(args, _csv(SWEEP_LEN_HEADER, _sweep_rows(cells, SWEEP_LEN_HEADER)))


def cmd_correlation(args):
    seed = _seed(args)
    lengths = parse_range(args.lengths)
    schemes = [Scheme.parse(s) for s in args.schemes.split(",") if s.strip()]
    if not schemes or any(not s.random for s in schemes):
        raise UsageError("--schemes takes random schemes: nary, dense, sparse")
    if Scheme.NARY in schemes and not 2 <= args.n <= args.classes:
        raise UsageError(f"--n must satisfy 2 <= N <= {args.classes}")
    if args.seeds < 1 or min(lengths) < 1:
        raise UsageError("--seeds and code lengths must be at least 1")
    rows = experiments.correlation_study(args.classes, args.n, lengths, args.seeds, schemes,
                                         seed)
    _emit(args, _csv(CORRELATION_HEADER, rows))


COMMANDS = {
    "gen": cmd_gen,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-n": cmd_sweep_n,
    "sweep-len": cmd_sweep_len,
    "correlation": cmd_correlation,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (UsageError, InvalidParametersError) as exc:
        print(f"nary-ecoc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, MatrixFormatError, InvariantViolationError, OSError) as exc:
        print(f"nary-ecoc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EcocError as exc:
        print(f"nary-ecoc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
