"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or file error, 3 solver
non-convergence.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .encoding import (
    LabeledDataset,
    encode_dataset,
    encode_record,
    load_schema,
    read_csv,
    split_holdout,
    standardize,
)
from .errors import (
    ClinDiagError,
    DimensionMismatch,
    EncodingError,
    IoFailure,
    NonConvergence,
    SingleClassDataset,
)
from .metrics import confusion, format_table, save_evaluation, summarize
from .qp import DEFAULT_MAX_PASSES, DEFAULT_TOL
from .report import diagnose, format_report, load_registry
from .svm import (
    DEFAULT_C,
    DEFAULT_MAX_DEPTH,
    DEFAULT_MIN_LEAF,
    PartitionTree,
    decision_value,
    load_model,
    save_model,
    train,
    train_partition_tree,
    tree_route,
)
from .synth import write_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _load_labeled(args) -> LabeledDataset:
    schema = load_schema(args.schema)
    return encode_dataset(read_csv(args.data), schema)


def _split(dataset, holdout, seed):
    if holdout <= 0:
        return dataset, None
    train_idx, hold_idx = split_holdout(len(dataset), holdout, seed)
    return dataset.subset(train_idx), dataset.subset(hold_idx)


def _mode(holdout, seed):
    return "resubstitution" if holdout <= 0 else f"holdout {holdout:g} (seed {seed})"


# -- commands ---------------------------------------------------------------

def cmd_synth(args):
    write_cohort(args.out, args.n_per_class, args.dims, args.separation,
                 args.overlap, args.seed, schema_path=args.schema)
    print(f"wrote {2 * args.n_per_class} rows to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_encode(args):
    ds = _load_labeled(args)
    if args.standardize:
        ds = standardize(ds)
    names = load_schema(args.schema).names
    if str(args.out).endswith(".json"):
        doc = {
            "features": names,
            "vectors": [[repr(float(v)) for v in row] for row in ds.vectors],
            "labels": [int(v) for v in ds.labels],
            "scaling": ds.scaling.to_dict() if ds.scaling is not None else None,
        }
        _write_json(args.out, doc)
    else:
        lines = [",".join([*names, "label"])]
        for row, label in zip(ds.vectors, ds.labels):
            lines.append(",".join([*(repr(float(v)) for v in row), f"{int(label):+d}"]))
        _write_text(args.out, "\n".join(lines) + "\n")
    print(f"encoded {len(ds)} records of dimension {ds.dim}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args):
    schema = load_schema(args.schema)
    dataset = encode_dataset(read_csv(args.data), schema)
    rule = schema.label_rule
    for sign, value in ((1, rule.positive_value), (-1, rule.negative_value)):
        if not (dataset.labels == sign).any():
            raise SingleClassDataset(
                f"{args.data}: no rows labeled {value!r} ({sign:+d}); "
                "training needs both classes")
    train_set, hold_set = _split(dataset, args.holdout, args.seed)
    fit_set = standardize(train_set) if args.standardize else train_set
    if args.tree:
        model = train_partition_tree(fit_set, C=args.C, tol=args.tol,
                                     max_depth=args.max_depth,
                                     min_leaf_size=args.min_leaf,
                                     max_passes=args.max_passes)
        converged = True
    else:
        model = train(fit_set, C=args.C, tol=args.tol, max_passes=args.max_passes)
        converged = model.converged
    save_model(model, args.model)
    eval_set = hold_set if hold_set is not None else train_set
    summary = summarize(confusion(model, eval_set), mode=_mode(args.holdout, args.seed))
    if args.out:
        save_evaluation(summary, args.out)
    sys.stdout.write(format_table(summary))
    if not converged:
        s = model.training_summary
        raise NonConvergence(
            f"solver stopped after {s['iterations']} updates with KKT violation "
            f"{s['kkt_violation']:.3g}; model written but tagged non-converged")
    return EXIT_OK


def cmd_evaluate(args):
    model = load_model(args.model)
    dataset = _load_labeled(args)
    _, hold_set = _split(dataset, args.holdout, args.seed)
    eval_set = hold_set if hold_set is not None else dataset
    summary = summarize(confusion(model, eval_set), mode=_mode(args.holdout, args.seed))
    if args.out:
        save_evaluation(summary, args.out)
    sys.stdout.write(format_table(summary))
    return EXIT_OK


def parse_vector(text: str) -> np.ndarray:
    parts = [p for p in re.split(r"[\s,;]+", text.strip().strip("()[]")) if p]
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise UsageError(f"cannot parse vector {text!r}; use e.g. \"(0,3)\"") from None


def _predict_one(model, x):
    if isinstance(model, PartitionTree):
        return tree_route(model, x)
    dv = decision_value(model, x)
    return (1 if dv >= 0 else -1), dv


def cmd_predict(args):
    model = load_model(args.model)
    if args.vector is not None:
        label, dv = _predict_one(model, parse_vector(args.vector))
        results = [{"row": 0, "label": label, "decision_value": dv}]
    else:
        if not (args.data and args.schema):
            raise UsageError("predict needs a VECTOR argument or both --data and --schema")
        schema = load_schema(args.schema)
        if schema.dim != model.dim:
            raise DimensionMismatch(
                f"schema has {schema.dim} features, model expects {model.dim}")
        results = []
        for i, rec in enumerate(read_csv(args.data)):
            try:
                x = encode_record(rec, schema)
            except EncodingError as exc:
                raise exc.at_row(i) from None
            label, dv = _predict_one(model, x)
            results.append({"row": i, "label": label, "decision_value": dv})
    text = "".join(f"{r['label']:+d}\n" for r in results)
    if args.out:
        if str(args.out).endswith(".json"):
            _write_json(args.out, {"predictions": results})
        else:
            _write_text(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    registry = load_registry(args.registry)
    records = read_csv(args.data)
    reports = [diagnose(registry, rec) for rec in records]
    chunks = []
    for i, rep in enumerate(reports):
        title = "Statistical Diagnosis" if len(reports) == 1 else f"Statistical Diagnosis (record {i})"
        chunks.append(format_report(rep, title=title))
    text = "\n".join(chunks)
    if args.out:
        if str(args.out).endswith(".json"):
            _write_json(args.out, {"records": [{"record": i, **r.to_dict()}
                                               for i, r in enumerate(reports)]})
        else:
            _write_text(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a valid number") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return conv


def _fraction(lo, hi):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"must lie in [{lo}, {hi}], got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="clindiag", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True, schema=True):
        if data:
            sp.add_argument("--data", required=True, help="input CSV with a header row")
        if schema:
            sp.add_argument("--schema", required=True, help="encoding schema JSON")
        sp.add_argument("--seed", type=int, default=0)

    def hyper(sp):
        sp.add_argument("--C", type=_positive(float), default=DEFAULT_C, help="box constant")
        sp.add_argument("--tol", type=_positive(float), default=DEFAULT_TOL)
        sp.add_argument("--max-passes", type=_positive(int), default=DEFAULT_MAX_PASSES)
        sp.add_argument("--tree", action="store_true", help="train a partition tree")
        sp.add_argument("--max-depth", type=_positive(int), default=DEFAULT_MAX_DEPTH)
        sp.add_argument("--min-leaf", type=_positive(int), default=DEFAULT_MIN_LEAF)
        sp.add_argument("--standardize", action="store_true")

    def holdout(sp):
        sp.add_argument("--holdout", type=_fraction(0.0, 0.9), default=0.0,
                        help="fraction of rows held out for evaluation")

    sp = sub.add_parser("synth", help="write a synthetic two-class cohort CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--schema", help="also write a matching schema JSON here")
    sp.add_argument("--n-per-class", type=_positive(int), default=104)
    sp.add_argument("--dims", type=_positive(int), default=5)
    sp.add_argument("--separation", type=_positive(float), default=6.0)
    sp.add_argument("--overlap", type=_fraction(0.0, 1.0), default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("encode", help="encode records into labeled vectors")
    common(sp)
    sp.add_argument("--out", required=True, help="CSV, or JSON if it ends in .json")
    sp.add_argument("--standardize", action="store_true")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("train", help="train a model and evaluate it")
    common(sp)
    hyper(sp)
    holdout(sp)
    sp.add_argument("--model", required=True, help="model JSON to write")
    sp.add_argument("--out", help="evaluation output (.json for JSON, else text)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="evaluate a saved model on labeled data")
    common(sp)
    holdout(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="classify vectors or unlabeled records")
    sp.add_argument("vector", nargs="?", help='one raw vector, e.g. "(0,3)"')
    sp.add_argument("--model", required=True)
    sp.add_argument("--data")
    sp.add_argument("--schema")
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("report", help="multi-disease diagnosis for each record")
    sp.add_argument("--registry", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"clindiag: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClinDiagError as exc:
        print(f"clindiag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
