"""Command-line interface: ``explain``, ``counterfactual`` and ``evaluate``.

Documents go to stdout, diagnostics to stderr. Exit status is 0 on success,
1 for data or algorithm errors and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .counterfactual import CounterfactualError, counterfactual, make_query, verify_counterfactual
from .dataset import DataError, load_csv, load_schema
from .evaluation import evaluate
from .explainer import ExplainError, explain, render_text
from .parallel import default_threads
from .surrogate import FitError


class UsageError(Exception):
    pass


def _confidence(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"confidence must lie in (0, 1), got {text}")
    return v


def _step_percent(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 100.0:
        raise argparse.ArgumentTypeError(f"step percent must lie in (0, 100], got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _index_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated row indices, got {text}") from None


def parse_point(text: str) -> dict[str, str]:
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"--point entries must look like name=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True, help="CSV file with a header row")
    common.add_argument("--schema", help="YAML schema file (target + feature kinds)")
    common.add_argument("--target", help="target column (overrides the schema)")
    common.add_argument("--confidence", type=_confidence, default=0.95)
    common.add_argument("--step-percent", type=_step_percent, default=1.0,
                        help="neighborhood search step as %% of the table size")
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: all cores); never changes the output")

    def point_args(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--index", type=int, help="row index of the point to explain")
        g.add_argument("--point", help="inline point as name=value,name=value,...")

    parser = argparse.ArgumentParser(prog="localsurrogate",
                                     description="Local linear explanations for tabular regression.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", parents=[common], help="explain one point")
    point_args(p)

    p = sub.add_parser("counterfactual", parents=[common], help="move a point to a reference value")
    point_args(p)
    p.add_argument("--ref-value", type=float, required=True)
    p.add_argument("--epsilon-percent", type=_positive_float, default=5.0)
    p.add_argument("--max-candidates", type=_positive_int, default=None)

    p = sub.add_parser("evaluate", parents=[common], help="quality metrics over a test split")
    p.add_argument("--knn", type=_positive_int, default=10)
    p.add_argument("--test-indices", type=_index_list, default=None,
                   help="comma-separated rows (default: trailing 20%%)")
    p.add_argument("--counterfactual", action="store_true",
                   help="also measure counterfactual fidelity")
    p.add_argument("--max-candidates", type=_positive_int, default=None)
    p.add_argument("--topk", type=_positive_int, default=None,
                   help="also measure top-k recovery of a global OLS model")
    return parser


def _load(args):
    schema = load_schema(args.schema) if args.schema else None
    if schema is None and args.target is None:
        raise UsageError("either --schema or --target is required")
    return load_csv(args.data, schema, args.target)


def _point(ds, args):
    if args.point is not None:
        return ds.make_point(parse_point(args.point))
    if not 0 <= args.index < len(ds):
        raise ExplainError(f"row index {args.index} out of range (dataset has {len(ds)} rows)")
    return args.index


def _emit(doc, fmt: str, text: str) -> None:
    if fmt == "structured":
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        sys.stdout.write(text)


def cmd_explain(args) -> int:
    ds = _load(args)
    e = explain(ds, _point(ds, args), args.confidence, args.step_percent)
    _emit(e.to_dict(), args.format, render_text(e))
    return 0


def cmd_counterfactual(args) -> int:
    ds = _load(args)
    q = make_query(ds, _point(ds, args), args.ref_value, args.epsilon_percent, args.max_candidates)
    ce = counterfactual(ds, q, args.confidence, args.step_percent, args.threads)
    report = verify_counterfactual(ds, ce, q)
    doc = ce.to_dict(ds)
    lines = [f"counterfactual toward {q.reference_value:g} (epsilon {q.epsilon:g})",
             f"candidate row {ce.candidate_row}, objective {ce.objective:.6g}"]
    for c in doc["changes"]:
        lines.append(f"  {c['feature']}: {c['old']} -> {c['new']}")
    lines.append(f"predicted at modified point {report.predicted_at_modified:.6g} "
                 f"(deviation {report.deviation:.6g})")
    _emit(doc, args.format, "\n".join(lines) + "\n")
    return 0


def cmd_evaluate(args) -> int:
    ds = _load(args)
    report = evaluate(ds, args.test_indices, args.knn, args.confidence, args.step_percent,
                      args.threads, args.counterfactual, args.max_candidates, args.topk)
    _emit(report.to_dict(), args.format, report.render_text())
    return 0


COMMANDS = {"explain": cmd_explain, "counterfactual": cmd_counterfactual, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ExplainError, CounterfactualError, FitError, ValueError, IndexError) as exc:
        print(f"error: {exc}".replace("\n", " "), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
