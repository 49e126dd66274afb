"""Command-line front end.

Every verb prints one JSON document (or CSV for polylines and tables) and
exits with 0 for a positive answer, 2 for a negative one, 3 when a budget ran
out or the answer is unknown, and 1 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from .budget import BudgetExceeded
from .coding import (
    Channel,
    coding_fidelity,
    log_holder_bound,
    random_subunital_channel,
    typical_algebra,
    verify_typical_bounds,
)
from .entropy import (
    DiagonalState,
    capacity_point,
    classical_entropy,
    quantum_entropy,
    region_boundary,
    region_contains,
    region_subset,
    thermal_state,
    total_entropy,
)
from .largedev import (
    BulkVerdict,
    NotBulkEmbeddable,
    Status,
    bulk_check,
    bulk_construct,
    chernoff_upper,
    cramer_lower,
    default_slack,
    ell,
    exact_tail,
)
from .packing import embed_search
from .shapes import Shape, format_p, log_p_norm, parse_p, parse_shape, supermajorizes

EXIT_OK, EXIT_INPUT, EXIT_NEGATIVE, EXIT_UNKNOWN = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _shape_arg(text: str) -> Shape:
    try:
        return parse_shape(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _p_list(text: str) -> list[float]:
    try:
        return [parse_p(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _p_arg(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _point_arg(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected H,S, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _verdict_code(verdict: BulkVerdict) -> int:
    return EXIT_NEGATIVE if verdict.status is Status.VIOLATED else EXIT_OK


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_state(args) -> DiagonalState:
    if not args.state:
        raise ValueError("--state FILE is required")
    state = DiagonalState.from_dict(_load_json(args.state))
    shape = getattr(args, "shape", None)
    if shape is not None and state.shape != shape:
        raise ValueError(f"state has shape {state.shape}, not {shape}")
    return state


def _unit(args) -> float:
    return 1.0 / math.log(2) if args.bits else 1.0


# -- verbs -------------------------------------------------------------


def cmd_norms(args):
    ps = args.p or [1.0, 2.0, math.inf]
    k = _unit(args)
    return EXIT_OK, {"log_norms": {format_p(p): k * log_p_norm(args.shape, p) for p in ps}}


def cmd_embed(args):
    result = embed_search(args.a, args.b, args.node_budget)
    doc = {"embeddable": result.embeddable, "nodes_explored": result.nodes_explored}
    if result.diagram is not None:
        doc["diagram"] = result.diagram.to_dict()
    if result.embeddable is None:
        doc["embeddable"] = "unknown"
        return EXIT_UNKNOWN, doc
    return (EXIT_OK if result.embeddable else EXIT_NEGATIVE), doc


def cmd_supermajorize(args):
    ok = supermajorizes(args.b, args.a)
    return (EXIT_OK if ok else EXIT_NEGATIVE), {"supermajorized": ok}


def cmd_bulk_check(args):
    verdict = bulk_check(args.a, args.b, args.tol)
    return _verdict_code(verdict), verdict.to_dict()


def cmd_bulk_construct(args):
    try:
        found = bulk_construct(args.a, args.b, args.epsilon, args.max_n, with_bound=args.with_bound)
    except NotBulkEmbeddable as exc:
        return EXIT_NEGATIVE, {"found": False, "reason": str(exc)}
    if found is None:
        return EXIT_UNKNOWN, {"found": False, "reason": f"no N <= {args.max_n} works"}
    doc = {
        "found": True,
        "n": found.n,
        "m": found.m,
        "certificate_summary": found.summary(),
        "certificate": found.certificate.to_dict(),
    }
    if args.with_bound:
        doc["analytic_bound"] = found.analytic_bound
    return EXIT_OK, doc


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_capacity(args):
    k = _unit(args)
    points = region_boundary(args.shape, args.samples)
    return EXIT_OK, _csv(["H", "S"], [(repr(k * h), repr(k * s)) for h, s in points])


def cmd_entropy(args):
    state = _load_state(args)
    k = _unit(args)
    return EXIT_OK, {
        "H": k * classical_entropy(state),
        "S": k * quantum_entropy(state),
        "total": k * total_entropy(state),
    }


def cmd_thermal(args):
    state, ens = thermal_state(args.shape, args.p)
    H, S = capacity_point(args.shape, args.p)
    k = _unit(args)
    return EXIT_OK, {
        "p": format_p(args.p),
        "H": k * H,
        "S": k * S,
        "log_norm": k * log_p_norm(args.shape, args.p),
        "log_partition": None if math.isinf(ens.log_partition) else ens.log_partition,
        "state": state.to_dict(),
    }


def cmd_region_contains(args):
    H, S = (x / _unit(args) for x in args.point)
    verdict = region_contains(args.shape, H, S, args.tol)
    return _verdict_code(verdict), verdict.to_dict()


def cmd_region_subset(args):
    verdict = region_subset(args.a, args.b, args.tol)
    return _verdict_code(verdict), verdict.to_dict()


def cmd_typical(args):
    state = _load_state(args)
    summary = typical_algebra(state, args.n, args.alpha)
    doc = summary.to_dict()
    if args.epsilon is not None:
        doc["bounds_hold"] = verify_typical_bounds(
            summary, classical_entropy(state), quantum_entropy(state), float(args.epsilon)
        )
    return EXIT_OK, doc


def cmd_bound(args):
    state = _load_state(args)
    if args.shape_a is not None and state.shape != args.shape_a:
        raise ValueError(f"state has shape {state.shape}, not {args.shape_a}")
    log_b, p = log_holder_bound(state, args.shape_b, args.p)
    return EXIT_OK, {"bound": math.exp(log_b), "log_bound": _unit(args) * log_b, "best_p": format_p(p)}


def cmd_fidelity(args):
    state = _load_state(args)
    if args.channels:
        data = _load_json(args.channels)
        encode = Channel.from_dict(data["encode"])
        decode = Channel.from_dict(data["decode"])
    else:
        if args.shape_b is None:
            raise ValueError("either --channels or --shape-b with --seed is required")
        a, b = state.shape, args.shape_b
        encode = random_subunital_channel(b, a, args.rank, args.seed)
        decode = random_subunital_channel(a, b, args.rank, args.seed + 1)
    fid = coding_fidelity(state, decode, encode)
    log_b, p = log_holder_bound(state, encode.from_shape)
    return EXIT_OK, {"fidelity": fid, "holder_bound": math.exp(log_b), "best_p": format_p(p)}


def sandwich(shape: Shape, n: int, grid: int, threads: int = 1) -> list[dict]:
    """Exact tails next to the Chernoff and Cramér bounds on a grid of t."""
    lo, hi = ell(shape, 0.0, 1), math.log(shape.max_part)
    if not hi > lo:
        raise ValueError(f"{shape} has a single part size: the t-interval is empty (classical path)")
    ts = np.linspace(lo, hi, grid + 2)[1:-1]
    slack = default_slack(shape, n)

    def row(t):
        t = float(t)
        exact = exact_tail(shape, n, t)
        upper = chernoff_upper(shape, n, t)
        lower = cramer_lower(shape, n, t, slack)
        shifted = exact_tail(shape, n, t - slack)
        ok_upper = exact <= upper * (1 + 1e-12)
        ok_lower = lower <= 0 or lower <= shifted * (1 + 1e-12)
        return {
            "t": t,
            "exact": str(exact),
            "upper": upper,
            "slack": slack,
            "exact_shifted": str(shifted),
            "lower": lower,
            "sandwiched": bool(ok_upper and ok_lower),
        }

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(row, ts))
    return [row(t) for t in ts]


def cmd_sandwich(args):
    rows = sandwich(args.shape, args.n, args.grid, args.threads)
    code = EXIT_OK if all(r["sandwiched"] for r in rows) else EXIT_NEGATIVE
    if args.out and args.out.endswith(".csv"):
        keys = list(rows[0]) if rows else ["t"]
        return code, _csv(keys, [[r[k] for k in keys] for r in rows])
    return code, {"shape": args.shape.to_dict(), "n": args.n, "rows": rows}


# -- parser ------------------------------------------------------------


def _common(p, *flags):
    if "tol" in flags:
        p.add_argument("--tol", type=float, default=1e-9)
    if "bits" in flags:
        p.add_argument("--bits", action="store_true", help="report entropies in bits")
    p.add_argument("--out", help="write the result to FILE instead of stdout")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmem", description="Ordering and capacity of hybrid quantum memories.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("norms", help="log p-norms of a shape")
    p.add_argument("--shape", type=_shape_arg, required=True)
    p.add_argument("--p", type=_p_list)
    _common(p, "bits")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("embed", help="exact embedding search with certificate")
    p.add_argument("--a", type=_shape_arg, required=True)
    p.add_argument("--b", type=_shape_arg, required=True)
    p.add_argument("--node-budget", type=int, default=10_000_000)
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("supermajorize", help="is a supermajorized by b")
    p.add_argument("--a", type=_shape_arg, required=True)
    p.add_argument("--b", type=_shape_arg, required=True)
    _common(p)
    p.set_defaults(func=cmd_supermajorize)

    def bulk_check_args(p):
        p.add_argument("--a", type=_shape_arg, required=True)
        p.add_argument("--b", type=_shape_arg, required=True)
        _common(p, "tol")
        p.set_defaults(func=cmd_bulk_check)

    def bulk_construct_args(p):
        p.add_argument("--a", type=_shape_arg, required=True)
        p.add_argument("--b", type=_shape_arg, required=True)
        p.add_argument("--epsilon", type=_fraction_arg, required=True)
        p.add_argument("--max-n", type=int, default=4096)
        p.add_argument("--with-bound", action="store_true", help="also report the analytic scan bound")
        _common(p)
        p.set_defaults(func=cmd_bulk_construct)

    bulk = sub.add_parser("bulk", help="bulk embedding: check or construct")
    bulk_sub = bulk.add_subparsers(dest="bulk_verb", required=True, parser_class=_Parser)
    bulk_check_args(bulk_sub.add_parser("check"))
    bulk_construct_args(bulk_sub.add_parser("construct"))
    bulk_check_args(sub.add_parser("bulk-check"))
    bulk_construct_args(sub.add_parser("bulk-construct"))

    p = sub.add_parser("capacity", help="capacity region boundary as CSV")
    p.add_argument("--shape", type=_shape_arg, required=True)
    p.add_argument("--samples", type=int, default=256)
    _common(p, "bits")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("entropy", help="classical and quantum entropy of a state")
    p.add_argument("--shape", type=_shape_arg)
    p.add_argument("--state", required=True)
    _common(p, "bits")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("thermal", help="thermal state at exponent p")
    p.add_argument("--shape", type=_shape_arg, required=True)
    p.add_argument("--p", type=_p_arg, required=True)
    _common(p, "bits")
    p.set_defaults(func=cmd_thermal)

    p = sub.add_parser("region-contains", help="is (H,S) in the capacity region")
    p.add_argument("--shape", type=_shape_arg, required=True)
    p.add_argument("--point", type=_point_arg, required=True, help="H,S")
    _common(p, "tol", "bits")
    p.set_defaults(func=cmd_region_contains)

    p = sub.add_parser("region-subset", help="is the region of a inside that of b")
    p.add_argument("--a", type=_shape_arg, required=True)
    p.add_argument("--b", type=_shape_arg, required=True)
    _common(p, "tol")
    p.set_defaults(func=cmd_region_subset)

    p = sub.add_parser("typical", help="exact typical subalgebra")
    p.add_argument("--shape", type=_shape_arg)
    p.add_argument("--state", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=_fraction_arg, required=True)
    p.add_argument("--epsilon", type=_fraction_arg, help="also check the size estimates at this slack")
    _common(p)
    p.set_defaults(func=cmd_typical)

    p = sub.add_parser("bound", help="Hölder bound on coding fidelity")
    p.add_argument("--state", required=True)
    p.add_argument("--shape-a", type=_shape_arg)
    p.add_argument("--shape-b", type=_shape_arg, required=True)
    p.add_argument("--p", type=_p_arg)
    _common(p, "bits")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("fidelity", help="coding fidelity of given or random channels")
    p.add_argument("--state", required=True)
    p.add_argument("--channels")
    p.add_argument("--shape-b", type=_shape_arg)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _common(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("sandwich", help="exact tails against Chernoff and Cramér bounds")
    p.add_argument("--shape", type=_shape_arg, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", "--samples", dest="grid", type=int, default=50)
    _common(p)
    p.set_defaults(func=cmd_sandwich)
    return parser


def run(args: argparse.Namespace) -> tuple[int, dict | str]:
    """Execute a parsed command; returns the exit code and the document to emit."""
    return args.func(args)


def render(document: dict | str) -> str:
    if isinstance(document, str):
        return document
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code, document = run(args)
    except BudgetExceeded as exc:
        print(f"qmem: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"qmem: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = render(document)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
