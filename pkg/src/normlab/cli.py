"""``normlab`` command line: norms, certificates, embeddings and batch suites.

Every subcommand prints a report to stdout (JSON with ``--json``, a plain
table otherwise) and diagnostics to stderr.  Exit codes: 0 success, 1 a check
ran but its verdict is negative, 2 input or domain error, 3 numeric failure,
4 degenerate input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .certificates import certify
from .construct import constructed_space
from .embedding import DistanceMatrix, config_U, config_V, optimize_embedding
from .exceptions import ConvergenceError, DegenerateInputError, NormlabError
from .spaces import as_vector, luxemburg_norm, parse_space
from .suites import SUITES, CLARKSON_EXPONENTS

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 1, 2, 3, 4
DIGITS = 12


@dataclass
class RunReport:
    command: str
    inputs: dict
    outputs: dict
    seed: int | None
    elapsed: float
    version: str = __version__

    def to_json(self, digits: int = DIGITS) -> dict:
        return _rounded(asdict(self), digits)


def _rounded(obj, digits: int = DIGITS):
    """Round every float to ``digits`` significant digits; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return _rounded(obj.tolist(), digits)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{digits}g}")
    return obj


def _json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{what} is not valid JSON: {exc}") from None


class ArgumentError(NormlabError, ValueError):
    pass


def _float_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated integers, got {text!r}") from None


# --- subcommands -------------------------------------------------------------


def cmd_norm(args):
    space = parse_space(args.space)
    vec = _json_arg(args.vector, "--vector")
    value = luxemburg_norm(space, as_vector(vec))
    inputs = {"space": space.to_json(), "vector": vec}
    return inputs, {"norm": value}, None, EXIT_OK


def cmd_certify(args):
    space = parse_space(args.space)
    x = _json_arg(args.x, "--x")
    y = _json_arg(args.y, "--y")
    cert = certify(args.branch, space, as_vector(x), as_vector(y))
    out = cert.to_json()
    code = EXIT_OK if out["verdict"] == "inconsistent" else EXIT_VERDICT
    return {"branch": args.branch, "space": space.to_json(), "x": x, "y": y}, out, None, code


def cmd_embed(args):
    space = parse_space(args.space)
    if args.set:
        name, _, p = args.set.partition(":")
        builders = {"U": config_U, "V": config_V}
        if name not in builders or not p:
            raise ArgumentError(f"--set expects U:p or V:p, got {args.set!r}")
        try:
            p = float(p)
        except ValueError:
            raise ArgumentError(f"--set expects U:p or V:p, got {args.set!r}") from None
        _, D = builders[name](p)
        source = {"set": args.set}
    else:
        D = DistanceMatrix.load(args.distances)
        source = {"distances": str(args.distances)}
    res = optimize_embedding(D, space, args.dim, starts=args.starts, seed=args.seed, max_iters=args.max_iters)
    inputs = {**source, "space": space.to_json(), "dim": args.dim, "starts": args.starts, "max_iters": args.max_iters}
    return inputs, res.to_json(), args.seed, EXIT_OK


def _suite_inputs_outputs(args):
    name = args.suite
    if name == "clarkson":
        exps = _float_list(args.p) if args.p else list(CLARKSON_EXPONENTS)
        inputs = {"p": exps, "pairs": args.pairs, "seed": args.seed}
        return inputs, SUITES[name](exps, pairs=args.pairs, seed=args.seed), args.seed
    if name == "axioms":
        inputs = {"space": parse_space(args.space).to_json(), "vectors": args.vectors, "seed": args.seed}
        return inputs, SUITES[name](args.space, vectors=args.vectors, seed=args.seed), args.seed
    if name == "criterion":
        inputs = {"p": args.p, "K": args.K, "budget": args.budget}
        return inputs, SUITES[name](args.p, K=args.K, budget=args.budget), None
    if name == "james":
        blocks = _int_list(args.blocks)
        inputs = {"space": parse_space(args.space).to_json(), "blocks": blocks}
        return inputs, SUITES[name](args.space, blocks=blocks), None
    # residual-curve
    space = parse_space(args.space) if args.space else _default_residual_space(args.branch)
    dims = _int_list(args.dims)
    inputs = {"branch": args.branch, "space": space.to_json(), "dims": dims, "starts": args.starts, "seed": args.seed}
    out = SUITES[name](args.branch, space, dims=dims, starts=args.starts, seed=args.seed)
    return inputs, out, args.seed


def _default_residual_space(branch: str):
    if branch == "p_lt_2":
        return parse_space("orlicz:1.5,1.75")
    return constructed_space(3.0)


def cmd_suite(args):
    inputs, out, seed = _suite_inputs_outputs(args)
    code = EXIT_OK if out.get("verdict") == "pass" else EXIT_VERDICT
    return {"suite": args.suite, **inputs}, out, seed, code


# --- parser ------------------------------------------------------------------


def _add_json(p):
    p.add_argument("--json", action="store_true", help="print the report as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"normlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="Luxemburg norm of a vector")
    p.add_argument("--space", required=True, help="JSON spec or shorthand (lp:p, orlicz:p,r, modular:p)")
    p.add_argument("--vector", required=True, help="JSON array, coordinates 1, 2, ...")
    p.add_argument("--precision", type=int, default=DIGITS, help="significant digits in the table")
    _add_json(p)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("certify", help="obstruction certificate for a pair (x, y)")
    p.add_argument("--branch", required=True, choices=["p_lt_2", "p_gt_2"])
    p.add_argument("--space", required=True)
    p.add_argument("--x", required=True, help="JSON array")
    p.add_argument("--y", required=True, help="JSON array")
    _add_json(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("embed", help="low-distortion embedding of a finite metric")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--set", help="U:p or V:p")
    src.add_argument("--distances", help="distance matrix file (.json or .csv)")
    p.add_argument("--space", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-iters", type=int, default=3000)
    _add_json(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("suite", help="batch experiment with a pass/fail verdict")
    suites = p.add_subparsers(dest="suite", metavar="{" + ",".join(SUITES) + "}")
    suites.required = True

    s = suites.add_parser("clarkson")
    s.add_argument("--p", help="comma-separated exponents")
    s.add_argument("--pairs", type=int, default=10_000)
    s.add_argument("--seed", type=int, required=True)
    _add_json(s)

    s = suites.add_parser("axioms")
    s.add_argument("--space", required=True)
    s.add_argument("--vectors", type=int, default=10_000)
    s.add_argument("--seed", type=int, required=True)
    _add_json(s)

    s = suites.add_parser("criterion")
    s.add_argument("--p", type=float, default=3.0)
    s.add_argument("--K", type=float, default=3.0)
    s.add_argument("--budget", type=int, default=1000)
    _add_json(s)

    s = suites.add_parser("james")
    s.add_argument("--space", default="orlicz:1.5,1.75")
    s.add_argument("--blocks", default="1,2,4")
    _add_json(s)

    s = suites.add_parser("residual-curve")
    s.add_argument("--branch", required=True, choices=["p_lt_2", "p_gt_2"])
    s.add_argument("--space", help="default: orlicz:1.5,1.75 or the constructed p=3 space")
    s.add_argument("--dims", default="2,4,8")
    s.add_argument("--starts", type=int, default=100)
    s.add_argument("--seed", type=int, required=True)
    _add_json(s)

    p.set_defaults(func=cmd_suite)
    return parser


# --- output ------------------------------------------------------------------


def _fmt(v, digits):
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


def _print_table(report: dict, digits: int, out):
    print(f"{report['command']}  (normlab {report['version']}, {report['elapsed']:.3g} s)", file=out)
    outputs = dict(report["outputs"])
    rows = outputs.pop("rows", None)
    for key, value in outputs.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value)
        print(f"  {key:<22} {_fmt(value, digits)}", file=out)
    if rows:
        cols = [c for c in rows[0] if not isinstance(rows[0][c], (list, dict))]
        cells = [[_fmt(r.get(c), digits) for c in cols] for r in rows]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
        print("  " + "  ".join(c.ljust(w) for c, w in zip(cols, widths)), file=out)
        for row in cells:
            print("  " + "  ".join(v.ljust(w) for v, w in zip(row, widths)), file=out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        inputs, outputs, seed, code = args.func(args)
    except DegenerateInputError as exc:
        print(f"normlab: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ConvergenceError as exc:
        print(f"normlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NormlabError, OSError) as exc:
        print(f"normlab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"normlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    command = args.command if args.command != "suite" else f"suite {args.suite}"
    digits = getattr(args, "precision", DIGITS)
    report = RunReport(command, inputs, outputs, seed, time.perf_counter() - t0).to_json(digits)
    if args.json:
        json.dump(report, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        _print_table(report, digits, sys.stdout)
    if code == EXIT_VERDICT:
        print(f"normlab: verdict {outputs.get('verdict')!r}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
