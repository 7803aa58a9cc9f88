"""Command-line front end: ``matron-match {solve,verify,check-order,conjugate}``.

Exit codes: 0 success; 1 verification or check failed; 2 unreadable or
malformed input; 3 the solver did not converge (a partial result is still
written).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import MatronMatchError, SchemaError, SolverIntegrityError
from .grid import default_dual_axes, legendre_transform
from .io import (dumps, load_instance, load_json, parse_axes, parse_grid_function,
                 parse_result, result_document)

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NOCONV = 0, 1, 2, 3


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_solve(args):
    from dataclasses import replace

    from .da import extract_equilibrium, run_da, verify_generalized_equilibrium

    inst = load_instance(args.instance)
    opts = inst.options
    over = {k: v for k, v in (("tol_stop", args.tol), ("max_iter", args.max_iter),
                              ("update_rule", args.update_rule)) if v is not None}
    opts = replace(opts, **over)
    G, H = inst.welfares()
    mk = inst.market
    try:
        trace = run_da(G, H, mk.alpha, mk.gamma, opts)
    except SolverIntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            trace.to_jsonl(fh)
    out = extract_equilibrium(trace, G, H, mk.alpha, mk.gamma, allow_unconverged=True)
    report = verify_generalized_equilibrium(out, G, H, mk.alpha, mk.gamma, args.verify_tol)
    verified = trace.converged and report.passed
    _write(dumps(result_document(out, trace, verified, report, opts)), args.out)
    if not trace.converged:
        print(f"not converged after {trace.iterations} iterations", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK if verified else EXIT_FAIL


def cmd_verify(args):
    from .da import verify_generalized_equilibrium

    inst = load_instance(args.instance)
    out = parse_result(load_json(args.result))
    mk = inst.market
    if out.mu.mu.shape != mk.shape:
        raise SchemaError(f"result shape {out.mu.mu.shape} does not match instance {mk.shape}")
    G, H = inst.welfares()
    report = verify_generalized_equilibrium(out, G, H, mk.alpha, mk.gamma, args.tol)
    print(json.dumps(report.to_dict(), allow_nan=False, default=str))
    return EXIT_OK if report.passed else EXIT_FAIL


def _set(doc, key):
    from .sets import PointSet

    try:
        return PointSet(np.asarray(doc[key], dtype=float), tol=float(doc.get("member_tol", 1e-9)))
    except KeyError as exc:
        raise SchemaError(f"check spec is missing {key!r}") from exc
    except ValueError as exc:
        raise SchemaError(f"{key}: {exc}") from exc


def run_check(doc):
    """Dispatch a declarative check spec; returns an object with ``passed`` and ``to_dict``."""
    from . import orders, sets

    if not isinstance(doc, dict) or "check" not in doc:
        raise SchemaError("check spec needs a 'check' field")
    name = doc["check"]
    tol = float(doc.get("tol", 1e-9))
    kw = {"budget": int(doc.get("budget", orders.DEFAULT_BUDGET)),
          "seed": int(doc.get("seed", orders.DEFAULT_SEED))}
    step = doc.get("step")
    if name == "q_order_sets":
        return sets.check_q_order_sets(_set(doc, "X"), _set(doc, "Y"), tol, step)
    if name == "matron":
        return sets.check_matron(_set(doc, "X"), tol, step)
    if name == "m_natural":
        return sets.check_m_natural(_set(doc, "X"), step, tol)
    if name == "paramodular":
        try:
            pair = sets.SetFunctionPair(doc["g"], doc["h"])
        except KeyError as exc:
            raise SchemaError("paramodular check needs tables g and h") from exc
        return sets.check_paramodular(pair, tol, **kw)
    f = parse_grid_function(doc.get("f"), "f") if "f" in doc else None
    g = parse_grid_function(doc.get("g"), "g") if "g" in doc else f
    if f is None:
        raise SchemaError(f"check {name!r} needs a function 'f'")
    if name == "submodular":
        return orders.check_submodular(f, tol, **kw)
    if name == "p_order":
        return orders.check_p_order(f, g, tol, **kw)
    if name == "q_order_functions":
        return orders.check_q_order_functions(f, g, tol, **kw)
    if name == "exchangeable":
        return orders.check_exchangeable(f, tol, **kw)
    if name in ("eps_d_q_order", "eps_d_p_order", "duality"):
        eps = float(doc.get("eps", 1e-6))
        D = [int(i) for i in doc.get("D", range(f.ndim))]
        if name == "eps_d_q_order":
            return orders.check_eps_d_q_order(f, g, eps, D, **kw)
        if name == "eps_d_p_order":
            return orders.check_eps_d_p_order(f, g, eps, D, **kw)
        dual = parse_axes(doc["dual_axes"], "dual_axes") if "dual_axes" in doc else default_dual_axes(f)
        return orders.duality_check(f, g, eps, D, dual, **kw)
    raise SchemaError(f"unknown check {name!r}")


def cmd_check_order(args):
    report = run_check(load_json(args.spec))
    doc = report.to_dict()
    if name_of(report) == "duality":
        ok = report.agree or report.within_band
        doc["pass"] = ok
    else:
        ok = report.passed
    _write(dumps(doc), args.out)
    if not ok:
        print(f"FAIL witness: {json.dumps(_witness(report), default=str)}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def name_of(report):
    return "duality" if hasattr(report, "q_report") else getattr(report, "check", "")


def _witness(report):
    if hasattr(report, "q_report"):
        return {"q": report.q_report.witness, "p": report.p_report.witness}
    return report.witness


def cmd_conjugate(args):
    f = parse_grid_function(load_json(args.function), "function")
    if args.axis:
        dual = tuple(np.linspace(float(a), float(b), int(k)) for a, b, k in args.axis)
    else:
        dual = default_dual_axes(f)
    fstar = legendre_transform(f, dual, warn=False)
    if fstar.saturated:
        print("warning: dual grid does not enclose the subgradient range", file=sys.stderr)
    _write(dumps(fstar.to_dict()), args.out)
    return EXIT_OK


def build_parser():
    from . import __version__

    p = argparse.ArgumentParser(prog="matron-match", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run deferred acceptance on an instance file")
    s.add_argument("instance")
    s.add_argument("--tol", type=float, help="stopping tolerance on max|mu_P - mu_T|")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--update-rule", choices=["subtractive", "alkan_gale"])
    s.add_argument("--trace-out", help="write the iteration trace as JSON lines")
    s.add_argument("--verify-tol", type=float, default=1e-6)
    s.add_argument("-o", "--out", help="result file (default stdout)")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a stored result against its instance")
    v.add_argument("instance")
    v.add_argument("result")
    v.add_argument("--tol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check-order", help="run an order or structure check from a spec file")
    c.add_argument("spec")
    c.add_argument("-o", "--out")
    c.set_defaults(func=cmd_check_order)

    j = sub.add_parser("conjugate", help="Legendre transform of a grid function file")
    j.add_argument("function")
    j.add_argument("--axis", nargs=3, action="append", metavar=("START", "STOP", "NUM"),
                   help="dual axis, repeat once per dimension (default: enclose the slopes)")
    j.add_argument("-o", "--out")
    j.set_defaults(func=cmd_conjugate)
    return p


def main(argv=None):
    from .orders import set_threads_from_env

    args = build_parser().parse_args(argv)
    set_threads_from_env()
    try:
        return args.func(args)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except MatronMatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA if isinstance(exc, ValueError) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
