"""Command-line front end.

One binary, subcommand style; every report has a text and a JSON form and
all randomness is seeded, so identical invocations produce byte-identical
output.  Exit codes: 0 success, 1 verification failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import sympy as sp

from . import cases, transforms, transport
from .expr import (
    EPS, U, V1, X, Y, Context, ExprError, ParseError,
    expr_function, parse, to_text,
)
from .family import FamilyMember, is_linear, member_from_text, signature
from .generators import build_general, generic_free_data, solve_wave_determining


class InputError(Exception):
    pass


def _emit(report: dict, text: str, as_json: bool):
    if as_json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(text)


def _parse_expr(label: str, text: str):
    try:
        return parse(text)
    except ParseError as exc:
        raise InputError(f"{label}: {exc}") from None


def _member_from_args(args) -> FamilyMember:
    if args.member:
        path = Path(args.member)
        if not path.exists():
            raise InputError(f"member file not found: {path}")
        try:
            return member_from_text(path.read_text())
        except ExprError as exc:
            raise InputError(f"{path}: {exc}") from None
    if args.f is None and args.g is None and args.h is None:
        raise InputError("empty member: provide -f/--f, -g/--g, --h or --member FILE")
    f = _parse_expr("f", args.f) if args.f is not None else sp.Integer(0)
    g = _parse_expr("g", args.g) if args.g is not None else sp.Integer(0)
    h = _parse_expr("h", args.h) if args.h is not None else sp.Integer(0)
    return FamilyMember(f, g, h)


_FAMILY_PARAMS = {"4.1": ((U,),), "4.2": ((U,), (U,)), "4.3": ((U, Y),), "4.4": ((U, X),)}


def _apply_spec_file(args):
    """Fill family/m/p/eps from a transform spec file; explicit flags win.

    The file holds {"family": "4.1", "functions": {"m": "u^2", "p": "..."},
    "eps": 0.1}.
    """
    if not getattr(args, "spec", None):
        return
    path = Path(args.spec)
    if not path.exists():
        raise InputError(f"spec file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    if not isinstance(spec, dict):
        raise InputError(f"{path}: expected a JSON object")
    functions = spec.get("functions", {})
    if args.family is None and "family" in spec:
        args.family = str(spec["family"])
    if args.m is None and "m" in functions:
        args.m = str(functions["m"])
    if args.p is None and "p" in functions:
        args.p = str(functions["p"])
    if getattr(args, "eps", None) is None and "eps" in spec:
        args.eps = float(spec["eps"])


def _shape_functions(args):
    """Numeric + symbolic shape functions for the selected transform family."""
    if args.family is None:
        args.family = "4.1"
    family = args.family
    if family not in transforms.FAMILIES:
        raise InputError(f"unknown family {family!r}; choose from {', '.join(transforms.FAMILIES)}")
    specs = _FAMILY_PARAMS[family]
    texts = [args.m]
    names = ["m"]
    if family == "4.2":
        if args.p is None:
            raise InputError("family 4.2 needs both --m and --p")
        texts.append(args.p)
        names.append("p")
    elif args.p is not None:
        raise InputError(f"family {family} takes --m only")
    if args.m is None:
        raise InputError("missing --m EXPR")
    functions = {}
    for name, params, text in zip(names, specs, texts):
        body = _parse_expr(name, text)
        extra = body.free_symbols - set(params)
        if extra:
            allowed = ", ".join(str(p) for p in params)
            raise InputError(f"{name} may depend only on ({allowed}); "
                             f"found {sorted(map(str, extra))}")
        functions[name] = expr_function(params, body)
    return functions


def _make_transform(args) -> transforms.PointTransformation:
    return transforms.make_transform(args.family)


# ---------------------------------------------------------------------------
# subcommands

def cmd_classify(args) -> int:
    member = _member_from_args(args)
    result = cases.classify(signature(member))
    report = result.as_dict()
    report["member"] = member.as_dict()
    lines = [f"row:      {result.row_id or 'UNCOVERED'}",
             f"verdict:  {result.verdict}"]
    if result.shapes:
        for name, text in cases.shapes_as_text(result.shapes).items():
            lines.append(f"  {name}: {text}")
    if result.witnesses:
        lines.append("witness:  " + " / ".join(result.witnesses))
    for branch in result.branches:
        lines.append(f"branch:   {branch}")
    for note in result.notes:
        lines.append(f"note:     {note}")
    for d in result.discrepancies:
        lines.append(f"caveat:   {d}")
    if result.nearest:
        lines.append("nearest:  " + ", ".join(result.nearest))
    _emit(report, "\n".join(lines), args.json)
    return 0


def cmd_generators(args) -> int:
    if args.case:
        if args.case not in cases.CATALOG:
            raise InputError(f"unknown case {args.case!r}; known: {', '.join(cases.ROW_IDS)}")
        gs = cases.row_generator_set(args.case)
        header = f"# generator set for case {args.case}"
    else:
        gs = solve_wave_determining(build_general(generic_free_data()))
        header = "# most general admissible generator set"
    report = {"case": args.case, "coefficients": gs.as_dict()}
    _emit(report, header + "\n" + gs.report(), args.json)
    return 0


def cmd_transform(args) -> int:
    _apply_spec_file(args)
    member = _member_from_args(args)
    functions = _shape_functions(args)
    pt = _make_transform(args)
    out = transforms.transform_member(member, pt)
    if args.eps is not None:
        eps = sp.Rational(str(args.eps))
        bound = FamilyMember(*(sp.sympify(e).subs(EPS, eps)
                               for e in (out.f, out.g, out.h)))
    else:
        bound = out
    report = {
        "family": args.family,
        "input": member.as_dict(),
        "transformed": bound.as_dict(),
        "transformed_is_linear": is_linear(bound),
    }
    text = (f"family {args.family}\n"
            f"f_bar = {to_text(bound.f)}\n"
            f"g_bar = {to_text(bound.g)}\n"
            f"h_bar = {to_text(bound.h)}\n"
            f"linear: {report['transformed_is_linear']}")
    _emit(report, text, args.json)
    return 0


def cmd_verify(args) -> int:
    _apply_spec_file(args)
    member = _member_from_args(args)
    functions = _shape_functions(args)
    pt = _make_transform(args)
    rep = transforms.verify_invariance(
        member, pt, samples=args.samples, functions=functions,
        seed=args.seed, eps_value=args.eps,
    )
    ok = rep.max_deviation <= args.tol
    report = rep.as_dict()
    report.update({"tolerance": args.tol, "passed": ok, "seed": args.seed})
    text = (f"family {rep.family}: {rep.samples} samples, "
            f"max deviation {rep.max_deviation:.3e} "
            f"(tolerance {args.tol:.1e}), rejections {rep.singular_rejections}\n"
            f"{'PASS' if ok else 'FAIL'}")
    _emit(report, text, args.json)
    return 0 if ok else 1


def cmd_transport(args) -> int:
    _apply_spec_file(args)
    if args.eps is None:
        raise InputError("missing --eps (or an eps entry in --spec)")
    functions = _shape_functions(args)
    psi_body = _parse_expr("psi", args.psi)
    phi_body = _parse_expr("phi", args.phi)
    for label, body in (("psi", psi_body), ("phi", phi_body)):
        extra = body.free_symbols - {Y}
        if extra:
            raise InputError(f"{label} may depend only on y; found {sorted(map(str, extra))}")
    sol = transport.dalembert(expr_function((Y,), psi_body), expr_function((Y,), phi_body))
    pt = _make_transform(args)
    source = FamilyMember(V1, 0, 0)
    target = transforms.transform_member(source, pt)
    imp = transport.transport_solution(sol, pt, args.eps, functions)
    rep = transport.certify(imp, target, grid=(args.grid, -1.0, 1.0),
                            h_step=args.h_step, tol=args.tol)
    ok = not rep.rejected and (args.max_residual is None or rep.max_residual <= args.max_residual)
    report = rep.as_dict()
    report.update({
        "family": args.family,
        "relation": to_text(imp.relation),
        "member": target.as_dict(),
        "passed": ok,
    })
    if args.family != "4.1":
        report["note"] = "transport through this family is an extension of the worked example"
    text = (f"relation: {to_text(imp.relation)} = 0\n"
            f"grid {args.grid}^3 on [-1, 1]^3, eps = {args.eps}, h = {args.h_step}\n"
            f"max residual {rep.max_residual:.3e}, newton max iterations "
            f"{rep.newton_max_iterations}, rejected {len(rep.rejected)}\n"
            f"{'PASS' if ok else 'FAIL'}")
    _emit(report, text, args.json)
    return 0 if ok else 1


def cmd_case_check(args) -> int:
    ids = cases.ROW_IDS if (args.all or not args.case) else (args.case,)
    reports = []
    failed = False
    lines = []
    for rid in ids:
        if rid not in cases.CATALOG:
            raise InputError(f"unknown case {rid!r}; known: {', '.join(cases.ROW_IDS)}")
        rep = cases.verify_case(rid)
        reports.append(rep.as_dict())
        failed = failed or not rep.passed
        lines.append(f"{'PASS' if rep.passed else 'FAIL'} {rid}: "
                     f"{len(rep.constraints_checked)} constraints, "
                     f"{len(rep.residuals)} nonzero residuals, verdict {rep.verdict}")
        for name, res in rep.residuals:
            lines.append(f"    {name}: {res}")
    _emit({"cases": reports}, "\n".join(lines), args.json)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# argument plumbing

def _add_member_flags(p: argparse.ArgumentParser):
    p.add_argument("-f", "--f", dest="f", metavar="EXPR", help="flux f (inline expression)")
    p.add_argument("-g", "--g", dest="g", metavar="EXPR", help="flux g (inline expression)")
    p.add_argument("-h", "--h", dest="h", metavar="EXPR", help="source h (inline expression)")
    p.add_argument("--member", metavar="FILE", help="member file (f = ..., g = ..., h = ...)")


def _add_transform_flags(p: argparse.ArgumentParser):
    p.add_argument("--family", default=None, choices=transforms.FAMILIES)
    p.add_argument("--m", dest="m", metavar="EXPR", help="shape function m")
    p.add_argument("--p", dest="p", metavar="EXPR", help="shape function p (family 4.2)")
    p.add_argument("--spec", metavar="FILE",
                   help='transform spec file: {"family": ..., "functions": {...}, "eps": ...}')


def _subparser(sub, name: str, help_text: str, member_flags: bool = False):
    # -h is freed up for the source term; --help stays available
    p = sub.add_parser(name, help=help_text, add_help=False)
    p.add_argument("--help", action="help", help="show this help message and exit")
    if member_flags:
        _add_member_flags(p)
    p.add_argument("--json", action="store_true", help="emit the JSON report")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="waveequiv",
        description="equivalence transformations and linearization analysis "
                    "for the wave family u_tt = f_x + g_y + h",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = _subparser(sub, "classify", "classify a member's dependency pattern", member_flags=True)
    p.set_defaults(fn=cmd_classify)

    p = _subparser(sub, "generators", "print an admissible generator set")
    p.add_argument("--case", metavar="ID", help="catalog row id (default: general)")
    p.set_defaults(fn=cmd_generators)

    p = _subparser(sub, "transform", "push a member through a transform family", member_flags=True)
    _add_transform_flags(p)
    p.add_argument("--eps", type=float, default=None, help="bind the group parameter")
    p.set_defaults(fn=cmd_transform)

    p = _subparser(sub, "verify", "sample the equation-invariance identity", member_flags=True)
    _add_transform_flags(p)
    p.add_argument("--eps", type=float, default=None,
                   help="group parameter (default: sampled per point)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_verify)

    p = _subparser(sub, "transport", "transport the plane-wave solution and certify it")
    _add_transform_flags(p)
    p.add_argument("--psi", required=True, metavar="EXPR", help="psi(y)")
    p.add_argument("--phi", required=True, metavar="EXPR", help="phi(y)")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--h-step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-residual", type=float, default=None,
                   help="fail when the certified residual exceeds this bound")
    p.set_defaults(fn=cmd_transport)

    p = _subparser(sub, "case-check", "verify catalog rows symbolically")
    p.add_argument("--case", metavar="ID", help="single catalog row")
    p.add_argument("--all", action="store_true", help="verify every row (default)")
    p.set_defaults(fn=cmd_case_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, matching the input-error code
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExprError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
