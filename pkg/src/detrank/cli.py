"""Command-line front end. Records go to stdout as JSON, diagnostics to stderr.

Exit codes: 0 ok, 1 violation, 2 rejected input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import decomp, multilinear
from .experiments import ConfigError, EnsembleParams, run_bias_experiment, separation_report
from .field import FieldError, parse_field
from .multilinear import check_4to2_identity, det_form, levi_civita
from .rank import (
    BUDGET_ENV,
    BudgetExceeded,
    ark_det_closed_form,
    bias_exact,
    bias_monte_carlo,
    bias_via_gradient,
)
from .reduction_demos import ScriptError, builtin_scripts, check_minor_independence, load_script, run_script
from .search import (
    DEFAULT_SEARCH_BUDGET,
    UnverifiedDecomposition,
    exhaustive_prk_at_most,
    restriction_step,
    restriction_step_general,
    synthetic_two_term,
)

OK, VIOLATION, REJECTED = 0, 1, 2
STATUS = {OK: "ok", VIOLATION: "violation", REJECTED: "rejected"}


class Rejected(Exception):
    """Bad input; reported with exit status 2."""


def _emit(status: int, payload: dict, diagnostic: str = "") -> int:
    out = {"status": STATUS[status], **payload}
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    if diagnostic:
        print(diagnostic, file=sys.stderr)
    return status


def _field(text: str):
    try:
        return parse_field(text)
    except (FieldError, ValueError) as exc:
        raise Rejected(f"--field: {exc}") from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise Rejected(f"cannot read {path}: {exc.strerror}") from None


def _load_dec(path: str) -> decomp.Decomposition:
    try:
        return decomp.loads(_read(path))
    except (ValueError, IndexError) as exc:
        raise Rejected(f"{path}: {exc}") from None


def _load_form(path: str) -> multilinear.MultilinearForm:
    try:
        return multilinear.loads(_read(path))
    except (ValueError, IndexError) as exc:
        raise Rejected(f"{path}: {exc}") from None


# --- subcommands ---------------------------------------------------------------------


def _faulty_symbol(idx):
    s = levi_civita(idx)
    return -s if tuple(idx) == (1, 2, 3, 4) else s


def cmd_identity(args) -> int:
    rep = check_4to2_identity(_faulty_symbol if args.inject_fault else levi_civita)
    status = OK if rep.ok else VIOLATION
    return _emit(status, rep.to_record(), f"{rep.passed}/{rep.total} tuples satisfy the identity")


def cmd_verify(args) -> int:
    spec = _field(args.field)
    try:
        if args.expansion == "laplace":
            if args.n is None:
                raise Rejected("--n is required for laplace")
            dec = decomp.laplace(args.n, args.row, spec)
        elif args.expansion == "two-row":
            dec = decomp.two_row_laplace(tuple(args.rows), spec)
        elif args.expansion == "det4-quadratic":
            dec = decomp.det4_quadratic(spec)
        else:
            if not args.path:
                raise Rejected("--path is required for --expansion file")
            dec = _load_dec(args.path)
            if args.field_given:
                dec = dec.with_field(spec)
        target = _load_form(args.target).with_field(dec.spec) if args.target else decomp.det_target(dec)
    except (ValueError, multilinear.ShapeError) as exc:
        if isinstance(exc, Rejected):
            raise
        raise Rejected(str(exc)) from None
    res = decomp.verify(dec, target)
    payload = {"expansion": args.expansion, "terms": dec.r, "d": dec.d, "n": dec.n, "field": dec.spec.modulus}
    payload.update(res.to_record())
    diag = f"{dec.r} terms verify" if res.ok else f"mismatch at {payload.get('witness')}"
    return _emit(OK if res.ok else VIOLATION, payload, diag)


def cmd_ark(args) -> int:
    spec = _field(args.field)
    if not spec.is_prime_field:
        raise Rejected("bias needs a finite field")
    if (args.det is None) == (args.form is None):
        raise Rejected("give exactly one of --det and --form")
    if args.method == "closed-form":
        if args.det is None:
            raise Rejected("closed-form applies to --det only")
        rep = ark_det_closed_form(args.det, spec.p)
        if rep.ark_ceiling != 2:
            return _emit(VIOLATION, rep.to_record(), f"ceil(ark) = {rep.ark_ceiling}, expected 2")
        return _emit(OK, rep.to_record(), f"bias {rep.bias}, ceil(ark) = 2")
    T = det_form(args.det, spec) if args.det is not None else _load_form(args.form).with_field(spec)
    try:
        if args.method == "exact":
            rep = bias_exact(T)
        elif args.method == "gradient":
            rep = bias_via_gradient(T)
        else:
            rep = bias_monte_carlo(T, args.samples, args.seed)
    except BudgetExceeded as exc:
        raise Rejected(f"{exc}; use --method mc or raise {BUDGET_ENV}") from None
    return _emit(OK, rep.to_record(), f"ark = {rep.ark:.6g}")


def cmd_search(args) -> int:
    spec = _field(args.field)
    if not spec.is_prime_field:
        raise Rejected("search needs a finite field")
    if args.det is None and args.form is None:
        raise Rejected("give --det or --form")
    T = det_form(args.det, spec) if args.det is not None else _load_form(args.form).with_field(spec)
    tid = f"det_{args.det}" if args.det is not None else Path(args.form).name
    budget = args.budget
    if budget is None:
        env = os.environ.get(BUDGET_ENV)
        budget = int(env) if env else DEFAULT_SEARCH_BUDGET
    try:
        cert = exhaustive_prk_at_most(T, args.max_rank, budget=budget, workers=args.workers, target_id=tid)
    except BudgetExceeded as exc:
        return _emit(REJECTED, {"estimate": exc.size, "budget": exc.budget}, str(exc))
    return _emit(OK, cert.to_record(), f"{tid}, r <= {args.max_rank}: {cert.verdict}")


def cmd_restrict(args) -> int:
    dec = _load_dec(args.decomposition)
    if args.field is not None:
        dec = dec.with_field(_field(args.field))
    if not dec.spec.is_prime_field:
        raise Rejected("restriction needs a finite field; pass --field")
    try:
        if args.target:
            target = _load_form(args.target).with_field(dec.spec)
            out = restriction_step_general(target, dec)
        else:
            out = restriction_step(dec, force=args.force)
    except UnverifiedDecomposition as exc:
        return _emit(VIOLATION, {"error": str(exc), "witness": list(exc.witness)}, str(exc))
    except (ValueError, multilinear.ShapeError) as exc:
        raise Rejected(str(exc)) from None
    return _emit(OK, out.to_record(), f"{out.branch}")


def cmd_experiment(args) -> int:
    try:
        data = json.loads(_read(args.config))
    except json.JSONDecodeError as exc:
        raise Rejected(f"{args.config}: not valid JSON ({exc.msg})") from None
    try:
        params = EnsembleParams.from_mapping(data)
    except (ConfigError, TypeError) as exc:
        raise Rejected(f"config field {exc}") from None
    report = run_bias_experiment(params, workers=args.workers)
    record = report.to_record()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "samples.csv").write_text(report.to_table())
    diag = f"mean bias / q^-r = {report.ratio:.6f}"
    if not params.hypothesis_holds:
        diag += " (r exceeds (1 - epsilon) n / 2)"
    return _emit(OK, record, diag)


def cmd_script(args) -> int:
    if args.builtin:
        scripts = builtin_scripts()
        if args.builtin not in scripts:
            raise Rejected(f"unknown builtin script {args.builtin!r}; choose from {sorted(scripts)}")
        script, base = scripts[args.builtin], Path(".")
    elif args.path:
        try:
            script = load_script(args.path)
        except json.JSONDecodeError as exc:
            raise Rejected(f"{args.path}: not valid JSON ({exc.msg})") from None
        except OSError as exc:
            raise Rejected(f"cannot read {args.path}: {exc.strerror}") from None
        base = Path(args.path).parent
    else:
        raise Rejected("give --builtin or --path")
    try:
        trace = run_script(script, base)
    except ScriptError as exc:
        return _emit(VIOLATION, {"step": exc.step, "error": str(exc)}, str(exc))
    return _emit(OK, trace.to_record(), f"{len(trace.steps)} steps verified")


def cmd_minors(args) -> int:
    try:
        rep = check_minor_independence(tuple(args.rows), replace=args.replace)
    except ValueError as exc:
        raise Rejected(str(exc)) from None
    ok = rep.independent != args.replace
    return _emit(OK if ok else VIOLATION, rep.to_record(), f"rank {rep.rank} of {rep.count}")


def cmd_emit(args) -> int:
    spec = _field(args.field)
    target = None
    try:
        if args.expansion == "laplace":
            dec = decomp.laplace(args.n, args.row, spec)
        elif args.expansion == "two-row":
            dec = decomp.two_row_laplace(tuple(args.rows), spec)
        elif args.expansion == "det4-quadratic":
            dec = decomp.det4_quadratic(spec)
        else:
            if not spec.is_prime_field:
                raise Rejected("the synthetic example needs a finite field")
            target, dec = synthetic_two_term(spec, args.n)
    except ValueError as exc:
        raise Rejected(str(exc)) from None
    text = decomp.dumps(dec)
    if args.target_out:
        if target is None:
            target = decomp.det_target(dec)
        Path(args.target_out).write_text(multilinear.dumps(target))
    if args.out is None:
        sys.stdout.write(text)
        return OK
    Path(args.out).write_text(text)
    return _emit(OK, {"path": args.out, "terms": dec.r, "target_path": args.target_out}, "")


def cmd_separation(args) -> int:
    if args.d < 2:
        raise Rejected("d must be at least 2")
    return _emit(OK, separation_report(args.d, args.q), "")


# --- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="detrank", description=__doc__, formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identity", help="check the 4-to-2 Levi-Civita identity", formatter_class=fmt)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_identity)

    p = sub.add_parser("verify", help="verify an expansion of det_n", formatter_class=fmt)
    p.add_argument("--expansion", choices=["laplace", "two-row", "det4-quadratic", "file"], required=True)
    p.add_argument("--n", type=int, default=None, help="matrix size (laplace)")
    p.add_argument("--row", type=int, default=1, help="1-based row (laplace)")
    p.add_argument("--rows", type=int, nargs=2, default=[1, 2], metavar=("I1", "I2"), help="rows (two-row)")
    p.add_argument("--path", type=str, default=None, help="decomposition file (file)")
    p.add_argument("--target", type=str, default=None, help="form file to verify against instead of det_n")
    p.add_argument("--field", type=str, default=None, help="prime p or 'int' (default: int, or the file's field)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ark", help="bias and analytic rank", formatter_class=fmt)
    p.add_argument("--det", type=int, default=None, help="use det_n")
    p.add_argument("--form", type=str, default=None, help="form file")
    p.add_argument("--field", type=str, required=True, help="prime p")
    p.add_argument("--method", choices=["exact", "gradient", "closed-form", "mc"], default="gradient")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo samples")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ark)

    p = sub.add_parser("search", help="exhaustive partition-rank search", formatter_class=fmt)
    p.add_argument("--det", type=int, default=None, help="use det_n")
    p.add_argument("--form", type=str, default=None, help="form file")
    p.add_argument("--field", type=str, required=True, help="prime p")
    p.add_argument("--max-rank", type=int, required=True)
    p.add_argument("--budget", type=int, default=None, help=f"enumeration budget (default ${BUDGET_ENV} or 1e9)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("restrict", help="one restriction step of the lower-bound argument", formatter_class=fmt)
    p.add_argument("--decomposition", type=str, required=True, help="decomposition file")
    p.add_argument("--field", type=str, default=None, help="prime p (default: the file's field)")
    p.add_argument("--target", type=str, default=None, help="non-det target form file")
    p.add_argument("--force", action="store_true", help="restrict even when k + r > n if k + l <= n")
    p.set_defaults(func=cmd_restrict)

    p = sub.add_parser("experiment", help="random partition-rank ensemble", formatter_class=fmt)
    p.add_argument("--config", type=str, required=True, help="JSON file with EnsembleParams fields")
    p.add_argument("--out", type=str, default=None, help="directory for report.json and samples.csv")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("script", help="run a reduction script", formatter_class=fmt)
    p.add_argument("--builtin", type=str, default=None, help="round-trip, transpose or syzygy")
    p.add_argument("--path", type=str, default=None, help="JSON script file")
    p.set_defaults(func=cmd_script)

    p = sub.add_parser("minors", help="independence of the 2x2 minors on two rows", formatter_class=fmt)
    p.add_argument("--rows", type=int, nargs=2, default=[1, 2], metavar=("I1", "I2"))
    p.add_argument("--replace", action="store_true", help="replace the last minor by a sum of two others")
    p.set_defaults(func=cmd_minors)

    p = sub.add_parser("emit", help="write a generated decomposition in the text format", formatter_class=fmt)
    p.add_argument("--expansion", choices=["laplace", "two-row", "det4-quadratic", "synthetic"], required=True)
    p.add_argument("--n", type=int, default=3, help="matrix size (laplace) or dimension (synthetic)")
    p.add_argument("--row", type=int, default=1, help="1-based row (laplace)")
    p.add_argument("--rows", type=int, nargs=2, default=[1, 2], metavar=("I1", "I2"), help="rows (two-row)")
    p.add_argument("--field", type=str, default="int", help="prime p or 'int'")
    p.add_argument("--out", type=str, default=None, help="decomposition path (default: stdout)")
    p.add_argument("--target-out", type=str, default=None, help="also write the target form here")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("separation", help="prk versus ceil(ark) for det_d", formatter_class=fmt)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--q", type=int, default=2)
    p.set_defaults(func=cmd_separation)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        args.field_given = args.field is not None
        if args.field is None:
            args.field = "int"
    try:
        return args.func(args)
    except Rejected as exc:
        return _emit(REJECTED, {"error": str(exc)}, f"rejected: {exc}")


if __name__ == "__main__":
    sys.exit(main())
