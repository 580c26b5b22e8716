"""Command-line front end: ``jetop COMMAND FILE [options]``.

Exit status is 0 when every check passes, 1 when some check fails and 2 on
usage or input errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import oracle as O
from .covering import CoveringError, compatibility_check, residual_text
from .dsl import ParseError, SymbolTable, parse
from .jets import Context, check_invariance
from .lax import LaxError, PipelineError, check_lax, derive_ro_pipeline, lambda_degree_reduce
from .recursion import (ROError, ROSpec, _det, apply, build_lax_from_ro, condition_iv_matrix, relations_text,
                         ro_relations, verify)
from .report import FAIL, PASS, Check, Report, check, info
from .symbols import var_of
from .workspace import load

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("JETOP_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"JETOP_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _expr(ws, text: str, extra=()):
    table = ws.table
    if extra:
        table = SymbolTable(list(table.independents), list(table.dependents) + list(extra),
                            list(table.constants), list(table.nonlocals))
    return parse(text, table)


def _candidate(ws, text: str):
    if text in ws.symmetries:
        return ws.symmetries[text][0]
    return _expr(ws, text)


# commands --------------------------------------------------------------------


def cmd_validate(ws, args, rep: Report):
    sysm = ws.system
    rep.add(info("system", f"{sysm.name}: {len(sysm.equations)} equation(s) in {', '.join(sysm.independents)}"))
    rep.add(info("ranking", " > ".join(sysm.ranking)))
    for lead, rhs in sysm.orientation.items():
        rep.add(info(f"solve {lead.text()}", rhs.to_text()))
    for k, v in sysm.const_rules.items():
        rep.add(info(f"constant {var_of(k).name}", v.to_text()))
    if ws.covering is not None and ws.covering.variables:
        comp = compatibility_check(ws.covering)
        bad = {n for n, *_ in ws.covering.witness}
        for name in ws.covering.variables:
            res = [r for n, _, _, r in comp.residuals if n == name and not r.is_zero()]
            rep.add(check(f"nonlocal {name} compatible", name not in bad, residual_text(res[0]) if res else "0"))


def cmd_lax_check(ws, args, rep: Report):
    lax = ws.lax_pair()
    rep.extend(check_lax(lax, ws.context(False)))


def cmd_lax_reduce(ws, args, rep: Report):
    ctx = ws.context(False)
    lax = ws.lax_pair()
    red = lambda_degree_reduce(lax, ctx)
    for d, op in zip(ws.lax, red.ops):
        rep.add(info(d.name, op.to_text()))
    rep.extend(check_lax(red, ctx))


def _ro_checks(spec: ROSpec, ctx, prefix: str):
    rv = verify(spec, ctx)
    out = [Check(prefix + c.name, c.status, c.residual, c.value) for c in rv.checks]
    if rv.passed:
        full = ROSpec(spec.A1, spec.A2, spec.B1, spec.B2, rv.L, rv.M, rv.p, rv.q, spec.mode, spec.name)
        lx = build_lax_from_ro(full, ctx)
        out += [Check(prefix + "pencil " + c.name, c.status, c.residual, c.value) for c in lx.checks]
        for line in relations_text(ro_relations(full, ctx)):
            out.append(info(prefix + "relation", line))
    return out


def cmd_ro_verify(ws, args, rep: Report):
    names = [args.ro] if args.ro else list(ws.ros)
    if not names:
        raise UsageError("file has no ro block")
    ctx = ws.context()
    for n in names:
        if n not in ws.ros:
            raise UsageError(f"no ro block named {n!r}")
        prefix = f"{n}: " if len(names) > 1 else ""
        rep.extend(_ro_checks(ws.rospec(n), ctx, prefix))


def cmd_ro_derive(ws, args, rep: Report):
    d = ws.derives.get(args.derive) if args.derive else (next(iter(ws.derives.values())) if ws.derives else None)
    if args.derive and d is None:
        raise UsageError(f"no derive block named {args.derive!r}")
    route = args.route or (d.route if d else "annihilator")
    dirs = list(d.dirs) if d else []
    if args.dirs1:
        dirs[0:1] = [tuple(args.dirs1.split(","))]
    if args.dirs2:
        dirs[1:2] = [tuple(args.dirs2.split(","))]
    solve_dirs = tuple(args.solve_dirs.split(",")) if args.solve_dirs else (d.solve_dirs if d else None)
    template = args.template or (d.template if d else None)
    phi = None
    if route == "annihilator":
        text = args.phi or (d.phi[0] if d and d.phi else None)
        if text is None:
            raise UsageError("--phi is required")
        phi = _candidate(ws, text)
        if len(dirs) != 2:
            raise UsageError("two direction sets are needed (--dirs1, --dirs2)")
    for ds in dirs:
        for x in ds:
            if x not in ws.table.independents:
                raise UsageError(f"{x!r} is not an independent variable")
    ctx = ws.context()
    res = derive_ro_pipeline(ctx, ws.lax_pair(), phi, *(dirs + [None, None])[:2], solve_dirs=solve_dirs,
                             route=route, template=template)
    rep.extend(res.checks)
    rep.add(info("convention", res.convention))
    for name, op in zip(("A1", "A2", "B1", "B2"), (res.rospec.A1, res.rospec.A2, res.rospec.B1, res.rospec.B2)):
        rep.add(info(name, op.to_text()))
    rep.extend(res.report.checks)
    for line in relations_text(res.relations):
        rep.add(info("relation", line))
    from_block = d is not None and (args.phi is None or (d.phi and args.phi.replace(" ", "") == d.phi[0].replace(" ", "")))
    if from_block and d.expect and res.passed:
        for direction, text, _, _ in d.expect:
            want = _expr(ws, text, ("U", "V"))
            got = res.relations.get(direction)
            ok = got is not None and ctx.nf(got - want).is_zero()
            rep.add(check(f"expected V[{direction}]", ok, "missing" if got is None else ctx.nf(got - want).to_text()))


def cmd_ro_apply(ws, args, rep: Report):
    if not ws.ros:
        raise UsageError("file has no ro block")
    if args.ro and args.ro not in ws.ros:
        raise UsageError(f"no ro block named {args.ro!r}")
    if args.steps < 1:
        raise UsageError("--steps must be positive")
    spec = ws.rospec(args.ro)
    ctx = ws.context()
    rv = verify(spec, ctx)
    if not rv.passed:
        rep.extend(rv.checks)
        return
    spec = ROSpec(spec.A1, spec.A2, spec.B1, spec.B2, rv.L, rv.M, rv.p, rv.q, spec.mode, spec.name)
    seed = _candidate(ws, args.seed_expr)
    for step in range(1, args.steps + 1):
        pre = f"step {step}: " if args.steps > 1 else ""
        r = apply(spec, seed, ctx, check_seed=step == 1)
        rep.extend([Check(pre + c.name, c.status, c.residual, c.value) for c in r.checks])
        rep.add(info(pre + "local", r.local.to_text()))
        if r.remainder is not None:
            rep.add(info(pre + f"nonlocal {r.remainder.name}", r.remainder.text()))
        rep.add(info(pre + "result", r.result.to_text()))
        rep.add(info(pre + "gauge", r.gauge))
        ctx = Context(ctx.system, r.covering)
        seed = r.result


def cmd_symmetry(ws, args, rep: Report):
    e = _candidate(ws, args.candidate)
    mode = args.mode
    res = check_invariance([e], ws.context(), mode)
    rep.add(info("candidate", e.to_text()))
    rep.add(check(mode, res.passed, residual_text(res.residuals[0])))


# oracle ----------------------------------------------------------------------


def _ro_claims(ws, name, part, ctx):
    """``[(label, claim, expect_nonzero, symbolic_passed)]`` for one ro block."""
    sym = verify(ws.rospec(name), ctx)
    raw = ws.rospec(name, raw=True)
    A1, A2, B1, B2 = raw.A1, raw.A2, raw.B1, raw.B2
    adj = raw.mode == "adjoint"

    def comm_side(X1, Y2, X2, Y1):
        return lambda rc, g: [a - b for a, b in zip(O.chain(rc, [X1, Y2], g), O.chain(rc, [X2, Y1], g))]

    lF = lambda rc, g: O.linearization_apply(ctx, g, adj)  # noqa: E731
    AB = comm_side(A1, B2, A2, B1)
    BA = comm_side(B1, A2, B2, A1)
    out = []
    if part in (None, "i"):
        out.append(("i", O.commutator_claim(ctx, A1, A2, lambdas=False), False, sym.status("i") == PASS))
    pairs = {"ii": (AB, lF, sym.L), "iii": (lF, BA, sym.M)} if not adj else {"ii": (lF, BA, sym.L), "iii": (AB, lF, sym.M)}
    for k in ("ii", "iii"):
        if part in (None, k):
            lhs, K, Y = pairs[k]
            out.append((k, O.factor_claim(ctx, lhs, K, Y), False, sym.status(k) == PASS))
    if part in (None, "iv"):
        p, q = (raw.p, raw.q) if raw.p else (sym.p, sym.q)
        if p is None:
            out.append(("iv", lambda pt: [(0.0, 0.0)], True, False))
        else:
            det = _det(condition_iv_matrix(raw, p, q))
            out.append(("iv", lambda pt: [pt.eval(det)], True, sym.status("iv") == PASS))
    if part in (None, "pencil"):
        from .symbols import spectral
        from .expr import Expression
        lam = Expression.var(spectral())
        P = A1.left(lam) - B1
        Q = A2.left(lam) - B2
        symp = False
        if sym.passed:
            full = ROSpec(ws.rospec(name).A1, ws.rospec(name).A2, ws.rospec(name).B1, ws.rospec(name).B2,
                          sym.L, sym.M, sym.p, sym.q)
            symp = build_lax_from_ro(full, ctx).passed
        else:
            from .operators import commutator
            symp = commutator(ws.rospec(name).A1.left(lam) - ws.rospec(name).B1,
                              ws.rospec(name).A2.left(lam) - ws.rospec(name).B2, ctx).normal_form(ctx).is_zero()
        out.append(("pencil", O.commutator_claim(ctx, P, Q), False, symp))
    return out


def oracle_claims(ws, claim: str):
    """Resolve a claim name into ``[(label, claim_fn, ctx, expect_nonzero, symbolic)]``."""
    ctx = ws.context()
    free = Context.free(ws.system.independents)
    out = []
    names = [claim] if claim != "all" else _all_claims(ws)
    for c in names:
        kind, _, rest = c.partition(":")
        if kind == "lax" and not rest:
            ops = [ws.raw_operator(d.name) for d in ws.lax]
            if len(ops) != 2:
                raise UsageError("claim 'lax' needs two lax operators")
            sym = all(k.passed for k in check_lax(ws.lax_pair(), ws.context(False)))
            out.append((c, O.commutator_claim(ctx, *ops), ctx, False, sym))
        elif kind == "nonlocal" and rest in ws.covering.variables:
            v = ws.covering.variables[rest]
            dirs = [d for d in ws.system.independents if d in v.relations]
            exprs = [free.D(v.relations[j], i) - free.D(v.relations[i], j)
                     for a, i in enumerate(dirs) for j in dirs[a + 1:]]
            sym = compatibility_check(ws.covering.copy(), [rest]).passed
            out.append((c, O.expression_claim(ctx, exprs), ctx, False, sym))
        elif kind == "symmetry" and rest in ws.symmetries:
            e, mode, _ = ws.symmetries[rest]
            mode = "symmetry" if mode == "symmetry" else "cosymmetry"
            vals = O.linearization_apply(ctx, [e], mode == "cosymmetry")
            sym = check_invariance([e], ctx, mode).passed
            out.append((c, O.expression_claim(ctx, vals), ctx, False, sym))
        elif kind == "ro" and rest.split(":")[0] in ws.ros:
            name, _, part = rest.partition(":")
            if part and part not in ("i", "ii", "iii", "iv", "pencil"):
                raise UsageError(f"unknown ro condition {part!r}")
            for label, fn, nz, sym in _ro_claims(ws, name, part or None, ctx):
                out.append((f"ro:{name}:{label}", fn, ctx, nz, sym))
        elif "=" in c:
            parts = c.split("=")
            if len(parts) != 2:
                raise UsageError("expression claims need exactly one '='")
            lhs, rhs = (_expr(ws, p.strip() or "0") for p in parts)
            e = lhs - rhs
            sym = ctx.nf(e).is_zero()
            out.append((c, O.expression_claim(ctx, [e]), ctx, False, sym))
        else:
            raise UsageError(f"unknown claim {c!r}; try: {', '.join(_all_claims(ws))}")
    return out


def _all_claims(ws) -> list[str]:
    out = []
    if len(ws.lax) == 2:
        out.append("lax")
    out += [f"nonlocal:{n}" for n in ws.covering.variables]
    out += [f"symmetry:{n}" for n in ws.symmetries]
    out += [f"ro:{n}" for n in ws.ros]
    return out


def cmd_oracle(ws, args, rep: Report):
    seed = _seed(args)
    rep.seed = seed
    for label, fn, ctx, nz, sym in oracle_claims(ws, args.claim):
        res = O.oracle_verify(fn, ctx, trials=args.trials, tol=args.tol, seed=seed, expect_nonzero=nz)
        what = "nonzero" if nz else "residual"
        rep.add(check(label, res.passed, f"max |{what}| = {res.max_residual:.3g} (relative {res.max_ratio:.3g})",
                      value=f"max relative {what} {res.max_ratio:.3g} over {res.points} points; symbolic {'pass' if sym else 'fail'}"))


# entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    p = argparse.ArgumentParser(prog="jetop", description="Jet-space operator calculus for Lax pairs and recursion operators.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(parser, name, fn, help_):
        q = parser.add_parser(name, parents=[common], help=help_)
        q.add_argument("file")
        q.set_defaults(fn=fn)
        return q

    add(sub, "validate", cmd_validate, "parse a file and check its coverings")
    lax = sub.add_parser("lax", help="Lax pair commands").add_subparsers(dest="sub", required=True)
    add(lax, "check", cmd_lax_check, "check that the Lax operators commute")
    add(lax, "reduce", cmd_lax_reduce, "lower the lambda-degree of the Lax pair")
    ro = sub.add_parser("ro", help="recursion operator commands").add_subparsers(dest="sub", required=True)
    q = add(ro, "verify", cmd_ro_verify, "check conditions i-iv")
    q.add_argument("--ro", help="ro block name")
    q = add(ro, "derive", cmd_ro_derive, "derive an operator from a nonlocal symmetry")
    q.add_argument("--phi")
    q.add_argument("--derive", help="derive block supplying defaults")
    q.add_argument("--dirs1", help="comma-separated directions")
    q.add_argument("--dirs2")
    q.add_argument("--solve-dirs", dest="solve_dirs")
    q.add_argument("--route", choices=("annihilator", "ad"))
    q.add_argument("--template")
    q = add(ro, "apply", cmd_ro_apply, "apply the operator to a seed symmetry")
    q.add_argument("--seed", dest="seed_expr", required=True)
    q.add_argument("--steps", type=int, default=1)
    q.add_argument("--ro")
    sym = sub.add_parser("symmetry", help="symmetry commands").add_subparsers(dest="sub", required=True)
    q = add(sym, "check", cmd_symmetry, "check the linearized equation")
    q.add_argument("--candidate", required=True)
    q.add_argument("--mode", choices=("symmetry", "cosymmetry"), default="symmetry")
    q = add(sub, "oracle", cmd_oracle, "numeric cross-check of a claim")
    q.add_argument("--claim", default="all")
    q.add_argument("--trials", type=int, default=20)
    q.add_argument("--tol", type=float, default=1e-9)
    q.add_argument("--seed", type=int)
    return p


def run_command(argv) -> tuple[Report | None, int]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return None, int(exc.code or 0)
    name = " ".join(x for x in (args.command, getattr(args, "sub", None)) if x)
    rep = Report(name, args.file)
    t0 = time.perf_counter()
    code = 0
    try:
        ws = load(args.file)
        args.fn(ws, args, rep)
        code = 0 if rep.passed else 1
    except ParseError as exc:
        rep.add(Check("input", FAIL, str(exc)))
        code = 2
    except (FileNotFoundError, UsageError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        if isinstance(exc, FileNotFoundError):
            msg = f"no such file: {exc}"
        rep.add(Check("input", FAIL, str(msg)))
        code = 2
    except PipelineError as exc:
        rep.add(Check(f"stage {exc.stage}", FAIL, str(exc)))
        code = 1
    except (ROError, LaxError, CoveringError, O.OracleError) as exc:
        rep.add(Check("error", FAIL, str(exc)))
        code = 1
    rep.elapsed_ms = (time.perf_counter() - t0) * 1000
    if rep.seed is None and args.command == "oracle":
        try:
            rep.seed = _seed(args)
        except UsageError:
            pass
    rep.json = args.json
    return rep, code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    rep, code = run_command(argv)
    if rep is None:
        return code
    out = rep.to_json() if rep.json else rep.to_text()
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
