"""Command-line front end: script checking, category operations, limits,
subobjects, semantics, and the selftest corpus."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .category import (
    SynObject,
    Theory,
    Verdict,
    compose,
    morphism_equal,
    negated_variables,
    verify_premorphism,
)
from .formulas import (
    Formula,
    FormulaError,
    Signature,
    parse_formula,
    parse_signature,
    render,
)
from .kernel import CheckFailure, Sequent, check_derivation
from .limits import factorize, fiber_product, is_effective_epi
from .scripts import ScriptError, parse_script, render_script, run_script
from .semantics import (
    SemanticsError,
    enumerate_structures,
    eval_set,
    parse_structure,
    sequent_holds,
)
from .subobjects import pullback_hom, sub_join, sub_leq, sub_meet, sub_complement, sub_of
from .tactics import Builder

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_PARSE_ERROR = 2
EXIT_IO_ERROR = 3

REPORT_SCHEMA = "syncat-report/1"


def _load_sig(args) -> Signature:
    if args.sig:
        return parse_signature(Path(args.sig).read_text())
    return Signature.of(P=1, Q=2)


def _load_theory(args, sig: Signature) -> Theory:
    if args.theory:
        axioms = set()
        for raw in Path(args.theory).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                axioms.add(parse_formula(line, sig))
        return Theory(Path(args.theory).stem, sig, frozenset(axioms))
    return Theory("empty", sig, frozenset())


def _emit(args, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"schema": REPORT_SCHEMA, **payload}, sort_keys=True))
    else:
        print(human)


def cmd_check(args) -> int:
    sig = _load_sig(args)
    try:
        text = Path(args.script).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO_ERROR
    try:
        lines = parse_script(text, sig)
        conclusion, derivation = run_script(lines)
    except ScriptError as e:
        _emit(args, {"verdict": "rejected", "reason": str(e)}, f"REJECTED: {e}")
        return EXIT_CHECK_FAILED
    except FormulaError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    if args.emit_basic:
        print(render_script(derivation), end="")
        return EXIT_OK
    hyps = ", ".join(sorted(render(h) for h in conclusion.lhs))
    _emit(
        args,
        {
            "verdict": "accepted",
            "conclusion": {"lhs": sorted(render(h) for h in conclusion.lhs), "rhs": render(conclusion.rhs)},
            "lines": len(derivation.lines),
        },
        f"ACCEPTED ({len(derivation.lines)} basic lines): {hyps} ; {render(conclusion.rhs)}",
    )
    return EXIT_OK


def _load_morphism(path: str, theory: Theory):
    data = json.loads(Path(path).read_text())
    sig = theory.sig
    src = SynObject(parse_formula(data["source"], sig))
    tgt = SynObject(parse_formula(data["target"], sig))
    payload = parse_formula(data["payload"], sig) if data.get("payload") else None
    certs = {}
    for name, script_path in data.get("certs", {}).items():
        base = Path(path).parent / script_path
        lines = parse_script(base.read_text(), sig)
        _, derivation = run_script(lines)
        certs[name] = derivation
    return verify_premorphism(theory, src, tgt, payload, certs)


def cmd_cat(args) -> int:
    sig = _load_sig(args)
    theory = _load_theory(args, sig)
    try:
        if args.cat_op == "verify":
            pm = _load_morphism(args.morphism, theory)
            _emit(args, {"verdict": "verified", "type": pm.ptype}, f"VERIFIED type {pm.ptype}")
            return EXIT_OK
        if args.cat_op == "compose":
            g = _load_morphism(args.outer, theory)
            f = _load_morphism(args.inner, theory)
            comp = compose(g, f)
            payload = render(comp.payload) if comp.payload is not None else None
            _emit(
                args,
                {"verdict": "verified", "type": comp.ptype, "payload": payload},
                f"COMPOSED type {comp.ptype}: {payload or '(formal)'}",
            )
            return EXIT_OK
        if args.cat_op == "eq":
            a = _load_morphism(args.left, theory)
            b = _load_morphism(args.right, theory)
            res = morphism_equal(a, b, oracle_size=args.oracle_size)
            _emit(args, {"verdict": res.verdict.value}, res.verdict.value.upper())
            return EXIT_OK if res.verdict == Verdict.EQUAL else EXIT_CHECK_FAILED
        if args.cat_op == "iso":
            pm = _load_morphism(args.morphism, theory)
            tilde_payload = negated_variables(pm)
            _emit(
                args,
                {"negated_variables": render(tilde_payload)},
                f"candidate inverse payload: {render(tilde_payload)}",
            )
            return EXIT_OK
    except Exception as e:
        _emit(args, {"verdict": "rejected", "reason": str(e)}, f"REJECTED: {e}")
        return EXIT_CHECK_FAILED
    return EXIT_PARSE_ERROR


def cmd_lim(args) -> int:
    sig = _load_sig(args)
    theory = _load_theory(args, sig)
    try:
        if args.lim_op == "pullback":
            ta = _load_morphism(args.left, theory)
            tb = _load_morphism(args.right, theory)
            sq = fiber_product(ta, tb)
            sq.verify()
            _emit(
                args,
                {"case": sq.case, "apex": render(sq.apex.formula)},
                f"case {sq.case} apex: {render(sq.apex.formula)}",
            )
            return EXIT_OK
        pm = _load_morphism(args.morphism, theory)
        if args.lim_op == "image":
            from .limits import image_object

            img = image_object(pm)
            _emit(args, {"image": render(img.formula)}, f"image: {render(img.formula)}")
            return EXIT_OK
        if args.lim_op == "factor":
            fac = factorize(pm)
            fac.epi.verify()
            fac.mono.verify()
            _emit(
                args,
                {"image": render(fac.image.formula), "certified": True},
                f"factored through {render(fac.image.formula)}",
            )
            return EXIT_OK
        if args.lim_op == "ee":
            res = is_effective_epi(pm, oracle_size=args.oracle_size)
            _emit(args, {"verdict": res.verdict.value}, res.verdict.value.upper())
            return EXIT_OK if res.verdict == Verdict.EQUAL else EXIT_CHECK_FAILED
    except Exception as e:
        _emit(args, {"verdict": "rejected", "reason": str(e)}, f"REJECTED: {e}")
        return EXIT_CHECK_FAILED
    return EXIT_PARSE_ERROR


def _load_sub(path: str, theory: Theory):
    data = json.loads(Path(path).read_text())
    sig = theory.sig
    ambient = SynObject(parse_formula(data["ambient"], sig))
    rep = parse_formula(data["rep"], sig)
    lines = parse_script((Path(path).parent / data["inclusion"]).read_text(), sig)
    _, derivation = run_script(lines)
    return sub_of(theory, ambient, rep, derivation)


def cmd_sub(args) -> int:
    sig = _load_sig(args)
    theory = _load_theory(args, sig)
    try:
        if args.sub_op in ("join", "meet"):
            a = _load_sub(args.left, theory)
            b = _load_sub(args.right, theory)
            out = sub_join(a, b) if args.sub_op == "join" else sub_meet(a, b)
            _emit(args, {"rep": render(out.rep)}, f"{args.sub_op}: {render(out.rep)}")
            return EXIT_OK
        if args.sub_op == "neg":
            a = _load_sub(args.left, theory)
            out = sub_complement(a)
            _emit(args, {"rep": render(out.rep)}, f"complement: {render(out.rep)}")
            return EXIT_OK
        if args.sub_op == "leq":
            a = _load_sub(args.left, theory)
            b = _load_sub(args.right, theory)
            res = sub_leq(a, b, oracle_size=args.oracle_size)
            _emit(args, {"verdict": res.verdict.value}, res.verdict.value.upper())
            return EXIT_OK if res.verdict == Verdict.EQUAL else EXIT_CHECK_FAILED
        if args.sub_op == "pullback":
            f = _load_morphism(args.morphism, theory)
            s = _load_sub(args.left, theory)
            out = pullback_hom(f, s)
            _emit(args, {"rep": render(out.rep)}, f"preimage: {render(out.rep)}")
            return EXIT_OK
    except Exception as e:
        _emit(args, {"verdict": "rejected", "reason": str(e)}, f"REJECTED: {e}")
        return EXIT_CHECK_FAILED
    return EXIT_PARSE_ERROR


def cmd_sem(args) -> int:
    sig = _load_sig(args)
    theory = _load_theory(args, sig)
    try:
        if args.sem_op == "eval":
            m = parse_structure(Path(args.structure).read_text(), sig)
            f = parse_formula(args.formula, sig)
            ds = eval_set(m, f)
            rows = sorted(ds.rows)
            _emit(
                args,
                {"vars": list(ds.vars), "rows": [list(r) for r in rows]},
                f"vars {list(ds.vars)}: {rows}",
            )
            return EXIT_OK
        if args.sem_op == "holds":
            m = parse_structure(Path(args.structure).read_text(), sig)
            hyps = [parse_formula(t, sig) for t in args.hyp]
            rhs = parse_formula(args.formula, sig)
            ok = sequent_holds(m, Sequent.of(hyps, rhs))
            _emit(args, {"holds": ok}, "HOLDS" if ok else "FAILS")
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        if args.sem_op == "sweep":
            from .soundness import soundness_sweep

            report = soundness_sweep(
                sig, max_size=args.oracle_size, per_rule=args.per_rule, seed=args.seed
            )
            _emit(
                args,
                {"instances": report.instances, "violations": report.violations, "per_rule": report.per_rule},
                f"{report.instances} instances, {report.violations} violations",
            )
            return EXIT_OK if report.violations == 0 else EXIT_CHECK_FAILED
        if args.sem_op == "star-prime":
            from .functor import EvalFunctor, check_star_prime

            m = parse_structure(Path(args.structure).read_text(), sig)
            F = EvalFunctor(theory, m)
            f = parse_formula(args.formula, sig)
            ok, counts = check_star_prime(F, f)
            _emit(args, {"ok": ok, "cases": counts}, f"{'OK' if ok else 'FAIL'} cases={counts}")
            return EXIT_OK if ok else EXIT_CHECK_FAILED
        if args.sem_op == "reconstruct":
            from .functor import EvalFunctor, reconstruct_model
            from .semantics import render_structure

            m = parse_structure(Path(args.structure).read_text(), sig)
            F = EvalFunctor(theory, m)
            back = reconstruct_model(F)
            ok = back == m
            _emit(args, {"roundtrip": ok}, render_structure(back) + ("ROUNDTRIP OK" if ok else "MISMATCH"))
            return EXIT_OK if ok else EXIT_CHECK_FAILED
    except (SemanticsError, FormulaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE_ERROR
    return EXIT_PARSE_ERROR


def cmd_selftest(args) -> int:
    from .corpus import run_corpus

    summary = run_corpus(mutate=args.mutate)
    payload = {
        "total": summary.total,
        "passed": summary.passed,
        "by_chapter": {k: list(v) for k, v in summary.by_chapter.items()},
        "failures": [list(f) for f in summary.failures],
    }
    lines = [f"corpus: {summary.passed}/{summary.total} passed"]
    for ch, (p, t) in summary.by_chapter.items():
        lines.append(f"  {ch}: {p}/{t}")
    for ch, name, reason in summary.failures:
        lines.append(f"  FAIL [{ch}] {name}: {reason}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if summary.ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="syncat")
    parser.add_argument("--theory", help="theory file: one axiom sentence per line")
    parser.add_argument("--sig", help="signature file: pred NAME ARITY lines")
    parser.add_argument("--oracle-size", type=int, default=3, help="finite-model bound")
    parser.add_argument("--json", action="store_true", help="machine-readable reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="check a derivation script")
    p_check.add_argument("script")
    p_check.add_argument("--emit-basic", action="store_true", help="print the expanded basic-rule script")
    p_check.set_defaults(func=cmd_check)

    p_cat = sub.add_parser("cat", help="category operations")
    cat_sub = p_cat.add_subparsers(dest="cat_op", required=True)
    c_verify = cat_sub.add_parser("verify")
    c_verify.add_argument("morphism")
    c_comp = cat_sub.add_parser("compose")
    c_comp.add_argument("outer")
    c_comp.add_argument("inner")
    c_eq = cat_sub.add_parser("eq")
    c_eq.add_argument("left")
    c_eq.add_argument("right")
    c_iso = cat_sub.add_parser("iso")
    c_iso.add_argument("morphism")
    p_cat.set_defaults(func=cmd_cat)

    p_lim = sub.add_parser("lim", help="limits and factorization")
    lim_sub = p_lim.add_subparsers(dest="lim_op", required=True)
    l_pb = lim_sub.add_parser("pullback")
    l_pb.add_argument("left")
    l_pb.add_argument("right")
    for name in ("image", "factor", "ee"):
        l = lim_sub.add_parser(name)
        l.add_argument("morphism")
    p_lim.set_defaults(func=cmd_lim)

    p_sub = sub.add_parser("sub", help="subobject lattice")
    sub_sub = p_sub.add_subparsers(dest="sub_op", required=True)
    for name in ("join", "meet", "leq"):
        s = sub_sub.add_parser(name)
        s.add_argument("left")
        s.add_argument("right")
    s_neg = sub_sub.add_parser("neg")
    s_neg.add_argument("left")
    s_pb = sub_sub.add_parser("pullback")
    s_pb.add_argument("morphism")
    s_pb.add_argument("left")
    p_sub.set_defaults(func=cmd_sub)

    p_sem = sub.add_parser("sem", help="finite-model semantics")
    sem_sub = p_sem.add_subparsers(dest="sem_op", required=True)
    s_eval = sem_sub.add_parser("eval")
    s_eval.add_argument("structure")
    s_eval.add_argument("formula")
    s_holds = sem_sub.add_parser("holds")
    s_holds.add_argument("structure")
    s_holds.add_argument("formula")
    s_holds.add_argument("--hyp", action="append", default=[])
    s_sweep = sem_sub.add_parser("sweep")
    s_sweep.add_argument("--per-rule", type=int, default=50)
    s_sweep.add_argument("--seed", type=int, default=0)
    s_star = sem_sub.add_parser("star-prime")
    s_star.add_argument("structure")
    s_star.add_argument("formula")
    s_rec = sem_sub.add_parser("reconstruct")
    s_rec.add_argument("structure")
    p_sem.set_defaults(func=cmd_sem)

    p_self = sub.add_parser("selftest", help="run the construction corpus")
    p_self.add_argument("--mutate", help="sabotage one named corpus item")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
