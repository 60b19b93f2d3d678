"""Evaluation functor, the induction checker, and model reconstruction."""

import itertools

import pytest

from syncat.category import SynObject, compose, identity_of, mk_special, to_validity
from syncat.formulas import (
    Signature,
    and_,
    close,
    exists_many,
    nonempty,
    parse_formula,
)
from syncat.functor import (
    EvalFunctor,
    FunctorError,
    check_star_prime,
    compose_functions,
    definable_function,
    is_set_pullback,
    is_surjection,
    last_lemma_square_commutes,
    reconstruct_model,
)
from syncat.limits import factorize, fiber_product
from syncat.semantics import Structure, enumerate_structures, eval_set, is_model, models_of

from tests.test_category import LINE, P_OBJ, PLANE, THEORY, type3_point

SIG = Signature.of(P=1, Q=2)


def p(text):
    return parse_formula(text, SIG)


MODEL = Structure.of(SIG, 2, P=[(0,)], Q=[(0, 1)])


def test_model_satisfies_theory():
    assert is_model(MODEL, THEORY.axioms)
    F = EvalFunctor(THEORY, MODEL)
    assert F.on_object(LINE).rows == {(0,), (1,)}


def test_functor_rejects_nonmodel():
    bad = Structure.of(SIG, 2)  # empty P fails the existence axiom
    with pytest.raises(FunctorError, match="axiom"):
        EvalFunctor(THEORY, bad)


def test_identity_goes_to_identity():
    F = EvalFunctor(THEORY, MODEL)
    ident = identity_of(THEORY, LINE)
    fun = F.on_morphism(ident)
    assert fun == {(0,): (0,), (1,): (1,)}


def test_composition_goes_to_composition():
    F = EvalFunctor(THEORY, MODEL)
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident = identity_of(THEORY, LINE)
    comp = compose(ident, mono)
    assert F.on_morphism(comp) == compose_functions(
        F.on_morphism(ident), F.on_morphism(mono)
    )


def test_pullback_square_goes_to_set_pullback():
    F = EvalFunctor(THEORY, MODEL)
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident = identity_of(THEORY, LINE)
    sq = fiber_product(mono, ident)
    apex_rows = F.on_object(sq.apex).rows
    assert is_set_pullback(
        apex_rows,
        F.on_morphism(sq.pi_alpha),
        F.on_morphism(sq.pi_beta),
        F.on_morphism(sq.theta_alpha),
        F.on_morphism(sq.theta_beta),
    )


def test_effective_epi_goes_to_surjection():
    F = EvalFunctor(THEORY, MODEL)
    t2 = to_validity(THEORY, P_OBJ)
    fac = factorize(t2)
    fun = F.on_morphism(fac.epi)
    assert is_surjection(fun, F.on_object(fac.image).rows)


def test_joins_and_meets_go_to_unions_and_intersections():
    F = EvalFunctor(THEORY, MODEL)
    a, b = p("(pred P x1)"), p("(not (pred P x1))")
    assert F.on_object(SynObject(p("(or (pred P x1) (not (pred P x1)))"))).rows == (
        F.on_object(SynObject(a)).rows | F.on_object(SynObject(b)).rows
    )
    assert F.on_object(SynObject(and_(a, p("(= x1 x1)")))).rows == (
        F.on_object(SynObject(a)).rows & F.on_object(SynObject(p("(= x1 x1)"))).rows
    )


def test_last_lemma_square():
    F = EvalFunctor(THEORY, MODEL)
    assert last_lemma_square_commutes(F, [1], [1, 2], {1: 2})
    assert last_lemma_square_commutes(F, [1, 2], [3], {1: 3, 2: 3})


def test_star_prime_atomics_and_cases():
    F = EvalFunctor(THEORY, MODEL)
    samples = [
        p("(= x1 x1)"),
        p("(= x1 x2)"),
        p("(pred P x1)"),
        p("(pred Q x2 x1)"),  # non-canonical argument order
        p("(or (pred P x1) (= x1 x2))"),
        p("(not (pred P x1))"),
        p("(exists x2 (pred Q x1 x2))"),
        p("(exists x1 (pred P x1))"),
        p("(exists x9 (pred P x1))"),
        p("(or (exists x0 (pred P x0)) (pred P x1))"),
        p("(or (exists x0 (pred P x0)) (forall x0 (pred P x0)))"),
    ]
    for f in samples:
        ok, counts = check_star_prime(F, f)
        assert ok, f
    # exercise every inductive case at least once across the samples
    all_counts: dict = {}
    checker_counts = []
    for f in samples:
        _, counts = check_star_prime(F, f)
        for k, v in counts.items():
            all_counts[k] = all_counts.get(k, 0) + v
    for case in (
        "case-1-join-nonsentences",
        "case-2-join-mixed",
        "case-3-join-sentences",
        "case-4-complement",
        "case-5-projection",
        "case-6-last-variable",
        "case-7-vacuous",
    ):
        assert all_counts.get(case, 0) >= 1, case


def test_star_prime_axiom_evaluates_to_u():
    F = EvalFunctor(THEORY, MODEL)
    for ax in THEORY.axioms:
        assert F.on_object(SynObject(ax)).rows == {()}
        ok, _ = check_star_prime(F, ax)
        assert ok


def test_reconstruct_model_roundtrip():
    for m in models_of(SIG, THEORY.axioms, 2):
        if m.size == 0:
            continue
        F = EvalFunctor(THEORY, m)
        assert reconstruct_model(F) == m


def test_reconstruct_with_zero_ary():
    sig0 = Signature.of(P=1, R=0)
    th = __import__("syncat.category", fromlist=["Theory"]).Theory(
        "zero", sig0, frozenset({parse_formula("(exists x0 (pred P x0))", sig0)})
    )
    for r_val in (set(), {()}):
        m = Structure.of(sig0, 1, P=[(0,)], R=r_val)
        F = EvalFunctor(th, m)
        assert reconstruct_model(F) == m


def test_empty_model_claim():
    # a theory with an empty model: F(x0=x0) empty forces F(not E) empty
    sig = Signature.of(P=1)
    th = __import__("syncat.category", fromlist=["Theory"]).Theory(
        "maybe-empty", sig, frozenset()
    )
    empty = Structure.of(sig, 0)
    F = EvalFunctor(th, empty)
    from syncat.formulas import nonempty

    assert F.on_object(SynObject(p2(sig, "(= x1 x1)"))).rows == frozenset()
    assert F.on_object(SynObject(nonempty())).rows == frozenset()


def p2(sig, text):
    return parse_formula(text, sig)
