import itertools

import pytest
from hypothesis import given, settings, strategies as st

from syncat.formulas import (
    Eq,
    FV,
    Signature,
    close,
    emptiness,
    exists_many,
    forall,
    nonempty,
    parse_formula,
)
from syncat.kernel import Sequent
from syncat.semantics import (
    DefinableSet,
    SemanticsError,
    Structure,
    enumerate_structures,
    eval_flat,
    eval_set,
    is_model,
    models_of,
    parse_structure,
    render_structure,
    sequent_holds,
    structure_holds,
)

SIG = Signature.of(P=1, Q=2)


def p(text):
    return parse_formula(text, SIG)


def test_eval_refl_equality_is_full_line():
    m = Structure.of(SIG, 3)
    ds = eval_set(m, p("(= x1 x1)"))
    assert ds == DefinableSet((1,), frozenset({(0,), (1,), (2,)}))


def test_eval_equality_diagonal():
    m = Structure.of(SIG, 2)
    ds = eval_set(m, p("(= x1 x2)"))
    assert ds.vars == (1, 2)
    assert ds.rows == {(0, 0), (1, 1)}


def test_eval_negation_example():
    m = Structure.of(SIG, 2, P=[(0,)])
    ds = eval_set(m, p("(not (pred P x1))"))
    assert ds.rows == {(1,)}


def test_eval_or_with_padding():
    m = Structure.of(SIG, 2, P=[(0,)])
    ds = eval_set(m, p("(or (pred P x1) (= x2 x2))"))
    assert ds.vars == (1, 2)
    assert ds.rows == frozenset(itertools.product(range(2), repeat=2))


def test_eval_exists_projection():
    m = Structure.of(SIG, 2, Q=[(0, 1)])
    ds = eval_set(m, p("(exists x2 (pred Q x1 x2))"))
    assert ds.vars == (1,)
    assert ds.rows == {(0,)}


def test_eval_vacuous_exists():
    m = Structure.of(SIG, 2, P=[(1,)])
    assert eval_set(m, p("(exists x9 (pred P x1))")) == eval_set(m, p("(pred P x1)"))


def test_sentences_evaluate_to_u_or_empty():
    m = Structure.of(SIG, 2, P=[(0,)])
    assert eval_set(m, p("(exists x0 (pred P x0))")).rows == {()}
    assert eval_set(m, p("(forall x0 (pred P x0))")).rows == frozenset()


def test_empty_structure_satisfies_e():
    empty = Structure.of(SIG, 0)
    assert structure_holds(empty, emptiness())
    assert not structure_holds(empty, nonempty())
    # universals hold, existentials fail, over the empty carrier
    assert structure_holds(empty, forall(0, p("(pred P x0)")))
    assert not structure_holds(empty, exists_many([0], p("(= x0 x0)")))


def test_sequent_vacuous_over_empty_carrier():
    empty = Structure.of(SIG, 0)
    s = Sequent.of([p("(pred P x1)")], p("(pred P x2)"))
    assert sequent_holds(empty, s)


def test_forall_semantics_from_remark():
    # "E => forall X phi" read semantically: holds in every structure
    for m in enumerate_structures(SIG, 2):
        s = Sequent.of([emptiness()], forall(3, p("(pred P x3)")))
        assert sequent_holds(m, s)


def test_structure_counts():
    sig1 = Signature.of(P=1)
    assert sum(1 for m in enumerate_structures(sig1, 1) if m.size == 1) == 2
    sig0 = Signature.of(R=0)
    assert sum(1 for m in enumerate_structures(sig0, 0)) == 2
    sig2 = Signature.of(Q=2)
    assert sum(1 for m in enumerate_structures(sig2, 2) if m.size == 2) == 2 ** 4


def test_bound_enforced():
    with pytest.raises(SemanticsError, match="bound"):
        list(enumerate_structures(SIG, 9))


def test_models_of_filters():
    axioms = [exists_many([0], p("(pred P x0)"))]
    ms = models_of(Signature.of(P=1), axioms, 1)
    assert all(is_model(m, axioms) for m in ms)
    assert all(m.size == 1 and m.table("P") for m in ms)


def test_structure_file_roundtrip():
    m = Structure.of(SIG, 2, P=[(0,)], Q=[(0, 1), (1, 1)])
    text = render_structure(m)
    assert parse_structure(text, SIG) == m
    zero = Structure.of(Signature.of(R=0), 0, R=[()])
    assert parse_structure(render_structure(zero), Signature.of(R=0)) == zero


# clause-equivalence: structured eval agrees with the flat oracle

ATOMS = ["(pred P x1)", "(pred P x2)", "(= x1 x2)", "(= x1 x1)", "(pred Q x1 x2)"]


def formula_strategy():
    base = st.sampled_from(ATOMS).map(p)

    def extend(children):
        return st.one_of(
            children.map(lambda f: parse_formula(f"(not {_r(f)})", SIG)),
            st.tuples(children, children).map(
                lambda ab: parse_formula(f"(or {_r(ab[0])} {_r(ab[1])})", SIG)
            ),
            st.tuples(st.sampled_from([1, 2, 3]), children).map(lambda vf: close(vf[1], vf[0])),
        )

    return st.recursive(base, extend, max_leaves=8)


def _r(f):
    from syncat.formulas import render

    return render(f)


@settings(max_examples=300, deadline=None)
@given(formula_strategy(), st.integers(0, 3), st.randoms())
def test_clause_eval_matches_flat_oracle(f, size, rnd):
    tables = {
        "P": [(i,) for i in range(size) if rnd.random() < 0.5],
        "Q": [(i, j) for i in range(size) for j in range(size) if rnd.random() < 0.5],
    }
    m = Structure.of(SIG, size, **tables)
    assert eval_set(m, f) == eval_flat(m, f)
