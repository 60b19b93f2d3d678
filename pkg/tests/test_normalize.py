import pytest
from hypothesis import given, settings, strategies as st

from syncat.formulas import (
    Eq,
    FV,
    Signature,
    and_,
    big_and,
    close,
    exists_many,
    nonempty,
    parse_formula,
    render,
)
from syncat.kernel import check_derivation
from syncat.semantics import Structure, enumerate_structures, eval_set, sequent_holds
from syncat.kernel import Sequent
from syncat.normalize import normalize, subsume_cert

SIG = Signature.of(P=1, Q=2)
NOT_E = nonempty()


def p(text):
    return parse_formula(text, SIG)


def check_cert(cert):
    fa = check_derivation(cert.fwd)
    assert fa.rhs == cert.b and fa.lhs <= frozenset({NOT_E, cert.a})
    ba = check_derivation(cert.bwd)
    assert ba.rhs == cert.a and ba.lhs <= frozenset({NOT_E, cert.b})


def semantically_equivalent(a, b, size=2):
    """Both sides agree in every structure of size <= `size` given not E."""
    for m in enumerate_structures(SIG, size):
        if m.size == 0:
            continue
        fa = sequent_holds(m, Sequent.of([a], b)) and sequent_holds(m, Sequent.of([b], a))
        if not fa:
            return False
    return True


def test_already_normal_identity_cert():
    f = p("(pred Q x-1 x1)")
    normal, cert = normalize(f)
    assert normal == f
    check_cert(cert)


def test_vacuous_equation_clause_collapse():
    # exists T (theta(x-1, T) and T = x-2 and rho(T)) collapses by substitution
    theta = p("(pred Q x-1 x5)")
    rho = p("(pred P x5)")
    f = exists_many([5], big_and([theta, p("(= x5 x-2)"), rho]))
    normal, cert = normalize(f)
    assert normal == normalize(and_(p("(pred P x-2)"), p("(pred Q x-1 x-2)")))[0]
    check_cert(cert)
    assert semantically_equivalent(f, normal)


def test_pull_exists_through_conjunction():
    f = and_(p("(pred P x1)"), exists_many([7], p("(pred Q x1 x7)")))
    normal, cert = normalize(f)
    g = exists_many([9], and_(p("(pred P x1)"), p("(pred Q x1 x9)")))
    assert normal == normalize(g)[0]
    check_cert(cert)
    assert semantically_equivalent(f, normal)


def test_reflexive_and_duplicate_conjuncts_dropped():
    f = big_and([p("(= x1 x1)"), p("(pred P x1)"), p("(pred P x1)"), p("(= x2 x2)")])
    normal, cert = normalize(f)
    assert normal == p("(pred P x1)")
    check_cert(cert)


def test_pure_reflexive_keeps_one():
    f = big_and([p("(= x1 x1)"), p("(= x2 x2)")])
    normal, cert = normalize(f)
    assert normal in (p("(= x1 x1)"), p("(= x2 x2)"))
    check_cert(cert)


def test_unused_binder_dropped():
    f = exists_many([5], p("(pred P x1)"))
    normal, cert = normalize(f)
    assert normal == p("(pred P x1)")
    check_cert(cert)


def test_fully_vacuous_existential():
    # exists T (T = T) has nothing left; the kept conjunct pins the witness
    f = exists_many([5], p("(= x5 x5)"))
    normal, cert = normalize(f)
    check_cert(cert)
    assert semantically_equivalent(f, normal)


def test_normalize_idempotent():
    cases = [
        exists_many([5], big_and([p("(pred Q x-1 x5)"), p("(= x5 x-2)"), p("(pred P x5)")])),
        and_(p("(pred P x1)"), exists_many([7], p("(pred Q x1 x7)"))),
        exists_many([3, 4], and_(p("(pred Q x3 x4)"), p("(pred P x3)"))),
    ]
    for f in cases:
        n1, _ = normalize(f)
        n2, _ = normalize(n1)
        assert n1 == n2


def test_bound_prefix_sorted_by_first_use():
    # both association orders of the same conjunct set normalize identically
    t1, t2 = p("(pred Q x-1 x8)"), p("(pred Q x8 x9)")
    t3 = p("(pred Q x9 x1)")
    fa = exists_many([9], and_(exists_many([8], and_(t1, t2)), t3))
    fb = exists_many([8], and_(t1, exists_many([9], and_(t2, t3))))
    na, ca = normalize(fa)
    nb, cb = normalize(fb)
    assert na == nb
    check_cert(ca)
    check_cert(cb)
    assert semantically_equivalent(fa, fb)


def test_subsumption_drops_witnessed_block():
    # exists M (theta(x-1, x1) and theta(M, x1)) reduces to theta(x-1, x1)
    f = exists_many([6], and_(p("(pred Q x-1 x1)"), p("(pred Q x6 x1)")))
    reduced, cert = subsume_cert(f)
    assert reduced == p("(pred Q x-1 x1)")
    check_cert(cert)
    assert semantically_equivalent(f, reduced)


def test_subsumption_keeps_needed_block():
    f = exists_many([6], and_(p("(pred P x6)"), p("(pred Q x-1 x1)")))
    reduced, cert = subsume_cert(f)
    assert reduced == f
    check_cert(cert)


ATOM_TEXTS = ["(pred P x1)", "(pred Q x1 x2)", "(= x1 x2)", "(pred Q x2 x-1)", "(= x2 x2)"]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(ATOM_TEXTS), min_size=1, max_size=4), st.data())
def test_normalize_random_fragment(texts, data):
    conj = [p(t) for t in texts]
    bound = data.draw(st.sets(st.sampled_from([1, 2]), max_size=2))
    f = exists_many(sorted(bound), big_and(conj))
    normal, cert = normalize(f)
    check_cert(cert)
    n2, _ = normalize(normal)
    assert n2 == normal
    assert semantically_equivalent(f, normal)
