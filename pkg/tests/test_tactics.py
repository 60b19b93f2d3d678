import pytest
from hypothesis import given, settings, strategies as st

from syncat.formulas import (
    Eq,
    FV,
    Not,
    Or,
    Signature,
    and_,
    big_and,
    close,
    emptiness,
    exists_many,
    forall,
    forall_many,
    imp,
    nonempty,
    parse_formula,
    subst_simul,
)
from syncat.kernel import Sequent, check_derivation
from syncat.tactics import (
    Builder,
    EquivCert,
    TacticError,
    cert_compose,
    cert_congruence,
    cert_refl,
    insex_cert,
    prop_taut,
    reord_cert,
)

SIG = Signature.of(P=1, Q=2)
NOT_E = nonempty()


def p(text):
    return parse_formula(text, SIG)


def finish(b, line, hyps, rhs):
    """Kernel-check the build and compare the conclusion."""
    d = b.build(line)
    concl = check_derivation(d)
    assert concl == Sequent.of(hyps, rhs)
    return d


def check_cert(cert, extra_hyps=()):
    fa = check_derivation(cert.fwd)
    assert fa.rhs == cert.b
    assert fa.lhs <= frozenset({NOT_E, cert.a, *extra_hyps})
    ba = check_derivation(cert.bwd)
    assert ba.rhs == cert.a
    assert ba.lhs <= frozenset({NOT_E, cert.b, *extra_hyps})


def test_chain():
    b = Builder()
    i = b.assume({p("(pred P x1)")}, p("(pred P x1)"))
    j = b.assume({p("(pred P x1)"), p("(pred P x2)")}, p("(pred P x2)"))
    out = b.chain(i, j)
    finish(b, out, [p("(pred P x1)"), p("(pred P x2)")], p("(pred P x2)"))


def test_exp_arbitrary_goal():
    b = Builder()
    hyps = {p("(pred P x1)"), p("(not (pred P x1))")}
    out = b.explode(hyps, p("(pred P x1)"), p("(= x4 x5)"))
    finish(b, out, hyps, p("(= x4 x5)"))


def test_double_negation_rules():
    b = Builder()
    i = b.identity(1)
    dn = b.dn_a(i)
    finish(b, dn, [], p("(not (not (= x1 x1)))"))
    b2 = Builder()
    j = b2.dn_b(b2.assume({p("(not (not (pred P x1)))")}, p("(not (not (pred P x1)))")))
    finish(b2, j, [p("(not (not (pred P x1)))")], p("(pred P x1)"))


def test_three_line_double_negation_of_id():
    # ID then the DN-a expansion, checked end to end by the kernel
    b = Builder()
    out = b.dn_a(b.identity(1))
    d = b.build(out)
    assert check_derivation(d).rhs == p("(not (not (= x1 x1)))")


def test_cp():
    b = Builder()
    i = b.assume({p("(pred P x1)"), p("(pred P x2)")}, p("(pred P x2)"))
    out = b.cp(i, p("(pred P x1)"))
    finish(
        b,
        out,
        [p("(pred P x2)"), p("(not (pred P x2))")],
        p("(not (pred P x1))"),
    )


def test_conj_rules():
    a, c = p("(pred P x1)"), p("(= x1 x2)")
    b = Builder()
    pair = b.r_conj(b.assume({a}, a), b.assume({c}, c))
    finish(b, pair, [a, c], and_(a, c))

    b2 = Builder()
    left = b2.sdrop(b2.assume({and_(a, c)}, and_(a, c)), keep_left=True)
    finish(b2, left, [and_(a, c)], a)

    b3 = Builder()
    right = b3.sdrop(b3.assume({and_(a, c)}, and_(a, c)), keep_left=False)
    finish(b3, right, [and_(a, c)], c)


def test_load_unload():
    a, c, chi = p("(pred P x1)"), p("(= x1 x2)"), p("(pred P x2)")
    b = Builder()
    i = b.assume({a, c, chi}, chi)
    out = b.unload(i, a, c)
    finish(b, out, [and_(a, c), chi], chi)
    b2 = Builder()
    j = b2.assume({and_(a, c), chi}, chi)
    out2 = b2.load(j, a, c)
    finish(b2, out2, [a, c, chi], chi)


def test_meta_pair():
    a, c = p("(pred P x1)"), p("(pred P x2)")
    b = Builder()
    i = b.assume({a, c}, c)
    out = b.meta_a(i, a)
    finish(b, out, [c], imp(a, c))
    back = b.meta_b(out)
    finish(b, back, [c, a], c)


def test_big_conj_helpers():
    parts = [p("(pred P x1)"), p("(= x1 x2)"), p("(pred Q x1 x2)")]
    conj = big_and(parts)
    b = Builder()
    i = b.assume_conj(set(parts), conj)
    folded = b.unload_all(i, conj)
    finish(b, folded, [conj], conj)
    split = b.split_conj(b.assume({conj}, conj))
    assert [b.seq(s).rhs for s in split] == parts


def test_exs_multi_simultaneous():
    # the swap case needs genuinely simultaneous substitution
    body = p("(pred Q x1 x2)")
    target = exists_many([1, 2], body)
    b = Builder()
    i = b.assume({p("(pred Q x2 x1)")}, subst_simul(body, [2, 1], [1, 2]))
    out = b.exs_multi(i, target, [2, 1])
    d = b.build(out)
    assert check_derivation(d) == Sequent.of([p("(pred Q x2 x1)"), NOT_E], target)


def test_exa_multi_and_side_condition():
    body = p("(pred Q x1 x2)")
    ex = exists_many([1, 2], body)
    b = Builder()
    i = b.ant(b.identity(3), {body})
    out = b.exa_multi(i, body, [1, 2])
    finish(b, out, [ex], p("(= x3 x3)"))
    b2 = Builder()
    j = b2.ant(b2.identity(1), {body})
    with pytest.raises(Exception, match="occurs free"):
        b2.exa_multi(j, body, [1, 2])


def test_subs_multi_swap():
    rho = p("(pred Q x8 x9)")
    b = Builder()
    i = b.assume({p("(pred Q x1 x2)")}, p("(pred Q x1 x2)"))
    out = b.subs_multi(i, rho, [8, 9], [1, 2], [2, 1])
    d = b.build(out)
    concl = check_derivation(d)
    assert concl.rhs == p("(pred Q x2 x1)")
    assert concl.lhs == frozenset({p("(pred Q x1 x2)"), Eq(FV(1), FV(2)), Eq(FV(2), FV(1))})


def test_subs_folded_box_shape():
    rho = p("(pred Q x8 x9)")
    b = Builder()
    i = b.assume({p("(pred Q x1 x2)")}, p("(pred Q x1 x2)"))
    out = b.subs_folded(i, rho, [8, 9], [1, 2], [3, 4])
    concl = check_derivation(b.build(out))
    assert concl.rhs == p("(pred Q x3 x4)")
    assert big_and([Eq(FV(1), FV(3)), Eq(FV(2), FV(4))]) in concl.lhs


def test_eq_helpers():
    b = Builder()
    s = b.eq_sym(1, 2)
    finish(b, s, [p("(= x1 x2)")], p("(= x2 x1)"))
    b2 = Builder()
    t = b2.eq_trans(1, 2, 3)
    finish(b2, t, [p("(= x1 x2)"), p("(= x2 x3)")], p("(= x1 x3)"))


def test_forall_s_derivation():
    # paper's first universal: derive => forall x0 (x0 = x0), i.e. S
    b = Builder()
    out = b.forall_s(b.identity(0), [0])
    finish(b, out, [], forall(0, p("(= x0 x0)")))


def test_forall_s_blocked_when_free_in_hyps():
    b = Builder()
    i = b.assume({p("(pred P x1)")}, p("(= x1 x1)"))
    with pytest.raises(TacticError, match="occurs free"):
        b.forall_s(i, [1])


def test_forall_a_and_elim():
    univ = forall_many([1, 2], p("(pred Q x1 x2)"))
    b = Builder()
    i = b.assume({univ}, univ)
    out = b.forall_elim(i, [5, 6])
    finish(b, out, [univ, NOT_E], p("(pred Q x5 x6)"))


def test_forall_elim_with_repeated_witnesses():
    univ = forall_many([1, 2], p("(pred Q x1 x2)"))
    b = Builder()
    out = b.forall_elim(b.assume({univ}, univ), [7, 7])
    finish(b, out, [univ, NOT_E], p("(pred Q x7 x7)"))


def test_exists_elim_box():
    ex = exists_many([1], p("(pred P x1)"))
    b = Builder()
    i = b.assume({ex}, NOT_E)  # placeholder premise Gamma, ex => psi
    i = b.exists_to_nonempty(ex)
    out = b.exists_elim_on(i, ex, [4])
    d = b.build(out)
    concl = check_derivation(d)
    assert concl.rhs == NOT_E
    assert p("(pred P x4)") in concl.lhs


def test_exists_to_nonempty_paper_example():
    ex = exists_many([0], p("(= x0 x0)"))
    b = Builder()
    out = b.exists_to_nonempty(ex)
    finish(b, out, [ex], NOT_E)


def test_empty_to_forall():
    univ = forall(3, p("(pred P x3)"))
    b = Builder()
    out = b.empty_to_forall(univ)
    finish(b, out, [emptiness()], univ)
    # E => S: the validity is a universal
    b2 = Builder()
    out2 = b2.empty_to_forall(forall(0, p("(= x0 x0)")))
    finish(b2, out2, [emptiness()], forall(0, p("(= x0 x0)")))


def test_wrap_universal_setup_reasoning():
    # Gamma, not E => body becomes Gamma => forall(body), Gamma a sentence set
    axiom = exists_many([0], p("(pred P x0)"))
    body = imp(p("(pred P x1)"), p("(pred P x1)"))
    b = Builder()
    i = prop_taut(b, [], body)
    i = b.ant(i, {axiom, NOT_E})
    out = b.wrap_universal(i, [1])
    finish(b, out, [axiom], forall_many([1], body))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_prop_taut_samples(i, j, k):
    a, c, d = p("(pred P x1)"), p("(= x1 x2)"), p("(pred P x2)")
    picks = [a, c, d]
    x, y = picks[i], picks[j]
    b = Builder()
    line = prop_taut(b, [and_(x, y)], Or(y, picks[k] if k else x))
    concl = check_derivation(b.build(line))
    assert concl.lhs == frozenset({and_(x, y)})


def test_prop_taut_rejects_invalid():
    b = Builder()
    with pytest.raises(TacticError, match="tautology"):
        prop_taut(b, [p("(pred P x1)")], p("(pred P x2)"))


def test_prop_taut_distributivity():
    a, c, d = p("(pred P x1)"), p("(= x1 x2)"), p("(pred P x2)")
    lhs = and_(a, Or(c, d))
    rhs = Or(and_(a, c), and_(a, d))
    b = Builder()
    line = prop_taut(b, [lhs], rhs)
    assert check_derivation(b.build(line)) == Sequent.of([lhs], rhs)
    b2 = Builder()
    line2 = prop_taut(b2, [rhs], lhs)
    assert check_derivation(b2.build(line2)) == Sequent.of([rhs], lhs)


def test_insex_cert_both_directions():
    phi = p("(pred P x1)")
    psi = p("(= x5 x2)")
    cert = insex_cert([5], phi, psi)
    assert cert.a == exists_many([5], and_(phi, psi))
    assert cert.b == and_(phi, exists_many([5], psi))
    check_cert(cert)


def test_insex_requires_freshness():
    with pytest.raises(TacticError, match="free"):
        insex_cert([1], p("(pred P x1)"), p("(= x1 x2)"))


def test_binreord_and_reord():
    body = p("(pred Q x1 x2)")
    ex = exists_many([1, 2], body)
    swapped = exists_many([2, 1], body)
    cert = reord_cert(2, ex, [1, 0])
    assert cert.a == ex and cert.b == swapped
    check_cert(cert)
    # identity permutation gives a reflexive cert
    ident = reord_cert(2, ex, [0, 1])
    assert ident.a == ident.b == ex
    check_cert(ident)


def test_reord_three_quantifiers():
    body = and_(p("(pred Q x1 x2)"), p("(pred P x3)"))
    ex = exists_many([1, 2, 3], body)
    perm = [2, 0, 1]
    cert = reord_cert(3, ex, perm)
    assert cert.b == exists_many([3, 1, 2], body)
    check_cert(cert)


def test_cert_compose_transitive():
    phi = p("(pred P x1)")
    psi = p("(= x5 x2)")
    c1 = insex_cert([5], phi, psi)
    c2 = c1.flip()
    round_trip = cert_compose(c1, c2)
    assert round_trip.a == round_trip.b == c1.a
    check_cert(round_trip)


def test_congruence_lifts():
    phi = p("(pred P x1)")
    psi = p("(= x5 x2)")
    base = insex_cert([5], phi, psi)
    lifted = cert_congruence(base, [("not",), ("or_left", p("(pred P x9)")), ("exists", 2)])
    assert lifted.a == close(Or(Not(base.a), p("(pred P x9)")), 2)
    assert lifted.b == close(Or(Not(base.b), p("(pred P x9)")), 2)
    check_cert(lifted)
    assert cert_congruence(base, []) is base


def test_cert_refl():
    f = p("(pred P x1)")
    check_cert(cert_refl(f))
