"""Construction-layer tests over the one-distinguished-point sample theory."""

import pytest

from syncat.category import (
    CategoryError,
    F1,
    F2,
    F3,
    MF1,
    MF2,
    MF3,
    Premorphism,
    SynObject,
    T2,
    T4,
    Theory,
    Verdict,
    compose,
    extraction,
    felim_hyp,
    formal_type2,
    formal_type4,
    functionality_goals,
    identity_of,
    iso_type1_necessary,
    iso_type1_sufficient,
    mk_special,
    morphism_equal,
    neg_slots,
    negated_variables,
    pos_slots,
    to_validity,
    verify_premorphism,
)
from syncat.formulas import (
    Eq,
    FV,
    Signature,
    and_,
    big_and,
    exists_many,
    forall_many,
    imp,
    nonempty,
    parse_formula,
    subst_simul,
    validity,
)
from syncat.kernel import Derivation, check_derivation
from syncat.semantics import Structure, enumerate_structures, is_model
from syncat.tactics import Builder, prop_taut

SIG = Signature.of(P=1, Q=2)
NOT_E = nonempty()


def p(text):
    return parse_formula(text, SIG)


EXIST_P = p("(exists x0 (pred P x0))")
UNIQ_P = p("(forall x0 (forall x1 (imp (and (pred P x0) (pred P x1)) (= x0 x1))))")
THEORY = Theory("one-point", SIG, frozenset({EXIST_P, UNIQ_P}))

LINE = SynObject(p("(= x1 x1)"))  # one free variable
PLANE = SynObject(p("(and (= x1 x1) (= x2 x2))"))
P_OBJ = SynObject(p("(pred P x1)"))
S_OBJ = SynObject(validity())
EP_OBJ = SynObject(EXIST_P)


def check_cert_bundle(pm):
    pm.verify()
    # deleting any certificate makes verification fail
    for name in list(pm.certs):
        broken = Premorphism(pm.theory, pm.src, pm.tgt, pm.payload, {
            k: v for k, v in pm.certs.items() if k != name
        })
        with pytest.raises(CategoryError, match="missing"):
            broken.verify()


def check_equiv(cert, theory=THEORY):
    fa = check_derivation(cert.fwd)
    assert fa.rhs == cert.b
    assert fa.lhs <= (theory.allowed | {NOT_E, cert.a})
    ba = check_derivation(cert.bwd)
    assert ba.rhs == cert.a
    assert ba.lhs <= (theory.allowed | {NOT_E, cert.b})


def type3_point() -> Premorphism:
    """The canonical type-3 morphism S -> (x1=x1) with payload P x1."""
    payload = p("(pred P x1)")
    certs = {}
    # MF1: not E, P x1 => S /\ (x1=x1)
    b = Builder()
    s_line = b.forall_s(b.identity(0), [0])
    s_line = b.ant(s_line, {payload, NOT_E})
    id_line = b.ant(b.identity(1), {payload, NOT_E})
    pair = b.r_conj(s_line, id_line)
    certs[MF1] = b.build(b.meta_a(pair, payload))
    # MF2: Gamma, S => exists x1 P x1 (from the existence axiom)
    b = Builder()
    ax = b.assume({EXIST_P, validity()}, EXIST_P)
    certs[MF2] = b.build(ax)
    # MF3: from the uniqueness axiom
    b = Builder()
    hyp = and_(payload, p("(pred P x2)"))
    start = b.assume({hyp, NOT_E, UNIQ_P}, hyp)
    u = b.ant(b.assume({UNIQ_P}, UNIQ_P), {hyp, NOT_E, UNIQ_P})
    inst = b.forall_elim(u, [1, 2])
    eq = b.chain(start, b.meta_b(inst))
    certs[MF3] = b.build(b.meta_a(eq, hyp))
    return verify_premorphism(THEORY, S_OBJ, LINE, payload, certs)


def test_functionality_goals_shapes():
    goals = functionality_goals(THEORY, LINE, LINE, p("(= x-1 x1)"))
    assert set(goals) == {F1, F2, F3}
    assert goals[F2].rhs == imp(p("(= x-1 x-1)"), exists_many([1], p("(= x-1 x1)")))
    goals2 = functionality_goals(THEORY, LINE, S_OBJ, None)
    assert set(goals2) == {T2}
    goals3 = functionality_goals(THEORY, S_OBJ, S_OBJ, None)
    assert set(goals3) == {T4}


def test_payload_slot_validation():
    with pytest.raises(CategoryError, match="slot"):
        functionality_goals(THEORY, LINE, LINE, p("(= x-2 x1)"))


def test_identity_nonsentence():
    ident = identity_of(THEORY, LINE)
    assert ident.payload == and_(p("(= x-1 x-1)"), Eq(FV(1), FV(-1)))
    check_cert_bundle(ident)


def test_identity_two_variables():
    ident = identity_of(THEORY, PLANE)
    check_cert_bundle(ident)
    assert ident.payload == big_and(
        [PLANE.at(neg_slots(2)), Eq(FV(1), FV(-1)), Eq(FV(2), FV(-2))]
    )


def test_identity_sentence():
    ident = identity_of(THEORY, S_OBJ)
    assert ident.ptype == 4
    check_cert_bundle(ident)


def test_special_mono_subset_formula():
    # P x1 -> (x1 = x1): the implication is reflexive-trivial
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    check_cert_bundle(mono)
    assert mono.payload == and_(p("(pred P x-1)"), Eq(FV(1), FV(-1)))


def test_special_with_noninjective_map():
    # diagonal-style map PLANE <- ... both target vars to the same source var
    sp = mk_special(THEORY, LINE, PLANE, {1: 1, 2: 1})
    check_cert_bundle(sp)


def test_special_requires_cert_for_nontrivial():
    with pytest.raises(CategoryError, match="certificate"):
        mk_special(THEORY, LINE, P_OBJ, {1: 1})


def test_to_validity_maps():
    t2 = to_validity(THEORY, LINE)
    assert t2.ptype == 2
    check_cert_bundle(t2)
    t4 = to_validity(THEORY, EP_OBJ)
    assert t4.ptype == 4
    check_cert_bundle(t4)


def test_verify_premorphism_rejects_nonfunctional():
    # payload P x-1 (ignores the output) fails F3: two outputs allowed
    payload = p("(pred P x-1)")
    b = Builder()
    start = b.assume({payload, NOT_E}, payload)
    pair = b.r_conj(start, b.ant(b.identity(1), {payload, NOT_E}))
    f1 = b.build(b.meta_a(pair, payload))
    with pytest.raises(CategoryError, match="wrong sequent|missing"):
        verify_premorphism(THEORY, P_OBJ, LINE, payload, {F1: f1, F2: f1, F3: f1})


def test_type3_point_verifies():
    pm = type3_point()
    check_cert_bundle(pm)


def test_compose_1_1_and_identity_laws():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident_p = identity_of(THEORY, P_OBJ)
    ident_line = identity_of(THEORY, LINE)
    left = compose(mono, ident_p)
    right = compose(ident_line, mono)
    check_cert_bundle(left)
    check_cert_bundle(right)
    res_l = morphism_equal(left, mono)
    res_r = morphism_equal(right, mono)
    assert res_l.verdict == Verdict.EQUAL
    assert res_r.verdict == Verdict.EQUAL
    check_equiv(res_l.cert)
    check_equiv(res_r.cert)


def test_compose_3_1():
    pt = type3_point()
    mono = mk_special(THEORY, LINE, PLANE, {1: 1, 2: 1})
    comp = compose(mono, pt)
    assert comp.ptype == 3
    check_cert_bundle(comp)


def test_compose_2_1_and_2_3():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    t2 = to_validity(THEORY, LINE)
    comp = compose(t2, mono)  # 2 after 1
    assert comp.ptype == 2
    check_cert_bundle(comp)
    pt = type3_point()
    comp2 = compose(t2, pt)  # 2 after 3 is type 4
    assert comp2.ptype == 4
    check_cert_bundle(comp2)


def test_compose_3_2_table_row():
    # alpha -> s -> gamma gives alpha(x-) /\ theta2(x_k)
    t2 = to_validity(THEORY, LINE)
    pt = type3_point()
    comp = compose(pt, t2)
    assert comp.ptype == 1
    assert comp.payload == and_(p("(= x-1 x-1)"), p("(pred P x1)"))
    check_cert_bundle(comp)


def test_compose_4_2_4_3_4_4():
    t2 = to_validity(THEORY, LINE)  # LINE -> S
    ident_s = identity_of(THEORY, S_OBJ)
    c24 = compose(ident_s, t2)
    assert c24.ptype == 2
    check_cert_bundle(c24)
    pt = type3_point()
    c34 = compose(pt, ident_s)
    assert c34.ptype == 3
    assert c34.payload == and_(validity(), p("(pred P x1)"))
    check_cert_bundle(c34)
    c44 = compose(ident_s, ident_s)
    assert c44.ptype == 4
    check_cert_bundle(c44)


def test_fullreps_style_equality():
    # theta vs theta /\ /\ x_-i = x_-i /\ x_j = x_j represent the same morphism
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    padded_payload = big_and(
        [mono.payload, Eq(FV(-1), FV(-1)), Eq(FV(1), FV(1))]
    )
    goals = functionality_goals(THEORY, P_OBJ, LINE, padded_payload)
    del goals
    padded = verify_premorphism(
        THEORY,
        P_OBJ,
        LINE,
        padded_payload,
        _transport_bundle(mono, padded_payload),
    )
    res = morphism_equal(padded, mono)
    assert res.verdict == Verdict.EQUAL
    check_equiv(res.cert)


def _transport_bundle(pm, new_payload):
    """Bundle for a provably-equivalent payload (test helper): re-derive the
    goals from the old certificates plus the syntactic equivalence."""
    from syncat.category import GOAL_QUANTIFIERS, shifted_slots
    from syncat.formulas import subst_simul

    theory = pm.theory
    n, m = pm.src.arity, pm.tgt.arity
    certs = {}
    # F1
    b = Builder()
    start = b.assume({new_payload, NOT_E}, new_payload)
    old_line = b.sdrop(start, keep_left=True)
    f1 = felim_hyp(b, pm, F1, neg_slots(n) + pos_slots(m))
    certs[F1] = b.build(b.meta_a(b.chain(old_line, f1), new_payload))
    # F2
    b = Builder()
    f2 = felim_hyp(b, pm, F2, neg_slots(n))
    opened = pm.at(neg_slots(n), [9, ])
    ids = [b.identity(-1), b.identity(9)]
    hyps = {opened, NOT_E}
    lines = [b.assume(hyps, opened)] + [b.ant(i, hyps) for i in ids]
    pair = b.prove_conj(lines)
    closed = b.exs_multi(pair, exists_many(pos_slots(m), new_payload), [9])
    opened_line = b.exa_multi(closed, opened, [9])
    certs[F2] = b.build(b.meta_a(b.chain(f2, opened_line), pm.src.at(neg_slots(n))))
    # F3
    b = Builder()
    shifted = subst_simul(new_payload, shifted_slots(m, m), pos_slots(m))
    both = and_(new_payload, shifted)
    start = b.assume({both, NOT_E}, both)
    old_pair = b.r_conj(
        b.sdrop(b.sdrop(start, keep_left=True), keep_left=True),
        b.sdrop(b.sdrop(start, keep_left=False), keep_left=True),
    )
    f3 = felim_hyp(b, pm, F3, neg_slots(n) + pos_slots(m) + shifted_slots(m, m))
    certs[F3] = b.build(b.meta_a(b.chain(old_pair, f3), both))
    return certs


def test_morphism_equal_refuted_by_countermodel():
    ident = identity_of(THEORY, LINE)
    # the "swap against P" payload: sends x to the unique P-point
    pt = type3_point()
    const = compose(pt, to_validity(THEORY, LINE))
    res = morphism_equal(const, ident)
    assert res.verdict == Verdict.REFUTED
    assert res.countermodel is not None


def test_extraction_lemma_line():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    b = Builder()
    gamma = p("(pred Q x5 x9)")
    line = extraction(b, mono, gamma, [-1], [3], [5], [7])
    concl = check_derivation(b.build(line))
    want_rhs = imp(
        and_(
            mono.at([-1], [3]),
            exists_many([7], and_(mono.at([-1], [7]), p("(pred Q x7 x9)"))),
        ),
        p("(pred Q x3 x9)"),
    )
    assert concl.rhs == want_rhs
    assert concl.lhs <= THEORY.allowed | {NOT_E}


def test_extraction_needs_fresh_w():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    b = Builder()
    with pytest.raises(CategoryError, match="fresh"):
        extraction(b, mono, p("(pred Q x5 x9)"), [-1], [3], [5], [9])


def test_iso_sufficient_swap_is_self_inverse():
    # theta = (x_-1 = x1) on LINE is its own negated-variables formula
    ident = identity_of(THEORY, LINE)
    payload = p("(= x-1 x1)")
    bundle = _swap_bundle(payload)
    theta = verify_premorphism(THEORY, LINE, LINE, payload, bundle)
    tilde_payload = negated_variables(theta)
    assert tilde_payload == p("(= x1 x-1)")
    tilde = verify_premorphism(THEORY, LINE, LINE, tilde_payload, _swap_bundle(tilde_payload))
    cert_a, cert_b = iso_type1_sufficient(theta, tilde)
    check_equiv(cert_a)
    check_equiv(cert_b)
    assert cert_a.b == ident.payload


def _swap_bundle(payload):
    certs = {}
    flipped = payload == p("(= x1 x-1)")
    b = Builder()
    start = b.assume({payload, NOT_E}, payload)
    l1 = b.chain(start, b.eq_sym(-1, 1) if not flipped else b.eq_sym(1, -1))
    refl = b.subs(
        (b.identity(-1) if not flipped else l1),
        Eq(FV(-1), FV(9)) if not flipped else Eq(FV(9), FV(-1)),
        9,
        -1,
        -1,
    ) if False else None
    # F1: payload => (x-1=x-1) /\ (x1=x1)
    bb = Builder()
    st = bb.assume({payload, NOT_E}, payload)
    left = bb.ant(bb.identity(-1), {payload, NOT_E})
    right = bb.ant(bb.identity(1), {payload, NOT_E})
    certs[F1] = bb.build(bb.meta_a(bb.r_conj(left, right), payload))
    # F2: (x-1=x-1) => exists x1 payload , witness x-1
    bb = Builder()
    wit = payload == p("(= x-1 x1)")
    base = bb.identity(-1)
    closed = bb.exs_multi(base, exists_many([1], payload), [-1])
    certs[F2] = bb.build(bb.meta_a(bb.ant(closed, bb.seq(closed).lhs | {LINE.at([-1])}), LINE.at([-1])))
    # F3: payload /\ payload[x2/x1] => x1 = x2
    bb = Builder()
    shifted = subst_simul(payload, [2], [1])
    both = and_(payload, shifted)
    st = bb.assume({both, NOT_E}, both)
    l = bb.sdrop(st, keep_left=True)
    r = bb.sdrop(st, keep_left=False)
    if not flipped:
        l_flip = bb.chain(l, bb.eq_sym(-1, 1))  # => x1 = x-1
        tr = bb.eq_trans(1, -1, 2)
        step = bb.chain(l_flip, tr)
        out = bb.chain(r, step)
    else:
        r_flip = bb.chain(r, bb.eq_sym(2, -1))  # => x-1 = x2
        tr = bb.eq_trans(1, -1, 2)
        step = bb.chain(l, tr)
        out = bb.chain(r_flip, step)
    certs[F3] = bb.build(bb.meta_a(out, both))
    return certs


def test_iso_necessary_recovers_tilde():
    payload = p("(= x-1 x1)")
    theta = verify_premorphism(THEORY, LINE, LINE, payload, _swap_bundle(payload))
    tilde_payload = negated_variables(theta)
    tilde = verify_premorphism(THEORY, LINE, LINE, tilde_payload, _swap_bundle(tilde_payload))
    cert_a, cert_b = iso_type1_sufficient(theta, tilde)
    cert = iso_type1_necessary(theta, tilde, cert_a, cert_b)
    check_equiv(cert)
    assert cert.a == tilde_payload and cert.b == tilde_payload


def test_semantic_graphs_of_certified_morphisms():
    from syncat.functor import definable_function

    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    pt = type3_point()
    for m in enumerate_structures(SIG, 2):
        if m.size == 0 or not is_model(m, THEORY.axioms):
            continue
        graph = definable_function(m, mono)
        assert all(graph[r] == r for r in graph)
        g2 = definable_function(m, pt)
        assert set(g2) == {()}
