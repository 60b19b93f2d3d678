"""Fiber products, mediators, and their certificates over the sample theory."""

import pytest

from syncat.category import (
    F1,
    F2,
    F3,
    MF1,
    MF2,
    MF3,
    Premorphism,
    SynObject,
    Theory,
    Verdict,
    compose,
    identity_of,
    mk_special,
    morphism_equal,
    neg_slots,
    pos_slots,
    to_validity,
    verify_premorphism,
)
from syncat.formulas import (
    Signature,
    and_,
    exists_many,
    nonempty,
    parse_formula,
    validity,
)
from syncat.kernel import check_derivation
from syncat.limits import (
    LimitsError,
    cone_solution_cert,
    fiber_product,
    isosingular,
    mediate,
    mediator_uniqueness,
    projection_composite_cert,
)
from syncat.tactics import Builder

from tests.test_category import (
    LINE,
    PLANE,
    P_OBJ,
    S_OBJ,
    THEORY,
    check_equiv,
    type3_point,
)

SIG = Signature.of(P=1, Q=2)
NOT_E = nonempty()


def p(text):
    return parse_formula(text, SIG)


def special_line_to_line():
    return identity_of(THEORY, LINE)


def test_case0_square():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident = identity_of(THEORY, LINE)
    sq = fiber_product(mono, ident)
    assert sq.case == 0
    sq.verify()
    check_equiv(sq.commutation)


def test_case0_mediate_and_uniqueness():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident = identity_of(THEORY, LINE)
    sq = fiber_product(mono, ident)
    # cone: the apex itself with its projections
    comp_a = compose(mono, sq.pi_alpha)
    comp_b = compose(ident, sq.pi_beta)
    med = mediate(sq, sq.pi_alpha, sq.pi_beta, sq.commutation)
    med.morphism.verify()
    check_equiv(med.c_alpha)
    check_equiv(med.c_beta)
    # the identity on the apex is a competitor solving the same cone
    apex_id = identity_of(THEORY, sq.apex)
    cert = mediator_uniqueness(sq, sq.pi_alpha, sq.pi_beta, med.morphism, apex_id)
    check_equiv(cert)


def test_case1_product_square_and_mediate():
    ta = to_validity(THEORY, P_OBJ)
    tb = to_validity(THEORY, LINE)
    sq = fiber_product(ta, tb)
    assert sq.case == 1
    sq.verify()
    assert sq.commutation is None
    # cone from P_OBJ: the mono to LINE and identity-with-retag
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident_p = identity_of(THEORY, P_OBJ)
    med = mediate(sq, ident_p, mono, None)
    med.morphism.verify()
    check_equiv(med.c_alpha)
    check_equiv(med.c_beta)


def test_case2_square_and_mediate():
    ta = to_validity(THEORY, LINE)  # LINE -> S type 2
    ep = SynObject(p("(exists x0 (pred P x0))"))
    tb = to_validity(THEORY, ep)  # sentence -> S type 4
    sq = fiber_product(ta, tb)
    assert sq.case == 2
    sq.verify()
    # cone: P_OBJ -> LINE mono plus P_OBJ -> exists-P (type 2)
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    b = Builder()
    hyp = P_OBJ.at(neg_slots(1))
    start = b.assume({hyp, NOT_E}, hyp)
    closed = b.exs_multi(start, ep.formula, [-1])
    from syncat.category import formal_type2

    leg2 = formal_type2(THEORY, P_OBJ, ep, b.build(closed))
    med = mediate(sq, mono, leg2, None)
    med.morphism.verify()
    check_equiv(med.c_alpha)


def test_case3_square_and_mediate():
    ep = SynObject(p("(exists x0 (pred P x0))"))
    ta = to_validity(THEORY, ep)
    tb = identity_of(THEORY, S_OBJ)
    sq = fiber_product(ta, tb)
    assert sq.case == 3
    sq.verify()
    med = mediate(sq, identity_of(THEORY, ep), to_validity(THEORY, ep), None)
    med.morphism.verify()
    assert med.morphism.ptype == 4


def test_isosingular_roundtrip():
    pt = type3_point()
    obj, iso, inverse = isosingular(pt)
    assert obj.formula == pt.payload
    iso.verify()
    inverse.verify()
    back = compose(inverse, iso)
    assert back.ptype == 4


def test_case4_square():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    pt = type3_point()  # S -> LINE
    sq = fiber_product(mono, pt)
    assert sq.case == 4
    sq.verify()
    check_equiv(sq.commutation)
    assert sq.pi_beta.ptype == 2


def test_case5_square():
    pt = type3_point()
    sq = fiber_product(pt, pt)
    assert sq.case == 5
    sq.verify()
    check_equiv(sq.commutation)


def test_projection_composite_cert_shape():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    ident = identity_of(THEORY, LINE)
    sq = fiber_product(mono, ident)
    med = mediate(sq, sq.pi_alpha, sq.pi_beta, sq.commutation)
    cert = projection_composite_cert(sq, med.morphism, "beta")
    check_equiv(cert)


# -- Factorization, effective epis, stability, products, substitution square --

from syncat.category import Verdict, saturate
from syncat.limits import (
    Factorization,
    check_ee_stability,
    factorize,
    image_object,
    is_effective_epi,
    n_fold_product,
    product_mediate,
    sentence_substitution_square,
    substitution_square,
)


def test_image_type1_shape():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    img = image_object(mono)
    assert img.enumeration == (1,)


def test_factorize_type1_mono_epi_is_iso_like():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    fac = factorize(mono)
    fac.epi.verify()
    fac.mono.verify()
    check_equiv(fac.composite_cert)
    # image of the special mono P -> LINE is the P-definable set
    from syncat.normalize import normalize
    got, _ = normalize(fac.image.formula)
    want, _ = normalize(p("(pred P x1)"))
    assert got == want


def test_factorize_type2():
    t2 = to_validity(THEORY, P_OBJ)
    fac = factorize(t2)
    fac.epi.verify()
    fac.mono.verify()
    assert fac.image.formula == exists_many([1], p("(pred P x1)"))


def test_factorize_type3():
    pt = type3_point()
    fac = factorize(pt)
    fac.epi.verify()
    fac.mono.verify()
    check_equiv(fac.composite_cert)
    assert fac.image.formula == p("(pred P x1)")


def test_factorize_type4():
    ep = SynObject(p("(exists x0 (pred P x0))"))
    t4 = to_validity(THEORY, ep)
    fac = factorize(t4)
    fac.epi.verify()
    assert fac.image.formula == ep.formula


def test_epi_part_is_effective_epi():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    fac = factorize(mono)
    res = is_effective_epi(fac.epi)
    assert res.verdict == Verdict.EQUAL
    concl = check_derivation(res.cert)
    assert concl.lhs <= THEORY.allowed | {NOT_E, fac.epi.tgt.formula}


def test_identity_is_effective_epi():
    ident = identity_of(THEORY, LINE)
    res = is_effective_epi(ident)
    assert res.verdict == Verdict.EQUAL


def test_point_to_not_e_is_effective_epi():
    # the type-2 map (x1=x1) -> not E from the empty-model discussion
    from syncat.formulas import nonempty
    from syncat.category import formal_type2
    from syncat.tactics import Builder

    ne = SynObject(nonempty())
    b = Builder()
    line = b.assume({LINE.at(neg_slots(1)), NOT_E}, NOT_E)
    t2 = formal_type2(THEORY, LINE, ne, b.build(line))
    res = is_effective_epi(t2)
    assert res.verdict == Verdict.EQUAL
    concl = check_derivation(res.cert)
    assert concl.rhs == image_object(t2).formula


def test_strict_mono_refuted():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    res = is_effective_epi(mono)
    assert res.verdict == Verdict.REFUTED
    assert res.countermodel is not None


def test_stability_type1_along_type1():
    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    fac = factorize(mono)
    # pull the epi part back along the identity of its image
    ident = identity_of(THEORY, fac.image)
    report = check_ee_stability(fac.epi, ident, fac.ee_criterion)
    concl = check_derivation(report.ee_cert)
    assert concl.lhs <= THEORY.allowed | {NOT_E, ident.src.formula}


def test_stability_type2_along_type4():
    t2 = to_validity(THEORY, P_OBJ)
    fac = factorize(t2)
    # fac.epi : P -> exists P, effective epi; pull along a type-4 leg
    ep = fac.image
    b = Builder()
    hyp = p("(exists x0 (pred P x0))")
    ax = b.assume({THEORY and hyp} | {hyp}, hyp) if False else b.assume({hyp}, hyp)
    t4 = __import__("syncat.category", fromlist=["formal_type4"]).formal_type4(
        THEORY, ep, ep, b.build(ax)
    )
    report = check_ee_stability(fac.epi, t4, fac.ee_criterion)
    assert report.ee_cert is not None
    check_derivation(report.ee_cert)


def test_stability_type2_along_type2():
    t2 = to_validity(THEORY, P_OBJ)
    fac = factorize(t2)
    other = __import__("syncat.category", fromlist=["formal_type2"]).formal_type2(
        THEORY, LINE, fac.image, _line_to_ep_cert()
    )
    report = check_ee_stability(fac.epi, other, fac.ee_criterion)
    check_derivation(report.ee_cert)


def _line_to_ep_cert():
    b = Builder()
    ax = b.assume({LINE.at(neg_slots(1)), NOT_E, p("(exists x0 (pred P x0))")},
                  p("(exists x0 (pred P x0))"))
    return b.build(ax)


def test_n_fold_product_projections():
    ev, projs = n_fold_product(THEORY, {1, 2})
    assert len(projs) == 2
    for pm in projs:
        pm.verify()
    assert projs[0].payload == p("(= x-1 x1)")
    assert projs[1].payload == p("(= x-2 x1)")


def test_n_fold_product_mediate():
    ev, projs = n_fold_product(THEORY, {1, 2})
    # cone from LINE: both legs the identity-like map x_-1 = x_1
    ident_leg = projs[0]
    cone_src_ev, _ = n_fold_product(THEORY, {5})
    leg = mk_special(THEORY, LINE, SynObject(p("(= x0 x0)")), {0: 1})
    eta, certs = product_mediate(THEORY, ev, projs, [leg, leg])
    eta.verify()
    for c in certs:
        check_equiv(c)


def test_substitution_square_identity_map():
    sq = substitution_square(THEORY, P_OBJ, {1}, {1: 1})
    sq.verify()
    check_equiv(sq.commutation)


def test_substitution_square_noninjective():
    # theobs-style: P-free variable sent into a bigger V, or repeated indices
    sq = substitution_square(THEORY, PLANE, {3}, {1: 3, 2: 3})
    sq.verify()
    check_equiv(sq.commutation)


def test_sentence_substitution_square():
    ep = SynObject(p("(exists x0 (pred P x0))"))
    sq = sentence_substitution_square(THEORY, ep, {1, 2})
    sq.pi_alpha.verify()
    sq.pi_beta.verify()


def test_coequalizer_mediate_and_uniqueness():
    from syncat.limits import (
        coequalizer_mediate,
        coequalizer_uniqueness,
        self_pullback,
    )
    from syncat.category import compose, payload_equal_cert

    mono = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    fac = factorize(mono)
    sq = self_pullback(mono)
    # u := the epi part itself equalizes the projections
    u = mk_special(THEORY, P_OBJ, LINE, {1: 1})
    eta, solution = coequalizer_mediate(fac, u, sq)
    eta.verify()
    check_equiv(solution)
    # a competitor: the canonical eta itself with its own solution cert
    cert = coequalizer_uniqueness(fac, u, sq, eta, eta, solution)
    check_equiv(cert)
