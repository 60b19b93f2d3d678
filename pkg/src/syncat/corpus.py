"""The transcription corpus: every construction the development relies on,
instantiated on a fixed sample theory and re-checked by the kernel.

Each entry is (chapter, name, thunk); a thunk raising means a red corpus
item.  `run_corpus` returns a machine-readable summary."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .category import (
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
    extraction,
    identity_of,
    iso_type1_necessary,
    iso_type1_sufficient,
    mk_special,
    morphism_equal,
    negated_variables,
    neg_slots,
    pos_slots,
    to_validity,
    verify_premorphism,
)
from .formulas import (
    Eq,
    FV,
    Signature,
    and_,
    big_and,
    exists_many,
    forall,
    forall_many,
    imp,
    nonempty,
    parse_formula,
    subst_simul,
    validity,
)
from .kernel import Sequent, check_derivation
from .limits import (
    cone_solution_cert,
    coequalizer_mediate,
    coequalizer_uniqueness,
    factorize,
    fiber_product,
    is_effective_epi,
    isosingular,
    mediate,
    mediator_uniqueness,
    n_fold_product,
    product_mediate,
    projection_composite_cert,
    self_pullback,
    sentence_substitution_square,
    substitution_square,
    check_ee_stability,
)
from .semantics import Structure, enumerate_structures, eval_set, expand, is_model
from .subobjects import (
    complement_join_cert,
    complement_meet_cert,
    lattice_equiv_by_taut,
    leq_cert_bottom,
    leq_cert_join_left,
    leq_cert_join_lub,
    pullback_bottom_cert,
    pullback_hom,
    pullback_join_cert,
    pullback_meet_cert,
    pullback_top_cert,
    sub_bottom,
    sub_complement,
    sub_join,
    sub_meet,
    sub_of,
    sub_top,
)
from .tactics import Builder, cert_congruence, insex_cert, reord_cert

NOT_E = nonempty()

SIG = Signature.of(P=1, Q=2)


def _p(text: str):
    return parse_formula(text, SIG)


def sample_theory() -> Theory:
    exist_p = _p("(exists x0 (pred P x0))")
    uniq_p = _p("(forall x0 (forall x1 (imp (and (pred P x0) (pred P x1)) (= x0 x1))))")
    return Theory("one-point", SIG, frozenset({exist_p, uniq_p}))


THEORY = sample_theory()
LINE = SynObject(_p("(= x1 x1)"))
PLANE = SynObject(_p("(and (= x1 x1) (= x2 x2))"))
P_OBJ = SynObject(_p("(pred P x1)"))
S_OBJ = SynObject(validity())
EP_OBJ = SynObject(_p("(exists x0 (pred P x0))"))


def point_morphism() -> Premorphism:
    """The canonical type-3 morphism S -> (x1 = x1) with payload P x1."""
    payload = _p("(pred P x1)")
    certs = {}
    b = Builder()
    s_line = b.forall_s(b.identity(0), [0])
    s_line = b.ant(s_line, {payload, NOT_E})
    id_line = b.ant(b.identity(1), {payload, NOT_E})
    certs[MF1] = b.build(b.meta_a(b.r_conj(s_line, id_line), payload))
    b = Builder()
    certs[MF2] = b.build(b.assume({_p("(exists x0 (pred P x0))"), validity()}, _p("(exists x0 (pred P x0))")))
    b = Builder()
    uniq = next(a for a in THEORY.axioms if a != _p("(exists x0 (pred P x0))"))
    hyp = and_(payload, _p("(pred P x2)"))
    start = b.assume({hyp, NOT_E, uniq}, hyp)
    u = b.ant(b.assume({uniq}, uniq), {hyp, NOT_E, uniq})
    inst = b.forall_elim(u, [1, 2])
    eq = b.chain(start, b.meta_b(inst))
    certs[MF3] = b.build(b.meta_a(eq, hyp))
    return verify_premorphism(THEORY, S_OBJ, LINE, payload, certs)


def _check_cert(cert, extra=frozenset()):
    fa = check_derivation(cert.fwd)
    assert fa.rhs == cert.b and fa.lhs <= THEORY.allowed | {NOT_E, cert.a} | extra
    ba = check_derivation(cert.bwd)
    assert ba.rhs == cert.a and ba.lhs <= THEORY.allowed | {NOT_E, cert.b} | extra


def _swap_morphism() -> Premorphism:
    payload = _p("(= x-1 x1)")
    certs = {}
    b = Builder()
    left = b.ant(b.identity(-1), {payload, NOT_E})
    right = b.ant(b.identity(1), {payload, NOT_E})
    certs[F1] = b.build(b.meta_a(b.r_conj(left, right), payload))
    b = Builder()
    closed = b.exs_multi(b.identity(-1), exists_many([1], payload), [-1])
    closed = b.ant(closed, b.seq(closed).lhs | {LINE.at([-1])})
    certs[F2] = b.build(b.meta_a(closed, LINE.at([-1])))
    b = Builder()
    shifted = subst_simul(payload, [2], [1])
    both = and_(payload, shifted)
    st = b.assume({both, NOT_E}, both)
    l = b.sdrop(st, keep_left=True)
    r = b.sdrop(st, keep_left=False)
    l_flip = b.chain(l, b.eq_sym(-1, 1))
    tr = b.eq_trans(1, -1, 2)
    out = b.chain(r, b.chain(l_flip, tr))
    certs[F3] = b.build(b.meta_a(out, both))
    return verify_premorphism(THEORY, LINE, LINE, payload, certs)


def build_corpus() -> list[tuple[str, str, Callable[[], None]]]:
    mono = lambda: mk_special(THEORY, P_OBJ, LINE, {1: 1})
    entries: list[tuple[str, str, Callable[[], None]]] = []
    add = lambda ch, name, fn: entries.append((ch, name, fn))

    # -- Chapter 1: derived rules ------------------------------------------
    def ch1_existstononempty():
        b = Builder()
        line = b.exists_to_nonempty(exists_many([0], _p("(= x0 x0)")))
        assert check_derivation(b.build(line)) == Sequent.of(
            [exists_many([0], _p("(= x0 x0)"))], NOT_E
        )

    add("ch1", "existstononempty", ch1_existstononempty)

    def ch1_forall_s():
        b = Builder()
        out = b.forall_s(b.identity(0), [0])
        assert check_derivation(b.build(out)).rhs == validity()

    add("ch1", "forall-S derivation", ch1_forall_s)

    def ch1_forall_a():
        univ = forall_many([1, 2], _p("(pred Q x1 x2)"))
        b = Builder()
        out = b.forall_elim(b.assume({univ}, univ), [5, 6])
        assert check_derivation(b.build(out)).rhs == _p("(pred Q x5 x6)")

    add("ch1", "forall-A / forall-ELIM", ch1_forall_a)

    def ch1_exs_len2():
        body = _p("(pred Q x1 x2)")
        target = exists_many([1, 2], body)
        b = Builder()
        i = b.assume({_p("(pred Q x2 x1)")}, subst_simul(body, [2, 1], [1, 2]))
        out = b.exs_multi(i, target, [2, 1])
        assert check_derivation(b.build(out)).rhs == target

    add("ch1", "exists-S' length 2", ch1_exs_len2)

    def ch1_subs_len2():
        rho = _p("(pred Q x8 x9)")
        b = Builder()
        i = b.assume({_p("(pred Q x1 x2)")}, _p("(pred Q x1 x2)"))
        out = b.subs_folded(i, rho, [8, 9], [1, 2], [3, 4])
        assert check_derivation(b.build(out)).rhs == _p("(pred Q x3 x4)")

    add("ch1", "SUBS' length 2", ch1_subs_len2)

    def ch1_insex():
        cert = insex_cert([5], _p("(pred P x1)"), _p("(= x5 x2)"))
        _check_cert(cert)

    add("ch1", "insex both directions", ch1_insex)

    def ch1_binreord():
        body = _p("(pred Q x1 x2)")
        cert = reord_cert(2, exists_many([1, 2], body), [1, 0])
        _check_cert(cert)

    add("ch1", "binreord", ch1_binreord)

    def ch1_implemma():
        base = insex_cert([5], _p("(pred P x1)"), _p("(= x5 x2)"))
        lifted = cert_congruence(
            base, [("or_left", _p("(pred P x9)")), ("not",), ("exists", 2)]
        )
        _check_cert(lifted)

    add("ch1", "Implication Lemma (a)-(c)", ch1_implemma)

    def ch1_emptytofrl():
        from .formulas import emptiness

        b = Builder()
        out = b.empty_to_forall(forall(3, _p("(pred P x3)")))
        assert check_derivation(b.build(out)).lhs == frozenset({emptiness()})

    add("ch1", "E => forall X phi", ch1_emptytofrl)

    # -- Chapter 2: composition --------------------------------------------
    def ch2_case1():
        m = mono()
        comp = compose(identity_of(THEORY, LINE), m)
        comp.verify()

    add("ch2", "prehomcomp case 1 (F1/F2/F3)", ch2_case1)

    def ch2_case2():
        pt = point_morphism()
        comp = compose(mk_special(THEORY, LINE, PLANE, {1: 1, 2: 1}), pt)
        comp.verify()

    add("ch2", "prehomcomp case 2 (1 after 3)", ch2_case2)

    def ch2_case3():
        comp = compose(point_morphism(), to_validity(THEORY, LINE))
        comp.verify()
        assert comp.payload == and_(_p("(= x-1 x-1)"), _p("(pred P x1)"))

    add("ch2", "prehomcomp case 3 (3 after 2)", ch2_case3)

    def ch2_case4():
        comp = compose(to_validity(THEORY, LINE), mono())
        comp.verify()

    add("ch2", "prehomcomp case 4 (2 after 1)", ch2_case4)

    def ch2_case5():
        comp = compose(identity_of(THEORY, S_OBJ), to_validity(THEORY, LINE))
        comp.verify()

    add("ch2", "prehomcomp case 5 (4 after 2)", ch2_case5)

    def ch2_case6():
        comp = compose(to_validity(THEORY, LINE), point_morphism())
        comp.verify()

    add("ch2", "prehomcomp case 6 (2 after 3)", ch2_case6)

    def ch2_case7():
        comp = compose(point_morphism(), identity_of(THEORY, S_OBJ))
        comp.verify()

    add("ch2", "prehomcomp case 7 (3 after 4)", ch2_case7)

    def ch2_case8():
        comp = compose(identity_of(THEORY, S_OBJ), to_validity(THEORY, EP_OBJ))
        comp.verify()

    add("ch2", "prehomcomp case 8 (4 after 4)", ch2_case8)

    def ch2_fullreps():
        m = mono()
        padded = big_and([m.payload, Eq(FV(-1), FV(-1)), Eq(FV(1), FV(1))])
        res = morphism_equal(_padded_premorphism(m, padded), m)
        assert res.verdict == Verdict.EQUAL
        _check_cert(res.cert)

    add("ch2", "fullreps representative", ch2_fullreps)

    def ch2_assoc_case0():
        m = mono()
        i = identity_of(THEORY, LINE)
        left = compose(compose(i, i), m)
        right = compose(i, compose(i, m))
        res = morphism_equal(left, right)
        assert res.verdict == Verdict.EQUAL
        _check_cert(res.cert)

    add("ch2", "associativity case 0", ch2_assoc_case0)

    # -- Chapter 3: special morphisms and isos ------------------------------
    def ch3_havespecial():
        sp = mk_special(THEORY, LINE, PLANE, {1: 1, 2: 1})
        sp.verify()

    add("ch3", "havespecial F1-F3", ch3_havespecial)

    def ch3_soutgoing():
        m = mono()
        i = identity_of(THEORY, P_OBJ)
        res = morphism_equal(compose(m, i), m)
        assert res.verdict == Verdict.EQUAL
        _check_cert(res.cert)

    add("ch3", "soutgoing (postcomposition through a special map)", ch3_soutgoing)

    def ch3_sincoming():
        m = mono()
        i = identity_of(THEORY, LINE)
        res = morphism_equal(compose(i, m), m)
        assert res.verdict == Verdict.EQUAL
        _check_cert(res.cert)

    add("ch3", "sincoming (precomposition with a special mono)", ch3_sincoming)

    def ch3_extraction():
        b = Builder()
        line = extraction(b, mono(), _p("(pred Q x5 x9)"), [-1], [3], [5], [7])
        concl = check_derivation(b.build(line))
        assert concl.lhs <= THEORY.allowed | {NOT_E}

    add("ch3", "Extraction Lemma", ch3_extraction)

    def ch3_t1isosuf():
        theta = _swap_morphism()
        tilde_payload = negated_variables(theta)
        tilde = _swap_like(tilde_payload)
        ca, cb = iso_type1_sufficient(theta, tilde)
        _check_cert(ca)
        _check_cert(cb)

    add("ch3", "t1isosuf (*a)/(*b)", ch3_t1isosuf)

    def ch3_t1isonec():
        theta = _swap_morphism()
        tilde = _swap_like(negated_variables(theta))
        ca, cb = iso_type1_sufficient(theta, tilde)
        cert = iso_type1_necessary(theta, tilde, ca, cb)
        _check_cert(cert)

    add("ch3", "t1isonec", ch3_t1isonec)

    # -- Chapter 5: fiber products -------------------------------------------
    def ch5_case0_mediator():
        m = mono()
        i = identity_of(THEORY, LINE)
        sq = fiber_product(m, i)
        _check_cert(sq.commutation)
        med = mediate(sq, sq.pi_alpha, sq.pi_beta, sq.commutation)
        med.morphism.verify()
        _check_cert(med.c_alpha)
        _check_cert(med.c_beta)

    add("ch5", "case 0 square, mediator F1-F3 and C1/C2", ch5_case0_mediator)

    def ch5_uniqueness():
        m = mono()
        i = identity_of(THEORY, LINE)
        sq = fiber_product(m, i)
        med = mediate(sq, sq.pi_alpha, sq.pi_beta, sq.commutation)
        competitor = identity_of(THEORY, sq.apex)
        cert = mediator_uniqueness(sq, sq.pi_alpha, sq.pi_beta, med.morphism, competitor)
        _check_cert(cert)

    add("ch5", "case 0 mediator uniqueness", ch5_uniqueness)

    def ch5_products():
        sq = fiber_product(to_validity(THEORY, P_OBJ), to_validity(THEORY, LINE))
        sq.verify()
        med = mediate(sq, identity_of(THEORY, P_OBJ), mono(), None)
        med.morphism.verify()

    add("ch5", "case 1 product over a sentence", ch5_products)

    def ch5_case2_case3():
        sq2 = fiber_product(to_validity(THEORY, LINE), to_validity(THEORY, EP_OBJ))
        sq2.verify()
        sq3 = fiber_product(to_validity(THEORY, EP_OBJ), identity_of(THEORY, S_OBJ))
        sq3.verify()

    add("ch5", "cases 2 and 3", ch5_case2_case3)

    def ch5_cases45():
        sq4 = fiber_product(mono(), point_morphism())
        sq4.verify()
        _check_cert(sq4.commutation)
        sq5 = fiber_product(point_morphism(), point_morphism())
        sq5.verify()
        _check_cert(sq5.commutation)

    add("ch5", "cases 4 and 5 via isosingular", ch5_cases45)

    def ch5_isosingular():
        obj, iso, inverse = isosingular(point_morphism())
        iso.verify()
        inverse.verify()

    add("ch5", "isosingular / t2iso", ch5_isosingular)

    # -- Chapter 6: factorization ---------------------------------------------
    def ch6_type1():
        fac = factorize(mono())
        fac.epi.verify()
        fac.mono.verify()
        _check_cert(fac.composite_cert)

    add("ch6", "imagereceives + factorization (type 1)", ch6_type1)

    def ch6_other_types():
        factorize(to_validity(THEORY, P_OBJ)).epi.verify()
        fac3 = factorize(point_morphism())
        _check_cert(fac3.composite_cert)
        factorize(to_validity(THEORY, EP_OBJ)).epi.verify()

    add("ch6", "factorization types 2-4", ch6_other_types)

    def ch6_toimageisee():
        m = mono()
        fac = factorize(m)
        sq = self_pullback(m)
        eta, solution = coequalizer_mediate(fac, m, sq)
        eta.verify()
        _check_cert(solution)
        cert = coequalizer_uniqueness(fac, m, sq, eta, eta, solution)
        _check_cert(cert)

    add("ch6", "toimageisee mediator and uniqueness", ch6_toimageisee)

    # -- Chapter 7: Sub(X) ------------------------------------------------------
    def ch7_lattice():
        a = _sub_p()
        bsub = _sub_not_p()
        sub_join(a, bsub).verify()
        sub_meet(a, bsub).verify()
        sub_top(THEORY, LINE).verify()
        sub_bottom(THEORY, LINE).verify()
        sub_complement(a).verify()
        check_derivation(leq_cert_join_left(a, bsub))
        check_derivation(leq_cert_bottom(sub_bottom(THEORY, LINE), a))
        _check_cert(complement_join_cert(a))
        _check_cert(complement_meet_cert(a, sub_bottom(THEORY, LINE)))

    add("ch7", "join/meet/least/greatest/comp", ch7_lattice)

    def ch7_pullback_hom():
        ident = identity_of(THEORY, LINE)
        a = _sub_p()
        bsub = _sub_not_p()
        _check_cert(pullback_join_cert(ident, a, bsub))
        _check_cert(pullback_meet_cert(ident, a, bsub))
        _check_cert(pullback_top_cert(ident))
        _check_cert(pullback_bottom_cert(ident))

    add("ch7", "pullback-hom (*a)-(*d)", ch7_pullback_hom)

    # -- Chapter 8: stability -----------------------------------------------------
    def ch8_type1():
        fac = factorize(mono())
        ident = identity_of(THEORY, fac.image)
        report = check_ee_stability(fac.epi, ident, fac.ee_criterion)
        check_derivation(report.ee_cert)

    add("ch8", "stability type-1 (*)", ch8_type1)

    def ch8_type2():
        fac = factorize(to_validity(THEORY, P_OBJ))
        b = Builder()
        ax = b.assume({fac.image.formula}, fac.image.formula)
        from .category import formal_type4

        t4 = formal_type4(THEORY, fac.image, fac.image, b.build(ax))
        report = check_ee_stability(fac.epi, t4, fac.ee_criterion)
        check_derivation(report.ee_cert)

    add("ch8", "stability type-2 along type-4", ch8_type2)

    # -- Chapter 9: semantics ------------------------------------------------------
    def ch9_star_prime():
        from .functor import EvalFunctor, check_star_prime

        m = Structure.of(SIG, 2, P=[(0,)], Q=[(0, 1)])
        F = EvalFunctor(THEORY, m)
        ok, counts = check_star_prime(F, _p("(or (exists x0 (pred P x0)) (pred P x1))"))
        assert ok

    add("ch9", "star-prime induction sample", ch9_star_prime)

    def ch9_nfold():
        ev, projs = n_fold_product(THEORY, {1, 2})
        for pm in projs:
            pm.verify()

    add("ch9", "n-fold product of the point", ch9_nfold)

    def ch9_substitution_square():
        sq = substitution_square(THEORY, P_OBJ, {1, 2}, {1: 2})
        sq.verify()
        _check_cert(sq.commutation)
        sentence_substitution_square(THEORY, EP_OBJ, {1}).pi_alpha.verify()

    add("ch9", "substitution square (choosypully + 1.5)", ch9_substitution_square)

    def ch9_reconstruct():
        from .functor import EvalFunctor, reconstruct_model

        m = Structure.of(SIG, 2, P=[(1,)], Q=[(0, 0), (1, 0)])
        F = EvalFunctor(THEORY, m)
        assert reconstruct_model(F) == m

    add("ch9", "model reconstruction round-trip", ch9_reconstruct)

    return entries


def _padded_premorphism(pm: Premorphism, padded):
    from .category import GOAL_QUANTIFIERS, felim_hyp, shifted_slots

    theory = pm.theory
    n, m = pm.src.arity, pm.tgt.arity
    certs = {}
    b = Builder()
    start = b.assume({padded, NOT_E}, padded)
    old_line = b.sdrop(start, keep_left=True)
    f1 = felim_hyp(b, pm, F1, neg_slots(n) + pos_slots(m))
    certs[F1] = b.build(b.meta_a(b.chain(old_line, f1), padded))
    b = Builder()
    f2 = felim_hyp(b, pm, F2, neg_slots(n))
    k = 9
    opened = pm.at(neg_slots(n), [k])
    hyps = {opened, NOT_E}
    lines = [b.assume(hyps, opened), b.ant(b.identity(-1), hyps), b.ant(b.identity(k), hyps)]
    pair = b.prove_conj(lines)
    closed = b.exs_multi(pair, exists_many(pos_slots(m), padded), [k])
    opened_line = b.exa_multi(closed, opened, [k])
    certs[F2] = b.build(b.meta_a(b.chain(f2, opened_line), pm.src.at(neg_slots(n))))
    b = Builder()
    shifted = subst_simul(padded, shifted_slots(m, m), pos_slots(m))
    both = and_(padded, shifted)
    start = b.assume({both, NOT_E}, both)
    old_pair = b.r_conj(
        b.sdrop(b.sdrop(start, keep_left=True), keep_left=True),
        b.sdrop(b.sdrop(start, keep_left=False), keep_left=True),
    )
    f3 = felim_hyp(b, pm, F3, neg_slots(n) + pos_slots(m) + shifted_slots(m, m))
    certs[F3] = b.build(b.meta_a(b.chain(old_pair, f3), both))
    return verify_premorphism(theory, pm.src, pm.tgt, padded, certs)


def _swap_like(payload):
    flipped = payload == _p("(= x1 x-1)")
    certs = {}
    b = Builder()
    left = b.ant(b.identity(-1), {payload, NOT_E})
    right = b.ant(b.identity(1), {payload, NOT_E})
    certs[F1] = b.build(b.meta_a(b.r_conj(left, right), payload))
    b = Builder()
    closed = b.exs_multi(b.identity(-1), exists_many([1], payload), [-1])
    closed = b.ant(closed, b.seq(closed).lhs | {LINE.at([-1])})
    certs[F2] = b.build(b.meta_a(closed, LINE.at([-1])))
    b = Builder()
    shifted = subst_simul(payload, [2], [1])
    both = and_(payload, shifted)
    st = b.assume({both, NOT_E}, both)
    l = b.sdrop(st, keep_left=True)
    r = b.sdrop(st, keep_left=False)
    if not flipped:
        l_flip = b.chain(l, b.eq_sym(-1, 1))
        out = b.chain(r, b.chain(l_flip, b.eq_trans(1, -1, 2)))
    else:
        r_flip = b.chain(r, b.eq_sym(2, -1))
        out = b.chain(r_flip, b.chain(l, b.eq_trans(1, -1, 2)))
    certs[F3] = b.build(b.meta_a(out, both))
    return verify_premorphism(THEORY, LINE, LINE, payload, certs)


def _sub_p():
    b = Builder()
    rep = _p("(pred P x1)")
    line = b.ant(b.identity(1), {rep, NOT_E})
    return sub_of(THEORY, LINE, rep, b.build(line))


def _sub_not_p():
    b = Builder()
    rep = _p("(not (pred P x1))")
    line = b.ant(b.identity(1), {rep, NOT_E})
    return sub_of(THEORY, LINE, rep, b.build(line))


@dataclass
class CorpusSummary:
    total: int
    passed: int
    by_chapter: dict[str, tuple[int, int]]
    failures: list[tuple[str, str, str]]

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def run_corpus(mutate: str | None = None) -> CorpusSummary:
    """Run every corpus item; `mutate` names one item to sabotage (its check
    runs against a corrupted derivation and must fail)."""
    entries = build_corpus()
    by_chapter: dict[str, list[bool]] = {}
    failures = []
    for chapter, name, fn in entries:
        try:
            if mutate == name:
                _run_mutated(fn)
            else:
                fn()
            ok = True
        except Exception as e:
            ok = False
            failures.append((chapter, name, str(e)[:200]))
        by_chapter.setdefault(chapter, []).append(ok)
    return CorpusSummary(
        total=len(entries),
        passed=sum(sum(v) for v in by_chapter.values()),
        by_chapter={k: (sum(v), len(v)) for k, v in sorted(by_chapter.items())},
        failures=failures,
    )


def _run_mutated(fn) -> None:
    """Run a corpus item with the builder's rule checking sabotaged, so the
    first ASSM line it emits is corrupted and the kernel re-check fails."""
    from . import tactics
    from .kernel import KernelError

    original = tactics.apply_rule

    def broken(app, premises):
        concl = original(app, premises)
        if app.rule == "ASSM":
            raise KernelError("ASSM: mutated for the negative control")
        return concl

    tactics.apply_rule = broken
    try:
        fn()
    finally:
        tactics.apply_rule = original
