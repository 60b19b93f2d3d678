"""Sub(X) as a Boolean lattice of representative formulas.

Representatives are formulas over the ambient's free variables, compared by
mutual provable implication; the lattice operations and the pullback
homomorphism ship certificates generated from the quoted derivations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .category import (
    CategoryError,
    F1,
    F2,
    MF1,
    MF2,
    Premorphism,
    SynObject,
    Theory,
    Verdict,
    felim_hyp,
    ids_conj,
    neg_slots,
    pos_slots,
    t2_at,
)
from .category import _fresh_block
from .formulas import (
    Eq,
    Exists,
    FV,
    Formula,
    Not,
    Or,
    and_,
    big_and,
    close,
    e_of,
    exists_many,
    free_vars,
    nonempty,
    subst_simul,
)
from .kernel import Derivation, Sequent, check_derivation
from .limits import _try_implication, factorize
from .tactics import Builder, EquivCert, prop_taut

NOT_E = nonempty()


class SubobjectError(Exception):
    pass


@dataclass(frozen=True)
class SubRep:
    """A subobject representative: T(, not E) proves rep -> ambient."""

    theory: Theory
    ambient: SynObject
    rep: Formula
    inclusion: Derivation

    @property
    def sentence_case(self) -> bool:
        return self.ambient.is_sentence

    def verify(self) -> None:
        if not free_vars(self.rep) <= set(self.ambient.enumeration):
            raise SubobjectError("representative has stray free variables")
        concl = check_derivation(self.inclusion)
        if concl.rhs != self.ambient.formula:
            raise SubobjectError("inclusion proves the wrong target")
        allowed = self.theory.allowed | {self.rep}
        if not self.sentence_case:
            allowed = allowed | {NOT_E}
        if not concl.lhs <= allowed:
            raise SubobjectError("inclusion uses illegal hypotheses")


def _incl(theory: Theory, ambient: SynObject, rep: Formula, line_fn) -> SubRep:
    b = Builder()
    line = line_fn(b)
    sub = SubRep(theory, ambient, rep, b.build(line))
    sub.verify()
    return sub


def sub_of(theory: Theory, ambient: SynObject, rep: Formula, inclusion: Derivation) -> SubRep:
    sub = SubRep(theory, ambient, rep, inclusion)
    sub.verify()
    return sub


def sub_top(theory: Theory, ambient: SynObject) -> SubRep:
    def build(b: Builder) -> int:
        hyps = {ambient.formula} if ambient.is_sentence else {ambient.formula, NOT_E}
        return b.assume(hyps, ambient.formula)

    return _incl(theory, ambient, ambient.formula, build)


def sub_bottom(theory: Theory, ambient: SynObject) -> SubRep:
    if ambient.is_sentence:
        # the contradictory sentence exists x (not x = x)
        w = 0
        rep = close(Not(Eq(FV(w), FV(w))), w)

        def build(b: Builder) -> int:
            lit = Not(Eq(FV(3), FV(3)))
            neg = b.assume({lit}, lit)
            pos = b.ant(b.identity(3), {lit})
            blown = b.exp(pos, neg, ambient.formula)
            return b.exa(blown, rep, 3)

        return _incl(theory, ambient, rep, build)
    rep = Not(e_of(ambient.enumeration))

    def build(b: Builder) -> int:
        hyps = frozenset({rep, NOT_E})
        pos = b.ant(ids_conj(b, [(v, v) for v in ambient.enumeration]), hyps)
        neg = b.assume(hyps, rep)
        return b.exp(pos, neg, ambient.formula)

    return _incl(theory, ambient, rep, build)


def _same_ambient(a: SubRep, b: SubRep) -> None:
    if a.ambient.formula != b.ambient.formula:
        raise SubobjectError("subobjects live over different ambients")


def sub_join(a: SubRep, b: SubRep) -> SubRep:
    _same_ambient(a, b)
    rep = Or(a.rep, b.rep)

    def build(bb: Builder) -> int:
        la = bb.splice(a.inclusion)
        lb = bb.splice(b.inclusion)
        gamma = (bb.seq(la).lhs - {a.rep}) | (bb.seq(lb).lhs - {b.rep})
        return bb.lor(
            rep, bb.ant(la, gamma | {a.rep}), bb.ant(lb, gamma | {b.rep}), gamma=gamma
        )

    return _incl(a.theory, a.ambient, rep, build)


def sub_meet(a: SubRep, b: SubRep) -> SubRep:
    _same_ambient(a, b)
    rep = and_(a.rep, b.rep)

    def build(bb: Builder) -> int:
        hyps = {rep} | (set() if a.sentence_case else {NOT_E})
        start = bb.assume(hyps, rep)
        left = bb.sdrop(start, keep_left=True)
        return bb.chain(left, bb.splice(a.inclusion))

    return _incl(a.theory, a.ambient, rep, build)


def sub_complement(a: SubRep) -> SubRep:
    rep = and_(a.ambient.formula, Not(a.rep))

    def build(bb: Builder) -> int:
        hyps = {rep} | (set() if a.sentence_case else {NOT_E})
        return bb.sdrop(bb.assume(hyps, rep), keep_left=True)

    return _incl(a.theory, a.ambient, rep, build)


@dataclass
class LeqResult:
    verdict: Verdict
    cert: Derivation | None = None
    countermodel: object = None


def sub_leq(a: SubRep, b: SubRep, oracle_size: int = 2) -> LeqResult:
    """Certified / refuted / unknown, via provable implication."""
    _same_ambient(a, b)
    cert = _try_implication(a.theory, a.rep, b.rep, sentences=a.sentence_case)
    if cert is not None:
        return LeqResult(Verdict.EQUAL, cert)
    cert = _leq_by_taut(a, b)
    if cert is not None:
        return LeqResult(Verdict.EQUAL, cert)
    counter = _leq_countermodel(a, b, oracle_size)
    if counter is not None:
        return LeqResult(Verdict.REFUTED, countermodel=counter)
    return LeqResult(Verdict.UNKNOWN)


def _leq_by_taut(a: SubRep, b: SubRep) -> Derivation | None:
    bb = Builder()
    try:
        line = prop_taut(bb, [a.rep], b.rep)
    except Exception:
        return None
    return bb.build(line)


def _leq_countermodel(a: SubRep, b: SubRep, oracle_size: int):
    from .semantics import enumerate_structures, eval_set, expand, is_model

    for m in enumerate_structures(a.theory.sig, oracle_size):
        if m.size == 0 or not is_model(m, a.theory.axioms):
            continue
        vs = tuple(sorted(set(a.ambient.enumeration)))
        ra = expand(eval_set(m, a.rep), vs, m.size)
        rb = expand(eval_set(m, b.rep), vs, m.size)
        if not ra <= rb:
            return m
    return None


def leq_cert_join_left(a: SubRep, b: SubRep) -> Derivation:
    """a <= a v b."""
    bb = Builder()
    hyps = {a.rep} | (set() if a.sentence_case else {NOT_E})
    return bb.build(bb.ror_a(bb.assume(hyps, a.rep), b.rep))


def leq_cert_join_lub(a: SubRep, b: SubRep, c: SubRep, ca: Derivation, cb: Derivation) -> Derivation:
    """From a <= c and b <= c conclude a v b <= c."""
    bb = Builder()
    la = bb.splice(ca)
    lb = bb.splice(cb)
    gamma = (bb.seq(la).lhs - {a.rep}) | (bb.seq(lb).lhs - {b.rep})
    out = bb.lor(
        Or(a.rep, b.rep), bb.ant(la, gamma | {a.rep}), bb.ant(lb, gamma | {b.rep}), gamma=gamma
    )
    return bb.build(out)


def leq_cert_meet_glb(a: SubRep, b: SubRep, c: SubRep, ca: Derivation, cb: Derivation) -> Derivation:
    """From c <= a and c <= b conclude c <= a /\\ b."""
    bb = Builder()
    la = bb.splice(ca)
    lb = bb.splice(cb)
    union = bb.seq(la).lhs | bb.seq(lb).lhs
    return bb.build(bb.r_conj(bb.ant(la, union), bb.ant(lb, union)))


def leq_cert_bottom(bottom: SubRep, x: SubRep) -> Derivation:
    """bottom <= anything, by explosion."""
    bb = Builder()
    if bottom.sentence_case:
        w = _fresh_block(1, bottom.rep, x.rep)[0]
        lit = Not(Eq(FV(w), FV(w)))
        neg = bb.assume({lit}, lit)
        pos = bb.ant(bb.identity(w), {lit})
        blown = bb.exp(pos, neg, x.rep)
        return bb.build(bb.exa(blown, bottom.rep, w))
    hyps = frozenset({bottom.rep, NOT_E})
    pos = bb.ant(ids_conj(bb, [(v, v) for v in bottom.ambient.enumeration]), hyps)
    neg = bb.assume(hyps, bottom.rep)
    return bb.build(bb.exp(pos, neg, x.rep))


def lattice_equiv_by_taut(theory: Theory, a: Formula, b: Formula, sentence_case: bool) -> EquivCert:
    """Mutual implication by propositional reasoning over opaque atoms
    (commutativity, associativity, absorption, distributivity)."""
    extra = set() if sentence_case else {NOT_E}
    bf = Builder()
    fwd = bf.build(bf.ant(prop_taut(bf, [a], b), {a} | extra))
    bb = Builder()
    bwd = bb.build(bb.ant(prop_taut(bb, [b], a), {b} | extra))
    return EquivCert(a, b, fwd, bwd)


def complement_join_cert(a: SubRep) -> EquivCert:
    """a v (Pi /\\ not a) == Pi."""
    comp = and_(a.ambient.formula, Not(a.rep))
    lhs = Or(a.rep, comp)
    pi = a.ambient.formula
    extra = set() if a.sentence_case else {NOT_E}

    bf = Builder()
    la = bf.splice(a.inclusion)
    gamma = (bf.seq(la).lhs - {a.rep}) | extra
    right = bf.sdrop(bf.assume(gamma | {comp}, comp), keep_left=True)
    out = bf.lor(lhs, bf.ant(la, gamma | {a.rep}), right, gamma=gamma)
    fwd = bf.build(out)

    bb = Builder()
    hyps = frozenset({pi}) | extra
    pos = bb.ror_a(bb.assume(hyps | {a.rep}, a.rep), comp)
    pair = bb.r_conj(bb.assume(hyps | {Not(a.rep)}, pi), bb.assume(hyps | {Not(a.rep)}, Not(a.rep)))
    neg = bb.ror_b(pair, a.rep)
    bwd = bb.build(bb.pc(a.rep, pos, neg, gamma=hyps))
    return EquivCert(lhs, pi, fwd, bwd)


def complement_meet_cert(a: SubRep, bottom: SubRep) -> EquivCert:
    """a /\\ (Pi /\\ not a) == bottom."""
    comp = and_(a.ambient.formula, Not(a.rep))
    lhs = and_(a.rep, comp)
    extra = set() if a.sentence_case else {NOT_E}

    bf = Builder()
    hyps = frozenset({lhs}) | extra
    start = bf.assume(hyps, lhs)
    a_line = bf.sdrop(start, keep_left=True)
    na_line = bf.sdrop(bf.sdrop(start, keep_left=False), keep_left=False)
    fwd = bf.build(bf.exp(a_line, na_line, bottom.rep))

    bb = Builder()
    out = bb.splice(leq_cert_bottom(bottom, sub_of(a.theory, a.ambient, lhs, _meet_incl(a, comp, lhs))))
    bwd = bb.build(out)
    return EquivCert(lhs, bottom.rep, fwd, bwd)


def _meet_incl(a: SubRep, comp: Formula, lhs: Formula) -> Derivation:
    bb = Builder()
    hyps = {lhs} | (set() if a.sentence_case else {NOT_E})
    start = bb.assume(hyps, lhs)
    left = bb.sdrop(start, keep_left=True)
    return bb.build(bb.chain(left, bb.splice(a.inclusion)))


# ---------------------------------------------------------------------------
# Canonical subobject of a monomorphism


def canonical_subobject(m: Premorphism) -> SubRep:
    """Im m as a subobject of the target."""
    fac = factorize(m)
    theory = m.theory
    ambient = m.tgt
    if ambient.is_sentence:
        b = Builder()
        if fac.mono.ptype == 4:
            line = b.splice(fac.mono.cert("T4"))
        else:
            raise SubobjectError("unexpected mono type for sentence ambient")
        return sub_of(theory, ambient, fac.image.formula, b.build(line))

    def build(b: Builder) -> int:
        n = fac.image.arity
        if fac.mono.ptype != 1:
            raise SubobjectError("unexpected mono type")
        # open the image, use F1 of the original morphism
        img = fac.image.formula
        if isinstance(img, Exists):
            mfresh = _fresh_block(m.src.arity, img, m.payload or ambient.formula)
            opened = m.at(mfresh, list(ambient.enumeration))
            sub = b.assume({opened, NOT_E}, opened)
            f1 = felim_hyp(b, m, F1, mfresh + list(ambient.enumeration))
            got = b.sdrop(b.chain(sub, f1), keep_left=False)
            return b.exa_multi(got, opened, mfresh)
        hyps = {img, NOT_E}
        start = b.assume(hyps, img)
        name = F1 if m.ptype == 1 else MF1
        targets = (list(ambient.enumeration) if m.ptype == 1 else []) + list(
            ambient.enumeration
        )
        if m.ptype == 3:
            f1 = felim_hyp(b, m, MF1, list(ambient.enumeration))
            return b.sdrop(b.chain(start, f1), keep_left=False)
        raise SubobjectError("unsupported mono shape")

    return _incl(theory, ambient, fac.image.formula, build)


# ---------------------------------------------------------------------------
# The pullback homomorphism


def pullback_hom(f: Premorphism, s: SubRep) -> SubRep:
    """f^{-1}(s) as a subobject of dom f, per the four type recipes."""
    if s.ambient.formula != f.tgt.formula:
        raise SubobjectError("subobject must live over the codomain")
    theory = f.theory
    if f.ptype == 1:
        n, l = f.src.arity, f.tgt.arity
        m_block = _fresh_block(l, f.payload, s.rep)
        phi_m = subst_simul(s.rep, m_block, list(s.ambient.enumeration)) if s.ambient.enumeration else s.rep
        theta_m = f.at(list(f.src.enumeration), m_block)
        rep = exists_many(m_block, and_(phi_m, theta_m))

        def build(b: Builder) -> int:
            hyps = frozenset({and_(phi_m, theta_m), NOT_E})
            start = b.assume(hyps, and_(phi_m, theta_m))
            th = b.sdrop(start, keep_left=False)
            f1 = felim_hyp(b, f, F1, list(f.src.enumeration) + m_block)
            got = b.sdrop(b.chain(th, f1), keep_left=True)
            return b.exa_multi(got, and_(phi_m, theta_m), m_block)

        return _incl(theory, f.src, rep, build)
    if f.ptype == 2:
        rep = and_(f.src.formula, s.rep)

        def build(b: Builder) -> int:
            hyps = frozenset({rep, NOT_E})
            return b.sdrop(b.assume(hyps, rep), keep_left=True)

        return _incl(theory, f.src, rep, build)
    if f.ptype == 3:
        l = f.tgt.arity
        x_block = _fresh_block(l, f.payload, s.rep)
        phi_x = subst_simul(s.rep, x_block, list(s.ambient.enumeration))
        theta_x = f.at([], x_block)
        rep = exists_many(x_block, and_(phi_x, theta_x))

        def build(b: Builder) -> int:
            hyps = frozenset({and_(phi_x, theta_x)})
            start = b.assume(hyps, and_(phi_x, theta_x))
            th = b.sdrop(start, keep_left=False)
            mf1 = felim_hyp(b, f, MF1, x_block)
            got = b.sdrop(b.chain(th, mf1), keep_left=True)
            got = b.consume_not_e(got, exists_many(x_block, and_(phi_x, theta_x))) if False else got
            out = b.exa_multi(got, and_(phi_x, theta_x), x_block)
            return b.consume_not_e(out, rep)

        return _incl(theory, f.src, rep, build)
    rep = and_(f.src.formula, s.rep)

    def build(b: Builder) -> int:
        return b.sdrop(b.assume({rep}, rep), keep_left=True)

    return _incl(theory, f.src, rep, build)


def pullback_join_cert(f: Premorphism, a: SubRep, b: SubRep) -> EquivCert:
    """(*a): f^-1(a) v f^-1(b) == f^-1(a v b)."""
    fa, fb = pullback_hom(f, a), pullback_hom(f, b)
    fab = pullback_hom(f, sub_join(a, b))
    lhs = Or(fa.rep, fb.rep)
    if f.ptype in (2, 4):
        return lattice_equiv_by_taut(f.theory, lhs, fab.rep, f.ptype == 4)
    m_block, phi_parts, theta_m = _pullback_pieces(f, [a, b])
    a_m, b_m = phi_parts
    extra = set() if f.ptype == 3 and False else {NOT_E}

    bf = Builder()  # lhs => fab.rep
    branches = []
    for which, rep_m in ((fa, a_m), (fb, b_m)):
        hyps = frozenset({and_(rep_m, theta_m), NOT_E})
        start = bf.assume(hyps, and_(rep_m, theta_m))
        part = bf.sdrop(start, keep_left=True)
        injected = bf.ror_a(part, b_m) if which is fa else bf.ror_b(part, a_m)
        pair = bf.r_conj(injected, bf.sdrop(start, keep_left=False))
        closed = bf.exs_multi(pair, fab.rep, m_block)
        branches.append(bf.exa_multi(closed, and_(rep_m, theta_m), m_block))
    gamma = (bf.seq(branches[0]).lhs - {fa.rep}) | (bf.seq(branches[1]).lhs - {fb.rep})
    fwd_line = bf.lor(
        lhs,
        bf.ant(branches[0], gamma | {fa.rep}),
        bf.ant(branches[1], gamma | {fb.rep}),
        gamma=gamma,
    )
    fwd = bf.build(fwd_line)

    bb = Builder()  # fab.rep => lhs
    hyps = frozenset({and_(Or(a_m, b_m), theta_m), NOT_E})
    start = bb.assume(hyps, and_(Or(a_m, b_m), theta_m))
    or_line = bb.sdrop(start, keep_left=True)
    th_line = bb.sdrop(start, keep_left=False)
    gamma_in = hyps | {Or(a_m, b_m)}
    left_in = bb.r_conj(bb.assume(hyps | {a_m}, a_m), bb.ant(th_line, hyps | {a_m}))
    left = bb.ror_a(bb.exs_multi(left_in, fa.rep, m_block), fb.rep)
    right_in = bb.r_conj(bb.assume(hyps | {b_m}, b_m), bb.ant(th_line, hyps | {b_m}))
    right = bb.ror_b(bb.exs_multi(right_in, fb.rep, m_block), fa.rep)
    joined = bb.lor(Or(a_m, b_m), left, right, gamma=hyps | {NOT_E})
    consumed = bb.chain(or_line, joined)
    out = bb.exa_multi(consumed, and_(Or(a_m, b_m), theta_m), m_block)
    bwd = bb.build(out)
    return EquivCert(lhs, fab.rep, fwd, bwd)


def _pullback_pieces(f: Premorphism, subs: Sequence[SubRep]):
    l = f.tgt.arity
    reps = [s.rep for s in subs]
    m_block = _fresh_block(l, f.payload, *reps)
    parts = [
        subst_simul(r, m_block, list(subs[0].ambient.enumeration)) for r in reps
    ]
    if f.ptype == 1:
        theta_m = f.at(list(f.src.enumeration), m_block)
    else:
        theta_m = f.at([], m_block)
    return m_block, parts, theta_m


def pullback_meet_cert(f: Premorphism, a: SubRep, b: SubRep) -> EquivCert:
    """(*b): f^-1(a) /\\ f^-1(b) == f^-1(a /\\ b), via Extraction."""
    from .category import extraction

    fa, fb = pullback_hom(f, a), pullback_hom(f, b)
    fab = pullback_hom(f, sub_meet(a, b))
    lhs = and_(fa.rep, fb.rep)
    if f.ptype in (2, 4):
        return lattice_equiv_by_taut(f.theory, lhs, fab.rep, f.ptype == 4)
    m_block, (a_m, b_m), theta_m = _pullback_pieces(f, [a, b])
    src_enum = list(f.src.enumeration) if f.ptype == 1 else []

    bb = Builder()  # fab.rep => lhs (the easy half)
    hyps = frozenset({and_(and_(a_m, b_m), theta_m), NOT_E})
    start = bb.assume(hyps, and_(and_(a_m, b_m), theta_m))
    pair_line = bb.sdrop(start, keep_left=True)
    th_line = bb.sdrop(start, keep_left=False)
    left_pair = bb.r_conj(bb.sdrop(pair_line, keep_left=True), th_line)
    right_pair = bb.r_conj(bb.sdrop(pair_line, keep_left=False), th_line)
    la = bb.exs_multi(left_pair, fa.rep, m_block)
    lb = bb.exs_multi(right_pair, fb.rep, m_block)
    both = bb.r_conj(la, lb)
    bwd = bb.build(bb.exa_multi(both, and_(and_(a_m, b_m), theta_m), m_block))

    bf = Builder()  # lhs => fab.rep, via extraction on theta
    w_block = _fresh_block(f.tgt.arity, f.payload, a.rep, b.rep, *m_block)
    k_block = _fresh_block(f.tgt.arity, f.payload, a.rep, b.rep, *m_block, *w_block)
    hyps = frozenset({and_(a_m, theta_m), fb.rep, NOT_E})
    start = bf.assume(hyps, and_(a_m, theta_m))
    a_line = bf.sdrop(start, keep_left=True)
    th_line = bf.sdrop(start, keep_left=False)
    gamma_b = subst_simul(b.rep, k_block, list(b.ambient.enumeration))
    ext = extraction(
        bf, f, gamma_b, src_enum, m_block, k_block, w_block
    )
    fb_shape = exists_many(w_block, and_(f.at(src_enum, w_block), subst_simul(b.rep, w_block, list(b.ambient.enumeration))))
    # fb.rep and fb_shape agree up to the conjunct order inside the pair
    swap = _swap_pair_cert(bf, fb.rep, fb_shape, m_block if False else w_block)
    fb_line = bf.chain(bf.assume(hyps, fb.rep), swap)
    pair2 = bf.r_conj(th_line, fb_line)
    b_at_m = bf.chain(pair2, bf.meta_b(ext))
    triple = bf.r_conj(bf.r_conj(a_line, b_at_m), bf.ant(th_line, bf.seq(b_at_m).lhs))
    closed = bf.exs_multi(triple, fab.rep, m_block)
    out = bf.exa_multi(closed, and_(a_m, theta_m), m_block)
    out = bf.unload(out, exists_many(m_block, and_(a_m, theta_m)), fb.rep) if False else out
    fwd_inner = out
    # assemble the conjunction hypothesis
    outer = bf.assume({lhs, NOT_E}, lhs)
    fa_line = bf.sdrop(outer, keep_left=True)
    fb_outer = bf.sdrop(outer, keep_left=False)
    chained = bf.chain(fb_outer, bf.chain(fa_line, fwd_inner))
    fwd = bf.build(chained)
    return EquivCert(lhs, fab.rep, fwd, bwd)


def _swap_pair_cert(b: Builder, src_pair: Formula, tgt_pair: Formula, block) -> int:
    """Line {src_pair(, not E)} => tgt_pair where both are exists-closed
    two-conjunct forms with the conjuncts swapped."""
    if src_pair == tgt_pair:
        return b.assume({src_pair}, src_pair)
    match src_pair:
        case Exists(_):
            pass
        case _:
            raise SubobjectError("swap expects existential pairs")
    names = _fresh_block(len(block), src_pair, tgt_pair)
    inner = src_pair
    for v in names:
        from .formulas import open_exists

        inner = open_exists(inner, v)
    pair = inner
    hyps = frozenset({pair, NOT_E})
    start = b.assume(hyps, pair)
    swapped = b.r_conj(b.sdrop(start, keep_left=False), b.sdrop(start, keep_left=True))
    closed = b.exs_multi(swapped, tgt_pair, names)
    return b.exa_multi(closed, pair, names)


def pullback_top_cert(f: Premorphism) -> EquivCert:
    """(*c): f^-1(top) == top, per the F1/F2 display."""
    top_tgt = sub_top(f.theory, f.tgt)
    ftop = pullback_hom(f, top_tgt)
    top_src = sub_top(f.theory, f.src).rep
    if f.ptype in (2, 4):
        bf = Builder()
        hyps = {ftop.rep} | ({NOT_E} if f.ptype == 2 else set())
        fwd = bf.build(bf.sdrop(bf.assume(hyps, ftop.rep), keep_left=True))
        bb = Builder()
        if f.ptype == 2:
            t2 = t2_at(bb, f, list(f.src.enumeration))
            pair = bb.r_conj(bb.assume(bb.seq(t2).lhs, top_src), t2)
        else:
            t4 = bb.splice(f.cert("T4"))
            pair = bb.r_conj(bb.assume(bb.seq(t4).lhs, top_src), t4)
        bwd = bb.build(pair)
        return EquivCert(ftop.rep, top_src, fwd, bwd)
    m_block, (pi_m,), theta_m = _pullback_pieces(f, [top_tgt])
    src_enum = list(f.src.enumeration) if f.ptype == 1 else []
    name = F1 if f.ptype == 1 else MF1

    bf = Builder()  # ftop.rep => top_src
    hyps = frozenset({and_(pi_m, theta_m), NOT_E})
    start = bf.assume(hyps, and_(pi_m, theta_m))
    th = bf.sdrop(start, keep_left=False)
    f1 = felim_hyp(bf, f, name, src_enum + m_block)
    got = bf.sdrop(bf.chain(th, f1), keep_left=True)
    out = bf.exa_multi(got, and_(pi_m, theta_m), m_block)
    if f.ptype == 3:
        out = bf.consume_not_e(out, ftop.rep)
    fwd = bf.build(out)

    bb = Builder()  # top_src => ftop.rep
    hyps2 = frozenset({top_src, NOT_E})
    if f.ptype == 1:
        f2 = felim_hyp(bb, f, F2, src_enum)
        tot = bb.chain(bb.assume(hyps2, top_src), f2)
    else:
        tot = bb.chain(bb.assume({top_src}, top_src), bb.splice(f.cert(MF2)))
    inner_hyps = frozenset({theta_m, NOT_E})
    th_line = bb.assume(inner_hyps, theta_m)
    f1b = felim_hyp(bb, f, name, src_enum + m_block)
    pi_line = bb.sdrop(bb.chain(th_line, f1b), keep_left=False)
    pair = bb.r_conj(pi_line, bb.ant(th_line, bb.seq(pi_line).lhs))
    closed = bb.exs_multi(pair, ftop.rep, m_block)
    opened = bb.exa_multi(closed, theta_m, m_block)
    if f.ptype == 3:
        opened = bb.consume_not_e(opened, exists_many(m_block, theta_m))
    bwd = bb.build(bb.chain(tot, opened))
    return EquivCert(ftop.rep, top_src, fwd, bwd)


def pullback_bottom_cert(f: Premorphism) -> EquivCert:
    """(*d): f^-1(bottom) == bottom, both sides contradictory."""
    bot_tgt = sub_bottom(f.theory, f.tgt)
    fbot = pullback_hom(f, bot_tgt)
    bot_src = sub_bottom(f.theory, f.src)
    if f.ptype in (2, 4):
        extra = {NOT_E} if f.ptype == 2 else set()
        bf = Builder()
        start = bf.assume({fbot.rep} | extra, fbot.rep)
        dropped = bf.sdrop(start, keep_left=False)
        blow = bf.chain(dropped, bf.splice(leq_cert_bottom(bot_tgt, _as_sub(f, bot_src.rep))))
        fwd = bf.build(blow)
        bb = Builder()
        bwd_line = bb.splice(leq_cert_bottom(bot_src, _as_sub_src(f, fbot.rep)))
        bwd = bb.build(bwd_line)
        return EquivCert(fbot.rep, bot_src.rep, fwd, bwd)
    m_block, (bot_m,), theta_m = _pullback_pieces(f, [bot_tgt])
    bf = Builder()
    hyps = frozenset({and_(bot_m, theta_m), NOT_E})
    start = bf.assume(hyps, and_(bot_m, theta_m))
    bot_line = bf.sdrop(start, keep_left=True)
    if bot_tgt.sentence_case:
        raise SubobjectError("unexpected sentence bottom over nonsentence ambient")
    ev_m = ids_conj(bf, [(v, v) for v in _mvars(bot_m)])
    blown = bf.exp(bf.ant(ev_m, hyps), bot_line, bot_src.rep)
    out = bf.exa_multi(blown, and_(bot_m, theta_m), m_block)
    if f.ptype == 3:
        out = bf.consume_not_e(out, fbot.rep)
    fwd = bf.build(out)
    bb = Builder()
    bwd = bb.build(bb.splice(leq_cert_bottom(bot_src, _as_sub_src(f, fbot.rep))))
    return EquivCert(fbot.rep, bot_src.rep, fwd, bwd)


def _mvars(bot_m: Formula) -> list[int]:
    match bot_m:
        case Not(inner):
            return sorted(free_vars(inner))
    return sorted(free_vars(bot_m))


def _as_sub(f: Premorphism, rep: Formula) -> SubRep:
    return SubRep(f.theory, f.tgt, rep, Derivation(()))


def _as_sub_src(f: Premorphism, rep: Formula) -> SubRep:
    return SubRep(f.theory, f.src, rep, Derivation(()))
