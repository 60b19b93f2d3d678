"""Fiber products, products, mediators, image factorization, effective
epimorphisms, stability, and the substitution square.

Construction formulas follow the case tables exactly; every commutation,
mediation, factorization and stability claim ships kernel certificates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .category import (
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
    cert_half_at,
    compose,
    extraction,
    felim_hyp,
    formal_type2,
    formal_type4,
    identity_of,
    ids_conj,
    mk_special,
    morphism_equal,
    neg_slots,
    payload_equal_cert,
    pos_slots,
    reduced_payload,
    shifted_slots,
    t2_at,
    verify_premorphism,
)
from .category import _fresh_block
from .formulas import (
    Eq,
    FV,
    Formula,
    and_,
    big_and,
    conjuncts,
    exists_many,
    free_vars,
    nonempty,
    slot_instantiate,
    subst_simul,
    validity,
)
from .kernel import Derivation, check_derivation
from .normalize import _derive_conjunct, normalize, subsume_cert
from .tactics import Builder, EquivCert, cert_chain, cert_refl

NOT_E = nonempty()


class LimitsError(Exception):
    pass


def formulas_equal_cert(a: Formula, b: Formula) -> EquivCert | None:
    """Certify a == b when normalization (plus subsumption) identifies them."""
    if a == b:
        return cert_refl(a)
    na, ca = normalize(a)
    nb, cb = normalize(b)
    if na == nb:
        return cert_chain([ca, cb.flip()])
    sa, csa = subsume_cert(na)
    sb, csb = subsume_cert(nb)
    if sa == sb:
        return cert_chain([ca, csa, cert_chain([cb, csb]).flip()])
    return None


@dataclass
class PullbackSquare:
    case: int
    apex: SynObject
    pi_alpha: Premorphism  # apex -> dom(theta_alpha)
    pi_beta: Premorphism  # apex -> dom(theta_beta)
    theta_alpha: Premorphism
    theta_beta: Premorphism
    commutation: EquivCert | None  # None when both composites are formal
    reduction: dict = field(default_factory=dict)  # iso-reduction witnesses

    def verify(self) -> None:
        self.pi_alpha.verify()
        self.pi_beta.verify()
        ca = compose(self.theta_alpha, self.pi_alpha)
        cb = compose(self.theta_beta, self.pi_beta)
        if ca.is_formal and cb.is_formal:
            assert self.commutation is None
            return
        fa = check_derivation(self.commutation.fwd)
        allowed = self.pi_alpha.theory.allowed
        assert fa.rhs == cb.payload and fa.lhs <= allowed | {NOT_E, ca.payload}
        ba = check_derivation(self.commutation.bwd)
        assert ba.rhs == ca.payload and ba.lhs <= allowed | {NOT_E, cb.payload}


def fiber_product(theta_alpha: Premorphism, theta_beta: Premorphism) -> PullbackSquare:
    if theta_alpha.tgt.formula != theta_beta.tgt.formula:
        raise LimitsError("fiber product needs a common target")
    key = (theta_alpha.ptype, theta_beta.ptype)
    if key == (1, 1):
        return _case0(theta_alpha, theta_beta)
    if key == (2, 2):
        return _case1_product(theta_alpha, theta_beta)
    if key == (2, 4):
        return _case2_mixed(theta_alpha, theta_beta, flipped=False)
    if key == (4, 2):
        return _case2_mixed(theta_beta, theta_alpha, flipped=True)
    if key == (4, 4):
        return _case3_sentences(theta_alpha, theta_beta)
    if key == (1, 3):
        return _case4_reduce(theta_alpha, theta_beta, flipped=False)
    if key == (3, 1):
        return _case4_reduce(theta_beta, theta_alpha, flipped=True)
    if key == (3, 3):
        return _case5_reduce(theta_alpha, theta_beta)
    raise LimitsError(f"no fiber product case for types {key}")


# -- Case 0: two type-1 legs --------------------------------------------------


def _special_to(theory, apex, tgt, var_map, imp_line_fn) -> Premorphism:
    b = Builder()
    line = imp_line_fn(b)
    return mk_special(theory, apex, tgt, var_map, imp_cert=b.build(line))


def _case0(ta: Premorphism, tb: Premorphism) -> PullbackSquare:
    theory = ta.theory
    alpha, beta, gamma = ta.src, tb.src, ta.tgt
    n, m, l = alpha.arity, beta.arity, gamma.arity
    t_block = _fresh_block(
        n + m, ta.payload, tb.payload, alpha.formula, beta.formula, gamma.formula
    )
    w_block = _fresh_block(l, ta.payload, tb.payload, *t_block)
    matrix = and_(ta.at(t_block[:n], w_block), tb.at(t_block[n:], w_block))
    fp = SynObject(exists_many(w_block, matrix))
    if fp.enumeration != tuple(t_block):
        raise LimitsError("FP is missing coordinates; saturate the legs with full_rep")

    def proj_imp(leg, block_part, keep_left):
        def build(b: Builder) -> int:
            sub = b.assume({matrix, NOT_E}, matrix)
            th = b.sdrop(sub, keep_left=keep_left)
            f1 = felim_hyp(b, leg, F1, block_part + w_block)
            got = b.sdrop(b.chain(th, f1), keep_left=True)
            return b.exa_multi(got, matrix, w_block)

        return build

    pi_alpha = _special_to(
        theory,
        fp,
        alpha,
        {v: t_block[i] for i, v in enumerate(alpha.enumeration)},
        proj_imp(ta, t_block[:n], True),
    )
    pi_beta = _special_to(
        theory,
        fp,
        beta,
        {v: t_block[n + j] for j, v in enumerate(beta.enumeration)},
        proj_imp(tb, t_block[n:], False),
    )
    commutation = _case0_commutation(ta, tb, fp, t_block, w_block)
    sq = PullbackSquare(0, fp, pi_alpha, pi_beta, ta, tb, None)
    sq.commutation = cert_chain(
        [
            _projection_then_leg_cert(sq, "alpha"),
            commutation,
            _projection_then_leg_cert(sq, "beta").flip(),
        ]
    )
    return sq


def _projection_then_leg_cert(sq: PullbackSquare, side: str) -> EquivCert:
    """compose(theta, pi) == the closed form FP(x_-s) /\\ theta(picked, x_k)."""
    leg = sq.theta_alpha if side == "alpha" else sq.theta_beta
    pi = sq.pi_alpha if side == "alpha" else sq.pi_beta
    n = sq.theta_alpha.src.arity
    m = sq.theta_beta.src.arity
    l = leg.tgt.arity
    comp = compose(leg, pi)
    picked = neg_slots(n) if side == "alpha" else [-(n + j) for j in pos_slots(m)]
    mid = and_(sq.apex.at(neg_slots(n + m)), leg.at(picked, pos_slots(l)))
    cert = formulas_equal_cert(comp.payload, mid)
    if cert is None:
        raise LimitsError("internal: projection composite did not reach the closed form")
    return cert


def _case0_commutation(ta, tb, fp, t_block, w_block) -> EquivCert:
    """FP /\\ theta_a(x_-i, x_k) == FP /\\ theta_b(x_-(n+j), x_k), via Extraction."""
    n, m, l = ta.src.arity, tb.src.arity, ta.tgt.arity
    fp_neg = fp.at(neg_slots(n + m))
    a_negs = neg_slots(n)
    b_negs = [-(n + j) for j in pos_slots(m)]
    th_a_out = ta.at(a_negs, pos_slots(l))
    th_b_out = tb.at(b_negs, pos_slots(l))
    mid_a = and_(fp_neg, th_a_out)
    mid_b = and_(fp_neg, th_b_out)

    def across(theta_here, theta_there, mid_here, here_negs, there_negs):
        b = Builder()
        hyps = frozenset({mid_here, NOT_E})
        start = b.assume(hyps, mid_here)
        fp_line = b.sdrop(start, keep_left=True)
        th_line = b.sdrop(start, keep_left=False)
        k_block = _fresh_block(l, fp_neg, theta_here.payload, theta_there.payload)
        w2 = _fresh_block(l, fp_neg, theta_here.payload, theta_there.payload, *k_block)
        gamma_f = theta_there.at(there_negs, k_block)
        ext = extraction(b, theta_here, gamma_f, here_negs, pos_slots(l), k_block, w2)
        th_here_w = theta_here.at(here_negs, w2)
        th_there_w = theta_there.at(there_negs, w2)
        ex_pair = exists_many(w2, and_(th_here_w, th_there_w))
        if ex_pair != fp_neg:
            # reorder the FP matrix to the extraction's orientation
            fp_matrix = and_(th_there_w, th_here_w)
            sub = b.assume({fp_matrix, NOT_E}, fp_matrix)
            swapped = b.r_conj(b.sdrop(sub, keep_left=False), b.sdrop(sub, keep_left=True))
            closed = b.exs_multi(swapped, ex_pair, w2)
            reordered = b.exa_multi(closed, fp_matrix, w2)
            fp_for_ext = b.chain(fp_line, reordered)
        else:
            fp_for_ext = fp_line
        pair = b.r_conj(th_line, b.ant(fp_for_ext, b.seq(th_line).lhs | b.seq(fp_for_ext).lhs))
        other = b.chain(pair, b.meta_b(ext))
        final = b.r_conj(b.ant(fp_line, b.seq(other).lhs), other)
        return b.build(final)

    fwd = across(ta, tb, mid_a, a_negs, b_negs)
    bwd = across(tb, ta, mid_b, b_negs, a_negs)
    return EquivCert(mid_a, mid_b, fwd, bwd)


# -- Cases 1-3: sentence targets ----------------------------------------------


def _case1_product(ta: Premorphism, tb: Premorphism) -> PullbackSquare:
    theory = ta.theory
    alpha, beta = ta.src, tb.src
    n, m = alpha.arity, beta.arity
    t_block = _fresh_block(n + m, alpha.formula, beta.formula)
    prod = SynObject(and_(alpha.at(t_block[:n]), beta.at(t_block[n:])))

    def imp(keep_left):
        def build(b: Builder) -> int:
            hyps = frozenset({prod.formula, NOT_E})
            return b.sdrop(b.assume(hyps, prod.formula), keep_left=keep_left)

        return build

    pi_alpha = _special_to(
        theory, prod, alpha, {v: t_block[i] for i, v in enumerate(alpha.enumeration)}, imp(True)
    )
    pi_beta = _special_to(
        theory, prod, beta, {v: t_block[n + j] for j, v in enumerate(beta.enumeration)}, imp(False)
    )
    return PullbackSquare(1, prod, pi_alpha, pi_beta, ta, tb, None)


def _case2_mixed(t2_leg, t4_leg, flipped: bool) -> PullbackSquare:
    theory = t2_leg.theory
    alpha, sp = t2_leg.src, t4_leg.src
    n = alpha.arity
    apex = SynObject(and_(alpha.formula, sp.formula))

    def alpha_imp(b: Builder) -> int:
        hyps = frozenset({apex.formula, NOT_E})
        return b.sdrop(b.assume(hyps, apex.formula), keep_left=True)

    pi_alpha = _special_to(theory, apex, alpha, {v: v for v in alpha.enumeration}, alpha_imp)
    b = Builder()
    start = b.assume({apex.at(neg_slots(n)), NOT_E}, apex.at(neg_slots(n)))
    pi_s = formal_type2(theory, apex, sp, b.build(b.sdrop(start, keep_left=False)))
    if flipped:
        return PullbackSquare(2, apex, pi_s, pi_alpha, t4_leg, t2_leg, None)
    return PullbackSquare(2, apex, pi_alpha, pi_s, t2_leg, t4_leg, None)


def _case3_sentences(ta, tb) -> PullbackSquare:
    theory = ta.theory
    apex = SynObject(and_(ta.src.formula, tb.src.formula))
    b = Builder()
    left = b.sdrop(b.assume({apex.formula}, apex.formula), keep_left=True)
    pi_alpha = formal_type4(theory, apex, ta.src, b.build(left))
    b = Builder()
    right = b.sdrop(b.assume({apex.formula}, apex.formula), keep_left=False)
    pi_beta = formal_type4(theory, apex, tb.src, b.build(right))
    return PullbackSquare(3, apex, pi_alpha, pi_beta, ta, tb, None)


# -- Cases 4/5: by iso reduction ------------------------------------------------


def isosingular(pm: Premorphism) -> tuple[SynObject, Premorphism, Premorphism]:
    """For a type-3 morphism s -> phi, the isomorphism s -> theta(T_i) onto
    its payload object, with the formal type-2 inverse."""
    if pm.ptype != 3:
        raise LimitsError("isosingular applies to type-3 morphisms")
    mt = pm.tgt.arity
    if free_vars(pm.payload) != set(pos_slots(mt)):
        raise LimitsError("payload must use all positive slots; apply full_rep first")
    obj = SynObject(pm.payload)
    certs = {}
    b = Builder()
    mf1_old = felim_hyp(b, pm, MF1, pos_slots(mt))
    s_part = b.sdrop(mf1_old, keep_left=True)
    pair = b.r_conj(s_part, b.assume(b.seq(s_part).lhs, pm.payload))
    certs[MF1] = b.build(b.meta_a(pair, pm.payload))
    certs[MF2] = pm.cert(MF2)
    certs[MF3] = pm.cert(MF3)
    iso = verify_premorphism(pm.theory, pm.src, obj, pm.payload, certs)

    b = Builder()
    inv_line = b.sdrop(felim_hyp(b, pm, MF1, neg_slots(mt)), keep_left=True)
    inverse = formal_type2(pm.theory, obj, pm.src, b.build(inv_line))
    return obj, iso, inverse


def _assoc_bridge(outer, mid, inner) -> EquivCert:
    """Associativity instance: (outer o mid) o inner == outer o (mid o inner)."""
    left = compose(compose(outer, mid), inner)
    right = compose(outer, compose(mid, inner))
    cert = payload_equal_cert(left, right)
    if cert is None:
        raise LimitsError("associativity bridge did not certify")
    return cert


def _case4_reduce(t1_leg, t3_leg, flipped: bool) -> PullbackSquare:
    obj, iso, inverse = isosingular(t3_leg)
    leg = compose(t3_leg, inverse)  # obj -> gamma, type 1
    sq0 = _case0(t1_leg, leg)
    pi_s = compose(inverse, sq0.pi_beta)  # apex -> s, type 2
    # theta o pi_s == (theta o inverse) o pi_beta0 == leg o pi_beta0, then
    # route through the case-0 commutation
    bridge = _assoc_bridge(t3_leg, inverse, sq0.pi_beta)
    cert = cert_chain([sq0.commutation, bridge])
    reduction = {"object": obj, "iso": iso, "inverse": inverse, "case0": sq0}
    if flipped:
        return PullbackSquare(
            4, sq0.apex, pi_s, sq0.pi_alpha, t3_leg, t1_leg, cert.flip(), reduction
        )
    return PullbackSquare(4, sq0.apex, sq0.pi_alpha, pi_s, t1_leg, t3_leg, cert, reduction)


def _case5_reduce(ta, tb) -> PullbackSquare:
    obj_a, iso_a, inv_a = isosingular(ta)
    obj_b, iso_b, inv_b = isosingular(tb)
    leg_a = compose(ta, inv_a)
    leg_b = compose(tb, inv_b)
    sq0 = _case0(leg_a, leg_b)
    pi_sa = compose(inv_a, sq0.pi_alpha)
    pi_sb = compose(inv_b, sq0.pi_beta)
    bridge_a = _assoc_bridge(ta, inv_a, sq0.pi_alpha)
    bridge_b = _assoc_bridge(tb, inv_b, sq0.pi_beta)
    cert = cert_chain([bridge_a.flip(), sq0.commutation, bridge_b])
    return PullbackSquare(
        5,
        sq0.apex,
        pi_sa,
        pi_sb,
        ta,
        tb,
        cert,
        reduction={"case0": sq0, "isos": (iso_a, iso_b), "inverses": (inv_a, inv_b)},
    )


# -- Mediation ------------------------------------------------------------------


@dataclass
class Mediator:
    morphism: Premorphism
    c_alpha: EquivCert | None  # pi_alpha o eta == tau_alpha (payload level)
    c_beta: EquivCert | None


def projection_composite_cert(sq: PullbackSquare, e: Premorphism, side: str) -> EquivCert:
    """compose(pi_side, e) == the closure form exists(dropped coords) e(...).

    The closure keeps the retained block at the standard output slots, per
    the precomposition formula for special morphisms."""
    pi = sq.pi_alpha if side == "alpha" else sq.pi_beta
    if pi.ptype != 1:
        raise LimitsError("projection composite certs need a special projection")
    n = sq.theta_alpha.src.arity
    m = sq.theta_beta.src.arity
    q = e.src.arity
    total = n + m
    comp = compose(pi, e)
    keep_count = n if side == "alpha" else m
    drop_count = total - keep_count
    m_block = _fresh_block(drop_count, e.payload, sq.apex.formula)
    if side == "alpha":
        outs = pos_slots(n) + m_block
        kept_std = pos_slots(n)
    else:
        outs = m_block + pos_slots(m)
        kept_std = pos_slots(m)
    closure = exists_many(m_block, e.at(neg_slots(q), outs))

    t_block = _fresh_block(total, e.payload, sq.apex.formula, *m_block)
    e_t = e.at(neg_slots(q), t_block)
    pi_t = pi.at(t_block, kept_std)
    matrix = and_(e_t, pi_t)
    kept_block = t_block[:n] if side == "alpha" else t_block[n:]
    dropped_block = t_block[n:] if side == "alpha" else t_block[:n]

    bf = Builder()
    hyps = frozenset({matrix, NOT_E})
    start = bf.assume(hyps, matrix)
    e_line = bf.sdrop(start, keep_left=True)
    pi_line = bf.sdrop(start, keep_left=False)
    eq_lines = bf.split_conj(bf.sdrop(pi_line, keep_left=False))
    slots = _fresh_block(keep_count, e.payload, *t_block)
    rho_kept = subst_simul(e.at(neg_slots(q), t_block), slots, kept_block)
    moved = bf.subs_multi(e_line, rho_kept, slots, kept_block, kept_std)
    for j, kb in enumerate(kept_block):
        moved = bf.flip_eq_hyp(moved, kb, kept_std[j])
        moved = bf.chain(eq_lines[j], moved)
    closed = bf.exs_multi(moved, closure, dropped_block)
    fwd = bf.build(bf.exa_multi(closed, matrix, t_block))

    bb = Builder()
    e_m = e.at(neg_slots(q), outs)
    hyps2 = frozenset({e_m, NOT_E})
    start = bb.assume(hyps2, e_m)
    f1 = felim_hyp(bb, e, F1, neg_slots(q) + outs)
    apex_line = bb.sdrop(bb.chain(start, f1), keep_left=False)
    ids = ids_conj(bb, [(s, s) for s in kept_std])
    pi_inst = bb.r_conj(apex_line, bb.ant(ids, bb.seq(apex_line).lhs))
    pair = bb.r_conj(bb.ant(start, bb.seq(pi_inst).lhs), pi_inst)
    closed = bb.exs_multi(pair, comp.payload, outs)
    out = bb.exa_multi(closed, e_m, m_block)
    bwd = bb.build(out)
    return EquivCert(comp.payload, closure, fwd, bwd)


def cone_solution_cert(
    sq: PullbackSquare,
    candidate: Premorphism,
    tau_alpha: Premorphism,
    tau_beta: Premorphism,
    side: str,
) -> EquivCert:
    """C1/C2: exists(dropped) candidate == the cone leg on `side`.

    Works whenever every leaf conjunct of the candidate instance is a leaf of
    one of the two cone-leg instances (or reflexive), which covers the
    canonical mediator and its padded variants."""
    n = sq.theta_alpha.src.arity
    m = sq.theta_beta.src.arity
    q = candidate.src.arity
    keep = n if side == "alpha" else m
    m_block = _fresh_block(
        (n + m) - keep, candidate.payload, tau_alpha.payload, tau_beta.payload
    )
    outs = (pos_slots(n) + m_block) if side == "alpha" else (m_block + pos_slots(m))
    cand_inst = candidate.at(neg_slots(q), outs)
    closure = exists_many(m_block, cand_inst)
    tau = tau_alpha if side == "alpha" else tau_beta
    other = tau_beta if side == "alpha" else tau_alpha
    tau_inst = tau.at(neg_slots(q), pos_slots(keep))
    other_inst = other.at(neg_slots(q), m_block)

    def leaf_deriver(b: Builder, base_hyps: frozenset, sources: list[int]):
        table: dict[Formula, int] = {}
        for src_line in sources:
            for part in b.split_conj(src_line):
                table.setdefault(b.seq(part).rhs, part)

        def derive(leaf: Formula) -> int:
            if leaf in table:
                return table[leaf]
            match leaf:
                case Eq(FV(a), FV(c)) if a == c:
                    return b.ant(b.identity(a), base_hyps)
            raise LimitsError(f"cannot justify mediator conjunct {leaf!r}")

        return derive

    bf = Builder()
    hyps_f = frozenset({cand_inst, NOT_E})
    cand_line = bf.assume(hyps_f, cand_inst)
    derive = leaf_deriver(bf, hyps_f, [cand_line])
    got = bf.prove_like(tau_inst, derive)
    fwd = bf.build(bf.exa_multi(got, cand_inst, m_block))

    bb = Builder()
    hyps_b = frozenset({tau_inst, NOT_E})
    f1_name = F1 if tau.ptype == 1 else MF1
    f1 = felim_hyp(
        bb, tau, f1_name, (neg_slots(q) if tau.ptype == 1 else []) + pos_slots(keep)
    )
    delta_line = bb.sdrop(bb.chain(bb.assume(hyps_b, tau_inst), f1), keep_left=True)
    if other.ptype == 1:
        total_line = bb.chain(delta_line, felim_hyp(bb, other, F2, neg_slots(q)))
    else:
        total_line = bb.chain(delta_line, bb.splice(other.cert(MF2)))
    inner_hyps = hyps_b | {other_inst}
    tau_line = bb.assume(inner_hyps, tau_inst)
    other_line = bb.assume(inner_hyps, other_inst)
    derive = leaf_deriver(bb, inner_hyps, [tau_line, other_line])
    rebuilt = bb.prove_like(cand_inst, derive)
    closed = bb.exs_multi(rebuilt, closure, m_block)
    opened_other = bb.exa_multi(closed, other_inst, m_block)
    bwd = bb.build(bb.chain(total_line, opened_other))
    return EquivCert(closure, tau_inst, fwd, bwd)


def _cone_pair_payload(tau_alpha, tau_beta, n, m):
    q = tau_alpha.src.arity
    shifted = [n + j for j in pos_slots(m)]
    return and_(
        tau_alpha.at(neg_slots(q), pos_slots(n)),
        slot_instantiate(
            tau_beta.payload, (neg_slots(q), neg_slots(q)), (shifted, pos_slots(m))
        ),
    )


def mediate(
    square: PullbackSquare,
    tau_alpha: Premorphism,
    tau_beta: Premorphism,
    commutation: EquivCert | None,
) -> Mediator:
    if tau_alpha.src.formula != tau_beta.src.formula:
        raise LimitsError("cone legs need a common source")
    if square.case in (0, 1):
        if tau_alpha.ptype == 3:
            return _mediate_sentence_bootstrap(square, tau_alpha, tau_beta, commutation)
        return _mediate_pairing(square, tau_alpha, tau_beta, commutation)
    if square.case == 2:
        return _mediate_case2(square, tau_alpha, tau_beta)
    if square.case == 3:
        return _mediate_case3(square, tau_alpha, tau_beta)
    if square.case in (4, 5):
        return _mediate_reduced(square, tau_alpha, tau_beta, commutation)
    raise LimitsError(f"no mediation for case {square.case}")


def _mediate_pairing(square, tau_alpha, tau_beta, commutation) -> Mediator:
    """Subcase 0.0 and the product case: the paired-payload mediator."""
    theory = square.pi_alpha.theory
    ta, tb = square.theta_alpha, square.theta_beta
    delta = tau_alpha.src
    q = delta.arity
    n, m = ta.src.arity, tb.src.arity
    if square.case == 0 and commutation is None:
        raise LimitsError("case 0 mediation needs the cone commutation certificate")
    eta_payload = _cone_pair_payload(tau_alpha, tau_beta, n, m)
    certs: dict[str, Derivation] = {}

    certs[F1] = (
        _pairing_f1_case0(square, tau_alpha, tau_beta, commutation, eta_payload)
        if square.case == 0
        else _pairing_f1_product(square, tau_alpha, tau_beta, eta_payload)
    )
    certs[F2] = _pairing_f2(square, tau_alpha, tau_beta, eta_payload)
    certs[F3] = _pairing_f3(square, tau_alpha, tau_beta, eta_payload)
    eta = verify_premorphism(theory, delta, square.apex, eta_payload, certs)
    c_a = cert_chain(
        [
            projection_composite_cert(square, eta, "alpha"),
            cone_solution_cert(square, eta, tau_alpha, tau_beta, "alpha"),
        ]
    )
    c_b = cert_chain(
        [
            projection_composite_cert(square, eta, "beta"),
            cone_solution_cert(square, eta, tau_alpha, tau_beta, "beta"),
        ]
    )
    return Mediator(eta, c_a, c_b)


def _pairing_f1_product(square, tau_alpha, tau_beta, eta_payload) -> Derivation:
    q = tau_alpha.src.arity
    n, m = square.theta_alpha.src.arity, square.theta_beta.src.arity
    b = Builder()
    hyps = frozenset({eta_payload, NOT_E})
    start = b.assume(hyps, eta_payload)
    a_line = b.sdrop(start, keep_left=True)
    b_line = b.sdrop(start, keep_left=False)
    fa = b.chain(a_line, felim_hyp(b, tau_alpha, F1, neg_slots(q) + pos_slots(n)))
    shifted = [n + j for j in pos_slots(m)]
    fb = b.chain(b_line, felim_hyp(b, tau_beta, F1, neg_slots(q) + shifted))
    fa_delta = b.sdrop(fa, keep_left=True)
    fa_alpha = b.sdrop(fa, keep_left=False)
    fb_beta = b.sdrop(fb, keep_left=False)
    tgt_pair = b.r_conj(fa_alpha, fb_beta)
    pair = b.r_conj(fa_delta, tgt_pair)
    return b.build(b.meta_a(pair, eta_payload))


def _pairing_f1_case0(square, tau_alpha, tau_beta, commutation, eta_payload) -> Derivation:
    theory = square.pi_alpha.theory
    ta, tb = square.theta_alpha, square.theta_beta
    q = tau_alpha.src.arity
    n, m, l = ta.src.arity, tb.src.arity, ta.tgt.arity
    comp_a = compose(ta, tau_alpha)
    comp_b = compose(tb, tau_beta)
    shifted = [n + j for j in pos_slots(m)]

    b = Builder()
    hyps = frozenset({eta_payload, NOT_E})
    start = b.assume(hyps, eta_payload)
    a_line = b.sdrop(start, keep_left=True)
    b_line = b.sdrop(start, keep_left=False)
    delta_line = b.chain(
        a_line, b.sdrop(felim_hyp(b, tau_alpha, F1, neg_slots(q) + pos_slots(n)), keep_left=True)
    )
    p_block = _fresh_block(l, eta_payload, comp_a.payload, comp_b.payload)
    f2comp = felim_hyp(b, comp_a, F2, neg_slots(q))
    three = b.chain(delta_line, f2comp)
    inst = cert_half_at(
        b, commutation.fwd, comp_a.payload, neg_slots(q) + pos_slots(l), neg_slots(q) + p_block
    )
    ca_p = comp_a.at(neg_slots(q), p_block)
    cb_p = comp_b.at(neg_slots(q), p_block)
    with_self = b.r_conj(b.assume(b.seq(inst).lhs, ca_p), inst)
    lifted = b.exd_multi(with_self, ca_p, p_block)
    five = b.chain(three, lifted)

    m_a = _fresh_block(n, eta_payload, ca_p, *p_block)
    k_a = _fresh_block(n, eta_payload, ca_p, *p_block, *m_a)
    gamma_a = ta.at(k_a, p_block)
    ext_a = extraction(b, tau_alpha, gamma_a, neg_slots(q), pos_slots(n), k_a, m_a)
    m_b = _fresh_block(m, eta_payload, cb_p, *p_block)
    k_b = _fresh_block(m, eta_payload, cb_p, *p_block, *m_b)
    gamma_b = tb.at(k_b, p_block)
    ext_b = extraction(b, tau_beta, gamma_b, neg_slots(q), shifted, k_b, m_b)
    pair_a = b.r_conj(b.ant(a_line, hyps | {ca_p}), b.assume(hyps | {ca_p}, ca_p))
    th_a_val = b.chain(pair_a, b.meta_b(ext_a))  # => theta_a(x_i, P)
    pair_b = b.r_conj(b.ant(b_line, hyps | {cb_p}), b.assume(hyps | {cb_p}, cb_p))
    th_b_val = b.chain(pair_b, b.meta_b(ext_b))  # => theta_b(x_{n+j}, P)
    union = b.seq(th_a_val).lhs | b.seq(th_b_val).lhs
    both = b.r_conj(b.ant(th_a_val, union), b.ant(th_b_val, union))
    both = b.unload(both, ca_p, cb_p)
    fp_inst = square.apex.at(pos_slots(n) + shifted)
    closed = b.exs_multi(both, fp_inst, p_block)
    folded = b.exa_multi(closed, and_(ca_p, cb_p), p_block)
    done = b.chain(five, folded)
    pair_final = b.r_conj(b.ant(delta_line, b.seq(done).lhs), done)
    return b.build(b.meta_a(pair_final, eta_payload))


def _pairing_f2(square, tau_alpha, tau_beta, eta_payload) -> Derivation:
    q = tau_alpha.src.arity
    n, m = square.theta_alpha.src.arity, square.theta_beta.src.arity
    b = Builder()
    f2a = felim_hyp(b, tau_alpha, F2, neg_slots(q))
    f2b = felim_hyp(b, tau_beta, F2, neg_slots(q))
    i_block = _fresh_block(n, eta_payload)
    j_block = _fresh_block(m, eta_payload, *i_block)
    ta_i = tau_alpha.at(neg_slots(q), i_block)
    tb_j = tau_beta.at(neg_slots(q), j_block)
    hyps2 = frozenset({ta_i, tb_j, NOT_E})
    pair = b.r_conj(b.assume(hyps2, ta_i), b.assume(hyps2, tb_j))
    shifted = [n + j for j in pos_slots(m)]
    full = exists_many(pos_slots(n) + shifted, eta_payload)
    closed = b.exs_multi(pair, full, i_block + j_block)
    op1 = b.exa_multi(closed, tb_j, j_block)
    op2 = b.chain(f2b, op1)
    op3 = b.exa_multi(op2, ta_i, i_block)
    op4 = b.chain(f2a, op3)
    return b.build(b.meta_a(op4, tau_alpha.src.at(neg_slots(q))))


def _pairing_f3(square, tau_alpha, tau_beta, eta_payload) -> Derivation:
    q = tau_alpha.src.arity
    n, m = square.theta_alpha.src.arity, square.theta_beta.src.arity
    total = n + m
    b = Builder()
    shifted_payload = subst_simul(eta_payload, shifted_slots(total, total), pos_slots(total))
    both_f = and_(eta_payload, shifted_payload)
    hyps3 = frozenset({both_f, NOT_E})
    start = b.assume(hyps3, both_f)
    left = b.sdrop(start, keep_left=True)
    right = b.sdrop(start, keep_left=False)
    la, lb_ = b.sdrop(left, keep_left=True), b.sdrop(left, keep_left=False)
    ra, rb = b.sdrop(right, keep_left=True), b.sdrop(right, keep_left=False)
    f3a = felim_hyp(b, tau_alpha, F3, neg_slots(q) + pos_slots(n) + shifted_slots(n, total))
    f3b = felim_hyp(
        b,
        tau_beta,
        F3,
        neg_slots(q)
        + [n + j for j in pos_slots(m)]
        + [total + n + j for j in pos_slots(m)],
    )
    eq_a = b.chain(b.r_conj(la, ra), f3a)
    eq_b = b.chain(b.r_conj(lb_, rb), f3b)
    hyps_all = b.seq(eq_a).lhs | b.seq(eq_b).lhs
    lines = b.split_conj(b.ant(eq_a, hyps_all)) + b.split_conj(b.ant(eq_b, hyps_all))
    return b.build(b.meta_a(b.prove_conj(lines), both_f))


def _mediate_sentence_bootstrap(square, tau_alpha, tau_beta, commutation) -> Mediator:
    obj, iso, inverse = isosingular(tau_alpha)
    new_alpha = compose(tau_alpha, inverse)
    new_beta = compose(tau_beta, inverse)
    if square.case == 0:
        comp_a = compose(square.theta_alpha, new_alpha)
        comp_b = compose(square.theta_beta, new_beta)
        transferred = payload_equal_cert(comp_a, comp_b)
        if transferred is None:
            raise LimitsError("sentence-cone commutation did not transfer")
    else:
        transferred = None
    inner = _mediate_pairing(square, new_alpha, new_beta, transferred)
    eta = compose(inner.morphism, iso)
    return Mediator(eta, None, None)


def _mediate_case2(square, tau_alpha, tau_beta) -> Mediator:
    theory = square.pi_alpha.theory
    # orient so theta is the payload-carrying leg
    if square.theta_alpha.ptype == 2:
        theta, sprime_leg = tau_alpha, tau_beta
        payload_side = "alpha"
    else:
        theta, sprime_leg = tau_beta, tau_alpha
        payload_side = "beta"
    if theta.ptype not in (1, 3):
        raise LimitsError("case 2 mediation expects a payload-carrying cone leg")
    apex = square.apex
    q = theta.src.arity
    n = theta.tgt.arity
    certs: dict[str, Derivation] = {}
    f1_name = F1 if theta.ptype == 1 else MF1
    b = Builder()
    f1 = felim_hyp(
        b, theta, f1_name, (neg_slots(q) if theta.ptype == 1 else []) + pos_slots(n)
    )
    src_part = b.sdrop(f1, keep_left=True)
    alpha_part = b.sdrop(f1, keep_left=False)
    if sprime_leg.ptype == 2:
        sp_line = b.chain(src_part, t2_at(b, sprime_leg, neg_slots(q)))
    else:
        sp_line = b.chain(src_part, b.splice(sprime_leg.cert(T4)))
    pair = b.r_conj(src_part, b.r_conj(alpha_part, sp_line))
    certs[f1_name] = b.build(b.meta_a(pair, theta.payload))
    if theta.ptype == 1:
        certs[F2] = theta.cert(F2)
        certs[F3] = theta.cert(F3)
    else:
        certs[MF2] = theta.cert(MF2)
        certs[MF3] = theta.cert(MF3)
    eta = verify_premorphism(theory, theta.src, apex, theta.payload, certs)
    pi = square.pi_alpha if payload_side == "alpha" else square.pi_beta
    comp = compose(pi, eta)
    c = payload_equal_cert(comp, theta)
    if c is None:
        raise LimitsError("case 2 solution did not certify")
    if payload_side == "alpha":
        return Mediator(eta, c, None)
    return Mediator(eta, None, c)


def _mediate_case3(square, tau_alpha, tau_beta) -> Mediator:
    theory = square.pi_alpha.theory
    delta = tau_alpha.src
    apex = square.apex
    b = Builder()
    name = T4 if delta.is_sentence else T2
    l1 = b.splice(tau_alpha.cert(name))
    l2 = b.splice(tau_beta.cert(name))
    union = b.seq(l1).lhs | b.seq(l2).lhs
    pair = b.r_conj(b.ant(l1, union), b.ant(l2, union))
    if delta.is_sentence:
        eta = formal_type4(theory, delta, apex, b.build(pair))
    else:
        eta = formal_type2(theory, delta, apex, b.build(pair))
    return Mediator(eta, None, None)


def _mediate_reduced(square, tau_alpha, tau_beta, commutation) -> Mediator:
    sq0: PullbackSquare = square.reduction["case0"]
    if square.case == 4:
        iso = square.reduction["iso"]
        new_beta = compose(iso, tau_beta)
        comp_a = compose(sq0.theta_alpha, tau_alpha)
        comp_b = compose(sq0.theta_beta, new_beta)
        cert = payload_equal_cert(comp_a, comp_b)
        if cert is None:
            raise LimitsError("reduced-cone commutation did not certify")
        inner = mediate(sq0, tau_alpha, new_beta, cert)
        return Mediator(inner.morphism, inner.c_alpha, None)
    iso_a, iso_b = square.reduction["isos"]
    new_alpha = compose(iso_a, tau_alpha)
    new_beta = compose(iso_b, tau_beta)
    comp_a = compose(sq0.theta_alpha, new_alpha)
    comp_b = compose(sq0.theta_beta, new_beta)
    cert = payload_equal_cert(comp_a, comp_b)
    if cert is None:
        raise LimitsError("reduced-cone commutation did not certify")
    inner = mediate(sq0, new_alpha, new_beta, cert)
    return Mediator(inner.morphism, None, None)


def mediator_uniqueness(
    square: PullbackSquare,
    tau_alpha: Premorphism,
    tau_beta: Premorphism,
    eta: Premorphism,
    competitor: Premorphism,
) -> EquivCert:
    """Replay the uniqueness derivation: any two solutions of the factoring
    problem are provably equivalent."""
    n = square.theta_alpha.src.arity
    m = square.theta_beta.src.arity
    q = eta.src.arity
    shifted = [n + j for j in pos_slots(m)]

    c_certs = {}
    for e in (eta, competitor):
        c_certs[(id(e), "alpha")] = cone_solution_cert(square, e, tau_alpha, tau_beta, "alpha")
        c_certs[(id(e), "beta")] = cone_solution_cert(square, e, tau_alpha, tau_beta, "beta")

    def one_way(e1: Premorphism, e2: Premorphism):
        b = Builder()
        e1_native = e1.at(neg_slots(q), pos_slots(n) + shifted)
        # (a'): e1 => exists M e2(x-, M, x_shifted)
        m_block = _fresh_block(n, e1.payload, e2.payload)
        closure1_e1 = exists_many(m_block, e1.at(neg_slots(q), m_block + shifted))
        closure1_e2 = exists_many(m_block, e2.at(neg_slots(q), m_block + shifted))
        start = b.assume({e1_native, NOT_E}, e1_native)
        a_closed = b.exs_multi(start, closure1_e1, pos_slots(n))
        c1_e1 = c_certs[(id(e1), "beta")]
        c1_e2 = c_certs[(id(e2), "beta")]
        h1 = cert_half_at(
            b, c1_e1.fwd, c1_e1.a, neg_slots(q) + pos_slots(m), neg_slots(q) + shifted
        )
        h2 = cert_half_at(
            b, c1_e2.bwd, c1_e2.b, neg_slots(q) + pos_slots(m), neg_slots(q) + shifted
        )
        a_prime = b.chain(b.chain(a_closed, h1), h2)
        # (b'): e1 => exists M' e2(x-, x_i, M')
        mp_block = _fresh_block(m, e1.payload, e2.payload, *m_block)
        closure2_e1 = exists_many(mp_block, e1.at(neg_slots(q), pos_slots(n) + mp_block))
        closure2_e2 = exists_many(mp_block, e2.at(neg_slots(q), pos_slots(n) + mp_block))
        b_closed = b.exs_multi(b.assume({e1_native, NOT_E}, e1_native), closure2_e1, shifted)
        c2_e1 = c_certs[(id(e1), "alpha")]
        c2_e2 = c_certs[(id(e2), "alpha")]
        g1 = b.splice(c2_e1.fwd)
        g2 = b.splice(c2_e2.bwd)
        b_prime = b.chain(b.chain(b_closed, g1), g2)
        # (3): single-valuedness of e2 ties the witnesses to the outputs
        f3 = felim_hyp(
            b, e2, F3, neg_slots(q) + m_block + shifted + pos_slots(n) + mp_block
        )
        e2_m = e2.at(neg_slots(q), m_block + shifted)
        e2_mp = e2.at(neg_slots(q), pos_slots(n) + mp_block)
        f3 = b.load(f3, e2_m, e2_mp)
        eq_lines = b.split_conj(f3)
        slots = _fresh_block(n, e2.payload, *m_block, *mp_block)
        rho = e2.at(neg_slots(q), slots + shifted)
        s1 = b.assume({e2_m}, e2_m)
        s2 = b.subs_multi(s1, rho, slots, m_block, pos_slots(n))
        cur = s2
        for ln in eq_lines[:n]:
            cur = b.chain(ln, cur)
        cur = b.exa_multi(b.ant(cur, b.seq(cur).lhs | {e2_mp}), e2_mp, mp_block)
        cur = b.exa_multi(cur, e2_m, m_block)
        out = b.chain(b_prime, cur)
        out = b.chain(a_prime, out)
        return b.build(out)

    fwd = one_way(eta, competitor)
    bwd = one_way(competitor, eta)
    return EquivCert(
        eta.at(neg_slots(q), pos_slots(n) + shifted),
        competitor.at(neg_slots(q), pos_slots(n) + shifted),
        fwd,
        bwd,
    )


# -- Image factorization ---------------------------------------------------------


@dataclass
class Factorization:
    morphism: Premorphism
    image: SynObject
    epi: Premorphism
    mono: Premorphism
    composite_cert: EquivCert | None  # mono o epi == morphism (None when formal)
    ee_criterion: Derivation  # Gamma(, not E), image-instance => image of epi


def image_object(f: Premorphism) -> SynObject:
    """The four-case image object."""
    if f.ptype == 1:
        n = f.src.arity
        l = f.tgt.arity
        m_block = _fresh_block(n, f.payload, f.tgt.formula)
        inst = f.at(m_block, list(f.tgt.enumeration))
        return SynObject(exists_many(m_block, inst))
    if f.ptype == 2:
        n = f.src.arity
        return SynObject(exists_many(list(f.src.enumeration), f.src.formula))
    if f.ptype == 3:
        if free_vars(f.payload) != set(pos_slots(f.tgt.arity)):
            raise LimitsError("type-3 image needs a full payload; apply full_rep")
        return SynObject(subst_simul(f.payload, list(f.tgt.enumeration), pos_slots(f.tgt.arity)))
    return f.src


def factorize(f: Premorphism) -> Factorization:
    theory = f.theory
    img = image_object(f)
    if f.ptype == 1:
        n, l = f.src.arity, f.tgt.arity
        certs: dict[str, Derivation] = {}
        b = Builder()
        f1 = felim_hyp(b, f, F1, neg_slots(n) + pos_slots(l))
        alpha_line = b.sdrop(f1, keep_left=True)
        payload_line = b.assume(b.seq(f1).lhs, f.payload)
        img_inst = img.at(pos_slots(l))
        closed = b.exs_multi(payload_line, img_inst, neg_slots(n))
        pair = b.r_conj(b.ant(alpha_line, b.seq(closed).lhs), closed)
        certs[F1] = b.build(b.meta_a(pair, f.payload))
        certs[F2] = f.cert(F2)
        certs[F3] = f.cert(F3)
        epi = verify_premorphism(theory, f.src, img, f.payload, certs)

        def mono_imp(bb: Builder) -> int:
            mfresh = _fresh_block(n, img.formula, f.payload)
            opened = f.at(mfresh, list(f.tgt.enumeration))
            sub = bb.assume({opened, NOT_E}, opened)
            f1m = felim_hyp(bb, f, F1, mfresh + list(f.tgt.enumeration))
            got = bb.sdrop(bb.chain(sub, f1m), keep_left=False)
            return bb.exa_multi(got, opened, mfresh)

        mono = _special_to(theory, img, f.tgt, {v: v for v in f.tgt.enumeration}, mono_imp)
        comp = compose(mono, epi)
        cert = payload_equal_cert(comp, f)
        if cert is None:
            raise LimitsError("m o e = f did not certify")
        bee = Builder()
        ee = bee.build(bee.assume({img.formula, NOT_E}, img.formula))
        return Factorization(f, img, epi, mono, cert, ee)
    if f.ptype == 2:
        n = f.src.arity
        b = Builder()
        src_inst = f.src.at(neg_slots(n))
        start = b.assume({src_inst, NOT_E}, src_inst)
        closed = b.exs_multi(start, img.formula, neg_slots(n))
        epi = formal_type2(theory, f.src, img, b.build(closed))
        b = Builder()
        fresh = _fresh_block(n, f.src.formula)
        inst = f.src.at(fresh)
        t2l = t2_at(b, f, fresh)
        folded = b.exa_multi(t2l, inst, fresh)
        out = b.consume_not_e(folded, img.formula)
        mono = formal_type4(theory, img, f.tgt, b.build(out))
        bee = Builder()
        ee = bee.build(bee.assume({img.formula}, img.formula))
        return Factorization(f, img, epi, mono, None, ee)
    if f.ptype == 3:
        obj, iso, inverse = isosingular(f)
        epi = iso

        def mono_imp(bb: Builder) -> int:
            mf1 = felim_hyp(bb, f, MF1, list(img.enumeration))
            return bb.sdrop(bb.chain(bb.assume(bb.seq(mf1).lhs, img.formula), mf1), keep_left=False)

        mono = _special_to(theory, img, f.tgt, {v: v for v in f.tgt.enumeration}, mono_imp)
        comp = compose(mono, epi)
        cert = payload_equal_cert(comp, f)
        if cert is None:
            raise LimitsError("m o e = f did not certify (type 3)")
        bee = Builder()
        ee = bee.build(bee.assume({img.formula, NOT_E}, img.formula))
        return Factorization(f, img, epi, mono, cert, ee)
    # type 4: identity epi part
    epi = identity_of(theory, f.src)
    bee = Builder()
    ee = bee.build(bee.assume({f.src.formula}, f.src.formula))
    return Factorization(f, f.src, epi, f, None, ee)


@dataclass
class EpiResult:
    verdict: Verdict
    cert: Derivation | None = None  # Gamma(, not E), target-instance => image-instance
    countermodel: object = None


def is_effective_epi(f: Premorphism, oracle_size: int = 2) -> EpiResult:
    """Three-valued: certified when the target provably implies the image
    (the converse is automatic), refuted by a countermodel, else unknown."""
    img = image_object(f)
    tgt_inst = f.tgt.formula
    img_inst = img.formula if not img.is_sentence else img.formula
    # align both over the target's enumeration
    cert = _try_implication(f.theory, f.tgt.formula, img.formula, sentences=f.tgt.is_sentence)
    if cert is not None:
        return EpiResult(Verdict.EQUAL, cert)
    counter = _refute_surjection(f, oracle_size)
    if counter is not None:
        return EpiResult(Verdict.REFUTED, countermodel=counter)
    return EpiResult(Verdict.UNKNOWN)


def _strip_double_negations(b: Builder, hyp: Formula) -> tuple[Formula, int]:
    """Line {stripped(,not E)} => ... chain helper: returns (stripped, line
    {hyp} => stripped)."""
    from syncat.formulas import Not

    cur = hyp
    line = b.assume({hyp}, hyp)
    while True:
        match cur:
            case Not(Not(inner)):
                line = b.dn_b(line)
                cur = inner
            case _:
                return cur, line


def _try_implication(theory, a: Formula, b_f: Formula, sentences: bool) -> Derivation | None:
    """Attempt Gamma, (not E,) a => b syntactically: strip double negations,
    then derive b's matrix from a's conjuncts under a witness assignment."""
    from .formulas import Not, max_index as mi
    from .normalize import open_form, _try_block_match

    if a == b_f:
        bb = Builder()
        return bb.build(bb.assume({a, NOT_E}, a))
    eq = formulas_equal_cert(a, b_f)
    if eq is not None:
        bb = Builder()
        return bb.build(bb.splice(eq.fwd))
    bb = Builder()
    a_stripped, a_line = _strip_double_negations(bb, a)
    b_stripped = b_f
    shells = 0
    while True:
        match b_stripped:
            case Not(Not(inner)):
                b_stripped = inner
                shells += 1
            case _:
                break
    if a_stripped == b_stripped:
        body = bb.ant(a_line, {a, NOT_E})
        for _ in range(shells):
            body = bb.dn_a(body)
        return bb.build(body) if bb.seq(body).rhs == b_f else None
    base = max(mi(a_stripped), mi(b_stripped)) + 1
    bform, _ = open_form(b_stripped, base)
    aform, _ = open_form(a_stripped, base + len(bform.prefix) + 3)
    if aform.prefix:
        return None  # only conjunction-shaped sources
    a_line = bb.ant(a_line, {a, NOT_E})
    leaf_lines: dict[Formula, int] = {}
    for ln in bb.split_conj(a_line):
        leaf_lines.setdefault(bb.seq(ln).rhs, ln)
    if bform.prefix:
        sigma = _try_block_match(
            [c for c in bform.conj if free_vars(c) & set(bform.prefix)],
            list(leaf_lines.keys()),
            set(bform.prefix),
        )
        if sigma is None:
            return None
        wits = [sigma[v] for v in bform.prefix]
    else:
        wits = []

    def derive(leaf: Formula) -> int | None:
        want = subst_simul(leaf, wits, bform.prefix) if bform.prefix else leaf
        if want in leaf_lines:
            return leaf_lines[want]
        match want:
            case Eq(FV(x), FV(y)) if x == y:
                return bb.ant(bb.identity(x), {a, NOT_E})
        return None

    lines = []
    for c in bform.conj:
        got = derive(c)
        if got is None:
            return None
        lines.append(got)
    body = bb.prove_conj(lines)
    if bform.prefix:
        body = bb.exs_multi(body, b_stripped, wits)
    for _ in range(shells):
        body = bb.dn_a(body)
    if bb.seq(body).rhs != b_f:
        return None
    return bb.build(body)


def _refute_surjection(f: Premorphism, oracle_size: int):
    from .functor import definable_function, object_set
    from .semantics import enumerate_structures, is_model

    for m in enumerate_structures(f.theory.sig, oracle_size):
        if not is_model(m, f.theory.axioms):
            continue
        try:
            fun = definable_function(m, f)
        except Exception:
            continue
        tgt_rows = object_set(m, f.tgt).rows
        if frozenset(fun.values()) != tgt_rows:
            return m
    return None


# -- Stability of effective epis under pullback ---------------------------------


@dataclass
class StabilityReport:
    square: PullbackSquare
    projection: Premorphism
    ee_cert: Derivation | None
    note: str


def check_ee_stability(f: Premorphism, g: Premorphism, f_ee_cert: Derivation) -> StabilityReport:
    """Pull an effective epi f back along g and certify the projection e.e.

    f_ee_cert concludes Gamma(, not E), cod-formula => image-formula for f."""
    if f.tgt.formula != g.tgt.formula:
        raise LimitsError("stability needs a common target")
    square = fiber_product(f, g)
    projection = square.pi_beta  # the pullback of f, onto dom(g)
    key = (f.ptype, g.ptype)
    if key == (1, 1):
        cert = _stability_type1(f, g, square, f_ee_cert)
        return StabilityReport(square, projection, cert, "type-1 along type-1")
    if key == (2, 2):
        cert = _stability_type2_along_type2(f, g, square, f_ee_cert)
        return StabilityReport(square, projection, cert, "type-2 along type-2")
    if key == (2, 4):
        cert = _stability_type2_along_type4(f, g, square, f_ee_cert)
        return StabilityReport(square, projection, cert, "type-2 along type-4")
    result = is_effective_epi(projection)
    if result.verdict == Verdict.EQUAL:
        return StabilityReport(square, projection, result.cert, f"direct criterion for {key}")
    raise LimitsError(f"no stability recipe for types {key}")


def _stability_type1(f, g, square, f_ee_cert) -> Derivation:
    """Gamma, not E, beta(Y) => Im pi, following the (*) display."""
    theory = f.theory
    n, m, l = f.src.arity, g.src.arity, f.tgt.arity
    beta = g.src
    img_pi = image_object(square.pi_beta)
    # the image of the projection; derive beta => exists T exists W (theta /\ omega)
    b = Builder()
    w_fresh = _fresh_block(l, f.payload, g.payload, beta.formula)
    t_fresh = _fresh_block(n, f.payload, g.payload, beta.formula, *w_fresh)
    beta_enum = list(beta.enumeration)
    # (1) instantiate the e.e. criterion of f at W
    crit = cert_half_at(
        b,
        f_ee_cert,
        f.tgt.formula,
        list(f.tgt.enumeration),
        w_fresh,
    )  # gamma(W) => exists T theta(T, W)
    # (2) beta(Y) => exists W (omega(Y, W) /\ gamma(W)) from F2 and F1 of g
    f2 = felim_hyp(b, g, F2, beta_enum)
    om_w = g.at(beta_enum, w_fresh)
    f1 = felim_hyp(b, g, F1, beta_enum + w_fresh)
    gam_w = b.sdrop(b.chain(b.assume(b.seq(f1).lhs, om_w), f1), keep_left=False)
    pair = b.r_conj(b.assume(b.seq(gam_w).lhs, om_w), gam_w)
    ex_pair = exists_many(w_fresh, and_(om_w, f.tgt.at(w_fresh)))
    closed = b.exs_multi(pair, ex_pair, w_fresh)
    opened = b.exa_multi(closed, om_w, w_fresh)
    two = b.chain(f2, opened)
    # (1'): inside the pair, replace gamma(W) by exists T theta(T, W)
    th_tw = f.at(t_fresh, w_fresh)
    hyps_in = frozenset({om_w, NOT_E})
    crit_in = b.ant(crit, b.seq(crit).lhs | {om_w})
    target_matrix = exists_many(
        t_fresh + w_fresh, and_(th_tw, g.at(beta_enum, w_fresh))
    )
    # open exists T theta(T,W), pair with omega, close as exists T exists W
    th_open = b.assume(hyps_in | {th_tw}, th_tw)
    om_line = b.assume(hyps_in | {th_tw}, om_w)
    inner_pair = b.r_conj(th_open, om_line)
    closed2 = b.exs_multi(inner_pair, target_matrix, t_fresh + w_fresh)
    opened2 = b.exa_multi(closed2, th_tw, t_fresh)
    with_crit = b.chain(crit_in, opened2)
    folded = b.unload(with_crit, om_w, f.tgt.at(w_fresh))
    opened3 = b.exa_multi(folded, and_(om_w, f.tgt.at(w_fresh)), w_fresh)
    star = b.chain(two, opened3)
    # bridge to the image formula of the projection
    bridge = formulas_equal_cert(target_matrix, img_pi.formula)
    if bridge is None:
        raise LimitsError("stability: image bridge did not certify")
    line = b.chain(star, b.splice(bridge.fwd))
    return b.build(line)


def _stability_type2_along_type2(f, g, square, f_ee_cert) -> Derivation:
    """Gamma, not E, psi(Y) => exists T (phi(T) /\ psi(Y))."""
    theory = f.theory
    psi = g.src
    phi = f.src
    b = Builder()
    psi_enum = list(psi.enumeration)
    t2 = t2_at(b, g, psi_enum)  # psi(Y) => s
    crit = b.splice(f_ee_cert)  # Gamma, s => exists X phi
    tot = b.chain(t2, crit)
    t_fresh = _fresh_block(phi.arity, phi.formula, psi.formula)
    phi_t = phi.at(t_fresh)
    hyps = frozenset({phi_t, psi.formula if psi.is_sentence else psi.at(psi_enum), NOT_E})
    psi_inst = psi.at(psi_enum)
    hyps = frozenset({phi_t, psi_inst, NOT_E})
    pair = b.r_conj(b.assume(hyps, phi_t), b.assume(hyps, psi_inst))
    img_pi = image_object(square.pi_beta)
    target = exists_many(t_fresh, and_(phi_t, psi_inst))
    closed = b.exs_multi(pair, target, t_fresh)
    opened = b.exa_multi(closed, phi_t, t_fresh)
    got = b.chain(tot, opened)
    bridge = formulas_equal_cert(target, img_pi.formula)
    if bridge is None:
        raise LimitsError("stability: type-2 image bridge did not certify")
    return b.build(b.chain(got, b.splice(bridge.fwd)))


def _stability_type2_along_type4(f, g, square, f_ee_cert) -> Derivation:
    """Gamma, s' => exists X (phi(X) /\ s') per the quoted display."""
    theory = f.theory
    phi = f.src
    sp = g.src
    b = Builder()
    t4 = b.splice(g.cert(T4))  # Gamma, s' => s
    crit = b.splice(f_ee_cert)  # Gamma, s => exists X phi
    tot = b.chain(t4, crit)  # Gamma, s' => exists X phi
    x_fresh = _fresh_block(phi.arity, phi.formula, sp.formula)
    phi_x = phi.at(x_fresh)
    ex_phi = exists_many(x_fresh, phi_x)
    if sp.formula == ex_phi:
        # s' coincides with the image sentence: rebuild it by exists-S
        hyps = frozenset({phi_x, NOT_E})
        phi_line = b.assume(hyps, phi_x)
        sp_line = b.exs_multi(b.assume(hyps, phi_x), sp.formula, x_fresh)
        pair = b.r_conj(phi_line, sp_line)
    else:
        hyps = frozenset({phi_x, sp.formula, NOT_E})
        pair = b.r_conj(b.assume(hyps, phi_x), b.assume(hyps, sp.formula))
    target = exists_many(x_fresh, and_(phi_x, sp.formula))
    closed = b.exs_multi(pair, target, x_fresh)
    opened = b.exa_multi(closed, phi_x, x_fresh)
    opened = b.consume_not_e(opened, ex_phi)
    got = b.chain(tot, opened)
    img_pi = image_object(square.pi_beta)
    bridge = formulas_equal_cert(target, img_pi.formula)
    if bridge is None:
        raise LimitsError("stability: type-2/4 image bridge did not certify")
    out = b.chain(got, b.splice(bridge.fwd))
    out = b.consume_not_e(out, target) if NOT_E in b.seq(out).lhs else out
    return b.build(out)


# -- n-fold products of the point object ----------------------------------------


POINT_FORMULA = None  # set below


def point_object() -> SynObject:
    from .formulas import Eq, FV

    return SynObject(Eq(FV(0), FV(0)))


def n_fold_product(theory: Theory, varset) -> tuple[SynObject, list[Premorphism]]:
    """E^V as an n-fold product of x0 = x0, projections x_-l = x_1."""
    from .formulas import e_of

    vs = sorted(set(varset))
    if not vs:
        raise LimitsError("E^V needs a nonempty variable set")
    ev = SynObject(e_of(vs))
    point = point_object()
    n = len(vs)
    projections = []
    for l in range(1, n + 1):
        payload = Eq(FV(-l), FV(1))
        certs: dict[str, Derivation] = {}
        b = Builder()
        ev_line = ids_conj(b, [(-i, -i) for i in range(1, n + 1)])
        pt_line = b.identity(1)
        pair = b.r_conj(ev_line, pt_line)
        pair = b.ant(pair, {payload, NOT_E})
        certs[F1] = b.build(b.meta_a(pair, payload))
        b = Builder()
        wit = b.identity(-l)
        closed = b.exs_multi(wit, exists_many([1], payload), [-l])
        closed = b.ant(closed, b.seq(closed).lhs | {ev.at(neg_slots(n))})
        certs[F2] = b.build(b.meta_a(closed, ev.at(neg_slots(n))))
        b = Builder()
        shifted = subst_simul(payload, [2], [1])
        both = and_(payload, shifted)
        start = b.assume({both, NOT_E}, both)
        l1 = b.sdrop(start, keep_left=True)
        l2 = b.sdrop(start, keep_left=False)
        flip = b.chain(l1, b.eq_sym(-l, 1))
        tr = b.eq_trans(1, -l, 2)
        step = b.chain(flip, tr)
        out = b.chain(l2, step)
        certs[F3] = b.build(b.meta_a(out, both))
        projections.append(verify_premorphism(theory, ev, point, payload, certs))
    return ev, projections


def product_mediate(
    theory: Theory, ev: SynObject, projections: list[Premorphism], cone: list[Premorphism]
) -> tuple[Premorphism, list[EquivCert]]:
    """The unique map into E^V induced by a cone of maps to the point."""
    n = len(projections)
    if len(cone) != n:
        raise LimitsError("cone length mismatch")
    delta = cone[0].src
    q = delta.arity
    parts = [u.at(neg_slots(q), [l]) for l, u in zip(range(1, n + 1), cone)]
    payload = big_and(parts)
    certs: dict[str, Derivation] = {}

    b = Builder()
    hyps = frozenset({payload, NOT_E})
    start = b.assume(hyps, payload)
    part_lines = b.split_top(start, n)
    f1s = [felim_hyp(b, u, F1, neg_slots(q) + [l]) for l, u in zip(range(1, n + 1), cone)]
    delta_line = b.sdrop(b.chain(part_lines[0], f1s[0]), keep_left=True)
    ev_line = b.ant(ids_conj(b, [(l, l) for l in range(1, n + 1)]), hyps)
    pair = b.r_conj(delta_line, ev_line)
    certs[F1] = b.build(b.meta_a(pair, payload))

    b = Builder()
    k_blocks = []
    base = [payload]
    for u in cone:
        k = _fresh_block(1, payload, *[x for blk in k_blocks for x in blk])
        k_blocks.append(k)
    inner_hyps = frozenset(
        u.at(neg_slots(q), k_blocks[i]) for i, u in enumerate(cone)
    ) | {NOT_E}
    inst_lines = [b.assume(inner_hyps, u.at(neg_slots(q), k_blocks[i])) for i, u in enumerate(cone)]
    pairline = b.prove_conj(inst_lines)
    closed = b.exs_multi(
        pairline, exists_many(pos_slots(n), payload), [k[0] for k in k_blocks]
    )
    cur = closed
    for i in reversed(range(n)):
        cur = b.exa_multi(cur, cone[i].at(neg_slots(q), k_blocks[i]), k_blocks[i])
        f2 = felim_hyp(b, cone[i], F2, neg_slots(q))
        cur = b.chain(f2, cur)
    certs[F2] = b.build(b.meta_a(cur, delta.at(neg_slots(q))))

    b = Builder()
    shifted_payload = subst_simul(payload, shifted_slots(n, n), pos_slots(n))
    both = and_(payload, shifted_payload)
    hyps3 = frozenset({both, NOT_E})
    start = b.assume(hyps3, both)
    lparts = b.split_top(b.sdrop(start, keep_left=True), n)
    rparts = b.split_top(b.sdrop(start, keep_left=False), n)
    eq_lines = []
    for i, u in enumerate(cone):
        f3 = felim_hyp(b, u, F3, neg_slots(q) + [i + 1] + [n + i + 1])
        eq_lines.append(b.chain(b.r_conj(lparts[i], rparts[i]), f3))
    union = frozenset().union(*[b.seq(e).lhs for e in eq_lines])
    certs[F3] = b.build(
        b.meta_a(b.prove_conj([b.ant(e, union) for e in eq_lines]), both)
    )

    eta = verify_premorphism(theory, delta, ev, payload, certs)
    solution_certs = []
    for l in range(1, n + 1):
        comp = compose(projections[l - 1], eta)
        cert = _product_solution_cert(theory, eta, cone, l, comp)
        solution_certs.append(cert)
    return eta, solution_certs


def _product_solution_cert(theory, eta, cone, l, comp) -> EquivCert:
    """pi_l o eta == u_l, by absorbing the other coordinates via totality."""
    n = len(cone)
    q = eta.src.arity
    u = cone[l - 1]
    target = u.payload
    red = payload_equal_cert(comp, u)
    if red is not None:
        return red
    # direct derivation: comp == exists T (eta(x-,T) /\ T_l = x_1)
    t_block = _fresh_block(n, eta.payload, u.payload)
    matrix = and_(eta.at(neg_slots(q), t_block), Eq(FV(t_block[l - 1]), FV(1)))
    mid = exists_many(t_block, matrix)
    cert1 = formulas_equal_cert(comp.payload, mid)
    if cert1 is None:
        raise LimitsError("product solution: composite bridge failed")

    bf = Builder()
    hyps = frozenset({matrix, NOT_E})
    start = bf.assume(hyps, matrix)
    eta_line = bf.sdrop(start, keep_left=True)
    eq_line = bf.sdrop(start, keep_left=False)
    parts = bf.split_top(eta_line, n)
    slots = _fresh_block(1, eta.payload, *t_block)
    rho = u.at(neg_slots(q), slots)
    moved = bf.subs_multi(parts[l - 1], rho, slots, [t_block[l - 1]], [1])
    moved = bf.chain(eq_line, moved)
    fwd = bf.build(bf.exa_multi(moved, matrix, t_block))

    bb = Builder()
    hyps2 = frozenset({u.at(neg_slots(q), [1]), NOT_E})
    u_line = bb.assume(hyps2, u.at(neg_slots(q), [1]))
    f1 = felim_hyp(bb, u, F1, neg_slots(q) + [1])
    delta_line = bb.sdrop(bb.chain(u_line, f1), keep_left=True)
    k_blocks = []
    for i in range(n):
        k = _fresh_block(1, eta.payload, *[x for blk in k_blocks for x in blk])
        k_blocks.append(k)
    inner_hyps = hyps2 | frozenset(
        cone[i].at(neg_slots(q), k_blocks[i]) for i in range(n) if i != l - 1
    )
    leaf_lines = []
    wits = []
    for i in range(n):
        if i == l - 1:
            leaf_lines.append(bb.ant(u_line, inner_hyps))
            wits.append(1)
        else:
            leaf_lines.append(bb.assume(inner_hyps, cone[i].at(neg_slots(q), k_blocks[i])))
            wits.append(k_blocks[i][0])
    eta_inst = bb.prove_conj(leaf_lines)
    eq_part = bb.ant(bb.identity(1), inner_hyps)
    pair = bb.r_conj(eta_inst, eq_part)
    closed = bb.exs_multi(pair, mid, wits)
    cur = closed
    for i in reversed(range(n)):
        if i == l - 1:
            continue
        cur = bb.exa_multi(cur, cone[i].at(neg_slots(q), k_blocks[i]), k_blocks[i])
        cur = bb.chain(felim_hyp(bb, cone[i], F2, neg_slots(q)), cur)
        cur = bb.chain(delta_line, cur)
    bwd = bb.build(cur)
    cert2 = EquivCert(mid, u.at(neg_slots(q), [1]), fwd, bwd)
    return cert_chain([cert1, cert2])


# -- The substitution square ------------------------------------------------------


def substitution_square(theory: Theory, phi: SynObject, varset, var_map) -> PullbackSquare:
    """The pullback square with corners phi(f(X)) /\ E^V, E^V, phi, E^free(phi),
    special monos across and f-special maps down."""
    from .formulas import e_of

    vs = sorted(set(varset))
    if phi.is_sentence:
        raise LimitsError("use sentence_substitution_square for sentences")
    if not set(var_map) == set(phi.enumeration) or not set(var_map.values()) <= set(vs):
        raise LimitsError("variable map must send free(phi) into V")
    ev = SynObject(e_of(vs))
    e_phi = SynObject(e_of(phi.enumeration))
    theta_obj = SynObject(and_(phi.at([var_map[v] for v in phi.enumeration]), ev.formula))

    top = mk_special(theory, theta_obj, ev, {v: v for v in vs})
    left = mk_special(theory, theta_obj, phi, dict(var_map))
    bottom = mk_special(theory, phi, e_phi, {v: v for v in phi.enumeration})
    right = mk_special(theory, ev, e_phi, dict(var_map))

    comp_left = compose(bottom, left)
    comp_right = compose(right, top)
    cert = payload_equal_cert(comp_left, comp_right)
    if cert is None:
        raise LimitsError("substitution square did not commute syntactically")
    return PullbackSquare(0, theta_obj, left, top, bottom, right, cert)


def sentence_substitution_square(theory: Theory, s: SynObject, varset) -> PullbackSquare:
    """Proposition 1.5: the square s /\ E^V, E^V over s -> S <- E^V."""
    from .formulas import e_of

    vs = sorted(set(varset))
    if not s.is_sentence:
        raise LimitsError("needs a sentence")
    ev = SynObject(e_of(vs))
    apex = SynObject(and_(s.formula, ev.formula))
    n = len(vs)

    b = Builder()
    start = b.assume({apex.at(neg_slots(n)), NOT_E}, apex.at(neg_slots(n)))
    left = formal_type2(theory, apex, s, b.build(b.sdrop(start, keep_left=True)))

    def top_imp(bb: Builder) -> int:
        return bb.sdrop(bb.assume({apex.formula, NOT_E}, apex.formula), keep_left=False)

    top = mk_special(theory, apex, ev, {v: v for v in vs}, _build(top_imp))

    from .category import to_validity

    bottom = to_validity(theory, s)
    right = to_validity(theory, ev)
    return PullbackSquare(2, apex, left, top, bottom, right, None)


def _build(fn) -> Derivation:
    b = Builder()
    return b.build(fn(b))


# -- The coequalizer side of the factorization -----------------------------------


def _swap_exists_pair(b: Builder, src_pair: Formula, tgt_pair: Formula, width: int) -> int:
    """Line {src(, not E)} => tgt for exists-closed two-conjunct forms with
    the conjuncts swapped."""
    if src_pair == tgt_pair:
        return b.assume({src_pair, NOT_E}, src_pair)
    names = _fresh_block(width, src_pair, tgt_pair)
    inner = src_pair
    from .formulas import open_exists

    for v in names:
        inner = open_exists(inner, v)
    hyps = frozenset({inner, NOT_E})
    start = b.assume(hyps, inner)
    swapped = b.r_conj(b.sdrop(start, keep_left=False), b.sdrop(start, keep_left=True))
    closed = b.exs_multi(swapped, tgt_pair, names)
    return b.exa_multi(closed, inner, names)


def self_pullback(f: Premorphism) -> PullbackSquare:
    return fiber_product(f, f)


def maps_lemma_line(
    b: Builder, f: Premorphism, u: Premorphism, sq: PullbackSquare, equalizes: EquivCert
) -> int:
    """Gamma, not E, FP(x_-s) => exists x_w (u(x_-i, x_w) and u(x_-(n+i), x_w)).

    `equalizes` certifies u o pi_1 == u o pi_2 over the self-pullback."""
    n = f.src.arity
    w = u.tgt.arity
    first = neg_slots(n)
    second = [-(n + i) for i in pos_slots(n)]
    fp_inst = sq.apex.at(neg_slots(2 * n))
    u1 = u.at(first, pos_slots(w))
    u2 = u.at(second, pos_slots(w))
    mid1 = and_(fp_inst, u1)
    mid2 = and_(fp_inst, u2)
    comp1 = compose(u, sq.pi_alpha)
    comp2 = compose(u, sq.pi_beta)
    c1 = formulas_equal_cert(comp1.payload, mid1)
    c2 = formulas_equal_cert(comp2.payload, mid2)
    if c1 is None or c2 is None:
        raise LimitsError("maps lemma: composite bridges did not certify")
    mids = cert_chain([c1.flip(), equalizes, c2])
    h1 = b.splice(mids.fwd)  # {mid1, not E, Gamma} => mid2
    hyps = frozenset({fp_inst, u1, NOT_E})
    pair = b.r_conj(b.assume(hyps, fp_inst), b.assume(hyps, u1))
    m2 = b.chain(pair, h1)
    u2_line = b.sdrop(m2, keep_left=False)
    both = b.r_conj(b.assume(b.seq(u2_line).lhs, u1), u2_line)
    target = exists_many(pos_slots(w), and_(u1, u2))
    closed = b.exs_multi(both, target, pos_slots(w))
    no_u1 = b.exa_multi(closed, u1, pos_slots(w))
    # totality: FP => exists x_w u1-closure, via F1-theta then F2-u
    th_w = _fresh_block(f.tgt.arity, f.payload, u.payload)
    th_first = f.at(first, th_w)
    sub = b.assume({th_first, NOT_E}, th_first)
    alpha_line = b.sdrop(b.chain(sub, felim_hyp(b, f, F1, first + th_w)), keep_left=True)
    fp_matrix = and_(f.at(first, th_w), f.at(second, th_w))
    sub2 = b.assume({fp_matrix, NOT_E}, fp_matrix)
    alpha2 = b.sdrop(
        b.chain(b.sdrop(sub2, keep_left=True), felim_hyp(b, f, F1, first + th_w)),
        keep_left=True,
    )
    opened_fp = b.exa_multi(alpha2, fp_matrix, th_w)
    f2u = felim_hyp(b, u, F2, first)
    tot = b.chain(opened_fp, f2u)
    return b.chain(tot, no_u1)


def coequalizer_mediate(
    fac: Factorization, u: Premorphism, sq: PullbackSquare, equalizes: EquivCert | None = None
) -> tuple[Premorphism, EquivCert]:
    """The unique eta: Im theta -> chi with eta o theta = u, for u equalizing
    the self-pullback projections of theta."""
    f = fac.morphism
    theory = f.theory
    if f.ptype != 1 or u.ptype != 1:
        raise LimitsError("coequalizer mediation implemented for type-1 data")
    n, l, w = f.src.arity, f.tgt.arity, u.tgt.arity
    if equalizes is None:
        equalizes = sq.commutation if u.payload == f.payload else None
    if equalizes is None:
        raise LimitsError("coequalizer mediation needs the equalizing certificate")
    r_block = _fresh_block(n, f.payload, u.payload)
    eta_payload = exists_many(
        r_block, and_(f.at(r_block, neg_slots(l)), u.at(r_block, pos_slots(w)))
    )
    th_r = f.at(r_block, neg_slots(l))
    u_r = u.at(r_block, pos_slots(w))
    matrix = and_(th_r, u_r)
    certs: dict[str, Derivation] = {}

    # F1: eta => Im(x_-k) /\ chi(x_w)
    b = Builder()
    hyps = frozenset({matrix, NOT_E})
    start = b.assume(hyps, matrix)
    th_line = b.sdrop(start, keep_left=True)
    u_line = b.sdrop(start, keep_left=False)
    im_inst = fac.image.at(neg_slots(l))
    im_line = b.exs_multi(th_line, im_inst, r_block)
    chi_line = b.sdrop(b.chain(u_line, felim_hyp(b, u, F1, r_block + pos_slots(w))), keep_left=False)
    pair = b.r_conj(b.ant(im_line, b.seq(chi_line).lhs | hyps), chi_line)
    closed = b.exa_multi(pair, matrix, r_block)
    certs[F1] = b.build(b.meta_a(closed, eta_payload))

    # F2: Im(x_-k) => exists x_w eta
    b = Builder()
    m_fresh = _fresh_block(n, f.payload, u.payload, *r_block)
    n_fresh = _fresh_block(w, f.payload, u.payload, *r_block, *m_fresh)
    th_m = f.at(m_fresh, neg_slots(l))
    u_mn = u.at(m_fresh, n_fresh)
    inner_hyps = frozenset({th_m, u_mn, NOT_E})
    pair = b.r_conj(
        b.assume(inner_hyps, th_m), b.assume(inner_hyps, u_mn)
    )  # theta(M, x_-k) /\ u(M, N)
    eta_at_n = exists_many(
        r_block, and_(th_r, u.at(r_block, n_fresh))
    )
    closed = b.exs_multi(pair, eta_at_n, m_fresh)
    full = b.exs_multi(closed, exists_many(pos_slots(w), eta_payload), n_fresh)
    no_u = b.exa_multi(full, u_mn, n_fresh)
    f2u = felim_hyp(b, u, F2, m_fresh)
    alpha_m = b.sdrop(
        b.chain(b.assume({th_m, NOT_E}, th_m), felim_hyp(b, f, F1, m_fresh + neg_slots(l))),
        keep_left=True,
    )
    tot = b.chain(alpha_m, f2u)
    got = b.chain(tot, no_u)
    no_th = b.exa_multi(got, th_m, m_fresh)
    certs[F2] = b.build(b.meta_a(no_th, im_inst))

    # F3 via the maps lemma
    b = Builder()
    r2_block = _fresh_block(n, f.payload, u.payload, *r_block)
    shifted_w = shifted_slots(w, w)
    th_r2 = f.at(r2_block, neg_slots(l))
    u_r2_shift = u.at(r2_block, shifted_w)
    maps = maps_lemma_line(b, f, u, sq, equalizes)
    fp_rr = sq.apex.at(r_block + r2_block)
    # the hypotheses theta(R, x_-k), theta(R', x_-k) witness FP(R, R')
    hyps3 = frozenset({th_r, th_r2, NOT_E})
    inst_pair = b.exs_multi(
        b.r_conj(b.assume(hyps3, th_r), b.assume(hyps3, th_r2)), fp_rr, neg_slots(l)
    )
    maps_inst = cert_hyp_transport(
        b, maps, sq.apex.at(neg_slots(2 * n)), sq.apex, r_block + r2_block
    )
    two = b.chain(inst_pair, maps_inst)
    n_w = _fresh_block(w, u.payload, *r_block, *r2_block)
    u_rn = u.at(r_block, n_w)
    u_r2n = u.at(r2_block, n_w)
    f3u_1 = felim_hyp(b, u, F3, r_block + n_w + pos_slots(w))
    f3u_1 = b.load(f3u_1, u_rn, u.at(r_block, pos_slots(w)))
    f3u_2 = felim_hyp(b, u, F3, r2_block + n_w + shifted_w)
    f3u_2 = b.load(f3u_2, u_r2n, u_r2_shift)
    eqs1 = b.split_conj(f3u_1)  # /\ N = x_w
    eqs2 = b.split_conj(f3u_2)  # /\ N = x_{c+w}
    goal_eqs = []
    for j in range(w):
        flip1 = b.chain(eqs1[j], b.eq_sym(n_w[j], j + 1))
        tr = b.eq_trans(j + 1, n_w[j], w + j + 1)
        step = b.chain(flip1, tr)
        goal_eqs.append(b.chain(eqs2[j], step))
    all_eq = b.prove_conj(goal_eqs)
    inner = b.unload(all_eq, u_rn, u_r2n)
    no_n = b.exa_multi(inner, and_(u_rn, u_r2n), n_w)
    with_maps = b.chain(two, no_n)
    paired = b.unload(with_maps, th_r, u.at(r_block, pos_slots(w)))
    paired = b.unload(paired, th_r2, u_r2_shift)
    closed1 = b.exa_multi(paired, and_(th_r2, u_r2_shift), r2_block)
    closed2 = b.exa_multi(closed1, and_(th_r, u.at(r_block, pos_slots(w))), r_block)
    shifted_eta = subst_simul(eta_payload, shifted_w, pos_slots(w))
    both_eta = and_(eta_payload, shifted_eta)
    final = b.unload(closed2, eta_payload, shifted_eta)
    certs[F3] = b.build(b.meta_a(final, both_eta))

    eta = verify_premorphism(theory, fac.image, u.tgt, eta_payload, certs)
    solution = _coequalizer_solution_cert(fac, u, eta, sq, equalizes)
    return eta, solution


def cert_hyp_transport(b: Builder, line: int, hyp: Formula, obj: SynObject, targets) -> int:
    """Re-generalize a hypothesis-form line over the object's slot variables
    and instantiate it at `targets`."""
    q = len(obj.enumeration)
    src_slots = neg_slots(len(targets))
    i = b.meta_a(line, hyp)
    wrapped = b.wrap_universal(i, src_slots)
    elim = b.forall_elim(wrapped, list(targets))
    return b.meta_b(elim)


def _coequalizer_solution_cert(fac, u, eta, sq, equalizes) -> EquivCert:
    """eta o theta == u."""
    comp = compose(eta, fac.epi)
    cert = payload_equal_cert(comp, u)
    if cert is not None:
        return cert
    f = fac.morphism
    n, l, w = f.src.arity, f.tgt.arity, u.tgt.arity
    # mid: exists R (u(R, x_w) /\ FP(x_-i, R))
    r_block = _fresh_block(n, f.payload, u.payload)
    u_r = u.at(r_block, pos_slots(w))
    fp_ir = sq.apex.at(neg_slots(n) + r_block)
    mid = exists_many(r_block, and_(u_r, fp_ir))
    bridge = formulas_equal_cert(comp.payload, mid)
    if bridge is None:
        raise LimitsError("coequalizer solution: bridge did not certify")

    bf = Builder()  # mid => u payload
    maps = maps_lemma_line(bf, f, u, sq, equalizes)
    maps_inst = cert_hyp_transport(
        bf, maps, sq.apex.at(neg_slots(2 * n)), sq.apex, neg_slots(n) + r_block
    )
    hyps = frozenset({u_r, fp_ir, NOT_E})
    got = bf.chain(bf.assume(hyps, fp_ir), maps_inst)
    # got: => exists N (u(x_-i, N) /\ u(R, N)); extraction on u finishes
    n_w = _fresh_block(w, u.payload, *r_block)
    k_w = _fresh_block(w, u.payload, *r_block, *n_w)
    gamma_u = u.at(neg_slots(n), k_w)
    ext = extraction(bf, u, gamma_u, r_block, pos_slots(w), k_w, n_w)
    swap_tgt = exists_many(n_w, and_(u.at(r_block, n_w), u.at(neg_slots(n), n_w)))
    swapped = _swap_exists_pair(
        bf, exists_many(n_w, and_(u.at(neg_slots(n), n_w), u.at(r_block, n_w))), swap_tgt, w
    )
    got2 = bf.chain(got, swapped)
    pair = bf.r_conj(bf.assume(bf.seq(got2).lhs, u_r), got2)
    final = bf.chain(pair, bf.meta_b(ext))
    folded = bf.unload(final, u_r, fp_ir)
    fwd = bf.build(bf.exa_multi(folded, and_(u_r, fp_ir), r_block))

    bb = Builder()  # u payload => mid
    u_std = u.payload
    hyps2 = frozenset({u_std, NOT_E})
    w_fp = _fresh_block(l, f.payload, u.payload, *r_block)
    th_iw = f.at(neg_slots(n), w_fp)
    sub_h = frozenset({th_iw, u_std, NOT_E})
    th_line = bb.assume(sub_h, th_iw)
    fp_self = bb.exs_multi(bb.r_conj(th_line, bb.ant(th_line, sub_h)), sq.apex.at(neg_slots(n) + neg_slots(n)), w_fp)
    pair2 = bb.r_conj(bb.assume(bb.seq(fp_self).lhs, u_std), fp_self)
    closed = bb.exs_multi(pair2, mid, neg_slots(n))
    no_th = bb.exa_multi(closed, th_iw, w_fp)
    f2th = felim_hyp(bb, f, F2, neg_slots(n))
    alpha_from_u = bb.sdrop(
        bb.chain(bb.assume(hyps2, u_std), felim_hyp(bb, u, F1, neg_slots(n) + pos_slots(w))),
        keep_left=True,
    )
    tot = bb.chain(alpha_from_u, f2th)
    bwd = bb.build(bb.chain(tot, no_th))
    mid_cert = EquivCert(mid, u.payload, fwd, bwd)
    return cert_chain([bridge, mid_cert])


def coequalizer_uniqueness(
    fac, u, sq: PullbackSquare, eta: Premorphism, etap: Premorphism, etap_solution: EquivCert
) -> EquivCert:
    """Any eta' with eta' o theta = u (certified) equals the canonical
    mediator eta = exists R (theta(R, x_-k) /\ u(R, x_w))."""
    f = fac.morphism
    n, l, w = f.src.arity, f.tgt.arity, u.tgt.arity
    # the solution cert relative to the opened composite form
    full = cert_chain([_bridge_for(fac.epi, etap).flip(), etap_solution])

    # forward: eta => eta'
    b = Builder()
    r_block = _fresh_block(n, f.payload, u.payload, etap.payload)
    shifted = shifted_slots(w, w)
    th_rk = f.at(r_block, neg_slots(l))
    u_rw = u.at(r_block, pos_slots(w))
    etp_shift = etap.at(neg_slots(l), shifted)
    inst = cert_half_at(
        b, full.fwd, full.a, neg_slots(n) + pos_slots(w), r_block + shifted
    )  # open-composite(R, x_shift) => u(R, x_shift)
    one_prime = _open_composite_at(b, f, etap, r_block, shifted, inst)
    f3 = felim_hyp(b, u, F3, r_block + pos_slots(w) + shifted)
    f3 = b.load(f3, u_rw, u.at(r_block, shifted))
    three = b.chain(one_prime, b.ant(f3, b.seq(f3).lhs | b.seq(one_prime).lhs))
    eqs = b.split_conj(three)
    slots = _fresh_block(w, etap.payload, *r_block)
    rho = etap.at(neg_slots(l), slots)
    s1 = b.assume({etp_shift}, etp_shift)
    s2 = b.subs_multi(s1, rho, slots, shifted, pos_slots(w))
    cur = s2
    for j in range(w):
        flipped = b.chain(eqs[j], b.eq_sym(j + 1, w + j + 1))
        cur = b.chain(flipped, cur)
    cur = b.exa_multi(b.ant(cur, b.seq(cur).lhs | {etp_shift}), etp_shift, shifted)
    im_from_th = b.exs_multi(
        b.assume({th_rk, NOT_E}, th_rk), fac.image.at(neg_slots(l)), r_block
    )
    f2e = felim_hyp(b, etap, F2, neg_slots(l))
    tot = b.chain(im_from_th, f2e)
    cur = b.chain(tot, cur)
    cur = b.unload(cur, th_rk, u_rw)
    fwd = b.build(b.exa_multi(cur, and_(th_rk, u_rw), r_block))

    # backward: eta' => eta
    b = Builder()
    m_block = _fresh_block(n, f.payload, u.payload, etap.payload)
    th_mk = f.at(m_block, neg_slots(l))
    hyps = frozenset({th_mk, etap.payload, NOT_E})
    inst2 = cert_half_at(
        b, full.fwd, full.a, neg_slots(n) + pos_slots(w), m_block + pos_slots(w)
    )
    pair = b.r_conj(b.assume(hyps, th_mk), b.assume(hyps, etap.payload))
    opened_val = slot_instantiate(
        _open_composite(f, etap),
        (list(m_block), neg_slots(n)),
        (pos_slots(w), pos_slots(w)),
    )
    closed = b.exs_multi(pair, opened_val, neg_slots(l))
    u_mw = b.chain(closed, inst2)
    target_pair = b.r_conj(b.ant(b.assume(hyps, th_mk), b.seq(u_mw).lhs), u_mw)
    closed2 = b.exs_multi(target_pair, eta.payload, m_block)
    no_m = b.exa_multi(closed2, th_mk, m_block)
    im_line = b.sdrop(
        b.chain(
            b.assume({etap.payload, NOT_E}, etap.payload),
            felim_hyp(b, etap, F1, neg_slots(l) + pos_slots(w)),
        ),
        keep_left=True,
    )
    bwd = b.build(b.chain(im_line, no_m))
    return EquivCert(eta.payload, etap.payload, fwd, bwd)


def _open_composite(f, e):
    n, l = f.src.arity, f.tgt.arity
    w = e.tgt.arity
    w_fp = _fresh_block(l, f.payload, e.payload)
    return exists_many(
        w_fp, and_(f.at(neg_slots(n), w_fp), e.at(w_fp, pos_slots(w)))
    )


def _bridge_for(f, e) -> EquivCert:
    comp = compose(e, f)
    bridge = formulas_equal_cert(comp.payload, _open_composite(f, e))
    if bridge is None:
        raise LimitsError("composite bridge failed")
    return bridge


def _open_composite_at(b, f, e_to, r_block, shifted, inst) -> int:
    """theta(R, x_-k), e(x_-k, x_shift) => u(R, x_shift), from the
    instantiated solution certificate."""
    l = f.tgt.arity
    th_rk = f.at(r_block, neg_slots(l))
    eto = e_to.at(neg_slots(l), shifted)
    hyps = frozenset({th_rk, eto, NOT_E})
    pair = b.r_conj(b.assume(hyps, th_rk), b.assume(hyps, eto))
    opened_val = _open_composite(f, e_to)
    inst_val = slot_instantiate(
        opened_val,
        (list(r_block), neg_slots(f.src.arity)),
        (list(shifted), pos_slots(e_to.tgt.arity)),
    )
    closed = b.exs_multi(pair, inst_val, neg_slots(l))
    return b.chain(closed, inst)
