"""Objects, premorphisms, morphisms and composition of Syn(T).

Every construction carries a CertificateBundle of kernel derivations for its
functionality goals; `verify` re-checks a bundle from scratch.  Morphism
equality is decided by certified saturation + normalization, with a finite
model search as the refuter (three-valued outcomes, never a silent guess).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .formulas import (
    Eq,
    Exists,
    FV,
    Formula,
    Not,
    Signature,
    and_,
    big_and,
    exists_many,
    free_vars,
    is_sentence,
    max_index,
    nonempty,
    slot_instantiate,
    subst_simul,
    validate,
)
from .kernel import CheckFailure, Derivation, Sequent, check_derivation
from .normalize import normalize, subsume_cert
from .tactics import Builder, EquivCert, cert_chain, cert_refl

NOT_E = nonempty()


class CategoryError(Exception):
    pass


@dataclass(frozen=True)
class Theory:
    name: str
    sig: Signature
    axioms: frozenset[Formula]

    def __post_init__(self):
        for a in self.axioms:
            validate(a, self.sig)
            if not is_sentence(a):
                raise CategoryError("theory axioms must be sentences")

    @property
    def allowed(self) -> frozenset[Formula]:
        return self.axioms


@dataclass(frozen=True)
class SynObject:
    formula: Formula

    @property
    def enumeration(self) -> tuple[int, ...]:
        return tuple(sorted(free_vars(self.formula)))

    @property
    def arity(self) -> int:
        return len(self.enumeration)

    @property
    def is_sentence(self) -> bool:
        return self.arity == 0

    def at(self, variables: Sequence[int]) -> Formula:
        """The slot instantiation obj(T_i) over the increasing enumeration."""
        if self.is_sentence:
            return self.formula
        if len(variables) != self.arity:
            raise CategoryError("instantiation length mismatch")
        return subst_simul(self.formula, list(variables), list(self.enumeration))


def neg_slots(n: int) -> list[int]:
    return [-(i + 1) for i in range(n)]


def pos_slots(m: int) -> list[int]:
    return [i + 1 for i in range(m)]


def shifted_slots(m: int, by: int) -> list[int]:
    return [by + i + 1 for i in range(m)]


# goal names
F1, F2, F3 = "F1", "F2", "F3"
MF1, MF2, MF3 = "MF1", "MF2", "MF3"
T2, T4 = "T2", "T4"


def premorphism_type(src: SynObject, tgt: SynObject) -> int:
    if not src.is_sentence and not tgt.is_sentence:
        return 1
    if not src.is_sentence and tgt.is_sentence:
        return 2
    if src.is_sentence and not tgt.is_sentence:
        return 3
    return 4


def functionality_goals(
    theory: Theory, src: SynObject, tgt: SynObject, payload: Formula | None
) -> dict[str, Sequent]:
    """The exact goal sequents whose derivations make up a certificate
    bundle, per premorphism type."""
    ptype = premorphism_type(src, tgt)
    n, m = src.arity, tgt.arity
    if ptype in (1, 3):
        if payload is None:
            raise CategoryError("types 1 and 3 need a payload formula")
        allowed_slots = set(neg_slots(n)) | set(pos_slots(m))
        if not free_vars(payload) <= allowed_slots:
            raise CategoryError(
                f"payload uses variables outside the slot set {sorted(allowed_slots)}"
            )
        shifted = subst_simul(payload, shifted_slots(m, m), pos_slots(m))
        eqs = big_and([Eq(FV(j + 1), FV(m + j + 1)) for j in range(m)])
        single_valued = _imp(and_(payload, shifted), eqs)
        total_closure = exists_many(pos_slots(m), payload)
        if ptype == 1:
            return {
                F1: Sequent.of([NOT_E], _imp(payload, and_(src.at(neg_slots(n)), tgt.at(pos_slots(m))))),
                F2: Sequent.of([NOT_E], _imp(src.at(neg_slots(n)), total_closure)),
                F3: Sequent.of([NOT_E], single_valued),
            }
        return {
            MF1: Sequent.of([NOT_E], _imp(payload, and_(src.formula, tgt.at(pos_slots(m))))),
            MF2: Sequent.of([src.formula], total_closure),
            MF3: Sequent.of([NOT_E], single_valued),
        }
    if payload is not None:
        raise CategoryError("types 2 and 4 are formal: no payload")
    if ptype == 2:
        return {T2: Sequent.of([NOT_E, src.at(neg_slots(n))], tgt.formula)}
    return {T4: Sequent.of([src.formula], tgt.formula)}


def _imp(a: Formula, b: Formula) -> Formula:
    from .formulas import imp

    return imp(a, b)


GOAL_QUANTIFIERS = {
    F1: lambda n, m: neg_slots(n) + pos_slots(m),
    F2: lambda n, m: neg_slots(n),
    F3: lambda n, m: neg_slots(n) + pos_slots(m) + shifted_slots(m, m),
    MF1: lambda n, m: pos_slots(m),
    MF3: lambda n, m: pos_slots(m) + shifted_slots(m, m),
}


@dataclass(frozen=True)
class Premorphism:
    theory: Theory
    src: SynObject
    tgt: SynObject
    payload: Formula | None
    certs: dict[str, Derivation] = field(compare=False, hash=False)

    @property
    def ptype(self) -> int:
        return premorphism_type(self.src, self.tgt)

    @property
    def is_formal(self) -> bool:
        return self.ptype in (2, 4)

    def at(self, ins: Sequence[int], outs: Sequence[int]) -> Formula:
        """payload(ins, outs): simultaneous substitution into the slots."""
        if self.payload is None:
            raise CategoryError("formal premorphisms have no payload")
        return slot_instantiate(
            self.payload,
            (list(ins), neg_slots(self.src.arity)),
            (list(outs), pos_slots(self.tgt.arity)),
        )

    def verify(self) -> None:
        """Re-check every certificate from scratch against its goal."""
        goals = functionality_goals(self.theory, self.src, self.tgt, self.payload)
        for name, goal in goals.items():
            if name not in self.certs:
                raise CategoryError(f"missing certificate {name}")
            concl = check_derivation(self.certs[name])
            if concl.rhs != goal.rhs:
                raise CategoryError(f"certificate {name} proves the wrong sequent")
            if not concl.lhs <= (self.theory.allowed | goal.lhs):
                raise CategoryError(f"certificate {name} uses illegal hypotheses")

    def cert(self, name: str) -> Derivation:
        return self.certs[name]


Morphism = Premorphism  # a premorphism representative; equality via morphism_equal


def verify_premorphism(
    theory: Theory,
    src: SynObject,
    tgt: SynObject,
    payload: Formula | None,
    certs: dict[str, Derivation],
) -> Premorphism:
    pm = Premorphism(theory, src, tgt, payload, dict(certs))
    pm.verify()
    return pm


# ---------------------------------------------------------------------------
# forall-elimination plumbing over certificates


def felim_hyp(b: Builder, pm: Premorphism, name: str, targets: Sequence[int]) -> int:
    """Instantiate a universal functionality certificate at `targets` and
    return the hypothesis-form line (via the setup reasoning + META)."""
    qs = GOAL_QUANTIFIERS[name](pm.src.arity, pm.tgt.arity)
    if len(targets) != len(qs):
        raise CategoryError(f"felim {name}: expected {len(qs)} targets")
    i = b.splice(pm.cert(name))
    u = b.wrap_universal(i, qs)
    e = b.forall_elim(u, list(targets))
    return b.meta_b(e)


def t2_at(b: Builder, pm: Premorphism, ins: Sequence[int]) -> int:
    """Instantiate a type-2 existence certificate: Gamma, not E, src(ins) => s."""
    n = pm.src.arity
    i = b.splice(pm.cert(T2))
    j = b.meta_a(i, pm.src.at(neg_slots(n)))
    u = b.wrap_universal(j, neg_slots(n))
    e = b.forall_elim(u, list(ins))
    return b.meta_b(e)


def cert_half_at(
    b: Builder,
    half: Derivation,
    hyp: Formula,
    var_seq: Sequence[int],
    targets: Sequence[int],
) -> int:
    """Re-generalize one half of an EquivCert and instantiate it elsewhere."""
    i = b.splice(half)
    j = b.meta_a(i, hyp)
    u = b.wrap_universal(j, var_seq)
    e = b.forall_elim(u, list(targets))
    return b.meta_b(e)


def ids_conj(b: Builder, pairs: Sequence[tuple[int, int]]) -> int:
    """Line => big_and of equations, each side derivable by ID (a == b)."""
    lines = []
    for a, c in pairs:
        if a != c:
            raise CategoryError("ids_conj needs reflexive pairs")
        lines.append(b.identity(a))
    return b.prove_conj(lines)


def flip_eq_conj(b: Builder, i: int) -> int:
    """From Gamma => big_and(a_k = b_k) derive Gamma => big_and(b_k = a_k)."""
    parts = b.split_conj(i)
    flipped = []
    for ln in parts:
        match b.seq(ln).rhs:
            case Eq(FV(x), FV(y)):
                flipped.append(b.chain(ln, b.eq_sym(x, y)))
            case _:
                raise CategoryError("flip_eq_conj expects equations")
    return b.prove_conj(flipped)


# ---------------------------------------------------------------------------
# Special morphisms, identities


def structural_implication(
    b: Builder, theory: Theory, hyp: Formula, concl: Formula
) -> int:
    """Gamma, not E, hyp => concl when every conjunct of concl is a conjunct
    of hyp or a reflexive equation (the trivial implication certs)."""
    from .formulas import conjuncts

    have = conjuncts(hyp)
    hyps = frozenset({NOT_E, hyp})
    start = b.assume(hyps, hyp)
    parts = dict(zip(have, b.split_conj(start)))
    lines = []
    for c in conjuncts(concl):
        if c in parts:
            lines.append(parts[c])
        else:
            match c:
                case Eq(FV(x), FV(y)) if x == y:
                    lines.append(b.ant(b.identity(x), hyps))
                case _:
                    raise CategoryError(
                        "structural implication needs an explicit certificate"
                    )
    return b.prove_conj(lines)


def mk_special(
    theory: Theory,
    src: SynObject,
    tgt: SynObject,
    var_map: dict[int, int],
    imp_cert: Derivation | None = None,
) -> Premorphism:
    """The f-special morphism src -> tgt for a variable map f: free(tgt) ->
    free(src) witnessing T |- forall(src -> tgt(f(..))).

    imp_cert, if given, concludes Gamma, not E, src.formula => tgt.at(image)
    at the source's own enumeration; otherwise the implication must be
    structural (conjunct inclusion)."""
    if src.is_sentence or tgt.is_sentence:
        raise CategoryError("special morphisms connect nonsentences")
    n, m = src.arity, tgt.arity
    if set(var_map) != set(tgt.enumeration) or not set(var_map.values()) <= set(src.enumeration):
        raise CategoryError("variable map must send free(tgt) into free(src)")
    f_idx = [src.enumeration.index(var_map[v]) + 1 for v in tgt.enumeration]
    src_inst = src.at(neg_slots(n))
    eqs = [Eq(FV(j + 1), FV(-f_idx[j])) for j in range(m)]
    payload = big_and([src_inst] + eqs)
    image_negs = [-f_idx[j] for j in range(m)]
    tgt_image = tgt.at(image_negs)

    def implication_line(b: Builder, at_vars: Sequence[int]) -> int:
        """Gamma, not E, src(at) => tgt(f-image at)."""
        if imp_cert is None:
            inner = Builder()
            line = structural_implication(
                inner, theory, src.formula, tgt.at([var_map[v] for v in tgt.enumeration])
            )
            half = inner.build(line)
        else:
            half = imp_cert
        return cert_half_at(
            b,
            half,
            src.formula,
            list(src.enumeration),
            list(at_vars),
        )

    certs: dict[str, Derivation] = {}

    # F1
    b = Builder()
    start = b.assume({payload, NOT_E}, payload)
    src_line = b.sdrop(start, keep_left=True)
    eq_lines = b.split_conj(b.sdrop(start, keep_left=False))
    impl = implication_line(b, neg_slots(n))
    tgt_neg_line = b.chain(src_line, impl)  # => tgt(x_{-f(j)})
    # rewrite the negative image to the positive outputs via SUBS, one output
    # slot at a time (the image may repeat a negative variable)
    slots = _fresh_block(m, payload, tgt.formula)
    rho = tgt.at(slots)
    out = b.subs_multi(tgt_neg_line, rho, slots, image_negs, pos_slots(m))
    for j in range(m):
        out = b.flip_eq_hyp(out, image_negs[j], j + 1)
        out = b.chain(eq_lines[j], out)
    pair = b.r_conj(src_line, out)
    certs[F1] = b.build(b.meta_a(pair, payload))

    # F2
    b = Builder()
    witnesses = image_negs
    inst = big_and(
        [src_inst] + [Eq(FV(-f_idx[j]), FV(-f_idx[j])) for j in range(m)]
    )
    src_hyp = b.assume({src_inst, NOT_E}, src_inst)
    id_part = b.ant(ids_conj(b, [(-f_idx[j], -f_idx[j]) for j in range(m)]), {src_inst, NOT_E})
    pair = b.prove_conj([src_hyp] + b.split_conj(id_part))
    closed = b.exs_multi(pair, exists_many(pos_slots(m), payload), witnesses)
    certs[F2] = b.build(b.meta_a(closed, src_inst))

    # F3
    b = Builder()
    shifted = subst_simul(payload, shifted_slots(m, m), pos_slots(m))
    both = and_(payload, shifted)
    hyps = frozenset({both, NOT_E})
    start = b.assume(hyps, both)
    left_payload = b.sdrop(start, keep_left=True)
    right_payload = b.sdrop(start, keep_left=False)
    left = b.split_conj(b.sdrop(left_payload, keep_left=False))
    right = b.split_conj(b.sdrop(right_payload, keep_left=False))
    eq_goal_lines = []
    for j in range(m):
        l_eq = left[j]  # => x_{j+1} = x_{-f(j)}
        r_eq = right[j]  # => x_{m+j+1} = x_{-f(j)}
        r_flipped = b.chain(r_eq, b.eq_sym(m + j + 1, -f_idx[j]))
        trans = b.eq_trans(j + 1, -f_idx[j], m + j + 1)
        step = b.chain(l_eq, trans)
        eq_goal_lines.append(b.chain(r_flipped, step))
    eq_all = b.prove_conj(eq_goal_lines)
    certs[F3] = b.build(b.meta_a(eq_all, both))

    return verify_premorphism(theory, src, tgt, payload, certs)


def formal_type2(theory: Theory, src: SynObject, tgt: SynObject, cert: Derivation) -> Premorphism:
    return verify_premorphism(theory, src, tgt, None, {T2: cert})


def formal_type4(theory: Theory, src: SynObject, tgt: SynObject, cert: Derivation) -> Premorphism:
    return verify_premorphism(theory, src, tgt, None, {T4: cert})


def identity_of(theory: Theory, obj: SynObject) -> Premorphism:
    if obj.is_sentence:
        b = Builder()
        line = b.assume({obj.formula}, obj.formula)
        return formal_type4(theory, obj, obj, b.build(line))
    return mk_special(theory, obj, obj, {v: v for v in obj.enumeration})


def to_validity(theory: Theory, src: SynObject) -> Premorphism:
    """The unique map into the final object S."""
    from .formulas import validity

    s_obj = SynObject(validity())
    b = Builder()
    s_line = b.forall_s(b.identity(0), [0])
    if src.is_sentence:
        line = b.ant(s_line, {src.formula})
        return formal_type4(theory, src, s_obj, b.build(line))
    line = b.ant(s_line, {NOT_E, src.at(neg_slots(src.arity))})
    return formal_type2(theory, src, s_obj, b.build(line))


# ---------------------------------------------------------------------------
# Composition (the eight-case table)


def compose(g: Premorphism, f: Premorphism) -> Premorphism:
    """g after f; certificates generated by replaying the per-case proofs."""
    if f.theory is not g.theory and f.theory != g.theory:
        raise CategoryError("premorphisms live over different theories")
    if f.tgt.formula != g.src.formula:
        raise CategoryError("non-composable pair")
    key = (f.ptype, g.ptype)
    builder = _COMPOSE_CASES.get(key)
    if builder is None:
        raise CategoryError(f"no composition case for types {key}")
    return builder(g, f)


def _fresh_block(count: int, *used: Formula | int) -> list[int]:
    """A strictly increasing block above every free index in play.  Bound
    variables are nameless, so anything relevant must be passed explicitly
    (e.g. previously chosen blocks, as ints)."""
    top = max(
        [max_index(x) if isinstance(x, Formula) else abs(x) for x in used] + [count, 4]
    )
    return [top + 1 + i for i in range(count)]


def _case_1_1(g: Premorphism, f: Premorphism) -> Premorphism:
    theory = f.theory
    alpha, beta, gamma = f.src, f.tgt, g.tgt
    n, m, l = alpha.arity, beta.arity, gamma.arity
    t_block = _fresh_block(m, f.payload, g.payload, alpha.formula, gamma.formula)
    th1 = f.at(neg_slots(n), t_block)
    th2 = g.at(t_block, pos_slots(l))
    matrix = and_(th1, th2)
    payload = exists_many(t_block, matrix)
    certs: dict[str, Derivation] = {}

    # F1
    b = Builder()
    l1 = felim_hyp(b, f, F1, neg_slots(n) + t_block)
    l3 = b.sdrop(l1, keep_left=True)
    l2 = felim_hyp(b, g, F1, t_block + pos_slots(l))
    l4 = b.sdrop(l2, keep_left=False)
    pair = _dconj(b, l3, l4, th1, th2)
    closed = b.exa_multi(pair, matrix, t_block)
    certs[F1] = b.build(b.meta_a(closed, payload))

    # F2
    b = Builder()
    full_target = exists_many(pos_slots(l), payload)
    l7 = felim_hyp(b, g, F2, t_block)  # beta(T) => exists x_k th2(T, .)
    l11 = b.sdrop(felim_hyp(b, f, F1, neg_slots(n) + t_block), keep_left=False)
    l12 = b.chain(l11, l7)  # th1 => exists x_k th2
    k_block = _fresh_block(l, payload, gamma.formula, *t_block)
    th2_k = g.at(t_block, k_block)
    c1 = b.assume({th1, th2_k, NOT_E}, th1)
    c2 = b.assume({th1, th2_k, NOT_E}, th2_k)
    pair = b.r_conj(c1, c2)
    closed = b.exs_multi(pair, full_target, k_block + t_block)
    opened = b.exa_multi(closed, th2_k, k_block)
    e2 = b.chain(l12, opened)  # th1 => full_target
    l14 = felim_hyp(b, f, F2, neg_slots(n))
    e3 = b.exa_multi(e2, th1, t_block)
    e4 = b.chain(l14, e3)
    certs[F2] = b.build(b.meta_a(e4, alpha.at(neg_slots(n))))

    # F3
    b = Builder()
    shifted_payload = subst_simul(payload, shifted_slots(l, l), pos_slots(l))
    lblock = _fresh_block(m, payload, shifted_payload, *t_block)
    th1_L = f.at(neg_slots(n), lblock)
    th2_L_shift = subst_simul(g.at(lblock, pos_slots(l)), shifted_slots(l, l), pos_slots(l))
    f3a = felim_hyp(b, f, F3, neg_slots(n) + lblock + t_block)
    # hypothesis is th1(x-,L) /\ th1(x-,T); conclusion /\ L = T
    s1 = b.assume({th2_L_shift}, th2_L_shift)
    rho_slots = _fresh_block(m, payload, shifted_payload, *t_block, *lblock)
    rho = subst_simul(
        subst_simul(g.payload, shifted_slots(l, l), pos_slots(l)), rho_slots, neg_slots(m)
    )
    s2 = b.subs_multi(s1, rho, rho_slots, lblock, t_block)
    cur = s2
    for eq_line in b.split_conj(f3a):
        cur = b.chain(eq_line, cur)
    # now: Gamma, not E, th1(L)&th1(T)-pair, th2_L_shift => th2_T_shift
    s4 = b.assume(b.seq(cur).lhs | {th2}, th2)
    cur = b.ant(cur, b.seq(cur).lhs | {th2})
    pair56 = b.r_conj(s4, cur)
    f3b = felim_hyp(b, g, F3, t_block + pos_slots(l) + shifted_slots(l, l))
    eqs = b.chain(pair56, f3b)
    # restructure hypotheses into the two existential pairs
    eqs = b.load(eqs, th1_L, th1)
    eqs = b.unload(eqs, th1, th2)
    eqs = b.unload(eqs, th1_L, th2_L_shift)
    eqs = b.exa_multi(eqs, and_(th1_L, th2_L_shift), lblock)
    eqs = b.exa_multi(eqs, and_(th1, th2), t_block)
    eqs = b.unload(eqs, payload, shifted_payload)
    certs[F3] = b.build(b.meta_a(eqs, and_(payload, shifted_payload)))

    return verify_premorphism(theory, alpha, gamma, payload, certs)


def _dconj(b: Builder, i: int, j: int, h1: Formula, h2: Formula) -> int:
    """From Gamma1, h1 => a and Gamma2, h2 => b derive ..., h1 /\\ h2 => a /\\ b."""
    union = (b.seq(i).lhs | b.seq(j).lhs) | {h1, h2}
    ii = b.ant(i, union)
    jj = b.ant(j, union)
    pair = b.r_conj(ii, jj)
    return b.unload(pair, h1, h2)


def _case_3_1(g: Premorphism, f: Premorphism) -> Premorphism:
    """1 after 3: s -> beta -> gamma, same formula as 1 after 1 minus x_-i."""
    theory = f.theory
    s, beta, gamma = f.src, f.tgt, g.tgt
    m, l = beta.arity, gamma.arity
    t_block = _fresh_block(m, f.payload, g.payload, gamma.formula)
    th1 = f.at([], t_block)
    th2 = g.at(t_block, pos_slots(l))
    matrix = and_(th1, th2)
    payload = exists_many(t_block, matrix)
    certs: dict[str, Derivation] = {}

    # MF1: like F1 with the sentence hypothesis from mF1^th1
    b = Builder()
    l1 = felim_hyp(b, f, MF1, t_block)
    l3 = b.sdrop(l1, keep_left=True)  # th1 => s
    l2 = felim_hyp(b, g, F1, t_block + pos_slots(l))
    l4 = b.sdrop(l2, keep_left=False)
    pair = _dconj(b, l3, l4, th1, th2)
    closed = b.exa_multi(pair, matrix, t_block)
    certs[MF1] = b.build(b.meta_a(closed, payload))

    # MF2 (not universal): Gamma, s => exists x_k exists T matrix
    b = Builder()
    full_target = exists_many(pos_slots(l), payload)
    mf1 = b.sdrop(felim_hyp(b, f, MF1, t_block), keep_left=False)  # th1 => beta(T)
    f2 = felim_hyp(b, g, F2, t_block)  # beta(T) => exists x_k th2
    l3b = b.chain(mf1, f2)
    k_block = _fresh_block(l, payload, gamma.formula, *t_block)
    th2_k = g.at(t_block, k_block)
    c1 = b.assume({th1, th2_k, NOT_E}, th1)
    c2 = b.assume({th1, th2_k, NOT_E}, th2_k)
    closed = b.exs_multi(b.r_conj(c1, c2), full_target, k_block + t_block)
    opened = b.exa_multi(closed, th2_k, k_block)
    e2 = b.chain(l3b, opened)
    e3 = b.exa_multi(e2, th1, t_block)
    ex_th1 = exists_many(t_block, th1)
    e4 = b.consume_not_e(e3, ex_th1)
    mf2_f = b.splice(f.cert(MF2))  # Gamma, s => exists x_j th1-closure
    certs[MF2] = b.build(b.chain(mf2_f, e4))

    # MF3: same derivation as F3 in case 1, no negative block
    b = Builder()
    shifted_payload = subst_simul(payload, shifted_slots(l, l), pos_slots(l))
    lblock = _fresh_block(m, payload, shifted_payload, *t_block)
    th1_L = f.at([], lblock)
    th2_L_shift = subst_simul(g.at(lblock, pos_slots(l)), shifted_slots(l, l), pos_slots(l))
    f3a = felim_hyp(b, f, MF3, lblock + t_block)
    s1 = b.assume({th2_L_shift}, th2_L_shift)
    rho_slots = _fresh_block(m, payload, shifted_payload, *t_block, *lblock)
    rho = subst_simul(
        subst_simul(g.payload, shifted_slots(l, l), pos_slots(l)), rho_slots, neg_slots(m)
    )
    s2 = b.subs_multi(s1, rho, rho_slots, lblock, t_block)
    cur = s2
    for eq_line in b.split_conj(f3a):
        cur = b.chain(eq_line, cur)
    s4 = b.assume(b.seq(cur).lhs | {th2}, th2)
    cur = b.ant(cur, b.seq(cur).lhs | {th2})
    pair56 = b.r_conj(s4, cur)
    f3b = felim_hyp(b, g, F3, t_block + pos_slots(l) + shifted_slots(l, l))
    eqs = b.chain(pair56, f3b)
    eqs = b.load(eqs, th1_L, th1)
    eqs = b.unload(eqs, th1, th2)
    eqs = b.unload(eqs, th1_L, th2_L_shift)
    eqs = b.exa_multi(eqs, and_(th1_L, th2_L_shift), lblock)
    eqs = b.exa_multi(eqs, and_(th1, th2), t_block)
    eqs = b.unload(eqs, payload, shifted_payload)
    certs[MF3] = b.build(b.meta_a(eqs, and_(payload, shifted_payload)))

    return verify_premorphism(theory, s, gamma, payload, certs)


def _case_2_3(g: Premorphism, f: Premorphism) -> Premorphism:
    """1 = 3 after 2: alpha -> s -> gamma gives alpha(x-) /\\ th2(x_k)."""
    theory = f.theory
    alpha, gamma = f.src, g.tgt
    n, l = alpha.arity, gamma.arity
    alpha_inst = alpha.at(neg_slots(n))
    th2 = g.at([], pos_slots(l))
    payload = and_(alpha_inst, th2)
    certs: dict[str, Derivation] = {}

    # F1
    b = Builder()
    start = b.assume({payload, NOT_E}, payload)
    a_line = b.sdrop(start, keep_left=True)
    t_line = b.sdrop(start, keep_left=False)
    mf1 = felim_hyp(b, g, MF1, pos_slots(l))
    g_line = b.sdrop(b.chain(t_line, mf1), keep_left=False)
    pair = b.r_conj(a_line, g_line)
    certs[F1] = b.build(b.meta_a(pair, payload))

    # F2
    b = Builder()
    t2 = t2_at(b, f, neg_slots(n))  # Gamma, not E, alpha(x-) => s
    mf2 = b.splice(g.cert(MF2))  # Gamma, s => exists x_k th2
    tot = b.chain(t2, mf2)
    k_block = _fresh_block(l, payload)
    th2_k = g.at([], k_block)
    c1 = b.assume({alpha_inst, th2_k, NOT_E}, alpha_inst)
    c2 = b.assume({alpha_inst, th2_k, NOT_E}, th2_k)
    closed = b.exs_multi(b.r_conj(c1, c2), exists_many(pos_slots(l), payload), k_block)
    opened = b.exa_multi(closed, th2_k, k_block)
    got = b.chain(tot, opened)
    certs[F2] = b.build(b.meta_a(got, alpha_inst))

    # F3
    b = Builder()
    shifted_payload = subst_simul(payload, shifted_slots(l, l), pos_slots(l))
    both = and_(payload, shifted_payload)
    start = b.assume({both, NOT_E}, both)
    t_line = b.sdrop(b.sdrop(start, keep_left=True), keep_left=False)
    t_shift = b.sdrop(b.sdrop(start, keep_left=False), keep_left=False)
    mf3 = felim_hyp(b, g, MF3, pos_slots(l) + shifted_slots(l, l))
    pair = b.r_conj(t_line, t_shift)
    eqs = b.chain(pair, mf3)
    certs[F3] = b.build(b.meta_a(eqs, both))

    return verify_premorphism(theory, alpha, gamma, payload, certs)


def _case_1_2(g: Premorphism, f: Premorphism) -> Premorphism:
    """2 after 1: alpha -> beta -> s' is formal."""
    theory = f.theory
    alpha, beta = f.src, f.tgt
    n, m = alpha.arity, beta.arity
    b = Builder()
    t_block = _fresh_block(m, f.payload, alpha.formula)
    th1 = f.at(neg_slots(n), t_block)
    l1 = t2_at(b, g, t_block)  # Gamma, not E, beta(T) => s
    l1p = b.exa_multi(l1, beta.at(t_block), t_block)
    l2 = b.sdrop(felim_hyp(b, f, F1, neg_slots(n) + t_block), keep_left=False)
    l3 = b.exd_multi(l2, th1, t_block)
    l4 = felim_hyp(b, f, F2, neg_slots(n))
    l5 = b.chain(l4, l3)
    out = b.chain(l5, l1p)
    return formal_type2(theory, alpha, g.tgt, b.build(out))


def _case_2_4(g: Premorphism, f: Premorphism) -> Premorphism:
    """2 after 4-composition wait: 4 after 2: alpha -> s -> s' is formal type 2."""
    b = Builder()
    t2 = b.splice(f.cert(T2))
    t4 = b.splice(g.cert(T4))
    out = b.chain(t2, t4)
    return formal_type2(f.theory, f.src, g.tgt, b.build(out))


def _case_3_2(g: Premorphism, f: Premorphism) -> Premorphism:
    """2 after 3: s -> beta -> s' is formal type 4."""
    theory = f.theory
    beta = f.tgt
    m = beta.arity
    b = Builder()
    x_block = _fresh_block(m, f.payload, beta.formula)
    th1_x = f.at([], x_block)
    ex_th1 = exists_many(x_block, th1_x)
    l1 = t2_at(b, g, x_block)
    l1p = b.exa_multi(l1, beta.at(x_block), x_block)
    l3 = b.sdrop(felim_hyp(b, f, MF1, x_block), keep_left=False)
    l3p = b.exd_multi(l3, th1_x, x_block)
    l4 = b.chain(l3p, l1p)  # Gamma, not E, exists th1 => s'
    l4 = b.consume_not_e(l4, ex_th1)
    mf2 = b.splice(f.cert(MF2))
    out = b.chain(mf2, l4)
    return formal_type4(theory, f.src, g.tgt, b.build(out))


def _case_4_3(g: Premorphism, f: Premorphism) -> Premorphism:
    """3 after 4: s -> s' -> gamma gives s /\\ th2(x_k)."""
    theory = f.theory
    s, gamma = f.src, g.tgt
    l = gamma.arity
    th2 = g.at([], pos_slots(l))
    payload = and_(s.formula, th2)
    certs: dict[str, Derivation] = {}

    b = Builder()
    start = b.assume({payload, NOT_E}, payload)
    s_line = b.sdrop(start, keep_left=True)
    t_line = b.sdrop(start, keep_left=False)
    mf1 = felim_hyp(b, g, MF1, pos_slots(l))
    g_line = b.sdrop(b.chain(t_line, mf1), keep_left=False)
    certs[MF1] = b.build(b.meta_a(b.r_conj(s_line, g_line), payload))

    b = Builder()
    t4 = b.splice(f.cert(T4))
    mf2 = b.splice(g.cert(MF2))
    tot = b.chain(t4, mf2)  # Gamma, s => exists x_k th2
    k_block = _fresh_block(l, payload)
    th2_k = g.at([], k_block)
    ex_th2 = exists_many(k_block, th2_k)
    hyps = {s.formula, th2_k, NOT_E}
    pair = b.r_conj(b.assume(hyps, s.formula), b.assume(hyps, th2_k))
    closed = b.exs_multi(pair, exists_many(pos_slots(l), payload), k_block)
    opened = b.exa_multi(closed, th2_k, k_block)
    opened = b.consume_not_e(opened, ex_th2)
    got = b.chain(tot, opened)
    certs[MF2] = b.build(got)

    b = Builder()
    shifted_payload = subst_simul(payload, shifted_slots(l, l), pos_slots(l))
    both = and_(payload, shifted_payload)
    start = b.assume({both, NOT_E}, both)
    t_line = b.sdrop(b.sdrop(start, keep_left=True), keep_left=False)
    t_shift = b.sdrop(b.sdrop(start, keep_left=False), keep_left=False)
    mf3 = felim_hyp(b, g, MF3, pos_slots(l) + shifted_slots(l, l))
    eqs = b.chain(b.r_conj(t_line, t_shift), mf3)
    certs[MF3] = b.build(b.meta_a(eqs, both))

    return verify_premorphism(theory, s, gamma, payload, certs)


def _case_4_4(g: Premorphism, f: Premorphism) -> Premorphism:
    b = Builder()
    out = b.chain(b.splice(f.cert(T4)), b.splice(g.cert(T4)))
    return formal_type4(f.theory, f.src, g.tgt, b.build(out))


_COMPOSE_CASES = {
    (1, 1): _case_1_1,
    (3, 1): _case_3_1,
    (2, 3): _case_2_3,
    (1, 2): _case_1_2,
    (2, 4): _case_2_4,
    (3, 2): _case_3_2,
    (4, 3): _case_4_3,
    (4, 4): _case_4_4,
}


# ---------------------------------------------------------------------------
# Morphism equality: saturation + normalization + subsumption, else oracle


class Verdict(Enum):
    EQUAL = "equal"
    REFUTED = "refuted"
    UNKNOWN = "unknown"


@dataclass
class EqualityResult:
    verdict: Verdict
    cert: EquivCert | None = None
    countermodel: object = None


def saturate(pm: Premorphism) -> tuple[Formula, EquivCert]:
    """payload == payload /\\ src-instance /\\ tgt-instance (via F1/mF1)."""
    n, m = pm.src.arity, pm.tgt.arity
    if pm.ptype == 1:
        extra = and_(pm.src.at(neg_slots(n)), pm.tgt.at(pos_slots(m)))
        f1_name = F1
        targets = neg_slots(n) + pos_slots(m)
    elif pm.ptype == 3:
        extra = and_(pm.src.formula, pm.tgt.at(pos_slots(m)))
        f1_name = MF1
        targets = pos_slots(m)
    else:
        raise CategoryError("saturation applies to payload-carrying premorphisms")
    sat = and_(pm.payload, extra)
    bf = Builder()
    f1 = felim_hyp(bf, pm, f1_name, targets)
    pair = bf.r_conj(bf.assume(bf.seq(f1).lhs, pm.payload), f1)
    fwd = bf.build(pair)
    bb = Builder()
    bwd = bb.build(bb.sdrop(bb.assume({sat, NOT_E}, sat), keep_left=True))
    return sat, EquivCert(pm.payload, sat, fwd, bwd)


def reduced_payload(pm: Premorphism) -> tuple[Formula, EquivCert]:
    sat, c1 = saturate(pm)
    norm, c2 = normalize(sat)
    red, c3 = subsume_cert(norm)
    return red, cert_chain([c1, c2, c3])


def payload_equal_cert(a: Premorphism, b: Premorphism) -> EquivCert | None:
    ra, ca = reduced_payload(a)
    rb, cb = reduced_payload(b)
    if ra != rb:
        return None
    return cert_chain([ca, cb.flip()])


def morphism_equal(a: Premorphism, b: Premorphism, oracle_size: int = 2) -> EqualityResult:
    if (a.src.formula, a.tgt.formula) != (b.src.formula, b.tgt.formula):
        raise CategoryError("morphism equality needs equal endpoints")
    if a.is_formal and b.is_formal:
        return EqualityResult(Verdict.EQUAL)  # at most one formal object
    if a.is_formal != b.is_formal:
        raise CategoryError("formal and payload morphisms cannot share endpoints")
    if a.payload == b.payload:
        return EqualityResult(Verdict.EQUAL, cert_refl(a.payload))
    cert = payload_equal_cert(a, b)
    if cert is not None:
        return EqualityResult(Verdict.EQUAL, cert)
    counter = _find_countermodel(a, b, oracle_size)
    if counter is not None:
        return EqualityResult(Verdict.REFUTED, countermodel=counter)
    return EqualityResult(Verdict.UNKNOWN)


def _find_countermodel(a: Premorphism, b: Premorphism, oracle_size: int):
    from .functor import definable_function
    from .semantics import enumerate_structures, is_model

    for m in enumerate_structures(a.theory.sig, oracle_size):
        if m.size == 0 or not is_model(m, a.theory.axioms):
            continue
        if definable_function(m, a) != definable_function(m, b):
            return m
    return None


# ---------------------------------------------------------------------------
# The Extraction Lemma and the isomorphism conditions


def extraction(
    b: Builder,
    theta: Premorphism,
    gamma: Formula,
    p_vars: Sequence[int],
    q_vars: Sequence[int],
    k_vars: Sequence[int],
    w_vars: Sequence[int],
) -> int:
    """Line Gamma, not E => theta(P,Q) /\\ exists W (theta(P,W) /\\ g[W/K]) -> g[Q/K]."""
    if len(set(w_vars)) != len(w_vars):
        raise CategoryError("extraction needs distinct fresh W variables")
    used = set(p_vars) | set(q_vars) | set(k_vars) | free_vars(gamma) | free_vars(
        theta.payload
    )
    if set(w_vars) & used:
        raise CategoryError("extraction W variables must be fresh")
    th_pq = theta.at(p_vars, q_vars)
    th_pw = theta.at(p_vars, w_vars)
    g_w = subst_simul(gamma, list(w_vars), list(k_vars))
    g_q = subst_simul(gamma, list(q_vars), list(k_vars))
    name = F3 if theta.ptype == 1 else MF3
    targets = (list(p_vars) if theta.ptype == 1 else []) + list(w_vars) + list(q_vars)
    f3 = felim_hyp(b, theta, name, targets)  # th(P,W) /\ th(P,Q) => /\ W = Q
    f3 = b.load(f3, th_pw, th_pq)
    slots = _fresh_block(len(k_vars), gamma, *w_vars, *q_vars, *k_vars)
    rho = subst_simul(gamma, slots, list(k_vars))
    s1 = b.assume({g_w}, g_w)
    s2 = b.subs_multi(s1, rho, slots, list(w_vars), list(q_vars))
    cur = s2
    for eq_line in b.split_conj(f3):
        cur = b.chain(eq_line, cur)
    cur = b.unload(cur, th_pw, g_w)
    cur = b.exa_multi(cur, and_(th_pw, g_w), list(w_vars))
    ex_pair = exists_many(list(w_vars), and_(th_pw, g_w))
    cur = b.unload(cur, th_pq, ex_pair)
    return b.meta_a(cur, and_(th_pq, ex_pair))


def negated_variables(pm: Premorphism) -> Formula:
    """theta~ : swap input and output slots of a type-1 payload."""
    n, m = pm.src.arity, pm.tgt.arity
    return slot_instantiate(
        pm.payload,
        (pos_slots(n), neg_slots(n)),
        (neg_slots(m), pos_slots(m)),
    )


def iso_type1_sufficient(
    theta: Premorphism, theta_tilde: Premorphism
) -> tuple[EquivCert, EquivCert]:
    """Given theta: alpha -> beta and its negated-variables formula verified
    as a premorphism beta -> alpha, produce the certificates that both
    composites equal the identities (so theta is an isomorphism)."""
    if theta_tilde.payload != negated_variables(theta):
        raise CategoryError("second argument must carry the negated-variables payload")
    alpha = theta.src
    beta = theta.tgt
    theory = theta.theory
    n, m = alpha.arity, beta.arity

    cert_a = _iso_identity_cert(theta, theta_tilde)  # theta~ o theta = I_alpha
    cert_b = _iso_identity_cert(theta_tilde, theta)  # theta o theta~ = I_beta
    del theory, beta, n, m
    return cert_a, cert_b


def _iso_identity_cert(theta: Premorphism, theta_tilde: Premorphism) -> EquivCert:
    """EquivCert(composition payload of theta_tilde o theta, identity payload)."""
    comp = compose(theta_tilde, theta)
    ident = identity_of(theta.theory, theta.src)
    result = payload_equal_cert(comp, ident)
    if result is None:
        result = _iso_identity_cert_direct(theta, theta_tilde, comp, ident)
    return result


def _iso_identity_cert_direct(
    theta: Premorphism, theta_tilde: Premorphism, comp: Premorphism, ident: Premorphism
) -> EquivCert:
    """The paper's (*a)/(*b) derivations for theta~ o theta = I."""
    from .formulas import open_exists

    n, m = theta.src.arity, theta.tgt.arity
    payload = comp.payload
    match payload:
        case Exists(_):
            pass
        case _:
            raise CategoryError("unexpected composition payload shape")
    t_block = []
    cur = payload
    base = max_index(payload) + 1
    for k in range(m):
        t_block.append(base + k)
        cur = open_exists(cur, base + k)
    matrix = cur  # theta(x-, T) /\ theta~(T, x) = theta(x-,T) /\ theta(x, T)
    th_neg_t = theta.at(neg_slots(n), t_block)
    th_pos_t = theta.at(pos_slots(n), t_block)

    # (*a): comp => I_alpha payload
    b = Builder()
    f3t = felim_hyp(b, theta_tilde, F3, t_block + neg_slots(n) + pos_slots(n))
    f3t = b.load(f3t, th_neg_t, th_pos_t)
    eqs = flip_eq_conj(b, f3t)  # => /\ x_i = x_-i
    f1 = b.sdrop(felim_hyp(b, theta, F1, neg_slots(n) + t_block), keep_left=True)
    alpha_line = b.ant(f1, b.seq(f1).lhs | b.seq(eqs).lhs)
    eq_parts = b.split_conj(eqs)
    ident_line = b.prove_conj([alpha_line] + eq_parts)
    ident_line = b.unload(ident_line, th_neg_t, th_pos_t)
    closed = b.exa_multi(ident_line, matrix, t_block)
    fwd = b.build(closed)

    # (*b): I_alpha payload => comp
    b = Builder()
    f2 = felim_hyp(b, theta, F2, neg_slots(n))
    start = b.assume({th_neg_t}, th_neg_t)
    slots = _fresh_block(n, payload)
    rho = subst_simul(th_neg_t, slots, neg_slots(n))
    moved = b.subs_multi(start, rho, slots, neg_slots(n), pos_slots(n))
    pair = b.r_conj(b.ant(start, b.seq(moved).lhs | {th_neg_t}), moved)
    lifted = b.exd_multi(pair, th_neg_t, t_block)
    got = b.chain(f2, lifted)
    # hypotheses: alpha(x-), and x_-i = x_i equations; flip then fold I_alpha
    for i in range(1, n + 1):
        got = b.flip_eq_hyp(got, -i, i)
    got = b.unload_all(got, ident.payload)
    bwd = b.build(got)
    return EquivCert(comp.payload, ident.payload, fwd, bwd)


def iso_type1_necessary(
    theta: Premorphism,
    iota: Premorphism,
    left_identity: EquivCert,
    right_identity: EquivCert,
) -> EquivCert:
    """Given an iso theta: alpha -> beta with stated inverse iota and the two
    composition-equals-identity certificates, certify iota == theta~."""
    n, m = theta.src.arity, theta.tgt.arity
    tilde = negated_variables(theta)
    comp_it = compose(iota, theta)  # alpha -> alpha
    comp_ti = compose(theta, iota)  # beta -> beta
    if left_identity.a != comp_it.payload or right_identity.a != comp_ti.payload:
        raise CategoryError("identity certificates do not match the compositions")

    # (*a): Gamma, not E, theta~ => iota payload
    b = Builder()
    inst = cert_half_at(
        b,
        left_identity.bwd,
        left_identity.b,
        neg_slots(n) + pos_slots(n),
        pos_slots(n) + pos_slots(n),
    )  # alpha(x_i) /\ /\ x_i=x_i => exists M (theta(x_i,M) /\ iota(M,x_i))
    f1 = b.sdrop(felim_hyp(b, theta, F1, pos_slots(n) + neg_slots(m)), keep_left=True)
    ids = ids_conj(b, [(i, i) for i in pos_slots(n)])
    hyp_line = b.r_conj(f1, b.ant(ids, b.seq(f1).lhs))
    chained = b.chain(hyp_line, inst)
    with_self = b.r_conj(b.assume(b.seq(chained).lhs, tilde), chained)
    k_block = _fresh_block(m, tilde, iota.payload)
    w_block = _fresh_block(m, tilde, iota.payload, *k_block)
    gamma_formula = iota.at(k_block, pos_slots(n))
    ext = extraction(b, theta, gamma_formula, pos_slots(n), neg_slots(m), k_block, w_block)
    ext_hyp = b.meta_b(ext)
    out = b.chain(with_self, ext_hyp)
    fwd = b.build(out)

    # (*b): Gamma, not E, iota => theta~
    b = Builder()
    inst = cert_half_at(
        b,
        right_identity.bwd,
        right_identity.b,
        neg_slots(m) + pos_slots(m),
        neg_slots(m) + neg_slots(m),
    )  # beta(x_-j) /\ /\ x_-j = x_-j => exists T (iota(x_-j,T) /\ theta(T,x_-j))
    f1 = b.sdrop(felim_hyp(b, iota, F1, neg_slots(m) + pos_slots(n)), keep_left=True)
    ids = ids_conj(b, [(-j, -j) for j in pos_slots(m)])
    hyp_line = b.r_conj(f1, b.ant(ids, b.seq(f1).lhs))
    chained = b.chain(hyp_line, inst)
    with_self = b.r_conj(b.assume(b.seq(chained).lhs, iota.payload), chained)
    k_block = _fresh_block(n, tilde, iota.payload)
    w_block = _fresh_block(n, tilde, iota.payload, *k_block)
    gamma_formula = theta.at(k_block, neg_slots(m))
    ext = extraction(b, iota, gamma_formula, neg_slots(m), pos_slots(n), k_block, w_block)
    ext_hyp = b.meta_b(ext)
    out = b.chain(with_self, ext_hyp)
    bwd = b.build(out)
    return EquivCert(tilde, iota.payload, fwd, bwd)
