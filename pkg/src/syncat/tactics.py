"""Derived rules as derivation-building macros.

Every function here only appends basic-rule lines to a Builder; the kernel
re-checks the result, so nothing in this module is trusted.  Each emitted
line is checked eagerly while building so mistakes surface at the call site.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

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
    conjuncts,
    exists_many,
    free_vars,
    imp,
    nonempty,
    open_exists,
    open_forall,
    open_forall_many,
    render,
    split_and,
    subst,
    subst_simul,
)
from .kernel import Derivation, RuleApp, Sequent, apply_rule

NOT_E = nonempty()


class TacticError(Exception):
    pass


class Builder:
    """Accumulates checked basic-rule lines; helpers return line indices."""

    def __init__(self) -> None:
        self.lines: list[RuleApp] = []
        self.seqs: list[Sequent] = []

    def seq(self, i: int) -> Sequent:
        return self.seqs[i]

    def emit(self, rule: str, premises: Sequence[int], data: tuple, conclusion: Sequent) -> int:
        app = RuleApp(rule, tuple(premises), data, conclusion)
        apply_rule(app, [self.seqs[p] for p in premises])
        self.lines.append(app)
        self.seqs.append(conclusion)
        return len(self.lines) - 1

    def splice(self, d: Derivation) -> int:
        """Append a finished derivation; returns its conclusion's new index."""
        offset = len(self.lines)
        for app in d.lines:
            shifted = RuleApp(
                app.rule,
                tuple(p + offset for p in app.premises),
                app.data,
                app.conclusion,
            )
            self.lines.append(shifted)
            self.seqs.append(app.conclusion)
        return len(self.lines) - 1

    def build(self, upto: int | None = None) -> Derivation:
        end = len(self.lines) if upto is None else upto + 1
        return Derivation(tuple(self.lines[:end]))

    # -- basic rules --------------------------------------------------------

    def assume(self, hyps: Iterable[Formula], phi: Formula) -> int:
        return self.emit("ASSM", (), (), Sequent.of(list(hyps) + [phi], phi))

    def identity(self, v: int) -> int:
        return self.emit("ID", (), (), Sequent.of([], Eq(FV(v), FV(v))))

    def ant(self, i: int, extra: Iterable[Formula]) -> int:
        s = self.seq(i)
        target = Sequent(s.lhs | frozenset(extra), s.rhs)
        if target == s:
            return i
        return self.emit("ANT", (i,), (), target)

    def pc(self, pivot: Formula, i_pos: int, i_neg: int, gamma: frozenset | None = None) -> int:
        pos = self.seq(i_pos)
        concl = Sequent(pos.lhs - {pivot} if gamma is None else gamma, pos.rhs)
        return self.emit("PC", (i_pos, i_neg), (pivot,), concl)

    def ctr(
        self, chi: Formula, i_chi: int, i_notchi: int, goal: Formula, gamma: frozenset | None = None
    ) -> int:
        s = self.seq(i_chi)
        concl = Sequent(s.lhs - {Not(goal)} if gamma is None else gamma, goal)
        return self.emit("CTR", (i_chi, i_notchi), (chi,), concl)

    def lor(self, pivot: Formula, i_left: int, i_right: int, gamma: frozenset | None = None) -> int:
        match pivot:
            case Or(a, _):
                pass
            case _:
                raise TacticError("LOR pivot must be a disjunction")
        s = self.seq(i_left)
        base = (s.lhs - {a}) if gamma is None else gamma
        concl = Sequent(base | {pivot}, s.rhs)
        return self.emit("LOR", (i_left, i_right), (pivot,), concl)

    def ror_a(self, i: int, extra: Formula) -> int:
        s = self.seq(i)
        return self.emit("RORA", (i,), (), Sequent(s.lhs, Or(s.rhs, extra)))

    def ror_b(self, i: int, extra: Formula) -> int:
        s = self.seq(i)
        return self.emit("RORB", (i,), (), Sequent(s.lhs, Or(extra, s.rhs)))

    def exa(self, i: int, pivot: Exists, witness: int) -> int:
        s = self.seq(i)
        opened = open_exists(pivot, witness)
        concl = Sequent((s.lhs - {opened}) | {pivot}, s.rhs)
        return self.emit("EXA", (i,), (pivot, witness), concl)

    def exs(self, i: int, target: Exists, witness: int) -> int:
        s = self.seq(i)
        concl = Sequent(s.lhs | {NOT_E}, target)
        return self.emit("EXS", (i,), (target, witness), concl)

    def exd(self, i: int, pivot: Exists, witness: int, target: Exists, target_witness: int) -> int:
        s = self.seq(i)
        opened = open_exists(pivot, witness)
        concl = Sequent((s.lhs - {opened}) | {pivot}, target)
        return self.emit("EXD", (i,), (pivot, witness, target_witness), concl)

    def subs(self, i: int, phi: Formula, x: int, y: int, y_new: int) -> int:
        s = self.seq(i)
        concl = Sequent(s.lhs | {Eq(FV(y), FV(y_new))}, subst(phi, y_new, x))
        return self.emit("SUBS", (i,), (phi, x, y, y_new), concl)

    # -- propositional macros ------------------------------------------------

    def exp(self, i_chi: int, i_notchi: int, goal: Formula) -> int:
        """From Gamma => chi and Gamma' => not chi conclude the union => goal."""
        chi = self.seq(i_chi).rhs
        hyps = self.seq(i_chi).lhs | self.seq(i_notchi).lhs
        a = self.ant(i_chi, hyps | {Not(goal)})
        b = self.ant(i_notchi, hyps | {Not(goal)})
        return self.ctr(chi, a, b, goal, gamma=hyps)

    def explode(self, hyps: Iterable[Formula], chi: Formula, goal: Formula) -> int:
        """When chi and not-chi are both hypotheses, derive anything."""
        hs = frozenset(hyps)
        a = self.assume(hs, chi)
        b = self.assume(hs, Not(chi))
        return self.exp(a, b, goal)

    def chain(self, i: int, j: int) -> int:
        """CHAIN: from Gamma => phi and Gamma', phi => psi get the cut."""
        phi = self.seq(i).rhs
        sj = self.seq(j)
        target_hyps = self.seq(i).lhs | (sj.lhs - {phi})
        pos = self.ant(j, target_hyps | {phi})
        a = self.ant(i, target_hyps | {Not(phi)})
        b = self.assume(target_hyps | {Not(phi)}, Not(phi))
        neg = self.exp(a, b, sj.rhs)
        return self.pc(phi, pos, neg, gamma=target_hyps)

    def dn_a(self, i: int) -> int:
        s = self.seq(i)
        phi = s.rhs
        hyps3 = s.lhs | {Not(Not(Not(phi)))}
        a = self.ant(i, hyps3)
        pos = self.assume(hyps3 | {Not(phi)}, Not(phi))
        neg = self.explode(hyps3 | {Not(Not(phi))}, Not(Not(phi)), Not(phi))
        b = self.pc(Not(phi), pos, neg, gamma=hyps3)
        return self.ctr(phi, a, b, Not(Not(phi)), gamma=s.lhs)

    def dn_b(self, i: int) -> int:
        s = self.seq(i)
        match s.rhs:
            case Not(Not(phi)):
                pass
            case _:
                raise TacticError("dn_b needs a doubly negated succedent")
        pos = self.assume({Not(Not(phi)), phi}, phi)
        neg = self.explode({Not(Not(phi)), Not(phi)}, Not(phi), phi)
        lemma = self.pc(phi, pos, neg)
        return self.chain(i, lemma)

    def dn_c(self, i: int, phi: Formula) -> int:
        """Gamma, phi => psi becomes Gamma, not not phi => psi."""
        s = self.seq(i)
        gamma = s.lhs - {phi}
        pos = self.ant(i, gamma | {Not(Not(phi)), phi})
        neg = self.explode(gamma | {Not(Not(phi)), Not(phi)}, Not(phi), s.rhs)
        return self.pc(phi, pos, neg, gamma=gamma | {Not(Not(phi))})

    def dn_d(self, i: int, phi: Formula) -> int:
        """Gamma, not not phi => psi becomes Gamma, phi => psi."""
        lemma = self.dn_a(self.assume({phi}, phi))
        return self.chain(lemma, i)

    def cp(self, i: int, phi: Formula) -> int:
        """From Gamma, phi => psi conclude Gamma, not psi => not phi."""
        s = self.seq(i)
        psi = s.rhs
        gamma = s.lhs - {phi}
        dnc = self.dn_c(i, phi)
        a = self.ant(dnc, gamma | {Not(psi), Not(Not(phi))})
        b = self.assume(gamma | {Not(psi), Not(Not(phi))}, Not(psi))
        return self.ctr(psi, a, b, Not(phi), gamma=gamma | {Not(psi)})

    def conj_left(self, a: Formula, b: Formula) -> int:
        """Lemma {a /\\ b} => a."""
        ab = and_(a, b)
        pos = self.assume({ab, a}, a)
        d = self.ror_a(self.assume({ab, Not(a)}, Not(a)), Not(b))
        nd = self.assume({ab, Not(a)}, ab)
        neg = self.exp(d, nd, a)
        return self.pc(a, pos, neg)

    def conj_right(self, a: Formula, b: Formula) -> int:
        """Lemma {a /\\ b} => b."""
        ab = and_(a, b)
        pos = self.assume({ab, b}, b)
        d = self.ror_b(self.assume({ab, Not(b)}, Not(b)), Not(a))
        nd = self.assume({ab, Not(b)}, ab)
        neg = self.exp(d, nd, b)
        return self.pc(b, pos, neg)

    def r_conj(self, i: int, j: int) -> int:
        """From Gamma1 => a and Gamma2 => b conclude the union => a /\\ b."""
        a, b = self.seq(i).rhs, self.seq(j).rhs
        target = and_(a, b)
        d = Or(Not(a), Not(b))
        t = self.seq(i).lhs | self.seq(j).lhs
        hyps = t | {Not(target)}
        # under hypothesis not target (= not not d) derive a and not a
        line_a = self.ant(i, hyps)
        la = self.assume(hyps | {Not(a)}, Not(a))
        lb = self.exp(
            self.ant(j, hyps | {Not(b)}),
            self.assume(hyps | {Not(b)}, Not(b)),
            Not(a),
        )
        with_d = self.lor(d, la, lb, gamma=hyps)
        without_d = self.explode(hyps | {Not(d)}, Not(d), Not(a))
        line_na = self.pc(d, with_d, without_d, gamma=hyps)
        return self.ctr(a, line_a, line_na, target, gamma=t)

    def sdrop(self, i: int, keep_left: bool = True) -> int:
        """From Gamma => a /\\ b keep one conjunct."""
        pair = split_and(self.seq(i).rhs)
        if pair is None:
            raise TacticError("sdrop on a non-conjunction")
        a, b = pair
        lemma = self.conj_left(a, b) if keep_left else self.conj_right(a, b)
        return self.chain(i, lemma)

    def unload(self, i: int, a: Formula, b: Formula) -> int:
        """Gamma, a, b => chi becomes Gamma, a /\\ b => chi."""
        step = self.chain(self.conj_left(a, b), i)
        return self.chain(self.conj_right(a, b), step)

    def load(self, i: int, a: Formula, b: Formula) -> int:
        """Gamma, a /\\ b => chi becomes Gamma, a, b => chi."""
        pair = self.r_conj(self.assume({a, b}, a), self.assume({a, b}, b))
        return self.chain(pair, i)

    def meta_a(self, i: int, phi: Formula) -> int:
        """Gamma, phi => psi becomes Gamma => phi -> psi."""
        s = self.seq(i)
        goal = imp(phi, s.rhs)
        pos = self.ror_b(self.ant(i, s.lhs | {phi}), Not(phi))
        neg = self.ror_a(self.assume((s.lhs - {phi}) | {Not(phi)}, Not(phi)), s.rhs)
        return self.pc(phi, pos, neg)

    def meta_b(self, i: int) -> int:
        """Gamma => phi -> psi becomes Gamma, phi => psi."""
        match self.seq(i).rhs:
            case Or(Not(phi), psi):
                pass
            case _:
                raise TacticError("meta_b needs an implication succedent")
        d = Or(Not(phi), psi)
        left = self.explode({phi, Not(phi)}, phi, psi)
        right = self.assume({phi, psi}, psi)
        lemma = self.lor(d, left, right)
        return self.chain(i, lemma)

    def prove_conj(self, part_lines: Sequence[int]) -> int:
        """Fold => lines for parts into => big_and(parts) (right-associated)."""
        if not part_lines:
            raise TacticError("empty conjunction")
        out = part_lines[-1]
        for ln in reversed(part_lines[:-1]):
            out = self.r_conj(ln, out)
        return out

    def split_conj(self, i: int) -> list[int]:
        """From Gamma => C produce a => line per conjunct of C, in order."""
        pair = split_and(self.seq(i).rhs)
        if pair is None:
            return [i]
        left = self.sdrop(i, keep_left=True)
        right = self.sdrop(i, keep_left=False)
        return self.split_conj(left) + self.split_conj(right)

    def split_top(self, i: int, count: int) -> list[int]:
        """Peel exactly `count` top-level conjuncts of a right-associated
        conjunction (each part may itself be a conjunction)."""
        if count == 1:
            return [i]
        left = self.sdrop(i, keep_left=True)
        rest = self.sdrop(i, keep_left=False)
        return [left] + self.split_top(rest, count - 1)

    def unload_all(self, i: int, conj: Formula) -> int:
        """Collapse the leaf conjuncts of `conj` (present as separate
        hypotheses) into the single hypothesis `conj`, following its shape."""
        pair = split_and(conj)
        if pair is None:
            return i
        a, rest = pair
        out = self.unload_all(i, a)
        out = self.unload_all(out, rest)
        return self.unload(out, a, rest)

    def load_all(self, i: int, conj: Formula) -> int:
        """Explode hypothesis `conj` into its leaf conjuncts as hypotheses."""
        pair = split_and(conj)
        if pair is None:
            return i
        a, rest = pair
        outer = self.load(i, a, rest)
        outer = self.load_all(outer, a)
        return self.load_all(outer, rest)

    def prove_like(self, shape: Formula, leaf_line) -> int:
        """Derive => `shape` by pairing leaf lines per its conjunction tree;
        leaf_line maps each leaf formula to a line proving it."""
        pair = split_and(shape)
        if pair is None:
            return leaf_line(shape)
        a, rest = pair
        return self.r_conj(self.prove_like(a, leaf_line), self.prove_like(rest, leaf_line))

    def assume_conj(self, hyps: Iterable[Formula], conj: Formula) -> int:
        """Derive => conj from hypotheses that include every conjunct."""
        hs = frozenset(hyps)
        parts = conjuncts(conj)
        lines = [self.assume(hs, p) for p in parts]
        return self.prove_conj(lines)

    # -- quantifier macros ---------------------------------------------------

    def exs_multi(self, i: int, target: Formula, witnesses: Sequence[int]) -> int:
        """From Gamma => phi[Y_i/X_i] conclude Gamma, not E => exists X_i phi."""
        stack: list[Exists] = []
        cur = target
        for _ in witnesses:
            if not isinstance(cur, Exists):
                raise TacticError("exs_multi: target has too few binders")
            stack.append(cur)
            cur = open_exists(cur, witnesses[len(stack) - 1])
        if self.seq(i).rhs != cur:
            raise TacticError(
                f"exs_multi: premise is {render(self.seq(i).rhs)}, expected {render(cur)}"
            )
        out = i
        for level, w in zip(reversed(stack), reversed(list(witnesses))):
            out = self.exs(out, level, w)
        return out

    def exa_multi(self, i: int, hyp: Formula, names: Sequence[int]) -> int:
        """From Gamma, phi => psi conclude Gamma, exists X_i phi => psi
        (names = the X_i as they occur free in phi; must avoid Gamma, psi)."""
        out = i
        cur = hyp
        for x in reversed(list(names)):
            pivot = close(cur, x)
            out = self.exa(out, pivot, x)
            cur = pivot
        return out

    def exd_multi(self, i: int, hyp: Formula, names: Sequence[int]) -> int:
        """From Gamma, phi => psi conclude Gamma, exists X phi => exists X psi."""
        out = i
        cur_h = hyp
        for x in reversed(list(names)):
            pivot = close(cur_h, x)
            target = close(self.seq(out).rhs, x)
            out = self.exd(out, pivot, x, target, x)
            cur_h = pivot
        return out

    def subs_multi(
        self,
        i: int,
        rho: Formula,
        slots: Sequence[int],
        ys: Sequence[int],
        yps: Sequence[int],
    ) -> int:
        """From Gamma => rho[ys/slots] conclude Gamma, {y_k = y'_k} => rho[yps/slots].

        The equalities are added as separate hypotheses (fold with unload_all
        for the boxed form).  slots must be distinct and absent elsewhere."""
        if not (len(slots) == len(ys) == len(yps)):
            raise TacticError("subs_multi length mismatch")
        if set(slots) & (set(ys) | set(yps)):
            raise TacticError("subs_multi: slot variables must be fresh")
        if self.seq(i).rhs != subst_simul(rho, ys, slots):
            raise TacticError("subs_multi: premise does not match rho[ys/slots]")
        out = i
        for k, slot in enumerate(slots):
            if ys[k] == yps[k]:
                continue
            partial = subst_simul(
                rho,
                [yps[j] for j in range(k)] + [ys[j] for j in range(k + 1, len(slots))],
                [slots[j] for j in range(len(slots)) if j != k],
            ) if len(slots) > 1 else rho
            out = self.subs(out, partial, slot, ys[k], yps[k])
        return out

    def subs_folded(
        self,
        i: int,
        rho: Formula,
        slots: Sequence[int],
        ys: Sequence[int],
        yps: Sequence[int],
    ) -> int:
        """The boxed SUBS': equalities folded into one conjunction hypothesis."""
        out = self.subs_multi(i, rho, slots, ys, yps)
        eqs = [Eq(FV(y), FV(yp)) for y, yp in zip(ys, yps)]
        out = self.ant(out, self.seq(out).lhs | set(eqs))
        if len(eqs) > 1:
            out = self.unload_all(out, big_and(eqs))
        return out

    def eq_sym(self, a: int, b: int) -> int:
        """Lemma {a = b} => b = a."""
        fresh = max(abs(a), abs(b)) + 1
        start = self.identity(a)
        return self.subs(start, Eq(FV(fresh), FV(a)), fresh, a, b)

    def eq_trans(self, a: int, b: int, c: int) -> int:
        """Lemma {a = b, b = c} => a = c."""
        fresh = max(abs(a), abs(b), abs(c)) + 1
        start = self.assume({Eq(FV(a), FV(b))}, Eq(FV(a), FV(b)))
        return self.subs(start, Eq(FV(a), FV(fresh)), fresh, b, c)

    def flip_eq_hyp(self, i: int, a: int, b: int) -> int:
        """Replace hypothesis a = b by b = a in line i."""
        lemma = self.eq_sym(b, a)
        return self.chain(lemma, i)

    # -- universals ----------------------------------------------------------

    def forall_s(self, i: int, names: Sequence[int]) -> int:
        """From Gamma => phi (no X free in Gamma) conclude Gamma => forall X phi."""
        out = i
        for x in reversed(list(names)):
            s = self.seq(out)
            gamma_free = frozenset().union(
                *[free_vars(h) for h in s.lhs] or [frozenset()]
            )
            if x in gamma_free:
                raise TacticError(f"forall_s: x{x} occurs free in the hypotheses")
            t = max({abs(v) for v in gamma_free | free_vars(s.rhs) | {x}}, default=0) + 1
            phi = s.rhs
            l1 = self.ant(out, s.lhs | {Eq(FV(t), FV(t))})
            l2 = self.cp(l1, Eq(FV(t), FV(t)))
            l3 = self.exa(l2, close(Not(phi), x), x)
            l4 = self.cp(l3, close(Not(phi), x))
            l5 = self.dn_a(self.identity(t))
            out = self.chain(l5, l4)
        return out

    def forall_a(self, i: int, univ: Formula, witnesses: Sequence[int]) -> int:
        """From Gamma, phi[Y_i/X_i] => psi conclude Gamma, not E, forall X_i phi => psi."""
        ws = list(witnesses)
        out = i
        for k in range(len(ws), 0, -1):
            cur = open_forall_many(univ, ws[: k - 1])
            match cur:
                case Not(Exists(Not(_)) as ex_not):
                    pass
                case _:
                    raise TacticError("forall_a: not a universal formula")
            y = ws[k - 1]
            h = open_forall(cur, y)
            psi = self.seq(out).rhs
            l1 = self.cp(out, h)
            l2 = self.exs(l1, ex_not, y)
            l3 = self.cp(l2, Not(psi))
            out = self.dn_b(l3)
        return out

    def forall_elim(self, i: int, witnesses: Sequence[int]) -> int:
        """From Gamma => forall X_i phi conclude Gamma, not E => phi[Y_i/X_i]."""
        univ = self.seq(i).rhs
        opened = open_forall_many(univ, witnesses)
        start = self.assume({opened}, opened)
        elim = self.forall_a(start, univ, witnesses)
        return self.chain(i, elim)

    def exists_elim_on(self, i: int, ex: Formula, witnesses: Sequence[int]) -> int:
        """Like the boxed exists-ELIM, naming the pivot hypothesis explicitly."""
        opened = ex
        for w in witnesses:
            opened = open_exists(opened, w)
        start = self.assume({opened}, opened)
        closed = self.exs_multi(start, ex, witnesses)
        return self.chain(closed, i)

    # -- emptiness control ---------------------------------------------------

    def exists_to_nonempty(self, ex: Formula) -> int:
        """Lemma {exists X phi} => not E."""
        if not isinstance(ex, Exists):
            raise TacticError("exists_to_nonempty needs an existential")
        w = max({abs(v) for v in free_vars(ex)}, default=0) + 1
        inner = close(Eq(FV(w), FV(w)), w)
        l1 = self.identity(w)
        l2 = self.ant(l1, {open_exists(ex, w)})
        l3 = self.exd(l2, ex, w, inner, w)
        return self.dn_a(l3)

    def empty_to_forall(self, univ: Formula) -> int:
        """Lemma {E} => forall X phi (univ must be a universal formula)."""
        match univ:
            case Not(Exists(_) as ex):
                pass
            case _:
                raise TacticError("empty_to_forall needs a negated existential")
        l1 = self.exists_to_nonempty(ex)
        l2 = self.cp(l1, ex)
        from .formulas import emptiness

        e = emptiness()
        lemma = self.dn_a(self.assume({e}, e))
        return self.chain(lemma, l2)

    def drop_not_e(self, i: int) -> int:
        """Eliminate a not-E hypothesis when the succedent is universal."""
        s = self.seq(i)
        if NOT_E not in s.lhs:
            return i
        from .formulas import emptiness

        e = emptiness()
        gamma = s.lhs - {NOT_E}
        l_e = self.ant(self.empty_to_forall(s.rhs), gamma | {e})
        return self.pc(e, l_e, self.ant(i, gamma | {NOT_E}))

    def consume_not_e(self, i: int, ex_hyp: Formula) -> int:
        """Drop a not-E hypothesis justified by an existential hypothesis."""
        s = self.seq(i)
        if NOT_E not in s.lhs:
            return i
        lemma = self.exists_to_nonempty(ex_hyp)
        return self.chain(lemma, self.ant(i, s.lhs | {ex_hyp}))

    def wrap_universal(self, i: int, names: Sequence[int]) -> int:
        """From Gamma, not E => body (Gamma sentences) to Gamma => forall names body."""
        gen = self.forall_s(i, names)
        return self.drop_not_e(gen)

    # -- congruence lifts (Implication Lemma) --------------------------------

    def lift_or_left(self, i: int, hyp: Formula, psi: Formula) -> int:
        """From Gamma, a => b conclude Gamma, a v psi => b v psi."""
        s = self.seq(i)
        gamma = s.lhs - {hyp}
        left = self.ror_a(i, psi)
        right = self.ant(self.ror_b(self.assume({psi}, psi), s.rhs), gamma | {psi})
        return self.lor(Or(hyp, psi), self.ant(left, gamma | {hyp}), right, gamma=gamma)

    def lift_or_right(self, i: int, hyp: Formula, psi: Formula) -> int:
        """From Gamma, a => b conclude Gamma, psi v a => psi v b."""
        s = self.seq(i)
        gamma = s.lhs - {hyp}
        left = self.ant(self.ror_a(self.assume({psi}, psi), s.rhs), gamma | {psi})
        right = self.ror_b(i, psi)
        return self.lor(Or(psi, hyp), left, self.ant(right, gamma | {hyp}), gamma=gamma)

    def lift_not(self, i: int, hyp: Formula) -> int:
        """From Gamma, a => b conclude Gamma, not b => not a."""
        return self.cp(i, hyp)

    def lift_exists(self, i: int, hyp: Formula, x: int) -> int:
        """From Gamma, a => b conclude Gamma, exists x a => exists x b.

        Needs x not free in Gamma."""
        return self.exd_multi(i, hyp, [x])


# ---------------------------------------------------------------------------
# Propositional tautologies (Kalmar-style completeness construction)


def _prop_atoms(f: Formula, acc: dict[Formula, None]) -> None:
    match f:
        case Not(s):
            _prop_atoms(s, acc)
        case Or(a, b):
            _prop_atoms(a, acc)
            _prop_atoms(b, acc)
        case _:
            acc[f] = None


def _prop_eval(f: Formula, v: dict[Formula, bool]) -> bool:
    match f:
        case Not(s):
            return not _prop_eval(s, v)
        case Or(a, b):
            return _prop_eval(a, v) or _prop_eval(b, v)
        case _:
            return v[f]


def prop_taut(b: Builder, hyps: Sequence[Formula], concl: Formula) -> int:
    """Derive set(hyps) => concl for any propositionally valid sequent,
    treating non-(not/or) subformulas as opaque atoms."""
    acc: dict[Formula, None] = {}
    for h in hyps:
        _prop_atoms(h, acc)
    _prop_atoms(concl, acc)
    atoms = sorted(acc, key=render)
    hypset = frozenset(hyps)

    def neg_or_intro(line_na: int, line_nb: int, a: Formula, bf: Formula) -> int:
        d = Or(a, bf)
        base = b.seq(line_na).lhs
        hs = base | {Not(Not(d))}
        line_a_hyp = b.assume(hs | {a}, a)
        line_b_branch = b.exp(
            b.assume(hs | {bf}, bf), b.ant(line_nb, hs | {bf}), a
        )
        with_d = b.lor(d, line_a_hyp, line_b_branch, gamma=hs)
        without_d = b.explode(hs | {Not(d)}, Not(d), a)
        pos_a = b.pc(d, with_d, without_d, gamma=hs)
        neg_a = b.ant(line_na, hs)
        return b.ctr(a, pos_a, neg_a, Not(d), gamma=base)

    def prove_val(f: Formula, v: dict[Formula, bool], lits: frozenset[Formula], memo) -> int:
        """Line L(v) => f when f holds under v, else L(v) => not f."""
        if f in memo:
            return memo[f]
        match f:
            case Not(s):
                inner = prove_val(s, v, lits, memo)
                # s true: prove not not s; s false: inner already proves not s = f
                out = b.dn_a(inner) if _prop_eval(s, v) else inner
            case Or(x, y):
                if _prop_eval(x, v):
                    out = b.ror_a(prove_val(x, v, lits, memo), y)
                elif _prop_eval(y, v):
                    out = b.ror_b(prove_val(y, v, lits, memo), x)
                else:
                    out = neg_or_intro(
                        prove_val(x, v, lits, memo), prove_val(y, v, lits, memo), x, y
                    )
            case _:
                out = b.assume(lits, f if v[f] else Not(f))
        memo[f] = out
        return out

    def line_for(v: dict[Formula, bool]) -> int:
        lits = frozenset(a if v[a] else Not(a) for a in atoms)
        memo: dict = {}
        target_hyps = lits | hypset
        for h in hyps:
            if not _prop_eval(h, v):
                lit_line = b.ant(prove_val(h, v, lits, memo), target_hyps)
                h_line = b.assume(target_hyps, h)
                return b.exp(h_line, lit_line, concl)
        if not _prop_eval(concl, v):
            raise TacticError(
                f"not a propositional tautology: {[render(h) for h in hyps]} => {render(concl)}"
            )
        return b.ant(prove_val(concl, v, lits, memo), target_hyps)

    def eliminate(prefix: dict[Formula, bool], remaining: list[Formula]) -> int:
        if not remaining:
            return line_for(prefix)
        atom = remaining[0]
        pos = eliminate({**prefix, atom: True}, remaining[1:])
        neg = eliminate({**prefix, atom: False}, remaining[1:])
        gamma = frozenset(a if prefix[a] else Not(a) for a in prefix) | hypset
        return b.pc(atom, pos, neg, gamma=gamma)

    return eliminate({}, atoms)


# ---------------------------------------------------------------------------
# Equivalence certificates


@dataclass(frozen=True)
class EquivCert:
    """Two kernel derivations witnessing mutual provable implication.

    fwd concludes Gamma(, not E), a => b; bwd the reverse.  Gamma stays
    within the ambient theory's axioms (checked where the cert is used)."""

    a: Formula
    b: Formula
    fwd: Derivation
    bwd: Derivation

    def flip(self) -> "EquivCert":
        return EquivCert(self.b, self.a, self.bwd, self.fwd)


def cert_refl(f: Formula) -> EquivCert:
    b = Builder()
    line = b.assume({NOT_E, f}, f)
    d = b.build(line)
    return EquivCert(f, f, d, d)


def cert_compose(x: EquivCert, y: EquivCert) -> EquivCert:
    """From a == b and b == c build a == c (hypothesis sets are unioned)."""
    if x.b != y.a:
        raise TacticError("cert_compose: middle formulas differ")
    bf = Builder()
    f1 = bf.splice(x.fwd)
    f2 = bf.splice(y.fwd)
    fwd = bf.build(bf.chain(f1, f2))
    bb = Builder()
    g1 = bb.splice(y.bwd)
    g2 = bb.splice(x.bwd)
    bwd = bb.build(bb.chain(g1, g2))
    return EquivCert(x.a, y.b, fwd, bwd)


def cert_chain(certs: Sequence[EquivCert]) -> EquivCert:
    out = certs[0]
    for c in certs[1:]:
        out = cert_compose(out, c)
    return out


def cert_congruence(base: EquivCert, contexts: Sequence[tuple]) -> EquivCert:
    """Lift a == b through unary formula-building layers.

    Each context is ("or_left", psi), ("or_right", psi), ("not",), or
    ("exists", x); applied innermost-first."""
    cur = base
    for ctx in contexts:
        bf, bb = Builder(), Builder()
        if ctx[0] == "not":
            # bwd of cur gives {b'} => a', lift to {not a'} => not b'
            i = bf.splice(cur.bwd)
            fwd = bf.build(bf.lift_not(i, cur.b))
            j = bb.splice(cur.fwd)
            bwd = bb.build(bb.lift_not(j, cur.a))
            cur = EquivCert(Not(cur.a), Not(cur.b), fwd, bwd)
        elif ctx[0] == "or_left":
            psi = ctx[1]
            i = bf.splice(cur.fwd)
            fwd = bf.build(bf.lift_or_left(i, cur.a, psi))
            j = bb.splice(cur.bwd)
            bwd = bb.build(bb.lift_or_left(j, cur.b, psi))
            cur = EquivCert(Or(cur.a, psi), Or(cur.b, psi), fwd, bwd)
        elif ctx[0] == "or_right":
            psi = ctx[1]
            i = bf.splice(cur.fwd)
            fwd = bf.build(bf.lift_or_right(i, cur.a, psi))
            j = bb.splice(cur.bwd)
            bwd = bb.build(bb.lift_or_right(j, cur.b, psi))
            cur = EquivCert(Or(psi, cur.a), Or(psi, cur.b), fwd, bwd)
        elif ctx[0] == "exists":
            x = ctx[1]
            i = bf.splice(cur.fwd)
            fwd = bf.build(bf.lift_exists(i, cur.a, x))
            j = bb.splice(cur.bwd)
            bwd = bb.build(bb.lift_exists(j, cur.b, x))
            cur = EquivCert(close(cur.a, x), close(cur.b, x), fwd, bwd)
        else:
            raise TacticError(f"unknown context {ctx!r}")
    return cur


def insex_cert(xs: Sequence[int], phi: Formula, psi: Formula) -> EquivCert:
    """exists X_i (phi /\\ psi) == phi /\\ exists X_i psi, for X_i not free in phi."""
    for x in xs:
        if x in free_vars(phi):
            raise TacticError(f"insex: x{x} occurs free in the fixed clause")
    a = exists_many(xs, and_(phi, psi))
    ex_psi = exists_many(xs, psi)
    b_form = and_(phi, ex_psi)

    bf = Builder()
    conj = bf.assume({and_(phi, psi)}, and_(phi, psi))
    l_phi = bf.sdrop(conj, keep_left=True)
    l_phi = bf.exa_multi(l_phi, and_(phi, psi), xs)
    l_psi = bf.sdrop(conj, keep_left=False)
    l_psi = bf.exd_multi(l_psi, and_(phi, psi), xs)
    fwd = bf.build(bf.r_conj(l_phi, l_psi))

    bb = Builder()
    pair = bb.r_conj(bb.assume({phi, psi}, phi), bb.assume({phi, psi}, psi))
    lifted = bb.exd_multi(pair, psi, xs)
    bwd = bb.build(bb.unload(lifted, phi, ex_psi))
    return EquivCert(a, b_form, fwd, bwd)


def _swap_lemma(b: Builder, ex2: Formula) -> int:
    """Line {exists U exists V psi} => exists V exists U psi."""
    if not isinstance(ex2, Exists) or not isinstance(ex2.body, Exists):
        raise TacticError("swap needs two leading binders")
    top = max({abs(v) for v in free_vars(ex2)}, default=0)
    u, v = top + 1, top + 2
    psi = open_exists(open_exists(ex2, u), v)
    ex_u_psi = close(psi, u)  # exists U psi, with V free
    target = close(close(psi, u), v)  # exists V exists U psi
    l1 = b.assume({psi}, psi)
    l2 = b.exs(l1, ex_u_psi, u)
    l3 = b.exd(l2, close(psi, v), v, target, v)
    l4 = b.exists_to_nonempty(close(psi, v))
    l5 = b.chain(l4, l3)
    return b.exa(l5, ex2, u)


def reord_cert(prefix_len: int, ex: Formula, perm: Sequence[int]) -> EquivCert:
    """exists X_1..X_r phi == the permuted-prefix formula.

    perm maps new position -> old position (i.e. the permuted formula binds
    old quantifier perm[k] at position k).  Realized by adjacent swaps."""
    if sorted(perm) != list(range(prefix_len)):
        raise TacticError("not a permutation")

    def swap_at(formula: Formula, depth: int) -> tuple[Formula, EquivCert]:
        """Swap binders depth, depth+1 (0-based from outside)."""
        top = max({abs(v) for v in free_vars(formula)}, default=0)
        names = [top + 1 + k for k in range(depth)]
        inner = formula
        for n in names:
            inner = open_exists(inner, n)
        swapped_inner = _swapped_two(inner)
        bf = Builder()
        fwd_line = _swap_lemma(bf, inner)
        bb = Builder()
        bwd_line = _swap_lemma(bb, swapped_inner)
        cert = EquivCert(inner, swapped_inner, bf.build(fwd_line), bb.build(bwd_line))
        cert = cert_congruence(cert, [("exists", n) for n in reversed(names)])
        return cert.b, cert

    def _swapped_two(e: Formula) -> Formula:
        top = max({abs(v) for v in free_vars(e)}, default=0)
        u, v = top + 1, top + 2
        body = open_exists(open_exists(e, u), v)
        return close(close(body, u), v)

    # bubble-sort `current` (list of old indices) into perm order
    current = list(range(prefix_len))
    cert = cert_refl(ex)
    cur_formula = ex
    target = list(perm)
    for pos in range(prefix_len):
        want = target[pos]
        at = current.index(want)
        while at > pos:
            cur_formula, step = swap_at(cur_formula, at - 1)
            cert = cert_compose(cert, step)
            current[at - 1], current[at] = current[at], current[at - 1]
            at -= 1
    return cert
