"""The evaluation functor of a finite model and its structural checks.

Objects go to their definable sets, morphisms to the definable functions
extracted from payload graphs; the functionality certificates guarantee the
graphs really are total single-valued functions on every model, so a
violation here is an internal error, not a user error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .category import Premorphism, SynObject, Theory, neg_slots, pos_slots
from .formulas import FV, Formula, free_vars
from .semantics import (
    DefinableSet,
    SemanticsError,
    Structure,
    eval_set,
    is_model,
    satisfies,
    structure_holds,
)

U_POINT = ()


class FunctorError(Exception):
    pass


def object_set(m: Structure, obj: SynObject, cache: dict | None = None) -> DefinableSet:
    """F on objects: the definable set of the formula."""
    return eval_set(m, obj.formula, cache)


def definable_function(m: Structure, pm: Premorphism, cache: dict | None = None):
    """F on morphisms: the function on definable sets cut out by the payload.

    Returned as a dict from source rows to target rows (sentence objects use
    the empty row for U)."""
    src_rows = object_set(m, pm.src, cache).rows
    tgt_rows = object_set(m, pm.tgt, cache).rows
    if pm.ptype in (2, 4):
        if src_rows and not tgt_rows:
            raise FunctorError("formal morphism exists but the target fails in the model")
        return {r: U_POINT for r in src_rows}
    payload_vars = free_vars(pm.payload)
    out = {}
    n, mt = pm.src.arity, pm.tgt.arity
    for r in src_rows:
        env = {ns: val for ns, val in zip(neg_slots(n), r)}
        hits = []
        for t in tgt_rows:
            env2 = dict(env)
            env2.update({ps: val for ps, val in zip(pos_slots(mt), t)})
            if satisfies(m, pm.payload, {v: env2[v] for v in payload_vars}):
                hits.append(t)
        if len(hits) != 1:
            raise FunctorError(
                f"payload is not functional on the model (row {r} has {len(hits)} images)"
            )
        out[r] = hits[0]
    return out


def compose_functions(g: dict, f: dict) -> dict:
    return {r: g[f[r]] for r in f}


@dataclass
class EvalFunctor:
    """The evaluation functor of a structure satisfying the theory."""

    theory: Theory
    m: Structure

    def __post_init__(self):
        for a in sorted(self.theory.axioms, key=str):
            if not structure_holds(self.m, a):
                raise FunctorError(f"structure fails axiom {a!r}")
        self._cache: dict = {}

    def on_object(self, obj: SynObject) -> DefinableSet:
        return object_set(self.m, obj, self._cache)

    def on_morphism(self, pm: Premorphism) -> dict:
        return definable_function(self.m, pm, self._cache)


def curry_map(rows, from_vars: Sequence[int], to_vars: Sequence[int]):
    """The precomposition map Lambda: M^{from} -> M^{to} applied rowwise,
    where to_vars is a subset of from_vars."""
    pos = {v: i for i, v in enumerate(from_vars)}
    return {row: tuple(row[pos[v]] for v in to_vars) for row in rows}


def image_of(fun: dict) -> frozenset:
    return frozenset(fun.values())


def is_surjection(fun: dict, onto: frozenset) -> bool:
    return image_of(fun) == onto


def is_set_pullback(apex_rows, left: dict, top: dict, bottom: dict, right: dict) -> bool:
    """The square (apex; left to bottom-left, top to top-right) maps bijectively
    onto the fiber product of `bottom` and `right` in Set."""
    pairs = {(left[a], top[a]) for a in apex_rows}
    if len(pairs) != len(apex_rows):
        return False
    want = {
        (x, y)
        for x in set(bottom)
        for y in set(right)
        if bottom[x] == right[y]
    }
    return pairs == want


# ---------------------------------------------------------------------------
# The model-correspondence induction


def iota_of(theory: Theory, obj: SynObject) -> Premorphism:
    """The special mono phi -> E^free(phi) (or the map to S for sentences)."""
    from .category import mk_special, to_validity
    from .formulas import e_of

    if obj.is_sentence:
        return to_validity(theory, obj)
    ev = SynObject(e_of(obj.enumeration))
    return mk_special(theory, obj, ev, {v: v for v in obj.enumeration})


def b_image(F: "EvalFunctor", obj: SynObject) -> frozenset:
    """The image of b_free(phi) o F(iota_phi), as rows over the enumeration.

    F(E^V) is represented as M^V already, so b_V is the identity on rows."""
    iota = iota_of(F.theory, obj)
    fun = F.on_morphism(iota)
    return frozenset(fun.values())


def mm_of(F: "EvalFunctor", obj: SynObject) -> frozenset:
    """The independent satisfaction oracle's definable set."""
    from .semantics import eval_flat

    return eval_flat(F.m, obj.formula).rows


class StarPrimeChecker:
    """Verifies the bijection claim formula by formula, case by case."""

    def __init__(self, F: "EvalFunctor"):
        self.F = F
        self.theory = F.theory
        self.case_counts: dict[str, int] = {}
        self._done: dict = {}

    def _count(self, case: str) -> None:
        self.case_counts[case] = self.case_counts.get(case, 0) + 1

    def check(self, f: Formula) -> bool:
        if f in self._done:
            return self._done[f]
        ok = self._dispatch(f)
        img = b_image(self.F, SynObject(f))
        want = mm_of(self.F, SynObject(f))
        ok = ok and img == want
        self._done[f] = ok
        return ok

    def _dispatch(self, f: Formula) -> bool:
        from .formulas import Eq, Exists, FV, Not, Or, Pred, free_vars, open_exists

        match f:
            case Eq(FV(i), FV(j)) if i == j:
                self._count("atomic-eq-reflexive")
                return True
            case Eq(FV(_), FV(_)):
                self._count("atomic-eq-diagonal")
                return b_image(self.F, SynObject(f)) == mm_of(self.F, SynObject(f))
            case Pred(_, args) if not args:
                self._count("atomic-pred-0ary")
                return True
            case Pred(name, args):
                canonical = list(args) == [FV(k + 1) for k in range(len(args))]
                if canonical:
                    self._count("atomic-pred-canonical")
                    return True
                self._count("atomic-pred-general")
                return self._check_general_pred(f)
            case Or(l, r):
                ls, rs = is_sentence_f(l), is_sentence_f(r)
                if not ls and not rs:
                    self._count("case-1-join-nonsentences")
                elif ls and rs:
                    self._count("case-3-join-sentences")
                else:
                    self._count("case-2-join-mixed")
                return self.check(l) and self.check(r)
            case Not(s):
                self._count("case-4-complement")
                return self.check(s)
            case Exists(body):
                fv = free_vars(f)
                w = max((abs(v) for v in free_vars(f)), default=0) + 1
                opened = open_exists(f, w)
                inner_free = free_vars(opened)
                if w not in inner_free:
                    self._count("case-7-vacuous")
                    return self._check_case7(f, opened)
                if len(inner_free) == 1:
                    self._count("case-6-last-variable")
                    return self._check_case6(f, opened, w)
                self._count("case-5-projection")
                return self._check_case5(f, opened, w)
        raise FunctorError(f"unhandled formula shape {f!r}")

    def _special_onto(self, psi: SynObject, phi: SynObject, var_map, witnesses):
        """The surjective special morphism psi -> phi = exists X psi."""
        from .category import mk_special
        from .formulas import exists_many
        from .tactics import Builder

        def imp(b: Builder) -> int:
            start = b.assume({psi.formula}, psi.formula)
            return b.exs_multi(start, phi.formula, witnesses)

        b = Builder()
        line = imp(b)
        return mk_special(self.theory, psi, phi, var_map, imp_cert=b.build(line))

    def _check_case5(self, f, opened, w) -> bool:
        from .formulas import free_vars

        psi = SynObject(opened)
        phi = SynObject(f)
        var_map = {v: v for v in phi.enumeration}
        sf = self._special_onto(psi, phi, var_map, [w])
        fun = self.F.on_morphism(sf)
        # condition 2: the e.e. goes to a surjection
        if frozenset(fun.values()) != self.F.on_object(phi).rows:
            return False
        # the commutative square: projecting the psi-image gives the phi-image
        im_psi = b_image(self.F, psi)
        keep = [i for i, v in enumerate(psi.enumeration) if v != w]
        projected = frozenset(tuple(r[i] for i in keep) for r in im_psi)
        if projected != b_image(self.F, phi):
            return False
        return self.check(opened)

    def _check_case6(self, f, opened, w) -> bool:
        psi = SynObject(opened)
        nonempty_psi = bool(self.F.on_object(psi).rows)
        nonempty_f = bool(self.F.on_object(SynObject(f)).rows)
        if nonempty_psi != nonempty_f:
            return False
        return self.check(opened)

    def _check_case7(self, f, opened) -> bool:
        from .formulas import and_, nonempty

        tilde = and_(nonempty(), opened)
        if b_image(self.F, SynObject(f)) != b_image(self.F, SynObject(tilde)):
            return False
        return self.check(tilde)

    def _check_general_pred(self, f) -> bool:
        """The Observation: the substitution-square pullback puts the image
        where clause (a) wants it: preimages under currying."""
        from .formulas import Pred, free_vars
        from .limits import substitution_square
        from .semantics import all_assignments

        match f:
            case Pred(name, args):
                pass
            case _:
                raise FunctorError("not a predicate")
        n = len(args)
        canonical = SynObject(Pred(name, tuple(FV(k + 1) for k in range(n))))
        var_map = {k + 1: args[k].index for k in range(n)}
        v1 = sorted(free_vars(f))
        sq = substitution_square(self.theory, canonical, v1, var_map)
        # the top-left corner is phi(f(X)) /\ E^V; its image must be the
        # Lambda-preimage of the canonical image
        top_obj = sq.apex
        im_top = b_image(self.F, top_obj)
        im_bottom = b_image(self.F, canonical)
        pos = {v: i for i, v in enumerate(sorted(top_obj.enumeration))}
        lam_preimage = frozenset(
            row
            for row in all_assignments(self.F.m.size, sorted(top_obj.enumeration))
            if tuple(row[pos[var_map[k + 1]]] for k in range(n)) in im_bottom
        )
        if im_top != lam_preimage:
            return False
        # top-left agrees with the bare predicate instance as a subobject
        if im_top != b_image(self.F, SynObject(f)):
            return False
        return self.check(canonical.formula)


def is_sentence_f(f: Formula) -> bool:
    return not free_vars(f)


def check_star_prime(F: EvalFunctor, f: Formula) -> tuple[bool, dict]:
    checker = StarPrimeChecker(F)
    ok = checker.check(f)
    return ok, dict(checker.case_counts)


def reconstruct_model(F: EvalFunctor) -> Structure:
    """Rebuild the structure from the functor: P-tables via the canonical
    predicate instance, 0-ary tables via the map to the validity."""
    from .formulas import Pred, FV

    sig = F.theory.sig
    tables = {}
    for name, arity in sig.predicates:
        if arity == 0:
            obj = SynObject(Pred(name, ()))
            rows = b_image(F, obj)
            tables[name] = {()} if rows else set()
            continue
        obj = SynObject(Pred(name, tuple(FV(k + 1) for k in range(arity))))
        rows = b_image(F, obj)  # rows ordered by sorted enumeration = x1..xn
        tables[name] = {tuple(r) for r in rows}
    return Structure.of(sig, F.m.size, **tables)


def last_lemma_square_commutes(F: EvalFunctor, v0, v1, var_map) -> bool:
    """The commutative square tying F's product structure to currying."""
    from .category import mk_special
    from .formulas import e_of
    from .tactics import Builder

    ev0 = SynObject(e_of(v0))
    ev1 = SynObject(e_of(v1))
    sf = mk_special(F.theory, ev1, ev0, dict(var_map))
    fun = F.on_morphism(sf)
    v1_sorted = sorted(set(v1))
    v0_sorted = sorted(set(v0))
    pos = {v: i for i, v in enumerate(v1_sorted)}
    for row in fun:
        curried = tuple(row[pos[var_map[v]]] for v in v0_sorted)
        if fun[row] != curried:
            return False
    return len(fun) == F.m.size ** len(v1_sorted)
