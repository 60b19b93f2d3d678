"""Exhaustive rule-soundness sweep: every basic rule, random legal
instantiations, all structures up to a size bound including the empty one.

A violation (premises hold, conclusion fails, in some structure) would mean
the kernel's rule set is unsound for the chosen empty-structure semantics;
the suite treats any violation as a hard failure.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .formulas import (
    Eq,
    Exists,
    FV,
    Formula,
    Not,
    Or,
    Pred,
    Signature,
    close,
    free_vars,
    nonempty,
    open_exists,
    subst,
)
from .kernel import Sequent
from .semantics import Structure, enumerate_structures, eval_set, expand

NOT_E = nonempty()

RULES = (
    "ASSM",
    "ID",
    "ANT",
    "PC",
    "CTR",
    "LOR",
    "RORA",
    "RORB",
    "EXA",
    "EXS",
    "EXD",
    "SUBS",
)


def formula_pool(sig: Signature, rnd: random.Random, size: int = 40) -> list[Formula]:
    """Small random formulas over variables x1..x3 (plus bound x0 levels)."""
    vars_ = [1, 2, 3]
    atoms: list[Formula] = []
    for name, arity in sig.predicates:
        for args in itertools.product(vars_, repeat=arity):
            atoms.append(Pred(name, tuple(FV(a) for a in args)))
    atoms.extend(Eq(FV(a), FV(b)) for a in vars_ for b in vars_)
    pool = list(atoms)
    while len(pool) < size:
        pick = rnd.random()
        if pick < 0.35:
            pool.append(Not(rnd.choice(pool)))
        elif pick < 0.7:
            pool.append(Or(rnd.choice(pool), rnd.choice(pool)))
        else:
            pool.append(close(rnd.choice(pool), rnd.choice(vars_)))
    return pool


@dataclass
class Instance:
    rule: str
    premises: list[Sequent]
    conclusion: Sequent


def generate_instance(rule: str, pool: list[Formula], rnd: random.Random) -> Instance:
    def f() -> Formula:
        return rnd.choice(pool)

    def gamma() -> frozenset:
        return frozenset(rnd.sample(pool, rnd.randint(0, 2)))

    v = rnd.choice([1, 2, 3])

    def pivot_for(concl: Sequent) -> Formula:
        # Eliminated formulas must not introduce variables absent from the
        # conclusion: with the vacuous empty-carrier reading, a PC/CTR pivot
        # with extra free variables makes both premises vacuous over the
        # empty structure while a closed conclusion can still fail.  The
        # paper only ever eliminates sentence-level or conclusion-variable
        # pivots, and the restriction is exactly what keeps the rules
        # pointwise sound (see the boundary test in the suite).
        allowed = concl.free_vars()
        options = [p for p in pool if free_vars(p) <= allowed]
        return rnd.choice(options) if options else NOT_E

    if rule == "ASSM":
        phi = f()
        g = gamma() | {phi}
        return Instance(rule, [], Sequent(g, phi))
    if rule == "ID":
        return Instance(rule, [], Sequent(frozenset(), Eq(FV(v), FV(v))))
    if rule == "ANT":
        prem = Sequent(gamma(), f())
        return Instance(rule, [prem], Sequent(prem.lhs | gamma(), prem.rhs))
    if rule == "PC":
        g, phi = gamma(), f()
        concl = Sequent(g, phi)
        psi = pivot_for(concl)
        return Instance(
            rule,
            [Sequent(g | {psi}, phi), Sequent(g | {Not(psi)}, phi)],
            concl,
        )
    if rule == "CTR":
        g, phi = gamma(), f()
        concl = Sequent(g, phi)
        chi = pivot_for(concl)
        base = g | {Not(phi)}
        return Instance(rule, [Sequent(base, chi), Sequent(base, Not(chi))], concl)
    if rule == "LOR":
        g, a, b, chi = gamma(), f(), f(), f()
        return Instance(
            rule,
            [Sequent(g | {a}, chi), Sequent(g | {b}, chi)],
            Sequent(g | {Or(a, b)}, chi),
        )
    if rule in ("RORA", "RORB"):
        g, a, b = gamma(), f(), f()
        concl = Or(a, b) if rule == "RORA" else Or(b, a)
        return Instance(rule, [Sequent(g, a)], Sequent(g, concl))
    if rule == "EXA":
        body, psi = f(), f()
        pivot = close(body, v)
        witness = 7  # outside the pool's variables, so fresh
        g = gamma()
        prem = Sequent(g | {open_exists(pivot, witness)}, psi)
        return Instance(rule, [prem], Sequent(g | {pivot}, psi))
    if rule == "EXS":
        body = f()
        target = close(body, v)
        y = rnd.choice([1, 2, 3, 7])
        g = gamma()
        prem = Sequent(g, open_exists(target, y))
        return Instance(rule, [prem], Sequent(g | {NOT_E}, target))
    if rule == "EXD":
        body1, body2 = f(), f()
        pivot, target = close(body1, v), close(body2, v)
        witness = 7
        yp = rnd.choice([1, 2, 3, 7])
        g = gamma()
        prem = Sequent(
            g | {open_exists(pivot, witness)}, open_exists(target, yp if yp != 7 else witness)
        )
        # keep the side condition: the witness must not be free elsewhere
        prem = Sequent(g | {open_exists(pivot, witness)}, open_exists(target, witness))
        return Instance(rule, [prem], Sequent(g | {pivot}, target))
    if rule == "SUBS":
        phi = f()
        x, y, yp = v, rnd.choice([1, 2, 3]), rnd.choice([1, 2, 3])
        g = gamma()
        prem = Sequent(g, subst(phi, y, x))
        return Instance(rule, [prem], Sequent(g | {Eq(FV(y), FV(yp))}, subst(phi, yp, x)))
    raise ValueError(rule)


@dataclass
class SweepReport:
    instances: int
    violations: int
    per_rule: dict[str, int] = field(default_factory=dict)
    first_violation: tuple | None = None


class _MaskEval:
    """Bitmask evaluation over a fixed structure.

    A formula's definable set is an integer with one bit per assignment of
    its sorted free variables; the first (smallest) variable is the least
    significant coordinate, so inserting or projecting the largest variable
    is a couple of shifts."""

    def __init__(self, m: Structure):
        self.m = m
        self.size = m.size
        self.tables = {name: t for name, t in m.tables}
        self.sets: dict[Formula, tuple[tuple[int, ...], int]] = {}
        self.expansions: dict[tuple[Formula, tuple[int, ...]], int] = {}

    def _assignments(self, vs):
        # least-significant-first: the FIRST variable varies fastest
        return (tuple(reversed(row)) for row in itertools.product(range(self.size), repeat=len(vs)))

    def eval(self, f: Formula) -> tuple[tuple[int, ...], int]:
        got = self.sets.get(f)
        if got is None:
            got = self._eval(f)
            self.sets[f] = got
        return got

    def _eval(self, f: Formula) -> tuple[tuple[int, ...], int]:
        size = self.size
        match f:
            case Pred(name, args):
                vs = tuple(sorted({a.index for a in args}))
                table = self.tables[name]
                pos = {v: i for i, v in enumerate(vs)}
                mask = 0
                for bit, row in enumerate(self._assignments(vs)):
                    if tuple(row[pos[a.index]] for a in args) in table:
                        mask |= 1 << bit
                return vs, mask
            case Eq(FV(i), FV(j)):
                if i == j:
                    return (i,), (1 << size) - 1
                vs = tuple(sorted((i, j)))
                mask = 0
                for bit, row in enumerate(self._assignments(vs)):
                    if row[0] == row[1]:
                        mask |= 1 << bit
                return vs, mask
            case Not(sub):
                vs, mask = self.eval(sub)
                full = (1 << (size ** len(vs))) - 1 if vs else 1
                return vs, full ^ mask
            case Or(l, r):
                lv, _ = self.eval(l)
                rv, _ = self.eval(r)
                vs = tuple(sorted(set(lv) | set(rv)))
                return vs, self.expand_to(l, vs) | self.expand_to(r, vs)
            case Exists(_):
                if size == 0:
                    return tuple(sorted(free_vars(f))), 0
                w = max((abs(v) for v in free_vars(f)), default=0) + 1
                opened = open_exists(f, w)
                iv, imask = self.eval(opened)
                if w not in iv:
                    return iv, imask
                # w is the largest variable: the most significant coordinate
                assert iv[-1] == w
                block = size ** (len(iv) - 1)
                low = (1 << block) - 1
                out = 0
                for t in range(size):
                    out |= (imask >> (t * block)) & low
                return iv[:-1], out
        raise ValueError(f"not a formula: {f!r}")

    def _insert(self, mask: int, width: int, at: int) -> int:
        """Insert one coordinate at sorted position `at` (0 = least
        significant) into a mask of `width` assignment-bits."""
        size = self.size
        inner = size ** at
        chunk = (1 << inner) - 1
        out = 0
        groups = width // inner
        for g in range(groups):
            part = (mask >> (g * inner)) & chunk
            base = g * inner * size
            for t in range(size):
                out |= part << (base + t * inner)
        return out

    def expand_to(self, f: Formula, target: tuple[int, ...]) -> int:
        key = (f, target)
        got = self.expansions.get(key)
        if got is not None:
            return got
        vs, mask = self.eval(f)
        if self.size == 0:
            out = 0 if target else mask
            self.expansions[key] = out
            return out
        cur_vs = list(vs)
        width = self.size ** len(cur_vs)
        for v in target:
            if v not in vs:
                at = 0
                while at < len(cur_vs) and cur_vs[at] < v:
                    at += 1
                mask = self._insert(mask, width, at)
                cur_vs.insert(at, v)
                width *= self.size
        self.expansions[key] = mask
        return mask

    def holds(self, s: Sequent, universe: tuple[int, ...]) -> bool:
        if self.size == 0 and universe:
            return True
        full = (1 << (self.size ** len(universe))) - 1 if universe else 1
        lhs = full
        for h in s.lhs:
            lhs &= self.expand_to(h, universe)
            if not lhs:
                return True
        rhs = self.expand_to(s.rhs, universe)
        return lhs & ~rhs == 0


def soundness_sweep(
    sig: Signature, max_size: int = 3, per_rule: int = 500, seed: int = 0
) -> SweepReport:
    rnd = random.Random(seed)
    pool = formula_pool(sig, rnd)
    instances: list[Instance] = []
    for rule in RULES:
        for _ in range(per_rule):
            instances.append(generate_instance(rule, pool, rnd))

    # assign an id to every distinct (formula, universe) pair so the per
    # structure inner loop is list indexing and integer masking only
    pair_ids: dict[tuple, int] = {}

    def pid(f: Formula, universe: tuple[int, ...]) -> int:
        key = (f, universe)
        if key not in pair_ids:
            pair_ids[key] = len(pair_ids)
        return pair_ids[key]

    prepared = []
    for inst in instances:
        seqs = []
        for s in list(inst.premises) + [inst.conclusion]:
            universe = tuple(sorted(s.free_vars()))
            seqs.append(
                (universe, [pid(h, universe) for h in s.lhs], pid(s.rhs, universe))
            )
        prepared.append((inst, seqs[:-1], seqs[-1]))

    violations = 0
    per_rule_counts = {r: 0 for r in RULES}
    first = None
    for m in enumerate_structures(sig, max_size):
        ev = _MaskEval(m)
        size = m.size
        masks = [0] * len(pair_ids)
        for (f, universe), i in pair_ids.items():
            masks[i] = ev.expand_to(f, universe)
        fulls: dict[int, int] = {}

        def full_for(universe):
            k = len(universe)
            got = fulls.get(k)
            if got is None:
                got = (1 << (size ** k)) - 1 if k else 1
                fulls[k] = got
            return got

        def seq_holds(universe, hyp_ids, rhs_id) -> bool:
            if size == 0 and universe:
                return True
            acc = full_for(universe)
            for h in hyp_ids:
                acc &= masks[h]
                if not acc:
                    return True
            return not (acc & ~masks[rhs_id])

        for inst, premises, conclusion in prepared:
            if all(seq_holds(*p) for p in premises) and not seq_holds(*conclusion):
                violations += 1
                per_rule_counts[inst.rule] += 1
                if first is None:
                    first = (inst.rule, m.size, inst.conclusion)
    return SweepReport(
        instances=len(instances),
        violations=violations,
        per_rule=per_rule_counts,
        first_violation=first,
    )
