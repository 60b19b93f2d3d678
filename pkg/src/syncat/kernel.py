"""The trusted sequent-calculus kernel.

Checks derivations built from the twelve basic rules of the weakened
calculus (the one sound for the empty structure).  Everything above this
module (tactics, category constructions, normalization) only *produces*
derivations; acceptance is decided here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .formulas import (
    Eq,
    Exists,
    FV,
    Formula,
    Not,
    Or,
    free_vars,
    nonempty,
    open_exists,
    subst,
)


class KernelError(Exception):
    """A rule application that does not check."""


@dataclass(frozen=True)
class Sequent:
    """Gamma => phi with a set-valued left-hand side."""

    lhs: frozenset[Formula]
    rhs: Formula

    @staticmethod
    def of(hyps: Iterable[Formula], rhs: Formula) -> "Sequent":
        return Sequent(frozenset(hyps), rhs)

    def free_vars(self) -> frozenset[int]:
        out = free_vars(self.rhs)
        for h in self.lhs:
            out |= free_vars(h)
        return out

    def with_extra(self, *hyps: Formula) -> "Sequent":
        return Sequent(self.lhs | frozenset(hyps), self.rhs)


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


@dataclass(frozen=True)
class RuleApp:
    """One derivation line: rule tag, premise line references (strictly
    earlier indices), instantiation data, and the claimed conclusion."""

    rule: str
    premises: tuple[int, ...]
    data: tuple
    conclusion: Sequent


@dataclass(frozen=True)
class Derivation:
    lines: tuple[RuleApp, ...]

    @property
    def conclusion(self) -> Sequent:
        if not self.lines:
            raise KernelError("empty derivation")
        return self.lines[-1].conclusion

    def __len__(self) -> int:
        return len(self.lines)


def _reject(rule: str, reason: str) -> KernelError:
    return KernelError(f"{rule}: {reason}")


def apply_rule(app: RuleApp, premises: Sequence[Sequent]) -> Sequent:
    """Re-check one rule application; returns the conclusion or raises.

    The conclusion recorded in `app` is compared against the sequent the
    rule instance actually yields, so checking is deterministic.
    """
    rule = app.rule
    concl = app.conclusion

    def need_premises(count: int) -> None:
        if len(premises) != count:
            raise _reject(rule, f"expected {count} premises, got {len(premises)}")

    if rule == "ASSM":
        need_premises(0)
        if concl.rhs not in concl.lhs:
            raise _reject(rule, "succedent is not among the hypotheses")
        return concl

    if rule == "ID":
        need_premises(0)
        if concl.lhs:
            raise _reject(rule, "ID requires an empty left-hand side")
        match concl.rhs:
            case Eq(FV(a), FV(b)) if a == b:
                return concl
        raise _reject(rule, "succedent is not of the form X = X")

    if rule == "ANT":
        need_premises(1)
        (prem,) = premises
        if prem.rhs != concl.rhs:
            raise _reject(rule, "succedent changed")
        if not prem.lhs <= concl.lhs:
            raise _reject(rule, "hypotheses of the premise are not included")
        return concl

    if rule == "PC":
        need_premises(2)
        (pivot,) = app.data
        want_a = concl.with_extra(pivot)
        want_b = concl.with_extra(Not(pivot))
        if premises[0] != want_a:
            raise _reject(rule, "first premise must add the pivot to the conclusion")
        if premises[1] != want_b:
            raise _reject(rule, "second premise must add the negated pivot")
        return concl

    if rule == "CTR":
        need_premises(2)
        (chi,) = app.data
        base = concl.lhs | {Not(concl.rhs)}
        if premises[0] != Sequent(base, chi):
            raise _reject(rule, "first premise must derive chi under the negated goal")
        if premises[1] != Sequent(base, Not(chi)):
            raise _reject(rule, "second premise must derive not-chi under the negated goal")
        return concl

    if rule == "LOR":
        need_premises(2)
        (pivot,) = app.data
        match pivot:
            case Or(a, b):
                pass
            case _:
                raise _reject(rule, "pivot is not a disjunction")
        if pivot not in concl.lhs:
            raise _reject(rule, "pivot disjunction missing from the conclusion hypotheses")
        gamma = concl.lhs - {pivot}
        if premises[0] != Sequent(gamma | {a}, concl.rhs):
            raise _reject(rule, "first premise must assume the left disjunct")
        if premises[1] != Sequent(gamma | {b}, concl.rhs):
            raise _reject(rule, "second premise must assume the right disjunct")
        return concl

    if rule in ("RORA", "RORB"):
        need_premises(1)
        (prem,) = premises
        match concl.rhs:
            case Or(a, b):
                pass
            case _:
                raise _reject(rule, "conclusion succedent is not a disjunction")
        want = a if rule == "RORA" else b
        if prem != Sequent(concl.lhs, want):
            raise _reject(rule, "premise succedent is not the kept disjunct")
        return concl

    if rule == "EXA":
        need_premises(1)
        pivot, witness = app.data
        if not isinstance(pivot, Exists):
            raise _reject(rule, "pivot is not an existential formula")
        if pivot not in concl.lhs:
            raise _reject(rule, "pivot existential missing from the conclusion hypotheses")
        if witness in concl.free_vars():
            raise _reject(
                rule, f"witness x{witness} occurs free in the conclusion sequent"
            )
        gamma = concl.lhs - {pivot}
        opened = open_exists(pivot, witness)
        if premises[0] != Sequent(gamma | {opened}, concl.rhs):
            raise _reject(rule, "premise does not open the pivot with the witness")
        return concl

    if rule == "EXS":
        need_premises(1)
        target, witness = app.data
        if not isinstance(target, Exists):
            raise _reject(rule, "target is not an existential formula")
        if concl.rhs != target:
            raise _reject(rule, "conclusion succedent is not the target existential")
        (prem,) = premises
        if prem.rhs != open_exists(target, witness):
            raise _reject(rule, "premise succedent is not the opened target")
        if concl.lhs != prem.lhs | {nonempty()}:
            raise _reject(rule, "conclusion hypotheses must be the premise's plus not-E")
        return concl

    if rule == "EXD":
        need_premises(1)
        pivot, witness, target_witness = app.data
        if not isinstance(pivot, Exists):
            raise _reject(rule, "pivot is not an existential formula")
        if pivot not in concl.lhs:
            raise _reject(rule, "pivot existential missing from the conclusion hypotheses")
        if not isinstance(concl.rhs, Exists):
            raise _reject(rule, "conclusion succedent is not existential")
        if witness in concl.free_vars():
            raise _reject(
                rule, f"witness x{witness} occurs free in the conclusion sequent"
            )
        gamma = concl.lhs - {pivot}
        want = Sequent(
            gamma | {open_exists(pivot, witness)},
            open_exists(concl.rhs, target_witness),
        )
        if premises[0] != want:
            raise _reject(rule, "premise does not match the opened pivot and target")
        return concl

    if rule == "SUBS":
        need_premises(1)
        phi, x, y, y_new = app.data
        if not isinstance(phi, Formula):
            raise _reject(rule, "substitution template is not a formula")
        (prem,) = premises
        if prem.rhs != subst(phi, y, x):
            raise _reject(rule, "premise succedent is not phi[Y/X]")
        if concl.rhs != subst(phi, y_new, x):
            raise _reject(rule, "conclusion succedent is not phi[Y'/X]")
        if concl.lhs != prem.lhs | {Eq(FV(y), FV(y_new))}:
            raise _reject(rule, "conclusion hypotheses must be the premise's plus Y = Y'")
        return concl

    raise _reject(rule, "unknown rule tag")


@dataclass
class CheckFailure(Exception):
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.reason}"


def check_derivation(d: Derivation) -> Sequent:
    """Check every line; returns the conclusion or raises CheckFailure
    naming the first failing line."""
    checked: list[Sequent] = []
    for i, app in enumerate(d.lines):
        for ref in app.premises:
            if not (0 <= ref < i):
                raise CheckFailure(i, f"premise reference {ref} is not strictly earlier")
        try:
            concl = apply_rule(app, [checked[r] for r in app.premises])
        except KernelError as e:
            raise CheckFailure(i, str(e)) from None
        checked.append(concl)
    if not checked:
        raise CheckFailure(0, "empty derivation")
    return checked[-1]


def derives(d: Derivation, goal: Sequent, allowed_hyps: frozenset[Formula]) -> bool:
    """True iff d checks, concludes goal's succedent, and uses only
    hypotheses from `allowed_hyps` united with the goal's own."""
    concl = check_derivation(d)
    return concl.rhs == goal.rhs and concl.lhs <= (allowed_hyps | goal.lhs)
