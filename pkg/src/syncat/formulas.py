"""First-order formulas over a pure-predicate signature.

Variables are indexed by integers (negative indices serve as morphism input
slots elsewhere in the package).  Bound variables are stored namelessly as
de Bruijn indices, so two formulas are alpha-equivalent exactly when they are
equal as values, and substitution can never capture.  Named variables appear
only at the parser/renderer boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence


class FormulaError(Exception):
    """Malformed formula, bad arity, or substitution misuse."""


@dataclass(frozen=True)
class FV:
    """Free variable x_k (k may be any integer)."""

    index: int


@dataclass(frozen=True)
class BV:
    """Bound variable, de Bruijn index relative to enclosing Exists nodes."""

    index: int


Atom = FV | BV


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class Pred(Formula):
    name: str
    args: tuple[Atom, ...]


@dataclass(frozen=True)
class Eq(Formula):
    lhs: Atom
    rhs: Atom


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    """Nameless binder; BV(0) in `body` refers to this quantifier."""

    body: Formula


def _install_cached_hash(cls) -> None:
    # formulas are hashed constantly (sequent sets, caches); the generated
    # dataclass hash walks the whole tree every call, so cache it per node
    generated = cls.__hash__

    def cached(self):
        try:
            return object.__getattribute__(self, "_hash_cache")
        except AttributeError:
            h = generated(self)
            object.__setattr__(self, "_hash_cache", h)
            return h

    cls.__hash__ = cached


for _cls in (FV, BV, Pred, Eq, Not, Or, Exists):
    _install_cached_hash(_cls)


@dataclass(frozen=True)
class Signature:
    predicates: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.predicates]
        if len(names) != len(set(names)):
            raise FormulaError("duplicate predicate name in signature")
        for name, arity in self.predicates:
            if arity < 0:
                raise FormulaError(f"negative arity for {name}")

    @staticmethod
    def of(**preds: int) -> "Signature":
        return Signature(tuple(sorted(preds.items())))

    def arity(self, name: str) -> int:
        for n, a in self.predicates:
            if n == name:
                return a
        raise FormulaError(f"unknown predicate {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.predicates)


# ---------------------------------------------------------------------------
# Structural operations


def free_vars(f: Formula) -> frozenset[int]:
    match f:
        case Pred(_, args):
            return frozenset(a.index for a in args if isinstance(a, FV))
        case Eq(l, r):
            return frozenset(a.index for a in (l, r) if isinstance(a, FV))
        case Not(sub):
            return free_vars(sub)
        case Or(l, r):
            return free_vars(l) | free_vars(r)
        case Exists(body):
            return free_vars(body)
    raise FormulaError(f"not a formula: {f!r}")


def is_sentence(f: Formula) -> bool:
    return not free_vars(f)


def alpha_eq(a: Formula, b: Formula) -> bool:
    """Alpha-equivalence: structural equality in the nameless representation."""
    return a == b


def _map_free(f: Formula, mapping: dict[int, int]) -> Formula:
    def atom(a: Atom) -> Atom:
        if isinstance(a, FV) and a.index in mapping:
            return FV(mapping[a.index])
        return a

    match f:
        case Pred(name, args):
            return Pred(name, tuple(atom(a) for a in args))
        case Eq(l, r):
            return Eq(atom(l), atom(r))
        case Not(sub):
            return Not(_map_free(sub, mapping))
        case Or(l, r):
            return Or(_map_free(l, mapping), _map_free(r, mapping))
        case Exists(body):
            return Exists(_map_free(body, mapping))
    raise FormulaError(f"not a formula: {f!r}")


def subst(f: Formula, new: int, old: int) -> Formula:
    """phi[x_new / x_old]: replace every free occurrence of x_old by x_new."""
    if new == old:
        return f
    return _map_free(f, {old: new})


def subst_simul(f: Formula, tops: Sequence[int], bottoms: Sequence[int]) -> Formula:
    """Simultaneous substitution phi[tops_i / bottoms_i].

    Bottoms must be pairwise distinct; tops may repeat.  Equals the two-pass
    fresh-variable definition and is independent of the fresh choice.
    """
    if len(tops) != len(bottoms):
        raise FormulaError("substitution length mismatch")
    if len(bottoms) != len(set(bottoms)):
        raise FormulaError("duplicate bottom variable in simultaneous substitution")
    if not bottoms:
        return f
    return _map_free(f, dict(zip(bottoms, tops)))


def slot_instantiate(f: Formula, *assignments: tuple[Sequence[int], Sequence[int]]) -> Formula:
    """theta(A_i, B_j)-style instantiation: simultaneous substitution over the
    concatenation of several (tops, bottoms) pairs; all bottoms must be
    mutually distinct across pairs."""
    tops: list[int] = []
    bottoms: list[int] = []
    for t, b in assignments:
        tops.extend(t)
        bottoms.extend(b)
    return subst_simul(f, tops, bottoms)


def close(f: Formula, var: int) -> Formula:
    """Bind free x_var with a new outermost Exists: the value of 'exists x_var . f'."""

    def go(g: Formula, depth: int) -> Formula:
        def atom(a: Atom) -> Atom:
            if isinstance(a, FV) and a.index == var:
                return BV(depth)
            return a

        match g:
            case Pred(name, args):
                return Pred(name, tuple(atom(a) for a in args))
            case Eq(l, r):
                return Eq(atom(l), atom(r))
            case Not(sub):
                return Not(go(sub, depth))
            case Or(l, r):
                return Or(go(l, depth), go(r, depth))
            case Exists(body):
                return Exists(go(body, depth + 1))
        raise FormulaError(f"not a formula: {g!r}")

    return Exists(go(f, 0))


def open_exists(f: Formula, var: int) -> Formula:
    """Instantiate the outermost binder of an Exists with x_var."""
    if not isinstance(f, Exists):
        raise FormulaError("open_exists on a non-existential formula")

    def go(g: Formula, depth: int) -> Formula:
        def atom(a: Atom) -> Atom:
            if isinstance(a, BV) and a.index == depth:
                return FV(var)
            return a

        match g:
            case Pred(name, args):
                return Pred(name, tuple(atom(a) for a in args))
            case Eq(l, r):
                return Eq(atom(l), atom(r))
            case Not(sub):
                return Not(go(sub, depth))
            case Or(l, r):
                return Or(go(l, depth), go(r, depth))
            case Exists(body):
                return Exists(go(body, depth + 1))
        raise FormulaError(f"not a formula: {g!r}")

    return go(f.body, 0)


def exists_many(bound: Sequence[int], f: Formula) -> Formula:
    """exists x_{b1} ... exists x_{bn} . f (bound vars must be distinct)."""
    if len(set(bound)) != len(bound):
        raise FormulaError("duplicate bound variable")
    out = f
    for v in reversed(bound):
        out = close(out, v)
    return out


def open_many(f: Formula, names: Sequence[int]) -> Formula:
    """Open a nest of len(names) Exists binders, outermost first."""
    out = f
    for v in names:
        out = open_exists(out, v)
    return out


# ---------------------------------------------------------------------------
# Derived notations.  These are expanded eagerly; the kernel only ever sees
# predicates, =, not, or, exists.


def and_(a: Formula, b: Formula) -> Formula:
    return Not(Or(Not(a), Not(b)))


def imp(a: Formula, b: Formula) -> Formula:
    return Or(Not(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return and_(imp(a, b), imp(b, a))


def big_and(parts: Sequence[Formula]) -> Formula:
    if not parts:
        raise FormulaError("empty conjunction")
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = and_(p, out)
    return out


def split_and(f: Formula) -> tuple[Formula, Formula] | None:
    """Recognize the conjunction pattern not(or(not a, not b))."""
    match f:
        case Not(Or(Not(a), Not(b))):
            return a, b
    return None


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested conjunction encodings into a list (at least one entry)."""
    pair = split_and(f)
    if pair is None:
        return [f]
    a, b = pair
    return conjuncts(a) + conjuncts(b)


def forall(var: int, f: Formula) -> Formula:
    return Not(close(Not(f), var))


def forall_many(bound: Sequence[int], f: Formula) -> Formula:
    out = f
    for v in reversed(bound):
        out = forall(v, out)
    return out


def split_forall(f: Formula) -> Formula | None:
    """Return the inner Exists-of-Not body holder if f = not exists not(...)."""
    match f:
        case Not(Exists(Not(_) as nb)):
            return nb
    return None


def open_forall(f: Formula, var: int) -> Formula:
    """Instantiate the outermost universal: (forall X phi) -> phi[x_var/X]."""
    match f:
        case Not(Exists(body)):
            opened = open_exists(Exists(body), var)
            if isinstance(opened, Not):
                return opened.sub
    raise FormulaError("open_forall on a non-universal formula")


def open_forall_many(f: Formula, names: Sequence[int]) -> Formula:
    out = f
    for v in names:
        out = open_forall(out, v)
    return out


def e_of(varset: Iterable[int]) -> Formula:
    """E^V: conjunction X=X over V in increasing index order."""
    vs = sorted(set(varset))
    if not vs:
        raise FormulaError("E^V needs a nonempty variable set")
    return big_and([Eq(FV(v), FV(v)) for v in vs])


@lru_cache(maxsize=None)
def emptiness() -> Formula:
    """The emptiness sentence E: not exists x0 (x0 = x0)."""
    return Not(close(Eq(FV(0), FV(0)), 0))


@lru_cache(maxsize=None)
def nonempty() -> Formula:
    """not E, asserting the domain is inhabited."""
    return Not(emptiness())


@lru_cache(maxsize=None)
def validity() -> Formula:
    """The validity S, fixed as forall x0 (x0 = x0)."""
    return forall(0, Eq(FV(0), FV(0)))


def validate(f: Formula, sig: Signature) -> None:
    """Check predicate arity agreement and well-scoped bound variables."""

    def go(g: Formula, depth: int) -> None:
        def atom_ok(a: Atom) -> None:
            if isinstance(a, BV) and not (0 <= a.index < depth):
                raise FormulaError(f"dangling bound variable {a.index}")

        match g:
            case Pred(name, args):
                want = sig.arity(name)
                if len(args) != want:
                    raise FormulaError(
                        f"predicate {name!r} expects {want} arguments, got {len(args)}"
                    )
                for a in args:
                    atom_ok(a)
            case Eq(l, r):
                atom_ok(l)
                atom_ok(r)
            case Not(sub):
                go(sub, depth)
            case Or(l, r):
                go(l, depth)
                go(r, depth)
            case Exists(body):
                go(body, depth + 1)
            case _:
                raise FormulaError(f"not a formula: {g!r}")

    go(f, 0)


def max_index(f: Formula) -> int:
    """Largest free-variable index occurring (or -1 if none nonnegative)."""
    fv = free_vars(f)
    return max((abs(v) for v in fv), default=0)


def fresh_block(count: int, *used_in: Formula | int) -> list[int]:
    """A strictly increasing block of indices above every index in play."""
    top = 0
    for u in used_in:
        if isinstance(u, int):
            top = max(top, abs(u))
        else:
            top = max(top, max_index(u))
    return list(range(top + 1, top + 1 + count))


# ---------------------------------------------------------------------------
# Parsing (UTF-8 s-expressions) and deterministic rendering


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    cur = []
    for ch in text:
        if ch in "()":
            if cur:
                out.append("".join(cur))
                cur = []
            out.append(ch)
        elif ch.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        out.append("".join(cur))
    return out


def parse_var(token: str) -> int:
    if not token.startswith("x"):
        raise FormulaError(f"expected a variable like x3 or x-2, got {token!r}")
    try:
        return int(token[1:])
    except ValueError:
        raise FormulaError(f"bad variable token {token!r}") from None


class _Parser:
    def __init__(self, tokens: list[str], sig: Signature):
        self.tokens = tokens
        self.pos = 0
        self.sig = sig

    def peek(self) -> str:
        if self.pos >= len(self.tokens):
            raise FormulaError("unexpected end of input")
        return self.tokens[self.pos]

    def next(self) -> str:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise FormulaError(f"expected {tok!r} at token {self.pos - 1}, got {got!r}")

    def atom(self, env: dict[int, int], depth: int) -> Atom:
        v = parse_var(self.next())
        if v in env:
            return BV(depth - 1 - env[v])
        return FV(v)

    def formula(self, env: dict[int, int], depth: int) -> Formula:
        self.expect("(")
        head = self.next()
        if head == "=":
            l = self.atom(env, depth)
            r = self.atom(env, depth)
            self.expect(")")
            return Eq(l, r)
        if head == "pred":
            name = self.next()
            args = []
            while self.peek() != ")":
                args.append(self.atom(env, depth))
            self.expect(")")
            want = self.sig.arity(name)
            if len(args) != want:
                raise FormulaError(
                    f"predicate {name!r} expects {want} arguments, got {len(args)}"
                )
            return Pred(name, tuple(args))
        if head == "not":
            sub = self.formula(env, depth)
            self.expect(")")
            return Not(sub)
        if head == "or":
            l = self.formula(env, depth)
            r = self.formula(env, depth)
            self.expect(")")
            return Or(l, r)
        if head in ("exists", "forall"):
            v = parse_var(self.next())
            inner_env = dict(env)
            inner_env[v] = depth
            body = self.formula(inner_env, depth + 1)
            self.expect(")")
            if head == "exists":
                return Exists(body)
            return Not(Exists(Not(body)))
        if head == "and":
            parts = []
            while self.peek() != ")":
                parts.append(self.formula(env, depth))
            self.expect(")")
            if not parts:
                raise FormulaError("(and) needs at least one part")
            out = parts[-1]
            for p in reversed(parts[:-1]):
                out = and_(p, out)
            return out
        if head == "imp":
            a = self.formula(env, depth)
            b = self.formula(env, depth)
            self.expect(")")
            return imp(a, b)
        if head == "iff":
            a = self.formula(env, depth)
            b = self.formula(env, depth)
            self.expect(")")
            return iff(a, b)
        raise FormulaError(f"unknown form {head!r}")


def parse_formula(text: str, sig: Signature) -> Formula:
    """Parse the s-expression grammar to an alpha-canonical Formula.

    Binders shadow: the innermost binding of a name wins.  Bound occurrences
    become de Bruijn indices; never-bound names become free variables.
    """
    tokens = _tokenize(text)
    p = _Parser(tokens, sig)
    f = p.formula({}, 0)
    if p.pos != len(p.tokens):
        raise FormulaError(f"trailing tokens at position {p.pos}")
    return f


def render(f: Formula) -> str:
    """Deterministic core-syntax rendering.

    Each binder is displayed as the smallest nonnegative index whose name is
    not already taken by a variable occurring free in its body (including the
    display names of enclosing binders the body refers to).
    """

    def atom(a: Atom, env: list[int]) -> str:
        if isinstance(a, FV):
            return f"x{a.index}"
        return f"x{env[-1 - a.index]}"

    def blocked(g: Formula, depth: int, env: list[int]) -> set[int]:
        # Names the binder being introduced must avoid: free variables of its
        # body, plus display names of outer binders the body refers to.
        def from_atoms(atoms: Iterable[Atom]) -> set[int]:
            out = set()
            for a in atoms:
                if isinstance(a, FV):
                    out.add(a.index)
                elif a.index > depth:
                    out.add(env[-1 - (a.index - depth - 1)])
            return out

        match g:
            case Pred(_, args):
                return from_atoms(args)
            case Eq(l, r):
                return from_atoms((l, r))
            case Not(sub):
                return blocked(sub, depth, env)
            case Or(l, r):
                return blocked(l, depth, env) | blocked(r, depth, env)
            case Exists(body):
                return blocked(body, depth + 1, env)
        raise FormulaError(f"not a formula: {g!r}")

    def go(g: Formula, env: list[int]) -> str:
        match g:
            case Pred(name, args):
                inner = " ".join(atom(a, env) for a in args)
                return f"(pred {name} {inner})" if inner else f"(pred {name})"
            case Eq(l, r):
                return f"(= {atom(l, env)} {atom(r, env)})"
            case Not(sub):
                return f"(not {go(sub, env)})"
            case Or(l, r):
                return f"(or {go(l, env)} {go(r, env)})"
            case Exists(body):
                taken = blocked(body, 0, env)
                name = 0
                while name in taken:
                    name += 1
                return f"(exists x{name} {go(body, env + [name])})"
        raise FormulaError(f"not a formula: {g!r}")

    return go(f, [])


def parse_signature(text: str) -> Signature:
    """Signature file format: one `pred NAME ARITY` per line; # comments."""
    preds: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "pred":
            raise FormulaError(f"signature line {lineno}: expected 'pred NAME ARITY'")
        name, arity = parts[1], parts[2]
        if name in preds:
            raise FormulaError(f"signature line {lineno}: duplicate predicate {name!r}")
        preds[name] = int(arity)
    return Signature(tuple(sorted(preds.items())))
