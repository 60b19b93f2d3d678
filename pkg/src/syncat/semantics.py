"""Finite structures and brute-force satisfaction: the semantic oracle.

Structures may be empty.  Universals come out true and existentials false
over the empty carrier, which is the unique reading that keeps all twelve
weakened rules sound (exercised by the soundness sweep in the test suite).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .formulas import (
    BV,
    Eq,
    Exists,
    FV,
    Formula,
    FormulaError,
    Not,
    Or,
    Pred,
    Signature,
    free_vars,
    open_exists,
)
from .kernel import Sequent


class SemanticsError(Exception):
    pass


@dataclass(frozen=True)
class Structure:
    """Finite carrier {0..size-1} plus relation tables.

    Arity-0 predicates are subsets of the fixed singleton U = {()}, so they
    carry a truth value even over the empty carrier."""

    sig: Signature
    size: int
    tables: tuple[tuple[str, frozenset[tuple[int, ...]]], ...]

    @staticmethod
    def of(sig: Signature, size: int, **tables) -> "Structure":
        full = {name: frozenset(map(tuple, tables.get(name, ()))) for name, _ in sig.predicates}
        return Structure(sig, size, tuple(sorted(full.items())))

    def table(self, name: str) -> frozenset[tuple[int, ...]]:
        for n, t in self.tables:
            if n == name:
                return t
        raise SemanticsError(f"no table for predicate {name!r}")

    def validate(self) -> None:
        for name, t in self.tables:
            arity = self.sig.arity(name)
            for row in t:
                if len(row) != arity or not all(0 <= e < self.size for e in row):
                    raise SemanticsError(f"table for {name!r} violates its arity or carrier")


@dataclass(frozen=True)
class DefinableSet:
    """The set of satisfying assignments over the formula's free variables.

    Sentences have vars == () and rows a subset of {()}: U or the empty set."""

    vars: tuple[int, ...]
    rows: frozenset[tuple[int, ...]]

    @property
    def is_inhabited(self) -> bool:
        return bool(self.rows)

    def as_assignments(self) -> list[dict[int, int]]:
        return [dict(zip(self.vars, row)) for row in self.rows]


def all_assignments(size: int, variables: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return itertools.product(range(size), repeat=len(variables))


def satisfies(m: Structure, f: Formula, env: dict[int, int], benv: tuple = ()) -> bool:
    """Flat recursive satisfaction; env covers the free variables of f."""

    def val(a) -> int:
        if isinstance(a, FV):
            return env[a.index]
        return benv[-1 - a.index]

    match f:
        case Pred(name, args):
            return tuple(val(a) for a in args) in m.table(name)
        case Eq(l, r):
            return val(l) == val(r)
        case Not(sub):
            return not satisfies(m, sub, env, benv)
        case Or(l, r):
            return satisfies(m, l, env, benv) or satisfies(m, r, env, benv)
        case Exists(body):
            return any(satisfies(m, body, env, benv + (e,)) for e in range(m.size))
    raise SemanticsError(f"not a formula: {f!r}")


def eval_flat(m: Structure, f: Formula) -> DefinableSet:
    """The all-assignments oracle: enumerate M^free(f) and test satisfaction."""
    vs = tuple(sorted(free_vars(f)))
    rows = frozenset(
        row for row in all_assignments(m.size, vs) if satisfies(m, f, dict(zip(vs, row)))
    )
    return DefinableSet(vs, rows)


def expand(ds: DefinableSet, target_vars: tuple[int, ...], size: int) -> frozenset:
    """Pad a definable set out to a superset of variables (product with M^extra)."""
    if ds.vars == target_vars:
        return ds.rows
    missing = [v for v in target_vars if v not in ds.vars]
    if set(ds.vars) - set(target_vars):
        raise SemanticsError("expand target must contain the set's variables")
    pos = {v: i for i, v in enumerate(ds.vars)}
    out = set()
    for row in ds.rows:
        for extra in all_assignments(size, missing):
            fill = dict(zip(missing, extra))
            out.add(tuple(fill[v] if v in fill else row[pos[v]] for v in target_vars))
    return frozenset(out)


def eval_set(m: Structure, f: Formula, cache: dict | None = None) -> DefinableSet:
    """Structured evaluation following the clause-by-clause definition
    (atoms, disjunction with padding, complement, projection for exists)."""
    if cache is not None and f in cache:
        return cache[f]
    out = _eval_set(m, f, cache)
    if cache is not None:
        cache[f] = out
    return out


def _eval_set(m: Structure, f: Formula, cache) -> DefinableSet:
    match f:
        case Pred(name, args):
            vs = tuple(sorted({a.index for a in args}))
            table = m.table(name)
            rows = frozenset(
                row
                for row in all_assignments(m.size, vs)
                if tuple(row[vs.index(a.index)] for a in args) in table
            )
            return DefinableSet(vs, rows)
        case Eq(FV(i), FV(j)):
            if i == j:
                return DefinableSet((i,), frozenset((e,) for e in range(m.size)))
            vs = tuple(sorted((i, j)))
            rows = frozenset((e, e) for e in range(m.size))
            return DefinableSet(vs, rows)
        case Not(sub):
            inner = eval_set(m, sub, cache)
            if inner.vars:
                univ = frozenset(all_assignments(m.size, inner.vars))
            else:
                univ = frozenset({()})
            return DefinableSet(inner.vars, univ - inner.rows)
        case Or(l, r):
            a = eval_set(m, l, cache)
            b = eval_set(m, r, cache)
            vs = tuple(sorted(set(a.vars) | set(b.vars)))
            return DefinableSet(vs, expand(a, vs, m.size) | expand(b, vs, m.size))
        case Exists(body):
            if m.size == 0:
                # existentials are false over the empty carrier
                return DefinableSet(tuple(sorted(free_vars(f))), frozenset())
            w = max((abs(v) for v in free_vars(f)), default=0) + 1
            opened = open_exists(f, w)
            inner = eval_set(m, opened, cache)
            if w not in inner.vars:
                return inner  # vacuous quantifier (nonempty carrier)
            keep = tuple(v for v in inner.vars if v != w)
            drop = inner.vars.index(w)
            rows = frozenset(row[:drop] + row[drop + 1 :] for row in inner.rows)
            return DefinableSet(keep, rows)
    raise SemanticsError(f"not a formula: {f!r}")


def sequent_holds(m: Structure, s: Sequent, cache: dict | None = None) -> bool:
    """Every assignment over the sequent's free variables satisfying all
    hypotheses satisfies the succedent (vacuously true over the empty
    carrier when free variables are present)."""
    vs = tuple(sorted(s.free_vars()))
    rhs_rows = expand(eval_set(m, s.rhs, cache), vs, m.size)
    lhs_rows: frozenset | None = None
    for h in s.lhs:
        rows = expand(eval_set(m, h, cache), vs, m.size)
        lhs_rows = rows if lhs_rows is None else lhs_rows & rows
        if not lhs_rows:
            return True
    if lhs_rows is None:
        lhs_rows = frozenset(all_assignments(m.size, vs))
    return lhs_rows <= rhs_rows


def structure_holds(m: Structure, sentence: Formula) -> bool:
    if free_vars(sentence):
        raise SemanticsError("structure_holds expects a sentence")
    return satisfies(m, sentence, {})


def is_model(m: Structure, axioms) -> bool:
    return all(structure_holds(m, a) for a in axioms)


def enumerate_structures(sig: Signature, max_size: int, bound: int = 4) -> Iterator[Structure]:
    """All structures over carriers {0..k-1}, k <= max_size, including the
    empty carrier; raw enumeration with no isomorphism quotient."""
    if max_size > bound:
        raise SemanticsError(f"size bound exceeded ({max_size} > {bound})")
    for size in range(max_size + 1):
        spaces = []
        for name, arity in sig.predicates:
            cells = list(itertools.product(range(size), repeat=arity))
            subsets = [
                frozenset(c for c, pick in zip(cells, picks) if pick)
                for picks in itertools.product((False, True), repeat=len(cells))
            ]
            spaces.append([(name, s) for s in subsets])
        for combo in itertools.product(*spaces):
            yield Structure(sig, size, tuple(sorted(combo)))


def models_of(sig: Signature, axioms, max_size: int) -> list[Structure]:
    return [m for m in enumerate_structures(sig, max_size) if is_model(m, axioms)]


# ---------------------------------------------------------------------------
# Structure files: `carrier N` plus one `rel NAME tuple tuple ...` per
# predicate (tuples comma-separated; arity 0 uses the token `()`).


def parse_structure(text: str, sig: Signature) -> Structure:
    size = None
    tables: dict[str, set[tuple[int, ...]]] = {name: set() for name, _ in sig.predicates}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "carrier":
            if len(parts) != 2:
                raise SemanticsError(f"line {lineno}: expected 'carrier N'")
            size = int(parts[1])
        elif parts[0] == "rel":
            name = parts[1]
            if name not in tables:
                raise SemanticsError(f"line {lineno}: unknown predicate {name!r}")
            for tok in parts[2:]:
                if tok == "()":
                    tables[name].add(())
                else:
                    tables[name].add(tuple(int(x) for x in tok.split(",")))
        else:
            raise SemanticsError(f"line {lineno}: expected 'carrier' or 'rel'")
    if size is None:
        raise SemanticsError("missing 'carrier N' line")
    m = Structure.of(sig, size, **{k: v for k, v in tables.items()})
    m.validate()
    return m


def render_structure(m: Structure) -> str:
    lines = [f"carrier {m.size}"]
    for name, t in m.tables:
        if not t:
            continue
        toks = sorted("()" if row == () else ",".join(map(str, row)) for row in t)
        lines.append(f"rel {name} {' '.join(toks)}")
    return "\n".join(lines) + "\n"
