"""Certified normalization of existential-conjunctive formulas.

Works on formulas of the shape `exists-prefix over a conjunction of atoms`
(any non-exists, non-conjunction node counts as an opaque atom, so parsing
is total).  Each rewrite step ships an EquivCert relative to {not E}; the
cert for the whole normalization is their composition, so the kernel is the
only authority on correctness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .formulas import (
    Eq,
    Exists,
    FV,
    Formula,
    Not,
    Or,
    Pred,
    big_and,
    conjuncts,
    exists_many,
    free_vars,
    max_index,
    open_exists,
    render,
    subst,
    subst_simul,
)
from .tactics import Builder, EquivCert, NOT_E, cert_chain, cert_refl


class NormalizeError(Exception):
    pass


@dataclass
class PrefixForm:
    """Open working form: binder names (outermost first) plus conjunct list."""

    prefix: list[int]
    conj: list[Formula]

    def closed(self) -> Formula:
        return exists_many(self.prefix, big_and(self.conj))


def open_form(f: Formula, base: int) -> tuple[PrefixForm, int]:
    """Split the outer exists-prefix and flatten the conjunction, choosing
    fresh names above `base` for the binders."""
    prefix: list[int] = []
    cur = f
    nxt = base
    while isinstance(cur, Exists):
        prefix.append(nxt)
        cur = open_exists(cur, nxt)
        nxt += 1
    return PrefixForm(prefix, conjuncts(cur)), nxt


def _derive_conjunct(
    b: Builder, hyps: frozenset, target: Formula, source_conj: Sequence[Formula]
) -> int:
    """Derive hyps => target where hyps contains every source conjunct.

    Handles: a literal copy, a reflexive equation, or one equation-rewrite
    step from a source conjunct using an equality that is itself a source
    conjunct (either orientation)."""
    if target in source_conj:
        return b.assume(hyps, target)
    match target:
        case Eq(FV(a), FV(c)) if a == c:
            return b.ant(b.identity(a), hyps)
    for eq in source_conj:
        match eq:
            case Eq(FV(a), FV(c)) if a != c:
                pass
            case _:
                continue
        for flipped in (False, True):
            old, new = (a, c) if not flipped else (c, a)
            for src in source_conj:
                if subst(src, new, old) == target:
                    slot = max(max_index(src), abs(old), abs(new)) + 1
                    line = b.assume(hyps, src)
                    template = subst(src, slot, old)
                    out = b.subs(line, template, slot, old, new)
                    if flipped:
                        # available equality runs a = c; SUBS used c = a
                        out = b.flip_eq_hyp(out, old, new)
                    return b.ant(out, hyps | b.seq(out).lhs)
    raise NormalizeError(f"cannot justify conjunct {render(target)}")


def reshape_cert(
    src: PrefixForm,
    tgt: PrefixForm,
    fwd_wit: dict[int, int],
    bwd_wit: dict[int, int],
) -> EquivCert:
    """Certify src.closed() == tgt.closed().

    fwd_wit sends each tgt binder name to a witness in src's namespace;
    bwd_wit the other way.  Every instantiated conjunct on either side must
    be derivable from the other side's conjuncts via _derive_conjunct."""

    def one_direction(frm: PrefixForm, to: PrefixForm, wit: dict[int, int]):
        b = Builder()
        hyps = frozenset(frm.conj) | {NOT_E}
        assigned = [
            subst_simul(c, [wit[v] for v in to.prefix], to.prefix) if to.prefix else c
            for c in to.conj
        ]
        lines = [_derive_conjunct(b, hyps, c, frm.conj) for c in assigned]
        body = b.prove_conj(lines)
        if to.prefix:
            body = b.exs_multi(body, to.closed(), [wit[v] for v in to.prefix])
        folded = b.unload_all(b.ant(body, b.seq(body).lhs | hyps), big_and(frm.conj))
        out = b.exa_multi(folded, big_and(frm.conj), frm.prefix)
        return b.build(out)

    fwd = one_direction(src, tgt, fwd_wit)
    bwd = one_direction(tgt, src, bwd_wit)
    return EquivCert(src.closed(), tgt.closed(), fwd, bwd)


def pull_cert(form: PrefixForm, index: int, fresh_base: int) -> tuple[PrefixForm, EquivCert, int]:
    """Pull the exists-rooted conjunct at `index` into the prefix."""
    ex = form.conj[index]
    if not isinstance(ex, Exists):
        raise NormalizeError("pull target is not existential")
    inner, nxt = open_form(ex, fresh_base)
    inner_shape = ex
    for v in inner.prefix:
        inner_shape = open_exists(inner_shape, v)
    new = PrefixForm(
        form.prefix + inner.prefix, form.conj[: index] + form.conj[index + 1 :] + inner.conj
    )

    src_value, tgt_value = form.closed(), new.closed()
    rest = form.conj[:index] + form.conj[index + 1 :]

    def fwd():
        b = Builder()
        open_hyps = frozenset(rest) | frozenset(inner.conj) | {NOT_E}
        lines = [_derive_conjunct(b, open_hyps, c, rest + inner.conj) for c in new.conj]
        body = b.prove_conj(lines)
        body = b.exs_multi(body, tgt_value, form.prefix + inner.prefix)
        body = b.ant(body, b.seq(body).lhs | open_hyps)
        folded_inner = b.unload_all(body, inner_shape)
        closed_inner = b.exa_multi(folded_inner, inner_shape, inner.prefix)
        all_hyps = b.ant(closed_inner, b.seq(closed_inner).lhs | frozenset(form.conj))
        folded = b.unload_all(all_hyps, big_and(form.conj))
        out = b.exa_multi(folded, big_and(form.conj), form.prefix)
        return b.build(out)

    def bwd():
        b = Builder()
        hyps = frozenset(new.conj) | {NOT_E}
        inner_body = b.prove_like(
            inner_shape, lambda leaf: _derive_conjunct(b, hyps, leaf, new.conj)
        )
        ex_line = b.exs_multi(inner_body, ex, inner.prefix) if inner.prefix else inner_body
        outer_lines = []
        for pos, c in enumerate(form.conj):
            if pos == index:
                outer_lines.append(ex_line)
            else:
                outer_lines.append(_derive_conjunct(b, hyps, c, new.conj))
        body = b.prove_conj(outer_lines)
        body = b.exs_multi(body, src_value, form.prefix) if form.prefix else body
        folded = b.unload_all(b.ant(body, b.seq(body).lhs | hyps), big_and(new.conj))
        out = b.exa_multi(folded, big_and(new.conj), new.prefix)
        return b.build(out)

    cert = EquivCert(src_value, tgt_value, fwd(), bwd())
    return new, cert, nxt


def _fv_occurrences(c: Formula) -> list[int]:
    """Free variables in left-to-right occurrence order (with repeats)."""
    out: list[int] = []

    def go(g: Formula) -> None:
        match g:
            case Pred(_, args):
                out.extend(a.index for a in args if isinstance(a, FV))
            case Eq(l, r):
                out.extend(a.index for a in (l, r) if isinstance(a, FV))
            case Not(s):
                go(s)
            case Or(l, r):
                go(l)
                go(r)
            case Exists(body):
                go(body)

    go(c)
    return out


_MASK_BASE = 10**6


def _sort_key(c: Formula, prefix: Sequence[int]) -> str:
    """Name-independent key: prefix variables are renumbered by first
    occurrence inside the conjunct before rendering."""
    local: list[int] = []
    for v in _fv_occurrences(c):
        if v in prefix and v not in local:
            local.append(v)
    if not local:
        return render(c)
    masked = subst_simul(c, [_MASK_BASE + k for k in range(len(local))], local)
    return render(masked)


def normalize(f: Formula) -> tuple[Formula, EquivCert]:
    """Normal form plus a {not E}-relative certificate.

    Steps: pull existential conjuncts into the prefix, flatten conjunctions,
    substitute away equations involving a bound variable, drop reflexive
    equations and duplicates, drop unused binders, then sort conjuncts
    canonically and rebind the prefix in first-use order."""
    base = max_index(f) + 1
    certs: list[EquivCert] = [cert_refl(f)]
    form, fresh = open_form(f, base)
    if form.closed() != f:
        # the matrix is not right-associated: flatten it first (certified)
        certs.append(_flatten_cert(f, form, base))

    changed = True
    while changed:
        changed = False

        # drop reflexive equations and duplicates first (keeps pulls clean)
        kept: list[Formula] = []
        for c in form.conj:
            if c in kept:
                continue
            match c:
                case Eq(FV(a), FV(bb)) if a == bb:
                    continue
            kept.append(c)
        if not kept:
            kept = [form.conj[0]]
        if kept != form.conj:
            tgt = PrefixForm(list(form.prefix), kept)
            ident = {v: v for v in form.prefix}
            certs.append(reshape_cert(form, tgt, dict(ident), dict(ident)))
            form = tgt
            changed = True
            continue

        # pull nested existentials
        for idx, c in enumerate(form.conj):
            if isinstance(c, Exists):
                form, cert, fresh = pull_cert(form, idx, fresh)
                certs.append(cert)
                changed = True
                break
        if changed:
            continue

        # eliminate an equation with a bound side
        for idx, c in enumerate(form.conj):
            match c:
                case Eq(FV(a), FV(bb)) if a != bb and (a in form.prefix or bb in form.prefix):
                    bound, other = (a, bb) if a in form.prefix else (bb, a)
                    rest = [x for j, x in enumerate(form.conj) if j != idx]
                    new_conj = [subst(x, other, bound) for x in rest]
                    if not new_conj:
                        new_conj = [Eq(FV(other), FV(other))]
                    tgt = PrefixForm([v for v in form.prefix if v != bound], new_conj)
                    fwd_wit = {v: v for v in tgt.prefix}
                    bwd_wit = {v: v for v in form.prefix}
                    bwd_wit[bound] = other
                    certs.append(reshape_cert(form, tgt, fwd_wit, bwd_wit))
                    form = tgt
                    changed = True
                    break
        if changed:
            continue

        # drop binders that no longer occur
        used = set().union(*[free_vars(c) for c in form.conj])
        if any(v not in used for v in form.prefix):
            tgt = PrefixForm([v for v in form.prefix if v in used], list(form.conj))
            fwd_wit = {v: v for v in tgt.prefix}
            bwd_wit = {v: (v if v in used else _any_witness(form, used)) for v in form.prefix}
            certs.append(reshape_cert(form, tgt, fwd_wit, bwd_wit))
            form = tgt
            changed = True
            continue

    # canonical conjunct order, then prefix in first-use order
    order = sorted(range(len(form.conj)), key=lambda i: (_sort_key(form.conj[i], form.prefix), i))
    sorted_conj = [form.conj[i] for i in order]
    first_use: list[int] = []
    for c in sorted_conj:
        for v in _fv_occurrences(c):
            if v in form.prefix and v not in first_use:
                first_use.append(v)
    tgt = PrefixForm(first_use, sorted_conj)
    if tgt.prefix != form.prefix or tgt.conj != form.conj:
        ident_f = {v: v for v in tgt.prefix}
        ident_b = {v: v for v in form.prefix}
        certs.append(reshape_cert(form, tgt, ident_f, ident_b))
        form = tgt

    return form.closed(), cert_chain(certs)


def _flatten_cert(f: Formula, form: PrefixForm, base: int) -> EquivCert:
    """Certify f == its prefix form with a right-associated flat matrix."""
    matrix = f
    for v in form.prefix:
        matrix = open_exists(matrix, v)
    flat = form.closed()

    bf = Builder()
    start = bf.assume({matrix, NOT_E}, matrix)
    parts = bf.split_conj(start)
    body = bf.prove_conj(parts)
    closed = bf.exs_multi(body, flat, form.prefix) if form.prefix else body
    closed = bf.ant(closed, bf.seq(closed).lhs | {matrix, NOT_E})
    fwd = bf.build(bf.exa_multi(closed, matrix, form.prefix))

    bb = Builder()
    start = bb.assume({big_and(form.conj), NOT_E}, big_and(form.conj))
    leaf_lines = dict(zip(form.conj, bb.split_conj(start)))
    rebuilt = bb.prove_like(matrix, lambda leaf: leaf_lines[leaf])
    closed = bb.exs_multi(rebuilt, f, form.prefix) if form.prefix else rebuilt
    closed = bb.ant(closed, bb.seq(closed).lhs | {big_and(form.conj), NOT_E})
    bwd = bb.build(bb.exa_multi(closed, big_and(form.conj), form.prefix))
    return EquivCert(f, flat, fwd, bwd)


def _any_witness(form: PrefixForm, used: set[int]) -> int:
    """A witness for a vacuous binder: anything available (x0 by default)."""
    for v in form.prefix:
        if v in used:
            return v
    outer = sorted(used - set(form.prefix))
    return outer[0] if outer else 0


def _match_assignment(d: Formula, r: Formula, block: set[int]) -> dict[int, int] | None:
    """Try to present r as d with the block variables substituted; returns
    the (consistent) assignment or None."""
    sigma: dict[int, int] = {}

    def atoms_match(a, b) -> bool:
        if isinstance(a, FV) and a.index in block:
            if not isinstance(b, FV):
                return False
            if a.index in sigma:
                return sigma[a.index] == b.index
            sigma[a.index] = b.index
            return True
        return a == b

    def go(x: Formula, y: Formula) -> bool:
        match x, y:
            case Pred(n1, args1), Pred(n2, args2):
                return n1 == n2 and len(args1) == len(args2) and all(
                    atoms_match(a, b) for a, b in zip(args1, args2)
                )
            case Eq(l1, r1), Eq(l2, r2):
                return atoms_match(l1, l2) and atoms_match(r1, r2)
            case Not(s1), Not(s2):
                return go(s1, s2)
            case Or(a1, b1), Or(a2, b2):
                return go(a1, a2) and go(b1, b2)
            case Exists(b1), Exists(b2):
                return go(b1, b2)
        return False

    return sigma if go(d, r) else None


def subsume_cert(f: Formula) -> tuple[Formula, EquivCert]:
    """Drop a prefix-variable block whose conjuncts are instances of the
    remainder: if an assignment of in-scope variables to the block turns
    every conjunct mentioning it into a formula already present, the block
    and its conjuncts can be removed (certified both ways)."""
    base = max_index(f) + 1
    form, _ = open_form(f, base)
    cert = cert_refl(f)
    changed = True
    while changed:
        changed = False
        for t in list(form.prefix):
            # the co-occurrence block of t: close under shared conjuncts
            block = {t}
            while True:
                grown = set(block)
                for c in form.conj:
                    fv = free_vars(c)
                    if fv & block:
                        grown |= fv & set(form.prefix)
                if grown == block:
                    break
                block = grown
            group = [c for c in form.conj if free_vars(c) & block]
            rest = [c for c in form.conj if not free_vars(c) & block]
            if not rest:
                continue
            sigma = _try_block_match(group, rest, block)
            if sigma is None:
                continue
            tgt = PrefixForm([x for x in form.prefix if x not in block], rest)
            fwd_wit = {x: x for x in tgt.prefix}
            bwd_wit = {x: x for x in form.prefix}
            bwd_wit.update(sigma)
            cert = cert_chain([cert, reshape_cert(form, tgt, fwd_wit, bwd_wit)])
            form = tgt
            changed = True
            break
    return form.closed(), cert


def _try_block_match(group, rest, block) -> dict[int, int] | None:
    """Find one consistent assignment of the block turning every group
    conjunct into a member of rest (or a reflexive equation)."""
    sigma: dict[int, int] = {}

    def extend(partial: dict[int, int], remaining) -> dict[int, int] | None:
        if not remaining:
            return partial
        d, tail = remaining[0], remaining[1:]
        for r in rest:
            got = _match_assignment(d, r, block)
            if got is None:
                continue
            if any(k in partial and partial[k] != v for k, v in got.items()):
                continue
            out = extend({**partial, **got}, tail)
            if out is not None:
                # every block variable must actually be assigned
                return out
        # a group conjunct may also collapse to a reflexive equation
        match d:
            case Eq(FV(a), FV(bb)):
                options = []
                if a in block and bb in block:
                    options = [({a: x, bb: x}, None) for x in set(partial.values())]
                elif a in block:
                    options = [({a: bb}, None)]
                elif bb in block:
                    options = [({bb: a}, None)]
                for got, _ in options:
                    if any(k in partial and partial[k] != v for k, v in got.items()):
                        continue
                    out = extend({**partial, **got}, tail)
                    if out is not None:
                        return out
        return None

    result = extend(sigma, list(group))
    if result is None or set(result) != set(block):
        return None
    if any(v in block for v in result.values()):
        return None
    return result
