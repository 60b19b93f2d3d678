"""The derivation-script format: parse, run, and emit.

One numbered line per step:

    N. F1, F2 ; G BY RULE(refs; data)

Formulas are s-expressions, the left-hand side is comma-separated (empty for
no hypotheses), refs are earlier line numbers, and data items are formulas,
variables (xK) or integers, comma-separated.  Basic-rule lines are checked
directly; tactic lines expand to basic rules before checking, and the stated
conclusion must match the expansion's exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formulas import (
    Formula,
    FormulaError,
    Signature,
    parse_formula,
    parse_var,
    render,
)
from .kernel import CheckFailure, Derivation, RuleApp, Sequent, check_derivation
from .tactics import Builder, TacticError

BASIC_RULES = {
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
}

TACTIC_RULES = {
    "CHAIN",
    "CP",
    "DNA",
    "DNB",
    "DNC",
    "DND",
    "LOAD",
    "UNLOAD",
    "METAA",
    "METAB",
    "DCONJ",
    "SDROP",
    "SDROPR",
    "RCONJ",
    "EXP",
    "FORALLS",
    "FORALLA",
    "FORALLELIM",
    "EXISTSELIM",
    "EXSM",
    "EXAM",
    "EXDM",
    "SUBSM",
}


class ScriptError(Exception):
    pass


@dataclass
class ScriptLine:
    number: int
    sequent: Sequent
    rule: str
    refs: list[int]
    data: list


def _split_top(text: str, sep: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return out


def _last_top_by(text: str) -> int:
    """Index of the last paren-depth-0 ' BY ' separator, or -1."""
    depth = 0
    found = -1
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0 and text[i : i + 4] == " BY ":
            found = i
    return found


def _parse_datum(tok: str, sig: Signature):
    tok = tok.strip()
    if tok.startswith("("):
        return parse_formula(tok, sig)
    if tok.startswith("x"):
        return parse_var(tok)
    try:
        return int(tok)
    except ValueError:
        raise ScriptError(f"bad data token {tok!r}") from None


def parse_script(text: str, sig: Signature) -> list[ScriptLine]:
    lines: list[ScriptLine] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            head, _, num_rest = stripped.partition(".")
            number = int(head)
            cut = _last_top_by(num_rest)
            if cut < 0:
                raise ScriptError("missing BY clause")
            body, rule_part = num_rest[:cut], num_rest[cut + 4 :]
            lhs_text, _, rhs_text = body.rpartition(";")
            hyps = [
                parse_formula(t, sig) for t in _split_top(lhs_text, ",") if t
            ]
            rhs = parse_formula(rhs_text.strip(), sig)
            rule_part = rule_part.strip()
            if "(" in rule_part:
                name, _, arg_text = rule_part.partition("(")
                if not arg_text.endswith(")"):
                    raise ScriptError("unbalanced rule arguments")
                arg_text = arg_text[:-1]
                ref_text, _, data_text = arg_text.partition(";")
                refs = [int(t) for t in _split_top(ref_text, ",") if t]
                data = [
                    _parse_datum(t, sig) for t in _split_top(data_text, ",") if t
                ]
            else:
                name, refs, data = rule_part, [], []
            name = name.strip().upper()
            if name not in BASIC_RULES and name not in TACTIC_RULES:
                raise ScriptError(f"unknown rule {name!r}")
            lines.append(ScriptLine(number, Sequent.of(hyps, rhs), name, refs, data))
        except (FormulaError, ScriptError, ValueError) as e:
            raise ScriptError(f"line {lineno}: {e}") from None
    if not lines:
        raise ScriptError("empty script")
    return lines


def run_script(lines: list[ScriptLine]) -> tuple[Sequent, Derivation]:
    """Expand tactics, check every line, and return the conclusion plus the
    fully expanded basic-rule derivation."""
    b = Builder()
    by_number: dict[int, int] = {}

    def ref(line: ScriptLine, k: int) -> int:
        if line.refs[k] not in by_number:
            raise ScriptError(f"line {line.number}: missing premise {line.refs[k]}")
        return by_number[line.refs[k]]

    for line in lines:
        try:
            idx = _run_one(b, line, ref)
        except (TacticError, CheckFailure, Exception) as e:
            raise ScriptError(f"line {line.number}: {e}") from None
        if b.seq(idx) != line.sequent:
            raise ScriptError(
                f"line {line.number}: stated sequent does not match the rule's"
                f" conclusion (got {_fmt_sequent(b.seq(idx))})"
            )
        by_number[line.number] = idx
    final = by_number[lines[-1].number]
    return b.seq(final), b.build(final)


def _run_one(b: Builder, line: ScriptLine, ref) -> int:
    name, data = line.rule, line.data
    if name in BASIC_RULES:
        app = RuleApp(name, tuple(ref(line, k) for k in range(len(line.refs))), tuple(data), line.sequent)
        return b.emit(app.rule, app.premises, app.data, app.conclusion)
    if name == "CHAIN":
        return b.chain(ref(line, 0), ref(line, 1))
    if name == "CP":
        return b.cp(ref(line, 0), data[0])
    if name == "DNA":
        return b.dn_a(ref(line, 0))
    if name == "DNB":
        return b.dn_b(ref(line, 0))
    if name == "DNC":
        return b.dn_c(ref(line, 0), data[0])
    if name == "DND":
        return b.dn_d(ref(line, 0), data[0])
    if name == "LOAD":
        return b.load(ref(line, 0), data[0], data[1])
    if name == "UNLOAD":
        return b.unload(ref(line, 0), data[0], data[1])
    if name == "METAA":
        return b.meta_a(ref(line, 0), data[0])
    if name == "METAB":
        return b.meta_b(ref(line, 0))
    if name == "SDROP":
        return b.sdrop(ref(line, 0), keep_left=True)
    if name == "SDROPR":
        return b.sdrop(ref(line, 0), keep_left=False)
    if name == "RCONJ":
        return b.r_conj(ref(line, 0), ref(line, 1))
    if name == "DCONJ":
        from .category import _dconj

        return _dconj(b, ref(line, 0), ref(line, 1), data[0], data[1])
    if name == "EXP":
        return b.exp(ref(line, 0), ref(line, 1), data[0])
    if name == "FORALLS":
        return b.forall_s(ref(line, 0), [d for d in data])
    if name == "FORALLA":
        return b.forall_a(ref(line, 0), data[0], [d for d in data[1:]])
    if name == "FORALLELIM":
        return b.forall_elim(ref(line, 0), [d for d in data])
    if name == "EXISTSELIM":
        return b.exists_elim_on(ref(line, 0), data[0], [d for d in data[1:]])
    if name == "EXSM":
        return b.exs_multi(ref(line, 0), data[0], [d for d in data[1:]])
    if name == "EXAM":
        return b.exa_multi(ref(line, 0), data[0], [d for d in data[1:]])
    if name == "EXDM":
        return b.exd_multi(ref(line, 0), data[0], [d for d in data[1:]])
    if name == "SUBSM":
        rho = data[0]
        rest = data[1:]
        third = len(rest) // 3
        slots, ys, yps = rest[:third], rest[third : 2 * third], rest[2 * third :]
        return b.subs_multi(ref(line, 0), rho, slots, ys, yps)
    raise ScriptError(f"unhandled rule {name!r}")


def _fmt_sequent(s: Sequent) -> str:
    hyps = ", ".join(sorted(render(h) for h in s.lhs))
    return f"{hyps} ; {render(s.rhs)}"


def render_script(d: Derivation) -> str:
    """Serialize a basic-rule derivation back to the script format."""
    out = []
    for i, app in enumerate(d.lines):
        data = ", ".join(
            render(x) if isinstance(x, Formula) else f"x{x}" for x in app.data
        )
        refs = ",".join(str(r + 1) for r in app.premises)
        arg = ""
        if refs and data:
            arg = f"({refs}; {data})"
        elif refs:
            arg = f"({refs})"
        elif data:
            arg = f"(; {data})"
        out.append(f"{i + 1}. {_fmt_sequent(app.conclusion)} BY {app.rule}{arg}")
    return "\n".join(out) + "\n"


def reparse_basic(text: str, sig: Signature) -> Derivation:
    """Parse an emitted basic script back to a derivation (for round-trips)."""
    lines = parse_script(text, sig)
    apps = []
    numbers = {}
    for i, line in enumerate(lines):
        if line.rule not in BASIC_RULES:
            raise ScriptError("reparse_basic expects only basic rules")
        premises = tuple(numbers[r] for r in line.refs)
        apps.append(RuleApp(line.rule, premises, tuple(line.data), line.sequent))
        numbers[line.number] = i
    return Derivation(tuple(apps))
