import pytest

from syncat.formulas import (
    Eq,
    FV,
    Not,
    Or,
    Signature,
    close,
    nonempty,
    parse_formula,
    subst,
)
from syncat.kernel import (
    CheckFailure,
    Derivation,
    KernelError,
    RuleApp,
    Sequent,
    apply_rule,
    check_derivation,
)

SIG = Signature.of(P=1, Q=2)


def p(text):
    return parse_formula(text, SIG)


def seq(hyps, rhs):
    return Sequent.of([p(h) for h in hyps], p(rhs))


def test_assm_accepts_member():
    app = RuleApp("ASSM", (), (), seq(["(pred P x1)"], "(pred P x1)"))
    assert apply_rule(app, []) == app.conclusion


def test_assm_rejects_nonmember():
    app = RuleApp("ASSM", (), (), seq(["(pred P x1)"], "(pred P x2)"))
    with pytest.raises(KernelError):
        apply_rule(app, [])


def test_id_any_variable():
    for v in (-2, 0, 5):
        app = RuleApp("ID", (), (), Sequent.of([], Eq(FV(v), FV(v))))
        apply_rule(app, [])
    bad = RuleApp("ID", (), (), Sequent.of([], Eq(FV(1), FV(2))))
    with pytest.raises(KernelError):
        apply_rule(bad, [])
    nonempty_lhs = RuleApp("ID", (), (), seq(["(pred P x1)"], "(= x1 x1)"))
    with pytest.raises(KernelError):
        apply_rule(nonempty_lhs, [])


def test_ant_superset_only():
    prem = seq(["(pred P x1)"], "(= x1 x1)")
    good = RuleApp("ANT", (0,), (), seq(["(pred P x1)", "(pred P x2)"], "(= x1 x1)"))
    apply_rule(good, [prem])
    bad = RuleApp("ANT", (0,), (), seq(["(pred P x2)"], "(= x1 x1)"))
    with pytest.raises(KernelError):
        apply_rule(bad, [prem])


def test_pc_shape():
    pivot = p("(pred P x1)")
    concl = seq([], "(= x1 x1)")
    prem_a = Sequent(concl.lhs | {pivot}, concl.rhs)
    prem_b = Sequent(concl.lhs | {Not(pivot)}, concl.rhs)
    apply_rule(RuleApp("PC", (0, 1), (pivot,), concl), [prem_a, prem_b])
    with pytest.raises(KernelError):
        apply_rule(RuleApp("PC", (0, 1), (pivot,), concl), [prem_b, prem_a])


def test_exa_side_condition_fresh_witness():
    # exists A with the witness free in the conclusion is rejected
    pivot = close(p("(pred Q x1 x2)"), 2)
    prem = Sequent.of([p("(pred Q x1 x3)")], p("(= x1 x1)"))
    concl = Sequent.of([pivot], p("(= x1 x1)"))
    apply_rule(RuleApp("EXA", (0,), (pivot, 3), concl), [prem])
    bad_concl = Sequent.of([pivot], p("(= x3 x3)"))
    bad_prem = Sequent.of([p("(pred Q x1 x3)")], p("(= x3 x3)"))
    with pytest.raises(KernelError, match="occurs free in the conclusion"):
        apply_rule(RuleApp("EXA", (0,), (pivot, 3), bad_concl), [bad_prem])


def test_exs_adds_not_e():
    target = close(p("(pred P x1)"), 1)
    prem = Sequent.of([p("(pred Q x1 x2)")], p("(pred P x5)"))
    concl = Sequent(prem.lhs | {nonempty()}, target)
    apply_rule(RuleApp("EXS", (0,), (target, 5), concl), [prem])
    # without the not-E hypothesis the instance is rejected
    with pytest.raises(KernelError):
        apply_rule(RuleApp("EXS", (0,), (target, 5), Sequent(prem.lhs, target)), [prem])


def test_subs_shapes():
    phi = p("(pred Q x9 x2)")  # template over slot x9
    prem = Sequent.of([], subst(phi, 1, 9))
    concl = Sequent.of([Eq(FV(1), FV(3))], subst(phi, 3, 9))
    apply_rule(RuleApp("SUBS", (0,), (phi, 9, 1, 3), concl), [prem])
    flipped = Sequent.of([Eq(FV(3), FV(1))], subst(phi, 3, 9))
    with pytest.raises(KernelError):
        apply_rule(RuleApp("SUBS", (0,), (phi, 9, 1, 3), flipped), [prem])


def test_forward_reference_rejected():
    line = RuleApp("ANT", (1,), (), seq(["(pred P x1)"], "(= x1 x1)"))
    with pytest.raises(CheckFailure, match="strictly earlier"):
        check_derivation(Derivation((line,)))


def test_check_derivation_reports_line():
    ok = RuleApp("ID", (), (), Sequent.of([], Eq(FV(1), FV(1))))
    bad = RuleApp("ASSM", (), (), seq([], "(pred P x1)"))
    with pytest.raises(CheckFailure) as e:
        check_derivation(Derivation((ok, bad)))
    assert e.value.line == 1


def test_determinism_same_verdict():
    ok = RuleApp("ID", (), (), Sequent.of([], Eq(FV(1), FV(1))))
    d = Derivation((ok,))
    assert check_derivation(d) == check_derivation(d) == ok.conclusion
