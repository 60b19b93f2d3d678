import pytest
from hypothesis import given, settings, strategies as st

from syncat.formulas import (
    BV,
    Eq,
    Exists,
    FV,
    FormulaError,
    Not,
    Or,
    Pred,
    Signature,
    alpha_eq,
    and_,
    big_and,
    close,
    conjuncts,
    e_of,
    emptiness,
    exists_many,
    forall,
    free_vars,
    imp,
    nonempty,
    open_exists,
    open_many,
    parse_formula,
    parse_signature,
    render,
    slot_instantiate,
    subst,
    subst_simul,
    validity,
)

SIG = Signature.of(P=1, Q=2)


def p(text):
    return parse_formula(text, SIG)


# ---------------------------------------------------------------------------
# Independent named-syntax oracle.  Formulas as tuples with *named* binders:
# ("pred", name, v...), ("eq", a, b), ("not", f), ("or", a, b), ("ex", v, f).


def named_free(t):
    tag = t[0]
    if tag == "pred":
        return set(t[2:])
    if tag == "eq":
        return {t[1], t[2]}
    if tag == "not":
        return named_free(t[1])
    if tag == "or":
        return named_free(t[1]) | named_free(t[2])
    if tag == "ex":
        return named_free(t[2]) - {t[1]}
    raise AssertionError(t)


def named_alpha(a, b, counter=None):
    if counter is None:
        counter = [10_000]
    if a[0] != b[0]:
        return False
    tag = a[0]
    if tag in ("pred", "eq"):
        return a == b
    if tag == "not":
        return named_alpha(a[1], b[1], counter)
    if tag == "or":
        return named_alpha(a[1], b[1], counter) and named_alpha(a[2], b[2], counter)
    if tag == "ex":
        counter[0] += 1
        fresh = counter[0]
        return named_alpha(
            named_rename(a[2], fresh, a[1]), named_rename(b[2], fresh, b[1]), counter
        )
    raise AssertionError(a)


def named_rename(t, new, old):
    # raw renaming of *free* occurrences, used only with globally fresh `new`
    tag = t[0]
    if tag == "pred":
        return (t[0], t[1], *[new if v == old else v for v in t[2:]])
    if tag == "eq":
        return ("eq", new if t[1] == old else t[1], new if t[2] == old else t[2])
    if tag == "not":
        return ("not", named_rename(t[1], new, old))
    if tag == "or":
        return ("or", named_rename(t[1], new, old), named_rename(t[2], new, old))
    if tag == "ex":
        if t[1] == old:
            return t
        return ("ex", t[1], named_rename(t[2], new, old))
    raise AssertionError(t)


def named_subst(t, new, old, counter):
    # textbook capture-avoiding substitution on the named representation
    tag = t[0]
    if tag in ("pred", "eq"):
        return named_rename(t, new, old)
    if tag == "not":
        return ("not", named_subst(t[1], new, old, counter))
    if tag == "or":
        return ("or", named_subst(t[1], new, old, counter), named_subst(t[2], new, old, counter))
    if tag == "ex":
        v, body = t[1], t[2]
        if v == old or old not in named_free(body):
            return t
        if v == new:
            counter[0] += 1
            fresh = counter[0]
            body = named_rename(body, fresh, v)
            v = fresh
        return ("ex", v, named_subst(body, new, old, counter))
    raise AssertionError(t)


def canon(t, env=None, depth=0):
    """Convert the named oracle representation to the package representation."""
    if env is None:
        env = {}
    tag = t[0]
    at = lambda v: BV(depth - 1 - env[v]) if v in env else FV(v)
    if tag == "pred":
        return Pred(t[1], tuple(at(v) for v in t[2:]))
    if tag == "eq":
        return Eq(at(t[1]), at(t[2]))
    if tag == "not":
        return Not(canon(t[1], env, depth))
    if tag == "or":
        return Or(canon(t[1], env, depth), canon(t[2], env, depth))
    if tag == "ex":
        inner = dict(env)
        inner[t[1]] = depth
        return Exists(canon(t[2], inner, depth + 1))
    raise AssertionError(t)


# hypothesis strategy over the named representation
VARS = st.integers(min_value=-3, max_value=5)


def named_formulas(max_depth=4):
    atoms = st.one_of(
        st.tuples(st.just("eq"), VARS, VARS),
        st.builds(lambda v: ("pred", "P", v), VARS),
        st.builds(lambda a, b: ("pred", "Q", a, b), VARS, VARS),
    )

    def extend(children):
        return st.one_of(
            st.builds(lambda f: ("not", f), children),
            st.builds(lambda a, b: ("or", a, b), children, children),
            st.builds(lambda v, f: ("ex", v, f), VARS, children),
        )

    return st.recursive(atoms, extend, max_leaves=max_depth * 3)


# ---------------------------------------------------------------------------
# Parsing and rendering


def test_parse_emptiness_sentence():
    assert p("(not (exists x0 (= x0 x0)))") == emptiness()


def test_parse_eq():
    assert p("(= x1 x1)") == Eq(FV(1), FV(1))


def test_alphabetic_variants_parse_equal():
    assert p("(exists x0 (= x1 x0))") == p("(exists x7 (= x1 x7))")


def test_parse_errors():
    with pytest.raises(FormulaError):
        p("(pred R x1)")
    with pytest.raises(FormulaError):
        p("(pred P x1 x2)")
    with pytest.raises(FormulaError):
        p("(= x1")
    with pytest.raises(FormulaError):
        p("(or (= x1 x1))(= x1 x1)")


def test_negative_index_parse():
    assert p("(= x-3 x1)") == Eq(FV(-3), FV(1))


def test_shadowing_innermost_wins():
    f = p("(exists x0 (exists x0 (= x0 x1)))")
    assert f == Exists(Exists(Eq(BV(0), FV(1))))


@settings(max_examples=300, deadline=None)
@given(named_formulas())
def test_render_parse_roundtrip(t):
    f = canon(t)
    assert parse_formula(render(f), SIG) == f


def test_render_picks_smallest_free_name():
    f = close(Eq(FV(0), FV(9)), 9)
    # body has x0 free, so the binder must not use x0
    assert render(f) == "(exists x1 (= x0 x1))"


def test_signature_file():
    sig = parse_signature("# comment\npred P 1\npred Q 2\n")
    assert sig == SIG
    with pytest.raises(FormulaError):
        parse_signature("pred P 1\npred P 2")


# ---------------------------------------------------------------------------
# Free variables and alpha-equivalence


def test_free_vars_examples():
    assert free_vars(emptiness()) == frozenset()
    assert free_vars(p("(exists x2 (= x1 x2))")) == {1}
    assert free_vars(p("(or (pred Q x1 x2) (not (= x2 x3)))")) == {1, 2, 3}


@settings(max_examples=300, deadline=None)
@given(named_formulas())
def test_free_vars_against_named_oracle(t):
    assert free_vars(canon(t)) == named_free(t)


def test_alpha_examples_from_swaps():
    a = p("(exists x1 (exists x2 (= x1 x2)))")
    b = p("(exists x2 (exists x1 (= x2 x1)))")
    c = p("(exists x2 (exists x1 (= x1 x2)))")
    assert alpha_eq(a, b)
    assert not alpha_eq(a, c)
    assert alpha_eq(a, a)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), named_formulas())
def test_alpha_matches_named_oracle(t1, t2):
    assert alpha_eq(canon(t1), canon(t2)) == named_alpha(t1, t2)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), st.integers(0, 3), st.integers(0, 3))
def test_alpha_is_congruence_for_exists(t, u, v):
    # closing over alpha-equal bodies with different names gives equal values
    f = canon(t)
    g = subst(f, 90 + u, u) if u in free_vars(f) else f
    assert alpha_eq(close(f, u), close(subst(f, 99, u), 99))
    del g


# ---------------------------------------------------------------------------
# Substitution


def test_subst_identity():
    f = p("(exists x0 (or (pred P x1) (= x1 x0)))")
    assert subst(f, 1, 1) == f


def test_subst_simple():
    assert subst(p("(= x1 x2)"), 3, 1) == p("(= x3 x2)")


def test_subst_capture_avoided():
    f = p("(exists x0 (= x1 x0))")
    g = subst(f, 0, 1)
    assert alpha_eq(g, p("(exists x9 (= x0 x9))"))
    assert not alpha_eq(g, p("(exists x0 (= x0 x0))"))


@settings(max_examples=300, deadline=None)
@given(named_formulas(), VARS, VARS)
def test_subst_against_named_oracle(t, new, old):
    counter = [50_000]
    assert subst(canon(t), new, old) == canon(named_subst(t, new, old, counter))


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS, VARS)
def test_subst_property_two(t, y, x):
    # phi[N/X][Y/N] = phi[Y/X] for N not occurring in phi
    f = canon(t)
    n = max((abs(v) for v in free_vars(f) | {x, y}), default=0) + 7
    assert subst(subst(f, n, x), y, n) == subst(f, y, x)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS, VARS, VARS, VARS)
def test_subst_property_three_commute(t, x, y, z, w):
    f = canon(t)
    if len({x, y, z}) < 3 or len({x, y, w}) < 3:
        return
    assert subst(subst(f, z, x), w, y) == subst(subst(f, w, y), z, x)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS, VARS, VARS)
def test_setup_property_one(t, bound, y, x):
    # (exists T phi)[Y/X] alpha-eq exists T (phi[Y/X]) when T differs from X, Y
    if bound in (x, y):
        return
    f = canon(t)
    assert subst(close(f, bound), y, x) == close(subst(f, y, x), bound)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS)
def test_setup_property_two(t, x):
    # exists X phi alpha-eq exists N (phi[N/X]) for fresh N
    f = canon(t)
    n = max((abs(v) for v in free_vars(f) | {x}), default=0) + 3
    assert close(f, x) == close(subst(f, n, x), n)


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS, VARS)
def test_free_vars_of_subst(t, y, x):
    f = canon(t)
    fv = free_vars(f)
    expected = (fv - {x}) | ({y} if x in fv else set())
    assert free_vars(subst(f, y, x)) == frozenset(expected)


# ---------------------------------------------------------------------------
# Simultaneous substitution


def subst_simul_oracle(f, tops, bottoms, offset):
    """The paper definition: route through fresh distinct intermediates."""
    used = {abs(v) for v in free_vars(f)} | {abs(v) for v in tops} | {abs(v) for v in bottoms}
    base = max(used, default=0) + 1 + offset
    fresh = [base + i for i in range(len(bottoms))]
    out = f
    for n, x in zip(fresh, bottoms):
        out = subst(out, n, x)
    for y, n in zip(tops, fresh):
        out = subst(out, y, n)
    return out


def test_subst_simul_swap():
    f = p("(= x1 x2)")
    assert subst_simul(f, [2, 1], [1, 2]) == p("(= x2 x1)")
    # iterated single substitution would collapse the pair
    assert subst(subst(f, 2, 1), 1, 2) == p("(= x1 x1)")


def test_subst_simul_identity():
    f = p("(or (pred P x1) (exists x0 (= x2 x0)))")
    assert subst_simul(f, [1, 2], [1, 2]) == f


def test_subst_simul_validations():
    f = p("(= x1 x2)")
    with pytest.raises(FormulaError):
        subst_simul(f, [1], [1, 2])
    with pytest.raises(FormulaError):
        subst_simul(f, [3, 4], [1, 1])


@settings(max_examples=300, deadline=None)
@given(
    named_formulas(),
    st.lists(VARS, min_size=1, max_size=4),
    st.permutations([0, 1, 2, 3]),
    st.integers(0, 5),
)
def test_subst_simul_matches_fresh_oracle(t, tops, perm, offset):
    f = canon(t)
    bottoms = [v - 2 for v in perm[: len(tops)]]
    tops = tops[: len(bottoms)]
    got = subst_simul(f, tops, bottoms)
    assert got == subst_simul_oracle(f, tops, bottoms, 0)
    # independence of the fresh-variable choice
    assert got == subst_simul_oracle(f, tops, bottoms, offset)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_simsub_property_one(data):
    # phi[T_i/X_i][Y_i/T_i] = phi[Y_i/X_i] when T distinct and free(phi) in X_i
    t = data.draw(named_formulas())
    f = canon(t)
    xs = sorted(free_vars(f))
    if not xs:
        return
    ts = data.draw(st.permutations(list(range(20, 20 + len(xs)))))
    ys = data.draw(st.lists(VARS, min_size=len(xs), max_size=len(xs)))
    lhs = subst_simul(subst_simul(f, list(ts), xs), ys, list(ts))
    assert lhs == subst_simul(f, ys, xs)


# ---------------------------------------------------------------------------
# Derived notations


def test_and_expansion():
    a, b = p("(pred P x1)"), p("(= x1 x2)")
    assert and_(a, b) == Not(Or(Not(a), Not(b)))
    assert p("(and (pred P x1) (= x1 x2))") == and_(a, b)


def test_forall_expansion():
    f = forall(0, Eq(FV(0), FV(0)))
    assert f == p("(not (exists x0 (not (= x0 x0))))")
    assert p("(forall x0 (= x0 x0))") == f
    assert validity() == f


def test_e_of_increasing_order():
    assert e_of({2, 1}) == and_(Eq(FV(1), FV(1)), Eq(FV(2), FV(2)))


def test_big_and_and_conjuncts_roundtrip():
    parts = [p("(pred P x1)"), p("(= x1 x2)"), p("(pred Q x1 x2)")]
    assert conjuncts(big_and(parts)) == parts
    with pytest.raises(FormulaError):
        big_and([])


def test_imp_iff():
    a, b = p("(pred P x1)"), p("(= x1 x1)")
    assert imp(a, b) == Or(Not(a), b)
    assert p("(imp (pred P x1) (= x1 x1))") == imp(a, b)
    assert p("(iff (pred P x1) (= x1 x1))") == and_(imp(a, b), imp(b, a))


def test_nonempty_is_not_e():
    assert nonempty() == Not(emptiness())


# ---------------------------------------------------------------------------
# Slot instantiation


def test_slot_instantiate_identity_shape():
    payload = p("(= x-1 x1)")
    assert slot_instantiate(payload, ([7], [-1]), ([9], [1])) == p("(= x7 x9)")


def test_slot_instantiate_negated_variables():
    theta = p("(pred Q x-1 x1)")
    swapped = slot_instantiate(theta, ([1], [-1]), ([-1], [1]))
    assert swapped == p("(pred Q x1 x-1)")
    # theta~(A, B) == theta(B, A)
    a, b = 5, 6
    assert slot_instantiate(swapped, ([a], [-1]), ([b], [1])) == slot_instantiate(
        theta, ([b], [-1]), ([a], [1])
    )


def test_slot_instantiate_noninjective_tops():
    f = p("(pred Q x-1 x-2)")
    got = slot_instantiate(f, ([3, 3], [-1, -2]))
    assert got == p("(pred Q x3 x3)")
    assert got == subst_simul_oracle(f, [3, 3], [-1, -2], 0)


# ---------------------------------------------------------------------------
# Exists helpers


def test_open_close_inverse():
    f = p("(or (= x1 x2) (pred P x1))")
    assert open_exists(close(f, 1), 1) == f
    nest = exists_many([1, 2], f)
    assert open_many(nest, [1, 2]) == f
    assert open_many(nest, [8, 9]) == subst_simul(f, [8, 9], [1, 2])


@settings(max_examples=200, deadline=None)
@given(named_formulas(), VARS)
def test_close_then_open_fresh(t, x):
    f = canon(t)
    n = max((abs(v) for v in free_vars(f) | {x}), default=0) + 4
    assert open_exists(close(f, x), n) == subst(f, n, x)
