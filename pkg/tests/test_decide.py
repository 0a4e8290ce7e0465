"""Exp-polynomial normal forms, max elimination and the ``eq`` procedure."""

from fractions import Fraction

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from volta_mini import corpus, pipeline
from volta_mini import symexpr as sx
from volta_mini.decide import (
    Budgets,
    Case,
    CaseBudgetExceeded,
    Equal,
    ExpPolySum,
    ExpPolyTerm,
    NotEqual,
    NotExpPolynomial,
    Poly,
    Unknown,
    eq,
    is_positive,
    is_zero,
    refute_random,
    side_conditions,
    split_max,
    to_exp_poly,
)
from volta_mini.decide.decide import interior_empty
from volta_mini.frontend import LaunchConfig
from volta_mini.ir import Addr
from volta_mini.numeric import Indeterminate, disjoint, eval_numeric

from strategies import as_fraction_point, exprs, points

x, y, z = sx.var("x"), sx.var("y"), sx.var("z")
X, Y = Poly.var("x"), Poly.var("y")
c = sx.const


def single(s: ExpPolySum):
    (t,) = s.terms
    return t


def softmax_vc(index: int = 0):
    cfg = LaunchConfig.load(corpus.path("n4.cfg"))
    _, a = pipeline.execute(corpus.path("softmax_online.mk").read_text(), cfg)
    _, b = pipeline.execute(corpus.path("softmax_naive.mk").read_text(), cfg)
    return a.shared[Addr("y", index)], b.shared[Addr("y", index)]


def separated(f, g, point) -> bool:
    try:
        return disjoint(eval_numeric(f, point, 128), eval_numeric(g, point, 128))
    except Indeterminate:
        return False


# ---------------------------------------------------------------------------
# to_exp_poly and is_zero
# ---------------------------------------------------------------------------


def test_exp_product_merges_exponents():
    s, side = to_exp_poly(sx.mul(sx.exp(x), sx.exp(y)))
    assert side == []
    t = single(s)
    assert t.coeff == Poly.const(1)
    assert t.exponent == X + Y
    assert t.exp_const == 0


def test_like_exponentials_collect_coefficients():
    e2x = sx.exp(sx.mul(c(2), x))
    e = sx.add(sx.mul(sx.add(x, c(1)), e2x), sx.mul(x, e2x))
    t = single(to_exp_poly(e)[0])
    assert t.coeff == X.scale(Fraction(2)) + Poly.const(1)
    assert t.exponent == X.scale(Fraction(2))


def test_exp_constant_split_from_exponent():
    t = single(to_exp_poly(sx.exp(sx.add(x, c(1))))[0])
    assert t.exponent == X
    assert t.exp_const == 1


def test_distinct_exp_constants_do_not_merge():
    # e^(x+1) and e*e^x are the same, e^(x+1) and e^x are not
    s, _ = to_exp_poly(sx.sub(sx.exp(sx.add(x, c(1))), sx.exp(x)))
    assert len(s) == 2
    assert not is_zero(s)


def test_division_reports_denominator():
    den = sx.add(c(1), sx.mul(y, y))
    s, side = to_exp_poly(sx.div(x, den))
    assert side == [den]
    assert s == ExpPolySum.poly(X)


def test_outside_the_class():
    with pytest.raises(NotExpPolynomial):
        to_exp_poly(sx.exp(sx.exp(x)))
    with pytest.raises(NotExpPolynomial):
        to_exp_poly(sx.maximum(x, y))
    with pytest.raises(NotExpPolynomial):
        to_exp_poly(sx.exp(sx.div(c(1), sx.add(c(1), sx.mul(x, x)))))


def test_is_zero_examples():
    assert is_zero([])
    assert is_zero([ExpPolyTerm(X - X, Y)])
    assert not is_zero([ExpPolyTerm(Poly.const(1), X), ExpPolyTerm(Poly.const(-1), Y)])


def test_exponent_must_not_carry_constant():
    with pytest.raises(ValueError):
        ExpPolyTerm(Poly.const(1), X + Poly.const(1))


@settings(max_examples=150, deadline=None)
@given(exprs(max_leaves=8, with_max=False, with_div=False), points)
def test_exp_poly_form_preserves_value(e, p):
    try:
        s, _ = to_exp_poly(e)
    except NotExpPolynomial:
        assume(False)
    pt = as_fraction_point(p)
    try:
        a, b = eval_numeric(e, pt, 128), eval_numeric(s.to_expr(), pt, 128)
    except Indeterminate:
        assume(False)
    assert not disjoint(a, b)


def _random_sum(draw):
    keys = draw(
        st.lists(
            st.tuples(
                st.sampled_from([Poly(), X, Y, X + Y, X.mul(X), X.scale(Fraction(-2))]),
                st.sampled_from([Fraction(0), Fraction(1), Fraction(-1, 2)]),
            ),
            min_size=1,
            max_size=4,
            unique=True,
        )
    )
    coeffs = st.sampled_from([Poly.const(1), Poly.const(-3), X, Y - Poly.const(2), X.mul(Y)])
    return [ExpPolyTerm(draw(coeffs), h, k) for h, k in keys]


@st.composite
def nonzero_sums(draw):
    return _random_sum(draw)


@settings(max_examples=100, deadline=None)
@given(nonzero_sums())
def test_nonzero_sum_is_not_zero_and_is_separated_somewhere(terms):
    s = ExpPolySum.from_terms(terms)
    assert not is_zero(s)
    # an independent check: some small rational point evaluates away from zero
    grid = [Fraction(a, 2) for a in range(-3, 4)]
    assert any(separated(s.to_expr(), sx.ZERO, {"x": u, "y": v}) for u in grid for v in grid)


@settings(max_examples=100, deadline=None)
@given(nonzero_sums(), st.permutations(range(4)))
def test_sum_minus_reordered_self_is_zero(terms, perm):
    order = [terms[i] for i in perm if i < len(terms)]
    s = ExpPolySum.from_terms(terms) - ExpPolySum.from_terms(order)
    assert is_zero(s)


# ---------------------------------------------------------------------------
# max elimination
# ---------------------------------------------------------------------------


def test_split_max_trivial():
    (case,) = split_max(sx.maximum(x, x))
    assert case.expr is x
    assert case.constraints == ()


def test_split_max_two_way():
    cases = split_max(sx.maximum(x, y))
    assert sorted(case.expr.value for case in cases) == ["x", "y"]
    for case in cases:
        ((w, l),) = case.constraints
        assert w is case.expr and l is not w


def test_split_max_prunes_cycles():
    # max(x, y) - max(y, x): the two orderings cannot both be strict
    e = sx.mul(sx.maximum(x, y), sx.maximum(y, x))
    assert len(split_max(e)) == 2


def test_split_max_prunes_constant_differences():
    # x + 1 always beats x
    (case,) = split_max(sx.maximum(x, sx.add(x, c(1))))
    assert case.expr is sx.canonicalize(sx.add(x, c(1)))


def test_softmax_case_count_is_bounded():
    f, g = softmax_vc()
    assert len(split_max(sx.sub(f, g))) <= 24


def test_case_budget():
    e = sx.add(*(sx.maximum(sx.var(f"a{i}"), sx.var(f"b{i}")) for i in range(6)))
    with pytest.raises(CaseBudgetExceeded):
        split_max(e, budget=10)


def test_interior_empty_detects_affine_contradiction():
    assert interior_empty(Case(((x, y), (y, sx.add(x, c(1)))), x))
    assert not interior_empty(Case(((x, y), (y, sx.sub(x, c(1)))), x))
    assert not interior_empty(Case(((x, y), (sx.mul(y, y), x)), x))  # non-affine rows are ignored


@settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(exprs(max_leaves=8, with_exp=False, with_div=False), points)
def test_split_max_cases_agree_where_they_apply(e, p):
    pt = as_fraction_point(p)
    try:
        cases = split_max(e, budget=200)
        whole = eval_numeric(e, pt, 128)
    except (CaseBudgetExceeded, Indeterminate):
        assume(False)
    strict = 0
    for case in cases:
        holds = True
        for w, l in case.constraints:
            a, b = eval_numeric(w, pt, 128), eval_numeric(l, pt, 128)
            if not a.a > b.b:
                holds = False
                break
        if holds:
            strict += 1
            assert not disjoint(eval_numeric(case.expr, pt, 128), whole)
    assert strict <= 1


@settings(max_examples=120, deadline=None)
@given(exprs(max_leaves=8, with_exp=False, with_div=False), points)
def test_split_max_covers_every_point(e, p):
    pt = as_fraction_point(p)
    try:
        cases = split_max(e, budget=200)
    except CaseBudgetExceeded:
        assume(False)
    covering = 0
    for case in cases:
        if all(not eval_numeric(w, pt, 128).b < eval_numeric(l, pt, 128).a for w, l in case.constraints):
            covering += 1
    assert covering >= 1


# ---------------------------------------------------------------------------
# eq
# ---------------------------------------------------------------------------


def test_eq_reflexive():
    v = eq(x, x)
    assert isinstance(v, Equal) and v.method == "canonical"


def test_eq_softmax_vc():
    f, g = softmax_vc()
    v = eq(f, g)
    assert isinstance(v, Equal)
    assert v.method == "exp-poly"
    assert all(s.discharged for s in v.side_conditions)


def test_eq_exp_constant_witness_at_origin():
    v = eq(sx.exp(sx.add(x, y)), sx.add(sx.exp(x), sx.exp(y)))
    assert isinstance(v, NotEqual)
    assert v.witness.point == {"x": 0, "y": 0}
    assert separated(sx.exp(sx.add(x, y)), sx.add(sx.exp(x), sx.exp(y)), v.witness.point)


def test_refute_random_separates_product_from_sum():
    w = refute_random(sx.mul(x, y), sx.add(x, y))
    assert w is not None
    assert separated(sx.mul(x, y), sx.add(x, y), w.point)
    assert w.precision in (64, 128, 256)


def test_refute_random_is_deterministic():
    f, g = sx.mul(x, x, y), sx.add(x, y, c(5))
    assert refute_random(f, g, seed=7) == refute_random(f, g, seed=7)


def test_eq_neg_inf():
    assert isinstance(eq(sx.NEG_INF, sx.NEG_INF), Equal)
    assert not isinstance(eq(sx.NEG_INF, x), Equal)


def test_eq_max_identity_needs_case_split():
    # max(x, y) + min-like term: max(x,y) - x = max(0, y - x)
    f = sx.sub(sx.maximum(x, y), x)
    g = sx.maximum(c(0), sx.sub(y, x))
    v = eq(f, g)
    assert isinstance(v, Equal)
    assert v.method == "exp-poly"


def test_eq_max_rescaling_identity():
    # the online-softmax rescale step: e^(a-m)*e^(m-m') = e^(a-m') for m' = max(m, b)
    m2 = sx.maximum(x, y)
    f = sx.mul(sx.exp(sx.sub(z, x)), sx.exp(sx.sub(x, m2)))
    g = sx.exp(sx.sub(z, m2))
    assert isinstance(eq(f, g), Equal)


def test_side_conditions_are_reported():
    den = sx.add(c(1), sx.mul(y, y))
    v = eq(sx.mul(sx.div(x, den), den), x)
    assert isinstance(v, Equal)
    assert [s.expr for s in v.side_conditions] == [sx.canonicalize(den)]
    assert v.side_conditions[0].discharged


def test_undischarged_side_condition():
    v = eq(sx.div(sx.mul(x, y), y), x)
    assert isinstance(v, Equal)
    assert [(sx.to_str(s.expr), s.discharged) for s in v.side_conditions] == [("y", False)]


def test_is_positive():
    assert is_positive(sx.add(c(1), sx.exp(x)))
    assert is_positive(sx.maximum(x, sx.exp(y)))
    assert not is_positive(sx.add(c(1), x))
    assert not is_positive(sx.mul(x, x))  # zero at the origin
    assert is_positive(sx.add(c(1), sx.mul(x, x, y, y)))
    assert not is_positive(sx.add(c(1), sx.mul(x, x, y)))
    assert [s.discharged for s in side_conditions(sx.div(c(1), sx.exp(x)))] == [True]


def test_node_budget_gives_unknown():
    # distributing this product has 2^6 terms
    f = sx.mul(*(sx.add(sx.var(f"nb_p{i}"), sx.var(f"nb_q{i}")) for i in range(6)))
    v = eq(f, sx.add(f, c(0)), budgets=Budgets(nodes=10))
    assert isinstance(v, Unknown)
    assert "canonicalize" in v.reason


def test_case_budget_gives_unknown():
    f, g = softmax_vc()
    v = eq(f, g, budgets=Budgets(cases=1))
    assert isinstance(v, Unknown)
    assert "max cases" in v.reason


def test_monomial_budget_gives_unknown():
    a, b = sx.add(c(1), sx.mul(x, x)), sx.add(c(2), sx.mul(y, y), x)
    f = sx.add(sx.div(c(1), a), sx.div(c(1), b))
    g = sx.div(sx.add(a, b), sx.mul(a, b))
    assert isinstance(eq(f, g), Equal)
    v = eq(f, g, budgets=Budgets(monomials=3))
    assert isinstance(v, Unknown)
    assert "PolyBudgetExceeded" in v.reason


def test_budgets_parse():
    assert Budgets.parse("cases=5, nodes=9") == Budgets(cases=5, nodes=9)
    assert Budgets.from_env({}) == Budgets()
    assert Budgets.from_env({"VOLTA_MINI_BUDGET": "monomials=7"}).monomials == 7
    for bad in ("cases", "foo=1", "cases=x", "cases=0"):
        with pytest.raises(ValueError):
            Budgets.parse(bad)


@settings(max_examples=150, deadline=None)
@given(exprs(max_leaves=8), exprs(max_leaves=8))
def test_not_equal_witness_separates(f, g):
    v = eq(f, g, refute_trials=8)
    if isinstance(v, NotEqual):
        assert separated(f, g, v.witness.point) or disjoint(
            eval_numeric(f, v.witness.point, v.witness.precision),
            eval_numeric(g, v.witness.point, v.witness.precision),
        )


@settings(max_examples=150, deadline=None)
@given(exprs(max_leaves=8), st.lists(points, min_size=3, max_size=3))
def test_equal_is_sound_on_rewritten_terms(f, pts):
    # g is built to equal f: expand, reorder and re-exponentiate pieces
    g = sx.sub(sx.add(sx.mul(f, c(3)), sx.exp(x)), sx.add(sx.mul(c(2), f), sx.exp(x)))
    v = eq(f, g)
    assert not isinstance(v, NotEqual)
    if isinstance(v, Equal):
        for p in pts:
            assert not separated(f, g, as_fraction_point(p))


@settings(max_examples=100, deadline=None)
@given(exprs(max_leaves=6), exprs(max_leaves=6), st.lists(points, min_size=4, max_size=4))
def test_equal_verdicts_hold_at_random_points(f, g, pts):
    v = eq(f, g, refute_trials=8)
    if isinstance(v, Equal):
        for p in pts:
            assert not separated(f, g, as_fraction_point(p))


@pytest.mark.parametrize(
    "ctx",
    [
        lambda e: sx.maximum(e, z),
        lambda e: sx.mul(e, z),
        lambda e: sx.div(e, sx.add(c(1), sx.mul(z, z))),
        lambda e: sx.exp(sx.mul(e, c(0))),
        lambda e: sx.add(e, sx.exp(z)),
    ],
)
def test_congruence(ctx):
    f = sx.mul(sx.exp(x), sx.exp(y))
    g = sx.exp(sx.add(y, x))
    assert isinstance(eq(f, g), Equal)
    assert isinstance(eq(ctx(f), ctx(g)), Equal)
