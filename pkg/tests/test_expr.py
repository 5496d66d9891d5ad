import math

import pytest

from hamiltonize import ExprDomainError, ExprParseError, diff_expr, parse_expr
from hamiltonize.expr import Neg, Tan, Var


def fd_slope(e, r1, h=1e-6):
    return (e.eval(r1 + h) - e.eval(r1 - h)) / (2 * h)


def test_parse_variable_identity():
    assert isinstance(parse_expr("r1"), Var)
    assert parse_expr("r1").eval(0.7) == 0.7


def test_parse_negated_tangent_structure():
    e = parse_expr("-tan(r1)")
    assert isinstance(e, Neg)
    assert isinstance(e.arg, Tan)
    assert e.eval(0.3) == pytest.approx(-math.tan(0.3), rel=1e-15)


def test_parse_polynomial_plus_sine_at_zero():
    assert parse_expr("3*r1^2 + sin(r1)").eval(0.0) == 0.0


def test_power_binds_tighter_than_unary_minus():
    assert parse_expr("-r1^2").eval(3.0) == -9.0


def test_whitespace_insensitive():
    a = parse_expr(" 2 * cos( r1 ) + 1 ")
    b = parse_expr("2*cos(r1)+1")
    assert a.eval(0.4) == b.eval(0.4)


@pytest.mark.parametrize(
    "text", ["", "  ", "r1 +", "(r1", "r1^r1", "2 ** 3", "r1 r1"]
)
def test_syntax_errors_carry_position(text):
    with pytest.raises(ExprParseError) as err:
        parse_expr(text)
    assert err.value.position >= 0


def test_unknown_identifier_rejected():
    with pytest.raises(ExprParseError, match="unknown identifier"):
        parse_expr("sin(q)")
    with pytest.raises(ExprParseError, match="unknown identifier"):
        parse_expr("r2")


def test_diff_of_constant_and_variable():
    assert str(diff_expr(parse_expr("4.5"))) == "0.0"
    assert diff_expr(parse_expr("r1")).eval(123.0) == 1.0


def test_diff_negated_tangent_at_zero():
    assert diff_expr(parse_expr("-tan(r1)")).eval(0.0) == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize(
    "text,lo,hi",
    [
        ("-tan(r1)", -1.3, 1.3),
        ("r1", -2.0, 2.0),
        ("-cos(r1)", -3.0, 3.0),
        ("-sin(r1)", -3.0, 3.0),
        ("exp(2*r1) / (1 + r1^2)", -1.0, 1.0),
        ("sqrt(1 + r1^2) * sin(r1)", -2.0, 2.0),
        ("ln(2 + cos(r1))", -3.0, 3.0),
    ],
)
def test_structural_derivative_matches_finite_differences(text, lo, hi, rng):
    e = parse_expr(text)
    d = diff_expr(e)
    for r1 in rng.uniform(lo, hi, size=100):
        expected = fd_slope(e, r1)
        assert d.eval(r1) == pytest.approx(expected, rel=1e-6, abs=1e-9)


def test_second_and_third_derivatives_are_structural():
    e = parse_expr("-tan(r1)")
    d3 = diff_expr(diff_expr(diff_expr(e)))
    # d^3/dx^3 of -tan = -(6 tan^2 sec^2 + 2 sec^4) ... check against FD of d2
    d2 = diff_expr(diff_expr(e))
    assert d3.eval(0.4) == pytest.approx(fd_slope(d2, 0.4), rel=1e-6)


@pytest.mark.parametrize(
    "text,point",
    [
        ("ln(r1)", -1.0),
        ("ln(r1)", 0.0),
        ("sqrt(r1)", -0.5),
        ("1/r1", 0.0),
        ("exp(r1)", 1e6),  # overflow reported, not inf
        ("r1^-1", 0.0),
    ],
)
def test_domain_errors_instead_of_nonfinite(text, point):
    with pytest.raises(ExprDomainError):
        parse_expr(text).eval(point)


def test_compiled_matches_interpreted(rng):
    texts = ["-tan(r1)", "exp(r1)*sin(r1) - r1^3/(2+cos(r1))", "sqrt(4+r1^2)"]
    for text in texts:
        e = parse_expr(text)
        fn = e.compile()
        for r1 in rng.uniform(-1.2, 1.2, size=50):
            assert fn(r1) == e.eval(r1)


def test_compiled_preserves_domain_errors():
    fn = parse_expr("ln(r1)").compile()
    with pytest.raises(ExprDomainError):
        fn(-2.0)


def test_overflowing_constant_fold_defers_to_evaluation():
    e = parse_expr("93^484")  # folding must not raise at parse time
    with pytest.raises(ExprDomainError):
        e.eval(0.0)


def test_operator_building_and_constant_folding():
    x = Var()
    e = (x * 0 + 1 * x + 0) / 1
    assert isinstance(e, Var)
    assert (x**0).eval(5.0) == 1.0


def test_is_constant_detection():
    assert parse_expr("3.5").is_constant()
    assert parse_expr("2*3 + 1").is_constant()
    assert not parse_expr("r1*0.001").is_constant()
