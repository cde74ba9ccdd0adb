from fractions import Fraction

import pytest

from errors import ConfigError, ParseError
from expr_parser import compile_expr, compile_scalar, parse_expr, to_source, variables
from scalars import ScalarPoly
from symbols import HSymbol


@pytest.mark.parametrize("source", [
    "E",
    "s",
    "(1 - s - hbar)*E",
    "(1 - s)*E",
    "t[1]*(1 - s)^2*E^2",
    "tbar[2]*E^-2",
    "-(1 - s)*l + (1 - s)",
    "(-s)^2",
    "3/4*s - 2",
])
def test_rendered_source_parses_back(source):
    node = parse_expr(source)
    assert parse_expr(to_source(node)) == node


def test_parse_tree_shape():
    assert parse_expr("1 - s - hbar") == ("-", ("-", ("rat", 1), ("var", "s")), ("var", "hbar"))
    assert parse_expr("-s^2") == ("neg", ("^", ("var", "s"), 2))
    assert parse_expr("xi") == ("var", "E")
    assert parse_expr("E^(-1)") == parse_expr("E^-1") == ("^", ("var", "E"), -1)
    assert parse_expr("2/6") == ("rat", Fraction(1, 3))


def test_variables_lists_atoms():
    assert variables(parse_expr("t[1]*s + E^2 - tbar[3]")) == {"t[1]", "s", "E", "tbar[3]"}


@pytest.mark.parametrize("source, position", [
    ("1 + * s", 4),
    ("s )", 2),
    ("1/0", 0),
    ("s^-1", 2),
    ("t[0]", 2),
    ("(1 - s", 6),
    ("", 0),
])
def test_errors_carry_positions(source, position):
    with pytest.raises(ParseError) as excinfo:
        parse_expr(source)
    assert excinfo.value.position == position
    if source:
        assert "^" in str(excinfo.value)


def test_parse_errors_are_config_errors():
    with pytest.raises(ConfigError):
        parse_expr("s $ 2")


def test_shift_before_s_picks_up_hbar(trunc):
    symbol = compile_expr("E*s", trunc)
    assert symbol.coefficient(0, 1) == ScalarPoly.s_variable(trunc.ring)
    assert symbol.coefficient(1, 1) == 1
    assert compile_expr("s*E", trunc).coefficient(1, 1) == 0


def test_compiled_string_data(trunc):
    fbar = compile_expr("(1 - s - hbar)*E", trunc)
    u = ScalarPoly.u_power(trunc.ring, 1)
    assert fbar.coefficient(0, 1) == u
    assert fbar.coefficient(1, 1) == -1
    assert compile_expr("E^-2", trunc) == HSymbol.xi(trunc, -2)
    assert compile_expr("t[2]*E", trunc).coefficient(0, 1) == ScalarPoly.t_variable(trunc.ring, 2)


def test_window_and_ring_limits(trunc):
    with pytest.raises(ConfigError):
        compile_expr("E^7", trunc)
    with pytest.raises(ConfigError):
        compile_expr("t[9]*E", trunc)
    with pytest.raises(ConfigError):
        compile_expr("tbar[1]", trunc)


def test_seed_rules(trunc):
    with pytest.raises(ConfigError):
        compile_expr("hbar*E", trunc, seed=True)
    with pytest.raises(ConfigError):
        compile_expr("l", trunc)
    ring = trunc.ring
    u = ScalarPoly.u_power(ring, 1)
    assert compile_scalar("-(1 - s)*l + (1 - s)", trunc) == -u * ScalarPoly.ell(ring) + u
    with pytest.raises(ConfigError):
        compile_scalar("s*E", trunc)
