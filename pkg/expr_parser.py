"""
Parser for RH data expressions such as ``(1 - s - hbar)*E``.

Grammar (whitespace insensitive):

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := '-' factor | atom ('^' int)?
    atom   := rational | 's' | 'hbar' | 'E' | 'xi' | 'l'
              | 't[' int ']' | 'tbar[' int ']' | '(' expr ')'

ASTs are plain tuples: ('rat', Fraction), ('var', name), ('t', n),
('tbar', n), ('neg', a), ('^', base, k) and (op, lhs, rhs) for + - *.
Negative exponents are only allowed on E. The atom ``l`` stands for
log(1-s) and is only accepted when compiling seeds.
"""

import logging
import re
from fractions import Fraction

from errors import ConfigError, ParseError
from scalars import ScalarPoly, format_rational
from symbols import HSymbol, circ_product, power

ATOMS = ("rat", "var", "t", "tbar")


def parse_re(source, pos, pattern):
    """Match ``pattern`` at ``pos`` after skipping blanks; returns (match, new_pos) or (None, pos)."""
    m = re.compile(r"\s*(" + pattern + r")").match(source, pos)
    if not m:
        return None, pos
    return m, m.end()


def expect(source, pos, pattern, what):
    m, new_pos = parse_re(source, pos, pattern)
    if m is None:
        raise ParseError(f"Expected {what}", source, _skip_blanks(source, pos))
    return m, new_pos


def _skip_blanks(source, pos):
    while pos < len(source) and source[pos].isspace():
        pos += 1
    return pos


def parse_rational(source, pos):
    m, pos = parse_re(source, pos, r"[0-9]+(?:/[0-9]+)?")
    if m is None:
        return None, pos
    text = m.group(1)
    if re.search(r"/0+$", text):
        raise ParseError("Zero denominator", source, m.start(1))
    return ("rat", Fraction(text)), pos


def parse_indexed(source, pos):
    m, pos = parse_re(source, pos, r"(?:tbar|t)\s*\[")
    if m is None:
        return None, pos
    name = "tbar" if m.group(1).startswith("tbar") else "t"
    index, pos = expect(source, pos, r"[0-9]+", "a time index")
    _, pos = expect(source, pos, r"\]", "']'")
    n = int(index.group(1))
    if n < 1:
        raise ParseError("Time indices start at 1", source, index.start(1))
    return (name, n), pos


def parse_variable(source, pos):
    m, pos = parse_re(source, pos, r"(?:hbar|xi|s|E|l)(?![A-Za-z0-9_\[])")
    if m is None:
        return None, pos
    name = m.group(1)
    return ("var", "E" if name == "xi" else name), pos


def parse_brace(source, pos):
    m, pos = parse_re(source, pos, r"\(")
    if m is None:
        return None, pos
    node, pos = parse_expression(source, pos)
    _, pos = expect(source, pos, r"\)", "')'")
    return node, pos


def parse_atom(source, pos):
    for parser in (parse_rational, parse_indexed, parse_variable, parse_brace):
        node, new_pos = parser(source, pos)
        if node is not None:
            return node, new_pos
    raise ParseError("Expected a number, variable or '('", source, _skip_blanks(source, pos))


def parse_factor(source, pos):
    m, new_pos = parse_re(source, pos, r"-")
    if m is not None:
        operand, new_pos = parse_factor(source, new_pos)
        return ("neg", operand), new_pos
    base, pos = parse_atom(source, pos)
    m, new_pos = parse_re(source, pos, r"\^")
    if m is None:
        return base, pos
    exponent, new_pos = expect(source, new_pos, r"\(?\s*-?\s*[0-9]+\s*\)?", "an integer exponent")
    text = exponent.group(1).replace(" ", "")
    if text.count("(") != text.count(")"):
        raise ParseError("Unbalanced parentheses around exponent", source, exponent.start(1))
    k = int(text.strip("()"))
    if k < 0 and base != ("var", "E"):
        raise ParseError("Negative exponents are only allowed on E", source, exponent.start(1))
    return ("^", base, k), new_pos


def parse_term(source, pos):
    node, pos = parse_factor(source, pos)
    while True:
        m, new_pos = parse_re(source, pos, r"\*")
        if m is None:
            return node, pos
        rhs, pos = parse_factor(source, new_pos)
        node = ("*", node, rhs)


def parse_expression(source, pos):
    node, pos = parse_term(source, pos)
    while True:
        m, new_pos = parse_re(source, pos, r"[-+]")
        if m is None:
            return node, pos
        rhs, pos = parse_term(source, new_pos)
        node = (m.group(1), node, rhs)


def parse_expr(source):
    """
    Parse an expression into a tuple AST.

    Raises:
    -------
    ParseError
        With the offset of the first offending character
    """
    if not source or not source.strip():
        raise ParseError("Empty expression", source or "", 0)
    node, pos = parse_expression(source, 0)
    pos = _skip_blanks(source, pos)
    if pos != len(source):
        raise ParseError(f"Unexpected {source[pos]!r}", source, pos)
    return node


def to_source(node):
    """Render an AST back to source text; parse_expr(to_source(a)) == a."""
    return _emit(node, top=True)


def _emit(node, top=False):
    kind = node[0]
    if kind == "rat":
        return format_rational(node[1])
    if kind == "var":
        return node[1]
    if kind in ("t", "tbar"):
        return f"{kind}[{node[1]}]"
    if kind == "neg":
        return "-" + _emit(node[1])
    if kind == "^":
        base = _emit(node[1])
        if node[1][0] not in ATOMS:
            base = f"({base})" if not base.startswith("(") else base
        return f"{base}^{node[2]}"
    text = f"{_emit(node[1])} {kind} {_emit(node[2])}" if kind != "*" else f"{_emit(node[1])}*{_emit(node[2])}"
    return text if top else f"({text})"


def variables(node):
    """Set of atom names used by an AST."""
    kind = node[0]
    if kind == "var":
        return {node[1]}
    if kind in ("t", "tbar"):
        return {f"{kind}[{node[1]}]"}
    if kind == "rat":
        return set()
    found = set()
    for child in node[1:]:
        if isinstance(child, tuple):
            found |= variables(child)
    return found


def compile_expr(node, trunc, seed=False):
    """
    Compile an AST to an HSymbol over ``trunc``.

    s becomes 1-u, hbar the ℏ-grading shift, E^m the symbol ξ^m and
    products are ∘-products taken in source order, so ``E*s`` is
    (s + ℏ)ξ while ``s*E`` is sξ.

    Parameters:
    -----------
    node : tuple
        AST from ``parse_expr`` (a source string is parsed first)
    trunc : Truncation
        Target truncation
    seed : bool
        Seed mode: ``hbar`` is rejected and ``l`` = log(1-s) is allowed

    Returns:
    --------
    HSymbol
    """
    if isinstance(node, str):
        node = parse_expr(node)
    return _compile(node, trunc, seed)


def _compile(node, trunc, seed):
    kind = node[0]
    ring = trunc.ring
    if kind == "rat":
        return HSymbol.constant(trunc, node[1])
    if kind == "var":
        name = node[1]
        if name == "s":
            return HSymbol.scalar(trunc, ScalarPoly.s_variable(ring))
        if name == "E":
            return _shift(trunc, 1)
        if name == "hbar":
            if seed:
                raise ConfigError("hbar is not allowed in a seed expression")
            return HSymbol.hbar(trunc)
        if name == "l":
            if not seed:
                raise ConfigError("l = log(1-s) is only allowed in seed expressions")
            return HSymbol.scalar(trunc, ScalarPoly.ell(ring))
    if kind in ("t", "tbar"):
        bar = kind == "tbar"
        count = ring.n_tbar if bar else ring.n_t
        if node[1] > count:
            raise ConfigError(f"{kind}[{node[1]}] is outside the ring ({count} {kind} variables)")
        return HSymbol.scalar(trunc, ScalarPoly.t_variable(ring, node[1], bar))
    if kind == "neg":
        return -_compile(node[1], trunc, seed)
    if kind == "^":
        if node[1] == ("var", "E"):
            return _shift(trunc, node[2])
        return power(_compile(node[1], trunc, seed), node[2])
    lhs = _compile(node[1], trunc, seed)
    rhs = _compile(node[2], trunc, seed)
    if kind == "+":
        return lhs + rhs
    if kind == "-":
        return lhs - rhs
    if kind == "*":
        return circ_product(lhs, rhs)
    raise ConfigError(f"Unknown expression node {kind!r}")


def _shift(trunc, m):
    if not trunc.xi_lo <= m <= trunc.xi_hi:
        raise ConfigError(f"E^{m} is outside the window [{trunc.xi_lo}, {trunc.xi_hi}]")
    return HSymbol.xi(trunc, m)


def compile_scalar(node, trunc):
    """Compile a seed expression that must be free of E (used for φ0)."""
    if isinstance(node, str):
        node = parse_expr(node)
    symbol = compile_expr(node, trunc.with_hbar(0), seed=True)
    stray = [m for m in symbol.orders[0] if m != 0]
    if stray or symbol.has_log():
        raise ConfigError(f"Expected a scalar expression, got shifts {stray}")
    value = symbol.coefficient(0, 0)
    logging.debug(f"Compiled scalar seed {to_source(node)} -> {value.to_text()}")
    return value
