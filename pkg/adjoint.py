"""
Exponential-adjoint machinery.

Ad(e^{X/ℏ}) as a terminating series of ℏ-brackets, conjugation by
e^{φ/ℏ} through exact shift differences, the time-flow conjugation by
e^{ζ/ℏ}, and the Poisson-level tilde maps with their Bernoulli inverses.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import sympy

from errors import CertificateError, SymbolError
from scalars import ScalarPoly
from symbols import HSymbol, hbar_bracket, poisson

UNBAR = "unbar"
BAR = "bar"
SIDES = (UNBAR, BAR)

DEFAULT_MAX_ITERATIONS = 64


@dataclass(frozen=True)
class BernoulliTable:
    """K[p] = B_{2p}/(2p)!, with K[0] = 1."""

    K: tuple

    def __len__(self):
        return len(self.K)

    def __getitem__(self, p):
        return self.K[p]

    def inverse_generating_coefficient(self, n):
        """Coefficient of z^n in z/(e^z - 1)."""
        if n == 1:
            return Fraction(-1, 2)
        if n % 2:
            return Fraction(0)
        return self.K[n // 2]


@lru_cache(maxsize=None)
def bernoulli_K(p_max):
    """
    Table of K_{2p} = B_{2p}/(2p)! for p = 0..p_max.

    Parameters:
    -----------
    p_max : int
        Largest p in the table

    Returns:
    --------
    BernoulliTable
        Exact rationals; z/(e^z-1) = 1 - z/2 + Σ K_{2p} z^{2p}
    """
    if p_max < 0:
        raise ValueError(f"p_max must be non-negative, got {p_max}")
    values = []
    for p in range(p_max + 1):
        ratio = sympy.Rational(sympy.bernoulli(2 * p), sympy.factorial(2 * p))
        values.append(Fraction(int(ratio.p), int(ratio.q)))
    return BernoulliTable(tuple(values))


def termination_certificate(x):
    """
    Check that ℏ^{-1}ad x is nilpotent on truncated symbols.

    Every ℏ^0 term of ``x`` must raise the t- or t̄-degree, or move ξ-support
    toward a single truncated tail. ℏ^{>=1} terms raise the ℏ-order.

    Returns:
    --------
    int
        -1 when the generator lowers ξ-degrees, +1 when it raises them, 0 when
        termination comes from degree caps alone

    Raises:
    -------
    CertificateError
        For an ℏ^0 log ξ slot, an ℏ^0 time-free ξ^0 term or mixed directions
    """
    if x.logxi[0]:
        raise CertificateError("exp_ad: an ℏ^0 log ξ slot has no termination certificate")
    directions = set()
    for m, coeff in x.orders[0].items():
        for mono in coeff.terms:
            if mono.t_degree() or mono.tbar_degree():
                continue
            if m == 0:
                raise CertificateError(f"exp_ad: time-free ξ^0 term in generator ({coeff.to_text()})")
            directions.add(-1 if m < 0 else 1)
    if len(directions) > 1:
        raise CertificateError("exp_ad: generator moves ξ-support toward both tails")
    return directions.pop() if directions else 0


def exp_ad(x, a, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Ad(e^{x/ℏ}) a = Σ_N (ℏ^{-1}ad x)^N a / N!.

    Parameters:
    -----------
    x : HSymbol
        Generator of ℏ-order <= 0 with a termination certificate
    a : HSymbol
        Symbol to conjugate
    max_iterations : int
        Guard on the number of series terms

    Returns:
    --------
    HSymbol
        Exact on the returned validity range
    """
    termination_certificate(x)
    result = term = a
    for n in range(1, max_iterations + 1):
        term = hbar_bracket(x, term).scale(Fraction(1, n))
        result = result + term
        if not term.has_content():
            logging.debug(f"exp_ad: closed after {n} brackets, validity [{result.valid_lo}, {result.valid_hi}]")
            return result
    raise CertificateError(f"exp_ad: series did not close within {max_iterations} iterations")


def shift_difference(phi, m, n_hbar):
    """
    (φ(s) - φ(s+mℏ))/ℏ as an ℏ-graded list of coefficients.

    Parameters:
    -----------
    phi : sequence of ScalarPoly
        φ_0, φ_1, ... by ℏ-order
    m : int
        Shift in units of ℏ
    n_hbar : int
        Highest ℏ-order returned

    Returns:
    --------
    list of ScalarPoly
        Entry n is the coefficient of ℏ^n
    """
    ring = phi[0].ring
    out = [ScalarPoly.zero(ring) for _ in range(n_hbar + 1)]
    if m == 0:
        return out
    for j, phi_j in enumerate(phi):
        derivative = phi_j
        for k in range(1, n_hbar + 2 - j):
            derivative = derivative.d_s()
            if not derivative:
                break
            out[j + k - 1] = out[j + k - 1] - derivative.scale(Fraction(m ** k, factorial(k)))
    return out


def _graded_mul(a, b, n_hbar):
    ring = a[0].ring
    out = [ScalarPoly.zero(ring) for _ in range(n_hbar + 1)]
    for i, x in enumerate(a):
        if not x:
            continue
        for j in range(n_hbar + 1 - i):
            if b[j]:
                out[i + j] = out[i + j] + x * b[j]
    return out


def exp_graded(series, n_hbar):
    """
    exp of Σ ℏ^n c_n truncated at ℏ^{n_hbar}.

    The ℏ^0 part goes through ScalarPoly.exp_scalar, the rest is a finite
    power series in ℏ.
    """
    ring = series[0].ring
    zero = ScalarPoly.zero(ring)
    tail = [zero] + list(series[1:n_hbar + 1]) + [zero] * max(0, n_hbar + 1 - len(series))
    total = [ScalarPoly.one(ring)] + [zero] * n_hbar
    power = list(total)
    for k in range(1, n_hbar + 1):
        power = [c.scale(Fraction(1, k)) for c in _graded_mul(power, tail, n_hbar)]
        if not any(power):
            break
        total = [x + y for x, y in zip(total, power)]
    head = [series[0].exp_scalar()] + [zero] * n_hbar
    return _graded_mul(head, total, n_hbar)


def conj_by_phi(phi, a):
    """
    Ad(e^{φ/ℏ}) a for a scalar φ = Σ ℏ^n φ_n.

    Each ξ^m coefficient is multiplied by exp((φ(s) - φ(s+mℏ))/ℏ); a log ξ
    slot α picks up -α ∂s φ at ξ^0.
    """
    trunc = a.trunc
    n_hbar = trunc.n_hbar
    phi = list(phi)
    if not any(phi):
        return a
    factors = {}
    orders = [dict() for _ in range(n_hbar + 1)]
    for n, m, coeff in a.terms():
        if m not in factors:
            factors[m] = exp_graded(shift_difference(phi, m, n_hbar), n_hbar)
        for k, factor in enumerate(factors[m][:n_hbar + 1 - n]):
            if factor:
                orders[n + k][m] = orders[n + k].get(m, ScalarPoly.zero(trunc.ring)) + coeff * factor
    for j, alpha in enumerate(a.logxi):
        if not alpha:
            continue
        for k, phi_k in enumerate(phi[:n_hbar + 1 - j]):
            shift = phi_k.d_s().scale(-alpha)
            if shift:
                orders[j + k][0] = orders[j + k].get(0, ScalarPoly.zero(trunc.ring)) + shift
    return HSymbol(trunc, orders, list(a.logxi), a.valid_lo, a.valid_hi)


def time_generator(trunc, side):
    """ζ = Σ t_n ξ^n on the unbar side, ζ̄ = Σ t̄_n ξ^{-n} on the bar side."""
    ring = trunc.ring
    generator = HSymbol.zero(trunc)
    if side == UNBAR:
        if not ring.t_deg:
            return generator
        for n in range(1, ring.n_t + 1):
            generator = generator + HSymbol.from_coefficient(trunc, n, ScalarPoly.t_variable(ring, n))
    elif side == BAR:
        if not ring.tbar_deg:
            return generator
        for n in range(1, ring.n_tbar + 1):
            generator = generator + HSymbol.from_coefficient(trunc, -n, ScalarPoly.t_variable(ring, n, bar=True))
    else:
        raise SymbolError(f"Unknown side {side!r}")
    return generator


def time_conjugate(a, side, max_iterations=DEFAULT_MAX_ITERATIONS):
    """Ad(e^{ζ/ℏ}) a; each bracket raises the time degree by one."""
    generator = time_generator(a.trunc, side)
    if generator.is_exact_zero():
        return a
    return exp_ad(generator, a, max_iterations)


def exp_ad_phi0(piece, phi0, sign=1):
    """
    e^{±ad φ0} on an ℏ^0 slice, ad taken with the Poisson bracket.

    ξ^m coefficients are multiplied by exp(∓m ∂sφ0); a log ξ slot α gains
    ∓α ∂sφ0 at ξ^0.
    """
    slope = phi0.d_s()
    if not slope:
        return piece
    trunc = piece.trunc
    out = {}
    for m, coeff in piece.orders[0].items():
        if m:
            out[m] = coeff * slope.scale(-sign * m).exp_scalar()
        else:
            out[m] = coeff
    alpha = piece.logxi[0]
    if alpha:
        shifted = out.get(0, ScalarPoly.zero(trunc.ring)) - slope.scale(sign * alpha)
        out[0] = shifted
    return HSymbol(trunc, [out], [alpha], piece.valid_lo, piece.valid_hi)


def _bracket_series(y, x0, coefficient, max_iterations):
    """Σ_n coefficient(n) (ad x0)^n y, stopping once the powers vanish."""
    total = y.scale(coefficient(0))
    power = y
    for n in range(1, max_iterations + 1):
        power = poisson(x0, power)
        if not power.has_content():
            return total + power
        weight = coefficient(n)
        if weight:
            total = total + power.scale(weight)
    raise CertificateError(f"tilde map: bracket series did not close within {max_iterations} terms")


def tilde_forward(piece, x0, side=UNBAR, phi0=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Σ_{n>=1} (ad x0)^{n-1}/n! applied to an order slice; the bar side is
    followed by e^{ad φ0}.
    """
    result = _bracket_series(piece, x0, lambda n: Fraction(1, factorial(n + 1)), max_iterations)
    if side == BAR and phi0 is not None:
        result = exp_ad_phi0(result, phi0, 1)
    return result


def tilde_inverse(piece, x0, side=UNBAR, phi0=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Inverse of ``tilde_forward``:
    y - ½{x0, y} + Σ K_{2p} (ad x0)^{2p} y, the bar side preceded by e^{-ad φ0}.
    """
    if side == BAR and phi0 is not None:
        piece = exp_ad_phi0(piece, phi0, -1)
    table = [bernoulli_K(8)]

    def coefficient(n):
        if n // 2 >= len(table[0]):
            table[0] = bernoulli_K(2 * len(table[0]))
        return table[0].inverse_generating_coefficient(n)

    return _bracket_series(piece, x0, coefficient, max_iterations)


def untilde_bar(z_plus, xbar0, phi0, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Recover the bar slice from its tilde image.

    A ξ^0 term c in the inverse image (present only with a log slot) cannot
    stay in X̄; it is removed as G^{-1}(c) and handed back for φ.

    Returns:
    --------
    tuple
        (X̄ slice without ξ^0 term, ScalarPoly c to add to φ)
    """
    image = tilde_inverse(z_plus, xbar0, BAR, phi0, max_iterations)
    constant = image.coefficient(0, 0)
    if not constant:
        return image, constant
    scalar = HSymbol.scalar(image.trunc, constant)
    correction = tilde_inverse(scalar, xbar0, UNBAR, None, max_iterations)
    logging.debug(f"untilde_bar: moving ξ^0 term {constant.to_text()} into φ")
    return image - correction, constant
