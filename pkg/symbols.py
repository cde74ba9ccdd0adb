"""
ℏ-graded symbol algebra of difference operators.

A symbol a(ℏ, s, ξ) = Σ_n ℏ^n Σ_m a_{n,m}(s) ξ^m stands for the operator
Σ a_{n,m}(s) e^{mℏ∂s}; products are taken with the ∘-product
a∘b = Σ ℏ^n/n! (ξ∂ξ)^n a · ∂s^n b. Every symbol carries the range of
ξ-exponents on which its coefficients are exact (``valid_lo``/``valid_hi``,
None meaning the tail is known to vanish), and every operation computes
the tightest such range for its result.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property

from errors import ConfigError, SymbolError
from scalars import DoubledScalar, RingSpec, ScalarPoly, as_rational, format_rational

HBAR_ORDER_OF_ZERO = -math.inf


class Chart(Enum):
    AT_INFINITY = "AtInfinity"
    AT_ZERO = "AtZero"
    EXACT = "Exact"
    BAND = "Band"


class Part(Enum):
    GEQ_ZERO = "GeqZero"
    LEQ_MINUS_ONE = "LeqMinusOne"


@dataclass(frozen=True)
class Truncation:
    """
    Orders and windows kept by every symbol of one computation.

    Parameters:
    -----------
    n_hbar : int
        Highest ℏ-order kept
    xi_lo, xi_hi : int
        Stored ξ-exponent window, xi_lo <= 0 <= xi_hi
    t_deg, tbar_deg : int
        Degree caps in the t and t̄ variables
    n_t, n_tbar : int, optional
        Number of time variables; derived from the window when omitted
        (t_1..t_{xi_hi}, and t̄_1..t̄_{-xi_lo} only when tbar_deg > 0)
    """

    n_hbar: int
    xi_lo: int
    xi_hi: int
    t_deg: int = 0
    tbar_deg: int = 0
    n_t: int = None
    n_tbar: int = None

    def __post_init__(self):
        if self.n_hbar < 0:
            raise ConfigError(f"n_hbar must be non-negative, got {self.n_hbar}")
        if not self.xi_lo <= 0 <= self.xi_hi:
            raise ConfigError(f"Window must satisfy xi_lo <= 0 <= xi_hi, got [{self.xi_lo}, {self.xi_hi}]")
        if self.n_t is None:
            object.__setattr__(self, "n_t", self.xi_hi)
        if self.n_tbar is None:
            object.__setattr__(self, "n_tbar", -self.xi_lo if self.tbar_deg > 0 else 0)

    @cached_property
    def ring(self):
        return RingSpec(self.n_t, self.n_tbar, self.t_deg, self.tbar_deg)

    def with_hbar(self, n_hbar):
        return replace(self, n_hbar=n_hbar)

    def with_window(self, xi_lo, xi_hi):
        return replace(self, xi_lo=xi_lo, xi_hi=xi_hi)

    def widened(self, pad_lo, pad_hi):
        """Same ring, storage window extended by the given pads."""
        return replace(self, xi_lo=self.xi_lo - pad_lo, xi_hi=self.xi_hi + pad_hi)

    def describe(self):
        return {
            "n_hbar": self.n_hbar, "xi_lo": self.xi_lo, "xi_hi": self.xi_hi,
            "t_deg": self.t_deg, "tbar_deg": self.tbar_deg,
            "n_t": self.n_t, "n_tbar": self.n_tbar,
        }


def _max_none(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _min_none(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _accumulate(target, m, value):
    if not value:
        return
    current = target.get(m)
    total = value if current is None else current + value
    if total:
        target[m] = total
    else:
        target.pop(m, None)


class HSymbol:
    """
    Truncated ℏ-graded Laurent series in ξ over ScalarPoly.

    ``orders[n]`` maps ξ-exponents to coefficients of ℏ^n, ``logxi[n]`` is
    the constant coefficient of ℏ^n log ξ. Terms outside the storage window
    are dropped on construction, tightening the validity range.
    """

    __slots__ = ("trunc", "orders", "logxi", "valid_lo", "valid_hi")

    def __init__(self, trunc, orders=None, logxi=None, valid_lo=None, valid_hi=None):
        self.trunc = trunc
        ring = trunc.ring
        size = trunc.n_hbar + 1
        clean = []
        below = above = False
        for n in range(size):
            slice_in = orders[n] if orders is not None and n < len(orders) else None
            kept = {}
            for m, coeff in (slice_in or {}).items():
                if not isinstance(coeff, ScalarPoly):
                    coeff = ScalarPoly.constant(ring, coeff)
                elif coeff.ring != ring:
                    raise SymbolError(f"Coefficient ring {coeff.ring} does not match truncation {trunc}")
                if not coeff:
                    continue
                if m < trunc.xi_lo:
                    below = True
                elif m > trunc.xi_hi:
                    above = True
                else:
                    kept[m] = coeff
            clean.append(kept)
        if below:
            valid_lo = _max_none(valid_lo, trunc.xi_lo)
        if above:
            valid_hi = _min_none(valid_hi, trunc.xi_hi)
        for kept in clean:
            for m in [m for m in kept if (valid_lo is not None and m < valid_lo)
                      or (valid_hi is not None and m > valid_hi)]:
                del kept[m]
        logs = []
        log_known = (valid_lo is None or valid_lo <= 0) and (valid_hi is None or valid_hi >= 0)
        for n in range(size):
            value = as_rational(logxi[n]) if logxi is not None and n < len(logxi) else Fraction(0)
            logs.append(value if log_known else Fraction(0))
        self.orders = tuple(clean)
        self.logxi = tuple(logs)
        self.valid_lo = valid_lo
        self.valid_hi = valid_hi

    # constructors

    @classmethod
    def zero(cls, trunc):
        return cls(trunc)

    @classmethod
    def from_coefficient(cls, trunc, m, coeff, order=0):
        """Single term ``coeff * ℏ^order * ξ^m``."""
        orders = [dict() for _ in range(trunc.n_hbar + 1)]
        if order <= trunc.n_hbar:
            orders[order][m] = coeff
        return cls(trunc, orders)

    @classmethod
    def constant(cls, trunc, value):
        return cls.from_coefficient(trunc, 0, ScalarPoly.constant(trunc.ring, value))

    @classmethod
    def one(cls, trunc):
        return cls.constant(trunc, 1)

    @classmethod
    def xi(cls, trunc, m=1):
        return cls.from_coefficient(trunc, m, ScalarPoly.one(trunc.ring))

    @classmethod
    def hbar(cls, trunc):
        return cls.from_coefficient(trunc, 0, ScalarPoly.one(trunc.ring), order=1)

    @classmethod
    def scalar(cls, trunc, poly, order=0):
        return cls.from_coefficient(trunc, 0, poly, order)

    @classmethod
    def log_xi(cls, trunc, alpha=1, order=0):
        logs = [Fraction(0)] * (trunc.n_hbar + 1)
        if order <= trunc.n_hbar:
            logs[order] = as_rational(alpha)
        return cls(trunc, None, logs)

    @classmethod
    def embed(cls, piece, order, trunc):
        """Place the ℏ^0 slice of ``piece`` at ℏ^order of a symbol over ``trunc``."""
        orders = [dict() for _ in range(trunc.n_hbar + 1)]
        logs = [Fraction(0)] * (trunc.n_hbar + 1)
        if order <= trunc.n_hbar:
            orders[order] = dict(piece.orders[0])
            logs[order] = piece.logxi[0]
        return cls(trunc, orders, logs, piece.valid_lo, piece.valid_hi)

    # structure

    @property
    def ring(self):
        return self.trunc.ring

    @property
    def chart(self):
        if self.valid_lo is None and self.valid_hi is None:
            return Chart.EXACT
        if self.valid_hi is None:
            return Chart.AT_INFINITY
        if self.valid_lo is None:
            return Chart.AT_ZERO
        return Chart.BAND

    def has_content(self):
        return any(self.orders) or any(self.logxi)

    def is_zero(self):
        """True when every coefficient inside the validity range vanishes."""
        return not self.has_content()

    def is_exact_zero(self):
        return self.is_zero() and self.valid_lo is None and self.valid_hi is None

    def has_log(self):
        return any(self.logxi)

    def exponents(self):
        found = set()
        for piece in self.orders:
            found.update(piece)
        if self.has_log():
            found.add(0)
        return found

    def top(self):
        return max(self.exponents(), default=None)

    def bottom(self):
        return min(self.exponents(), default=None)

    def coefficient(self, order, m):
        if order > self.trunc.n_hbar:
            return ScalarPoly.zero(self.ring)
        return self.orders[order].get(m, ScalarPoly.zero(self.ring))

    def terms(self):
        """Yield (order, exponent, coefficient) in canonical order."""
        for n, piece in enumerate(self.orders):
            for m in sorted(piece):
                yield n, m, piece[m]

    def slice(self, order):
        """The ℏ^order slice as a symbol with n_hbar = 0."""
        trunc = self.trunc.with_hbar(0)
        if order < 0 or order > self.trunc.n_hbar:
            return HSymbol(trunc, None, None, self.valid_lo, self.valid_hi)
        return HSymbol(trunc, [self.orders[order]], [self.logxi[order]], self.valid_lo, self.valid_hi)

    def retruncate(self, trunc):
        """Re-express over another truncation sharing the same ring."""
        if trunc.ring != self.ring:
            raise SymbolError(f"Cannot move a symbol from ring {self.ring} to {trunc.ring}")
        return HSymbol(trunc, list(self.orders), list(self.logxi), self.valid_lo, self.valid_hi)

    def restrict(self, lo=None, hi=None):
        """Forget coefficients outside [lo, hi]; the validity range shrinks accordingly."""
        return HSymbol(self.trunc, list(self.orders), list(self.logxi),
                       _max_none(self.valid_lo, lo), _min_none(self.valid_hi, hi))

    def _check(self, other):
        if not isinstance(other, HSymbol):
            raise SymbolError(f"Expected an HSymbol, got {type(other).__name__}")
        if other.trunc != self.trunc:
            raise SymbolError(f"Incompatible truncations: {self.trunc} vs {other.trunc}")

    # linear structure

    def __add__(self, other):
        self._check(other)
        orders = []
        for mine, theirs in zip(self.orders, other.orders):
            merged = dict(mine)
            for m, coeff in theirs.items():
                _accumulate(merged, m, coeff)
            orders.append(merged)
        logs = [x + y for x, y in zip(self.logxi, other.logxi)]
        return HSymbol(self.trunc, orders, logs,
                       _max_none(self.valid_lo, other.valid_lo),
                       _min_none(self.valid_hi, other.valid_hi))

    def __neg__(self):
        return HSymbol(self.trunc, [{m: -c for m, c in piece.items()} for piece in self.orders],
                       [-x for x in self.logxi], self.valid_lo, self.valid_hi)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        """Multiply by a rational constant."""
        factor = as_rational(factor)
        return HSymbol(self.trunc, [{m: c.scale(factor) for m, c in piece.items()} for piece in self.orders],
                       [x * factor for x in self.logxi], self.valid_lo, self.valid_hi)

    def map_coefficients(self, func):
        """Apply ``func`` to every coefficient; log slots must be handled by the caller."""
        return HSymbol(self.trunc, [{m: func(c) for m, c in piece.items()} for piece in self.orders],
                       None, self.valid_lo, self.valid_hi)

    def times_scalar(self, poly):
        """Pointwise product with an ℏ^0 function of (t, t̄, s) sitting at ξ^0."""
        if self.has_log() and poly.constant_value() is None:
            raise SymbolError("A log ξ slot cannot be multiplied by a non-constant function")
        result = self.map_coefficients(lambda c: c * poly)
        if self.has_log():
            factor = poly.constant_value()
            return HSymbol(self.trunc, list(result.orders), [x * factor for x in self.logxi],
                           self.valid_lo, self.valid_hi)
        return result

    def shift_hbar(self, k):
        """Multiply by ℏ^k (k >= 0); orders beyond n_hbar are dropped."""
        size = self.trunc.n_hbar + 1
        orders = [dict() for _ in range(size)]
        logs = [Fraction(0)] * size
        for n in range(size - k):
            orders[n + k] = self.orders[n]
            logs[n + k] = self.logxi[n]
        return HSymbol(self.trunc, orders, logs, self.valid_lo, self.valid_hi)

    def drop_log(self):
        return HSymbol(self.trunc, list(self.orders), None, self.valid_lo, self.valid_hi)

    def __eq__(self, other):
        if not isinstance(other, HSymbol):
            return NotImplemented
        return (self.trunc == other.trunc and self.orders == other.orders and self.logxi == other.logxi
                and self.valid_lo == other.valid_lo and self.valid_hi == other.valid_hi)

    __hash__ = None

    def agrees_with(self, other):
        """Equality on the common validity range."""
        return (self - other).is_zero()

    # derivations

    def d_s(self):
        return self.map_coefficients(lambda c: c.d_s())

    def d_t(self, index, bar=False):
        return self.map_coefficients(lambda c: c.d_t(index, bar))

    def d_xi(self):
        """∂ξ, with ∂ξ log ξ = ξ^{-1}."""
        orders = []
        for n, piece in enumerate(self.orders):
            out = {}
            for m, coeff in piece.items():
                if m:
                    out[m - 1] = coeff.scale(m)
            if self.logxi[n]:
                _accumulate(out, -1, ScalarPoly.constant(self.ring, self.logxi[n]))
            orders.append(out)
        lo = None if self.valid_lo is None else self.valid_lo - 1
        hi = None if self.valid_hi is None else self.valid_hi - 1
        return HSymbol(self.trunc, orders, None, lo, hi)

    # rendering

    def to_text(self):
        parts = []
        for n, piece in enumerate(self.orders):
            items = [f"({piece[m].to_text()})*xi^{m}" for m in sorted(piece)]
            if self.logxi[n]:
                items.append(f"({format_rational(self.logxi[n])})*logxi")
            if items:
                parts.append(f"hbar^{n} [ {' + '.join(items)} ]")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"HSymbol<{self.chart.value} {self.valid_lo}..{self.valid_hi}>({self.to_text()})"

    def to_record(self):
        return {
            "chart": self.chart.value,
            "valid": [self.valid_lo, self.valid_hi],
            "orders": [
                {"hbar": n,
                 "terms": [{"xi": m, "coeff": piece[m].to_records()} for m in sorted(piece)],
                 "logxi": format_rational(self.logxi[n])}
                for n, piece in enumerate(self.orders)
            ],
        }

    @classmethod
    def from_record(cls, trunc, record):
        ring = trunc.ring
        orders = [dict() for _ in range(trunc.n_hbar + 1)]
        logs = [Fraction(0)] * (trunc.n_hbar + 1)
        for entry in record["orders"]:
            n = entry["hbar"]
            if n > trunc.n_hbar:
                continue
            for term in entry["terms"]:
                orders[n][term["xi"]] = ScalarPoly.from_records(ring, term["coeff"])
            logs[n] = Fraction(entry.get("logxi", "0"))
        lo, hi = record.get("valid", [None, None])
        return cls(trunc, orders, logs, lo, hi)


# products

def _top_eff(a):
    top = a.top()
    if a.valid_lo is None:
        return top
    return a.valid_lo - 1 if top is None else max(top, a.valid_lo - 1)


def _bottom_eff(a):
    bottom = a.bottom()
    if a.valid_hi is None:
        return bottom
    return a.valid_hi + 1 if bottom is None else min(bottom, a.valid_hi + 1)


def product_window(a, b):
    """
    Validity range of any bilinear ∘-type combination of ``a`` and ``b``.

    Only unknown tails of the operands narrow the range. Products that land
    outside the storage window are dropped by the HSymbol constructor, which
    marks a tail unknown only when a dropped coefficient is nonzero.

    Returns:
    --------
    tuple
        (lo, hi) with None for a tail known to vanish

    Raises:
    -------
    SymbolError
        If an unknown lower tail meets an unknown upper tail
    """
    lo = hi = None
    if a.valid_lo is not None:
        if b.valid_hi is not None:
            raise SymbolError(f"Chart mismatch: {a.chart.value} against {b.chart.value}")
        lo = _max_none(lo, a.valid_lo + _top_eff(b))
    if b.valid_lo is not None:
        if a.valid_hi is not None:
            raise SymbolError(f"Chart mismatch: {a.chart.value} against {b.chart.value}")
        lo = _max_none(lo, b.valid_lo + _top_eff(a))
    if a.valid_hi is not None:
        hi = _min_none(hi, a.valid_hi + _bottom_eff(b))
    if b.valid_hi is not None:
        hi = _min_none(hi, b.valid_hi + _bottom_eff(a))
    trunc = a.trunc
    if lo is not None:
        lo = max(lo, trunc.xi_lo)
    if hi is not None:
        hi = min(hi, trunc.xi_hi)
    return lo, hi


def _pair_sums(a, b, n_min, n_max, shift, lo, hi):
    """
    Σ_{j,k,n} (1/n!) m_a^n a_{j,m_a} ∂s^n b_{k,m_b}, collected at ℏ^{j+k+n-shift}.
    """
    trunc = a.trunc
    top = trunc.n_hbar
    out = [dict() for _ in range(top + 1)]
    lo = -math.inf if lo is None else lo
    hi = math.inf if hi is None else hi
    derivatives = {}
    for j, a_piece in enumerate(a.orders):
        if not a_piece:
            continue
        for k, b_piece in enumerate(b.orders):
            if not b_piece:
                continue
            n_top = top + shift - j - k
            if n_max is not None:
                n_top = min(n_top, n_max)
            for n in range(n_min, n_top + 1):
                target = out[j + k + n - shift]
                denominator = math.factorial(n)
                for mb, cb in b_piece.items():
                    chain = derivatives.setdefault((k, mb), [cb])
                    while len(chain) <= n:
                        chain.append(chain[-1].d_s())
                    db = chain[n]
                    if not db:
                        continue
                    for ma, ca in a_piece.items():
                        m = ma + mb
                        if m < lo or m > hi:
                            continue
                        weight = Fraction(ma ** n, denominator)
                        if weight:
                            _accumulate(target, m, (ca * db).scale(weight))
    return out


def _is_pure_constant(a):
    if a.has_log():
        return False
    for piece in a.orders:
        for m, coeff in piece.items():
            if m != 0 or coeff.constant_value() is None:
                return False
    return True


def _log_times_constant(a, b):
    """Log slots of a∘b when one side carries log ξ and the other is a rational constant."""
    size = a.trunc.n_hbar + 1
    logs = [Fraction(0)] * size
    for log_side, const_side in ((a, b), (b, a)):
        for j, alpha in enumerate(log_side.logxi):
            if not alpha:
                continue
            for k, piece in enumerate(const_side.orders):
                if j + k < size and 0 in piece:
                    logs[j + k] += alpha * piece[0].constant_value()
    return logs


def _check_log_partners(a, b):
    if (a.has_log() and not _is_pure_constant(b)) or (b.has_log() and not _is_pure_constant(a)):
        raise SymbolError("A log ξ slot can only be multiplied by a rational constant")


def circ_product(a, b):
    """
    ∘-product of two symbols, the symbol of the operator product.

    Parameters:
    -----------
    a, b : HSymbol
        Operands over the same truncation

    Returns:
    --------
    HSymbol
        Σ ℏ^n/n! (ξ∂ξ)^n a · ∂s^n b, exact on the returned validity range
    """
    a._check(b)
    if a.is_exact_zero() or b.is_exact_zero():
        return HSymbol.zero(a.trunc)
    _check_log_partners(a, b)
    lo, hi = product_window(a, b)
    orders = _pair_sums(a, b, 0, None, 0, lo, hi)
    return HSymbol(a.trunc, orders, _log_times_constant(a, b), lo, hi)


def pointwise_product(a, b):
    """Commutative product of symbols as functions of (ℏ, s, ξ)."""
    a._check(b)
    if a.is_exact_zero() or b.is_exact_zero():
        return HSymbol.zero(a.trunc)
    _check_log_partners(a, b)
    lo, hi = product_window(a, b)
    orders = _pair_sums(a, b, 0, 0, 0, lo, hi)
    return HSymbol(a.trunc, orders, _log_times_constant(a, b), lo, hi)


def _bracket(x, a, n_max):
    x._check(a)
    if x.is_exact_zero() or a.is_exact_zero():
        return HSymbol.zero(x.trunc)
    lo, hi = product_window(x, a)
    forward = _pair_sums(x, a, 1, n_max, 1, lo, hi)
    backward = _pair_sums(a, x, 1, n_max, 1, lo, hi)
    for target, piece in zip(forward, backward):
        for m, coeff in piece.items():
            _accumulate(target, m, -coeff)
    size = x.trunc.n_hbar + 1
    # [α log ξ, b]/ℏ = α ∂s b
    for sign, log_side, other in ((1, x, a), (-1, a, x)):
        for j, alpha in enumerate(log_side.logxi):
            if not alpha:
                continue
            for k, piece in enumerate(other.orders):
                if j + k >= size or (n_max is not None and (j or k)):
                    continue
                for m, coeff in piece.items():
                    if (lo is None or m >= lo) and (hi is None or m <= hi):
                        _accumulate(forward[j + k], m, coeff.d_s().scale(sign * alpha))
    return HSymbol(x.trunc, forward, None, lo, hi)


def hbar_bracket(x, a):
    """ℏ^{-1}[x, a] = (x∘a - a∘x)/ℏ, computed without forming either product."""
    return _bracket(x, a, None)


def poisson(a, b):
    """
    {a, b} = ξ(∂ξa ∂sb - ∂sa ∂ξb) of the ℏ^0 slices, with ξ∂ξ log ξ = 1.

    Returns an n_hbar = 0 symbol.
    """
    return _bracket(a.slice(0), b.slice(0), 1)


def commutator(a, b):
    return circ_product(a, b) - circ_product(b, a)


def power(a, n):
    """n-fold ∘-product."""
    if n < 0:
        raise SymbolError(f"power expects a natural exponent, got {n}")
    if n == 0:
        return HSymbol.one(a.trunc)
    result = a
    for _ in range(n - 1):
        result = circ_product(result, a)
    return result


def hbar_order(a):
    """max{-n : ℏ^n slice nonzero}; HBAR_ORDER_OF_ZERO for zero."""
    for n, piece in enumerate(a.orders):
        if piece or a.logxi[n]:
            return -n
    return HBAR_ORDER_OF_ZERO


def sym_h(a, level=None):
    """Symbol of ℏ-order ``level`` (principal symbol when omitted)."""
    if level is None:
        level = hbar_order(a)
        if level == HBAR_ORDER_OF_ZERO:
            return a.slice(0)
    return a.slice(-level)


def project(a, part):
    """Keep ξ-exponents >= 0 (with the log slot) or <= -1."""
    if part is Part.GEQ_ZERO:
        orders = [{m: c for m, c in piece.items() if m >= 0} for piece in a.orders]
        logs = a.logxi
        lo = a.valid_lo if a.valid_lo is not None and a.valid_lo > 0 else None
        hi = a.valid_hi
    else:
        orders = [{m: c for m, c in piece.items() if m <= -1} for piece in a.orders]
        logs = None
        lo = a.valid_lo
        hi = a.valid_hi if a.valid_hi is not None and a.valid_hi < -1 else None
    return HSymbol(a.trunc, orders, logs, lo, hi)


def xi_antiderivative(a):
    """
    Termwise ∫ dξ of a single-order symbol.

    Returns:
    --------
    tuple
        (symbol without log slot, rational coefficient of log ξ from the ξ^{-1} term)

    Raises:
    -------
    SymbolError
        If the ξ^{-1} coefficient is not a rational constant or the input has a log slot
    """
    if a.has_log() or any(a.orders[1:]):
        raise SymbolError("xi_antiderivative expects a log-free single ℏ-order slice")
    out = {}
    alpha = Fraction(0)
    for m, coeff in a.orders[0].items():
        if m == -1:
            alpha = coeff.constant_value()
            if alpha is None:
                raise SymbolError(f"Non-constant log ξ coefficient: {coeff.to_text()}")
        else:
            out[m + 1] = coeff.scale(Fraction(1, m + 1))
    lo = None if a.valid_lo is None else a.valid_lo + 1
    hi = None if a.valid_hi is None else a.valid_hi + 1
    orders = [out] + [dict() for _ in range(a.trunc.n_hbar)]
    return HSymbol(a.trunc, orders, None, lo, hi), alpha


def _binomial(top, k):
    value = Fraction(1)
    for i in range(k):
        value = value * (top - i) / (i + 1)
    return value


def invert(a, chart=None, max_iterations=256):
    """
    ∘-inverse of a symbol with a unit leading term.

    The leading term A0 = c u^q ξ^k is the highest (AtInfinity) or lowest
    (AtZero) exponent of the time-free ℏ^0 part. Then
    A0^{-1} = c^{-1} (u + kℏ)^{-q} ξ^{-k} and a^{-1} = Σ (-E)^j ∘ A0^{-1}
    with E = A0^{-1} ∘ (a - A0).

    Parameters:
    -----------
    a : HSymbol
        Symbol to invert
    chart : Chart, optional
        Expansion point; defaults to the chart of ``a`` (AtInfinity for Exact)
    max_iterations : int
        Guard on the Neumann series length
    """
    trunc, ring = a.trunc, a.ring
    if chart is None:
        chart = a.chart
    if chart is Chart.EXACT:
        chart = Chart.AT_INFINITY
    if chart is Chart.BAND:
        raise SymbolError("Cannot invert a symbol known only on a band")
    if a.has_log():
        raise SymbolError("Cannot invert a symbol with a log ξ slot")
    free = {}
    for m, coeff in a.orders[0].items():
        part, _ = coeff.split_by_nilpotency()
        if part:
            free[m] = part
    if not free:
        raise SymbolError("invert: the time-free ℏ^0 part vanishes")
    k = max(free) if chart is Chart.AT_INFINITY else min(free)
    unit = free[k].unit_monomial()
    if unit is None:
        raise SymbolError(f"invert: leading coefficient {free[k].to_text()} is not a unit")
    c, q = unit
    lead = HSymbol.from_coefficient(trunc, k, free[k])
    orders = [dict() for _ in range(trunc.n_hbar + 1)]
    for n in range(trunc.n_hbar + 1):
        weight = _binomial(-Fraction(q), n) * Fraction(k) ** n / c
        if weight:
            orders[n][-k] = ScalarPoly.u_power(ring, -Fraction(q) - n, weight)
    lead_inverse = HSymbol(trunc, orders)
    rest = a - lead
    if rest.is_exact_zero():
        return lead_inverse
    small = circ_product(lead_inverse, rest)
    result = term = lead_inverse
    for iteration in range(1, max_iterations + 1):
        term = -circ_product(small, term)
        result = result + term
        if not term.has_content():
            logging.debug(f"invert: Neumann series closed after {iteration} terms")
            return result
    raise SymbolError(f"invert: Neumann series did not close within {max_iterations} terms")


class BivarSymbol:
    """
    Single-ℏ-order function of (s, s', ξ, ξ') with DoubledScalar coefficients.

    Terms are keyed by (m, m'); terms whose joint degree m + m' leaves the
    storage window are dropped.
    """

    __slots__ = ("trunc", "terms")

    def __init__(self, trunc, terms=None):
        self.trunc = trunc
        self.terms = {}
        for key, coeff in (terms or {}).items():
            if coeff and trunc.xi_lo <= key[0] + key[1] <= trunc.xi_hi:
                self.terms[key] = coeff

    @classmethod
    def zero(cls, trunc):
        return cls(trunc)

    @classmethod
    def from_unprimed(cls, piece, order=0):
        """Lift the ℏ^order slice of a symbol to a function of (s, ξ)."""
        return cls(piece.trunc, {(m, 0): DoubledScalar.from_unprimed(c) for m, c in piece.orders[order].items()})

    @classmethod
    def from_primed(cls, piece, order=0):
        """Lift the ℏ^order slice of a symbol to a function of (s', ξ')."""
        return cls(piece.trunc, {(0, m): DoubledScalar.from_primed(c) for m, c in piece.orders[order].items()})

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, other):
        merged = dict(self.terms)
        for key, coeff in other.terms.items():
            total = merged[key] + coeff if key in merged else coeff
            if total:
                merged[key] = total
            else:
                merged.pop(key, None)
        return BivarSymbol(self.trunc, merged)

    def __neg__(self):
        return BivarSymbol(self.trunc, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        return BivarSymbol(self.trunc, {k: c.scale(factor) for k, c in self.terms.items()})

    def __mul__(self, other):
        lo, hi = self.trunc.xi_lo, self.trunc.xi_hi
        result = {}
        for (m1, p1), c1 in self.terms.items():
            for (m2, p2), c2 in other.terms.items():
                if not lo <= m1 + m2 + p1 + p2 <= hi:
                    continue
                key = (m1 + m2, p1 + p2)
                product = c1 * c2
                total = result[key] + product if key in result else product
                result[key] = total
        return BivarSymbol(self.trunc, result)

    def xi_euler(self):
        """ξ∂ξ acting on the unprimed exponent."""
        return BivarSymbol(self.trunc, {(m, p): c.scale(m) for (m, p), c in self.terms.items() if m})

    def d_sp(self):
        return BivarSymbol(self.trunc, {k: c.d_sp() for k, c in self.terms.items()})

    def d_s(self):
        return BivarSymbol(self.trunc, {k: c.d_s() for k, c in self.terms.items()})

    def depends_on_primed(self):
        return any(p or c.depends_on_primed() for (_, p), c in self.terms.items())

    def joint_degrees(self):
        return {m + p for m, p in self.terms}

    def eval_diagonal(self, valid_lo=None, valid_hi=None):
        """Substitute s' -> s, ξ' -> ξ; returns an n_hbar = 0 symbol."""
        out = {}
        for (m, p), coeff in self.terms.items():
            _accumulate(out, m + p, coeff.eval_diagonal())
        return HSymbol(self.trunc.with_hbar(0), [out], None, valid_lo, valid_hi)
