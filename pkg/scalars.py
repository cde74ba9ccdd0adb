"""
Exact coefficient ring for all series coefficients.

Elements are finite rational combinations of monomials
t^a tbar^b u^q l^k where u = 1 - s, l = log(1 - s), q is rational and
k is a natural number. Total t-degree and t̄-degree are capped by the
ring's truncation; terms beyond the caps are dropped on construction.

The doubled ring carries a second copy (u', l') of the s-generators and is
used by the WKB recursions, where ξ∂ξ and ∂_{s'} act on different slots.
"""

from dataclasses import dataclass
from fractions import Fraction
from operator import add
from typing import NamedTuple

from errors import ConfigError, RingError

ZERO = Fraction(0)
ONE = Fraction(1)


def as_rational(value):
    """
    Coerce an int, str or Fraction to an exact Fraction.

    Floats are rejected: every coefficient in the engine is exact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise RingError(f"Refusing inexact or boolean coefficient {value!r}")
    return Fraction(value)


def normalize_exponent(q):
    """Store integral u-exponents as int so that monomials hash cheaply."""
    if isinstance(q, Fraction):
        return q.numerator if q.denominator == 1 else q
    return q


def format_rational(value):
    """Render a Fraction as ``p`` or ``p/q``."""
    value = as_rational(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class RingSpec:
    """
    Variable counts and degree caps shared by every element of one ring.

    Parameters:
    -----------
    n_t : int
        Number of time variables t_1..t_T
    n_tbar : int
        Number of time variables tbar_1..tbar_T
    t_deg : int
        Maximal total degree in the t variables
    tbar_deg : int
        Maximal total degree in the tbar variables
    """

    n_t: int = 0
    n_tbar: int = 0
    t_deg: int = 0
    tbar_deg: int = 0

    def __post_init__(self):
        for name in ("n_t", "n_tbar", "t_deg", "tbar_deg"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def zero_t(self):
        return (0,) * self.n_t

    @property
    def zero_tbar(self):
        return (0,) * self.n_tbar


class Monomial(NamedTuple):
    """t-exponents, t̄-exponents, u-exponent (rational) and l-exponent."""

    t: tuple
    tbar: tuple
    u: object
    l: int

    def sort_key(self):
        return (self.t, self.tbar, Fraction(self.u), self.l)

    def t_degree(self):
        return sum(self.t)

    def tbar_degree(self):
        return sum(self.tbar)


def _factor_text(t, tbar, u, l):
    factors = []
    for index, exp in enumerate(t, start=1):
        if exp:
            factors.append(f"t{index}" if exp == 1 else f"t{index}^{exp}")
    for index, exp in enumerate(tbar, start=1):
        if exp:
            factors.append(f"tb{index}" if exp == 1 else f"tb{index}^{exp}")
    if u:
        if isinstance(u, Fraction):
            factors.append(f"u^({format_rational(u)})")
        else:
            factors.append("u" if u == 1 else f"u^{u}")
    if l:
        factors.append("l" if l == 1 else f"l^{l}")
    return factors


def _terms_text(items):
    """Join (coefficient, factor list) pairs into a signed sum."""
    if not items:
        return "0"
    pieces = []
    for position, (coeff, factors) in enumerate(items):
        negative = coeff < 0
        magnitude = -coeff if negative else coeff
        if factors:
            body = "*".join(factors)
            if magnitude != 1:
                body = f"{format_rational(magnitude)}*{body}"
        else:
            body = format_rational(magnitude)
        if position == 0:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f" - {body}" if negative else f" + {body}")
    return "".join(pieces)


class ScalarPoly:
    """
    Element of Q[t, tbar] ⊗ u^Q ⊗ l^N, immutable after construction.

    Parameters:
    -----------
    ring : RingSpec
        Variable counts and degree caps
    terms : dict
        Mapping Monomial -> coefficient; zero coefficients and terms beyond
        the degree caps are dropped
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms=None):
        self.ring = ring
        clean = {}
        for mono, coeff in (terms or {}).items():
            coeff = as_rational(coeff)
            if not coeff:
                continue
            mono = Monomial(tuple(mono[0]), tuple(mono[1]), normalize_exponent(mono[2]), int(mono[3]))
            if len(mono.t) != ring.n_t or len(mono.tbar) != ring.n_tbar:
                raise RingError(f"Monomial {mono} does not match ring {ring}")
            if mono.l < 0 or min(mono.t, default=0) < 0 or min(mono.tbar, default=0) < 0:
                raise RingError(f"Negative t, tbar or l exponent in {mono}")
            if mono.t_degree() > ring.t_deg or mono.tbar_degree() > ring.tbar_deg:
                continue
            clean[mono] = clean.get(mono, ZERO) + coeff
            if not clean[mono]:
                del clean[mono]
        self.terms = clean

    @classmethod
    def _wrap(cls, ring, terms):
        # terms must already be clean
        obj = cls.__new__(cls)
        obj.ring = ring
        obj.terms = terms
        return obj

    # constructors

    @classmethod
    def zero(cls, ring):
        return cls._wrap(ring, {})

    @classmethod
    def constant(cls, ring, value):
        value = as_rational(value)
        if not value:
            return cls.zero(ring)
        return cls._wrap(ring, {Monomial(ring.zero_t, ring.zero_tbar, 0, 0): value})

    @classmethod
    def one(cls, ring):
        return cls.constant(ring, 1)

    @classmethod
    def monomial(cls, ring, coeff=1, t=None, tbar=None, u=0, l=0):
        """Single term ``coeff * t^t * tbar^tbar * u^u * l^l``."""
        t = tuple(t) if t is not None else ring.zero_t
        tbar = tuple(tbar) if tbar is not None else ring.zero_tbar
        return cls(ring, {(t, tbar, as_rational(u), l): coeff})

    @classmethod
    def u_power(cls, ring, q, coeff=1):
        return cls.monomial(ring, coeff, u=q)

    @classmethod
    def ell(cls, ring, coeff=1):
        return cls.monomial(ring, coeff, l=1)

    @classmethod
    def s_variable(cls, ring):
        """s = 1 - u."""
        return cls(ring, {(ring.zero_t, ring.zero_tbar, 0, 0): 1,
                          (ring.zero_t, ring.zero_tbar, 1, 0): -1})

    @classmethod
    def t_variable(cls, ring, index, bar=False):
        """t_index (or tbar_index), 1-based."""
        count = ring.n_tbar if bar else ring.n_t
        if not 1 <= index <= count:
            raise RingError(f"{'tbar' if bar else 't'}{index} is outside the ring ({count} variables)")
        exps = [0] * count
        exps[index - 1] = 1
        if bar:
            return cls.monomial(ring, 1, tbar=exps)
        return cls.monomial(ring, 1, t=exps)

    # queries

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda item: item[0].sort_key())

    def constant_value(self):
        """The rational value if this is a constant (no t, tbar, u or l), else None."""
        if not self.terms:
            return ZERO
        if len(self.terms) != 1:
            return None
        (mono, coeff), = self.terms.items()
        if mono.u == 0 and mono.l == 0 and not any(mono.t) and not any(mono.tbar):
            return coeff
        return None

    def unit_monomial(self):
        """
        Return ``(c, q)`` when this element is a unit ``c * u^q`` of the ring.

        Returns:
        --------
        tuple or None
            The coefficient and u-exponent, or None for non-units
        """
        if len(self.terms) != 1:
            return None
        (mono, coeff), = self.terms.items()
        if mono.l == 0 and not any(mono.t) and not any(mono.tbar):
            return coeff, mono.u
        return None

    def t_degree(self):
        return max((m.t_degree() for m in self.terms), default=0)

    def tbar_degree(self):
        return max((m.tbar_degree() for m in self.terms), default=0)

    def split_by_nilpotency(self):
        """
        Split into (time-free part, part with positive t- or tbar-degree).
        """
        free, nilpotent = {}, {}
        for mono, coeff in self.terms.items():
            if mono.t_degree() or mono.tbar_degree():
                nilpotent[mono] = coeff
            else:
                free[mono] = coeff
        return ScalarPoly._wrap(self.ring, free), ScalarPoly._wrap(self.ring, nilpotent)

    def truncate_degree(self, max_t=None, max_tbar=None):
        """Keep terms whose t-degree <= max_t and tbar-degree <= max_tbar."""
        kept = {m: c for m, c in self.terms.items()
                if (max_t is None or m.t_degree() <= max_t)
                and (max_tbar is None or m.tbar_degree() <= max_tbar)}
        return ScalarPoly._wrap(self.ring, kept)

    # arithmetic

    def _check(self, other):
        if other.ring != self.ring:
            raise RingError(f"Mixed rings: {self.ring} vs {other.ring}")

    def _coerce(self, other):
        if isinstance(other, ScalarPoly):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return ScalarPoly.constant(self.ring, other)
        return NotImplemented

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if not other.terms:
            return self
        if not self.terms:
            return other
        result = dict(self.terms)
        for mono, coeff in other.terms.items():
            value = result.get(mono, ZERO) + coeff
            if value:
                result[mono] = value
            else:
                result.pop(mono, None)
        return ScalarPoly._wrap(self.ring, result)

    __radd__ = __add__

    def __neg__(self):
        return ScalarPoly._wrap(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def scale(self, factor):
        factor = as_rational(factor)
        if not factor:
            return ScalarPoly.zero(self.ring)
        if factor == 1:
            return self
        return ScalarPoly._wrap(self.ring, {m: c * factor for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        if not isinstance(other, ScalarPoly):
            return NotImplemented
        self._check(other)
        return ScalarPoly._wrap(self.ring, multiply_terms(self.ring, self.terms, other.terms))

    __rmul__ = __mul__

    def __pow__(self, exponent):
        if not isinstance(exponent, int) or exponent < 0:
            raise RingError(f"Only natural powers are supported, got {exponent!r}")
        result = ScalarPoly.one(self.ring)
        for _ in range(exponent):
            result = result * self
        return result

    # derivations

    def d_s(self):
        """∂_s with ∂_s u = -1 and ∂_s l = -u^{-1}."""
        result = {}
        for mono, coeff in self.terms.items():
            if mono.u:
                key = Monomial(mono.t, mono.tbar, normalize_exponent(mono.u - 1), mono.l)
                result[key] = result.get(key, ZERO) - coeff * mono.u
            if mono.l:
                key = Monomial(mono.t, mono.tbar, normalize_exponent(mono.u - 1), mono.l - 1)
                result[key] = result.get(key, ZERO) - coeff * mono.l
        return ScalarPoly._wrap(self.ring, {m: c for m, c in result.items() if c})

    def d_s_power(self, order):
        result = self
        for _ in range(order):
            if not result.terms:
                break
            result = result.d_s()
        return result

    def d_t(self, index, bar=False):
        """Partial derivative in t_index (or tbar_index), 1-based."""
        count = self.ring.n_tbar if bar else self.ring.n_t
        if not 1 <= index <= count:
            raise RingError(f"{'tbar' if bar else 't'}{index} is outside the ring ({count} variables)")
        slot = index - 1
        result = {}
        for mono, coeff in self.terms.items():
            exps = mono.tbar if bar else mono.t
            if not exps[slot]:
                continue
            lowered = exps[:slot] + (exps[slot] - 1,) + exps[slot + 1:]
            key = Monomial(mono.t, lowered, mono.u, mono.l) if bar else Monomial(lowered, mono.tbar, mono.u, mono.l)
            result[key] = coeff * exps[slot]
        return ScalarPoly._wrap(self.ring, result)

    def antideriv_t(self, index, bar=False):
        """Antiderivative in t_index (or tbar_index) with zero constant; drops terms beyond the cap."""
        count = self.ring.n_tbar if bar else self.ring.n_t
        if not 1 <= index <= count:
            raise RingError(f"{'tbar' if bar else 't'}{index} is outside the ring ({count} variables)")
        slot = index - 1
        cap = self.ring.tbar_deg if bar else self.ring.t_deg
        result = {}
        for mono, coeff in self.terms.items():
            exps = mono.tbar if bar else mono.t
            if sum(exps) + 1 > cap:
                continue
            raised = exps[:slot] + (exps[slot] + 1,) + exps[slot + 1:]
            key = Monomial(mono.t, raised, mono.u, mono.l) if bar else Monomial(raised, mono.tbar, mono.u, mono.l)
            result[key] = coeff / (exps[slot] + 1)
        return ScalarPoly._wrap(self.ring, result)

    def antideriv_s(self):
        """
        Canonical s-antiderivative.

        Uses ∫ u^q l^k ds = -∫ u^q l^k du with
        ∫ u^q l^k du = u^{q+1} l^k/(q+1) - k/(q+1) ∫ u^q l^{k-1} du for q != -1
        and ∫ u^{-1} l^k du = l^{k+1}/(k+1). Terms that are plain
        polynomials in s (l-free, natural u-power) are integrated from
        s = 0, so that the antiderivative of 1 is s = 1 - u.
        """
        result = {}

        def put(t, tbar, q, k, value):
            key = Monomial(t, tbar, normalize_exponent(q), k)
            result[key] = result.get(key, ZERO) + value

        for mono, coeff in self.terms.items():
            q, k = mono.u, mono.l
            if k == 0 and not isinstance(q, Fraction) and q >= 0:
                put(mono.t, mono.tbar, 0, 0, coeff / (q + 1))
                put(mono.t, mono.tbar, q + 1, 0, -coeff / (q + 1))
            elif q == -1:
                put(mono.t, mono.tbar, 0, k + 1, -coeff / (k + 1))
            else:
                factor = -coeff
                j = k
                while True:
                    put(mono.t, mono.tbar, q + 1, j, factor / (q + 1))
                    if j == 0:
                        break
                    factor = -factor * j / (q + 1)
                    j -= 1
        return ScalarPoly._wrap(self.ring, {m: c for m, c in result.items() if c})

    def exp_scalar(self):
        """
        exp of an element q*l + n with q rational and n nilpotent.

        Returns u^q * Σ n^k/k!, finite because every monomial of n has
        positive t- or tbar-degree.

        Raises:
        -------
        RingError
            If the time-free part is not a rational multiple of l
        """
        free, nilpotent = self.split_by_nilpotency()
        q = ZERO
        for mono, coeff in free.terms.items():
            if mono.l == 1 and mono.u == 0:
                q = coeff
            else:
                raise RingError(f"exp_scalar: {self.to_text()} has a time-free part outside Q*l")
        result = ScalarPoly.u_power(self.ring, q)
        if nilpotent.terms:
            power = ScalarPoly.one(self.ring)
            series = ScalarPoly.one(self.ring)
            k = 0
            while True:
                k += 1
                power = (power * nilpotent).scale(Fraction(1, k))
                if not power.terms:
                    break
                series = series + power
                if k > self.ring.t_deg + self.ring.tbar_deg + 1:
                    raise RingError("exp_scalar: nilpotent series did not terminate")
            result = result * series
        return result

    # rendering

    def to_text(self):
        items = [(coeff, _factor_text(m.t, m.tbar, m.u, m.l)) for m, coeff in self.sorted_terms()]
        return _terms_text(items)

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"ScalarPoly({self.to_text()})"

    def to_records(self):
        return [
            {"t": list(m.t), "tbar": list(m.tbar), "u": format_rational(m.u),
             "l": m.l, "c": format_rational(c)}
            for m, c in self.sorted_terms()
        ]

    @classmethod
    def from_records(cls, ring, records):
        terms = {}
        for record in records:
            key = (tuple(record["t"]), tuple(record["tbar"]), Fraction(record["u"]), record["l"])
            terms[key] = terms.get(key, ZERO) + Fraction(record["c"])
        return cls(ring, terms)


def multiply_terms(ring, left, right):
    """Product of two clean term dicts, truncated by the ring's degree caps."""
    if not left or not right:
        return {}
    t_cap, tbar_cap = ring.t_deg, ring.tbar_deg
    right_items = [(m, c, sum(m.t), sum(m.tbar)) for m, c in right.items()]
    result = {}
    for ma, ca in left.items():
        da, dba = sum(ma.t), sum(ma.tbar)
        for mb, cb, db, dbb in right_items:
            if da + db > t_cap or dba + dbb > tbar_cap:
                continue
            t = tuple(map(add, ma.t, mb.t)) if da and db else (ma.t if db == 0 else mb.t)
            tbar = tuple(map(add, ma.tbar, mb.tbar)) if dba and dbb else (ma.tbar if dbb == 0 else mb.tbar)
            key = Monomial(t, tbar, normalize_exponent(ma.u + mb.u), ma.l + mb.l)
            result[key] = result.get(key, ZERO) + ca * cb
    return {m: c for m, c in result.items() if c}


class DoubledMonomial(NamedTuple):
    """Shared time exponents with separate (u, l) and (u', l') exponents."""

    t: tuple
    tbar: tuple
    u: object
    l: int
    up: object
    lp: int


class DoubledScalar:
    """
    Element of the doubled ring, a function of (s, s').

    ``d_s`` acts on (u, l), ``d_sp`` on (u', l'); ``eval_diagonal``
    substitutes u' -> u, l' -> l.
    """

    __slots__ = ("ring", "terms")

    def __init__(self, ring, terms=None):
        self.ring = ring
        self.terms = {}
        for mono, coeff in (terms or {}).items():
            coeff = as_rational(coeff)
            mono = DoubledMonomial(tuple(mono[0]), tuple(mono[1]), normalize_exponent(mono[2]),
                                   mono[3], normalize_exponent(mono[4]), mono[5])
            if sum(mono.t) > ring.t_deg or sum(mono.tbar) > ring.tbar_deg or not coeff:
                continue
            self.terms[mono] = self.terms.get(mono, ZERO) + coeff
        self.terms = {m: c for m, c in self.terms.items() if c}

    @classmethod
    def _wrap(cls, ring, terms):
        obj = cls.__new__(cls)
        obj.ring = ring
        obj.terms = terms
        return obj

    @classmethod
    def zero(cls, ring):
        return cls._wrap(ring, {})

    @classmethod
    def from_unprimed(cls, poly):
        return cls._wrap(poly.ring, {DoubledMonomial(m.t, m.tbar, m.u, m.l, 0, 0): c
                                     for m, c in poly.terms.items()})

    @classmethod
    def from_primed(cls, poly):
        return cls._wrap(poly.ring, {DoubledMonomial(m.t, m.tbar, 0, 0, m.u, m.l): c
                                     for m, c in poly.terms.items()})

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, DoubledScalar):
            return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    __hash__ = None

    def __add__(self, other):
        if other.ring != self.ring:
            raise RingError(f"Mixed rings: {self.ring} vs {other.ring}")
        result = dict(self.terms)
        for mono, coeff in other.terms.items():
            value = result.get(mono, ZERO) + coeff
            if value:
                result[mono] = value
            else:
                result.pop(mono, None)
        return DoubledScalar._wrap(self.ring, result)

    def __neg__(self):
        return DoubledScalar._wrap(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor):
        factor = as_rational(factor)
        if not factor:
            return DoubledScalar.zero(self.ring)
        return DoubledScalar._wrap(self.ring, {m: c * factor for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        if other.ring != self.ring:
            raise RingError(f"Mixed rings: {self.ring} vs {other.ring}")
        t_cap, tbar_cap = self.ring.t_deg, self.ring.tbar_deg
        result = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                t = tuple(map(add, ma.t, mb.t))
                tbar = tuple(map(add, ma.tbar, mb.tbar))
                if sum(t) > t_cap or sum(tbar) > tbar_cap:
                    continue
                key = DoubledMonomial(t, tbar, normalize_exponent(ma.u + mb.u), ma.l + mb.l,
                                      normalize_exponent(ma.up + mb.up), ma.lp + mb.lp)
                result[key] = result.get(key, ZERO) + ca * cb
        return DoubledScalar._wrap(self.ring, {m: c for m, c in result.items() if c})

    def _derive(self, primed):
        result = {}
        for mono, coeff in self.terms.items():
            q, k = (mono.up, mono.lp) if primed else (mono.u, mono.l)
            for factor, new_k in ((q, k), (k, k - 1)):
                if not factor:
                    continue
                new_q = normalize_exponent(q - 1)
                if primed:
                    key = DoubledMonomial(mono.t, mono.tbar, mono.u, mono.l, new_q, new_k)
                else:
                    key = DoubledMonomial(mono.t, mono.tbar, new_q, new_k, mono.up, mono.lp)
                result[key] = result.get(key, ZERO) - coeff * factor
        return DoubledScalar._wrap(self.ring, {m: c for m, c in result.items() if c})

    def d_s(self):
        return self._derive(primed=False)

    def d_sp(self):
        return self._derive(primed=True)

    def depends_on_primed(self):
        return any(m.up or m.lp for m in self.terms)

    def eval_diagonal(self):
        """Substitute u' -> u and l' -> l."""
        result = {}
        for mono, coeff in self.terms.items():
            key = Monomial(mono.t, mono.tbar, normalize_exponent(mono.u + mono.up), mono.l + mono.lp)
            result[key] = result.get(key, ZERO) + coeff
        return ScalarPoly._wrap(self.ring, {m: c for m, c in result.items() if c})

    def to_text(self):
        items = []
        for mono, coeff in sorted(self.terms.items(),
                                  key=lambda item: (item[0].t, item[0].tbar, Fraction(item[0].u),
                                                    item[0].l, Fraction(item[0].up), item[0].lp)):
            factors = _factor_text(mono.t, mono.tbar, mono.u, mono.l)
            factors += [f.replace("u", "u'").replace("l", "l'") for f in _factor_text((), (), mono.up, mono.lp)]
            items.append((coeff, factors))
        return _terms_text(items)

    def __repr__(self):
        return f"DoubledScalar({self.to_text()})"
