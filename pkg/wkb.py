"""
Conversions between exponential dressing operators and WKB phases.

The total symbol of e^{X/ℏ} is written e^{S/ℏ}; ``exp_to_wkb`` computes
S_n from X_0..X_n through the Y/S recursion on the doubled ring and
``wkb_to_exp`` inverts it degree by degree in ξ. The bar side runs the
same recursions with ξ-degrees counted positively, and its phase
S̄ = φ + S(X̄) carries φ_n in the ξ^0 slot.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from adjoint import BAR, UNBAR
from errors import InvariantError, SymbolError
from symbols import BivarSymbol, HSymbol


@dataclass
class WKBPhase:
    """
    S = Σ ℏ^n S_n, one n_hbar = 0 slice per ℏ-order.

    Unbar slices live on ξ^{<=-1}; bar slices on ξ^{>=0} with φ_n at ξ^0.
    ``alphabar`` holds the log ξ coefficients of X̄, reported separately.
    """

    side: str
    S: list
    alphabar: list = field(default_factory=list)

    @property
    def order(self):
        return len(self.S) - 1

    def phi(self):
        """ξ^0 coefficients of the bar phase."""
        return [piece.coefficient(0, 0) for piece in self.S]

    def to_record(self):
        return {
            "side": self.side,
            "S": [piece.to_record() for piece in self.S],
            "alphabar": [str(a) for a in self.alphabar],
        }


def _direction(side):
    if side == UNBAR:
        return -1
    if side == BAR:
        return 1
    raise SymbolError(f"Unknown side {side!r}")


def _depth(trunc, sign):
    return -trunc.xi_lo if sign < 0 else trunc.xi_hi


def _check_support(pieces, sign, what):
    for n, piece in enumerate(pieces):
        if piece.has_log():
            raise SymbolError(f"{what}_{n} carries a log ξ slot")
        for m in piece.orders[0]:
            if m * sign <= 0:
                raise SymbolError(f"{what}_{n} has ξ^{m} outside its side of the window")


def _validity(pieces, sign):
    """Validity of an output slice built from ``pieces`` (monotone in degree)."""
    if sign < 0:
        bounds = [p.valid_lo for p in pieces if p.valid_lo is not None]
        return (max(bounds) if bounds else None), None
    bounds = [p.valid_hi for p in pieces if p.valid_hi is not None]
    return None, (min(bounds) if bounds else None)


def _degree_bound(piece, l, sign, label):
    for degree in piece.joint_degrees():
        if degree * sign < l + 1:
            raise InvariantError(f"{label} has joint ξ-degree {degree}, expected |degree| >= {l + 1}")


def exp_to_wkb(xs, side=UNBAR, check_invariants=True):
    """
    S_n from X_0..X_n.

    Y^{(l)}_{0,m} = δ_{l,0} X_m, and
    Y^{(l)}_{k+1,m} = 1/(k+1) [ξ∂ξ ∂s' Y^{(l)}_{k,m-1}
                       + Σ_{l'<l, m'<=m} ξ∂ξ Y^{(l')}_{k,m'} ∂s' S^{(l-l')}_{m-m'}(s', ξ')],
    S^{(l+1)}_m = 1/(l+1) Σ_{k<=l+m} Y^{(l)}_{k,m}(s, s, ξ, ξ), S_n = Σ_l S^{(l)}_n.

    Parameters:
    -----------
    xs : list of HSymbol
        Slices X_0..X_n with support on one side of ξ^0
    side : str
        UNBAR (ξ-degrees <= -1) or BAR (ξ-degrees >= 1)
    check_invariants : bool
        Assert Y^{(l)}_{l+m+1,m} = 0 and the joint-degree bound at every step

    Returns:
    --------
    list of HSymbol
        Slices S_0..S_n
    """
    sign = _direction(side)
    _check_support(xs, sign, "X")
    trunc = xs[0].trunc
    n_max = len(xs) - 1
    depth = _depth(trunc, sign)
    Y = {}
    dS = {}
    totals = [HSymbol.zero(trunc) for _ in xs]
    for l in range(depth + 1):
        for m in range(n_max + 1):
            Y[(l, 0, m)] = BivarSymbol.from_unprimed(xs[m]) if l == 0 else BivarSymbol.zero(trunc)
            top = l + m + 1 if check_invariants else l + m
            for k in range(top):
                acc = BivarSymbol.zero(trunc)
                previous = Y.get((l, k, m - 1))
                if previous:
                    acc = acc + previous.d_sp().xi_euler()
                for lp in range(l):
                    for mp in range(m + 1):
                        y = Y.get((lp, k, mp))
                        derivative = dS.get((l - lp, m - mp))
                        if y and derivative:
                            acc = acc + y.xi_euler() * derivative
                Y[(l, k + 1, m)] = acc.scale(Fraction(1, k + 1))
            if check_invariants:
                if Y.pop((l, l + m + 1, m)):
                    raise InvariantError(f"Y^({l})_({l + m + 1},{m}) does not vanish")
                for k in range(l + m + 1):
                    _degree_bound(Y[(l, k, m)], l, sign, f"Y^({l})_({k},{m})")
            part = BivarSymbol.zero(trunc)
            for k in range(l + m + 1):
                part = part + Y[(l, k, m)]
            s_part = part.eval_diagonal().scale(Fraction(1, l + 1))
            dS[(l + 1, m)] = BivarSymbol.from_primed(s_part.d_s())
            totals[m] = totals[m] + s_part
    lo, hi = _validity(xs, sign)
    logging.debug(f"exp_to_wkb: {side} side, {len(Y)} recursion cells, depth {depth}")
    return [HSymbol(trunc, list(total.orders), None, lo, hi) for total in totals]


def _homogeneous(piece, degree):
    coeff = piece.coefficient(0, degree)
    return HSymbol.from_coefficient(piece.trunc, degree, coeff)


def wkb_to_exp(ss, side=UNBAR, check_invariants=True):
    """
    X_n from S_0..S_n, degree by degree in ξ.

    With S_m = Σ_j S_{m,j} (S_{m,j} homogeneous of degree ∓j):
    Y^{(l)}_{k,m,1} = δ_{l,0} δ_{k,0} S_{m,1}, Y^{(l)}_{0,m,j} = 0 for l > 0,
    Y^{(l)}_{k+1,m,j} = 1/(k+1) [ξ∂ξ ∂s' Y^{(l)}_{k,m-1,j}
        + Σ 1/(l-l') ξ∂ξ Y^{(l')}_{k,m',j'} ∂s' Y^{(l-l'-1)}_{k'',m-m',j-j'}(s', s', ξ', ξ')],
    Y^{(0)}_{0,m,j} = S_{m,j} - Σ_{(l,k)!=(0,0)} 1/(l+1) Y^{(l)}_{k,m,j}(s, s, ξ, ξ),
    and X_n = Σ_j Y^{(0)}_{0,n,j}.
    """
    sign = _direction(side)
    _check_support(ss, sign, "S")
    trunc = ss[0].trunc
    n_max = len(ss) - 1
    depth = _depth(trunc, sign)
    Y = {}
    primed = {}

    def primed_derivative(key):
        if key not in primed:
            cell = Y.get(key)
            primed[key] = BivarSymbol.from_primed(cell.eval_diagonal().d_s()) if cell else None
        return primed[key]

    xs = [HSymbol.zero(trunc) for _ in ss]
    for j in range(1, depth + 1):
        for m in range(n_max + 1):
            target = _homogeneous(ss[m], sign * j)
            if j == 1:
                Y[(0, 0, m, 1)] = BivarSymbol.from_unprimed(target)
                xs[m] = xs[m] + target
                continue
            correction = HSymbol.zero(trunc)
            for l in range(1, j):
                for k in range(l + m):
                    acc = BivarSymbol.zero(trunc)
                    previous = Y.get((l, k, m - 1, j))
                    if previous:
                        acc = acc + previous.d_sp().xi_euler()
                    for lp in range(l):
                        for jp in range(1, j):
                            for mp in range(m + 1):
                                y = Y.get((lp, k, mp, jp))
                                if not y:
                                    continue
                                lifted = y.xi_euler()
                                for kpp in range(l - lp + m - mp):
                                    derivative = primed_derivative((l - lp - 1, kpp, m - mp, j - jp))
                                    if derivative:
                                        acc = acc + (lifted * derivative).scale(Fraction(1, l - lp))
                    cell = acc.scale(Fraction(1, k + 1))
                    if cell:
                        Y[(l, k + 1, m, j)] = cell
                        correction = correction + cell.eval_diagonal().scale(Fraction(1, l + 1))
            closing = target - correction
            if check_invariants:
                stray = [d for d in closing.orders[0] if d != sign * j]
                if stray:
                    raise InvariantError(f"Y^(0)_(0,{m},{j}) is not homogeneous of degree {sign * j}: {stray}")
            if closing.has_content():
                Y[(0, 0, m, j)] = BivarSymbol.from_unprimed(closing)
            xs[m] = xs[m] + closing
    if check_invariants:
        for (l, k, m, j), cell in Y.items():
            if k > l + m or (l and j <= l):
                raise InvariantError(f"Y^({l})_({k},{m},{j}) should vanish")
            if cell.depends_on_primed() and (l, k) == (0, 0):
                raise InvariantError(f"Y^(0)_(0,{m},{j}) depends on the primed variables")
    lo, hi = _validity(ss, sign)
    logging.debug(f"wkb_to_exp: {side} side, {len(Y)} recursion cells")
    return [HSymbol(trunc, list(x.orders), None, lo, hi) for x in xs]


def exp_to_wkb_bar(xbars, phi, alphabar=None, check_invariants=True):
    """
    Bar phase S̄_n = φ_n + S(X̄)_n; the log ξ slots of X̄ are reported, not exponentiated.
    """
    plain = [piece.drop_log() for piece in xbars]
    phases = exp_to_wkb(plain, BAR, check_invariants)
    result = []
    for n, phase in enumerate(phases):
        if phi[n]:
            phase = phase + HSymbol.scalar(phase.trunc, phi[n])
        result.append(phase)
    for n, phase in enumerate(result):
        if phase.coefficient(0, 0) != phi[n]:
            raise InvariantError(f"Sbar_{n} at ξ^0 differs from phi_{n}")
    if alphabar is None:
        alphabar = [piece.logxi[0] for piece in xbars]
    return WKBPhase(BAR, result, list(alphabar))


def wkb_bar_to_exp(phase, check_invariants=True):
    """Inverse of ``exp_to_wkb_bar``: returns (X̄ slices with log slots restored, φ list)."""
    phi = phase.phi()
    stripped = [piece - HSymbol.scalar(piece.trunc, value) for piece, value in zip(phase.S, phi)]
    xbars = wkb_to_exp(stripped, BAR, check_invariants)
    if phase.alphabar:
        xbars = [HSymbol(x.trunc, list(x.orders), [a], x.valid_lo, x.valid_hi)
                 for x, a in zip(xbars, phase.alphabar)]
    return xbars, phi


def triple_phases(triple, check_invariants=True):
    """(S, S̄) of a solved dressing triple."""
    unbar = WKBPhase(UNBAR, exp_to_wkb(triple.X, UNBAR, check_invariants))
    bar = exp_to_wkb_bar(triple.Xbar, triple.phi, triple.alphabar, check_invariants)
    logging.info(f"WKB phases computed through order {unbar.order}")
    return unbar, bar
