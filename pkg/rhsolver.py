"""
Order-by-order solution of the Riemann-Hilbert problem for the dressing
data (X, X̄, φ).

Given RH data (f, g, f̄, ḡ) and a dispersionless seed (X0, X̄0, φ0), each
order i conjugates the time-evolved data with the dressing known so far,
solves the linearised 2x2 system for -X̃_i + φ_i + X̄̃_i by integrating
in ξ and in s, and maps the tilde symbols back through the Bernoulli
series.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from adjoint import (BAR, DEFAULT_MAX_ITERATIONS, UNBAR, conj_by_phi, exp_ad, tilde_inverse,
                     time_conjugate, untilde_bar)
from errors import (CheckReport, CompatibilityError, ConfigError, InductionError, SeedError,
                    SymbolError, WindowExhausted)
from scalars import ScalarPoly
from symbols import (Chart, HSymbol, Part, commutator, invert, pointwise_product, poisson, project,
                     xi_antiderivative)


@dataclass
class RHData:
    """
    RH quadruplet and dispersionless seed.

    f, g, fbar, gbar are symbols of ℏ-order 0; seed_x0 and seed_xbar0 are
    n_hbar = 0 slices, seed_phi0 a scalar.
    """

    f: HSymbol
    g: HSymbol
    fbar: HSymbol
    gbar: HSymbol
    seed_x0: HSymbol
    seed_xbar0: HSymbol
    seed_phi0: ScalarPoly
    name: str = "custom"

    @property
    def trunc(self):
        return self.f.trunc

    def on(self, trunc):
        """The same data over another truncation with the same ring."""
        slice_trunc = trunc.with_hbar(0)
        return RHData(self.f.retruncate(trunc), self.g.retruncate(trunc),
                      self.fbar.retruncate(trunc), self.gbar.retruncate(trunc),
                      self.seed_x0.retruncate(slice_trunc), self.seed_xbar0.retruncate(slice_trunc),
                      self.seed_phi0, self.name)

    def check_canonical(self):
        """[f, g] = ℏf and [f̄, ḡ] = ℏf̄ on the stored window."""
        hbar = HSymbol.hbar(self.trunc)
        for label, p, q in (("f,g", self.f, self.g), ("fbar,gbar", self.fbar, self.gbar)):
            residual = commutator(p, q) - pointwise_product(hbar, p)
            if not residual.is_zero():
                raise ConfigError(f"RH data ({label}) is not canonically commuting: [{label}] - hbar*{label.split(',')[0]} = {residual.to_text()}")


@dataclass
class DressingTriple:
    """
    Solution state by ℏ-order.

    ``X[n]`` and ``Xbar[n]`` are n_hbar = 0 slices (ξ-exponents <= -1 and
    >= 1 respectively; the log ξ slot of ``Xbar[n]`` holds ᾱ_n), ``phi[n]``
    are scalars. ``working`` is the padded truncation used while solving.
    """

    trunc: object
    X: list = field(default_factory=list)
    Xbar: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    alphabar: list = field(default_factory=list)
    working: object = None

    @property
    def order(self):
        return len(self.phi) - 1

    def x_symbol(self, trunc=None):
        """X = Σ ℏ^n X_n over ``trunc`` (defaults to the triple's truncation)."""
        trunc = trunc or self.trunc
        total = HSymbol.zero(trunc)
        for n, piece in enumerate(self.X[:trunc.n_hbar + 1]):
            total = total + HSymbol.embed(piece.retruncate(trunc.with_hbar(0)), n, trunc)
        return total

    def xbar_symbol(self, trunc=None):
        """X̄ = Σ ℏ^n X̄_n including the log ξ slots ᾱ_n."""
        trunc = trunc or self.trunc
        total = HSymbol.zero(trunc)
        for n, piece in enumerate(self.Xbar[:trunc.n_hbar + 1]):
            total = total + HSymbol.embed(piece.retruncate(trunc.with_hbar(0)), n, trunc)
        return total

    def phi_series(self, n_max=None):
        return list(self.phi if n_max is None else self.phi[:n_max + 1])

    def truncated(self, n_max):
        """The triple restricted to ℏ-orders 0..n_max."""
        return DressingTriple(self.trunc.with_hbar(n_max), self.X[:n_max + 1], self.Xbar[:n_max + 1],
                              self.phi[:n_max + 1], self.alpha[:n_max + 1], self.alphabar[:n_max + 1],
                              self.working)


@dataclass
class IterationState:
    """P^{(i-1)}, Q^{(i-1)}, P̄^{(i-1)}, Q̄^{(i-1)} over a truncation with n_hbar = i."""

    i: int
    P: HSymbol
    Q: HSymbol
    Pbar: HSymbol
    Qbar: HSymbol

    def slices(self, order):
        return (self.P.slice(order), self.Q.slice(order), self.Pbar.slice(order), self.Qbar.slice(order))


def compare_symbols(name, left, right, orders=None):
    """
    Coefficientwise comparison on the common validity range.

    Returns:
    --------
    CheckReport
        ``checked`` counts compared (order, exponent) positions
    """
    difference = left - right
    trunc = difference.trunc
    orders = range(trunc.n_hbar + 1) if orders is None else orders
    lo = trunc.xi_lo if difference.valid_lo is None else max(difference.valid_lo, trunc.xi_lo)
    hi = trunc.xi_hi if difference.valid_hi is None else min(difference.valid_hi, trunc.xi_hi)
    width = max(0, hi - lo + 1)
    residuals = []
    for n in orders:
        for m in sorted(difference.orders[n]):
            residuals.append(f"hbar^{n} xi^{m}: {difference.orders[n][m].to_text()}")
        if difference.logxi[n]:
            residuals.append(f"hbar^{n} logxi: {difference.logxi[n]}")
    return CheckReport(name, not residuals, width * len(orders), residuals,
                       f"window [{lo}, {hi}]")


def dressed_pair(data, X, Xbar, phi, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    P = Ad(e^{X/ℏ}) f_t, Q likewise with g_t, and the bar pair
    P̄ = Ad(e^{φ/ℏ}) Ad(e^{X̄/ℏ}) f̄_t̄, Q̄ likewise with ḡ_t̄.
    """
    f_t = time_conjugate(data.f, UNBAR, max_iterations)
    g_t = time_conjugate(data.g, UNBAR, max_iterations)
    fbar_t = time_conjugate(data.fbar, BAR, max_iterations)
    gbar_t = time_conjugate(data.gbar, BAR, max_iterations)
    P = exp_ad(X, f_t, max_iterations)
    Q = exp_ad(X, g_t, max_iterations)
    Pbar = conj_by_phi(phi, exp_ad(Xbar, fbar_t, max_iterations))
    Qbar = conj_by_phi(phi, exp_ad(Xbar, gbar_t, max_iterations))
    return P, Q, Pbar, Qbar


def verify_seed(data, trunc, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Dispersionless RH equalities e^{ad X0}(f_t, g_t) = e^{ad φ0} e^{ad X̄0}(f̄_t̄, ḡ_t̄).

    At n_hbar = 0 every ℏ-bracket is the Poisson bracket, so the check runs
    the full adjoint machinery on order-0 truncations.

    Returns:
    --------
    list of CheckReport
        One report for the P pair and one for the Q pair
    """
    order0 = trunc.with_hbar(0)
    data0 = data.on(order0)
    P, Q, Pbar, Qbar = dressed_pair(data0, data0.seed_x0, data0.seed_xbar0, [data0.seed_phi0], max_iterations)
    reports = [compare_symbols("seed: sym(P) = sym(Pbar)", P, Pbar),
               compare_symbols("seed: sym(Q) = sym(Qbar)", Q, Qbar)]
    for report in reports:
        logging.debug(report.summary())
    return reports


def build_PQ(data, triple, i, trunc, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Step 1 at order i over ``trunc`` (whose n_hbar is set to i).

    Raises:
    -------
    InductionError
        If P_j != P̄_j or Q_j != Q̄_j for some j < i
    """
    work = trunc.with_hbar(i)
    data_i = data.on(work)
    X = triple.x_symbol(work)
    Xbar = triple.xbar_symbol(work)
    phi = triple.phi_series(i - 1)
    P, Q, Pbar, Qbar = dressed_pair(data_i, X, Xbar, phi, max_iterations)
    for label, left, right in (("P", P, Pbar), ("Q", Q, Qbar)):
        report = compare_symbols(f"order {i}: {label}_j = {label}bar_j for j < {i}", left, right, range(i))
        if not report.passed:
            raise InductionError(f"Induction hypothesis fails at order {i} for {label}", report)
    logging.debug(f"build_PQ: order {i} P validity [{P.valid_lo}, {P.valid_hi}], "
                  f"Pbar validity [{Pbar.valid_lo}, {Pbar.valid_hi}]")
    return IterationState(i, P, Q, Pbar, Qbar)


def _bracket_combination(p0, q0, pi, qi):
    return -pi + poisson(pi, q0) + poisson(p0, qi)


def check_compatibility(state):
    """
    -𝓟_i + {𝓟_i, 𝓠0} + {𝓟0, 𝓠_i} must agree with its bar counterpart.

    The common factor 𝓟0^{-1}ξ^{-1} of both sides is left out.
    """
    i = state.i
    p0, q0, pbar0, qbar0 = state.slices(0)
    pi, qi, pbar_i, qbar_i = state.slices(i)
    left = _bracket_combination(p0, q0, pi, qi)
    right = _bracket_combination(pbar0, qbar0, pbar_i, qbar_i)
    report = compare_symbols(f"order {i}: compatibility", left, right)
    logging.debug(report.summary())
    return report


def _rows(p0, q0, pi, qi, chart):
    """𝓟0^{-1}(-∂𝓠0 𝓟_i + ∂𝓟0 𝓠_i) for ∂ = ∂ξ and ∂ = ∂s."""
    inverse = invert(p0, chart)
    row_xi = pointwise_product(inverse, pointwise_product(p0.d_xi(), qi) - pointwise_product(q0.d_xi(), pi))
    row_s = pointwise_product(inverse, pointwise_product(p0.d_s(), qi) - pointwise_product(q0.d_s(), pi))
    return row_xi, row_s


@dataclass
class TildeStep:
    """Output of the integration step at one order."""

    tilde_x: HSymbol
    phi: ScalarPoly
    tilde_xbar: HSymbol
    alphabar: Fraction


def integrate_step(state):
    """
    Step 2: determine -X̃_i + φ_i + X̄̃_i from both rows of the linear system.

    The ξ-row integrated in ξ fixes every ξ^m (m != 0) and the log ξ
    coefficient; the s-row at ξ^0 integrated in s fixes φ_i. The
    s-derivative of the ξ-integral must reproduce the s-row away from ξ^0.

    Raises:
    -------
    CompatibilityError
        If the two integrals disagree
    WindowExhausted
        If the ξ^0 coefficient is not determined by the working window
    """
    i = state.i
    p0, q0, pbar0, qbar0 = state.slices(0)
    pi, qi, pbar_i, qbar_i = state.slices(i)
    row_xi, row_s = _rows(p0, q0, pi, qi, Chart.AT_INFINITY)
    bar_xi, bar_s = _rows(pbar0, qbar0, pbar_i, qbar_i, Chart.AT_ZERO)
    row_xi = row_xi - bar_xi
    row_s = row_s - bar_s
    integral, alphabar = xi_antiderivative(row_xi)
    if integral.valid_lo is not None and integral.valid_lo > 0 or \
            integral.valid_hi is not None and integral.valid_hi < 0:
        raise WindowExhausted(f"Order {i}: the ξ^0 coefficient lies outside the working window "
                              f"[{integral.valid_lo}, {integral.valid_hi}]", "increase --window-pad")
    away = HSymbol(row_s.trunc, [{m: c for m, c in row_s.orders[0].items() if m != 0}],
                   None, row_s.valid_lo, row_s.valid_hi)
    cross = compare_symbols(f"order {i}: d/ds of xi-integral = s-row", integral.d_s(), away)
    if not cross.passed:
        raise CompatibilityError(f"Order {i}: the ξ- and s-integrals disagree", cross)
    phi_i = row_s.coefficient(0, 0).antideriv_s()
    tilde_x = -project(integral, Part.LEQ_MINUS_ONE)
    positive = HSymbol(integral.trunc, [{m: c for m, c in integral.orders[0].items() if m > 0}],
                       [alphabar], integral.valid_lo if integral.valid_lo is not None and integral.valid_lo > 0 else None,
                       integral.valid_hi)
    logging.debug(f"integrate_step: order {i} log coefficient {alphabar}, phi_{i} = {phi_i.to_text()}")
    return TildeStep(tilde_x, phi_i, positive, alphabar)


def untilde_step(step, seed_x0, seed_xbar0, seed_phi0, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Step 3: X_i from X̃_i and X̄_i from X̄̃_i.

    Returns:
    --------
    tuple
        (X_i slice, X̄_i slice, φ_i) where φ_i absorbs any ξ^0 term
        released by the bar inverse map
    """
    x_i = tilde_inverse(step.tilde_x, seed_x0, UNBAR, None, max_iterations)
    xbar_i, constant = untilde_bar(step.tilde_xbar, seed_xbar0, seed_phi0, max_iterations)
    return x_i, xbar_i, step.phi + constant


def default_window_pad(data, trunc):
    """
    Automatic (pad_lo, pad_hi) for the working window.

    Every order loses roughly twice the ξ-reach of the time-evolved data
    (plus a few exponents for inversion and integration) from the
    truncated tail of each side.
    """
    ring = trunc.ring
    reach = max(data.f.top() or 0, data.g.top() or 0, 0) + (ring.n_t if ring.t_deg else 0)
    reach_bar = max(-(data.fbar.bottom() or 0), -(data.gbar.bottom() or 0), 0) + \
        (ring.n_tbar if ring.tbar_deg else 0)
    n = max(trunc.n_hbar, 1)
    return n * (2 * reach + 4) + 2, n * (2 * reach_bar + 4) + 2


def _trim(piece, trunc, side, order):
    """Cut a working-window slice down to the requested window."""
    target = trunc.with_hbar(0)
    if side == UNBAR:
        if piece.valid_lo is not None and piece.valid_lo > trunc.xi_lo:
            raise WindowExhausted(
                f"X_{order} is only determined down to ξ^{piece.valid_lo}, requested ξ^{trunc.xi_lo}",
                f"increase --window-pad by at least {piece.valid_lo - trunc.xi_lo}")
        restricted = piece.restrict(lo=None if piece.valid_lo is None else trunc.xi_lo)
    else:
        if piece.valid_hi is not None and piece.valid_hi < trunc.xi_hi:
            raise WindowExhausted(
                f"Xbar_{order} is only determined up to ξ^{piece.valid_hi}, requested ξ^{trunc.xi_hi}",
                f"increase --window-pad by at least {trunc.xi_hi - piece.valid_hi}")
        restricted = piece.restrict(hi=None if piece.valid_hi is None else trunc.xi_hi)
    return restricted.retruncate(target)


def run(data, trunc, window_pad=None, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Solve for X_i, X̄_i, φ_i, i = 1..n_hbar.

    Parameters:
    -----------
    data : RHData
        RH data and seed over ``trunc``
    trunc : Truncation
        Requested truncation
    window_pad : tuple of int, optional
        (pad_lo, pad_hi) override for the working window
    max_iterations : int
        Guard for every terminating series

    Returns:
    --------
    DressingTriple
        Trimmed to the requested window
    """
    if window_pad is None:
        window_pad = default_window_pad(data, trunc)
    pad_lo, pad_hi = window_pad
    working = trunc.widened(pad_lo, pad_hi)
    logging.info(f"Solving '{data.name}' to order {trunc.n_hbar} on window [{trunc.xi_lo}, {trunc.xi_hi}] "
                 f"(working window [{working.xi_lo}, {working.xi_hi}])")
    data_w = data.on(working)
    data_w.check_canonical()

    reports = verify_seed(data_w, working, max_iterations)
    for report in reports:
        if not report.passed:
            raise SeedError("The dispersionless seed does not solve the RH problem", report)

    slice_trunc = working.with_hbar(0)
    triple = DressingTriple(working, [data_w.seed_x0], [data_w.seed_xbar0], [data_w.seed_phi0],
                            [Fraction(0)], [data_w.seed_xbar0.logxi[0]], working)
    for i in range(1, trunc.n_hbar + 1):
        try:
            state = build_PQ(data_w, triple, i, working, max_iterations)
            report = check_compatibility(state)
            if not report.passed:
                raise CompatibilityError(f"Order {i}: the linear system is incompatible", report)
            step = integrate_step(state)
            x_i, xbar_i, phi_i = untilde_step(step, data_w.seed_x0, data_w.seed_xbar0, data_w.seed_phi0,
                                              max_iterations)
        except SymbolError as exc:
            raise SymbolError(f"Order {i}: {exc}") from exc
        triple.X.append(x_i.retruncate(slice_trunc))
        triple.Xbar.append(xbar_i.retruncate(slice_trunc))
        triple.phi.append(phi_i)
        triple.alpha.append(Fraction(0))
        triple.alphabar.append(step.alphabar)
        logging.info(f"Order {i} solved: phi_{i} = {phi_i.to_text()}, alphabar_{i} = {step.alphabar}")

    final = build_PQ(data_w, triple, trunc.n_hbar + 1, working, max_iterations)
    logging.debug(f"Final RH check passed through order {final.i - 1}")

    result = DressingTriple(trunc, working=working)
    for n in range(trunc.n_hbar + 1):
        result.X.append(_trim(triple.X[n], trunc, UNBAR, n))
        result.Xbar.append(_trim(triple.Xbar[n], trunc, BAR, n))
        result.phi.append(triple.phi[n])
        result.alpha.append(triple.alpha[n])
        result.alphabar.append(triple.alphabar[n])
    return result
