"""
Assembly of the ℏ-expansion log τ = Σ ℏ^{n-2} F_n.

The WKB phases are read off as v_{n,k}, v̄_{n,k} and φ_n, turned into the
gradients of F_n in t, t̄ and s, checked for cross-derivative equality and
integrated along s, then t_1, t_2, ..., then t̄_1, t̄_2, ....

Every gradient component records the t- and t̄-degrees through which it
is exact: a t-derivative of a truncated coefficient is only known one
degree below the cap.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from adjoint import bernoulli_K
from errors import CheckFailure, CheckReport, SymbolError
from scalars import Monomial, ScalarPoly


@dataclass
class TauTables:
    """
    v_{n,k}, v̄_{n,k} and φ_n by ℏ-order.

    S_n = -Σ_k v_{n,k}/k ξ^{-k} and S̄_n = φ_n + Σ_k v̄_{n,k}/k ξ^k;
    ``j_max`` and ``jbar_max`` are the largest k determined by the
    phases and present as time variables.
    """

    ring: object
    n_max: int
    v: dict = field(default_factory=dict)
    vbar: dict = field(default_factory=dict)
    phi: list = field(default_factory=list)
    j_max: int = 0
    jbar_max: int = 0

    def get_v(self, n, k):
        if n < 0:
            return ScalarPoly.zero(self.ring)
        return self.v.get((n, k), ScalarPoly.zero(self.ring))

    def get_vbar(self, n, k):
        if n < 0:
            return ScalarPoly.zero(self.ring)
        return self.vbar.get((n, k), ScalarPoly.zero(self.ring))

    def get_phi(self, n):
        if n < 0 or n >= len(self.phi):
            return ScalarPoly.zero(self.ring)
        return self.phi[n]

    def phase_coefficient(self, n, m):
        """Coefficient of ξ^m in S_n (m < 0) or S̄_n (m >= 0) rebuilt from the tables."""
        if m < 0:
            return self.get_v(n, -m).scale(Fraction(1, m))
        if m == 0:
            return self.get_phi(n)
        return self.get_vbar(n, m).scale(Fraction(1, m))


def _determined_depth(piece, bound, sign):
    """Largest k with ξ^{sign*k} inside both the window and the validity of ``piece``."""
    if sign < 0:
        limit = -piece.trunc.xi_lo if piece.valid_lo is None else min(-piece.trunc.xi_lo, -piece.valid_lo)
    else:
        limit = piece.trunc.xi_hi if piece.valid_hi is None else min(piece.trunc.xi_hi, piece.valid_hi)
    return max(0, min(bound, limit))


def extract_v(S, Sbar):
    """
    Read v_{n,k} = -k [ξ^{-k}]S_n, v̄_{n,k} = k [ξ^k]S̄_n and φ_n = [ξ^0]S̄_n.

    Parameters:
    -----------
    S : WKBPhase
        Unbar phase
    Sbar : WKBPhase
        Bar phase, φ_n in the ξ^0 slot

    Returns:
    --------
    TauTables
    """
    if len(S.S) != len(Sbar.S):
        raise SymbolError(f"Phases of different orders: {len(S.S) - 1} and {len(Sbar.S) - 1}")
    ring = S.S[0].ring
    j_max = min(_determined_depth(piece, ring.n_t, -1) for piece in S.S)
    jbar_max = min(_determined_depth(piece, ring.n_tbar, 1) for piece in Sbar.S)
    tables = TauTables(ring, len(S.S) - 1, j_max=j_max, jbar_max=jbar_max)
    for n, piece in enumerate(S.S):
        for k in range(1, -piece.trunc.xi_lo + 1):
            value = piece.coefficient(0, -k).scale(-k)
            if value:
                tables.v[(n, k)] = value
    for n, piece in enumerate(Sbar.S):
        for k in range(1, piece.trunc.xi_hi + 1):
            value = piece.coefficient(0, k).scale(k)
            if value:
                tables.vbar[(n, k)] = value
        tables.phi.append(piece.coefficient(0, 0))
    logging.debug(f"extract_v: {len(tables.v)} v and {len(tables.vbar)} vbar entries, "
                  f"t-range 1..{j_max}, tbar-range 1..{jbar_max}")
    return tables


def grad_t(tables, n, j):
    """∂F_n/∂t_j = v_{n,j} + Σ_{k+l=j} (1/l) ∂v_{n-1,l}/∂t_k."""
    result = tables.get_v(n, j)
    for k in range(1, j):
        l = j - k
        previous = tables.get_v(n - 1, l)
        if previous:
            result = result + previous.d_t(k).scale(Fraction(1, l))
    return result


def grad_tbar(tables, n, j):
    """
    -∂F_n/∂t̄_j = v̄_{n,j} + ∂φ_n/∂t̄_j + Σ_{k+l=j} (1/l) ∂v̄_{n-1,l}/∂t̄_k.

    Note the sign: the return value is minus the derivative of F_n.
    """
    result = tables.get_vbar(n, j) + tables.get_phi(n).d_t(j, bar=True)
    for k in range(1, j):
        l = j - k
        previous = tables.get_vbar(n - 1, l)
        if previous:
            result = result + previous.d_t(k, bar=True).scale(Fraction(1, l))
    return result


def grad_s(phi, n, table=None):
    """
    ∂F_n/∂s = φ_n - φ_{n-1}/2 + Σ_{p=1}^{[n/2]} K_{2p} φ_{n-2p}.

    Parameters:
    -----------
    phi : sequence of ScalarPoly
        φ_0..φ_n
    n : int
        ℏ-order
    table : BernoulliTable, optional
        Must cover p = n // 2; built on demand when omitted
    """
    if table is None or len(table) <= n // 2:
        table = bernoulli_K(max(n // 2, 1))
    result = phi[n]
    if n >= 1:
        result = result - phi[n - 1].scale(Fraction(1, 2))
    for p in range(1, n // 2 + 1):
        result = result + phi[n - 2 * p].scale(table[p])
    return result


@dataclass
class TauGradient:
    """
    Gradients of F_n for n = 0..n_max.

    ``dF_dtbar`` stores ∂F_n/∂t̄_j itself (the negative of ``grad_tbar``).
    ``exact`` maps a component key ("s", n), ("t", n, j) or ("tbar", n, j)
    to the (t-degree, t̄-degree) through which it is determined.
    """

    n_max: int
    ring: object
    dF_dt: dict = field(default_factory=dict)
    dF_dtbar: dict = field(default_factory=dict)
    dF_ds: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    j_max: int = 0
    jbar_max: int = 0

    def components(self, n):
        """(label, key, value, variable) for every component of F_n, in integration order."""
        items = [("s", ("s", n), self.dF_ds[n], None)]
        for j in range(1, self.j_max + 1):
            items.append((f"t{j}", ("t", n, j), self.dF_dt[(n, j)], (j, False)))
        for j in range(1, self.jbar_max + 1):
            items.append((f"tb{j}", ("tbar", n, j), self.dF_dtbar[(n, j)], (j, True)))
        return items

    @classmethod
    def zero(cls, ring, n_max, j_max=0, jbar_max=0):
        grad = cls(n_max, ring, j_max=j_max, jbar_max=jbar_max)
        full = (ring.t_deg, ring.tbar_deg)
        for n in range(n_max + 1):
            grad.dF_ds[n] = ScalarPoly.zero(ring)
            grad.exact[("s", n)] = full
            for j in range(1, j_max + 1):
                grad.dF_dt[(n, j)] = ScalarPoly.zero(ring)
                grad.exact[("t", n, j)] = full
            for j in range(1, jbar_max + 1):
                grad.dF_dtbar[(n, j)] = ScalarPoly.zero(ring)
                grad.exact[("tbar", n, j)] = full
        return grad


def tau_gradient(tables):
    """All gradient components for n = 0..n_max from the tables."""
    ring = tables.ring
    grad = TauGradient(tables.n_max, ring, j_max=tables.j_max, jbar_max=tables.jbar_max)
    table = bernoulli_K(max(tables.n_max // 2, 1))
    t_cap, tbar_cap = ring.t_deg, ring.tbar_deg
    for n in range(tables.n_max + 1):
        grad.dF_ds[n] = grad_s(tables.phi, n, table)
        grad.exact[("s", n)] = (t_cap, tbar_cap)
        for j in range(1, tables.j_max + 1):
            grad.dF_dt[(n, j)] = grad_t(tables, n, j)
            differentiated = n >= 1 and j >= 2
            grad.exact[("t", n, j)] = (t_cap - 1 if differentiated else t_cap, tbar_cap)
        for j in range(1, tables.jbar_max + 1):
            grad.dF_dtbar[(n, j)] = -grad_tbar(tables, n, j)
            grad.exact[("tbar", n, j)] = (t_cap, tbar_cap - 1)
    return grad


def _derivative(poly, variable):
    if variable is None:
        return poly.d_s()
    index, bar = variable
    return poly.d_t(index, bar=bar)


def _lowered(exact, variable):
    """Exactness of a derivative: t- or t̄-derivatives lose one degree."""
    t_exact, tbar_exact = exact
    if variable is None:
        return exact
    if variable[1]:
        return t_exact, tbar_exact - 1
    return t_exact - 1, tbar_exact


def _drop_constant(poly):
    unit = Monomial(poly.ring.zero_t, poly.ring.zero_tbar, 0, 0)
    if unit in poly.terms:
        return poly - ScalarPoly.constant(poly.ring, poly.terms[unit])
    return poly


def _residual_lines(poly, label):
    return [f"{label}: {poly.to_text()}"] if poly else []


def check_cross_derivatives(grad, n):
    """
    ∂_a(∂F_n/∂b) = ∂_b(∂F_n/∂a) for every pair of gradient components,
    compared on the degrees both sides determine.

    Returns:
    --------
    tuple
        (CheckReport, first offending pair or None)
    """
    items = grad.components(n)
    residuals = []
    checked = unchecked = 0
    offending = None
    for i, (label_a, key_a, value_a, var_a) in enumerate(items):
        for label_b, key_b, value_b, var_b in items[:i]:
            left = _derivative(value_a, var_b)
            right = _derivative(value_b, var_a)
            exact_l = _lowered(grad.exact[key_a], var_b)
            exact_r = _lowered(grad.exact[key_b], var_a)
            max_t = min(exact_l[0], exact_r[0])
            max_tbar = min(exact_l[1], exact_r[1])
            if max_t < 0 or max_tbar < 0:
                unchecked += 1
                continue
            checked += 1
            difference = (left - right).truncate_degree(max_t, max_tbar)
            if difference:
                residuals.extend(_residual_lines(difference, f"F_{n} ({label_a}, {label_b})"))
                if offending is None:
                    offending = (label_a, label_b)
    detail = f"{checked} pairs compared, {unchecked} undetermined"
    if unchecked:
        logging.warning(f"F_{n}: {unchecked} cross-derivative pairs have no determined coefficients")
    return CheckReport(f"F_{n}: cross-derivatives", not residuals, checked, residuals, detail), offending


@dataclass
class TauExpansion:
    """F_n by ℏ-order, each normalized to a vanishing constant term."""

    F: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)

    @property
    def n_max(self):
        return max(self.F, default=-1)

    def to_record(self):
        return {
            "F": {str(n): poly.to_records() for n, poly in sorted(self.F.items())},
            "text": {str(n): poly.to_text() for n, poly in sorted(self.F.items())},
            "checks": [report.summary() for report in self.reports],
        }


def _integrate(grad, n):
    """Path integral of the gradient: s first, then t_1, t_2, ..., then t̄."""
    F = grad.dF_ds[n].antideriv_s()
    for label, key, value, variable in grad.components(n)[1:]:
        index, bar = variable
        residual = value - F.d_t(index, bar=bar)
        F = F + residual.antideriv_t(index, bar=bar)
    return _drop_constant(F)


def check_gradient(F, grad, n):
    """d_s F_n and d_t F_n reproduce the gradient on its determined degrees."""
    residuals = []
    checked = 0
    for label, key, value, variable in grad.components(n):
        derivative = _derivative(F, variable)
        own = _lowered((grad.ring.t_deg, grad.ring.tbar_deg), variable)
        max_t = min(grad.exact[key][0], own[0])
        max_tbar = min(grad.exact[key][1], own[1])
        if max_t < 0 or max_tbar < 0:
            continue
        checked += 1
        difference = (derivative - value).truncate_degree(max_t, max_tbar)
        residuals.extend(_residual_lines(difference, f"dF_{n}/d{label}"))
    return CheckReport(f"F_{n}: gradient reproduced", not residuals, checked, residuals)


def integrate_F(grad, trunc=None):
    """
    Integrate the gradients to F_0..F_n_max.

    Parameters:
    -----------
    grad : TauGradient
        Gradients from ``tau_gradient`` (or built by hand)
    trunc : Truncation, optional
        Only used for logging the covered window

    Returns:
    --------
    TauExpansion

    Raises:
    -------
    CheckFailure
        On a cross-derivative mismatch, naming the offending pair
    """
    expansion = TauExpansion()
    for n in range(grad.n_max + 1):
        report, offending = check_cross_derivatives(grad, n)
        expansion.reports.append(report)
        if not report.passed:
            raise CheckFailure(f"Cross-derivative mismatch for F_{n} on the pair ({offending[0]}, {offending[1]})",
                               report)
        F = _integrate(grad, n)
        reproduced = check_gradient(F, grad, n)
        expansion.reports.append(reproduced)
        if not reproduced.passed:
            raise CheckFailure(f"F_{n} does not reproduce its gradient", reproduced)
        expansion.F[n] = F
        logging.info(f"F_{n} integrated ({len(F)} terms)")
    if trunc is not None:
        logging.debug(f"integrate_F: window {trunc.describe()}, t-range 1..{grad.j_max}, "
                      f"tbar-range 1..{grad.jbar_max}")
    return expansion


def check_difference_relation(expansion, phi):
    """
    Σ_{m=1}^{n+1} (1/m!) d_s^m F_{n+1-m} = φ_n for every integrated order.

    Only s-derivatives of F enter, so the s-independent part left open by
    the integration path plays no role.
    """
    residuals = []
    checked = 0
    for n in range(expansion.n_max + 1):
        total = ScalarPoly.zero(phi[n].ring)
        for m in range(1, n + 2):
            total = total + expansion.F[n + 1 - m].d_s_power(m).scale(Fraction(1, factorial(m)))
        difference = total - phi[n]
        checked += 1
        residuals.extend(_residual_lines(difference, f"row {n}"))
    report = CheckReport("tau: difference relation", not residuals, checked, residuals)
    logging.debug(report.summary())
    return report


def genus_parity_check(tables):
    """
    Whether log τ is even in ℏ through the computed order.

    For every odd order 2m+1 <= n_max the t-, t̄- and s-gradients of
    F_{2m+1} must vanish. Diagnostic only.

    Returns:
    --------
    CheckReport
        ``detail`` reads "genus-form: yes" or "genus-form: no"
    """
    ring = tables.ring
    table = bernoulli_K(max(tables.n_max // 2, 1))
    residuals = []
    checked = 0
    for n in range(1, tables.n_max + 1, 2):
        for j in range(1, tables.j_max + 1):
            value = grad_t(tables, n, j).truncate_degree(ring.t_deg - (1 if j >= 2 else 0))
            checked += 1
            residuals.extend(_residual_lines(value, f"odd order {n}, t{j}"))
        for j in range(1, tables.jbar_max + 1):
            value = grad_tbar(tables, n, j).truncate_degree(None, ring.tbar_deg - 1)
            checked += 1
            residuals.extend(_residual_lines(value, f"odd order {n}, tb{j}"))
        value = grad_s(tables.phi, n, table)
        checked += 1
        residuals.extend(_residual_lines(value, f"odd order {n}, s"))
    verdict = "genus-form: yes" if not residuals else "genus-form: no"
    if residuals:
        logging.warning(f"log tau has odd powers of hbar: {residuals[0]}")
    return CheckReport("tau: genus parity", not residuals, checked, residuals, verdict)


def assemble(S, Sbar, trunc=None):
    """
    Tables, gradients, F_n and the accompanying checks from a pair of phases.

    Returns:
    --------
    tuple
        (TauTables, TauGradient, TauExpansion); the expansion's reports
        include the difference relation and the genus-parity diagnostic
    """
    tables = extract_v(S, Sbar)
    grad = tau_gradient(tables)
    expansion = integrate_F(grad, trunc)
    relation = check_difference_relation(expansion, tables.phi)
    if not relation.passed:
        raise CheckFailure("F_n do not satisfy the difference relation with φ_n", relation)
    expansion.reports.append(relation)
    expansion.reports.append(genus_parity_check(tables))
    return tables, grad, expansion
