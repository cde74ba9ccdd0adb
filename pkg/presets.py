"""
RH data presets.
Each preset provides the quadruplet (f, g, f̄, ḡ) as source expressions
and a dispersionless seed; ``get_preset`` builds one by name.
"""

import logging
from abc import ABC, abstractmethod

from errors import ConfigError, SeedError
from expr_parser import compile_expr, compile_scalar, parse_expr
from rhsolver import RHData, verify_seed
from verify import check_cnm_tables, check_string_equation, closed_form_xbar


class RHPreset(ABC):
    """
    Abstract base class for RH data presets.
    Implement this class to add another datum with a known seed.
    """

    @property
    @abstractmethod
    def name(self):
        """Return the preset name used on the command line."""
        pass

    @property
    @abstractmethod
    def description(self):
        """Return a one-line description of the datum."""
        pass

    @abstractmethod
    def expressions(self):
        """
        Source expressions of the quadruplet.

        Returns:
        --------
        dict
            Keys 'f', 'g', 'fbar', 'gbar'
        """
        pass

    @abstractmethod
    def seed_expressions(self, trunc):
        """
        Source expressions of the dispersionless seed for a truncation.

        Returns:
        --------
        dict
            Keys 'x0', 'xbar0', 'phi0'; 'l' stands for log(1-s)
        """
        pass

    def validate(self, trunc):
        """Reject truncations the preset does not support."""
        pass

    def seed(self, trunc):
        """(X0, X̄0, φ0) compiled over the order-0 truncation."""
        sources = self.seed_expressions(trunc)
        slice_trunc = trunc.with_hbar(0)
        return (compile_expr(sources["x0"], slice_trunc, seed=True),
                compile_expr(sources["xbar0"], slice_trunc, seed=True),
                compile_scalar(sources["phi0"], slice_trunc))

    def extra_checks(self, pack, triple):
        """Preset-specific reports run after the hierarchy battery."""
        return []

    def cnm_table(self, triple):
        """c_{n,m} diagnostic table, or None when the preset has none."""
        return None

    def load(self, trunc, max_iterations=64, self_test=True):
        """
        Compile the preset over ``trunc`` into RHData.

        Parameters:
        -----------
        trunc : Truncation
            Requested truncation
        max_iterations : int
            Guard passed to the seed self-test
        self_test : bool
            Rerun verify_seed on the compiled data

        Returns:
        --------
        RHData
        """
        self.validate(trunc)
        sources = self.expressions()
        f, g, fbar, gbar = (compile_expr(parse_expr(sources[key]), trunc) for key in ("f", "g", "fbar", "gbar"))
        x0, xbar0, phi0 = self.seed(trunc)
        data = RHData(f, g, fbar, gbar, x0, xbar0, phi0, self.name)
        logging.debug(f"Preset '{self.name}': f = {sources['f']}, g = {sources['g']}, "
                      f"fbar = {sources['fbar']}, gbar = {sources['gbar']}")
        if self_test:
            for report in verify_seed(data, trunc, max_iterations):
                if not report.passed:
                    raise SeedError(f"Preset '{self.name}' failed its seed self-test", report)
            logging.info(f"Preset '{self.name}' loaded, seed self-test passed")
        return data


def _time_sum(trunc, template, bar=False):
    ring = trunc.ring
    if bar:
        count = ring.n_tbar if ring.tbar_deg else 0
    else:
        count = min(ring.n_t, trunc.xi_hi) if ring.t_deg else 0
    terms = [template.format(n=n) for n in range(1, count + 1)]
    return " + ".join(terms) if terms else "0"


class C1StringPreset(RHPreset):
    """c=1 string datum f = E, g = s, f̄ = (1 - s - ℏ)E, ḡ = s."""

    @property
    def name(self):
        return "c1-string"

    @property
    def description(self):
        return "c=1 string theory at self-dual radius, string equation L = (1 - Mbar - hbar) Lbar"

    def expressions(self):
        return {"f": "E", "g": "s", "fbar": "(1 - s - hbar)*E", "gbar": "s"}

    def seed_expressions(self, trunc):
        return {
            "x0": "0",
            "xbar0": _time_sum(trunc, "t[{n}]*(1 - s)^{n}*E^{n}"),
            "phi0": "-(1 - s)*l + (1 - s)",
        }

    def validate(self, trunc):
        if trunc.ring.tbar_deg:
            raise ConfigError(f"Preset '{self.name}' fixes the tbar variables to 0; use --tbar-deg 0")

    def extra_checks(self, pack, triple):
        return [check_string_equation(pack), closed_form_xbar(triple)]

    def cnm_table(self, triple):
        return check_cnm_tables(triple)


class C1UnshiftedPreset(C1StringPreset):
    """f̄ = (1 - s)E: the same dispersionless seed with different quantum corrections."""

    @property
    def name(self):
        return "c1-unshifted"

    @property
    def description(self):
        return "c=1 datum with fbar = (1 - s) E, same dispersionless limit as c1-string"

    def expressions(self):
        return {"f": "E", "g": "s", "fbar": "(1 - s)*E", "gbar": "s"}

    def extra_checks(self, pack, triple):
        return [closed_form_xbar(triple)]

    def cnm_table(self, triple):
        return None


class IdentityPreset(RHPreset):
    """f = f̄ = E, g = ḡ = s; solved exactly by X = ζ̄, X̄ = ζ, φ = 0."""

    @property
    def name(self):
        return "identity"

    @property
    def description(self):
        return "Trivial datum, dressing operators equal to the time generators"

    def expressions(self):
        return {"f": "E", "g": "s", "fbar": "E", "gbar": "s"}

    def seed_expressions(self, trunc):
        return {
            "x0": _time_sum(trunc, "tbar[{n}]*E^-{n}", bar=True),
            "xbar0": _time_sum(trunc, "t[{n}]*E^{n}"),
            "phi0": "0",
        }

    def extra_checks(self, pack, triple):
        return [closed_form_xbar(triple)]


class ExpressionPreset(RHPreset):
    """User-supplied quadruplet and seed from command-line expressions."""

    def __init__(self, sources, seeds, label="custom"):
        missing = [key for key in ("f", "g", "fbar", "gbar") if not sources.get(key)]
        if missing:
            raise ConfigError(f"Custom RH data needs all of --f/--g/--fbar/--gbar (missing {', '.join(missing)})")
        self._sources = dict(sources)
        self._seeds = {"x0": seeds.get("x0") or "0", "xbar0": seeds.get("xbar0") or "0",
                       "phi0": seeds.get("phi0") or "0"}
        self._label = label

    @property
    def name(self):
        return self._label

    @property
    def description(self):
        return "User-supplied RH data"

    def expressions(self):
        return dict(self._sources)

    def seed_expressions(self, trunc):
        return dict(self._seeds)


AVAILABLE_PRESETS = {
    "c1-string": C1StringPreset,
    "c1-unshifted": C1UnshiftedPreset,
    "identity": IdentityPreset,
}


def get_preset(name):
    """
    Get preset instance by name.

    Parameters:
    -----------
    name : str
        One of AVAILABLE_PRESETS

    Returns:
    --------
    RHPreset
    """
    if name in AVAILABLE_PRESETS:
        return AVAILABLE_PRESETS[name]()
    raise ConfigError(f"Unknown preset '{name}' (available: {', '.join(sorted(AVAILABLE_PRESETS))})")
