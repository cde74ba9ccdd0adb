import pytest

from errors import ConfigError, SeedError
from presets import AVAILABLE_PRESETS, C1StringPreset, ExpressionPreset, get_preset
from scalars import ScalarPoly
from symbols import Truncation

STRING_SOURCES = {"f": "E", "g": "s", "fbar": "(1 - s - hbar)*E", "gbar": "s"}


def test_presets_by_name():
    for name in AVAILABLE_PRESETS:
        assert get_preset(name).name == name
    assert isinstance(get_preset("c1-string"), C1StringPreset)
    with pytest.raises(ConfigError, match="available"):
        get_preset("c2-string")


def test_string_seed_sums_over_times():
    seeds = get_preset("c1-string").seed_expressions(Truncation(1, -3, 3, 1, 0))
    assert seeds["xbar0"] == "t[1]*(1 - s)^1*E^1 + t[2]*(1 - s)^2*E^2 + t[3]*(1 - s)^3*E^3"
    assert seeds["x0"] == "0"
    assert get_preset("c1-string").seed_expressions(Truncation(1, -3, 3, 0, 0))["xbar0"] == "0"


def test_string_presets_reject_tbar_times():
    trunc = Truncation(1, -3, 3, 1, 1)
    for name in ("c1-string", "c1-unshifted"):
        with pytest.raises(ConfigError):
            get_preset(name).load(trunc)


def test_identity_preset_with_both_time_families():
    trunc = Truncation(1, -3, 3, 1, 1)
    data = get_preset("identity").load(trunc)
    assert data.seed_x0.coefficient(0, -2) == ScalarPoly.t_variable(trunc.ring, 2, bar=True)
    assert data.seed_xbar0.coefficient(0, 3) == ScalarPoly.t_variable(trunc.ring, 3)
    assert data.name == "identity"


def test_expression_preset_matches_the_builtin(trunc):
    seeds = get_preset("c1-string").seed_expressions(trunc)
    custom = ExpressionPreset(STRING_SOURCES, {"xbar0": seeds["xbar0"], "phi0": seeds["phi0"]}).load(trunc)
    builtin = get_preset("c1-string").load(trunc)
    assert custom.name == "custom"
    assert custom.fbar == builtin.fbar
    assert custom.seed_xbar0 == builtin.seed_xbar0
    assert custom.seed_phi0 == builtin.seed_phi0


def test_expression_preset_needs_the_full_quadruplet():
    with pytest.raises(ConfigError, match="gbar"):
        ExpressionPreset({"f": "E", "g": "s", "fbar": "E"}, {})


def test_wrong_custom_seed_fails_the_self_test(trunc):
    with pytest.raises(SeedError):
        ExpressionPreset(STRING_SOURCES, {}).load(trunc)
    data = ExpressionPreset(STRING_SOURCES, {}).load(trunc, self_test=False)
    assert data.seed_phi0 == 0
