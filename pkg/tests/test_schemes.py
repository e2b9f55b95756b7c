import pytest

from Equipoise.core.schemes import SchemeKind, WeightScheme, parse_scheme, validate_scheme
from Equipoise.utils.exceptions import (
    ExtraneousParam,
    MissingParam,
    ParamOutOfRange,
    UnsupportedScheme,
)


def test_trim_at_rule_of_thumb():
    scheme = validate_scheme("TRIM", {"alpha": 0.1})
    assert scheme == WeightScheme(SchemeKind.TRIM, alpha=0.1)
    assert scheme.estimand_label == "OSATE"


def test_beta_below_two_is_out_of_range():
    with pytest.raises(ParamOutOfRange):
        validate_scheme("BW", {"nu": 1.5})


def test_matching_with_default_smoothing():
    assert validate_scheme("MW", {"delta": 0.002}) == validate_scheme("MW")
    assert validate_scheme("MW").delta == pytest.approx(0.002)


@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.1, 0.7])
def test_alpha_domain(alpha):
    with pytest.raises(ParamOutOfRange):
        validate_scheme("TRUNC", {"alpha": alpha})


def test_missing_and_extra_parameters():
    with pytest.raises(MissingParam):
        validate_scheme("TRIM")
    with pytest.raises(ExtraneousParam):
        validate_scheme("OW", {"alpha": 0.1})
    with pytest.raises(ExtraneousParam):
        validate_scheme("BW", {"nu": 3, "alpha": 0.1})


def test_unknown_kind():
    with pytest.raises(UnsupportedScheme):
        validate_scheme("XYZ")


@pytest.mark.parametrize(
    "text, label",
    [
        ("ipw", "IPW"),
        ("OW", "OW"),
        ("TRIM(0.1)", "TRIM(0.1)"),
        (" trunc( 0.05 ) ", "TRUNC(0.05)"),
        ("BW(11)", "BW(11)"),
        ("MW", "MW(0.002)"),
        ("MW(0.01)", "MW(0.01)"),
    ],
)
def test_parse_and_label(text, label):
    assert parse_scheme(text).label == label


def test_parse_rejects_garbage():
    with pytest.raises(UnsupportedScheme):
        parse_scheme("OW(")
    with pytest.raises(ParamOutOfRange):
        parse_scheme("BW(x)")
    with pytest.raises(ExtraneousParam):
        parse_scheme("OW(2)")


def test_scheme_families():
    assert parse_scheme("IPW").affine_ab == (1.0, 0.0)
    assert parse_scheme("ATT").affine_ab == (0.0, 1.0)
    assert parse_scheme("ATC").affine_ab == (1.0, -1.0)
    assert parse_scheme("OW").affine_ab is None
    assert parse_scheme("EW").is_equipoise and not parse_scheme("IPW").is_equipoise
    assert not parse_scheme("TRIM(0.1)").is_smooth
    with pytest.raises(UnsupportedScheme):
        parse_scheme("TRUNC(0.1)").require_smooth()
