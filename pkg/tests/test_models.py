import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualif.catalog import CATALOG_NAMES, catalog_get, catalog_info
from dualif.errors import InvalidModel, UnknownModel, ValidationError
from dualif.models import (InputSignal, PhaseModel, VoltageModel, model_from_json,
                           parse_extended, validate_phase, validate_voltage)


def interior(pair, n):
    p = pair.phase
    return np.linspace(p.y_minus, p.y_plus, n + 2)[1:-1]


# --------------------------------------------------------------------------
# catalog


def test_catalog_examples():
    assert catalog_get("qif").h(math.pi / 4) == pytest.approx(1.0, rel=1e-15)
    assert catalog_get("lqif").phase.g(0.5) == pytest.approx(0.75, rel=1e-15)
    assert catalog_get("lif").h_inv(1.0) == pytest.approx(math.log(2), rel=1e-15)


@pytest.mark.parametrize("name, y_plus, x_plus", [
    ("nif", 1.0, 1.0), ("qif", math.pi / 2, math.inf), ("qif*", 1.0, math.inf),
    ("lif", math.log(2), 1.0), ("lif*", 1.0, math.inf), ("lqif", 1.0, math.inf),
    ("sqrt-if*", 1.0, math.inf), ("expsqrt-if", 1.0, math.inf),
])
def test_catalog_thresholds(name, y_plus, x_plus):
    pair = catalog_get(name)
    assert pair.phase.y_plus == pytest.approx(y_plus, abs=1e-12)
    assert pair.phase.y_minus == pytest.approx(-y_plus, abs=1e-12)
    assert pair.voltage.x_plus == x_plus
    assert pair.voltage.x_minus == -x_plus
    assert pair.phase.compactified == math.isinf(x_plus)


def test_catalog_lookup_is_case_insensitive_and_rejects_unknown():
    assert catalog_get(" QIF ") is catalog_get("qif")
    with pytest.raises(UnknownModel):
        catalog_get("foo")


def test_catalog_info_fields():
    info = catalog_info("qif")
    assert info["h"] == "tan(y)"
    assert info["y_plus"] == pytest.approx(math.pi / 2)
    assert info["compactified"] is True


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_reciprocity_1000_points(name):
    pair = catalog_get(name)
    ys = interior(pair, 1000)
    x = pair.h(ys)
    f = pair.voltage.f(x, strict=False)
    g = pair.phase.g(ys)
    lhs = np.where(np.isinf(f), 1.0, (1.0 + f) * (1.0 - g))
    assert np.max(np.abs(lhs - 1.0)) <= 1e-9


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_g_from_f_relation(name):
    pair = catalog_get(name)
    ys = interior(pair, 1000)
    f = pair.voltage.f(pair.h(ys), strict=False)
    with np.errstate(invalid="ignore"):
        expected = np.where(np.isinf(f), 1.0, f / (1.0 + f))
    assert np.max(np.abs(pair.phase.g(ys) - expected)) <= 1e-9


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_h_monotone_and_centered(name):
    pair = catalog_get(name)
    ys = interior(pair, 1000)
    assert np.all(np.diff(pair.h(ys)) > 0)
    assert pair.h(0.0) == 0.0
    assert pair.h_inv(0.0) == 0.0


# Beyond |x| ~ 10 the exponential models put h_inv(x) within a few ulps of the
# threshold, where the round trip is limited by the spacing of doubles.
@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_h_of_h_inv_relative(name):
    pair = catalog_get(name)
    lo = max(pair.voltage.x_minus, -10.0)
    hi = min(pair.voltage.x_plus, 10.0)
    xs = np.linspace(lo, hi, 401)
    back = pair.h(pair.h_inv(xs))
    assert np.max(np.abs(back - xs) / np.maximum(np.abs(xs), 1e-300)) <= 1e-9


def test_nif_is_self_dual():
    pair = catalog_get("nif")
    ys = np.linspace(-0.99, 0.99, 51)
    np.testing.assert_array_equal(pair.h(ys), ys)
    np.testing.assert_array_equal(pair.phase.g(ys), 0.0)
    np.testing.assert_array_equal(pair.voltage.f(ys), 0.0)


@pytest.mark.parametrize("name", CATALOG_NAMES)
def test_catalog_models_pass_validation(name):
    pair = catalog_get(name)
    assert validate_phase(pair.phase).ok
    if name != "sqrt-if*":
        assert validate_voltage(pair.voltage).ok


# --------------------------------------------------------------------------
# validation


def test_validate_examples():
    assert validate_voltage(VoltageModel("x^2", math.inf, -math.inf)).ok
    shifted = validate_voltage(VoltageModel("x^2 - 1", math.inf, -math.inf))
    assert not shifted.ok
    v = [w for w in shifted.violations if w.invariant == "f(0)=0"][0]
    assert v.value == -1.0
    linear = validate_voltage(VoltageModel("x", math.inf, -math.inf))
    neg = [w for w in linear.violations if w.invariant == "f>=0"][0]
    assert neg.at < 0 and neg.value < 0


def test_validate_linear_has_witness_at_minus_one_on_unit_domain():
    report = validate_voltage(VoltageModel("x", 1, -1))
    w = [v for v in report.violations if v.invariant == "f>=0"][0]
    assert w.at == -1.0 and w.value == -1.0


def test_validate_thresholds_and_finiteness():
    assert not validate_voltage(VoltageModel("x^2", 1, 2)).ok
    report = validate_voltage(VoltageModel("1/abs(x) - 1/abs(x)", 1, -1))
    assert any(v.invariant == "finite" for v in report.violations)
    with pytest.raises(ValidationError):
        report.raise_if_invalid()


def test_validate_grid_size():
    with pytest.raises(ValueError):
        validate_voltage(VoltageModel("x^2", 1, -1), n_points=10)


def test_phase_validation():
    assert validate_phase(PhaseModel("y^2", 1, -1, True)).ok
    assert not validate_phase(PhaseModel("y^2 + 0.1", 1, -1, False)).ok
    assert not validate_phase(PhaseModel("4*y^2", 1, -1, True)).ok
    assert not validate_phase(PhaseModel("y^2/2", 1, -1, True)).ok  # endpoint condition
    with pytest.raises(InvalidModel):
        PhaseModel("y^2", math.inf, -1)
    with pytest.raises(InvalidModel):
        PhaseModel("y^2", -0.5, -1)


def test_extended_reals():
    assert parse_extended("inf") == math.inf
    assert parse_extended("-Inf") == -math.inf
    assert parse_extended("2.5") == 2.5
    with pytest.raises(ValueError):
        parse_extended("nan")


def test_json_round_trip():
    v = VoltageModel("sinh(x)^2", math.inf, -math.inf, "qif*")
    data = v.to_json()
    assert data == {"name": "qif*", "repr": "voltage", "fn": "sinh(x)^2",
                    "threshold": "inf", "reset": "-inf"}
    back = model_from_json(json.dumps(data))
    assert back.x_plus == math.inf and str(back.f) == "sinh(x)^2"
    p = model_from_json({"name": "theta", "repr": "phase", "fn": "sin(y)^2",
                         "threshold": math.pi / 2, "reset": -math.pi / 2})
    assert p.compactified
    assert model_from_json(PhaseModel("y^2/2", 1, -1).to_json()).compactified is False
    with pytest.raises(ValueError):
        model_from_json({"repr": "other"})


def test_periodic_extension():
    p = catalog_get("qif*").phase
    assert p.g_ext(1.5) == pytest.approx(p.g(-0.5))
    np.testing.assert_allclose(p.g_ext(np.array([1.5, -1.25])), [0.25, 0.5625])


# --------------------------------------------------------------------------
# inputs


def test_input_specs():
    assert InputSignal.from_spec("const:2.5")(7.0) == 2.5
    step = InputSignal.from_spec("step:0,2,1.5")
    assert step(1.0) == 0.0 and step(1.5) == 2.0 and step.left(1.5) == 0.0
    assert step.breakpoints == (1.5,)
    wave = InputSignal.from_spec("expr:1+0.5*sin(t)")
    assert wave(math.pi / 2) == pytest.approx(1.5)
    for s in ("const:2.5", "step:0.0,2.0,1.5", "expr:1 + 0.5 * sin(t)"):
        assert InputSignal.from_spec(InputSignal.from_spec(s).spec()) == InputSignal.from_spec(s)


@pytest.mark.parametrize("bad", ["2", "const:", "step:1,2", "noise:1", "expr:x+1"])
def test_bad_input_specs(bad):
    with pytest.raises(ValueError):
        InputSignal.from_spec(bad)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 1e3))
def test_step_spec_round_trip(a, b, t):
    s = InputSignal.step(a, b, t)
    assert InputSignal.from_spec(s.spec()) == s
