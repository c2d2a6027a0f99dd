import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elfkit.groundroll import (GRASS_FIRM, WET_SHORT_GRASS, AircraftConfig, Atmosphere,
                               GroundRollError, NonStoppingError, derive_aero, downslope_factor,
                               ground_roll_distance, ground_roll_expanded,
                               ground_roll_slope_derivative, load_config, required_length,
                               required_length_at_slope, slope_angle)

import oracles

DA20 = AircraftConfig()
ATM = Atmosphere()

# frozen from the 50-digit evaluation in oracles.ground_roll_mp
ASPECT = 10.223456896551724
OSWALD = 0.750812395320112
K_INDUCED = 0.04146874795747887
CD0 = 0.04982344064493792
CL = 2.4343579333034806
K_A = 0.00017324211533333361
S_FLAT = 210.77289936521348
S_UPHILL_18_66 = 132.06718664379733


def test_frozen_values_match_high_precision_oracle():
    ref = oracles.ground_roll_mp()
    assert float(ref["s"]) == S_FLAT
    assert float(ref["A"]) == ASPECT
    assert float(oracles.ground_roll_mp(alpha="0.1866")["s"]) == S_UPHILL_18_66


def test_intermediate_constants():
    aero = derive_aero(DA20, ATM)
    assert aero.aspect_ratio == pytest.approx(ASPECT, rel=1e-14)
    assert aero.oswald == pytest.approx(OSWALD, rel=1e-14)
    assert aero.k_induced == pytest.approx(K_INDUCED, rel=1e-14)
    assert aero.cd0 == pytest.approx(CD0, rel=1e-14)
    assert aero.cl == pytest.approx(CL, rel=1e-14)
    assert aero.k_t == -0.2
    assert aero.k_a == pytest.approx(K_A, rel=1e-12)


def test_intermediate_constants_near_published_rounding():
    # published figures are rounded; they agree to about 3-4 significant digits
    aero = derive_aero(DA20, ATM)
    assert aero.aspect_ratio == pytest.approx(10.2228, abs=2e-3)
    assert aero.oswald == pytest.approx(0.7507, abs=2e-4)
    assert aero.k_induced == pytest.approx(0.04148, abs=2e-5)
    assert aero.cd0 == pytest.approx(0.04979, abs=5e-5)
    assert aero.cl == pytest.approx(2.4346, abs=5e-4)


def test_flat_ground_roll_and_grass_length():
    s = ground_roll_distance(DA20, ATM, 0.0)
    assert s == pytest.approx(S_FLAT, rel=1e-13)
    assert round(s, 3) == 210.773
    assert required_length(s, GRASS_FIRM) == pytest.approx(242.389, abs=1e-3)


def test_uphill_required_length():
    assert required_length_at_slope(DA20, ATM, 18.66, GRASS_FIRM) == pytest.approx(
        S_UPHILL_18_66 * 1.15, rel=1e-13)
    assert required_length_at_slope(DA20, ATM, 18.66) == pytest.approx(151.877, abs=1e-3)


def test_matches_integrated_equation_of_motion():
    for pct in (-8.0, -3.0, 0.0, 5.0, 18.66):
        a = slope_angle(pct)
        assert ground_roll_distance(DA20, ATM, a) == pytest.approx(
            oracles.ground_roll_ode(alpha=a), rel=1e-9)


def test_downslope_surcharge():
    assert downslope_factor(0.0) == 1.0
    assert downslope_factor(4.0) == 1.0
    assert downslope_factor(-4.0) == pytest.approx(1.2)
    s = ground_roll_distance(DA20, ATM, slope_angle(-4.0))
    assert required_length(s, 1.15, -4.0) == pytest.approx(s * 1.15 * 1.2)


def test_wet_grass_factor():
    assert required_length(S_FLAT, WET_SHORT_GRASS) == pytest.approx(S_FLAT * 1.6)


@pytest.mark.parametrize("mu,thrust,alpha", [
    (0.02, 0.0, math.radians(-10)),  # steep downhill, little friction
    (0.2, 3000.0, 0.0),  # thrust beats friction
])
def test_non_stopping_configurations(mu, thrust, alpha):
    with pytest.raises(NonStoppingError):
        ground_roll_distance(AircraftConfig(mu=mu, thrust=thrust), ATM, alpha)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        AircraftConfig(mass=0)
    with pytest.raises(ValueError):
        AircraftConfig(mu=0)
    with pytest.raises(ValueError):
        Atmosphere(rho=-1)
    with pytest.raises(ValueError):
        derive_aero(DA20, ATM, math.pi / 2)
    with pytest.raises(ValueError):
        required_length(0.0)
    with pytest.raises(ValueError):
        required_length(100.0, 0.9)
    with pytest.raises(GroundRollError):
        derive_aero(AircraftConfig(wing_span=40, wing_area=5), ATM)  # e <= 0


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.1, 0.2))
def test_expanded_form_equals_factored(alpha):
    a = ground_roll_distance(DA20, ATM, alpha)
    b = ground_roll_expanded(DA20, ATM, alpha)
    assert abs(a - b) <= 1e-12 * abs(a)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5.0, 30.0), st.floats(-5.0, 30.0))
def test_uphill_shortens_the_roll(p1, p2):
    lo, hi = sorted((p1, p2))
    assert ground_roll_distance(DA20, ATM, slope_angle(hi)) <= ground_roll_distance(
        DA20, ATM, slope_angle(lo))


def test_derivative_against_finite_difference():
    for k in range(1, 51):
        a = math.radians(-6 + 18 * k / 51)
        h = 1e-5
        fd = (ground_roll_distance(DA20, ATM, a + h) - ground_roll_distance(DA20, ATM, a - h)) / (2 * h)
        an = ground_roll_slope_derivative(DA20, ATM, a)
        assert abs(an - fd) <= 1e-6 * abs(an)


def test_load_config(tmp_path):
    p = tmp_path / "plane.cfg"
    p.write_text("# heavier\naircraft.mass = 900\nmu = 0.25\natmosphere.rho = 1.1\n"
                 "search.surface_factor = 1.6\n")
    air, atm = load_config(p)
    assert air.mass == 900 and air.mu == 0.25 and atm.rho == 1.1
    assert air.wing_span == DA20.wing_span
