import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elfkit.geometry import GeoPolygon, OrientedRect, centroid, contains, rotate
from elfkit.groundroll import AircraftConfig, Atmosphere
from elfkit.raster import DEFAULT_NODATA, GridRaster
from elfkit.search import (ANGLES_DEG, _usable, ProfileError, center_line_profile, default_elf_length,
                           default_elf_width, evaluate_elf, find_elfs, pick_slope,
                           profile_slope, search_polygon, sweep)

import oracles

DA20 = AircraftConfig()
ATM = Atmosphere()
L_FLAT = 242.38883426999547  # 1.15 x flat ground roll
W_DA20 = 3 * 10.89


def box(x0, y0, x1, y1):
    return GeoPolygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def plane(gx=0.0, gy=0.0, size=400, res=1.0, origin=(-50.0, 350.0)):
    ox, oy = origin
    n = int(size / res)
    xs = ox + (np.arange(n) + 0.5) * res
    ys = oy - (np.arange(n) + 0.5) * res
    X, Y = np.meshgrid(xs, ys)
    return GridRaster(100 + gx * X + gy * Y, ox, oy, res, res)


def test_defaults():
    assert default_elf_width(DA20) == pytest.approx(32.67)
    assert default_elf_length(DA20) == pytest.approx(151.877, abs=1e-3)
    assert ANGLES_DEG[0] == 0 and ANGLES_DEG[-1] == 176 and len(ANGLES_DEG) == 45


def test_too_small_polygon_gives_nothing():
    assert find_elfs(box(0, 0, 10, 10), 242, 33) == []
    with pytest.raises(ValueError):
        find_elfs(box(0, 0, 10, 10), 0, 33)


def test_long_rectangle_grows_to_far_edge():
    poly = box(0, 0, 300, 40)
    placements = sweep(poly, L_FLAT, W_DA20)
    at0 = [p for p in placements if p.angle_deg == 0]
    assert at0 and max(p.rect.length for p in at0) >= 299
    assert max(p.rect.length for p in at0) <= 300
    assert all(p.angle_deg in (0, 4, 176) for p in placements)


def test_long_rectangle_matches_exhaustive_oracle():
    poly = box(0, 0, 300, 40)
    got = [(p.angle_deg, p.x_shift, p.growth) for p in sweep(poly, L_FLAT, W_DA20)]
    ref = [(d, x, g) for d, _, x, g, _ in oracles.sweep_oracle(poly, L_FLAT, W_DA20)]
    assert got == ref


@pytest.mark.parametrize("tilt_deg,expected_index", [(-44, 44), (44, 136)])
def test_pre_rotated_rectangle_found_at_matching_angle(tilt_deg, expected_index):
    base = box(0, 0, 300, 40)
    poly = rotate(base, math.radians(tilt_deg), centroid(base))
    placements = sweep(poly, L_FLAT, W_DA20)
    hits = [p for p in placements if p.angle_deg == expected_index]
    assert hits and max(p.rect.length for p in hits) >= 299
    for p in placements:
        assert contains(poly, p.rect)


def test_rotation_back_to_world_frame():
    poly = GeoPolygon(oracles.random_star(np.random.default_rng(8)))
    pivot = centroid(poly)
    for p in sweep(poly, 40, 10):
        back = rotate(p.local, -math.radians(p.angle_deg), pivot) if p.angle_deg else p.local
        assert np.allclose(back.corners(), p.rect.corners(), atol=1e-9)
        assert contains(poly, p.rect)
        assert p.rect.length == 40 + p.growth and p.rect.width == 10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans(), st.floats(20, 90), st.floats(5, 30))
def test_sweep_matches_exhaustive_oracle(seed, concave, length, width):
    rng = np.random.default_rng(seed)
    ring = oracles.random_star(rng, 150) if concave else oracles.random_convex(rng, 150)
    poly = GeoPolygon(ring)
    got = [(p.angle_deg, round(p.y_offset / (width / 2)), p.x_shift, p.growth)
           for p in sweep(poly, length, width)]
    ref = [(d, i, x, g) for d, i, x, g, _ in oracles.sweep_oracle(poly, length, width)]
    assert got == ref


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12), st.booleans())
def test_vertex_order_does_not_change_the_result(seed, shift, reverse):
    rng = np.random.default_rng(seed)
    ring = oracles.random_convex(rng, 120)[:-1]
    other = np.roll(ring, shift, axis=0)
    if reverse:
        other = other[::-1]
    a = find_elfs(GeoPolygon(ring), 30, 8)
    b = find_elfs(GeoPolygon(other), 30, 8)
    assert a == b


def test_angle_subset():
    poly = box(0, 0, 120, 30)
    assert {p.angle_deg for p in sweep(poly, 50, 10, angles_deg=(0, 90))} == {0}


# profiles ---------------------------------------------------------------

def test_profile_on_flat_and_plane():
    flat = plane()
    prof = center_line_profile(flat, OrientedRect(0, 0, 100, 20))
    assert np.all(prof[:, 1] == 100) and prof[0, 0] == 0 and prof[-1, 0] == 100
    tilted = plane(gx=0.05)
    reg, end = profile_slope(center_line_profile(tilted, OrientedRect(0, 0, 100, 20)))
    assert reg == pytest.approx(5.0, abs=1e-9) and end == pytest.approx(5.0, abs=1e-9)


def test_profile_on_plane_at_30_degrees():
    tilted = plane(gx=0.05)
    rect = OrientedRect(10, 10, 120, 20, math.radians(30))
    reg, end = profile_slope(center_line_profile(tilted, rect))
    assert reg == pytest.approx(5.0 * math.cos(math.radians(30)), abs=1e-9)
    assert end == pytest.approx(5.0 * math.cos(math.radians(30)), abs=1e-9)


def test_profile_includes_fractional_end():
    prof = center_line_profile(plane(), OrientedRect(0, 0, 10.5, 4))
    assert prof[-1, 0] == 10.5 and prof[-2, 0] == 10


def test_profile_errors():
    dsm = plane()
    with pytest.raises(ProfileError):
        center_line_profile(dsm, OrientedRect(-100, 0, 50, 10))
    v = np.array(dsm.values)
    v[340:350, 60:70] = DEFAULT_NODATA  # around x in [10, 20), y in [0, 10)
    holed = dsm.with_values(v)
    with pytest.raises(ProfileError, match="stations"):
        center_line_profile(holed, OrientedRect(0, 0, 40, 10))
    with pytest.raises(ProfileError):
        profile_slope([[0, 1]])
    with pytest.raises(ProfileError):
        profile_slope([[0, 1], [0, 2]])


def test_profile_slope_examples():
    assert profile_slope([[0, 0], [1, 0], [2, 0]]) == (0.0, 0.0)
    reg, end = profile_slope([[0, 1], [10, 1.5], [20, 2.0]])
    assert (reg, end) == (pytest.approx(5.0), pytest.approx(5.0))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 300))
def test_regression_matches_normal_equations(seed, n):
    rng = np.random.default_rng(seed)
    d = np.sort(rng.uniform(0, 300, n))
    d[0], d[-1] = 0.0, max(d[-1], 1.0)
    z = 0.03 * d + rng.normal(0, 0.5, n)
    A = np.column_stack([d, np.ones(n)])
    beta = np.linalg.solve(A.T @ A, A.T @ z)
    reg, end = profile_slope(np.column_stack([d, z]))
    assert reg == pytest.approx(100 * beta[0], abs=1e-9)
    assert end == pytest.approx(100 * (z[-1] - z[0]) / (d[-1] - d[0]), abs=1e-9)


def test_pick_slope():
    assert pick_slope(3.0, -4.0) == -4.0
    assert pick_slope(-5.0, 4.0) == -5.0
    assert pick_slope(3.0, -4.0, "regression") == 3.0
    assert pick_slope(3.0, -4.0, "endpoint") == -4.0
    with pytest.raises(ValueError):
        pick_slope(1, 2, "mean")


# evaluation -------------------------------------------------------------

def test_flat_250_m_accepted():
    rec = evaluate_elf(OrientedRect(0, 0, 250, W_DA20), plane(), DA20, ATM, 1.15)
    assert rec.accepted and rec.wet115 and not rec.wet160
    assert rec.required_length_fwd == pytest.approx(L_FLAT, rel=1e-12)
    assert rec.slope_rev_pct == -rec.slope_fwd_pct


def test_flat_240_m_rejected():
    rec = evaluate_elf(OrientedRect(0, 0, 240, W_DA20), plane(), DA20, ATM, 1.15)
    assert not rec.accepted


def test_steep_downslope_direction_rejected():
    # the rule itself: a direction descending faster than 10 % never qualifies
    assert not _usable(1e6, -10.5, 100.0)
    assert _usable(1e6, -9.99, 100.0)
    # on terrain, -10.5 % forward is +10.5 % in reverse; a strip too short for the
    # uphill direction is rejected in both
    dsm = plane(gx=-0.105, size=600, origin=(-50, 550))
    rec = evaluate_elf(OrientedRect(0, 0, 150, 30), dsm, DA20, ATM, 1.15)
    assert rec.slope_fwd_pct == pytest.approx(-10.5, abs=1e-9)
    assert rec.slope_rev_pct == pytest.approx(10.5, abs=1e-9)
    assert rec.required_length_fwd < 1e9 and rec.required_length_rev > 150
    assert not rec.accepted
    # long enough for the uphill direction: accepted, but only that way
    rec = evaluate_elf(OrientedRect(0, 0, 400, 30), dsm, DA20, ATM, 1.15)
    assert rec.accepted and rec.length >= rec.required_length_rev


def test_uphill_18_66_percent_152_m():
    dsm = plane(gx=0.1866)
    rec = evaluate_elf(OrientedRect(0, 0, 152, W_DA20), dsm, DA20, ATM, 1.15)
    assert rec.slope_fwd_pct == pytest.approx(18.66, abs=1e-9)
    assert rec.required_length_fwd == pytest.approx(151.877, abs=1e-3)
    assert rec.accepted  # landing uphill
    assert rec.required_length_rev > 152  # downhill direction is far longer
    short = evaluate_elf(OrientedRect(0, 0, 151, W_DA20), dsm, DA20, ATM, 1.15)
    assert not short.accepted


def test_non_stopping_direction_is_unusable_not_fatal():
    air = AircraftConfig(mu=0.05)
    dsm = plane(gx=0.08)
    rec = evaluate_elf(OrientedRect(0, 0, 200, 30), dsm, air, ATM, 1.15)
    assert math.isinf(rec.required_length_rev)
    assert rec.slope_rev_pct == pytest.approx(-8.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(-12, 20), st.floats(100, 400), st.floats(0, 60))
def test_acceptance_invariants(grade, length, extra):
    dsm = plane(gx=grade / 100, size=1000, origin=(-100, 900))
    a = evaluate_elf(OrientedRect(0, 0, length, 30), dsm, DA20, ATM, 1.15)
    b = evaluate_elf(OrientedRect(0, 0, length + extra, 30), dsm, DA20, ATM, 1.15)
    assert abs(a.slope_rev_pct + a.slope_fwd_pct) <= 1e-9
    if a.accepted:
        assert b.accepted  # longer never hurts
        assert a.length >= min(a.required_length_fwd, a.required_length_rev)
        assert max(a.slope_fwd_pct, a.slope_rev_pct) > -10
    if a.wet160:
        assert a.wet115


def test_search_polygon_skips_candidates_off_the_dsm():
    dsm = GridRaster(np.full((60, 200), 50.0), 0, 60, 1, 1)
    poly = box(0, 0, 300, 40)  # extends past the DSM
    recs = search_polygon(poly, dsm, DA20, ATM, elf_length=100, elf_width=20)
    assert all(r.rect.corners()[:, 0].max() <= 200 + 1e-9 for r in recs)
