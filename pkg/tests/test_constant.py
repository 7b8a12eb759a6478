import math

import numpy as np
import pytest
from scipy.special import zeta

from torix.constant import (DensityError, Estimate, check_independence, default_region,
                            euler_product, factor_polynomial, nu_region, predict, real_density,
                            torsor_region_volume)
from torix.mobius import density_polynomial, local_density
from torix.picard import central_direction
from torix.torsor import GrowthSpec, RegionError, box_region, compile_region, region_from_list

from conftest import ALL_FANS, setup

LOG2 = math.log(2)


def factor_box(hi="log(2)"):
    # P1xP1 with the two factor classes in [0, hi)
    return region_from_list([[{"divisor": [1, 0, 0, 0], "min": 0, "max": hi},
                              {"divisor": [0, 0, 1, 0], "min": 0, "max": hi}]], 4)


def grid_nu(pd, sb, region, w, n=800):
    """Midpoint rule over the bounding box, with the membership test as integrand."""
    cr = compile_region(pd, sb, region, None, eps=0.0)
    lo, hi = cr.box()
    axes = [a + (b - a) * (np.arange(n) + 0.5) / n for a, b in zip(lo, hi)]
    g = np.array([x.ravel() for x in np.meshgrid(*axes, indexing="ij")])
    cell = np.prod((hi - lo) / n)
    return float(np.sum(np.exp(w @ g) * cr.contains(g)) * cell)


# -- nu ---------------------------------------------------------------------

def test_nu_p1():
    _, pd, sb = setup("P1")
    for d in (0.3, LOG2, 2.0):
        v = nu_region(pd, sb, box_region(pd, sb.basis, 0, d)).value
        assert math.isclose(v, math.expm1(2 * d) / 2, rel_tol=1e-12)


def test_nu_zero_weight():
    _, pd, sb = setup("P1xP1")
    R = box_region(pd, sb.basis, 0, 1.5)
    assert math.isclose(nu_region(pd, sb, R, weights=[0, 0]).value, 2.25, rel_tol=1e-12)


def test_nu_factor_box():
    _, pd, sb = setup("P1xP1")
    cf = nu_region(pd, sb, factor_box())
    assert math.isclose(cf.value, 9 / 4, rel_tol=1e-12)
    mc = nu_region(pd, sb, factor_box(), "monte_carlo", 200_000, 5)
    assert abs(mc.value - 9 / 4) <= 3 * mc.stderr


@pytest.mark.parametrize("name", ["P1xP1", "F1"])
def test_nu_union_quadrature(name):
    _, pd, sb = setup(name)
    w = np.array(sb.ample_coords(pd.anticanonical), dtype=float)
    a = box_region(pd, sb.basis, 0, 0.6).to_list()
    b = box_region(pd, sb.basis, 0.3, 0.9).to_list()
    R = region_from_list(a + b, pd.m)
    cf = nu_region(pd, sb, R).value
    assert math.isclose(cf, grid_nu(pd, sb, R, w), rel_tol=2e-3)
    mc = nu_region(pd, sb, R, "monte_carlo", 100_000, 9)
    assert abs(mc.value - cf) <= 3 * mc.stderr


def test_nu_needs_boxes():
    _, pd, sb = setup("P1xP1")
    tri = region_from_list([[{"divisor": [1, 0, 0, 0], "min": 0},
                             {"divisor": [0, 0, 1, 0], "min": 0},
                             {"divisor": [1, 0, 1, 0], "max": 1}]], 4)
    with pytest.raises(RegionError):
        nu_region(pd, sb, tri)
    # factor coordinates a, b >= 0, a + b <= 1, integrand exp(2a + 2b)
    want = (math.exp(2) + 1) / 4
    mc = nu_region(pd, sb, tri, "monte_carlo", 200_000, 3)
    assert abs(mc.value - want) <= 3 * mc.stderr
    w = np.array(sb.ample_coords(pd.anticanonical), float)
    assert math.isclose(grid_nu(pd, sb, tri, w, 1000), want, rel_tol=5e-3)


def test_mc_reproducible():
    _, pd, sb = setup("P1xP1")
    a = nu_region(pd, sb, factor_box(), "monte_carlo", 70_000, 11)
    b = nu_region(pd, sb, factor_box(), "monte_carlo", 70_000, 11)
    c = nu_region(pd, sb, factor_box(), "monte_carlo", 70_000, 12)
    assert a == b and a.value != c.value


# -- torsor volumes ---------------------------------------------------------

def test_volume_p1():
    f, pd, sb = setup("P1")
    v = torsor_region_volume(f, pd, sb, default_region(pd, sb))
    assert abs(v.value - 12) <= 3 * v.stderr
    z = torsor_region_volume(f, pd, sb, box_region(pd, sb.basis, 0, 0, True, True), 10_000)
    assert z.value == 0.0


def test_volume_p1xp1():
    f, pd, sb = setup("P1xP1")
    v = torsor_region_volume(f, pd, sb, factor_box())
    assert abs(v.value - 144) <= 3 * v.stderr
    mu = real_density(v, nu_region(pd, sb, factor_box()), pd.t)
    assert abs(mu.value - 16) <= 3 * mu.stderr


def test_volume_p2():
    # {max |y| in [1, 2)} in R^3 has volume 8 * 7
    f, pd, sb = setup("P2")
    v = torsor_region_volume(f, pd, sb, default_region(pd, sb), 300_000)
    assert abs(v.value - 56) <= 3 * v.stderr
    mu = real_density(v, nu_region(pd, sb, default_region(pd, sb)), 1)
    assert abs(mu.value - 12) <= 3 * mu.stderr


def test_independence():
    check_independence(Estimate(1.0, 0.1, "x"), Estimate(1.2, 0.1, "x"))
    with pytest.raises(DensityError):
        check_independence(Estimate(1.0, 0.1, "x"), Estimate(2.0, 0.1, "x"))


# -- Euler products ---------------------------------------------------------

@pytest.mark.parametrize("name,limit", [("P1", 1 / zeta(2)), ("P2", 1 / zeta(3)),
                                        ("P1xP1", 1 / zeta(2) ** 2)])
def test_euler_limits(name, limit):
    f = setup(name)[0]
    e = euler_product(f)
    assert abs(e.value - limit) < 1e-4
    assert e.lo <= limit <= e.hi


@pytest.mark.parametrize("name", ALL_FANS)
def test_euler_factors(name):
    f = setup(name)[0]
    assert factor_polynomial(f)[: f.m + 1] + [0] * (f.m + 1 - len(factor_polynomial(f))) \
        == density_polynomial(f)
    small = euler_product(f, 13)
    want = 1.0
    for p in (2, 3, 5, 7, 11, 13):
        want *= float(local_density(f, p))
    assert math.isclose(small.value, want, rel_tol=1e-12)


@pytest.mark.parametrize("name", ["P1", "F1", "dP7"])
def test_euler_monotone(name):
    f = setup(name)[0]
    a, b = euler_product(f, 5000), euler_product(f, 10000)
    assert abs(a.value - b.value) < a.hi - a.lo
    assert b.hi - b.lo < a.hi - a.lo
    assert a.lo <= b.value <= a.hi


def test_euler_pmax():
    with pytest.raises(ValueError):
        euler_product(setup("P1")[0], 7)


# -- prediction -------------------------------------------------------------

def test_predict_p1():
    f, pd, sb = setup("P1")
    gs = GrowthSpec(central_direction(pd), 1)
    rep = predict(f, pd, sb, default_region(pd, sb), gs, exponent_eps=0.1)
    assert abs(rep.real_density.value - 4) <= 3 * rep.real_density.stderr
    val, lo, hi = rep.prediction(64)
    assert lo <= 1.5 * 4 / zeta(2) * 64 ** 2 <= hi
    assert abs(val - 14941) < 60
    assert math.isclose(rep.error_exponent, 0.4)
    v2 = rep.prediction(128)[0]
    assert math.isclose(v2 / val, 4.0, rel_tol=1e-12)
    doc = rep.to_dict()
    assert doc["provenance"]["seed"] == 20240601 and doc["beta"] == 1


def test_predict_p1xp1():
    f, pd, sb = setup("P1xP1")
    gs = GrowthSpec(central_direction(pd), 1)
    rep = predict(f, pd, sb, factor_box(), gs, samples=300_000)
    tau = 16 / zeta(2) ** 2
    assert rep.tamagawa_lo <= tau <= rep.tamagawa_hi


def test_predict_errors():
    f, pd, sb = setup("P1")
    gs = GrowthSpec(central_direction(pd), 1)
    with pytest.raises(ValueError):
        predict(f, pd, sb, default_region(pd, sb), gs, samples=10)
    with pytest.raises(DensityError):
        predict(f, pd, sb, box_region(pd, sb.basis, 0, 0, True, True), gs, samples=1000)
