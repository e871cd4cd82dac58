"""Sp(1) x Id_1 invariant Cayley fibres and the phase portrait of X = (f1, f2)."""

import math

import numpy as np
import pytest

from bscayley.errors import DomainError
from bscayley.geometry import ChartPointSp1
from bscayley.sp1 import (
    ALPHA_INF,
    HALF_PI,
    Sp1PhaseState,
    alpha_c,
    asymptotic_cone_sp1,
    beta_c,
    blue_smoothness,
    classify_sp1,
    f1_f2,
    green_launch,
    green_slope,
    green_smoothness,
    integrate_fibre,
    moment_ratio_fibre,
    moment_ratio_sp1,
    multi_moment_sp1,
    reduced_residual,
    cayley_residuals,
    verify_cayley_sp1,
)

GRID_ALPHA = np.linspace(-HALF_PI + 1e-3, HALF_PI - 1e-3, 200)
GRID_R = np.linspace(1e-3, 3.0, 200)


# phase portrait --------------------------------------------------------------------------


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_sign_regions(c):
    A, R = np.meshgrid(GRID_ALPHA, GRID_R)
    f1, f2 = f1_f2(A, R, c)
    ac, bc = alpha_c(R, c), beta_c(R, c)
    assert np.all(bc < ac)
    below, middle, above = A < bc, (bc < A) & (A < ac), A > ac
    assert np.all((f1[below] > 0) & (f2[below] < 0))
    assert np.all((f1[middle] > 0) & (f2[middle] > 0))
    assert np.all((f1[above] < 0) & (f2[above] > 0))
    # the fourth sign pattern never occurs
    assert not np.any((f1 < 0) & (f2 < 0))
    assert below.any() and middle.any() and above.any()


def test_vector_field_vanishing_set():
    r = np.linspace(0.0, 4.0, 9)
    f1, f2 = f1_f2(np.full_like(r, HALF_PI), r, 1.0)
    assert np.all(f1 == 0) and np.all(f2 == 0)
    assert f1_f2(-HALF_PI, 0.0, 1.0) == (0.0, 0.0)
    # r = 0 and alpha = -pi/2 are invariant
    assert f1_f2(0.3, 0.0, 1.0)[1] == 0.0
    assert f1_f2(-HALF_PI, 2.0, 1.0)[0] == 0.0
    assert np.all(np.isfinite(f1_f2(GRID_ALPHA, 0.0, 0.0)))


def test_critical_curves():
    assert alpha_c(0.0, 1.0) == -HALF_PI
    assert alpha_c(1e-300, 1.0) == -HALF_PI
    assert alpha_c(1e12, 1.0) == pytest.approx(ALPHA_INF, abs=1e-12)
    assert alpha_c(2.0, 0.0) == pytest.approx(ALPHA_INF, abs=1e-15)
    assert beta_c(1.0, 0.0) == pytest.approx(math.asin(-7 / 8), abs=1e-15)
    assert np.all(np.diff(alpha_c(GRID_R, 1.0)) > 0)
    with pytest.raises(DomainError):
        alpha_c(0.0, 0.0)
    with pytest.raises(DomainError):
        beta_c(0.0, 0.0)
    with pytest.raises(DomainError):
        alpha_c(-1.0, 1.0)


def test_flat_approach_to_the_right_edge():
    # dr/dalpha = f2/f1 vanishes linearly in pi/2 - alpha
    r = np.linspace(0.05, 3.0, 30)
    slopes = [np.abs(np.divide(*f1_f2(np.full_like(r, HALF_PI - eps), r, 1.0)[::-1])) for eps in (1e-3, 1e-6)]
    assert np.all(slopes[1] < 1e-5)
    assert np.allclose(slopes[0] / slopes[1], 1e3, rtol=1e-2)


def test_state_validation():
    s = Sp1PhaseState(0.2, 1.0, 1.0)
    assert s.l == pytest.approx(0.5 * (math.sin(0.2) - 1.0))
    assert s.f == pytest.approx(5 * 2**0.6) and s.g == pytest.approx(4 * 2**-0.4)
    with pytest.raises(DomainError):
        Sp1PhaseState(2.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        Sp1PhaseState(0.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        Sp1PhaseState(0.0, 0.0, 0.0).g


# integrated fibres -----------------------------------------------------------------------


def test_fibres_from_the_asymptotic_line_cross_alpha_c():
    for r0 in (0.3, 1.0, 3.0):
        cv = integrate_fibre(Sp1PhaseState(ALPHA_INF, r0, 1.0))
        crossing = [e for e in cv.events if e.name == "alpha_c"]
        assert len(crossing) == 1 and crossing[0].direction == "forward"
        ev = crossing[0]
        assert ev.alpha == pytest.approx(alpha_c(ev.r, 1.0), abs=1e-8)
        assert abs(ev.slope) > 1e6  # vertical crossing
        right = [e for e in cv.events if e.name == "alpha_max"]
        assert len(right) == 1 and abs(right[0].slope) < 1e-3


@pytest.mark.parametrize("c,launch,topology", [
    (1.0, (-1.2, 1.0), "S3_x_R"),
    (1.0, (-1.2, 0.2), "R4_blue"),
    (1.0, (0.5, 1.0), "R4_blue"),
    (0.0, (-1.2, 1.0), "S3_x_R"),
    (0.0, (0.5, 1.0), "R4_blue"),
])
def test_classification(c, launch, topology):
    cv = integrate_fibre(Sp1PhaseState(*launch, c))
    assert cv.topology == topology == classify_sp1(cv)
    assert np.all(cv.r > 0)
    resid = [reduced_residual(a, r, *f1_f2(a, r, c), c) for a, r in zip(cv.alpha[::20], cv.r[::20])]
    assert max(abs(x) for x in resid) == 0.0


def test_green_fibre():
    c = 1.0
    assert green_slope(c) == pytest.approx(2 / math.sqrt(5))
    cv = integrate_fibre(green_launch(c))
    assert cv.topology == "R4_green" and cv.ends["backward"] == "equilibrium"
    sm = green_smoothness(cv)
    assert sm["A"] == pytest.approx(green_slope(c), rel=1e-3)
    assert sm["ratio"] == pytest.approx(1.0, rel=1e-3)
    assert sm["scale_ratio"] == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(DomainError):
        green_slope(0.0)


def test_exact_solutions():
    zero = integrate_fibre(Sp1PhaseState(0.3, 0.0, 1.0))
    assert zero.topology == "S4_zero_section" and np.all(zero.r == 0)
    vertical = integrate_fibre(Sp1PhaseState(-HALF_PI, 2.0, 1.0))
    assert vertical.topology == "vertical_fibre" and np.all(vertical.alpha == -HALF_PI)
    assert math.isnan(verify_cayley_sp1(zero))


def test_integrator_validation():
    s = Sp1PhaseState(0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate_fibre(s, direction="sideways")
    with pytest.raises(ValueError):
        integrate_fibre(s, direction_vector=(1.0, 1.0, 0.0, 0.0))
    with pytest.raises(TypeError):
        integrate_fibre(s, tolerance=1.0)
    with pytest.raises(ValueError):
        classify_sp1(integrate_fibre(s, direction="forward"))


# asymptotics and smoothness ---------------------------------------------------------------


@pytest.mark.parametrize("c", [0.0, 1.0])
def test_asymptotic_cones(c):
    cv = integrate_fibre(Sp1PhaseState(-1.2, 1.0, c))
    left = asymptotic_cone_sp1(cv, end="backward")
    right = asymptotic_cone_sp1(cv, end="forward")
    assert left["cone_constant"] == pytest.approx(9 / 25, rel=1e-2)
    assert right["cone_constant"] == pytest.approx(9 / 16, rel=1e-2)
    for fit in (left, right):
        assert fit["exponent"] == pytest.approx(2.0, rel=1e-3)
        assert fit["radial_coeff"] == pytest.approx(1.0, rel=1e-2)
    assert left["alpha_limit"] == pytest.approx(-HALF_PI, abs=1e-6)
    assert right["alpha_limit"] == pytest.approx(ALPHA_INF, abs=1e-4)
    blue = integrate_fibre(Sp1PhaseState(0.5, 1.0, c))
    with pytest.raises(ValueError):
        asymptotic_cone_sp1(blue, end="backward")


def test_blue_smoothness():
    sm = blue_smoothness(integrate_fibre(Sp1PhaseState(0.5, 1.0, 1.0)))
    assert sm["r0"] > 0
    assert sm["sigma_ratio"] == pytest.approx(1.0, rel=1e-3)
    assert sm["dalpha_ratio"] == pytest.approx(1.0, rel=1e-3)
    assert abs(sm["slope"]) < 1e-3


# Cayley condition along fibres -------------------------------------------------------------


@pytest.mark.parametrize("c,launch", [(1.0, (0.5, 1.0)), (1.0, (-1.2, 1.0)), (0.0, (-1.2, 0.2))])
def test_fibres_are_cayley(c, launch):
    n = (0.5, 0.5, 0.5, 0.5)
    cv = integrate_fibre(Sp1PhaseState(*launch, c), direction_vector=n)
    assert verify_cayley_sp1(cv, stride=10) < 1e-6
    assert verify_cayley_sp1(cv, stride=60, perturb=0.1) > 1e-6


def test_green_fibre_is_cayley():
    cv = integrate_fibre(green_launch(1.0))
    assert verify_cayley_sp1(cv, stride=10) < 1e-6


def test_cayley_residuals():
    rng = np.random.default_rng(3)
    for _ in range(50):
        alpha, r, c = rng.uniform(-1.5, 1.5), rng.uniform(0.05, 4.0), rng.uniform(0, 3)
        n = rng.normal(size=4)
        n /= np.linalg.norm(n)
        p = ChartPointSp1(alpha, (0.1, 0.9, 0.2), tuple(r * n), c=c)
        f1, f2 = f1_f2(alpha, r, c)
        assert np.max(np.abs(cayley_residuals(p, f1, f2 * n))) < 1e-10 * (1 + abs(f1) + abs(f2)) ** 2
        bumped = cayley_residuals(p, f1 + 0.1, f2 * n)
        assert np.max(np.abs(bumped)) > 1e-6
        rotated = cayley_residuals(p, f1, f2 * n + 0.1 * np.array([-n[1], n[0], -n[3], n[2]]))
        assert np.max(np.abs(rotated)) > 1e-6


# multi-moment maps -------------------------------------------------------------------------


def test_moment_map_anchor():
    r = np.linspace(0, 5, 11)
    for c in (0.0, 1.0, 2.5):
        assert np.max(np.abs(multi_moment_sp1(HALF_PI, r, c))) < 1e-12
    with pytest.raises(DomainError):
        multi_moment_sp1(0.0, -1.0, 1.0)


def test_moment_map_sign_regions():
    A, R = np.meshgrid(np.linspace(-HALF_PI, HALF_PI, 201)[:-1], np.linspace(0.01, 3.0, 100))
    # c = 0: nu vanishes on sin(alpha) = -7/8, negative below and positive above
    nu0 = multi_moment_sp1(A, R, 0.0)
    zero = math.asin(-7 / 8)
    assert np.all(nu0[A < zero - 1e-9] < 0) and np.all(nu0[A > zero + 1e-9] > 0)
    assert np.max(np.abs(multi_moment_sp1(zero, R[:, 0], 0.0))) < 1e-12 * np.max(np.abs(nu0))
    # c = 1: positive near the zero section, a negative pocket towards alpha = -pi/2 at larger r
    nu1 = multi_moment_sp1(A, R, 1.0)
    assert np.all(nu1[R < 1.0] > 0)
    assert np.any(nu1 < 0) and np.all(A[nu1 < 0] < zero)


def test_moment_map_is_a_multi_moment_map():
    rng = np.random.default_rng(11)
    for _ in range(4):
        n = rng.normal(size=4)
        n /= np.linalg.norm(n)
        p = ChartPointSp1(rng.uniform(-1.2, 1.2), (0.3, 1.0, 0.6), tuple(rng.uniform(0.3, 2.0) * n), c=1.0)
        sp = moment_ratio_sp1(p)
        assert sp["ratio"] == pytest.approx(1.0, rel=1e-6) and sp["relative_residual"] < 1e-6
        fb = moment_ratio_fibre(p)
        assert fb["ratio"] == pytest.approx(-1.0, rel=1e-6) and fb["relative_residual"] < 1e-6
