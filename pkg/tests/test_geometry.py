"""Charts, coframes and the Bryant-Salamon structures."""

import numpy as np
import pytest

from bscayley.errors import DomainError
from bscayley.forms import KForm, exterior_derivative, hodge_star, wedge
from bscayley.geometry import (
    ChartPointSO3,
    ChartPointSp1,
    build_pack,
    coframe_jacobian,
    flat_pack,
    metric_coordinates,
    multi_moment_fibre,
    phi_coordinates,
    sample_so3_points,
    sample_sp1_points,
    so3_phi_closed_form,
    sp1_phi_closed_form,
    verify_torsion_free,
)

CYCLIC = ((1, 2), (2, 0), (0, 1))


def _points(seed=5):
    rng = np.random.default_rng(seed)
    return sample_so3_points(rng, 3, 1.0) + sample_so3_points(rng, 2, 0.0) + sample_sp1_points(rng, 3, 0.5)


def _d_of(point, getter):
    """Exterior derivative of a pack-valued 1-form field, returned in the pack coframe."""
    def jac(y):
        return build_pack(point.with_coords(y)).jacobian

    return exterior_derivative(lambda y: getter(build_pack(point.with_coords(y))), point.coords, jacobian=jac)


@pytest.mark.parametrize("point", _points(), ids=lambda p: type(p).__name__)
def test_connection_curvature(point):
    # d rho_i = -2 rho_j ^ rho_k + Omega_i / 2 on the round S^4
    pk = build_pack(point)
    for i, (j, k) in enumerate(CYCLIC):
        lhs = _d_of(point, lambda q, i=i: q.rho[i])
        rhs = -2.0 * wedge(pk.rho[j], pk.rho[k]) + 0.5 * pk.omega_cap[i]
        assert (lhs - rhs).max_abs() < 1e-8


@pytest.mark.parametrize("point", _points(6), ids=lambda p: type(p).__name__)
def test_vertical_forms_structure_equations(point):
    pk = build_pack(point)
    X, R, O = pk.xi, pk.rho, pk.omega_cap
    a = point.fibre_coords
    expected = (
        wedge(X[1], R[0]) + wedge(X[2], R[1]) + wedge(X[3], R[2]) + 0.5 * (a[1] * O[0] + a[2] * O[1] + a[3] * O[2]),
        -1.0 * wedge(X[0], R[0]) - wedge(X[2], R[2]) + wedge(X[3], R[1])
        + 0.5 * (-a[0] * O[0] - a[2] * O[2] + a[3] * O[1]),
        -1.0 * wedge(X[0], R[1]) + wedge(X[1], R[2]) - wedge(X[3], R[0])
        + 0.5 * (-a[0] * O[1] + a[1] * O[2] - a[3] * O[0]),
        -1.0 * wedge(X[0], R[2]) - wedge(X[1], R[1]) + wedge(X[2], R[0])
        + 0.5 * (-a[0] * O[2] - a[1] * O[1] + a[2] * O[0]),
    )
    for i, rhs in enumerate(expected):
        assert (_d_of(point, lambda q, i=i: q.xi[i]) - rhs).max_abs() < 1e-8


def test_left_invariant_orbit_coframe():
    # in the Sp(1) chart the coframe slots 1..3 are half the Euler forms: d sigma_i = 2 sigma_j ^ sigma_k
    p = sample_sp1_points(np.random.default_rng(1), 1, 1.0)[0]
    for i, (j, k) in enumerate(CYCLIC):
        d_sigma = _d_of(p, lambda q, i=i: KForm.basis(1 + i))
        assert d_sigma.allclose(KForm.basis(1 + j, 1 + k, coeff=2.0), atol=1e-9)


def test_euler_coframe_in_so3_chart():
    # adapted coframe slots 0..2 are the Euler forms in (gamma, theta, phi): d sigma_1 = sigma_2 ^ sigma_3
    p = sample_so3_points(np.random.default_rng(1), 1, 1.0)[0]

    def jac(y):
        return build_pack(p.with_coords(y), "adapted").jacobian

    for i, (j, k) in enumerate(CYCLIC):
        d_sigma = exterior_derivative(lambda y, i=i: KForm.basis(i), p.coords, jacobian=jac)
        assert d_sigma.allclose(KForm.basis(j, k), atol=1e-9)


@pytest.mark.parametrize("chart", ["so3", "sp1"])
@pytest.mark.parametrize("c", [0.0, 1.0])
def test_torsion_free(chart, c):
    rep = verify_torsion_free(chart, c, n_points=40, seed=3)
    assert rep["max_abs_coeff"] < 1e-6
    assert rep["n_points"] == 40


@pytest.mark.parametrize("chart", ["so3", "sp1"])
def test_torsion_check_detects_a_rescaled_form(chart):
    # f Phi with non-constant f is not closed: d(f Phi) = df ^ Phi
    def distractor(p):
        return (1.0 + 0.1 * p.coords[0]) * phi_coordinates(p)

    rep = verify_torsion_free(chart, 1.0, n_points=10, seed=3, phi_builder=distractor)
    assert rep["max_abs_coeff"] > 1e-2


def test_torsion_check_validates_input():
    with pytest.raises(DomainError):
        verify_torsion_free("so3", -1.0, n_points=1)
    with pytest.raises(ValueError):
        verify_torsion_free("g2", 1.0, n_points=1)
    with pytest.raises(ValueError):
        verify_torsion_free("so3", 1.0, n_points=0)


@pytest.mark.parametrize("point", _points(7), ids=lambda p: type(p).__name__)
def test_closed_forms_in_special_coframes(point):
    pk = build_pack(point)
    closed = so3_phi_closed_form(point) if isinstance(point, ChartPointSO3) else sp1_phi_closed_form(point)
    assert closed.allclose(pk.phi, atol=1e-10 * pk.phi.max_abs())
    jinv = np.linalg.inv(coframe_jacobian(point))
    gram = jinv.T @ metric_coordinates(point) @ jinv
    assert np.allclose(gram, pk.metric.gram, rtol=1e-10, atol=1e-10 * np.abs(gram).max())


@pytest.mark.parametrize("point", _points(8), ids=lambda p: type(p).__name__)
def test_pointwise_algebra(point):
    pk = build_pack(point)
    top = tuple(range(8))
    assert np.isclose(wedge(pk.phi, pk.phi)[top], 14.0 * pk.volume[top], rtol=1e-10)
    assert np.isclose(pk.volume[top], pk.metric.sqrt_det, rtol=1e-10)
    assert hodge_star(pk.phi, pk.metric, pk.volume).allclose(pk.phi, atol=1e-9 * pk.phi.max_abs())


def test_adapted_and_diagonalizing_coframes_agree():
    p = sample_so3_points(np.random.default_rng(2), 1, 1.0)[0]
    diag, adapted = build_pack(p, "diagonalizing"), build_pack(p, "adapted")
    v = np.random.default_rng(3).normal(size=(4, 8))  # coordinate vectors
    val_diag = diag.phi.evaluate(*(diag.to_frame(x) for x in v))
    val_adapted = adapted.phi.evaluate(*(adapted.to_frame(x) for x in v))
    assert np.isclose(val_diag, val_adapted, rtol=1e-9)
    assert np.isclose(phi_coordinates(p).evaluate(*v), val_diag, rtol=1e-9)


def test_flat_model():
    pk = flat_pack()
    assert len(pk.phi.coeffs) == 14
    assert set(np.abs(list(pk.phi.coeffs.values()))) == {1.0}
    assert hodge_star(pk.phi, pk.metric, pk.volume).allclose(pk.phi)
    assert wedge(pk.phi, pk.phi)[tuple(range(8))] == 14.0


def test_chart_validation():
    with pytest.raises(DomainError):
        ChartPointSO3(0.0, 0, 1, 0, 1, 1, 0, 0)
    with pytest.raises(DomainError):
        ChartPointSO3(0.5, 0, 1, 0, 0.0, 1, 0, 0)
    with pytest.raises(DomainError):
        ChartPointSO3(0.5, 0, 1, 0, 1, 1, 0, 0, c=-1.0)
    with pytest.raises(DomainError):
        ChartPointSO3(0.5, 0, 1, 0, 1, np.nan, 0, 0)
    with pytest.raises(DomainError):
        ChartPointSp1(np.pi / 2, (0, 1, 0), (1, 0, 0, 0))
    with pytest.raises(DomainError):
        ChartPointSp1(0.0, (0, 0.0, 0), (1, 0, 0, 0))
    with pytest.raises(DomainError):
        ChartPointSp1(0.0, (0, 1, 0), (1, 0, 0))


def test_fibre_coordinates_of_so3_chart():
    p = ChartPointSO3(0.4, 0.1, 1.0, 0.2, 0.6, 0.9, 0.3, 0.5)
    a = p.fibre_coords
    assert np.isclose(a @ a, p.r2)
    assert np.isclose(p.u, 0.54) and np.isclose(p.v, 2.0 / 3.0)


def test_fibre_moment_map_anchor():
    assert multi_moment_fibre(0.0, 1.0) == 0.0
    assert multi_moment_fibre(0.0, 2.5) == pytest.approx(0.0, abs=1e-12)
    assert multi_moment_fibre(0.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        multi_moment_fibre(-1.0, 1.0)
    # d nu / dr = 16 r^3 K^{-4/5}: increasing, so nu > 0 off the zero section and nu ~ 4 c^{-4/5} r^4
    r = np.linspace(0.01, 5, 200)
    nu = np.array([multi_moment_fibre(x, 1.0) for x in r])
    assert np.all(nu > 0) and np.all(np.diff(nu) > 0)
    assert multi_moment_fibre(1e-3, 2.0) == pytest.approx(4.0 * 2.0**-0.8 * 1e-12, rel=1e-5)
