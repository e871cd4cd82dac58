"""The Cayley test for 4-planes and the projection onto Lambda^2_7."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bscayley.cayley import (
    FourPlane,
    calibration_ratio,
    cayley_completion,
    eta,
    eta_residual,
    is_calibrated,
    is_cayley,
    lambda_basis,
    pi7,
    pi7_matrix,
    pi21,
)
from bscayley.forms import KForm, combos, hodge_star, wedge
from bscayley.geometry import build_pack, flat_pack, sample_so3_points, sample_sp1_points

seeds = st.integers(min_value=0, max_value=2**32 - 1)
FLAT = flat_pack()


def _random_plane(rng, pack, cayley: bool) -> FourPlane:
    u, v, w = rng.normal(size=(3, 8))
    y = cayley_completion(u, v, w, pack) if cayley else rng.normal(size=8)
    return FourPlane.of(u, v, w, y)


def test_flat_oracle_agreement():
    rng = np.random.default_rng(12)
    agree, n_cayley = 0, 0
    for k in range(1000):
        plane = _random_plane(rng, FLAT, cayley=k % 2 == 0)
        by_eta = is_cayley(plane, FLAT, tol=1e-8).is_cayley
        by_phi = is_calibrated(plane, FLAT, tol=1e-8)
        agree += by_eta == by_phi
        n_cayley += by_eta
    assert agree == 1000
    assert n_cayley == 500


def test_coordinate_planes_of_the_flat_model():
    e = np.eye(8)
    # dx0123 and da0123 appear in Phi with coefficient +1
    for idx in ((0, 1, 2, 3), (4, 5, 6, 7)):
        rep = is_cayley(FourPlane.of(*e[list(idx)]), FLAT)
        assert rep.is_cayley and rep.orientation == 1 and rep.calibration == pytest.approx(1.0)
    # a mixed coordinate plane that does not appear in Phi is far from Cayley
    rep = is_cayley(FourPlane.of(e[0], e[1], e[2], e[4]), FLAT)
    assert not rep.is_cayley and rep.calibration == 0.0


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_calibration_inequality(seed):
    rng = np.random.default_rng(seed)
    plane = _random_plane(rng, FLAT, cayley=False)
    assert abs(calibration_ratio(plane, FLAT)) <= 1.0 + 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_residual_depends_only_on_the_plane(seed):
    rng = np.random.default_rng(seed)
    plane = _random_plane(rng, FLAT, cayley=False)
    mix = rng.normal(size=(4, 4)) + 2 * np.eye(4)
    vecs = np.column_stack(plane.spanning) @ mix
    other = FourPlane.of(*vecs.T)
    assert eta_residual(other, FLAT) == pytest.approx(eta_residual(plane, FLAT), rel=1e-8)
    # eta itself is 4-linear and alternating
    scaled = eta(other, FLAT)
    assert scaled.allclose(np.linalg.det(mix) * eta(plane, FLAT), atol=1e-8 * max(1.0, scaled.max_abs()))


def test_orientation_flip_changes_sign_only():
    rng = np.random.default_rng(4)
    u, v, w = rng.normal(size=(3, 8))
    y = cayley_completion(u, v, w, FLAT)
    plus, minus = is_cayley(FourPlane.of(u, v, w, y), FLAT), is_cayley(FourPlane.of(u, v, w, -y), FLAT)
    assert plus.is_cayley and minus.is_cayley
    assert plus.orientation == -minus.orientation
    assert plus.calibration == pytest.approx(-minus.calibration)


def test_detects_small_tilts():
    rng = np.random.default_rng(5)
    u, v, w = rng.normal(size=(3, 8))
    y = cayley_completion(u, v, w, FLAT)
    normal = rng.normal(size=8)
    for eps in (1e-2, 1e-4):
        rep = is_cayley(FourPlane.of(u, v, w, y + eps * np.linalg.norm(y) * normal), FLAT)
        assert not rep.is_cayley and rep.residual > 1e-3 * eps


def test_degenerate_planes_rejected():
    e = np.eye(8)
    with pytest.raises(ValueError):
        is_cayley(FourPlane.of(e[0], e[1], e[2], e[0] + e[1]), FLAT)
    with pytest.raises(ValueError):
        is_cayley(FourPlane.of(e[0], e[1], e[2], np.zeros(8)), FLAT)
    with pytest.raises(ValueError):
        FourPlane.of(e[0], e[1], e[2])
    with pytest.raises(ValueError):
        is_cayley(FourPlane.of(*e[:4]), FLAT, tol=0.0)


def _packs():
    rng = np.random.default_rng(9)
    return [build_pack(p) for p in sample_so3_points(rng, 3, 1.0) + sample_sp1_points(rng, 3, 0.0)] + [FLAT]


@pytest.mark.parametrize("pack", _packs(), ids=lambda p: p.chart)
def test_projection_properties(pack):
    m = pi7_matrix(pack)
    assert np.allclose(m @ m, m, atol=1e-10 * np.abs(m).max())
    assert np.linalg.matrix_rank(m, tol=1e-8 * np.abs(m).max()) == 7
    rng = np.random.default_rng(1)
    a = KForm.from_array(2, rng.normal(size=len(combos(2))))
    assert (pi7(a, pack) + pi21(a, pack)).allclose(a, atol=1e-10)


@pytest.mark.parametrize("pack", _packs(), ids=lambda p: p.chart)
def test_projection_is_an_eigenspace_of_phi_wedge(pack):
    # omega -> *(Phi ^ omega) has eigenvalues of modulus 3 on Lambda^2_7 and 1 on Lambda^2_21 (trace 0).
    # With the sign of Phi used throughout the values are -3 and +1; -Phi would give +3 and -1.
    rng = np.random.default_rng(2)
    a = KForm.from_array(2, rng.normal(size=len(combos(2))))
    seven, twentyone = pi7(a, pack), pi21(a, pack)

    def op(w):
        return hodge_star(wedge(pack.phi, w), pack.metric, pack.volume)

    scale = a.max_abs() * max(1.0, np.abs(pack.metric.gram).max())
    assert op(seven).allclose(-3.0 * seven, atol=1e-9 * scale)
    assert op(twentyone).allclose(twentyone, atol=1e-9 * scale)


def test_lambda_basis_spans_lambda7():
    p = sample_so3_points(np.random.default_rng(3), 1, 1.0)[0]
    pack = build_pack(p)
    lam = lambda_basis(pack)
    m = pi7_matrix(pack)
    arrays = np.array([x.to_array() for x in lam])
    assert np.allclose(arrays @ m.T, arrays, atol=1e-10 * np.abs(arrays).max())
    assert np.linalg.matrix_rank(arrays) == 7
    with pytest.raises(ValueError):
        lambda_basis(build_pack(p, "adapted"))


@pytest.mark.parametrize("pack", _packs()[:-1], ids=lambda p: p.chart)
def test_curved_charts(pack):
    e = np.eye(8)
    for idx in ((0, 1, 2, 3), (4, 5, 6, 7)):
        assert is_cayley(FourPlane.of(*e[list(idx)]), pack).is_cayley
    rng = np.random.default_rng(8)
    completed = _random_plane(rng, pack, cayley=True)
    rep = is_cayley(completed, pack)
    assert rep.is_cayley and abs(rep.calibration) == pytest.approx(1.0, abs=1e-9)
    generic = _random_plane(rng, pack, cayley=False)
    assert not is_cayley(generic, pack).is_cayley
    assert not is_calibrated(generic, pack)
