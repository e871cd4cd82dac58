"""Cayley test for tangent 4-planes.

A 4-plane spanned by ``u, v, w, y`` is Cayley up to orientation exactly when

    eta = pi_7(u^b ^ B(v,w,y) + v^b ^ B(w,u,y) + w^b ^ B(u,v,y) + y^b ^ B(v,u,w))

vanishes, where ``B(u,v,w) = w _| v _| u _| Phi`` and ``pi_7`` is the
projection onto the 7-dimensional summand of the 2-forms.  ``eta`` is
alternating and 4-linear in the spanning vectors, so ``|eta| / vol_4`` depends
only on the plane; that ratio is the residual used for thresholding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forms import DIM, KForm, combos, flat, interior_product, norm, wedge
from .geometry import StructurePack

GRAM_THRESHOLD = 1e-10


@dataclass(frozen=True)
class FourPlane:
    """A 4-plane given by four spanning tangent vectors (frame components)."""

    spanning: tuple

    def __post_init__(self):
        vecs = tuple(np.array(v, dtype=float) for v in self.spanning)
        if len(vecs) != 4 or any(v.shape != (DIM,) for v in vecs):
            raise ValueError("a FourPlane needs exactly four vectors with 8 components")
        if not all(np.all(np.isfinite(v)) for v in vecs):
            raise ValueError("spanning vectors must be finite")
        for v in vecs:
            v.setflags(write=False)
        object.__setattr__(self, "spanning", vecs)

    @classmethod
    def of(cls, *vectors) -> "FourPlane":
        return cls(tuple(vectors))

    def gram(self, pack: StructurePack) -> np.ndarray:
        m = np.column_stack(self.spanning)
        return m.T @ pack.metric.gram @ m

    def volume(self, pack: StructurePack) -> float:
        """4-volume of the parallelepiped spanned by the vectors; rejects degenerate planes."""
        g = self.gram(pack)
        diag = np.diag(g)
        if np.any(diag <= 0):
            raise ValueError("degenerate plane: a spanning vector has zero length")
        det = np.linalg.det(g)
        if det / np.prod(diag) < GRAM_THRESHOLD:
            raise ValueError("degenerate plane: spanning vectors are (nearly) linearly dependent")
        return float(np.sqrt(det))


def triple_B(u, v, w, pack: StructurePack) -> KForm:
    """``B(u, v, w) = w _| v _| u _| Phi``, a 1-form."""
    return interior_product(w, interior_product(v, interior_product(u, pack.phi)))


def pi7_matrix(pack: StructurePack) -> np.ndarray:
    """Matrix of pi_7 on coefficient vectors of 2-forms (columns: images of basis 2-forms).

    Column ``(a, b)`` is ``(theta^a ^ theta^b + A _| B _| Phi) / 4`` with
    ``A, B`` the metric duals of ``theta^a, theta^b``.
    """
    cached = pack.extras.get("pi7")
    if cached is not None:
        return cached
    tensor = pack.phi.to_tensor()
    ginv = pack.metric.inverse
    # A _| (B _| Phi) = Phi(B, A, ., .)
    contracted = np.einsum("ai,bj,jikl->abkl", ginv, ginv, tensor)
    pairs = np.array(combos(2))
    first, second = pairs[:, 0], pairs[:, 1]
    image = contracted[first[:, None], second[:, None], first[None, :], second[None, :]]
    mat = 0.25 * (np.eye(len(pairs)) + image.T)
    mat.setflags(write=False)
    pack.extras["pi7"] = mat
    return mat


def pi7(a: KForm, pack: StructurePack) -> KForm:
    if a.degree != 2:
        raise ValueError(f"pi7 acts on 2-forms, got degree {a.degree}")
    return KForm.from_array(2, pi7_matrix(pack) @ a.to_array())


def pi21(a: KForm, pack: StructurePack) -> KForm:
    return a - pi7(a, pack)


def psi_terms(plane: FourPlane, pack: StructurePack) -> tuple[KForm, KForm, KForm, KForm]:
    """The four 2-forms ``u^b ^ B(v,w,y)``, ``v^b ^ B(w,u,y)``, ``w^b ^ B(u,v,y)``, ``y^b ^ B(v,u,w)``."""
    u, v, w, y = plane.spanning
    g = pack.metric
    return (
        wedge(flat(u, g), triple_B(v, w, y, pack)),
        wedge(flat(v, g), triple_B(w, u, y, pack)),
        wedge(flat(w, g), triple_B(u, v, y, pack)),
        wedge(flat(y, g), triple_B(v, u, w, pack)),
    )


def eta(plane: FourPlane, pack: StructurePack) -> KForm:
    """The obstruction 2-form; rejects degenerate planes."""
    plane.volume(pack)
    p1, p2, p3, p4 = psi_terms(plane, pack)
    return pi7(p1 + p2 + p3 + p4, pack)


@dataclass(frozen=True)
class CayleyReport:
    is_cayley: bool
    residual: float  # |eta| / vol_4, scale free
    calibration: float  # Phi(u, v, w, y) / vol_4, equals +-1 on Cayley planes
    orientation: int  # sign of the calibration value


def eta_residual(plane: FourPlane, pack: StructurePack) -> float:
    vol4 = plane.volume(pack)
    return norm(eta(plane, pack), pack.metric) / vol4


def calibration_ratio(plane: FourPlane, pack: StructurePack) -> float:
    """``Phi(u, v, w, y) / vol_4``; its absolute value is at most 1."""
    return pack.phi.evaluate(*plane.spanning) / plane.volume(pack)


def is_cayley(plane: FourPlane, pack: StructurePack, tol: float = 1e-8) -> CayleyReport:
    """Cayley test up to orientation, with the residual and the orientation sign reported."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    vol4 = plane.volume(pack)
    residual = norm(eta(plane, pack), pack.metric) / vol4
    calib = pack.phi.evaluate(*plane.spanning) / vol4
    return CayleyReport(bool(residual < tol), float(residual), float(calib), int(np.sign(calib)))


def is_calibrated(plane: FourPlane, pack: StructurePack, tol: float = 1e-8) -> bool:
    """Direct test ``|Phi(plane)| = vol_4(plane)``."""
    return bool(abs(abs(calibration_ratio(plane, pack)) - 1.0) < tol)


def cayley_completion(u, v, w, pack: StructurePack) -> np.ndarray:
    """The metric dual of ``B(u, v, w)``; ``{u, v, w, B(u,v,w)^#}`` spans a Cayley plane."""
    return pack.metric.inverse @ triple_B(u, v, w, pack).to_array()


def lambda_basis(pack: StructurePack) -> tuple[KForm, ...]:
    """Seven 2-forms spanning the 7-dimensional summand, in the SO(3) diagonalizing coframe."""
    if pack.chart != "so3" or pack.basis != "diagonalizing":
        raise ValueError("lambda_basis needs an SO(3) pack in the diagonalizing basis")
    p = pack.point
    K = p.c + p.r2
    sa, ca = np.sin(p.alpha), np.cos(p.alpha)
    # 0 dalpha, 1 dbeta, 2 sigma2, 3 sigma3, 4 ds~, 5 dt~, 6 omega1, 7 omega2
    B = KForm.basis

    def total(*terms):
        out = terms[0]
        for term in terms[1:]:
            out = out + term
        return out

    return (
        total(B(2, 6, coeff=-ca), B(0, 7), B(1, 5, coeff=2 * sa), B(3, 4, coeff=2 * ca)),
        total(B(2, 7, coeff=ca), B(0, 6), B(1, 4, coeff=-2 * sa), B(3, 5, coeff=2 * ca)),
        total(B(3, 6, coeff=ca), B(1, 7, coeff=sa), B(2, 4, coeff=2 * ca), B(0, 5, coeff=-2)),
        total(B(3, 7, coeff=-ca), B(1, 6, coeff=sa), B(2, 5, coeff=2 * ca), B(0, 4, coeff=2)),
        total(B(3, 0, coeff=5 * K * ca), B(2, 1, coeff=5 * K * sa * ca), B(7, 4, coeff=2), B(6, 5, coeff=2)),
        total(B(3, 1, coeff=5 * K * sa * ca), B(2, 0, coeff=-5 * K * ca), B(7, 6), B(5, 4, coeff=4)),
        total(B(1, 0, coeff=5 * K * sa), B(3, 2, coeff=5 * K * ca**2), B(4, 6, coeff=2), B(5, 7, coeff=-2)),
    )
