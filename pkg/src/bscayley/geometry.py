"""Bryant-Salamon structures on the negative spinor bundle of S^4 in explicit charts.

Two charts are provided.

``so3`` -- coordinates ``(alpha, beta, theta, phi, s, t, delta, gamma)`` adapted
to the lift of the SO(3) x Id_2 action on S^4.  Two coframes are exposed:

* ``diagonalizing``: ``(dalpha, dbeta, sigma_2, sigma_3, ds~, dt~, omega_1, omega_2)``
  in which the metric is diagonal;
* ``adapted``: ``(sigma_1, sigma_2, sigma_3, dalpha, dbeta, ds, dt, ddelta)``
  in which the first three covectors are dual to the orbit directions.

``sp1`` -- coordinates ``(alpha, gamma, theta, phi, a_0, a_1, a_2, a_3)`` adapted
to the lift of the Sp(1) x Id_1 action, with coframe
``(dalpha, sigma_1, sigma_2, sigma_3, xi_0, xi_1, xi_2, xi_3)``.

Every structure (Cayley 4-form, metric, volume form, connection forms, vertical
and horizontal forms) is first assembled in chart coordinate differentials from
the base coframe ``b_i``, the connection forms ``rho_i`` and the fibre
coordinates ``a_i``.  Structure packs move these 1-forms to the requested
coframe with the inverse coframe Jacobian and only then take wedge products,
which keeps rounding under control where the chart degenerates.  The
closed-form expressions in the special coframes are kept separately and used
as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError
from .forms import DIM, KForm, MetricAtPoint, exterior_derivative, wedge_rows

CYCLIC = ((1, 2, 3), (2, 3, 1), (3, 1, 2))

SO3_COORDS = ("alpha", "beta", "theta", "phi", "s", "t", "delta", "gamma")
SP1_COORDS = ("alpha", "gamma", "theta", "phi", "a0", "a1", "a2", "a3")
SO3_BASES = {
    "diagonalizing": ("dalpha", "dbeta", "sigma2", "sigma3", "ds~", "dt~", "omega1", "omega2"),
    "adapted": ("sigma1", "sigma2", "sigma3", "dalpha", "dbeta", "ds", "dt", "ddelta"),
}
SP1_BASIS = ("dalpha", "sigma1", "sigma2", "sigma3", "xi0", "xi1", "xi2", "xi3")


def _finite(*values) -> bool:
    return all(np.isfinite(v) for v in values)


# chart points ---------------------------------------------------------------


@dataclass(frozen=True)
class ChartPointSO3:
    """A point of the SO(3) x Id_2 chart together with the scale parameter ``c``.

    The angles ``beta, phi, delta, gamma`` are periodic and accepted as any
    finite real number.
    """

    alpha: float
    beta: float
    theta: float
    phi: float
    s: float
    t: float
    delta: float
    gamma: float
    c: float = 1.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.theta, self.phi, self.s, self.t, self.delta, self.gamma, self.c)
        if not _finite(*vals):
            raise DomainError("chart coordinates must be finite")
        if self.c < 0:
            raise DomainError(f"c must be >= 0, got {self.c}")
        if not 0.0 < self.alpha < np.pi / 2:
            raise DomainError(f"alpha={self.alpha} outside (0, pi/2)")
        if not 0.0 < self.theta < np.pi:
            raise DomainError(f"theta={self.theta} outside (0, pi)")
        if self.s <= 0 or self.t <= 0:
            raise DomainError(f"s and t must be positive, got s={self.s}, t={self.t}")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.theta, self.phi, self.s, self.t, self.delta, self.gamma])

    @classmethod
    def from_coords(cls, x, c: float) -> "ChartPointSO3":
        return cls(*(float(v) for v in x), c=c)

    def with_coords(self, x) -> "ChartPointSO3":
        return self.from_coords(x, self.c)

    @property
    def r2(self) -> float:
        return self.s**2 + self.t**2

    @property
    def u(self) -> float:
        return self.s * self.t

    @property
    def v(self) -> float:
        return self.s / self.t

    @property
    def fibre_coords(self) -> np.ndarray:
        hm, hp = 0.5 * (self.delta - self.gamma), 0.5 * (self.delta + self.gamma)
        return np.array([self.s * np.cos(hm), self.s * np.sin(hm), self.t * np.cos(hp), self.t * np.sin(hp)])


@dataclass(frozen=True)
class ChartPointSp1:
    """A point of the Sp(1) x Id_1 chart: ``alpha``, orbit angles ``(gamma, theta, phi)``, fibre ``a``."""

    alpha: float
    orbit: tuple[float, float, float]
    a: tuple[float, float, float, float]
    c: float = 1.0

    def __post_init__(self):
        orbit = tuple(float(v) for v in self.orbit)
        a = tuple(float(v) for v in self.a)
        if len(orbit) != 3 or len(a) != 4:
            raise DomainError("orbit needs 3 angles and a needs 4 components")
        object.__setattr__(self, "orbit", orbit)
        object.__setattr__(self, "a", a)
        if not _finite(self.alpha, self.c, *orbit, *a):
            raise DomainError("chart coordinates must be finite")
        if self.c < 0:
            raise DomainError(f"c must be >= 0, got {self.c}")
        if not -np.pi / 2 < self.alpha < np.pi / 2:
            raise DomainError(f"alpha={self.alpha} outside (-pi/2, pi/2)")
        if not 0.0 < orbit[1] < np.pi:
            raise DomainError(f"theta={orbit[1]} outside (0, pi)")
        if self.r2 <= 0.0:
            raise DomainError("fibre coordinates a must not all vanish")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.alpha, *self.orbit, *self.a])

    @classmethod
    def from_coords(cls, x, c: float) -> "ChartPointSp1":
        x = [float(v) for v in x]
        return cls(x[0], tuple(x[1:4]), tuple(x[4:8]), c=c)

    def with_coords(self, x) -> "ChartPointSp1":
        return self.from_coords(x, self.c)

    @property
    def r2(self) -> float:
        return float(sum(v * v for v in self.a))

    @property
    def r(self) -> float:
        return float(np.sqrt(self.r2))

    @property
    def l(self) -> float:
        return 0.5 * (np.sin(self.alpha) - 1.0)

    @property
    def fibre_coords(self) -> np.ndarray:
        return np.array(self.a)


# raw coordinate data --------------------------------------------------------


def _euler_forms(gamma: float, theta: float, i_gamma: int, i_theta: int, i_phi: int) -> np.ndarray:
    """Left-invariant Euler coframe with d(sigma_1) = sigma_2 ^ sigma_3, as rows."""
    out = np.zeros((3, DIM))
    cg, sg, ct, st = np.cos(gamma), np.sin(gamma), np.cos(theta), np.sin(theta)
    out[0, i_gamma] = 1.0
    out[0, i_phi] = ct
    out[1, i_theta] = cg
    out[1, i_phi] = sg * st
    out[2, i_theta] = sg
    out[2, i_phi] = -cg * st
    return out


def _vertical_forms(a: np.ndarray, da: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """xi_i = da_i + (connection terms), as rows in coordinate differentials."""
    r1, r2, r3 = rho
    a0, a1, a2, a3 = a
    return np.array([
        da[0] + r1 * a1 + r2 * a2 + r3 * a3,
        da[1] - r1 * a0 - r3 * a2 + r2 * a3,
        da[2] - r2 * a0 + r3 * a1 - r1 * a3,
        da[3] - r3 * a0 - r2 * a1 + r1 * a2,
    ])


@dataclass(frozen=True)
class _Raw:
    """Structure 1-forms of a chart point, as rows in coordinate differentials."""

    b: np.ndarray  # (4, 8)
    rho: np.ndarray  # (3, 8)
    xi: np.ndarray  # (4, 8)
    a: np.ndarray  # (4,)
    c: float

    @property
    def K(self) -> float:
        return self.c + float(self.a @ self.a)


def _raw_so3(p: ChartPointSO3) -> _Raw:
    al, th = p.alpha, p.theta
    sa, ca, st, ct = np.sin(al), np.cos(al), np.sin(th), np.cos(th)
    b = np.zeros((4, DIM))
    b[0, 0] = 1.0
    b[1, 1] = sa
    b[2, 2] = ca
    b[3, 3] = ca * st
    rho = np.zeros((3, DIM))
    rho[0, 1] = -0.5 * ca
    rho[0, 3] = 0.5 * ct
    rho[1, 2] = 0.5 * sa
    rho[2, 3] = 0.5 * sa * st
    hm, hp = 0.5 * (p.delta - p.gamma), 0.5 * (p.delta + p.gamma)
    a = p.fibre_coords
    da = np.zeros((4, DIM))
    # indices: s=4, t=5, delta=6, gamma=7
    da[0, 4], da[0, 6], da[0, 7] = np.cos(hm), -0.5 * p.s * np.sin(hm), 0.5 * p.s * np.sin(hm)
    da[1, 4], da[1, 6], da[1, 7] = np.sin(hm), 0.5 * p.s * np.cos(hm), -0.5 * p.s * np.cos(hm)
    da[2, 5], da[2, 6], da[2, 7] = np.cos(hp), -0.5 * p.t * np.sin(hp), -0.5 * p.t * np.sin(hp)
    da[3, 5], da[3, 6], da[3, 7] = np.sin(hp), 0.5 * p.t * np.cos(hp), 0.5 * p.t * np.cos(hp)
    return _Raw(b=b, rho=rho, xi=_vertical_forms(a, da, rho), a=a, c=p.c)


def _sp1_sigma(p: ChartPointSp1) -> np.ndarray:
    """sigma_i with d(sigma_1) = 2 sigma_2 ^ sigma_3 (half the Euler coframe)."""
    return 0.5 * _euler_forms(p.orbit[0], p.orbit[1], 1, 2, 3)


def _raw_sp1(p: ChartPointSp1) -> _Raw:
    sig = _sp1_sigma(p)
    ca = np.cos(p.alpha)
    b = np.zeros((4, DIM))
    b[0, 0] = 1.0
    b[1:] = ca * sig
    rho = p.l * sig
    a = p.fibre_coords
    da = np.zeros((4, DIM))
    da[np.arange(4), 4 + np.arange(4)] = 1.0
    return _Raw(b=b, rho=rho, xi=_vertical_forms(a, da, rho), a=a, c=p.c)


def _raw(p) -> _Raw:
    if isinstance(p, ChartPointSO3):
        return _raw_so3(p)
    if isinstance(p, ChartPointSp1):
        return _raw_sp1(p)
    raise TypeError(f"unsupported chart point type {type(p).__name__}")


def _two_forms(rows: np.ndarray) -> np.ndarray:
    """Anti-self-dual combinations x0^xi - xj^xk for i = 1, 2, 3, as stacked pairs."""
    return np.array([[[rows[0], rows[i]], [rows[j], rows[k]]] for i, j, k in CYCLIC])


def _phi_array(raw: _Raw) -> np.ndarray:
    """Coefficients of Phi_c over coordinate 4-tuples."""
    K = raw.K
    quads = [raw.xi, raw.b]
    signs = [16.0 * K ** -0.8, 25.0 * K ** 1.2]
    xi2, b2 = _two_forms(raw.xi), _two_forms(raw.b)
    w = 20.0 * K ** 0.2
    for i in range(3):
        for pa, sa in ((0, 1.0), (1, -1.0)):
            for pb, sb in ((0, 1.0), (1, -1.0)):
                quads.append(np.concatenate([xi2[i, pa], b2[i, pb]]))
                signs.append(w * sa * sb)
    return np.asarray(signs) @ wedge_rows(np.stack(quads))


def phi_coordinates(p) -> KForm:
    """Phi_c at a chart point, in chart coordinate differentials."""
    return KForm.from_array(4, _phi_array(_raw(p)))


# coframes -------------------------------------------------------------------


def so3_coframe_jacobian(p: ChartPointSO3, basis: str = "diagonalizing") -> np.ndarray:
    """Rows: the requested coframe 1-forms in ``(dalpha, dbeta, dtheta, dphi, ds, dt, ddelta, dgamma)``."""
    sig = _euler_forms(p.gamma, p.theta, 7, 2, 3)
    sa, ca = np.sin(p.alpha), np.cos(p.alpha)
    s, t = p.s, p.t
    e = np.eye(DIM)
    d_alpha, d_beta, d_s, d_t, d_delta = e[0], e[1], e[4], e[5], e[6]
    if basis == "adapted":
        return np.array([sig[0], sig[1], sig[2], d_alpha, d_beta, d_s, d_t, d_delta])
    if basis == "diagonalizing":
        ds_t = d_s + 0.5 * t * sa * sig[1]
        dt_t = d_t - 0.5 * s * sa * sig[1]
        om1 = s * d_delta + s * ca * d_beta - s * sig[0] + t * sa * sig[2]
        om2 = t * d_delta - t * ca * d_beta + t * sig[0] + s * sa * sig[2]
        return np.array([d_alpha, d_beta, sig[1], sig[2], ds_t, dt_t, om1, om2])
    raise ValueError(f"unknown SO(3) basis {basis!r}; expected one of {sorted(SO3_BASES)}")


def sp1_coframe_jacobian(p: ChartPointSp1) -> np.ndarray:
    """Rows: ``(dalpha, sigma_1..3, xi_0..3)`` in ``(dalpha, dgamma, dtheta, dphi, da_0..da_3)``."""
    raw = _raw_sp1(p)
    out = np.zeros((DIM, DIM))
    out[0, 0] = 1.0
    out[1:4] = _sp1_sigma(p)
    out[4:] = raw.xi
    return out


def coframe_jacobian(p, basis: str | None = None) -> np.ndarray:
    if isinstance(p, ChartPointSO3):
        return so3_coframe_jacobian(p, basis or "diagonalizing")
    if isinstance(p, ChartPointSp1):
        if basis not in (None, "standard"):
            raise ValueError("the Sp(1) chart has a single coframe")
        return sp1_coframe_jacobian(p)
    raise TypeError(f"unsupported chart point type {type(p).__name__}")


def metric_coordinates(p) -> np.ndarray:
    """Gram matrix of g_c with respect to the chart coordinate vector fields."""
    raw = _raw(p)
    K = raw.K
    return 4.0 * K ** -0.4 * raw.xi.T @ raw.xi + 5.0 * K ** 0.6 * raw.b.T @ raw.b


def closed_form_gram(p, basis: str | None = None) -> np.ndarray | None:
    """Diagonal gram matrix in the coframes where it is known in closed form, else None."""
    if isinstance(p, ChartPointSO3):
        if (basis or "diagonalizing") != "diagonalizing":
            return None
        K = p.c + p.r2
        sa2, ca2 = np.sin(p.alpha) ** 2, np.cos(p.alpha) ** 2
        f, g = 5.0 * K ** 0.6, 4.0 * K ** -0.4
        return np.diag([f, f * sa2, f * ca2, f * ca2, g, g, g / 4, g / 4])
    if isinstance(p, ChartPointSp1):
        K = p.c + p.r2
        f, g = 5.0 * K ** 0.6, 4.0 * K ** -0.4
        ca2 = np.cos(p.alpha) ** 2
        return np.diag([f, f * ca2, f * ca2, f * ca2, g, g, g, g])
    return None


# structure packs ------------------------------------------------------------


@dataclass(frozen=True)
class StructurePack:
    """Bryant-Salamon data at one point, expressed in one coframe.

    ``coframe[a]`` is the coframe 1-form ``theta^a`` written in chart coordinate
    differentials and ``frame[a]`` the dual vector in coordinate components, so
    ``coframe[a](frame[b]) = delta_ab``.  Every other form (``phi``, ``volume``,
    ``rho``, ``xi``, ``omega_cap``, ``a_cap``, ``b``) and the metric are expressed
    in the coframe itself, and tangent vectors handed to the Cayley routines are
    components in the dual frame.
    """

    chart: str
    basis: str
    labels: tuple[str, ...]
    point: object
    c: float
    jacobian: np.ndarray
    coframe: tuple[KForm, ...]
    frame: tuple[np.ndarray, ...]
    phi: KForm
    metric: MetricAtPoint
    volume: KForm
    rho: tuple[KForm, ...]
    xi: tuple[KForm, ...]
    b: tuple[KForm, ...]
    omega_cap: tuple[KForm, ...]
    a_cap: tuple[KForm, ...]
    extras: dict = field(default_factory=dict, compare=False)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def basis_vector(self, label: str) -> np.ndarray:
        out = np.zeros(DIM)
        out[self.index(label)] = 1.0
        return out

    def to_frame(self, coord_vector) -> np.ndarray:
        """Components in the frame of a vector given in chart coordinate components."""
        return self.jacobian @ np.asarray(coord_vector, dtype=float)

    def to_coordinates(self, frame_vector) -> np.ndarray:
        return np.linalg.solve(self.jacobian, np.asarray(frame_vector, dtype=float))

    @property
    def coords(self) -> np.ndarray:
        return self.point.coords if self.point is not None else np.zeros(DIM)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _pack_from_raw(p, raw: _Raw, jac: np.ndarray, chart: str, basis: str, labels, gram=None) -> StructurePack:
    jinv = np.linalg.inv(jac)
    K = raw.K
    # Move the structure 1-forms into the frame basis before wedging: rounding
    # then grows like cond(jac) rather than like its k-th power.
    fr = replace(raw, b=raw.b @ jinv, rho=raw.rho @ jinv, xi=raw.xi @ jinv)

    def to_frame_1(rows):
        return tuple(KForm.one_form(row) for row in rows)

    phi = KForm.from_array(4, _phi_array(fr))
    vol = KForm.from_array(8, 400.0 * K ** 0.4 * wedge_rows(np.concatenate([fr.xi, fr.b])))
    if gram is None:
        gram = 4.0 * K ** -0.4 * fr.xi.T @ fr.xi + 5.0 * K ** 0.6 * fr.b.T @ fr.b
    b2, xi2 = _two_forms(fr.b), _two_forms(fr.xi)
    omega = tuple(KForm.from_array(2, wedge_rows(b2[i, 0]) - wedge_rows(b2[i, 1])) for i in range(3))
    acap = tuple(KForm.from_array(2, wedge_rows(xi2[i, 0]) - wedge_rows(xi2[i, 1])) for i in range(3))
    return StructurePack(
        chart=chart,
        basis=basis,
        labels=tuple(labels),
        point=p,
        c=float(p.c),
        jacobian=_readonly(jac),
        coframe=tuple(KForm.one_form(row) for row in jac),
        frame=tuple(_readonly(jinv[:, a]) for a in range(DIM)),
        phi=phi,
        metric=MetricAtPoint(gram),
        volume=vol,
        rho=to_frame_1(fr.rho),
        xi=to_frame_1(fr.xi),
        b=to_frame_1(fr.b),
        omega_cap=omega,
        a_cap=acap,
    )


def build_so3_pack(p: ChartPointSO3, basis: str = "diagonalizing") -> StructurePack:
    """Structure pack in the SO(3) x Id_2 chart.

    In the diagonalizing coframe the gram matrix is the exact diagonal
    ``5K^{3/5}(1, sin^2, cos^2, cos^2)``, ``4K^{-2/5}(1, 1, 1/4, 1/4)`` with
    ``K = c + r^2``; in the adapted coframe it is computed from the chart.
    """
    if not isinstance(p, ChartPointSO3):
        raise DomainError("build_so3_pack needs a ChartPointSO3")
    if basis not in SO3_BASES:
        raise ValueError(f"unknown SO(3) basis {basis!r}; expected one of {sorted(SO3_BASES)}")
    jac = so3_coframe_jacobian(p, basis)
    return _pack_from_raw(p, _raw_so3(p), jac, "so3", basis, SO3_BASES[basis], closed_form_gram(p, basis))


def build_sp1_pack(p: ChartPointSp1) -> StructurePack:
    """Structure pack in the Sp(1) x Id_1 chart, coframe ``(dalpha, sigma_i, xi_i)``."""
    if not isinstance(p, ChartPointSp1):
        raise DomainError("build_sp1_pack needs a ChartPointSp1")
    jac = sp1_coframe_jacobian(p)
    return _pack_from_raw(p, _raw_sp1(p), jac, "sp1", "standard", SP1_BASIS, closed_form_gram(p))


def build_pack(p, basis: str | None = None) -> StructurePack:
    if isinstance(p, ChartPointSO3):
        return build_so3_pack(p, basis or "diagonalizing")
    return build_sp1_pack(p)


def _flat_phi() -> KForm:
    """Phi on R^8 = R^4_x + R^4_a with coframe ordered (dx_0..dx_3, da_0..da_3)."""
    e = np.eye(DIM)
    x, a = e[:4], e[4:]
    quads = [x, a]
    coeffs = [1.0, 1.0]
    x2, a2 = _two_forms(x), _two_forms(a)
    for i in range(3):
        for px, sx in ((0, 1.0), (1, -1.0)):
            for pa, sa in ((0, 1.0), (1, -1.0)):
                quads.append(np.concatenate([x2[i, px], a2[i, pa]]))
                coeffs.append(sx * sa)
    return KForm.from_array(4, np.asarray(coeffs) @ wedge_rows(np.stack(quads)))


def flat_pack() -> StructurePack:
    """The flat model on R^8: identity metric, constant Cayley form, no connection.

    The fibre directions ``da`` play the role of the vertical forms ``xi`` and
    the base directions ``dx`` that of the horizontal ``b``, so that the
    Bryant-Salamon form reduces to this one in an adapted orthonormal coframe.
    """
    e = np.eye(DIM)
    x2, a2 = _two_forms(e[:4]), _two_forms(e[4:])
    zero1 = KForm.zero(1)
    return StructurePack(
        chart="flat",
        basis="standard",
        labels=("dx0", "dx1", "dx2", "dx3", "da0", "da1", "da2", "da3"),
        point=None,
        c=0.0,
        jacobian=_readonly(e),
        coframe=tuple(KForm.basis(i) for i in range(DIM)),
        frame=tuple(_readonly(e[:, i]) for i in range(DIM)),
        phi=_flat_phi(),
        metric=MetricAtPoint(e),
        volume=KForm(DIM, {tuple(range(DIM)): 1.0}),
        rho=(zero1, zero1, zero1),
        xi=tuple(KForm.basis(4 + i) for i in range(4)),
        b=tuple(KForm.basis(i) for i in range(4)),
        omega_cap=tuple(KForm.from_array(2, wedge_rows(x2[i, 0]) - wedge_rows(x2[i, 1])) for i in range(3)),
        a_cap=tuple(KForm.from_array(2, wedge_rows(a2[i, 0]) - wedge_rows(a2[i, 1])) for i in range(3)),
    )


# closed forms in the special coframes ------------------------------------------


def so3_phi_closed_form(p: ChartPointSO3) -> KForm:
    """Phi_c in the diagonalizing coframe written term by term from its closed form.

    Indices: 0 dalpha, 1 dbeta, 2 sigma_2, 3 sigma_3, 4 ds~, 5 dt~, 6 omega_1, 7 omega_2.
    """
    K = p.c + p.r2
    sa, ca = np.sin(p.alpha), np.cos(p.alpha)
    B = KForm.basis
    w = 10.0 * K ** 0.2
    terms = [
        B(4, 5, 7, 6, coeff=4.0 * K ** -0.8),
        B(0, 1, 3, 2, coeff=25.0 * K ** 1.2 * sa * ca**2),
        B(4, 6, 0, 1, coeff=w * sa),
        B(4, 6, 2, 3, coeff=w * ca**2),
        B(5, 7, 0, 1, coeff=-w * sa),
        B(5, 7, 2, 3, coeff=-w * ca**2),
        B(4, 5, 0, 2, coeff=2 * w * ca),
        B(4, 5, 1, 3, coeff=-2 * w * ca * sa),
        B(6, 7, 0, 2, coeff=0.5 * w * ca),
        B(6, 7, 1, 3, coeff=-0.5 * w * ca * sa),
        B(4, 7, 0, 3, coeff=-w * ca),
        B(4, 7, 1, 2, coeff=-w * ca * sa),
        B(5, 6, 0, 3, coeff=-w * ca),
        B(5, 6, 1, 2, coeff=-w * ca * sa),
    ]
    out = terms[0]
    for term in terms[1:]:
        out = out + term
    return out


def sp1_phi_closed_form(p: ChartPointSp1) -> KForm:
    """Phi_c in the coframe ``(dalpha, sigma_1..3, xi_0..3)`` from its closed form."""
    K = p.c + p.r2
    ca = np.cos(p.alpha)
    B = KForm.basis
    out = B(4, 5, 6, 7, coeff=16.0 * K ** -0.8) + B(0, 1, 2, 3, coeff=25.0 * K ** 1.2 * ca**3)
    w = 20.0 * K ** 0.2 * ca
    for i, j, k in CYCLIC:
        for (x0, x1, sx) in ((4, 4 + i, 1.0), (4 + j, 4 + k, -1.0)):
            out = out + B(x0, x1, 0, i, coeff=w * sx) + B(x0, x1, j, k, coeff=-w * ca * sx)
    return out


# derived checks ----------------------------------------------------------------


def point_field(p, builder: Callable) -> Callable[[np.ndarray], KForm]:
    """Wrap ``builder(point)`` as a function of chart coordinates at the parameters of ``p``."""
    return lambda x: builder(p.with_coords(x))


def sample_so3_points(rng: np.random.Generator, n: int, c: float, margin: float = 1e-3,
                      radial: tuple[float, float] = (0.1, 2.0)) -> list[ChartPointSO3]:
    """Uniform samples in the SO(3) chart with ``margin`` kept from the singular loci."""
    lo, hi = radial
    out = []
    for _ in range(n):
        out.append(ChartPointSO3(
            alpha=rng.uniform(margin, np.pi / 2 - margin),
            beta=rng.uniform(0, 2 * np.pi),
            theta=rng.uniform(margin, np.pi - margin),
            phi=rng.uniform(0, 2 * np.pi),
            s=rng.uniform(lo, hi),
            t=rng.uniform(lo, hi),
            delta=rng.uniform(0, 2 * np.pi),
            gamma=rng.uniform(0, 4 * np.pi),
            c=c,
        ))
    return out


def sample_sp1_points(rng: np.random.Generator, n: int, c: float, margin: float = 1e-3,
                      radial: tuple[float, float] = (0.1, 2.0)) -> list[ChartPointSp1]:
    """Uniform samples in the Sp(1) chart; the fibre radius is drawn from ``radial``."""
    lo, hi = radial
    out = []
    for _ in range(n):
        direction = rng.normal(size=4)
        direction /= np.linalg.norm(direction)
        out.append(ChartPointSp1(
            alpha=rng.uniform(-np.pi / 2 + margin, np.pi / 2 - margin),
            orbit=(rng.uniform(0, 4 * np.pi), rng.uniform(margin, np.pi - margin), rng.uniform(0, 2 * np.pi)),
            a=tuple(rng.uniform(lo, hi) * direction),
            c=c,
        ))
    return out


def verify_torsion_free(chart: str, c: float, n_points: int = 200, fd_step: float = 1e-5,
                        seed: int = 0, order: int = 4, margin: float = 1e-3,
                        phi_builder: Callable | None = None) -> dict:
    """Sample the chart and report the largest coefficient of d(Phi_c).

    ``d(Phi_c)`` is computed in chart coordinate differentials by central
    differences.  ``max_abs_coeff`` is the largest absolute coefficient over all
    points and ``max_rel_coeff`` the same divided by the largest coefficient of
    ``Phi_c`` at that point.  ``phi_builder`` substitutes another 4-form field
    for ``Phi_c`` (used to feed distractors through the same pipeline).
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if c < 0:
        raise DomainError(f"c must be >= 0, got {c}")
    rng = np.random.default_rng(seed)
    if chart == "so3":
        points = sample_so3_points(rng, n_points, c, margin)
    elif chart == "sp1":
        points = sample_sp1_points(rng, n_points, c, margin)
    else:
        raise ValueError(f"unknown chart {chart!r}; expected 'so3' or 'sp1'")
    builder = phi_builder or phi_coordinates
    worst, worst_rel, worst_at = 0.0, 0.0, None
    for p in points:
        d_phi = exterior_derivative(point_field(p, builder), p.coords, step=fd_step, order=order)
        val = d_phi.max_abs()
        scale = max(builder(p).max_abs(), 1e-300)
        if val > worst:
            worst, worst_at = val, p
        worst_rel = max(worst_rel, val / scale)
    return {
        "chart": chart,
        "c": c,
        "n_points": n_points,
        "fd_step": fd_step,
        "order": order,
        "max_abs_coeff": worst,
        "max_rel_coeff": worst_rel,
        "worst_point": None if worst_at is None else worst_at.coords.tolist(),
    }


def multi_moment_fibre(r: float, c: float) -> float:
    """Multi-moment map of the Sp(1) action on the fibres, normalized to vanish on the zero section."""
    if not (np.isfinite(r) and np.isfinite(c)) or r < 0 or c < 0:
        raise DomainError(f"multi_moment_fibre needs r >= 0 and c >= 0, got r={r}, c={c}")
    K = c + r * r
    return 20.0 / 3.0 * (r * r - 5.0 * c) * K ** 0.2 + 100.0 / 3.0 * c ** 1.2
