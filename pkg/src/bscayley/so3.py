"""Cayley fibration invariant under the lift of SO(3) x Id_2.

An invariant 4-fold is a curve ``tau -> (alpha, beta, s, t, delta)`` swept out
by 3-dimensional orbits.  It is Cayley exactly when ``beta``, ``delta``,
``v = s/t`` and

    F = 2 sin^{5/2}(alpha) cos^{1/2}(alpha) (v^2 + 1) u + 5 c v H(alpha),   u = s t,

are constant, with ``H`` the primitive of ``(cos alpha sin alpha)^{3/2}``
normalized by ``H(0) = 0``.  Fibres are therefore level sets of ``F`` in the
``(alpha, u)`` half-strip and are traced from the explicit solution for ``u``;
the ODE integrator is kept for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .cayley import FourPlane, eta_residual
from .errors import DomainError
from .geometry import ChartPointSO3, build_so3_pack

HALF_PI = 0.5 * np.pi
_B54 = float(beta_fn(1.25, 1.25))
H_HALF_PI = 0.5 * _B54
THRESHOLD_ATOL = 1e-9
TOPOLOGIES = ("R4_singular", "O_minus_1", "R_x_S3")


# first integral ------------------------------------------------------------------


def h_density(alpha):
    """``h(alpha) = (cos alpha sin alpha)^{3/2}``."""
    alpha = np.asarray(alpha, dtype=float)
    return (np.cos(alpha) * np.sin(alpha)) ** 1.5


def H_primitive(alpha):
    """Primitive of ``h`` with ``H(0) = 0``, via the regularized incomplete beta function.

    With ``x = sin^2 alpha`` the integrand becomes ``x^{1/4}(1-x)^{1/4} dx / 2``,
    so ``H(alpha) = B(sin^2 alpha; 5/4, 5/4) / 2``.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > HALF_PI):
        raise DomainError("H_primitive needs alpha in [0, pi/2]")
    out = H_HALF_PI * betainc(1.25, 1.25, np.sin(a) ** 2)
    return float(out) if out.ndim == 0 else out


def H_complement(alpha):
    """``H(pi/2) - H(alpha)`` without cancellation near ``pi/2`` (uses the beta symmetry)."""
    a = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > HALF_PI):
        raise DomainError("H_complement needs alpha in [0, pi/2]")
    out = H_HALF_PI * betainc(1.25, 1.25, np.cos(a) ** 2)
    return float(out) if out.ndim == 0 else out


def _profile(alpha):
    """``2 sin^{5/2} alpha cos^{1/2} alpha``."""
    return 2.0 * np.sin(alpha) ** 2.5 * np.cos(alpha) ** 0.5


def conserved_F(alpha, u, v, c):
    """The first integral in ``(alpha, u, v)`` form."""
    if np.any(np.asarray(v) <= 0) or c < 0:
        raise DomainError("conserved_F needs v > 0 and c >= 0")
    return _profile(alpha) * (np.asarray(v) ** 2 + 1.0) * u + 5.0 * c * np.asarray(v) * H_primitive(alpha)


def conserved_F_st(alpha, s, t, c):
    """The first integral in ``(alpha, s, t)`` form (without the ``v^2 + 1`` factor)."""
    return _profile(alpha) * s * t + 5.0 * c * s * t / (s * s + t * t) * H_primitive(alpha)


def threshold_F(v, c) -> float:
    """Level of the singular fibre: ``u`` reaches 0 exactly at ``alpha = pi/2``."""
    return 5.0 * c * v * H_HALF_PI


# ODE ---------------------------------------------------------------------------


def _check_state(state, c):
    state = np.asarray(state, dtype=float)
    if state.shape != (5,):
        raise ValueError("state is (alpha, beta, s, t, delta)")
    alpha, _, s, t, _ = state
    if c < 0 or not np.all(np.isfinite(state)):
        raise DomainError("state must be finite and c >= 0")
    if not 0 < alpha < HALF_PI or s <= 0 or t <= 0:
        raise DomainError(f"state {state.tolist()} is outside the chart")
    return state


def ode_rhs_so3(state, c: float, direction: int = 1) -> np.ndarray:
    """Cayley velocity at ``(alpha, beta, s, t, delta)``, unit speed in the ``(alpha, u)`` plane.

    With ``beta, delta`` fixed and ``s, t`` scaled together (``s' = s kappa``,
    ``t' = t kappa``) the remaining equation reads
    ``(5K cos^2 - r^2 sin^2) alpha' + 4 sin cos r^2 kappa = 0``; the returned
    velocity has ``alpha' > 0`` for ``direction = +1``.
    """
    alpha, _, s, t, _ = _check_state(state, c)
    r2 = s * s + t * t
    K = c + r2
    sa, ca = np.sin(alpha), np.cos(alpha)
    a_dot = 4.0 * sa * ca * r2
    kappa = -(5.0 * K * ca * ca - r2 * sa * sa)
    u = s * t
    speed = np.hypot(a_dot, 2.0 * u * kappa)
    scale = direction / speed
    return np.array([a_dot, 0.0, s * kappa, t * kappa, 0.0]) * scale


def cayley_residuals(state, velocity, c: float) -> np.ndarray:
    """The seven Cayley equations for an invariant curve, evaluated on a velocity."""
    alpha, _, s, t, _ = _check_state(state, c)
    ad, bd, sd, td, dd = np.asarray(velocity, dtype=float)
    r2 = s * s + t * t
    K = c + r2
    sa, ca = np.sin(alpha), np.cos(alpha)
    return np.array([
        r2 * sa**2 * ca * bd,
        ca**2 * (t * sd - s * td),
        ca**2 * s * t * dd,
        -5 * K * ca**2 * s * ad + r2 * sa**2 * ad * s - 2 * sa * ca * t**2 * sd
        - 4 * ca * sa * s**2 * sd - 2 * sa * ca * s * t * td,
        5 * K * ca**2 * t * ad - r2 * sa**2 * ad * t + 2 * sa * ca * s**2 * td
        + 4 * ca * sa * t**2 * td + 2 * sa * ca * s * t * sd,
        5 * K * sa * ca**2 * bd * s - 2 * sa * ca * t**2 * s * dd - r2 * sa**3 * bd * s,
        -5 * K * sa * ca**2 * bd * t - 2 * sa * ca * t * s**2 * dd + r2 * sa**3 * bd * t,
    ])


def reduced_residuals(state, velocity, c: float) -> np.ndarray:
    """The four reduced equations (fixed beta, delta, s/t and the alpha-u relation)."""
    alpha, _, s, t, _ = _check_state(state, c)
    ad, bd, sd, td, dd = np.asarray(velocity, dtype=float)
    r2 = s * s + t * t
    K = c + r2
    sa, ca = np.sin(alpha), np.cos(alpha)
    return np.array([
        bd,
        t * sd - s * td,
        dd,
        5 * K * ca**2 * s * t * ad - r2 * s * t * sa**2 * ad + 2 * sa * ca * r2 * (s * td + t * sd),
    ])


@dataclass
class IntegratedCurveSO3:
    """Output of :func:`integrate_so3`: states along the flow and first-integral drift."""

    tau: np.ndarray
    states: np.ndarray  # (n, 5): alpha, beta, s, t, delta
    c: float
    n_steps: int
    drift_F: float
    drift_v: float
    status: str

    @property
    def alpha(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 2] * self.states[:, 3]


def integrate_so3(state0, c: float, length: float, direction: int = 1, rtol: float = 1e-12,
                  atol: float = 1e-14, max_step: float = np.inf, method: str = "DOP853",
                  alpha_margin: float = 1e-6, u_floor: float = 1e-10,
                  min_steps: int = 0) -> IntegratedCurveSO3:
    """Integrate the Cayley flow for arclength ``length`` in the ``(alpha, u)`` plane.

    Stops early if ``alpha`` comes within ``alpha_margin`` of the chart ends or
    ``u`` drops below ``u_floor`` (the zero section, where the chart degenerates).
    ``min_steps`` caps the step size at ``length / min_steps`` so that long
    step counts can be exercised deliberately.
    ``drift_F`` and ``drift_v`` are the largest relative deviations of the first
    integrals from their initial values over all accepted steps.
    """
    state0 = _check_state(state0, c)

    def rhs(_, y):
        # unchecked copy of ode_rhs_so3 for the inner loop; events keep y in the chart
        alpha, _, s, t, _ = y
        r2 = s * s + t * t
        sa, ca = math.sin(alpha), math.cos(alpha)
        a_dot = 4.0 * sa * ca * r2
        kappa = r2 * sa * sa - 5.0 * (c + r2) * ca * ca
        scale = direction / math.hypot(a_dot, 2.0 * s * t * kappa)
        return np.array([a_dot * scale, 0.0, s * kappa * scale, t * kappa * scale, 0.0])

    def hit_low(_, y):
        return y[0] - alpha_margin

    def hit_high(_, y):
        return HALF_PI - alpha_margin - y[0]

    def hit_floor(_, y):
        return y[2] * y[3] - u_floor

    hit_low.terminal = hit_high.terminal = hit_floor.terminal = True
    if min_steps > 0:
        max_step = min(max_step, float(length) / min_steps)
    sol = solve_ivp(rhs, (0.0, float(length)), state0, method=method, rtol=rtol, atol=atol,
                    max_step=max_step, events=(hit_low, hit_high, hit_floor), dense_output=False)
    states = sol.y.T
    s, t = states[:, 2], states[:, 3]
    F = conserved_F_st(states[:, 0], s, t, c)
    v = s / t
    drift_F = float(np.max(np.abs(F - F[0])) / abs(F[0]))
    drift_v = float(np.max(np.abs(v - v[0])) / v[0])
    return IntegratedCurveSO3(sol.t, states, c, len(sol.t) - 1, drift_F, drift_v,
                              "event" if sol.status == 1 else "completed")


# level sets ----------------------------------------------------------------------


@dataclass(frozen=True)
class SO3FibreParams:
    beta0: float
    delta0: float
    v0: float
    F0: float
    c: float

    def __post_init__(self):
        if not all(np.isfinite(x) for x in (self.beta0, self.delta0, self.v0, self.F0, self.c)):
            raise DomainError("fibre parameters must be finite")
        if self.v0 <= 0:
            raise DomainError(f"v0 must be positive, got {self.v0}")
        if self.F0 < 0:
            raise DomainError(f"F0 must be >= 0, got {self.F0}")
        if self.c < 0:
            raise DomainError(f"c must be >= 0, got {self.c}")

    @property
    def threshold(self) -> float:
        return threshold_F(self.v0, self.c)


def level_set_u(alpha, params: SO3FibreParams):
    """``u`` on the fibre as an explicit function of ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    c, v = params.c, params.v0
    numer = (params.F0 - 5.0 * c * v * H_HALF_PI) + 5.0 * c * v * H_complement(a)
    return numer / (_profile(a) * (v * v + 1.0))


def level_set_u_eps(eps, params: SO3FibreParams):
    """Same as :func:`level_set_u` written in ``eps = pi/2 - alpha`` for accuracy near ``pi/2``."""
    e = np.asarray(eps, dtype=float)
    if np.any(e <= 0):
        raise DomainError("level_set_u_eps needs eps > 0")
    c, v = params.c, params.v0
    numer = (params.F0 - 5.0 * c * v * H_HALF_PI) + 5.0 * c * v * H_HALF_PI * betainc(1.25, 1.25, np.sin(e) ** 2)
    return numer / (2.0 * np.cos(e) ** 2.5 * np.sin(e) ** 0.5 * (v * v + 1.0))


def level_set_du_dalpha(alpha, params: SO3FibreParams):
    """Slope ``du/dalpha`` along the level set."""
    a = np.asarray(alpha, dtype=float)
    c, v = params.c, params.v0
    u = level_set_u(a, params)
    D = _profile(a) * (v * v + 1.0)
    return -5.0 * c * v * h_density(a) / D - u * (2.5 / np.tan(a) - 0.5 * np.tan(a))


def classify_params(params: SO3FibreParams, atol: float = THRESHOLD_ATOL) -> str:
    if params.c == 0:
        return "R_x_S3"
    gap = params.F0 - params.threshold
    if abs(gap) <= atol:
        return "R4_singular"
    return "O_minus_1" if gap < 0 else "R_x_S3"


@dataclass
class FibreCurveSO3:
    """A traced fibre: samples of ``(alpha, u)`` with ``u >= 0``, strictly increasing in alpha."""

    alpha: np.ndarray
    u: np.ndarray
    params: SO3FibreParams
    topology: str
    alpha_end: float  # where u reaches 0, or pi/2 if it never does
    conserved_drift: float
    eta: np.ndarray = field(default=None)

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.alpha, self.u])

    @property
    def F(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return conserved_F(self.alpha, self.u, self.params.v0, self.params.c)

    def rows(self) -> list[tuple[float, float, float, float]]:
        eta = self.eta if self.eta is not None else np.full(len(self.alpha), np.nan)
        return [(float(a), float(u), float(f), float(e)) for a, u, f, e in zip(self.alpha, self.u, self.F, eta)]


def find_alpha_end(params: SO3FibreParams, xtol: float = 1e-14) -> float:
    """Angle where the fibre reaches ``u = 0`` (the zero section), or ``pi/2`` if it does not."""
    topo = classify_params(params)
    if topo != "O_minus_1":
        return HALF_PI
    c, v = params.c, params.v0
    # numerator F0 - 5 c v H(alpha) is decreasing; root where H(alpha) = F0 / (5 c v)
    target = params.F0 / (5.0 * c * v)
    if target <= 0.0:
        return 0.0
    return float(brentq(lambda a: H_primitive(a) - target, 0.0, HALF_PI, xtol=xtol, rtol=4 * np.finfo(float).eps))


def trace_level_set(params: SO3FibreParams, n: int = 401, alpha_min: float = 1e-4,
                    alpha_margin: float = 1e-4) -> FibreCurveSO3:
    """Sample a fibre from the explicit formula for ``u(alpha)``.

    The grid is Chebyshev-clustered on ``[alpha_min, alpha_end]``; when the
    fibre escapes to ``u = infinity`` at ``pi/2`` the last sample sits at
    ``pi/2 - alpha_margin`` and when it reaches ``u = 0`` the endpoint is the
    root located by :func:`find_alpha_end` with ``u = 0`` stored exactly.
    """
    if params.F0 == 0:
        raise DomainError("F0 = 0 has no fibre inside the chart (u would vanish identically or be negative)")
    if n < 3:
        raise ValueError("need at least 3 samples")
    topo = classify_params(params)
    alpha_end = find_alpha_end(params)
    hits_zero = topo in ("O_minus_1", "R4_singular")
    hi = alpha_end if hits_zero else HALF_PI - alpha_margin
    if hi <= alpha_min:
        raise DomainError(f"fibre ends at alpha={alpha_end:.3g}, below alpha_min={alpha_min}")
    k = np.arange(n)
    grid = alpha_min + (hi - alpha_min) * 0.5 * (1.0 - np.cos(np.pi * k / (n - 1)))
    if topo == "R4_singular":
        # u vanishes like (pi/2 - alpha)^2 at the singular point; the endpoint is set below
        u = np.append(level_set_u_eps(HALF_PI - grid[:-1], params), 0.0)
    else:
        u = level_set_u(grid, params)
    if hits_zero:
        u[-1] = 0.0
    u = np.maximum(u, 0.0)
    curve = FibreCurveSO3(grid, u, params, topo, alpha_end, 0.0)
    F = curve.F
    inner = slice(0, n - 1) if hits_zero else slice(None)
    scale = max(abs(params.F0), 1e-300)
    curve.conserved_drift = float(np.max(np.abs(F[inner] - params.F0)) / scale)
    return curve


def classify_so3(curve: FibreCurveSO3, atol: float = THRESHOLD_ATOL) -> str:
    return classify_params(curve.params, atol)


def u_min_locus(u, v, c):
    """Angle of the ``u``-minimum of the level set through ``(u, v)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or v <= 0 or c < 0:
        raise DomainError("u_min_locus needs u > 0, v > 0, c >= 0")
    w = u * (v * v + 1.0)
    out = np.arccos(np.sqrt(w / (6.0 * w + 5.0 * c * v)))
    return float(out) if out.ndim == 0 else out


# multi-moment map --------------------------------------------------------------


def multi_moment_so3(alpha, u, v, c):
    """Multi-moment map in ``(alpha, u, v)``; vanishes on ``u = 0``."""
    if v <= 0 or c < 0:
        raise DomainError("multi_moment_so3 needs v > 0 and c >= 0")
    P = u * (1.0 + v * v) / v
    return 5.0 / 6.0 * (c + P) ** 0.2 * (6.0 * P * np.cos(alpha) ** 2 - P + 5.0 * c) - 25.0 / 6.0 * c**1.2


def multi_moment_so3_st(alpha, s, t, c):
    """The same map in ``(alpha, s, t)``."""
    r2 = s * s + t * t
    return 5.0 * (c + r2) ** 0.2 * (r2 * np.cos(alpha) ** 2 - (r2 - 5.0 * c) / 6.0) - 25.0 / 6.0 * c**1.2


# restricted metric, cones and local models ------------------------------------------


def restricted_metric_so3(alpha, u, v, c, du_dalpha=None) -> dict:
    """Coefficients of ``g_c`` restricted to an invariant fibre.

    Returns the coefficients of ``sigma_1^2``, of ``sigma_2^2`` (equal to that of
    ``sigma_3^2``) and of ``du^2`` (using ``du_dalpha`` for the ``dalpha^2`` part)
    and, when ``du_dalpha`` is given, of ``dalpha^2`` in the alpha parametrization.
    """
    P = (1.0 + v * v) / v
    K = c + u * P
    s1 = K**-0.4 * u * P
    s2 = 5.0 * K**0.6 * np.cos(alpha) ** 2 + K**-0.4 * u * P * np.sin(alpha) ** 2
    out = {"sigma1": s1, "sigma2": s2, "sigma3": s2}
    if du_dalpha is not None:
        out["du"] = K**-0.4 * P / u + 5.0 * K**0.6 / du_dalpha**2
        out["dalpha"] = 5.0 * K**0.6 + K**-0.4 * P / u * du_dalpha**2
    return out


def cone_radius_so3(u, v):
    """Radial function of the asymptotic cone: ``(10/3) ((1+v^2)/v)^{3/10} u^{3/10}``."""
    return 10.0 / 3.0 * ((1.0 + v * v) / v) ** 0.3 * np.asarray(u, dtype=float) ** 0.3


def _alpha_on_branch(params: SO3FibreParams, u_target: float, end: str) -> float:
    """Solve ``u(alpha) = u_target`` on the branch escaping at the given end."""
    if end == "alpha_to_0":
        g = lambda x: np.log(level_set_u(x, params)) - np.log(u_target)  # noqa: E731
        grid = np.geomspace(1e-15, 0.5, 400)
        vals = np.array([g(x) for x in grid])
        idx = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
        if len(idx) == 0:
            raise DomainError("fibre does not reach the requested u near alpha = 0")
        i = idx[0]
        return float(brentq(g, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15))
    if end == "alpha_to_pi_half":
        g = lambda e: np.log(level_set_u_eps(e, params)) - np.log(u_target)  # noqa: E731
        # u grows like eps^{-1/2} on this branch, so large u needs eps far below machine epsilon
        grid = np.geomspace(1e-60, 0.5, 800)
        vals = np.array([g(x) for x in grid])
        idx = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
        if len(idx) == 0:
            raise DomainError("fibre does not reach the requested u near alpha = pi/2")
        i = idx[0]
        return float(HALF_PI - brentq(g, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15))
    raise ValueError("end must be 'alpha_to_0' or 'alpha_to_pi_half'")


def asymptotic_cone_so3(params: SO3FibreParams, end: str, u_range=(1e4, 1e6), n: int = 25) -> dict:
    """Fit the restricted metric at large ``u`` against a cone ``dR^2 + k R^2 (link) / 4``.

    ``R`` is :func:`cone_radius_so3`.  A log-log regression of the ``sigma_1``
    coefficient against ``R`` over ``u_range`` gives the exponent (2 for a cone)
    and the cone constant ``k``; the radial coefficient of ``dR^2`` and the
    squashing ratio ``sigma_1 : sigma_2`` are reported at the largest ``u``.
    """
    v, c = params.v0, params.c
    us = np.geomspace(u_range[0], u_range[1], n)
    alphas = np.array([_alpha_on_branch(params, x, end) for x in us])
    slopes = level_set_du_dalpha(alphas, params)
    coeffs = restricted_metric_so3(alphas, us, v, c, du_dalpha=slopes)
    R = cone_radius_so3(us, v)
    dR_du = 0.3 * R / us
    fit = np.polyfit(np.log(R), np.log(coeffs["sigma1"]), 1)
    exponent, intercept = fit
    cone_constant = 4.0 * np.exp(intercept)  # sigma1 coefficient = k R^2 / 4
    return {
        "end": end,
        "u": us,
        "alpha": alphas,
        "exponent": float(exponent),
        "cone_constant": float(cone_constant),
        "cone_constant_at_max": float(4.0 * coeffs["sigma1"][-1] / R[-1] ** 2),
        "radial_coeff": float(coeffs["du"][-1] / dR_du[-1] ** 2),
        "link_coeffs": (float(4.0 * coeffs["sigma1"][-1] / R[-1] ** 2), float(4.0 * coeffs["sigma2"][-1] / R[-1] ** 2)),
        "squashing": float(coeffs["sigma1"][-1] / coeffs["sigma2"][-1]),
    }


def singular_model_so3(v0: float, c: float, eps: float = 1e-3) -> dict:
    """Restricted metric along ``u = A (pi/2 - alpha)^2``, ``A = c v / (1 + v^2)``.

    Reports the ``sigma`` coefficients divided by ``c^{3/5} eps^2`` (limit 1, 6, 6)
    and the ``dalpha^2`` coefficient (limit ``9 c^{3/5}``).  The same quantities
    on the exact singular fibre are included for comparison.
    """
    if c <= 0 or v0 <= 0:
        raise DomainError("singular_model_so3 needs c > 0 and v0 > 0")
    A = c * v0 / (1.0 + v0 * v0)
    alpha = HALF_PI - eps
    u = A * eps**2
    model = restricted_metric_so3(alpha, u, v0, c, du_dalpha=-2.0 * A * eps)
    params = SO3FibreParams(0.0, 0.0, v0, threshold_F(v0, c), c)
    u_exact = float(level_set_u_eps(eps, params))
    exact = restricted_metric_so3(alpha, u_exact, v0, c, du_dalpha=float(level_set_du_dalpha(alpha, params)))
    norm = c**0.6 * eps**2
    return {
        "eps": eps,
        "A": A,
        "sigma_ratios": tuple(float(model[k] / norm) for k in ("sigma1", "sigma2", "sigma3")),
        "dalpha_coeff": float(model["dalpha"]),
        "dalpha_target": 9.0 * c**0.6,
        "exact_sigma_ratios": tuple(float(exact[k] / norm) for k in ("sigma1", "sigma2", "sigma3")),
        "exact_dalpha_coeff": float(exact["dalpha"]),
        "u_exact_over_model": u_exact / u,
    }


def smooth_model_so3(alpha0: float, v0: float, c: float, du: float = 1e-6) -> dict:
    """Restricted metric near a zero-section crossing at ``alpha0 < pi/2`` along the linear model.

    With ``rho = 2 c^{-1/5} sqrt(u (1+v^2)/v)`` the limit metric should read
    ``drho^2 + rho^2 sigma_1^2 / 4 + 5 c^{3/5} cos^2(alpha0)(sigma_2^2 + sigma_3^2)``.
    Reports the ratios of the restricted coefficients to those targets at ``u = du``.
    """
    if c <= 0 or not 0 < alpha0 < HALF_PI:
        raise DomainError("smooth_model_so3 needs c > 0 and alpha0 in (0, pi/2)")
    slope = -5.0 * c * v0 / (2.0 * np.tan(alpha0) * (v0 * v0 + 1.0))
    u = du
    alpha = alpha0 + u / slope
    coeffs = restricted_metric_so3(alpha, u, v0, c, du_dalpha=slope)
    P = (1.0 + v0 * v0) / v0
    rho = 2.0 * c**-0.2 * np.sqrt(u * P)
    drho_du = rho / (2.0 * u)
    return {
        "radial_ratio": float(coeffs["du"] / drho_du**2),
        "sigma1_ratio": float(coeffs["sigma1"] / (rho**2 / 4.0)),
        "sigma2_ratio": float(coeffs["sigma2"] / (5.0 * c**0.6 * np.cos(alpha0) ** 2)),
    }


# Cayley planes along fibres ------------------------------------------------------------


_ORBIT_DEFAULT = (1.1, 0.4, 0.7)  # theta, phi, gamma: any value, the fibre is invariant


def fibre_point(alpha: float, u: float, params: SO3FibreParams, orbit=_ORBIT_DEFAULT) -> ChartPointSO3:
    v = params.v0
    s, t = np.sqrt(u * v), np.sqrt(u / v)
    theta, phi, gamma = orbit
    return ChartPointSO3(alpha, params.beta0, theta, phi, s, t, params.delta0, gamma, c=params.c)


def tangent_plane_so3(point: ChartPointSO3, coord_velocity, pack=None):
    """Plane spanned by the orbit directions and a curve velocity, in the diagonalizing frame.

    The orbit is swept by ``(gamma, theta, phi)``, so the coordinate vectors
    ``d/dgamma, d/dtheta, d/dphi`` span the same 3-plane as the orbit frame.
    ``coord_velocity`` is ``(alpha', beta', s', t', delta')``.
    """
    pack = pack or build_so3_pack(point, "diagonalizing")
    e = np.eye(8)
    ad, bd, sd, td, dd = coord_velocity
    vel = np.array([ad, bd, 0.0, 0.0, sd, td, dd, 0.0])
    vecs = [pack.to_frame(e[7]), pack.to_frame(e[2]), pack.to_frame(e[3]), pack.to_frame(vel)]
    return FourPlane(tuple(vecs)), pack


def curve_eta_residuals(curve: FibreCurveSO3, orbit=_ORBIT_DEFAULT, skip_endpoint: bool = True) -> np.ndarray:
    """Cayley residual at every sample of a traced fibre (NaN at a ``u = 0`` endpoint)."""
    params = curve.params
    out = np.full(len(curve.alpha), np.nan)
    slopes = level_set_du_dalpha(curve.alpha, params)
    for i, (a, u, du) in enumerate(zip(curve.alpha, curve.u, slopes)):
        if u <= 0 or not np.isfinite(du):
            continue
        p = fibre_point(a, u, params, orbit)
        # s = sqrt(u v), t = sqrt(u / v): s' = s u' / (2u)
        vel = (1.0, 0.0, p.s * du / (2 * u), p.t * du / (2 * u), 0.0)
        plane, pack = tangent_plane_so3(p, vel)
        out[i] = eta_residual(plane, pack)
    curve.eta = out
    return out


# multi-moment map ratio -----------------------------------------------------------------


def moment_ratio_so3(point: ChartPointSO3, step: float = 1e-6) -> dict:
    """Compare ``d nu`` with the contraction of ``Phi_c`` by the three orbit directions.

    The orbit directions are the frame vectors dual to ``sigma_1, sigma_2,
    sigma_3`` in the adapted coframe.  Returns the least-squares ratio
    ``d nu = k * Phi(X_1, X_2, X_3, .)`` and the relative residual of that fit.
    """
    pack = build_so3_pack(point, "adapted")
    contraction = pack.phi
    from .forms import interior_product

    for idx in (0, 1, 2):
        e = np.zeros(8)
        e[idx] = 1.0
        contraction = interior_product(e, contraction)
    x = point.coords

    def nu(y):
        return multi_moment_so3_st(y[0], y[4], y[5], point.c)

    grad = np.zeros(8)
    for mu in range(8):
        h = step * max(1.0, abs(x[mu]))
        xp, xm = x.copy(), x.copy()
        xp[mu] += h
        xm[mu] -= h
        grad[mu] = (nu(xp) - nu(xm)) / (2 * h)
    # to the adapted coframe: d nu = grad . dx = grad . J^{-1} theta
    d_nu = grad @ np.linalg.inv(pack.jacobian)
    iota = contraction.to_array()
    k = float(d_nu @ iota / (iota @ iota))
    resid = float(np.linalg.norm(d_nu - k * iota) / max(np.linalg.norm(d_nu), 1e-300))
    return {"ratio": k, "relative_residual": resid}


# tangent frame of an invariant 4-fold and its obstruction expansion ----------------------


def obstruction_vectors(pack, rates) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Spanning vectors ``u, v, w, y`` of an invariant 4-fold in the diagonalizing frame.

    ``u, v, w`` span the orbit directions and ``y`` carries the curve velocity
    ``rates = (alpha', beta', s', t', delta')``.
    """
    if pack.chart != "so3" or pack.basis != "diagonalizing":
        raise ValueError("obstruction_vectors needs an SO(3) pack in the diagonalizing basis")
    p = pack.point
    s, t, sa = p.s, p.t, np.sin(p.alpha)
    ad, bd, sd, td, dd = rates
    e = np.eye(8)
    e_a, e_b, e_2, e_3, e_s, e_t, e_w1, e_w2 = e
    u = t * e_w2 - s * e_w1
    v = e_2 + 0.5 * sa * (t * e_s - s * e_t)
    w = e_3 + sa * (t * e_w1 + s * e_w2)
    y = sd * e_s + td * e_t + ad * e_a + bd * e_b + dd * (s * e_w1 + t * e_w2)
    return u, v, w, y


def b_vwy_closed_form(point: ChartPointSO3, rates) -> np.ndarray:
    """Hand expansion of ``B(v, w, y)`` as a coefficient vector in the diagonalizing coframe."""
    a, s, t, c = point.alpha, point.s, point.t, point.c
    ad, bd, sd, td, dd = rates
    sa, ca = np.sin(a), np.cos(a)
    r2 = s * s + t * t
    K = c + r2
    X = np.zeros(8)  # dalpha, dbeta, sigma2, sigma3, ds~, dt~, omega1, omega2
    X[0] += 25 * K**1.2 * sa * ca**2 * bd
    X[1] -= 25 * K**1.2 * sa * ca**2 * ad
    pre = 2 * sa**2 * K**-0.8
    X[7] += pre * (t * td + s * sd) * t
    X[6] -= pre * (t * td + s * sd) * s
    X[5] -= pre * (t * t - s * s) * dd * t
    X[4] -= pre * (t * t - s * s) * dd * s
    f = 5 * K**0.2
    X[6] += f * 2 * ca**2 * sd
    X[7] -= f * 2 * ca**2 * td
    X[5] += f * 2 * ca**2 * dd * t
    X[4] -= f * 2 * ca**2 * dd * s
    X[2] += f * 2 * ca**2 * sa * t * s * dd
    X[3] += f * 2 * ca**2 * sa * (s * td - t * sd)
    X[0] += f * 2 * sa * ca * (s * s - t * t) * dd
    X[7] += f * 2 * sa * ca * ad * t
    X[6] -= f * 2 * sa * ca * ad * s
    X[1] += f * r2 * sa**3 * ad
    X[0] -= f * r2 * sa**3 * bd
    X[4] += f * 4 * ca * sa**2 * bd * s
    X[5] += f * 4 * ca * sa**2 * bd * t
    X[1] -= f * 4 * ca * sa**2 * (s * sd + t * td)
    return X


def lambda_coefficients(point: ChartPointSO3, rates) -> np.ndarray:
    """Coefficients of ``pi_7(Psi_1 + ... + Psi_4)`` on ``lambda_1 .. lambda_7``.

    The first four are ``5 K^{-1/5}`` times the left-hand sides of the Cayley
    equations.  The last three carry the same factor ``5 K^{-1/5}``; this is
    what a direct numerical expansion of the projection gives.
    """
    a, s, t, c = point.alpha, point.s, point.t, point.c
    ad, bd, sd, td, dd = rates
    sa, ca = np.sin(a), np.cos(a)
    r2 = s * s + t * t
    K = c + r2
    k = 5 * K**-0.2
    return k * np.array([
        -5 * K * sa * ca**2 * bd * t + r2 * sa**3 * bd * t - 2 * sa * ca * t * s * s * dd,
        5 * K * sa * ca**2 * bd * s - r2 * sa**3 * bd * s - 2 * sa * ca * t * t * s * dd,
        5 * K * ca**2 * t * ad + 4 * ca * sa * t * t * td + 2 * sa * ca * s * t * sd
        + 2 * sa * ca * s * s * td - r2 * sa**2 * ad * t,
        -5 * K * ca**2 * s * ad - 4 * ca * sa * s * s * sd - 2 * sa * ca * s * t * td
        - 2 * sa * ca * t * t * sd + r2 * sa**2 * ad * s,
        -2 * ca**2 * s * t * dd,
        2 * ca**2 * (t * sd - s * td),
        2 * r2 * sa**2 * ca * bd,
    ])
