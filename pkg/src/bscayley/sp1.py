"""Cayley fibration invariant under the lift of Sp(1) x Id_1.

After the fibre direction ``a / |a|`` is fixed, an invariant 4-fold is a curve
in the strip ``(alpha, r)``, ``alpha in [-pi/2, pi/2]``, ``r >= 0``, tangent
to the planar field ``X = (f_1, f_2)``.  ``X`` vanishes only at ``(-pi/2, 0)``
and along ``alpha = pi/2``; ``{r = 0}`` (the zero section) and
``{alpha = -pi/2}`` (a fibre of the bundle) are exact solutions.

Curves are integrated in ``(alpha, log r)`` with the field rescaled to unit
speed, which keeps both ``r -> 0`` and ``r -> infinity`` at finite distance in
the step-size control and lets the flow pass the slow region near
``alpha = pi/2`` (where ``f_2 / f_1 -> 0``) in graph form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .cayley import FourPlane, eta_residual
from .errors import DomainError
from .forms import interior_product
from .geometry import ChartPointSp1, build_sp1_pack, multi_moment_fibre

HALF_PI = 0.5 * np.pi
ALPHA_INF = math.asin(-0.25)  # limit of alpha_c as r -> infinity
TOPOLOGIES = ("S3_x_R", "R4_blue", "R4_green", "S4_zero_section", "vertical_fibre")


@dataclass(frozen=True)
class Sp1PhaseState:
    """A point of the closed strip; ``l``, ``f`` and ``g`` are recomputed on access."""

    alpha: float
    r: float
    c: float

    def __post_init__(self):
        if not all(np.isfinite(x) for x in (self.alpha, self.r, self.c)):
            raise DomainError("phase state must be finite")
        if not -HALF_PI <= self.alpha <= HALF_PI:
            raise DomainError(f"alpha={self.alpha} outside [-pi/2, pi/2]")
        if self.r < 0 or self.c < 0:
            raise DomainError("r and c must be >= 0")

    @property
    def l(self) -> float:
        return 0.5 * (math.sin(self.alpha) - 1.0)

    @property
    def f(self) -> float:
        return 5.0 * (self.c + self.r**2) ** 0.6

    @property
    def g(self) -> float:
        K = self.c + self.r**2
        if K == 0:
            raise DomainError("g is undefined at r = 0 when c = 0")
        return 4.0 * K**-0.4


# vector field and critical curves --------------------------------------------


def f1_f2(alpha, r, c):
    """Components of ``X``; vectorized over ``alpha`` and ``r``.

    ``f_1`` is written as ``cos(alpha) (-5 K^{3/5} cos^2 + 12 l^2 r^2 K^{-2/5})``;
    multiplying through by ``K^{2/5}`` is avoided so that ``c = 0, r = 0``
    returns 0 rather than NaN in the second term.
    """
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    K = c + r * r
    l = 0.5 * (np.sin(alpha) - 1.0)
    ca = np.cos(alpha)
    # clamp tiny negative cosines from rounding at -pi/2 and pi/2
    ca = np.where(np.abs(ca) < 1e-16, 0.0, ca)
    f = 5.0 * K**0.6
    with np.errstate(divide="ignore", invalid="ignore"):
        gr2 = np.where(r > 0, 4.0 * r * r * K**-0.4, 0.0)
    f1 = ca * (-f * ca * ca + 3.0 * l * l * gr2)
    f2 = l * (l * l * gr2 - 3.0 * f * ca * ca) * r
    if f1.ndim == 0:
        return float(f1), float(f2)
    return f1, f2


def _ratio_arg(num, den):
    return -num / den


def alpha_c(r, c):
    """``arcsin(-(2r^2 + 5c) / (8r^2 + 5c))``: ``f_1`` changes sign across it."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or c < 0:
        raise DomainError("alpha_c needs r >= 0 and c >= 0")
    if c == 0 and np.any(r == 0):
        raise DomainError("alpha_c is undefined at r = 0 when c = 0")
    out = np.arcsin(_ratio_arg(2 * r * r + 5 * c, 8 * r * r + 5 * c))
    return float(out) if out.ndim == 0 else out


def beta_c(r, c):
    """``arcsin(-(14r^2 + 15c) / (16r^2 + 15c))``: ``f_2`` changes sign across it."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or c < 0:
        raise DomainError("beta_c needs r >= 0 and c >= 0")
    if c == 0 and np.any(r == 0):
        raise DomainError("beta_c is undefined at r = 0 when c = 0")
    out = np.arcsin(_ratio_arg(14 * r * r + 15 * c, 16 * r * r + 15 * c))
    return float(out) if out.ndim == 0 else out


def reduced_residual(alpha, r, alpha_dot, r_dot, c) -> float:
    """Left-hand side ``f_1 r' - f_2 alpha'`` of the reduced equation."""
    f1, f2 = f1_f2(alpha, r, c)
    return f1 * r_dot - f2 * alpha_dot


def cayley_residuals(point: ChartPointSp1, alpha_dot: float, a_dot) -> np.ndarray:
    """The seven Cayley equations for an invariant curve through ``point``."""
    a0, a1, a2, a3 = point.a
    d0, d1, d2, d3 = np.asarray(a_dot, dtype=float)
    K = point.c + point.r2
    l = point.l
    f, g = 5.0 * K**0.6, 4.0 * K**-0.4
    ca = math.cos(point.alpha)
    r2 = point.r2
    A = ca * (-f * ca * ca + 3 * l * l * g * r2)
    Bc = l * (l * l * g * r2 - 3 * f * ca * ca)
    return np.array([
        d0 * a1 - d1 * a0 - d2 * a3 + d3 * a2,
        d0 * a2 + d1 * a3 - d2 * a0 - d3 * a1,
        d0 * a3 - d1 * a2 + d2 * a1 - d3 * a0,
        A * d0 - Bc * a0 * alpha_dot,
        A * d1 - Bc * a1 * alpha_dot,
        A * d2 - Bc * a2 * alpha_dot,
        A * d3 - Bc * a3 * alpha_dot,
    ])


# integration -------------------------------------------------------------------


@dataclass(frozen=True)
class FibreEvent:
    name: str
    alpha: float
    r: float
    direction: str
    slope: float  # dr/dalpha at the event


@dataclass
class FibreCurveSp1:
    """A fibre ``(alpha, r)`` ordered from its backward end to its forward end."""

    alpha: np.ndarray
    r: np.ndarray
    launch: Sp1PhaseState
    direction_vector: tuple
    topology: str
    events: list
    ends: dict  # {'backward': name, 'forward': name}
    eta: np.ndarray = field(default=None)

    @property
    def samples(self) -> np.ndarray:
        return np.column_stack([self.alpha, self.r])

    @property
    def c(self) -> float:
        return self.launch.c

    def event_tags(self) -> list[str]:
        """Per-sample tags: event names attached to the nearest sample."""
        tags = [[] for _ in self.alpha]
        for ev in self.events:
            i = int(np.argmin(np.hypot(self.alpha - ev.alpha, np.log(np.maximum(self.r, 1e-300))
                                       - math.log(max(ev.r, 1e-300)))))
            tags[i].append(ev.name)
        return [";".join(t) for t in tags]

    def rows(self) -> list[tuple[float, float, float, str]]:
        eta = self.eta if self.eta is not None else np.full(len(self.alpha), np.nan)
        return [(float(a), float(r), float(e), tag)
                for a, r, e, tag in zip(self.alpha, self.r, eta, self.event_tags())]


_DEFAULTS = dict(rtol=1e-10, atol=1e-12, alpha_margin=1e-6, r_min=1e-8, r_max=1e8, max_length=400.0,
                 max_step=0.05, equilibrium_radius=1e-5)


def _flow(c: float, sign: float):
    def rhs(_, y):
        alpha, rho = y
        r = math.exp(rho)
        K = c + r * r
        sa, ca = math.sin(alpha), math.cos(alpha)
        l = 0.5 * (sa - 1.0)
        f = 5.0 * K**0.6
        gr2 = 4.0 * r * r * K**-0.4
        f1 = ca * (-f * ca * ca + 3.0 * l * l * gr2)
        f2r = l * (l * l * gr2 - 3.0 * f * ca * ca)  # f_2 / r
        n = math.hypot(f1, f2r)
        if n == 0.0:
            return [0.0, 0.0]
        return [sign * f1 / n, sign * f2r / n]
    return rhs


def _make_events(c: float, opts: dict):
    margin, lr_min, lr_max = opts["alpha_margin"], math.log(opts["r_min"]), math.log(opts["r_max"])

    def alpha_max(_, y):
        return HALF_PI - margin - y[0]

    def alpha_min(_, y):
        return y[0] + HALF_PI - margin

    def r_min(_, y):
        return y[1] - lr_min

    def r_max(_, y):
        return lr_max - y[1]

    def equilibrium(_, y):
        return math.hypot(y[0] + HALF_PI, math.exp(y[1])) - opts["equilibrium_radius"]

    def cross_alpha_c(_, y):
        return y[0] - float(np.arcsin(-(2 * math.exp(2 * y[1]) + 5 * c) / (8 * math.exp(2 * y[1]) + 5 * c)))

    def cross_beta_c(_, y):
        return y[0] - float(np.arcsin(-(14 * math.exp(2 * y[1]) + 15 * c) / (16 * math.exp(2 * y[1]) + 15 * c)))

    for ev in (alpha_max, alpha_min, r_min, r_max, equilibrium):
        ev.terminal = True
    equilibrium.direction = -1.0  # only when approaching the point
    if c == 0:
        equilibrium.terminal = False
    return [alpha_max, alpha_min, r_min, r_max, equilibrium, cross_alpha_c, cross_beta_c]


_EVENT_NAMES = ("alpha_max", "alpha_min", "r_min", "r_max", "equilibrium", "alpha_c", "beta_c")
_TERMINAL = ("alpha_max", "alpha_min", "r_min", "r_max", "equilibrium")


def _integrate_half(launch: Sp1PhaseState, direction: str, opts: dict):
    sign = 1.0 if direction == "forward" else -1.0
    rhs = _flow(launch.c, sign)
    events = _make_events(launch.c, opts)
    sol = solve_ivp(rhs, (0.0, opts["max_length"]), [launch.alpha, math.log(launch.r)], method="DOP853",
                    rtol=opts["rtol"], atol=opts["atol"], events=events, max_step=opts["max_step"])
    alpha, r = sol.y[0], np.exp(sol.y[1])
    hits = []
    for name, t_ev, y_ev in zip(_EVENT_NAMES, sol.t_events, sol.y_events):
        for tt, yy in zip(t_ev, y_ev):
            a_e, r_e = float(yy[0]), float(math.exp(yy[1]))
            f1, f2 = f1_f2(a_e, r_e, launch.c)
            slope = f2 / f1 if f1 != 0 else math.inf
            hits.append((tt, FibreEvent(name, a_e, r_e, direction, float(slope))))
    hits.sort(key=lambda h: h[0])
    end = "max_length"
    if sol.status == 1:
        end = next(ev.name for _, ev in reversed(hits) if ev.name in _TERMINAL)
    elif sol.status < 0:
        raise RuntimeError(f"integration failed: {sol.message}")
    return alpha, r, [ev for _, ev in hits], end


def classify_ends(ends: dict, c: float) -> str:
    """Topology from the pair of end events.

    ``alpha_max``: the fibre closes up smoothly at ``alpha = pi/2`` (blue).
    ``equilibrium``: it runs into ``(-pi/2, 0)`` (green, ``c > 0``).
    ``r_min`` away from the equilibrium: for ``c > 0`` the fibre hugs the zero
    section towards ``alpha = pi/2`` and closes up there with ``r_0`` below
    ``r_min`` (blue); for ``c = 0`` it runs into the cone vertex.
    ``r_max`` / ``alpha_min``: an asymptotically conical end.
    """
    kinds = set(ends.values())
    if "max_length" in kinds:
        raise RuntimeError(f"fibre ends unresolved: {ends}; raise max_length")
    if c == 0:
        if "alpha_max" in kinds:
            return "R4_blue"
        return "S3_x_R"
    if "equilibrium" in kinds:
        return "R4_green"
    if kinds & {"alpha_max", "r_min"}:
        return "R4_blue"
    if kinds <= {"r_max", "alpha_min"}:
        return "S3_x_R"
    raise RuntimeError(f"unexpected end pair {ends}")


def integrate_fibre(launch: Sp1PhaseState, direction: str = "both", direction_vector=(1.0, 0.0, 0.0, 0.0),
                    n_exact: int = 201, **options) -> FibreCurveSp1:
    """Integrate the fibre through ``launch`` forward, backward or both ways along ``X``.

    Terminal events: ``alpha_max`` (within ``alpha_margin`` of ``pi/2``),
    ``alpha_min``, ``r_min``, ``r_max``; crossings of ``alpha_c`` and
    ``beta_c`` are recorded without stopping.  Launches on ``r = 0`` or
    ``alpha = -pi/2`` return the exact solutions sampled on ``n_exact`` points.
    ``direction_vector`` is the fixed unit direction of ``a`` (only used when
    the fibre is lifted back to the 8-dimensional chart).
    """
    opts = dict(_DEFAULTS)
    unknown = set(options) - set(opts)
    if unknown:
        raise TypeError(f"unknown options {sorted(unknown)}")
    opts.update(options)
    if direction not in ("forward", "backward", "both"):
        raise ValueError("direction must be 'forward', 'backward' or 'both'")
    n_vec = np.asarray(direction_vector, dtype=float)
    if n_vec.shape != (4,) or not np.isclose(np.linalg.norm(n_vec), 1.0):
        raise ValueError("direction_vector must be a unit 4-vector")
    dv = tuple(float(x) for x in n_vec)
    if launch.r == 0:
        alpha = np.linspace(-HALF_PI, HALF_PI, n_exact)
        return FibreCurveSp1(alpha, np.zeros(n_exact), launch, dv, "S4_zero_section", [],
                             {"backward": "exact", "forward": "exact"})
    if launch.alpha == -HALF_PI:
        r = np.concatenate([[0.0], np.geomspace(opts["r_min"], opts["r_max"], n_exact - 1)])
        return FibreCurveSp1(np.full(n_exact, -HALF_PI), r, launch, dv, "vertical_fibre", [],
                             {"backward": "exact", "forward": "exact"})
    if not -HALF_PI < launch.alpha < HALF_PI:
        raise DomainError("launch must lie in the open strip (or on an exact solution)")
    ends, events, parts = {}, [], []
    at_equilibrium = launch.c > 0 and math.hypot(launch.alpha + HALF_PI, launch.r) <= opts["equilibrium_radius"]
    if at_equilibrium and direction in ("backward", "both"):
        parts.append((np.array([launch.alpha]), np.array([launch.r])))
        events.append(FibreEvent("equilibrium", launch.alpha, launch.r, "backward", math.nan))
        ends["backward"] = "equilibrium"
    elif direction in ("backward", "both"):
        a, r, ev, end = _integrate_half(launch, "backward", opts)
        parts.append((a[::-1], r[::-1]))
        events += ev[::-1]
        ends["backward"] = end
    if direction in ("forward", "both"):
        a, r, ev, end = _integrate_half(launch, "forward", opts)
        parts.append((a[1:], r[1:]) if parts else (a, r))
        events += ev
        ends["forward"] = end
    alpha = np.concatenate([p[0] for p in parts])
    r = np.concatenate([p[1] for p in parts])
    topology = classify_ends(ends, launch.c) if direction == "both" else "partial"
    return FibreCurveSp1(alpha, r, launch, dv, topology, events, ends)


def green_slope(c: float) -> float:
    """Slope ``A`` of the invariant ray ``alpha + pi/2 = A r`` of ``X`` at ``(-pi/2, 0)``.

    Near that point ``X`` is a homogeneous cubic field,
    ``f_1 ~ c^{-2/5} eps (12 r^2 - 5 c eps^2)`` and
    ``f_2 ~ c^{-2/5} r (15 c eps^2 - 4 r^2)`` with ``eps = alpha + pi/2``;
    ``eps = A r`` is invariant iff ``20 c A^2 = 16``.
    """
    if c <= 0:
        raise DomainError("the green ray exists only for c > 0")
    return 2.0 / math.sqrt(5.0 * c)


def green_launch(c: float, r0: float = 5e-6) -> Sp1PhaseState:
    """Launch point on the invariant ray, inside the default equilibrium radius."""
    return Sp1PhaseState(-HALF_PI + green_slope(c) * r0, r0, c)


def classify_sp1(curve: FibreCurveSp1) -> str:
    if curve.topology in ("S4_zero_section", "vertical_fibre"):
        return curve.topology
    if set(curve.ends) != {"forward", "backward"}:
        raise ValueError("classification needs both ends of the curve")
    return classify_ends(curve.ends, curve.c)


def curve_to_alpha(launch: Sp1PhaseState, direction: str, alpha_target: float, **options) -> float:
    """Radius where the flow from ``launch`` first reaches ``alpha_target`` (graph form ``dr/dalpha = f_2/f_1``).

    Valid while ``f_1`` keeps its sign between the launch and the target.
    """
    opts = dict(_DEFAULTS)
    opts.update(options)
    c = launch.c

    def rhs(alpha, y):
        r = math.exp(y[0])
        f1, f2 = f1_f2(alpha, r, c)
        return [f2 / (r * f1)]

    sol = solve_ivp(rhs, (launch.alpha, alpha_target), [math.log(launch.r)], method="DOP853",
                    rtol=opts["rtol"], atol=opts["atol"])
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return float(math.exp(sol.y[0, -1]))


# multi-moment map and restricted metric ------------------------------------------------


def multi_moment_sp1(alpha, r, c):
    """Multi-moment map of the Sp(1) x Id_1 action."""
    if c < 0 or np.any(np.asarray(r) < 0):
        raise DomainError("multi_moment_sp1 needs r >= 0 and c >= 0")
    K = c + np.asarray(r, dtype=float) ** 2
    sm = np.sin(alpha) - 1.0
    r2 = np.asarray(r, dtype=float) ** 2
    return 5.0 / 6.0 * (r2 - 5.0 * c) * K**0.2 * sm**3 - 12.5 * K**1.2 * np.cos(alpha) ** 2 * sm


def restricted_metric_sp1(alpha, r, c, dr_dalpha=None) -> dict:
    """Coefficients of ``g_c`` on an invariant fibre: ``sigma_i^2`` (common), ``dr^2``, ``dalpha^2``."""
    alpha = np.asarray(alpha, dtype=float)
    r = np.asarray(r, dtype=float)
    K = c + r * r
    l = 0.5 * (np.sin(alpha) - 1.0)
    out = {
        "sigma_coeff": 5.0 * K**0.6 * np.cos(alpha) ** 2 + 4.0 * K**-0.4 * l * l * r * r,
        "dr_coeff": 4.0 * K**-0.4,
        "dalpha_coeff": 5.0 * K**0.6,
    }
    if dr_dalpha is not None:
        # everything along the curve in terms of dr
        out["radial_total"] = out["dr_coeff"] + out["dalpha_coeff"] / np.asarray(dr_dalpha) ** 2
        out["alpha_total"] = out["dalpha_coeff"] + out["dr_coeff"] * np.asarray(dr_dalpha) ** 2
    return out


def cone_radius_sp1(r):
    return 10.0 / 3.0 * np.asarray(r, dtype=float) ** 0.6


def extend_minus_half_pi(alpha: float, r: float, c: float, r_stop: float, rtol: float = 1e-11) -> tuple:
    """Continue an end escaping along ``alpha -> -pi/2`` out to ``r_stop``.

    Works in ``(log r, log eps)`` with ``eps = alpha + pi/2``; since ``eps``
    decays like ``r^{-3}`` it underflows the resolution of ``alpha`` long
    before ``r`` is large.  Returns ``(r, eps)`` sample arrays.
    """
    eps0 = alpha + HALF_PI
    if eps0 <= 0 or r <= 0 or r_stop <= r:
        raise DomainError("extend_minus_half_pi needs alpha > -pi/2, r > 0 and r_stop > r")

    def rhs(x, y):
        rr, eps = math.exp(x), math.exp(y[0])
        K = c + rr * rr
        ca, sa = math.sin(eps), -math.cos(eps)
        l = 0.5 * (sa - 1.0)
        f = 5.0 * K**0.6
        gr2 = 4.0 * rr * rr * K**-0.4
        f1 = ca * (-f * ca * ca + 3.0 * l * l * gr2)
        f2 = l * (l * l * gr2 - 3.0 * f * ca * ca) * rr
        return [rr * f1 / (eps * f2)]

    xs = np.linspace(math.log(r), math.log(r_stop), 400)
    sol = solve_ivp(rhs, (xs[0], xs[-1]), [math.log(eps0)], method="DOP853", rtol=rtol, atol=1e-12, t_eval=xs)
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return np.exp(sol.t), np.exp(sol.y[0])


def _escape_branch(curve: FibreCurveSp1, end: str, r_stop: float):
    """Monotone escaping tail of one end as ``(r, cos^2 alpha, l, dr/dalpha)`` arrays."""
    a, r = curve.alpha, curve.r
    if end == "backward":
        a, r = a[::-1], r[::-1]
    k = len(r) - 1
    while k > 0 and r[k - 1] < r[k]:
        k -= 1
    a, r = a[k:], r[k:]
    kind = curve.ends[end]
    c = curve.c
    if kind == "alpha_min":
        rr, eps = extend_minus_half_pi(a[-1], r[-1], c, r_stop)
        r = np.concatenate([r, rr[1:]])
        eps = np.concatenate([a + HALF_PI, eps[1:]])
        cos2 = np.sin(eps) ** 2
        sa = -np.cos(eps)
        alpha_like = eps - HALF_PI
    else:
        cos2 = np.cos(a) ** 2
        sa = np.sin(a)
        alpha_like = a
    return r, cos2, sa, alpha_like


def asymptotic_cone_sp1(curve: FibreCurveSp1, r_range=(1e4, 1e6), end: str = "forward") -> dict:
    """Fit ``sigma`` coefficients against ``k s^2`` on an escaping end, ``s = (10/3) r^{3/5}``.

    The end must escape (``r_max`` or ``alpha_min``); an ``alpha_min`` end is
    continued by :func:`extend_minus_half_pi`.  The fit uses 25 radii
    log-spaced over ``r_range`` and reports the exponent, the cone constant
    ``k`` from the fit and at the largest radius, the ``ds^2`` coefficient
    there and the angle reached.
    """
    kind = curve.ends.get(end)
    if kind not in ("r_max", "alpha_min"):
        raise ValueError(f"the {end} end does not escape (ended with {kind})")
    r, cos2, sa, alpha_like = _escape_branch(curve, end, 1.5 * r_range[1])
    rs = np.geomspace(r_range[0], r_range[1], 25)
    if rs[-1] > r[-1] or rs[0] < r[0]:
        raise DomainError("curve does not cover the requested radius range; raise r_max")
    lr = np.log(r)
    cos2_i = np.interp(np.log(rs), lr, cos2)
    sa_i = np.interp(np.log(rs), lr, sa)
    c = curve.c
    K = c + rs * rs
    l = 0.5 * (sa_i - 1.0)
    ca_i = np.sqrt(cos2_i)
    f = 5.0 * K**0.6
    gr2 = 4.0 * rs * rs * K**-0.4
    f1 = ca_i * (-f * cos2_i + 3.0 * l * l * gr2)
    f2 = l * (l * l * gr2 - 3.0 * f * cos2_i) * rs
    sigma = f * cos2_i + l * l * gr2
    radial = 4.0 * K**-0.4 + f * (f1 / f2) ** 2
    s = cone_radius_sp1(rs)
    ds_dr = 0.6 * s / rs
    fit = np.polyfit(np.log(s), np.log(sigma), 1)
    return {
        "end": end,
        "exponent": float(fit[0]),
        "cone_constant": float(np.exp(fit[1])),
        "cone_constant_at_max": float(sigma[-1] / s[-1] ** 2),
        "radial_coeff": float(radial[-1] / ds_dr[-1] ** 2),
        "alpha_limit": float(np.interp(np.log(rs[-1]), lr, alpha_like)),
    }


def blue_smoothness(curve: FibreCurveSp1, eps: float = 1e-3) -> dict:
    """Metric ratios near the ``alpha = pi/2`` end of a blue fibre.

    The model is ``5 (c + r_0^2)^{3/5} (deps^2 + eps^2 g_{S^3})`` with ``r_0``
    the radius at the end.  Reports ``sigma`` and ``dalpha`` coefficients
    divided by their model values at ``alpha = pi/2 - eps``.
    """
    ends = [d for d, e in curve.ends.items() if e == "alpha_max"]
    if not ends:
        raise ValueError("curve has no alpha = pi/2 end")
    ev = [e for e in curve.events if e.name == "alpha_max"][0]
    r0 = ev.r
    start = Sp1PhaseState(ev.alpha, r0, curve.c)
    r_eps = curve_to_alpha(start, "graph", HALF_PI - eps)
    alpha = HALF_PI - eps
    f1, f2 = f1_f2(alpha, r_eps, curve.c)
    coeffs = restricted_metric_sp1(alpha, r_eps, curve.c, dr_dalpha=f2 / f1)
    model = 5.0 * (curve.c + r0 * r0) ** 0.6
    return {
        "r0": r0,
        "sigma_ratio": float(coeffs["sigma_coeff"] / (model * eps**2)),
        "dalpha_ratio": float(coeffs["alpha_total"] / model),
        "slope": float(f2 / f1),
    }


def green_smoothness(curve: FibreCurveSp1, r_probe: float = 1e-4) -> dict:
    """Metric ratio near ``(-pi/2, 0)`` on a green fibre.

    Along ``alpha = A r - pi/2`` the restricted metric tends to
    ``c^{-2/5} (5 c A^2 + 4) (dr^2 + r^2 g_{S^3})``; ``ratio`` is
    ``sigma / (r^2 * radial)`` and ``scale_ratio`` the radial coefficient over
    the model constant, both tending to 1.
    """
    if curve.ends.get("backward") != "equilibrium":
        raise ValueError("curve does not start at (-pi/2, 0)")
    a, r = curve.alpha, curve.r
    k = 1
    while k < len(r) and r[k] > r[k - 1]:
        k += 1
    if not r[0] <= r_probe <= r[k - 1]:
        raise DomainError("r_probe is outside the monotone part of the curve near (-pi/2, 0)")
    al = float(np.interp(math.log(r_probe), np.log(r[:k]), a[:k]))
    f1, f2 = f1_f2(al, r_probe, curve.c)
    coeffs = restricted_metric_sp1(al, r_probe, curve.c, dr_dalpha=f2 / f1)
    A = (al + HALF_PI) / r_probe
    c = curve.c
    return {
        "A": A,
        "ratio": float(coeffs["sigma_coeff"] / (r_probe**2 * coeffs["radial_total"])),
        "scale_ratio": float(coeffs["radial_total"] / (c**-0.4 * (5 * c * A * A + 4))),
    }


# Cayley planes along fibres ---------------------------------------------------------


_ORBIT_DEFAULT = (0.4, 1.1, 0.7)  # gamma, theta, phi: any value, fibres are invariant


def fibre_point(alpha: float, r: float, c: float, direction_vector=(1.0, 0.0, 0.0, 0.0),
                orbit=_ORBIT_DEFAULT) -> ChartPointSp1:
    n = np.asarray(direction_vector, dtype=float)
    return ChartPointSp1(alpha, tuple(orbit), tuple(r * n), c=c)


def tangent_plane_sp1(point: ChartPointSp1, alpha_dot: float, r_dot: float, direction_vector, pack=None):
    """Plane spanned by the orbit directions ``d/dgamma, d/dtheta, d/dphi`` and the curve velocity."""
    pack = pack or build_sp1_pack(point)
    e = np.eye(8)
    vel = np.zeros(8)
    vel[0] = alpha_dot
    vel[4:] = r_dot * np.asarray(direction_vector, dtype=float)
    vecs = [pack.to_frame(e[1]), pack.to_frame(e[2]), pack.to_frame(e[3]), pack.to_frame(vel)]
    return FourPlane(tuple(vecs)), pack


def verify_cayley_sp1(curve: FibreCurveSp1, orbit=_ORBIT_DEFAULT, stride: int = 1,
                      perturb: float = 0.0) -> float:
    """Largest Cayley residual over the samples of a curve; stores per-sample values in ``curve.eta``.

    ``perturb`` tilts the velocity by that amount in the ``(-f_2, f_1)`` direction
    (unit-normalized) to check that the test detects non-Cayley planes.
    """
    n = curve.direction_vector
    out = np.full(len(curve.alpha), np.nan)
    for i in range(0, len(curve.alpha), stride):
        a, r = curve.alpha[i], curve.r[i]
        if not (-HALF_PI < a < HALF_PI) or r <= 0:
            continue
        f1, f2 = f1_f2(a, r, curve.c)
        norm = math.hypot(f1, f2)
        if norm == 0:
            continue
        ad, rd = f1 / norm, f2 / norm
        if perturb:
            ad, rd = ad - perturb * f2 / norm, rd + perturb * f1 / norm
        p = fibre_point(a, r, curve.c, n, orbit)
        plane, pack = tangent_plane_sp1(p, ad, rd, n)
        out[i] = eta_residual(plane, pack)
    curve.eta = out
    finite = out[np.isfinite(out)]
    return float(finite.max()) if finite.size else math.nan


# multi-moment ratio fields ------------------------------------------------------------------


def _coframe_gradient(point: ChartPointSp1, fn, step: float) -> np.ndarray:
    pack = build_sp1_pack(point)
    x = point.coords
    grad = np.zeros(8)
    for mu in range(8):
        h = step * max(1.0, abs(x[mu]))
        xp, xm = x.copy(), x.copy()
        xp[mu] += h
        xm[mu] -= h
        grad[mu] = (fn(xp) - fn(xm)) / (2 * h)
    return grad @ np.linalg.inv(pack.jacobian), pack


def _ratio(d_nu: np.ndarray, iota: np.ndarray) -> dict:
    k = float(d_nu @ iota / (iota @ iota))
    resid = float(np.linalg.norm(d_nu - k * iota) / max(np.linalg.norm(d_nu), 1e-300))
    return {"ratio": k, "relative_residual": resid}


def moment_ratio_sp1(point: ChartPointSp1, step: float = 1e-6) -> dict:
    """Least-squares ``k`` with ``d nu = k Phi(X_1, X_2, X_3, .)`` for the Sp(1) x Id_1 action.

    ``X_i`` are the vectors tangent to the orbit (no fibre component) with
    ``sigma_i(X_j) = delta_ij``; they differ from the generators of the action
    by a pointwise rotation, which leaves the triple contraction unchanged.
    """
    def nu(y):
        return multi_moment_sp1(y[0], math.sqrt(float(y[4:] @ y[4:])), point.c)

    d_nu, pack = _coframe_gradient(point, nu, step)
    block = np.linalg.inv(pack.jacobian[1:4, 1:4])
    contraction = pack.phi
    for j in range(3):
        vec = np.zeros(8)
        vec[1:4] = block[:, j]
        contraction = interior_product(pack.to_frame(vec), contraction)
    return _ratio(d_nu, contraction.to_array())


_LEFT = (
    np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float),
    np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float),
    np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=float),
)


def moment_ratio_fibre(point: ChartPointSp1, step: float = 1e-6) -> dict:
    """Same comparison for the action on the fibres, generated by ``a -> q a`` with ``q = i, j, k``."""
    def nu(y):
        return multi_moment_fibre(math.sqrt(float(y[4:] @ y[4:])), point.c)

    d_nu, pack = _coframe_gradient(point, nu, step)
    a = np.asarray(point.a)
    contraction = pack.phi
    for m in _LEFT:
        vec = np.zeros(8)
        vec[4:] = m @ a
        contraction = interior_product(pack.to_frame(vec), contraction)
    return _ratio(d_nu, contraction.to_array())
