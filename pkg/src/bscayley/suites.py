"""Verification suites shared by the command line and the test-suite.

Each suite samples a chart and returns its largest residual together with the
tolerance it is judged against.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .cayley import FourPlane, is_cayley, lambda_basis, pi7_matrix
from .errors import DomainError
from .forms import compound, hodge_star, wedge
from .geometry import build_pack, sample_so3_points, sample_sp1_points, verify_torsion_free

DEFAULT_TOLERANCES = {
    "torsion_free": 1e-6,
    "self_duality": 1e-8,
    "volume": 1e-10,
    "phi_squared": 1e-10,
    "pi7_idempotence": 1e-10,
    "pi7_lambda": 1e-10,
    "cayley_planes": 1e-8,
}

RANK_TOL = 1e-8


@dataclass(frozen=True)
class SuiteResult:
    chart: str
    suite: str
    c: float
    max_residual: float
    tolerance: float
    seconds: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.max_residual < self.tolerance)

    def row(self) -> tuple:
        return (self.chart, self.suite, self.c, self.max_residual, self.tolerance, int(self.passed), self.detail)


ROW_COLUMNS = ("chart", "suite", "c", "max_residual", "tolerance", "passed", "detail")


def _points(chart: str, c: float, n: int, seed: int):
    rng = np.random.default_rng(seed)
    if chart == "so3":
        return sample_so3_points(rng, n, c)
    if chart == "sp1":
        return sample_sp1_points(rng, n, c)
    raise ValueError(f"unknown chart {chart!r}")


def _packs(chart: str, c: float, n: int, seed: int):
    return [build_pack(p) for p in _points(chart, c, n, seed)]


def self_duality_residual(packs) -> float:
    worst = 0.0
    for pk in packs:
        star = hodge_star(pk.phi, pk.metric, pk.volume)
        worst = max(worst, (star - pk.phi).max_abs() / pk.phi.max_abs())
    return worst


def volume_residual(packs) -> float:
    """Relative mismatch between the stored volume form and ``sqrt(det g)`` with positive orientation."""
    worst = 0.0
    for pk in packs:
        vol = pk.volume[tuple(range(8))]
        worst = max(worst, abs(vol - pk.metric.sqrt_det) / pk.metric.sqrt_det)
    return worst


def phi_squared_residual(packs) -> float:
    """``|Phi ^ Phi - 14 vol| / (14 |vol|)``; 14 is the flat-model value of ``Phi ^ Phi / vol``."""
    worst = 0.0
    for pk in packs:
        top = wedge(pk.phi, pk.phi)[tuple(range(8))]
        vol = pk.volume[tuple(range(8))]
        worst = max(worst, abs(top - 14.0 * vol) / (14.0 * abs(vol)))
    return worst


def pi7_report(packs, rng: np.random.Generator, n_forms: int = 100) -> dict:
    """Idempotence and lambda-basis residuals measured in the metric norm on 2-forms (basis independent)."""
    idem, rank_bad, lam = 0.0, 0, 0.0
    ranks = set()
    for pk in packs:
        m = pi7_matrix(pk)
        g2 = compound(pk.metric.inverse, 2)  # metric on 2-form coefficients
        forms = rng.normal(size=(28, n_forms))
        img = m @ forms
        diff = m @ img - img
        num = np.sqrt(np.einsum("in,ij,jn->n", diff, g2, diff))
        den = np.sqrt(np.einsum("in,ij,jn->n", img, g2, img))
        idem = max(idem, float(np.max(num / den)))
        sv = np.linalg.svd(m, compute_uv=False)
        rank = int(np.sum(sv > RANK_TOL * sv[0]))
        ranks.add(rank)
        rank_bad += rank != 7
        if pk.chart == "so3" and pk.basis == "diagonalizing":
            for lam_i in lambda_basis(pk):
                arr = lam_i.to_array()
                diff = m @ arr - arr
                lam = max(lam, float(np.sqrt(diff @ g2 @ diff / (arr @ g2 @ arr))))
    return {"idempotence": idem, "ranks": sorted(ranks), "rank_failures": rank_bad, "lambda": lam}


def cayley_plane_residual(packs) -> tuple[float, set]:
    """Residual of the vertical and horizontal coordinate 4-planes; also the orientation signs seen."""
    worst, signs = 0.0, set()
    e = np.eye(8)
    for pk in packs:
        for idx in ((0, 1, 2, 3), (4, 5, 6, 7)):
            rep = is_cayley(FourPlane(tuple(e[i] for i in idx)), pk)
            worst = max(worst, rep.residual)
            signs.add((idx[0], rep.orientation))
    return worst, signs


def run_suites(chart: str, c: float, n_points: int = 200, fd_step: float = 1e-5, seed: int = 0,
               tolerances: dict | None = None, algebra_points: int | None = None) -> list[SuiteResult]:
    """Run every suite for one chart and one value of ``c``.

    The torsion-free suite uses ``n_points`` samples; the algebraic suites use
    ``algebra_points`` samples (default ``n_points``) drawn with the same seed.
    """
    if c < 0 or not np.isfinite(c):
        raise DomainError(f"c must be a finite number >= 0, got {c}")
    if algebra_points is None:
        algebra_points = n_points
    if n_points < 1 or algebra_points < 1:
        raise ValueError("point counts must be positive")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    out = []

    t0 = time.perf_counter()
    rep = verify_torsion_free(chart, c, n_points=n_points, fd_step=fd_step, seed=seed)
    out.append(SuiteResult(chart, "torsion_free", c, rep["max_abs_coeff"], tol["torsion_free"],
                           time.perf_counter() - t0, f"points={n_points};step={fd_step:g}"))

    t0 = time.perf_counter()
    packs = _packs(chart, c, algebra_points, seed)
    build = time.perf_counter() - t0

    def timed(name, fn, detail=""):
        t = time.perf_counter()
        val = fn()
        out.append(SuiteResult(chart, name, c, float(val), tol[name], time.perf_counter() - t + build, detail))

    timed("self_duality", lambda: self_duality_residual(packs))
    timed("volume", lambda: volume_residual(packs))
    timed("phi_squared", lambda: phi_squared_residual(packs), "Phi^Phi = 14 vol")

    t = time.perf_counter()
    p7 = pi7_report(packs, np.random.default_rng(seed + 1))
    el = time.perf_counter() - t
    out.append(SuiteResult(chart, "pi7_idempotence", c, p7["idempotence"], tol["pi7_idempotence"], el))
    out.append(SuiteResult(chart, "pi7_rank", c, float(p7["rank_failures"]), 0.5, el,
                           "ranks=" + "/".join(map(str, p7["ranks"]))))
    if chart == "so3":
        out.append(SuiteResult(chart, "pi7_lambda", c, p7["lambda"], tol["pi7_lambda"], el))

    t = time.perf_counter()
    worst, signs = cayley_plane_residual(packs)
    detail = ";".join(f"{'horizontal' if k == 0 else 'vertical'}:{s:+d}" for k, s in sorted(signs))
    out.append(SuiteResult(chart, "cayley_planes", c, worst, tol["cayley_planes"], time.perf_counter() - t, detail))
    return out
