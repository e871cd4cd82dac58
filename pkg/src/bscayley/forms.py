"""Pointwise exterior algebra over an 8-dimensional coframe.

A :class:`KForm` stores the coefficients of a k-form with respect to an
ordered coframe ``theta^0 .. theta^7`` keyed by strictly increasing index
tuples, so ``{(0, 1): 2.0}`` is ``2 theta^0 ^ theta^1``.  Tangent vectors are
plain length-8 arrays of components in the dual frame.

Changes of basis, metric inner products and the Hodge star are computed with
compound matrices (matrices of k x k minors), which is also what the numeric
exterior derivative uses to move between a coframe and coordinate
differentials.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DegreeError

DIM = 8


@lru_cache(maxsize=None)
def combos(k: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing index tuples of length ``k``, in lexicographic order."""
    return tuple(itertools.combinations(range(DIM), k))


@lru_cache(maxsize=None)
def _combo_array(k: int) -> np.ndarray:
    return np.array(combos(k), dtype=int).reshape(len(combos(k)), k)


@lru_cache(maxsize=None)
def combo_index(k: int) -> dict[tuple[int, ...], int]:
    return {key: i for i, key in enumerate(combos(k))}


def _inversions(seq: Iterable[int]) -> int:
    seq = list(seq)
    return sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])


def compound(m: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: ``C[A, B] = det(m[A][:, B])`` over increasing tuples."""
    m = np.asarray(m, dtype=float)
    if k == 0:
        return np.ones((1, 1))
    idx = _combo_array(k)
    sub = m[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


class KForm:
    """An alternating k-form given by sparse coefficients over a fixed coframe.

    Instances are immutable.  Zero coefficients are dropped on construction, so
    an absent key always means an exactly zero coefficient.
    """

    __slots__ = ("degree", "_coeffs")
    __array_ufunc__ = None  # numpy scalars defer to __rmul__ instead of broadcasting

    def __init__(self, degree: int, coeffs: Mapping[tuple[int, ...], float] | None = None):
        if not 0 <= degree <= DIM:
            raise DegreeError("degree exceeds 8" if degree > DIM else f"negative degree {degree}")
        clean: dict[tuple[int, ...], float] = {}
        for key, val in (coeffs or {}).items():
            key = tuple(int(i) for i in key)
            if (
                len(key) != degree
                or any(a >= b for a, b in zip(key, key[1:]))
                or (key and (key[0] < 0 or key[-1] >= DIM))
            ):
                raise ValueError(f"index tuple {key} is not a strictly increasing {degree}-tuple in 0..7")
            val = float(val)
            if val != 0.0:
                clean[key] = val
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "_coeffs", MappingProxyType(clean))

    def __setattr__(self, name, value):
        raise AttributeError("KForm is immutable")

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, degree: int) -> "KForm":
        return cls(degree)

    @classmethod
    def scalar(cls, value: float) -> "KForm":
        return cls(0, {(): value})

    @classmethod
    def basis(cls, *indices: int, coeff: float = 1.0) -> "KForm":
        """``coeff * theta^{i1} ^ ... ^ theta^{ik}`` for indices in any order."""
        if len(set(indices)) < len(indices):
            return cls(len(indices))
        sign = -1.0 if _inversions(indices) % 2 else 1.0
        return cls(len(indices), {tuple(sorted(indices)): sign * coeff})

    @classmethod
    def one_form(cls, comps) -> "KForm":
        comps = np.asarray(comps, dtype=float)
        return cls(1, {(i,): comps[i] for i in range(DIM)})

    @classmethod
    def from_array(cls, degree: int, arr) -> "KForm":
        arr = np.asarray(arr, dtype=float).ravel()
        keys = combos(degree)
        if arr.shape[0] != len(keys):
            raise ValueError(f"expected {len(keys)} coefficients for degree {degree}, got {arr.shape[0]}")
        return cls(degree, dict(zip(keys, arr)))

    @classmethod
    def from_tensor(cls, tensor) -> "KForm":
        """Inverse of :meth:`to_tensor` (reads the increasing-index entries)."""
        tensor = np.asarray(tensor, dtype=float)
        k = tensor.ndim
        return cls(k, {key: tensor[key] for key in combos(k)})

    # access -------------------------------------------------------------------

    @property
    def coeffs(self) -> Mapping[tuple[int, ...], float]:
        return self._coeffs

    def __getitem__(self, key) -> float:
        return self._coeffs.get(tuple(key), 0.0)

    def __iter__(self):
        return iter(self._coeffs.items())

    def __len__(self):
        return len(self._coeffs)

    def to_array(self) -> np.ndarray:
        out = np.zeros(len(combos(self.degree)))
        index = combo_index(self.degree)
        for key, val in self._coeffs.items():
            out[index[key]] = val
        return out

    def to_tensor(self) -> np.ndarray:
        """Fully antisymmetric component tensor, ``T[i1..ik] = a(e_i1, .., e_ik)``."""
        k = self.degree
        out = np.zeros((DIM,) * k)
        perms = list(itertools.permutations(range(k)))
        signs = [(-1.0) ** _inversions(p) for p in perms]
        for key, val in self._coeffs.items():
            for p, sgn in zip(perms, signs):
                out[tuple(key[i] for i in p)] = sgn * val
        return out

    def evaluate(self, *vectors) -> float:
        """Value on ``k`` tangent vectors (determinant convention)."""
        if len(vectors) != self.degree:
            raise ValueError(f"a {self.degree}-form takes {self.degree} vectors, got {len(vectors)}")
        if self.degree == 0:
            return self[()]
        vmat = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        return float(sum(val * np.linalg.det(vmat[list(key), :]) for key, val in self._coeffs.items()))

    def max_abs(self) -> float:
        return max((abs(v) for v in self._coeffs.values()), default=0.0)

    def in_basis(self, transition) -> "KForm":
        """Re-express in a new coframe.

        ``transition[i, j]`` is the coefficient of new basis 1-form ``j`` in old
        basis 1-form ``i``.
        """
        return KForm.from_array(self.degree, self.to_array() @ compound(transition, self.degree))

    def allclose(self, other: "KForm", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        if self.degree != other.degree:
            return False
        return bool(np.allclose(self.to_array(), other.to_array(), atol=atol, rtol=rtol))

    # arithmetic ---------------------------------------------------------------

    def _check_same_degree(self, other: "KForm"):
        if not isinstance(other, KForm):
            return NotImplemented
        if other.degree != self.degree:
            raise DegreeError(f"cannot add forms of degree {self.degree} and {other.degree}")

    def __add__(self, other: "KForm") -> "KForm":
        if self._check_same_degree(other) is NotImplemented:
            return NotImplemented
        out = dict(self._coeffs)
        for key, val in other._coeffs.items():
            out[key] = out.get(key, 0.0) + val
        return KForm(self.degree, out)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, {k: -v for k, v in self._coeffs.items()})

    def __sub__(self, other: "KForm") -> "KForm":
        if self._check_same_degree(other) is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar) -> "KForm":
        if isinstance(scalar, KForm):
            return NotImplemented
        scalar = float(scalar)
        return KForm(self.degree, {k: scalar * v for k, v in self._coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "KForm":
        return self * (1.0 / float(scalar))

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"KForm({self.degree}, 0)"
        terms = " + ".join(f"{v:.6g}*e{''.join(map(str, k))}" for k, v in sorted(self._coeffs.items()))
        return f"KForm({self.degree}, {terms})"


def wedge(*forms: KForm) -> KForm:
    """Exterior product of one or more forms, left to right."""
    if not forms:
        raise ValueError("wedge needs at least one form")
    out = forms[0]
    for b in forms[1:]:
        out = _wedge2(out, b)
    return out


def _wedge2(a: KForm, b: KForm) -> KForm:
    if a.degree + b.degree > DIM:
        raise DegreeError("degree exceeds 8")
    acc: dict[tuple[int, ...], float] = {}
    for ka, va in a:
        sa = set(ka)
        for kb, vb in b:
            if sa.intersection(kb):
                continue
            # sign of the shuffle that sorts ka + kb
            n_swaps = sum(1 for i in ka for j in kb if i > j)
            key = tuple(sorted(ka + kb))
            acc[key] = acc.get(key, 0.0) + (-va * vb if n_swaps % 2 else va * vb)
    return KForm(a.degree + b.degree, acc)


def wedge_rows(rows) -> np.ndarray:
    """Coefficient array of ``row_0 ^ ... ^ row_{k-1}`` for 1-forms given as matrix rows.

    Accepts a stack ``(..., k, 8)`` and returns ``(..., C(8, k))``; each
    coefficient is a k x k minor, which is much faster than repeated
    :func:`wedge` when assembling forms from dense 1-forms.
    """
    rows = np.asarray(rows, dtype=float)
    k = rows.shape[-2]
    idx = _combo_array(k)
    sub = rows[..., idx]  # (..., k, n, k)
    return np.linalg.det(np.moveaxis(sub, -2, -3))


def interior_product(v, a: KForm) -> KForm:
    """``v _| a``, contracting the first slot."""
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form is undefined")
    v = np.asarray(v, dtype=float)
    acc: dict[tuple[int, ...], float] = {}
    for key, val in a:
        for pos, idx in enumerate(key):
            if v[idx] == 0.0:
                continue
            rest = key[:pos] + key[pos + 1:]
            term = v[idx] * val
            acc[rest] = acc.get(rest, 0.0) + (-term if pos % 2 else term)
    return KForm(a.degree - 1, acc)


class MetricAtPoint:
    """Inner products of the frame vectors: ``g = sum gram[a, b] theta^a theta^b``."""

    __slots__ = ("gram", "inverse", "_chol")

    def __init__(self, gram):
        g = np.array(gram, dtype=float)
        if g.shape != (DIM, DIM):
            raise ValueError(f"gram matrix must be {DIM}x{DIM}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gram matrix has non-finite entries")
        scale = max(np.abs(g).max(), 1.0)
        if not np.allclose(g, g.T, atol=1e-12 * scale, rtol=0):
            raise ValueError("gram matrix is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise ValueError("metric is not positive definite") from None
        g.setflags(write=False)
        inv = np.linalg.inv(g)
        inv = 0.5 * (inv + inv.T)
        inv.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "inverse", inv)
        object.__setattr__(self, "_chol", chol)

    def __setattr__(self, name, value):
        raise AttributeError("MetricAtPoint is immutable")

    @property
    def sqrt_det(self) -> float:
        return float(np.prod(np.diag(self._chol)))

    def dot(self, u, v) -> float:
        return float(np.asarray(u) @ self.gram @ np.asarray(v))

    def volume_form(self, sign: float = 1.0) -> KForm:
        return KForm(DIM, {tuple(range(DIM)): np.sign(sign) * self.sqrt_det})


def flat(v, g: MetricAtPoint) -> KForm:
    return KForm.one_form(g.gram @ np.asarray(v, dtype=float))


def sharp(a: KForm, g: MetricAtPoint) -> np.ndarray:
    if a.degree != 1:
        raise DegreeError(f"sharp needs a 1-form, got degree {a.degree}")
    return g.inverse @ a.to_array()


def inner(a: KForm, b: KForm, g: MetricAtPoint) -> float:
    """Metric pairing of two k-forms (the one making ``theta^I`` orthonormal when g = I)."""
    if a.degree != b.degree:
        raise DegreeError("inner product needs forms of equal degree")
    return float(a.to_array() @ compound(g.inverse, a.degree) @ b.to_array())


def norm(a: KForm, g: MetricAtPoint) -> float:
    return float(np.sqrt(max(inner(a, a, g), 0.0)))


@lru_cache(maxsize=None)
def _complement_signs(k: int) -> tuple[np.ndarray, np.ndarray]:
    """For each k-tuple B: row of B^c among (8-k)-tuples and sign of (B, B^c)."""
    index = combo_index(DIM - k)
    rows, signs = [], []
    for key in combos(k):
        comp = tuple(i for i in range(DIM) if i not in key)
        rows.append(index[comp])
        signs.append(-1.0 if _inversions(key + comp) % 2 else 1.0)
    return np.array(rows, dtype=int), np.array(signs)


def hodge_star(a: KForm, g: MetricAtPoint, orientation: KForm, rtol: float = 1e-10) -> KForm:
    """Hodge star defined by ``b ^ *a = <b, a> vol`` for the oriented volume form ``orientation``."""
    if orientation.degree != DIM:
        raise DegreeError("orientation must be an 8-form")
    vol = orientation[tuple(range(DIM))]
    if not np.isclose(abs(vol), g.sqrt_det, rtol=rtol, atol=0.0):
        raise ValueError("orientation is not a unit-norm volume form for this metric")
    k = a.degree
    paired = compound(g.inverse, k) @ a.to_array()
    rows, signs = _complement_signs(k)
    out = np.zeros(len(combos(DIM - k)))
    out[rows] = signs * vol * paired
    return KForm.from_array(DIM - k, out)


@lru_cache(maxsize=None)
def _d_scatter(k: int) -> np.ndarray:
    """W[mu, M, N] = sign with dx^mu ^ dx^M = sign dx^N."""
    rows = combo_index(k + 1)
    w = np.zeros((DIM, len(combos(k)), len(combos(k + 1))))
    for m, key in enumerate(combos(k)):
        for mu in range(DIM):
            if mu in key:
                continue
            below = sum(1 for i in key if i < mu)
            w[mu, m, rows[tuple(sorted(key + (mu,)))]] = -1.0 if below % 2 else 1.0
    return w


_STENCILS = {
    2: ((1.0, -1.0), (1.0, -1.0), 2.0),
    4: ((1.0, -1.0, 2.0, -2.0), (8.0, -8.0, -1.0, 1.0), 12.0),
}


def exterior_derivative(
    field: Callable[[np.ndarray], KForm],
    at,
    step: float = 1e-5,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    order: int = 4,
) -> KForm:
    """Numeric exterior derivative of a form field at a coordinate point.

    ``field(x)`` returns the form at coordinates ``x`` expressed in a coframe
    whose rows in coordinate differentials are ``jacobian(x)``
    (``theta^a = sum_mu J[a, mu] dx^mu``); with ``jacobian=None`` the field is
    already in coordinate differentials.  Coefficients are differentiated with a
    central stencil of the given order and step ``step * max(1, |x_mu|)``; the
    result is returned in the coframe at ``at``.
    """
    if order not in _STENCILS:
        raise ValueError(f"stencil order must be one of {sorted(_STENCILS)}")
    x = np.asarray(at, dtype=float)
    if x.shape != (DIM,):
        raise ValueError(f"expected {DIM} coordinates, got shape {x.shape}")
    offsets, weights, denom = _STENCILS[order]

    k = None

    def coord_coeffs(y):
        nonlocal k
        form = field(y)
        if k is None:
            k = form.degree
            if k >= DIM:
                raise DegreeError("degree exceeds 8")
        arr = form.to_array()
        if jacobian is not None:
            arr = arr @ compound(jacobian(y), k)
        return arr

    derivs = []
    for mu in range(DIM):
        h = step * max(1.0, abs(x[mu]))
        acc = None
        for off, wt in zip(offsets, weights):
            y = x.copy()
            y[mu] += off * h
            term = wt * coord_coeffs(y)
            acc = term if acc is None else acc + term
        derivs.append(acc / (denom * h))
    d_coord = np.einsum("um,umn->n", np.array(derivs), _d_scatter(k))
    if jacobian is not None:
        d_coord = d_coord @ compound(np.linalg.inv(jacobian(x)), k + 1)
    return KForm.from_array(k + 1, d_coord)
