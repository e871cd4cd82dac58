import numpy as np
import pytest

from bscayley.forms import DIM, KForm, MetricAtPoint, combos


def random_form(rng: np.random.Generator, k: int, scale: float = 1.0) -> KForm:
    return KForm.from_array(k, scale * rng.normal(size=len(combos(k))))


def random_metric(rng: np.random.Generator, spread: float = 1.0) -> MetricAtPoint:
    """A random positive definite gram matrix with eigenvalues in ``[e^-spread, e^spread]``."""
    q, _ = np.linalg.qr(rng.normal(size=(DIM, DIM)))
    return MetricAtPoint(q @ np.diag(np.exp(rng.uniform(-spread, spread, DIM))) @ q.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
