"""Pointwise linear algebra on matrix fields: projection onto O(n), energy,
determinant sign, winding numbers and field distances.

A matrix field is an ``(N, N, n, n)`` float array (see :mod:`mvac.grid`).
For n = 2 the polar factor is computed in closed form; writing
``A = [[a, b], [c, d]]``, the quantities

    p = |(a + d, c - b)|,    q = |(a - d, c + b)|

give the singular values ``(p + q)/2`` and ``|p - q|/2``, ``det A = (p^2 - q^2)/4``,
and the nearest orthogonal matrix is the rotation with direction ``(a + d, c - b)``
when p > q and the reflection with direction ``(a - d, c + b)`` when p < q.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (AmbiguousWinding, BadParameter, DegenerateDeterminant,
                     ShapeMismatch, SingularMatrix)
from .grid import grid_of

SINGULAR_TOL = 1e-12
DET_TOL = 1e-12
WINDING_BAND = 0.25


def rotation_field(eta) -> np.ndarray:
    """Rotation matrices [[cos, -sin], [sin, cos]] for every phase value."""
    eta = np.asarray(eta, dtype=float)
    c, s = np.cos(eta), np.sin(eta)
    out = np.empty(eta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def reflection_field(eta) -> np.ndarray:
    """Reflections [[cos, sin], [sin, -cos]]; same first column as the rotation."""
    eta = np.asarray(eta, dtype=float)
    c, s = np.cos(eta), np.sin(eta)
    out = np.empty(eta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = s
    out[..., 1, 1] = -c
    return out


def _first_bad(mask):
    idx = np.argwhere(mask)[0]
    return idx[0], idx[1]


def _polar_2x2(A):
    a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    p = np.hypot(a + d, c - b)
    q = np.hypot(a - d, c + b)
    return a, b, c, d, p, q


def singular_values(A) -> np.ndarray:
    """Pointwise singular values, descending, shape ``A.shape[:-1]``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n == 1:
        return np.abs(A[..., 0])
    if n == 2:
        *_, p, q = _polar_2x2(A)
        return np.stack([(p + q) / 2, np.abs(p - q) / 2], axis=-1)
    return np.linalg.svd(A, compute_uv=False)


def project_to_On(A, singular_tol: float = SINGULAR_TOL) -> np.ndarray:
    """Nearest orthogonal matrix ``U V^t`` at every grid point.

    Raises :class:`SingularMatrix` at the first point whose smallest singular value
    is at most ``singular_tol`` times its Frobenius norm; the nearest orthogonal
    matrix is not unique there.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if A.shape[-2] != n:
        raise ShapeMismatch(f"pointwise matrices must be square, got {A.shape[-2:]}")
    if n == 1:
        bad = A[..., 0, 0] == 0.0
        if np.any(bad):
            raise SingularMatrix(*_first_bad(bad), sigma_min=0.0)
        return np.sign(A)
    if n == 2:
        a, b, c, d, p, q = _polar_2x2(A)
        fro = np.sqrt(0.5 * (p * p + q * q))
        smin = 0.5 * np.abs(p - q)
        bad = smin <= singular_tol * fro
        if np.any(bad):
            i, j = _first_bad(bad)
            raise SingularMatrix(i, j, sigma_min=float(smin[i, j]))
        out = np.empty_like(A)
        rot = p > q
        with np.errstate(invalid="ignore", divide="ignore"):
            cr, sr = (a + d) / p, (c - b) / p
            cf, sf = (a - d) / q, (c + b) / q
        out[..., 0, 0] = np.where(rot, cr, cf)
        out[..., 0, 1] = np.where(rot, -sr, sf)
        out[..., 1, 0] = np.where(rot, sr, sf)
        out[..., 1, 1] = np.where(rot, cr, -cf)
        return out
    U, s, Vt = np.linalg.svd(A)
    fro = np.sqrt(np.sum(s * s, axis=-1))
    bad = s[..., -1] <= singular_tol * fro
    if np.any(bad):
        i, j = _first_bad(bad)
        raise SingularMatrix(i, j, sigma_min=float(s[i, j, -1]))
    return U @ Vt


def orthogonality_defect(A) -> np.ndarray:
    """Pointwise ``||A^t A - I||_F``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    G = np.swapaxes(A, -1, -2) @ A - np.eye(n)
    return np.sqrt(np.sum(G * G, axis=(-2, -1)))


def check_orthogonal(A, tol: float = 1e-12) -> bool:
    return bool(np.max(orthogonality_defect(A)) <= tol)


def determinant(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    if n == 1:
        return A[..., 0, 0].copy()
    if n == 2:
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return np.linalg.det(A)


def det_sign_field(A, det_tol: float = DET_TOL) -> np.ndarray:
    """Sign (+1/-1 as float) of the pointwise determinant."""
    A = np.asarray(A, dtype=float)
    n = A.shape[-1]
    det = determinant(A)
    fro = np.sqrt(np.sum(A * A, axis=(-2, -1)))
    bad = np.abs(det) < det_tol * fro ** n
    bad |= det == 0.0
    if np.any(bad):
        i, j = _first_bad(bad)
        raise DegenerateDeterminant(i, j, float(det[i, j]))
    return np.sign(det)


@dataclass(frozen=True)
class EnergyReport:
    dirichlet: float
    potential: float
    total: float
    epsilon: float


def dirichlet_energy(A, method: str = "spectral") -> float:
    """Value of the integral of 0.5 * ||grad A||_F^2 over the torus.

    ``spectral`` uses Parseval with the Laplacian symbol; ``fd`` uses centred
    differences and is kept as a second-order cross-check.
    """
    A = np.asarray(A, dtype=float)
    grid = grid_of(A)
    N = grid.N
    if method == "spectral":
        Ahat = np.fft.fft2(A, axes=(0, 1))
        power = np.sum(np.abs(Ahat) ** 2, axis=(-2, -1))
        return float(0.5 * np.sum(-grid.laplacian_symbol * power) / N ** 4)
    if method == "fd":
        h = grid.spacing
        d1 = (np.roll(A, -1, axis=0) - np.roll(A, 1, axis=0)) / (2 * h)
        d2 = (np.roll(A, -1, axis=1) - np.roll(A, 1, axis=1)) / (2 * h)
        return float(0.5 * h * h * (np.sum(d1 * d1) + np.sum(d2 * d2)))
    raise ValueError(f"unknown method {method!r}")


def potential_density(A) -> np.ndarray:
    """Pointwise W(A) = 1/4 ||A^t A - I||_F^2."""
    return 0.25 * orthogonality_defect(A) ** 2


def energy(A, epsilon: float, method: str = "spectral") -> EnergyReport:
    if not epsilon > 0:
        raise BadParameter(f"epsilon must be positive, got {epsilon!r}")
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise BadParameter("field has non-finite entries")
    h2 = grid_of(A).cell_area
    dirichlet = dirichlet_energy(A, method)
    potential = float(h2 * np.sum(potential_density(A)) / epsilon ** 2)
    return EnergyReport(dirichlet, potential, dirichlet + potential, float(epsilon))


class IndexPair(NamedTuple):
    m: int
    k: int


def wrap_angle(d):
    """Map angle differences into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(d, dtype=float), 2 * np.pi)


def first_column_angle(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return np.arctan2(A[..., 1, 0], A[..., 0, 0])


def _loop_winding(theta_loop):
    inc = wrap_angle(np.diff(theta_loop, append=theta_loop[:1]))
    w = float(np.sum(inc) / (2 * np.pi))
    r = round(w)
    if abs(w - r) > WINDING_BAND:
        raise AmbiguousWinding(f"accumulated winding {w:.4f} is not near an integer")
    return int(r)


def index_pair(A, require_single_sign: bool = True) -> IndexPair:
    """Winding of the first column around the two fundamental loops of the torus.

    ``m`` is taken along the loop j = 0 (x2 fixed), ``k`` along i = 0 (x1 fixed).
    """
    A = np.asarray(A, dtype=float)
    if A.shape[-1] != 2:
        raise ShapeMismatch("index pair is defined for n = 2 fields")
    if require_single_sign:
        s = det_sign_field(A)
        if not (np.all(s > 0) or np.all(s < 0)):
            raise BadParameter("index pair needs a field with a single determinant sign")
    if np.any(np.hypot(A[..., 0, 0], A[..., 1, 0]) == 0.0):
        raise AmbiguousWinding("first column vanishes somewhere")
    theta = first_column_angle(A)
    return IndexPair(_loop_winding(theta[:, 0]), _loop_winding(theta[0, :]))


def l1_frobenius_distance(A, B) -> float:
    """h^2 * sum over points of ||A - B||_F."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatch(f"fields differ in shape: {A.shape} vs {B.shape}")
    D = A - B
    h2 = grid_of(A).cell_area
    return float(h2 * np.sum(np.sqrt(np.sum(D * D, axis=(-2, -1)))))
