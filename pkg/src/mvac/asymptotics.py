"""Limiting objects of the matrix Allen-Cahn flow.

* the pointwise relaxation ODE dB/dt = -eps^-2 B (B^t B - I) and its closed form,
* the O(n) diffusion equation dB/dt = 1/2 (Lap(B) B^t - B Lap(B)^t) B,
* phases of 2x2 orthogonal fields and the harmonic-field residual,
* the tanh transition profile across a det-sign interface and its surface tension.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy import integrate

from .errors import AmbiguousWinding, BadParameter, OrthogonalityDrift, ShapeMismatch, SingularMatrix
from .field import (IndexPair, det_sign_field, first_column_angle, index_pair, orthogonality_defect,
                    project_to_On, rotation_field, reflection_field, wrap_angle)
from .grid import grid_of
from .spectral import SpectralWorkspace, heat_solve, laplacian

log = logging.getLogger(__name__)

DRIFT_LIMIT = 1e-4
ORTHO_PRE_TOL = 1e-8
UNWRAP_LIMIT = np.pi * (1 - 1e-6)
PROFILE_CUTOFF = 40.0


# -- pointwise relaxation ---------------------------------------------------

def logistic_sigma(sigma0, t, epsilon):
    """Solution of sigma' = (sigma - sigma^3)/eps^2 with sigma(0) = sigma0 >= 0."""
    s0 = np.asarray(sigma0, dtype=float)
    e = np.exp(-2.0 * t / epsilon ** 2)
    return s0 / np.sqrt(e + s0 * s0 * (1.0 - e))


def pointwise_relax(B0, t: float, epsilon: float, singular_tol: float = 1e-12) -> np.ndarray:
    """Relax matrices ``B0`` (shape ``(..., n, n)``) for time t along the singular-value logistic flow."""
    if t < 0:
        raise BadParameter("t must be nonnegative")
    if not epsilon > 0:
        raise BadParameter("epsilon must be positive")
    B0 = np.asarray(B0, dtype=float)
    U, s, Vt = np.linalg.svd(B0)
    smin = s[..., -1]
    bad = smin <= singular_tol * np.sqrt(np.sum(s * s, axis=-1))
    if np.any(bad):
        # grid position of the first offender; single matrices report (0, 0)
        idx = tuple(np.argwhere(bad)[0]) + (0, 0) if np.ndim(bad) else (0, 0)
        raise SingularMatrix(idx[0], idx[1], sigma_min=float(np.min(smin)))
    return (U * logistic_sigma(s, t, epsilon)[..., None, :]) @ Vt


# -- O(n) diffusion -----------------------------------------------------------

def on_diffusion_rhs(B, ws: SpectralWorkspace) -> np.ndarray:
    L = laplacian(B, ws)
    Bt = np.swapaxes(B, -1, -2)
    Lt = np.swapaxes(L, -1, -2)
    return 0.5 * (L @ Bt - B @ Lt) @ B


def on_diffusion_step(B, dt: float, ws: SpectralWorkspace, drift_limit: float = DRIFT_LIMIT) -> np.ndarray:
    """Classical RK4 step; no projection.  Raises OrthogonalityDrift past ``drift_limit``."""
    B = np.asarray(B, dtype=float)
    k1 = on_diffusion_rhs(B, ws)
    k2 = on_diffusion_rhs(B + 0.5 * dt * k1, ws)
    k3 = on_diffusion_rhs(B + 0.5 * dt * k2, ws)
    k4 = on_diffusion_rhs(B + dt * k3, ws)
    out = B + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    drift = float(np.max(orthogonality_defect(out)))
    if not drift <= drift_limit:
        raise OrthogonalityDrift(f"pointwise ||B^t B - I|| reached {drift:.3e}")
    return out


@dataclass
class OnDiffusionTrajectory:
    dt: float
    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    drift: list = field(default_factory=list)    # max pointwise ||B^t B - I|| at each recorded step
    keep_snapshots: bool = True

    @property
    def final(self):
        return self.snapshots[-1]

    def record(self, s, t, B):
        self.steps.append(s)
        self.times.append(t)
        if not self.keep_snapshots:
            self.snapshots.clear()
        self.snapshots.append(B.copy())
        self.drift.append(float(np.max(orthogonality_defect(B))))


def run_on_diffusion(B0, dt: float, t_end: float, ws: SpectralWorkspace | None = None,
                     record_every: int = 1, project: bool = False, callback=None,
                     keep_snapshots: bool = True) -> OnDiffusionTrajectory:
    """Integrate the O(n) diffusion equation to ``t_end`` in steps of dt (last step shortened).

    ``project=True`` re-projects onto O(n) after every step, for long runs.
    """
    if not dt > 0 or t_end < 0:
        raise BadParameter("need dt > 0 and t_end >= 0")
    B = np.asarray(B0, dtype=float).copy()
    if float(np.max(orthogonality_defect(B))) > ORTHO_PRE_TOL:
        raise BadParameter(f"initial field is not orthogonal to {ORTHO_PRE_TOL:g}")
    if ws is None:
        ws = SpectralWorkspace(grid_of(B))
    traj = OnDiffusionTrajectory(dt=dt, keep_snapshots=keep_snapshots)
    traj.record(0, 0.0, B)
    n_steps = max(0, math.ceil(t_end / dt - 1e-9))
    for s in range(1, n_steps + 1):
        h = min(dt, t_end - (s - 1) * dt)
        B = on_diffusion_step(B, h, ws)
        if project:
            B = project_to_On(B)
        t = t_end if s == n_steps else s * dt
        if s % record_every == 0 or s == n_steps:
            traj.record(s, t, B)
        if callback is not None:
            callback(s, t, B)
    return traj


# -- phases -------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseField:
    eta: np.ndarray          # unwrapped phase, (N, N)
    index: IndexPair         # winding consumed by the unwrap
    det_sign: int            # +1 rotations, -1 reflections

    def linear_part(self):
        x1, x2 = grid_of(self.eta).coords
        return 2 * np.pi * (self.index.m * x1 + self.index.k * x2)

    def to_field(self):
        build = rotation_field if self.det_sign > 0 else reflection_field
        return build(self.eta)


def phase_of(B) -> PhaseField:
    """Unwrapped first-column angle of a 2x2 orthogonal field with one det sign.

    The unwrap walks down the column j = 0, then along every row.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 4 or B.shape[-1] != 2:
        raise ShapeMismatch("phase_of needs an (N, N, 2, 2) field")
    sign = det_sign_field(B)
    if not (np.all(sign > 0) or np.all(sign < 0)):
        raise BadParameter("phase_of needs a constant determinant sign")
    theta = first_column_angle(B)
    d1 = wrap_angle(np.roll(theta, -1, axis=0) - theta)
    d2 = wrap_angle(np.roll(theta, -1, axis=1) - theta)
    worst = max(float(np.max(np.abs(d1))), float(np.max(np.abs(d2))))
    if worst >= UNWRAP_LIMIT:
        raise AmbiguousWinding(f"neighbouring phases differ by {worst:.6f} rad")
    col = theta[0, 0] + np.concatenate([[0.0], np.cumsum(d1[:-1, 0])])
    eta = col[:, None] + np.concatenate([np.zeros((B.shape[0], 1)), np.cumsum(d2[:, :-1], axis=1)], axis=1)
    idx = index_pair(B, require_single_sign=False)
    return PhaseField(eta, idx, int(sign[0, 0]))


def phase_heat(pf: PhaseField, t: float, ws: SpectralWorkspace) -> np.ndarray:
    """Heat flow of a phase; the linear (winding) part is harmonic and carried along unchanged."""
    lin = pf.linear_part()
    return lin + heat_solve(pf.eta - lin, t, ws)


def harmonic_residual(B, ws: SpectralWorkspace) -> float:
    """Grid L2 norm of (Lap B)^t B - B^t Lap B."""
    B = np.asarray(B, dtype=float)
    L = laplacian(B, ws)
    R = np.swapaxes(L, -1, -2) @ B - np.swapaxes(B, -1, -2) @ L
    return float(np.sqrt(ws.grid.cell_area * np.sum(R * R)))


# -- transition profile -------------------------------------------------------

def _rot(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class TransitionProfile:
    """B(z) = R(xi1) diag(1, tanh(z/sqrt 2)) R(xi2)^t, reflection(eta_minus) at -inf, rotation(eta_plus) at +inf."""
    eta_minus: float
    eta_plus: float

    @property
    def xi1(self):
        return 0.5 * (self.eta_minus + self.eta_plus)

    @property
    def xi2(self):
        return 0.5 * (self.eta_minus - self.eta_plus)

    @staticmethod
    def sigma(z, order: int = 0):
        """tanh(z/sqrt 2) and its first two derivatives."""
        s = np.tanh(np.asarray(z, dtype=float) / np.sqrt(2.0))
        if order == 0:
            return s
        if order == 1:
            return (1 - s * s) / np.sqrt(2.0)
        if order == 2:
            return -s * (1 - s * s)
        raise ValueError("order must be 0, 1 or 2")

    def _assemble(self, d1, d2):
        U1, U2 = _rot(self.xi1), _rot(self.xi2)
        d1 = np.asarray(d1, dtype=float)
        d2 = np.asarray(d2, dtype=float)
        D = np.zeros(np.broadcast(d1, d2).shape + (2, 2))
        D[..., 0, 0] = d1
        D[..., 1, 1] = d2
        return U1 @ D @ U2.T

    def eval(self, z, order: int = 0):
        """B(z) (order 0) or its z-derivatives, shape ``z.shape + (2, 2)``."""
        z = np.asarray(z, dtype=float)
        top = np.ones_like(z) if order == 0 else np.zeros_like(z)
        return self._assemble(top, self.sigma(z, order))

    __call__ = eval

    def limit_minus(self):
        return reflection_field(self.eta_minus)

    def limit_plus(self):
        return rotation_field(self.eta_plus)


def profile_eval(p: TransitionProfile, z):
    return p.eval(z)


def profile_residual(p: TransitionProfile, z=None) -> float:
    """max over z of ||B'' - B (B^t B - I)||_F."""
    if z is None:
        z = np.linspace(-20.0, 20.0, 4001)
    B = p.eval(z)
    d2 = p.eval(z, order=2)
    R = d2 - B @ (np.swapaxes(B, -1, -2) @ B - np.eye(2))
    return float(np.max(np.sqrt(np.sum(R * R, axis=(-2, -1)))))


def gamma_bar(cutoff: float = PROFILE_CUTOFF) -> float:
    """int (1 - tanh^2(z/sqrt 2))^2 dz, truncated at |z| = cutoff (tail below 1e-20 at 40)."""
    # 1 - tanh^2 = sech^2, which keeps the tails free of cancellation
    val, _ = integrate.quad(lambda z: np.cosh(z / np.sqrt(2.0)) ** -4, -cutoff, cutoff,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


def profile_surface_tension(p: TransitionProfile, cutoff: float = PROFILE_CUTOFF) -> float:
    """int ||dB/dz||_F^2 dz across the profile (phase independent)."""
    def f(z):
        d = p.eval(z, order=1)
        return float(np.sum(d * d))
    val, _ = integrate.quad(f, -cutoff, cutoff, epsabs=1e-13, epsrel=1e-13, limit=200)
    return float(val)


# Tension that enters the interface motion laws: int sigma_z^2 dz = gamma_bar / 2.
SURFACE_TENSION = 2.0 * np.sqrt(2.0) / 3.0
