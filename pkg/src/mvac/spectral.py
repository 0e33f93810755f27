"""Fourier-space heat propagator and Laplacian on the periodic grid.

Transforms run over the two grid axes only, so the same routines act on
scalar fields ``(N, N)`` and componentwise on matrix fields ``(N, N, n, n)``.
Forward transforms are unnormalized and inverse transforms divide by N^2, so
multiplier tables do not depend on the normalization.
"""
import numpy as np

from .errors import ShapeMismatch
from .grid import Grid

IMAG_TOL = 1e-12


class SpectralWorkspace:
    """Laplacian symbol table for a grid, plus the heat multiplier for one cached tau."""

    def __init__(self, grid: Grid, tau: float | None = None):
        if grid.N % 2:
            raise ValueError(f"spectral workspace needs an even grid size, got N = {grid.N}")
        self.grid = grid
        symbol = grid.laplacian_symbol.copy()
        symbol.flags.writeable = False
        self.symbol = symbol
        self.tau = tau
        self._heat = None
        if tau is not None:
            if tau < 0:
                raise ValueError("tau must be nonnegative")
            self._heat = np.exp(self.symbol * tau)
            self._heat.flags.writeable = False

    def heat_multiplier(self, tau: float) -> np.ndarray:
        if self._heat is not None and tau == self.tau:
            return self._heat
        return np.exp(self.symbol * tau)

    def check(self, A):
        A = np.asarray(A)
        if A.ndim < 2 or A.shape[0] != self.grid.N or A.shape[1] != self.grid.N:
            raise ShapeMismatch(f"field shape {A.shape} does not match an {self.grid.N}x{self.grid.N} grid")
        return A

    def forward(self, A) -> np.ndarray:
        return np.fft.fft2(self.check(A), axes=(0, 1))

    def inverse(self, Ahat, scale: float = 1.0) -> np.ndarray:
        """Real inverse transform; ``scale`` bounds the round-off the spectrum may carry."""
        out = np.fft.ifft2(Ahat, axes=(0, 1))
        scale = max(scale, float(np.max(np.abs(out.real), initial=0.0)))
        resid = float(np.max(np.abs(out.imag), initial=0.0))
        if resid > IMAG_TOL * scale:
            raise ArithmeticError(f"imaginary residue {resid:.3e} after inverse transform")
        return out.real

    def apply(self, A, multiplier) -> np.ndarray:
        """Multiply every component of ``A`` by a table over modes."""
        Ahat = self.forward(A)
        m = multiplier.reshape(multiplier.shape + (1,) * (Ahat.ndim - 2))
        # large multipliers (the Laplacian symbol) amplify transform round-off in high modes
        scale = float(np.max(np.abs(A), initial=0.0)) * float(np.max(np.abs(multiplier)))
        return self.inverse(Ahat * m, max(1.0, scale))


def heat_solve(A, tau: float, ws: SpectralWorkspace) -> np.ndarray:
    """Exact periodic heat flow of every component up to time ``tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    A = np.asarray(A, dtype=float)
    if tau == 0:
        return ws.check(A).copy()
    return ws.apply(A, ws.heat_multiplier(tau))


def laplacian(A, ws: SpectralWorkspace) -> np.ndarray:
    return ws.apply(np.asarray(A, dtype=float), ws.symbol)


def spectral_dirichlet(A, ws: SpectralWorkspace) -> float:
    """0.5 * integral of ||grad A||^2 from the Laplacian symbol (Parseval)."""
    Ahat = ws.forward(np.asarray(A, dtype=float))
    power = np.abs(Ahat) ** 2
    if power.ndim > 2:
        power = power.reshape(power.shape[:2] + (-1,)).sum(axis=-1)
    return float(0.5 * np.sum(-ws.symbol * power) / ws.grid.N ** 4)
