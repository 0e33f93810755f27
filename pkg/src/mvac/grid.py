"""Uniform periodic grid on the unit torus [-1/2, 1/2)^2.

Arrays indexed ``[i, j]`` put ``i`` along x1 and ``j`` along x2, so the point
``(i, j)`` sits at ``(-1/2 + i*h, -1/2 + j*h)``.  Matrix fields are stored as
arrays of shape ``(N, N, n, n)``; C order makes the flat layout row-major in
points and row-major within each matrix.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class Grid:
    points_per_side: int

    def __post_init__(self):
        if int(self.points_per_side) != self.points_per_side or self.points_per_side < 1:
            raise ValueError(f"points_per_side must be a positive integer, got {self.points_per_side!r}")

    @property
    def N(self) -> int:
        return self.points_per_side

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_side

    h = spacing

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D coordinates -1/2 + i*h, i = 0..N-1."""
        return -0.5 + np.arange(self.N) * self.spacing

    @cached_property
    def coords(self):
        """Tuple ``(X1, X2)`` of shape ``(N, N)`` arrays."""
        x1, x2 = np.meshgrid(self.axis, self.axis, indexing="ij")
        x1.flags.writeable = False
        x2.flags.writeable = False
        return x1, x2

    @cached_property
    def wavenumbers(self):
        """Integer mode numbers ``(K1, K2)`` in FFT order, shape ``(N, N)``."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        return k1, k2

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """-4 pi^2 (k1^2 + k2^2) for every mode."""
        k1, k2 = self.wavenumbers
        return -4.0 * np.pi ** 2 * (k1 ** 2 + k2 ** 2)

    def wrap_index(self, i):
        return np.mod(i, self.N)

    def wrap_point(self, x):
        """Map coordinates into [-1/2, 1/2)."""
        return np.mod(np.asarray(x, dtype=float) + 0.5, 1.0) - 0.5

    def check_field(self, A, n=None):
        A = np.asarray(A)
        if A.ndim != 4 or A.shape[0] != self.N or A.shape[1] != self.N or A.shape[2] != A.shape[3]:
            raise ShapeMismatch(f"expected field of shape ({self.N}, {self.N}, n, n), got {A.shape}")
        if n is not None and A.shape[2] != n:
            raise ShapeMismatch(f"expected n = {n}, got n = {A.shape[2]}")
        return A


def grid_of(A) -> Grid:
    """Grid implied by the leading two axes of a field array."""
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"not a square grid field: shape {A.shape}")
    return Grid(A.shape[0])
