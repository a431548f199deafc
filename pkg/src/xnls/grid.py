"""Periodic computational box: sample points, wavenumbers, quadrature weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Grid:
    """Rectangular periodic box sampled on a uniform tensor grid.

    Axis d covers [-L_d/2, L_d/2) with N_d points x_j = -L_d/2 + j*L_d/N_d
    (right endpoint excluded).  ``epsilon`` is the semiclassical parameter
    carried by every propagation step built on this grid.
    """

    lengths: tuple[float, ...]
    counts: tuple[int, ...]
    epsilon: float = 1.0

    def __post_init__(self):
        if not isinstance(self.lengths, tuple):
            object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if not isinstance(self.counts, tuple):
            object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        if len(self.lengths) != len(self.counts):
            raise ConfigError("lengths and counts must have the same number of axes")
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        for L in self.lengths:
            if not (L > 0 and math.isfinite(L)):
                raise ConfigError(f"box length must be positive and finite, got {L}")
        for N in self.counts:
            if N < 4 or N % 2 != 0:
                raise ConfigError(f"point count must be even and >= 4, got {N}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def cubic(cls, n: int, length: float, dim: int = 3, epsilon: float = 1.0) -> "Grid":
        return cls(lengths=(float(length),) * dim, counts=(int(n),) * dim, epsilon=epsilon)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.lengths, self.counts))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def axis_points(self, d: int) -> np.ndarray:
        L, N = self.lengths[d], self.counts[d]
        return -L / 2 + np.arange(N) * (L / N)

    def axis_wavenumbers(self, d: int) -> np.ndarray:
        L, N = self.lengths[d], self.counts[d]
        return 2.0 * np.pi * np.fft.fftfreq(N, d=L / N)

    def coordinates(self):
        """Sparse meshgrid of sample coordinates, broadcastable to ``shape``."""
        return np.meshgrid(*[self.axis_points(d) for d in range(self.dim)],
                           indexing="ij", sparse=True)

    def wavenumbers(self):
        """Sparse meshgrid of wavenumbers, broadcastable to ``shape``."""
        return np.meshgrid(*[self.axis_wavenumbers(d) for d in range(self.dim)],
                           indexing="ij", sparse=True)

    def k_squared(self) -> np.ndarray:
        return _k_squared(self)

    def radius_squared(self, center=None) -> np.ndarray:
        """|x - center|^2 at every sample point (no periodic wrapping)."""
        if center is None:
            center = (0.0,) * self.dim
        coords = self.coordinates()
        out = np.zeros(self.shape)
        for d in range(self.dim):
            out = out + (coords[d] - center[d]) ** 2
        return out

    def default_mollification(self) -> float:
        """Default Gaussian-smoothing width: largest grid spacing squared."""
        return max(self.spacing) ** 2

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ConfigError(f"field shape {f.shape} does not match grid {self.shape}")
        return f


@lru_cache(maxsize=64)
def _k_squared(grid: Grid) -> np.ndarray:
    ks = grid.wavenumbers()
    out = np.zeros(grid.shape)
    for k in ks:
        out = out + k * k
    out.setflags(write=False)
    return out
