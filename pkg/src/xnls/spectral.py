"""Spectral primitives on the periodic box.

Conventions (fixed once, used everywhere):

* Modes are e^{i k.x} with k = 2*pi*n/L per axis in standard FFT ordering.
* ``fft_forward`` is orthonormal, so sum |u_j|^2 == sum |u_hat_n|^2 exactly
  and the physical L2 norm equals the spectral one under the same cell
  weight (discrete Parseval).
* The kinetic multiplier is exp(-i*eps*dt*|k|^2), i.e. the exact propagator
  of  i*eps*u_t = -eps^2*Lap(u); at eps = 1 this is exp(-i*dt*|k|^2).
* The Coulomb self-field multiplier is 4*pi/|k|^2 with zero mean, so the
  output approximates the free-space convolution (1/|x|) * rho.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as _fft

from .errors import ConfigError
from .grid import Grid

# Threads handed to scipy.fft; 1 keeps independent sweep runs from
# oversubscribing a small machine.  The CLI may raise it.
FFT_WORKERS = 1


def fft_forward(grid: Grid, f: np.ndarray) -> np.ndarray:
    f = grid.check_field(f)
    return _fft.fftn(f, norm="ortho", workers=FFT_WORKERS)

def fft_inverse(grid: Grid, f_hat: np.ndarray) -> np.ndarray:
    f_hat = grid.check_field(f_hat)
    return _fft.ifftn(f_hat, norm="ortho", workers=FFT_WORKERS)


def l2_norm(grid: Grid, f: np.ndarray) -> float:
    """Discrete L2 norm with quadrature weight prod(L_d/N_d)."""
    f = grid.check_field(f)
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(f) ** 2)))


def spectral_l2_norm(grid: Grid, f_hat: np.ndarray) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(np.abs(f_hat) ** 2)))


def apply_multiplier(grid: Grid, f: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    return fft_inverse(grid, fft_forward(grid, f) * multiplier)


def kinetic_propagate(grid: Grid, f: np.ndarray, dt: float) -> np.ndarray:
    if not np.isfinite(dt):
        raise ConfigError("time step must be finite")
    phase = np.exp(-1j * grid.epsilon * dt * grid.k_squared())
    return apply_multiplier(grid, f, phase)


def kinetic_decay(grid: Grid, f: np.ndarray, tau: float) -> np.ndarray:
    """Imaginary-time counterpart of ``kinetic_propagate``: exp(-eps*tau*|k|^2)."""
    return apply_multiplier(grid, f, np.exp(-grid.epsilon * tau * grid.k_squared()))


def hartree_potential(grid: Grid, rho: np.ndarray) -> np.ndarray:
    """Periodic-box approximation of (1/|x|) * rho via the 4*pi/|k|^2 multiplier.

    The zero mode is dropped (mean-zero convention); the omitted mean only
    contributes a global phase to the wave function.
    """
    if grid.dim != 3:
        raise ConfigError(f"Hartree solve requires a 3D grid, got dim={grid.dim}")
    rho = grid.check_field(rho)
    k2 = grid.k_squared()
    multiplier = np.zeros(grid.shape)
    np.divide(4.0 * np.pi, k2, out=multiplier, where=k2 > 0)
    rho_hat = _fft.fftn(rho, norm="ortho", workers=FFT_WORKERS)
    v = _fft.ifftn(rho_hat * multiplier, norm="ortho", workers=FFT_WORKERS)
    return v.real


def gaussian_mollify(grid: Grid, f: np.ndarray, eta: float) -> np.ndarray:
    """Convolve with the unit-mass Gaussian (2/eta)^{d/2} exp(-2*pi*|x|^2/eta).

    Its transform under the e^{i k.x} convention is exp(-eta*|k|^2/(8*pi)),
    applied as a spectral multiplier; kernel mass 1 means densities keep
    their integral.
    """
    if not eta > 0:
        raise ConfigError(f"mollification width must be positive, got {eta}")
    f = grid.check_field(f)
    multiplier = np.exp(-eta * grid.k_squared() / (8.0 * np.pi))
    out = apply_multiplier(grid, f, multiplier)
    if np.isrealobj(f):
        return out.real
    return out


def spectral_translate(grid: Grid, f: np.ndarray, shift) -> np.ndarray:
    """Sample f(. + shift) via the phase multiplier e^{i k.shift}."""
    f = grid.check_field(f)
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.shape != (grid.dim,):
        raise ConfigError(f"shift must have {grid.dim} components")
    if not np.all(np.isfinite(shift)):
        raise ConfigError("shift must be finite")
    if not np.any(shift):
        return np.array(f, copy=True)
    ks = grid.wavenumbers()
    phase = np.zeros(grid.shape)
    for d in range(grid.dim):
        phase = phase + ks[d] * shift[d]
    out = apply_multiplier(grid, f, np.exp(1j * phase))
    if np.isrealobj(f):
        return out.real
    return out


def gauge_transform(grid: Grid, psi: np.ndarray, b, phase_integral: float) -> np.ndarray:
    """Map the lab-frame wave function to the oscillation frame.

    u(x) = psi(x + b) * exp(i*phase_integral/eps), where b = 2*Int_0^t A(s) ds
    and phase_integral = Int_0^t |A(s)|^2 ds are supplied by the caller.
    """
    u = spectral_translate(grid, psi, b)
    return u * np.exp(1j * phase_integral / grid.epsilon)


def gauge_inverse(grid: Grid, u: np.ndarray, b, phase_integral: float) -> np.ndarray:
    psi = u * np.exp(-1j * phase_integral / grid.epsilon)
    return spectral_translate(grid, psi, -np.asarray(b, dtype=float))
