"""Time grids, the exponential-window Laplace transform pair and envelopes.

All arrays carry time on the last axis.  Measurement arrays use the axis
order ``(component, x, y, time)`` with component 0 the in-plane (x) and
component 1 the out-of-plane (z) velocity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from . import dual as ad

__all__ = [
    "TimeGrid",
    "FrequencyGrid",
    "ExcitationConfig",
    "excitation_signal",
    "dlt",
    "idlt",
    "analytic_signal",
    "envelope_t",
    "mean_y",
    "nrm",
    "vec_env",
    "unvec",
    "DegenerateMeasurementError",
]


class DegenerateMeasurementError(ValueError):
    """Raised when a measurement array carries no signal at all."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling ``t_j = t0 + j * dt`` for ``j = 0 .. n_samples - 1``."""

    n_samples: int = 782
    dt: float = 0.2e-6
    t0: float = 0.0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def domega(self) -> float:
        """Angular frequency step of the discrete transform."""
        return 2 * np.pi / (self.n_samples * self.dt)

    @property
    def df(self) -> float:
        return 1.0 / (self.n_samples * self.dt)

    @property
    def zeta(self) -> float:
        """Default exponential-window factor, half the frequency step."""
        return 0.5 * self.domega

    def frequency_grid(self, band=(10e3, 1.5e6), zeta: float | None = None) -> "FrequencyGrid":
        zeta = self.zeta if zeta is None else zeta
        omegas = self.domega * np.arange(self.n_samples) - 1j * zeta
        return FrequencyGrid(omegas=omegas, zeta=zeta, band=tuple(band), df=self.df)


@dataclass(frozen=True)
class FrequencyGrid:
    """Complex angular frequencies ``l * domega - i * zeta`` of every transform bin."""

    omegas: np.ndarray
    zeta: float
    band: tuple = (10e3, 1.5e6)
    df: float = 0.0

    def __post_init__(self):
        im = np.imag(self.omegas)
        if not np.allclose(im, -self.zeta, rtol=0, atol=1e-12 * max(self.zeta, 1.0)):
            raise ValueError("every frequency must have imaginary part -zeta")

    def __len__(self):
        return len(self.omegas)

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.real(self.omegas) / (2 * np.pi)

    def band_indices(self) -> np.ndarray:
        """Bins whose real frequency lies inside ``band`` (up to Nyquist)."""
        f = self.frequencies_hz
        n = len(f)
        lo, hi = self.band
        idx = np.flatnonzero((f >= lo) & (f <= hi) & (np.arange(n) <= n // 2))
        if idx.size == 0:
            raise ValueError(f"no transform bin inside band {self.band}")
        return idx


@dataclass(frozen=True)
class ExcitationConfig:
    """Sinusoidal Gaussian pulse parameters."""

    f_c: float = 500e3
    t_shift: float = 10e-6

    def __post_init__(self):
        if not (self.f_c > 0 and self.t_shift > 0):
            raise ValueError("f_c and t_shift must be positive")


def excitation_signal(grid: TimeGrid, cfg: ExcitationConfig = ExcitationConfig()) -> np.ndarray:
    """Sample ``sin(2 pi f_c t) exp(-0.5 (t - t_shift)^2 f_c^2)`` on the grid."""
    t = grid.times
    return np.sin(2 * np.pi * cfg.f_c * t) * np.exp(-0.5 * (t - cfg.t_shift) ** 2 * cfg.f_c**2)


def dlt(x, grid: TimeGrid, zeta: float | None = None):
    """Discrete Laplace transform: FFT of the exponentially damped signal.

    Works on ndarrays and on :class:`~gwnotch.dual.Dual` arrays.  The
    result is extended-precision complex: undoing the window multiplies
    rounding errors by ``exp(zeta * T)``, which float64 cannot absorb for
    ``zeta`` of a few frequency steps.
    """
    zeta = grid.zeta if zeta is None else zeta
    w = np.exp(-zeta * _times_ext(grid))
    return ad.apply_linear(lambda a: np.fft.fft(a * w, axis=-1), x)


def idlt(X, grid: TimeGrid, zeta: float | None = None):
    """Inverse of :func:`dlt`: inverse FFT, then undo the exponential damping (extended precision)."""
    zeta = grid.zeta if zeta is None else zeta
    w = np.exp(zeta * _times_ext(grid))
    return ad.apply_linear(lambda a: np.fft.ifft(a, axis=-1) * w, X)


def _times_ext(grid: TimeGrid) -> np.ndarray:
    return np.longdouble(grid.t0) + np.longdouble(grid.dt) * np.arange(grid.n_samples, dtype=np.longdouble)


def analytic_signal(x):
    """Analytic signal along the time axis via the FFT Hilbert transform."""
    return ad.apply_linear(lambda a: scipy.signal.hilbert(a, axis=-1), x)


def envelope_t(x):
    """Envelope ``|x + i H[x]|`` per time trace.

    For Dual input the derivative is ``Re(conj(a) a') / |a|``; it is set to
    zero where the analytic signal nearly vanishes (below ``1e-14`` of its
    maximum), where the modulus is not differentiable.
    """
    a = analytic_signal(x)
    if isinstance(a, ad.Dual):
        floor = 1e-14 * float(np.max(np.abs(a.val))) if a.val.size else 0.0
        return ad.absolute(a, floor=floor)
    return np.abs(a)


def mean_y(V: np.ndarray) -> np.ndarray:
    """Average a ``(2, nx, ny, nt)`` array over its y axis, keeping the axis."""
    V = np.asarray(V)
    if V.ndim != 4 or V.shape[2] < 1:
        raise ValueError(f"expected shape (2, nx, ny>=1, nt), got {V.shape}")
    return V.mean(axis=2, keepdims=True)


def nrm(A):
    """Scale ``A`` so that its largest envelope value is one."""
    peak = float(np.max(ad.value(envelope_t(ad.value(A)))))
    if not np.isfinite(peak) or peak == 0.0:
        raise DegenerateMeasurementError("array has zero envelope; nothing to normalize")
    return A / peak


def vec_env(V):
    """Envelope over time, flattened in (component, x, [y,] time) row-major order."""
    e = envelope_t(V)
    return e.reshape(-1)


def unvec(y, shape):
    """Inverse of the flattening in :func:`vec_env`."""
    return y.reshape(shape)
