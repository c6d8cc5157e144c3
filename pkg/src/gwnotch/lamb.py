"""Rayleigh-Lamb dispersion roots for a free isotropic plate.

Used as an independent check of the cross-section discretization.  The
characteristic functions are written with ``sin(x)/x`` factors so they stay
real-valued on both sides of the bulk-wave lines.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

__all__ = ["rayleigh_lamb", "lamb_wavenumbers"]


def _sc(arg2, h):
    # cos(a h) and sin(a h)/a for a = sqrt(arg2), real for either sign of arg2
    a = np.sqrt(arg2 + 0j)
    c = np.cos(a * h).real
    s = np.where(np.abs(a) > 0, np.sin(a * h) / np.where(np.abs(a) > 0, a, 1.0), h).real
    return c, s


def rayleigh_lamb(k, omega, cl, cs, half_thickness, family):
    """Characteristic function whose real roots in ``k`` are Lamb wavenumbers.

    ``family`` is ``"S"`` (symmetric) or ``"A"`` (antisymmetric).
    """
    k = np.asarray(k, float)
    p2 = (omega / cl) ** 2 - k**2
    q2 = (omega / cs) ** 2 - k**2
    h = half_thickness
    cp, sp = _sc(p2, h)
    cq, sq = _sc(q2, h)
    if family == "S":
        return (k**2 - q2) ** 2 * cp * sq + 4 * k**2 * p2 * sp * cq
    if family == "A":
        return (k**2 - q2) ** 2 * sp * cq + 4 * k**2 * q2 * cp * sq
    raise ValueError(f"family must be 'S' or 'A', got {family!r}")


def lamb_wavenumbers(frequency_hz, cl, cs, thickness, family, n_grid=4000):
    """Positive real wavenumbers of one family, sorted descending."""
    omega = 2 * np.pi * frequency_hz
    # A0 is slower than both the Rayleigh speed and, at low frequency, the thin-plate flexural wave
    nu = (cl**2 - 2 * cs**2) / (2 * (cl**2 - cs**2))
    k_flex = (12 * (1 - nu) * omega**2 / (2 * cs**2 * thickness**2)) ** 0.25
    kmax = 1.5 * max(omega / (0.85 * cs), k_flex)
    ks = np.linspace(kmax * 1e-6, kmax, n_grid)
    f = rayleigh_lamb(ks, omega, cl, cs, thickness / 2, family)
    # normalize to keep brentq well scaled
    g = lambda k: rayleigh_lamb(k, omega, cl, cs, thickness / 2, family) / (1 + k**4)
    roots = []
    for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
        r = brentq(g, ks[i], ks[i + 1], xtol=1e-12 * kmax)
        # skip spurious roots at k = omega/cs or omega/cl where both factors vanish
        if min(abs(r - omega / cs), abs(r - omega / cl)) > 1e-6 * kmax:
            roots.append(r)
    return np.sort(np.array(roots))[::-1]
