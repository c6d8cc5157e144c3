"""Prismatic waveguide super-elements and dispersion curves.

A waveguide segment of length ``L`` is represented through the
wavenumbers and mode shapes of its cross-section.  With time dependence
``exp(i omega t)`` the displacement field is a sum of ``Psi exp(i k x)``
terms; modes with ``Im k > 0`` decay away from the left end and are called
left modes, the others right modes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import dual as ad
from .geometry import BoundaryMesh1D, ElementMatrices, Material, element_matrices

__all__ = [
    "Modes",
    "ModeSplitError",
    "section_matrices",
    "solve_modes",
    "waveguide_stiffness",
    "ModalStack",
    "waveguide_stiffness_batch",
    "DispersionPoint",
    "dispersion_curves",
    "cutoff_frequencies",
    "write_dispersion_csv",
]


class ModeSplitError(RuntimeError):
    """Left and right mode counts differ (a wavenumber sits on the real axis)."""


@dataclass
class Modes:
    """Wavenumbers and unit-norm displacement shapes of one cross-section."""

    k: np.ndarray
    psi: np.ndarray
    omega: complex

    @property
    def left(self) -> np.ndarray:
        return np.imag(self.k) > 0

    def split(self):
        """``(k_l, psi_l, k_r, psi_r)`` with equal counts."""
        m = self.left
        if m.sum() * 2 != len(self.k):
            raise ModeSplitError(f"{m.sum()} left modes out of {len(self.k)} at omega={self.omega}")
        return self.k[m], self.psi[:, m], self.k[~m], self.psi[:, ~m]


def section_matrices(section: BoundaryMesh1D, material: Material) -> tuple:
    """Plain-array coefficient matrices of a through-thickness line."""
    return element_matrices(section, material, "waveguide").values()


def solve_modes(mats, omega: complex) -> Modes:
    """All ``2n`` wavenumbers of the cross-section at angular frequency ``omega``.

    Solves ``E0 lam^2 + (E1^T - E1) lam - E2 + omega^2 M0 = 0`` for
    ``lam = i k`` through the first companion linearization.
    """
    E0, E1, E2, M0 = mats[:4] if not isinstance(mats, ElementMatrices) else mats.values()
    n = E0.shape[0]
    lu = sla.lu_factor(E0)
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -sla.lu_solve(lu, -E2 + omega**2 * M0)
    A[n:, n:] = -sla.lu_solve(lu, E1.T - E1)
    lam, vec = sla.eig(A, check_finite=False)
    psi = vec[:n]
    psi = psi / np.linalg.norm(psi, axis=0)
    return Modes(k=-1j * lam, psi=psi, omega=omega)


def waveguide_stiffness(mats, modes: Modes, length):
    """Dynamic stiffness of a segment, dofs ordered (left section, right section).

    ``length`` may be a Dual; the derivative follows from
    ``dS/dL = (dF - S dD) D^{-1}``.

    Returns
    -------
    S : Dual
        Complex symmetric ``2n x 2n`` matrix.
    """
    E0, E1 = mats[0], mats[1]
    kl, pl, kr, pr = modes.split()
    L = ad.lift(length)
    Lv = float(L.val)
    el = np.exp(1j * kl * Lv)
    er = np.exp(-1j * kr * Lv)
    ql = E0 @ pl * (1j * kl) + E1.T @ pl
    qr = E0 @ pr * (1j * kr) + E1.T @ pr
    D = np.block([[pl, pr * er], [pl * el, pr]])
    F = np.block([[-ql, -qr * er], [ql * el, qr]])
    lu = sla.lu_factor(D.T)
    S = sla.lu_solve(lu, F.T).T  # F D^{-1}
    if L.nd == 0:
        return ad.Dual(S)
    zl = np.zeros_like(pl)
    zr = np.zeros_like(pr)
    dD = np.block([[zl, pr * (-1j * kr * er)], [pl * (1j * kl * el), zr]])
    dF = np.block([[zl, -qr * (-1j * kr * er)], [ql * (1j * kl * el), zr]])
    dS = sla.lu_solve(lu, (dF - S @ dD).T).T
    return ad.Dual(S, dS[None] * L.der[:, None, None])


@dataclass(frozen=True)
class DispersionPoint:
    frequency_hz: float
    mode_label: str
    wavelength_m: float
    re_k: float
    im_k: float


def _parity(section: BoundaryMesh1D, psi: np.ndarray) -> np.ndarray:
    """+1 for symmetric, -1 for antisymmetric modes about the mid-plane."""
    z = ad.value(section.z)
    order = np.argsort(z)
    mirror = order[::-1]
    ux, uz = psi[0::2], psi[1::2]
    num = np.sum(ux[order] * np.conj(ux[mirror]), axis=0) - np.sum(uz[order] * np.conj(uz[mirror]), axis=0)
    den = np.sum(np.abs(psi) ** 2, axis=0)
    return np.real(num) / den


def dispersion_curves(section: BoundaryMesh1D, material: Material, frequencies, thickness: float | None = None):
    """Propagating Lamb modes of the cross-section at real frequencies.

    A mode is propagating when ``|Im k| * thickness < 0.01``.  Modes are
    labelled ``A<j>`` or ``S<j>`` by parity, ``j`` counting from the largest
    real wavenumber within each family.
    """
    z = ad.value(section.z)
    thickness = z.max() - z.min() if thickness is None else thickness
    mats = section_matrices(section, material)
    rows = []
    for f in np.atleast_1d(frequencies):
        modes = solve_modes(mats, 2 * np.pi * f)
        k = modes.k
        keep = (np.abs(k.imag) * thickness < 0.01) & (k.real > 0)
        par = _parity(section, modes.psi[:, keep])
        kk = k[keep]
        for fam, sign in (("A", -1), ("S", 1)):
            sel = np.flatnonzero(np.sign(par) == sign)
            sel = sel[np.argsort(-kk[sel].real)]
            for j, i in enumerate(sel):
                rows.append(DispersionPoint(float(f), f"{fam}{j}", 2 * np.pi / kk[i].real, kk[i].real, kk[i].imag))
    return rows


def cutoff_frequencies(section: BoundaryMesh1D, material: Material) -> np.ndarray:
    """Frequencies (Hz) at which a mode has ``k = 0``: ``E2 u = omega^2 M0 u``."""
    _, _, E2, M0 = section_matrices(section, material)
    w2 = sla.eigh(E2, M0, eigvals_only=True)
    return np.sqrt(np.clip(w2, 0, None)) / (2 * np.pi)


def write_dispersion_csv(rows, path) -> None:
    fields = ["frequency_hz", "mode_label", "wavelength_m", "re_k", "im_k"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(getattr(r, f)) if isinstance(getattr(r, f), float) else getattr(r, f) for f in fields])


@dataclass
class ModalStack:
    """Left/right modal data of one cross-section at several frequencies."""

    kl: np.ndarray
    kr: np.ndarray
    pl: np.ndarray
    pr: np.ndarray
    ql: np.ndarray
    qr: np.ndarray

    @classmethod
    def from_modes(cls, mats, modes_list) -> "ModalStack":
        E0, E1 = mats[0], mats[1]
        parts = [m.split() for m in modes_list]
        kl = np.stack([p[0] for p in parts])
        pl = np.stack([p[1] for p in parts])
        kr = np.stack([p[2] for p in parts])
        pr = np.stack([p[3] for p in parts])
        ql = E0 @ pl * (1j * kl[:, None, :]) + E1.T @ pl
        qr = E0 @ pr * (1j * kr[:, None, :]) + E1.T @ pr
        return cls(kl, kr, pl, pr, ql, qr)

    def slice(self, sl) -> "ModalStack":
        return ModalStack(self.kl[sl], self.kr[sl], self.pl[sl], self.pr[sl], self.ql[sl], self.qr[sl])


def waveguide_stiffness_batch(stack: ModalStack, length):
    """:func:`waveguide_stiffness` for all frequencies of a :class:`ModalStack`.

    Returns a Dual of shape ``(n_freq, 2n, 2n)``.
    """
    L = ad.lift(length)
    Lv = float(L.val)
    el = np.exp(1j * stack.kl * Lv)[:, None, :]
    er = np.exp(-1j * stack.kr * Lv)[:, None, :]
    pl, pr, ql, qr = stack.pl, stack.pr, stack.ql, stack.qr
    D = np.block([[pl, pr * er], [pl * el, pr]])
    F = np.block([[-ql, -qr * er], [ql * el, qr]])
    Dt = np.swapaxes(D, -1, -2)
    S = np.swapaxes(np.linalg.solve(Dt, np.swapaxes(F, -1, -2)), -1, -2)
    if L.nd == 0:
        return ad.Dual(S)
    zl, zr = np.zeros_like(pl), np.zeros_like(pr)
    dl = 1j * stack.kl[:, None, :] * el
    dr = -1j * stack.kr[:, None, :] * er
    dD = np.block([[zl, pr * dr], [pl * dl, zr]])
    dF = np.block([[zl, -qr * dr], [ql * dl, zr]])
    dS = np.swapaxes(np.linalg.solve(Dt, np.swapaxes(dF - S @ dD, -1, -2)), -1, -2)
    return ad.Dual(S, dS[None] * L.der[:, None, None, None])
