"""Star-convex polygon super-elements with continued-fraction dynamic stiffness.

The boundary stiffness ``S(chi)`` of a bounded polygon satisfies

    2 chi S' + (S - E1) E0^{-1} (S - E1^T) - E2 - chi M0 = 0,   chi = -omega^2

(``'`` is d/d chi).  It is expanded as a matrix continued fraction

    S^(m) = Y0^(m) + chi Y1^(m) - chi^2 s_{m+1}^2 (S^(m+1))^{-1}

whose coefficients follow from one algebraic Riccati equation (the static
stiffness) and a chain of Lyapunov equations.  Every level obeys

    Y B Y - (C^T Y + Y C) + 2 chi Y' - chi (Y D + D^T Y) + H0 + chi H1 + chi^2 G = 0

with level-specific ``B, C, D, G, H0, H1``.  Everything is computed in
units scaled by the shear modulus and a characteristic length, and carried
as :class:`~gwnotch.dual.Dual` so derivatives with respect to the notch
parameters come along.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import dual as ad
from .geometry import ElementMatrices, Material

__all__ = [
    "RiccatiError",
    "ResonanceError",
    "ContinuedFractionData",
    "rigid_body_modes",
    "riccati_static_stiffness",
    "continued_fraction_setup",
    "polygon_stiffness",
    "polygon_stiffness_batch",
]


class RiccatiError(RuntimeError):
    """The static eigenproblem has no clean stable/unstable splitting."""


class ResonanceError(RuntimeError):
    """A continued-fraction level is singular at the requested frequency."""


def rigid_body_modes(x, z) -> np.ndarray:
    """Two translations and the linearized rotation about the mesh origin."""
    x, z = ad.value(x), ad.value(z)
    n = len(x)
    T = np.zeros((2 * n, 3))
    T[0::2, 0] = 1.0
    T[1::2, 1] = 1.0
    T[0::2, 2] = -z
    T[1::2, 2] = x
    return T


def _translations(n_dof: int) -> np.ndarray:
    T = np.zeros((n_dof, 2))
    T[0::2, 0] = 1.0
    T[1::2, 1] = 1.0
    return T / np.sqrt(n_dof / 2)


def riccati_static_stiffness(E0, E1, E2, tol: float = 1e-6):
    """Static boundary stiffness from ``(S - E1) E0^{-1} (S - E1^T) - E2 = 0``.

    The value comes from the invariant subspace of the 2n x 2n matrix

        Z = [[-E0^{-1} E1^T,             E0^{-1}      ],
             [E2 - E1 E0^{-1} E1^T,      E1 E0^{-1}   ]]

    belonging to eigenvalues with positive real part (``n - 2`` of them),
    completed by the two rigid translations that carry no boundary force.
    The rigid-body eigenvalues form Jordan blocks at zero, so the split is
    checked by count rather than by a threshold.

    Derivatives solve the linearized equation ``dS A + A^T dS = Q`` with
    ``A = E0^{-1}(S - E1^T)`` on the orthogonal complement of the
    translations, where it is nonsingular.
    """
    E0, E1, E2 = (ad.lift(m) for m in (E0, E1, E2))
    nd = ad._nd_of(E0, E1, E2)
    E0, E1, E2 = (m if m.nd == nd else ad.Dual(m.val, nd=nd) for m in (E0, E1, E2))
    n = E0.shape[0]
    c = float(np.max(np.abs(E0.val)))  # balance the Hamiltonian blocks
    e0, e1, e2 = E0.val / c, E1.val / c, E2.val / c
    lu = sla.lu_factor(e0)
    b_e1t = sla.lu_solve(lu, e1.T)
    Z = np.block([[-b_e1t, sla.inv(e0)], [e2 - e1 @ b_e1t, sla.lu_solve(lu, e1.T).T]])
    scale = np.max(np.abs(sla.eigvals(Z)))
    _, V, sdim = sla.schur(Z, output="real", sort=lambda re, im: re > tol * max(scale, 1.0))
    if sdim != n - 2:
        raise RiccatiError(f"expected {n - 2} stable eigenvalues, found {sdim}")
    T = _translations(n)
    Phi = np.hstack([V[:, :sdim], np.vstack([T, np.zeros_like(T)])])
    S0 = sla.solve(Phi[:n].T, Phi[n:].T).T
    S0 = c * 0.5 * (S0 + S0.T)
    e0, e1 = E0.val, E1.val
    lu = sla.lu_factor(e0)
    if nd == 0:
        return ad.Dual(S0)
    A = sla.lu_solve(lu, S0 - e1.T)
    U = sla.null_space(T.T)
    At = U.T @ A @ U
    dS = np.empty((nd, n, n))
    for k in range(nd):
        Q = E1.der[k] @ A + A.T @ E1.der[k].T + A.T @ E0.der[k] @ A + E2.der[k]
        Y = sla.solve_continuous_lyapunov(At.T, U.T @ Q @ U)
        Y = 0.5 * (Y + Y.T)
        dS[k] = U @ Y @ U.T
    return ad.Dual(S0, dS)


@dataclass
class ContinuedFractionData:
    """Coefficients of the continued fraction (scaled units).

    ``S0_terms[m]``/``S1_terms[m]`` are ``Y0^(m)``/``Y1^(m)`` for
    ``m = 0..M``; ``X_terms[m-1]`` is the scalar ``s_m`` of the
    preconditioner ``X^(m) = s_m I`` for ``m = 1..M``.  Physical stiffness
    is ``mu * S^(0)(chi_scaled)`` with ``chi_scaled = chi * r0^2 * rho / mu``.
    """

    S0_terms: list
    S1_terms: list
    X_terms: list
    mu: float
    rho: float
    r0: float

    @property
    def order(self) -> int:
        return len(self.X_terms)

    def scaled_chi(self, omega):
        return -(omega**2) * self.r0**2 * self.rho / self.mu


def _sym(Y):
    return 0.5 * (Y + Y.T)


def continued_fraction_setup(mats: ElementMatrices, material: Material, order: int = 6, r0: float | None = None, x=None, z=None):
    """Coefficients of an order-``M`` continued fraction for one polygon.

    Parameters
    ----------
    mats : ElementMatrices
        Polygon coefficient matrices (Dual or plain).
    order : int
        Number of levels ``M >= 1``.
    r0 : float, optional
        Length scale; defaults to the largest node distance from the
        scaling centre (``x``, ``z`` required then).
    """
    if order < 1:
        raise ValueError("continued fraction order must be at least 1")
    if r0 is None:
        if x is None or z is None:
            raise ValueError("need r0 or the node coordinates")
        r0 = float(np.max(np.hypot(ad.value(x), ad.value(z))))
    mu, rho = material.mu, material.rho
    E0, E1, E2, M0 = (ad.lift(m) for m in (mats.E0, mats.E1, mats.E2, mats.M0))
    E0, E1, E2 = E0 / mu, E1 / mu, E2 / mu
    Mb = M0 / (rho * r0**2)
    n = E0.shape[0]
    eye = np.eye(n)

    B = _sym(ad.inv(E0))
    C = B @ E1.T
    Y0 = riccati_static_stiffness(E0, E1, E2)
    D = None
    G = None
    H1 = -Mb
    s0_terms, s1_terms, x_terms = [], [], []
    for m in range(order + 1):
        C1 = B @ Y0 - C + eye
        rhs = -H1 if D is None else Y0 @ D + D.T @ Y0 - H1
        Y1 = _sym(ad.lyap(C1.T, rhs))
        s0_terms.append(Y0)
        s1_terms.append(Y1)
        if m == order:
            break
        K = Y1 @ B @ Y1
        if D is not None:
            K = K - (Y1 @ D + D.T @ Y1)
        if G is not None:
            K = K + G
        C2 = B @ Y0 - C + 2 * eye
        Dt = B @ Y1 if D is None else B @ Y1 - D
        Zb = _sym(ad.lyap(C2.T, _sym(K)))
        Zinv = _sym(ad.inv(Zb))
        s2 = 1.0 / np.linalg.norm(Zinv.val, 2)
        x_terms.append(np.sqrt(s2))
        # next level
        G = B * s2
        B = _sym(K / s2)
        C = C2.T
        D = Dt.T
        H1 = ad.Dual(np.zeros((n, n)), nd=Y0.nd)
        Y0 = Zinv * s2
    return ContinuedFractionData(s0_terms, s1_terms, x_terms, mu=mu, rho=rho, r0=r0)


def polygon_stiffness(cf: ContinuedFractionData, omega, scaled: bool = False):
    """Boundary dynamic stiffness at the (complex) angular frequency ``omega``.

    Evaluated bottom-up, one linear solve per level.  Returns a Dual with
    the physical stiffness (or the scaled one if ``scaled``).
    """
    chi = cf.scaled_chi(omega)
    M = cf.order
    S = cf.S0_terms[M] + cf.S1_terms[M] * chi
    for m in range(M - 1, -1, -1):
        s2 = cf.X_terms[m] ** 2
        try:
            inv = ad.inv(S)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ResonanceError(f"level {m + 1} singular at omega={omega}") from exc
        if not np.all(np.isfinite(inv.val)):
            raise ResonanceError(f"level {m + 1} singular at omega={omega}")
        S = cf.S0_terms[m] + cf.S1_terms[m] * chi - inv * (chi**2 * s2)
    return S if scaled else S * cf.mu


def polygon_stiffness_batch(cf: ContinuedFractionData, omegas):
    """:func:`polygon_stiffness` at many frequencies; Dual of shape ``(n_freq, n, n)``."""
    chi = cf.scaled_chi(np.asarray(omegas))[:, None, None]
    M = cf.order
    S = cf.S1_terms[M] * chi + cf.S0_terms[M]
    for m in range(M - 1, -1, -1):
        s2 = cf.X_terms[m] ** 2
        inv = ad.binv(S)
        if not np.all(np.isfinite(inv.val)):
            raise ResonanceError(f"level {m + 1} singular in the frequency batch")
        S = cf.S1_terms[m] * chi + cf.S0_terms[m] - inv * (chi**2 * s2)
    return S * cf.mu
