"""Global dynamic stiffness, sensor tractions and per-frequency solves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual as ad
from .geometry import Material, PlateMesh, element_matrices, gauss_lobatto_basis
from .polygon import continued_fraction_setup, polygon_stiffness
from .waveguide import section_matrices, solve_modes, waveguide_stiffness

__all__ = [
    "TractionSpec",
    "PlateModel",
    "assemble_tractions",
    "assemble_stiffness",
    "solve_frequency",
    "extract_velocities",
]


@dataclass(frozen=True)
class TractionSpec:
    """Unit tractions on the sensor span: tangential and inward normal."""

    tau1: tuple = (1.0, 0.0)
    tau2: tuple = (0.0, -1.0)


def assemble_tractions(mesh: PlateMesh, spec: TractionSpec = TractionSpec()) -> np.ndarray:
    """Consistent nodal loads of both tractions over the sensor span, ``(n_dof, 2)``."""
    pg = mesh.polygons[mesh.sensor_polygon]
    bm = pg.mesh
    x, z = ad.value(bm.x), ad.value(bm.z)
    _, _, qw, N, dN = gauss_lobatto_basis(bm.p, bm.p + 2)
    F = np.zeros((mesh.n_dof, 2))
    tau = np.array([spec.tau1, spec.tau2], float).T  # (component, case)
    for e in mesh.sensor_elements:
        el = bm.elements[e]
        ds = np.hypot(dN @ x[el], dN @ z[el])
        if np.ptp(z[el]) > 1e-12 * np.ptp(x[el]):
            raise ValueError("loaded elements must lie on the top surface")
        nodal = (qw * ds) @ N  # integral of each shape function
        ids = bm.node_ids[el]
        for c in range(2):
            F[2 * ids + c] += nodal[:, None] * tau[c]
    return F


class PlateModel:
    """Frequency-independent data of one mesh: section matrices and polygon fractions.

    Parameters
    ----------
    mesh : PlateMesh
    material : Material
    order : int, optional
        Continued-fraction order; defaults to the polynomial degree.
    """

    def __init__(self, mesh: PlateMesh, material: Material = Material(), order: int | None = None, n_quad=None):
        self.mesh = mesh
        self.material = material
        self.order = mesh.p if order is None else order
        self.section_mats = section_matrices(mesh.section, material)
        self.cf = []
        for pg in mesh.polygons:
            em = element_matrices(pg.mesh, material, "polygon", n_quad=n_quad)
            if not pg.q_dependent:
                em = em.drop()
            self.cf.append(continued_fraction_setup(em, material, self.order, x=pg.mesh.x, z=pg.mesh.z))
        self.F = assemble_tractions(mesh)
        self.nd = mesh.q.nd

    def modes(self, omega):
        return solve_modes(self.section_mats, omega)

    def element_stiffnesses(self, omega, modes=None, which=None):
        """Yield ``(dofs, S_e)`` for the selected super-elements.

        ``which`` filters on ``q_dependent`` (``True``/``False``) or ``None`` for all.
        """
        modes = self.modes(omega) if modes is None else modes
        for w in self.mesh.waveguides:
            if which is None or w.q_dependent == which:
                yield w.dofs(), waveguide_stiffness(self.section_mats, modes, w.length)
        for pg, cf in zip(self.mesh.polygons, self.cf):
            if which is None or pg.q_dependent == which:
                yield pg.dofs(), polygon_stiffness(cf, omega)

    def stiffness(self, omega, modes=None):
        return assemble_stiffness(self, omega, modes)


def _scatter(parts, index_of, n, nd, batch=None):
    """Sum element matrices into an ``n x n`` (optionally stacked) Dual."""
    lead = () if batch is None else (batch,)
    S = np.zeros(lead + (n, n), complex)
    dS = np.zeros((nd,) + lead + (n, n), complex)
    for dofs, Se in parts:
        loc = index_of[dofs]
        ix = (Ellipsis, loc[:, None], loc)
        S[ix] += Se.val
        if Se.nd:
            dS[ix] += Se.der
    return ad.Dual(S, dS)


def assemble_stiffness(model: PlateModel, omega, modes=None) -> ad.Dual:
    """Global dynamic stiffness by dof-mapped summation of super-element stiffnesses."""
    n = model.mesh.n_dof
    return _scatter(model.element_stiffnesses(omega, modes), np.arange(n), n, model.nd)


def solve_frequency(S, F):
    """Solve ``S U = F`` for all right-hand sides with one factorization."""
    try:
        return ad.solve(S, F)
    except (np.linalg.LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(ad.value(S))
        raise np.linalg.LinAlgError(f"factorization failed (condition estimate {cond:.3e})") from exc


def extract_velocities(U, A, omega):
    """``(i omega) A U``: velocities at the measurement dofs."""
    A = np.asarray(A)
    if A.dtype == bool:
        if np.any(A.sum(axis=1) != 1):
            raise ValueError("every assignment row needs exactly one entry")
        rows = np.argmax(A, axis=1)
        sel = U[rows] if isinstance(U, ad.Dual) else np.asarray(U)[rows]
    else:
        sel = A @ U
    return sel * (1j * omega)
