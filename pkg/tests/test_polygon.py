import numpy as np
import pytest
from oracles import fem_rectangle_stiffness

from gwnotch.geometry import Material, PlateGeometry, build_mesh, element_matrices, rectangle_polygon
from gwnotch.polygon import (
    continued_fraction_setup,
    polygon_stiffness,
    polygon_stiffness_batch,
    riccati_static_stiffness,
    rigid_body_modes,
)
from gwnotch.signal import TimeGrid

mm = 1e-3
MAT = Material()
SQUARE = rectangle_polygon(2 * mm, 2 * mm, 6)
SQ_MATS = element_matrices(SQUARE, MAT, "polygon")


def _riccati_residual(S, E0, E1, E2):
    R = (S - E1) @ np.linalg.solve(E0, S - E1.T) - E2
    return np.abs(R).max() / np.abs(E2).max()


def test_static_stiffness_square():
    E0, E1, E2, _ = SQ_MATS.values()
    S0 = riccati_static_stiffness(E0, E1, E2).val
    assert _riccati_residual(S0, E0, E1, E2) <= 1e-8
    assert np.abs(S0 - S0.T).max() <= 1e-12 * np.abs(S0).max()
    rb = rigid_body_modes(SQUARE.x, SQUARE.z)
    assert np.linalg.norm(S0 @ rb, axis=0).max() <= 1e-8 * np.linalg.norm(S0)
    ev = np.linalg.eigvalsh(S0) / np.abs(S0).max()
    assert ev.min() > -1e-10
    assert np.sum(np.abs(ev) < 1e-8) == 3


def test_reference_mesh_polygons():
    mesh = build_mesh(PlateGeometry(), [0.0, 0.8 * mm])
    for pg in mesh.polygons:
        E0, E1, E2, _ = element_matrices(pg.mesh, MAT, "polygon").values()
        S0 = riccati_static_stiffness(E0, E1, E2).val
        assert _riccati_residual(S0, E0, E1, E2) <= 1e-8
        S = polygon_stiffness(continued_fraction_setup(element_matrices(pg.mesh, MAT, "polygon"), MAT, 6, x=pg.mesh.x, z=pg.mesh.z), 2 * np.pi * 700e3).val
        assert np.abs(S - S.T).max() <= 1e-10 * np.abs(S).max()


def test_riccati_sensitivity():
    q = np.array([1 * mm, 0.6 * mm])
    pg = build_mesh(PlateGeometry(), q).polygons[2]
    em = element_matrices(pg.mesh, MAT, "polygon")
    S = riccati_static_stiffness(em.E0, em.E1, em.E2)
    E0, E1, E2 = em.E0.val, em.E1.val, em.E2.val
    A = np.linalg.solve(E0, S.val - E1.T)
    B = np.linalg.solve(E0, (S.val - E1).T).T  # (S - E1) E0^{-1}
    for k in range(2):
        dS, dE0, dE1, dE2 = S.der[k], em.E0.der[k], em.E1.der[k], em.E2.der[k]
        dR = (dS - dE1) @ A + B @ (dS - dE1.T) - B @ dE0 @ A - dE2
        assert np.abs(dR).max() <= 1e-8 * np.abs(dE2).max()


def test_fem_oracle_200khz():
    omega = 2 * np.pi * 200e3
    K = fem_rectangle_stiffness(2 * mm, 2 * mm, omega, SQUARE.x.val, SQUARE.z.val, 6, 1, MAT, h=0.1 * mm)
    cf = continued_fraction_setup(SQ_MATS, MAT, 6, x=SQUARE.x, z=SQUARE.z)
    S = polygon_stiffness(cf, omega).val
    err = np.linalg.norm(S - K) / np.linalg.norm(K)
    assert err <= 0.01
    assert err == pytest.approx(0.0098, abs=0.0005)  # frozen


def test_static_limit():
    cf = continued_fraction_setup(SQ_MATS, MAT, 6, x=SQUARE.x, z=SQUARE.z)
    S0 = riccati_static_stiffness(*SQ_MATS.values()[:3]).val
    S = polygon_stiffness(cf, 1e-3).val
    assert np.linalg.norm(S - S0) <= 1e-8 * np.linalg.norm(S0)


def test_convergence_in_order():
    omega = 2 * np.pi * 500e3
    ref = polygon_stiffness(continued_fraction_setup(SQ_MATS, MAT, 12, x=SQUARE.x, z=SQUARE.z), omega).val
    errs = [
        np.linalg.norm(polygon_stiffness(continued_fraction_setup(SQ_MATS, MAT, M, x=SQUARE.x, z=SQUARE.z), omega).val - ref)
        for M in (2, 4, 6)
    ]
    assert errs[0] > errs[1] > errs[2]


def test_scale_invariance():
    omega = 2 * np.pi * 400e3
    a = polygon_stiffness(continued_fraction_setup(SQ_MATS, MAT, 6, r0=1 * mm), omega).val
    b = polygon_stiffness(continued_fraction_setup(SQ_MATS, MAT, 6, r0=3 * mm), omega).val
    assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(a)


def test_tangents_and_batch():
    q = np.array([1 * mm, 0.6 * mm])
    zeta = TimeGrid().zeta
    omegas = 2 * np.pi * np.array([300e3, 900e3]) - 1j * zeta

    def stiff(qv):
        pg = build_mesh(PlateGeometry(), qv).polygons[1]
        em = element_matrices(pg.mesh, MAT, "polygon")
        return continued_fraction_setup(em, MAT, 6, x=pg.mesh.x, z=pg.mesh.z)

    cf = stiff(q)
    batch = polygon_stiffness_batch(cf, omegas)
    for i, w in enumerate(omegas):
        S = polygon_stiffness(cf, w)
        assert np.allclose(batch.val[i], S.val, rtol=1e-10, atol=1e-12 * np.abs(S.val).max())
        assert np.abs(S.val - S.val.T).max() <= 1e-10 * np.abs(S.val).max()
        h = 1e-9
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (polygon_stiffness(stiff(q + e), w).val - polygon_stiffness(stiff(q - e), w).val) / (2 * h)
            assert np.linalg.norm(S.der[k] - fd) <= 1e-5 * np.linalg.norm(fd)
            assert np.allclose(batch.der[k, i], S.der[k], rtol=1e-8, atol=1e-10 * np.abs(S.der[k]).max())


def test_order_validation():
    with pytest.raises(ValueError):
        continued_fraction_setup(SQ_MATS, MAT, 0, r0=1 * mm)
    with pytest.raises(ValueError):
        continued_fraction_setup(SQ_MATS, MAT, 4)
