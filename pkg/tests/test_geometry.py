import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwnotch import dual as ad
from gwnotch.geometry import (
    Material,
    MeshError,
    NotchParams,
    PlateGeometry,
    build_mesh,
    element_matrices,
    gauss_lobatto,
    gauss_lobatto_basis,
    is_star_convex,
    mesh_dump,
    notch_polygons,
)

mm = 1e-3
Q_REF = [0.0, 0.8 * mm]


def test_lobatto_rules():
    x, w = gauss_lobatto(1)
    assert np.allclose(x, [-1, 1]) and np.allclose(w, [1, 1])
    x, w = gauss_lobatto(2)
    assert np.allclose(x, [-1, 0, 1]) and np.allclose(w, [1 / 3, 4 / 3, 1 / 3])
    for k in range(4):
        assert np.dot(w, x**k) == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-14)
    with pytest.raises(ValueError):
        gauss_lobatto(0)


@pytest.mark.parametrize("p", range(1, 11))
def test_lobatto_exactness(p):
    x, w = gauss_lobatto(p)
    assert len(x) == p + 1 and x[0] == -1 and x[-1] == 1
    assert w.sum() == pytest.approx(2.0, abs=1e-13)
    for k in range(2 * p):
        assert np.dot(w, x**k) == pytest.approx((1 - (-1) ** (k + 1)) / (k + 1), abs=1e-12)


def test_basis_partition_of_unity():
    nodes, w, qw, N, dN = gauss_lobatto_basis(6)
    assert np.allclose(N.sum(axis=1), 1.0)
    assert np.allclose(dN.sum(axis=1), 0.0, atol=1e-11)


def test_material_validation_and_tensor():
    m = Material()
    assert np.all(np.linalg.eigvalsh(m.D) > 0)
    assert np.allclose(m.D, m.D.T)
    for bad in (dict(rho=0), dict(E=-1), dict(nu=0.5)):
        with pytest.raises(ValueError):
            Material(**bad)


def test_geometry_validation():
    with pytest.raises(ValueError):
        PlateGeometry(thickness=0)
    with pytest.raises(ValueError):
        PlateGeometry(sensor_span=(-50 * mm, -40 * mm))
    with pytest.raises(ValueError):
        NotchParams(0.0, 0.5 * mm, width=0.0)


def test_reference_mesh():
    mesh = build_mesh(PlateGeometry(), Q_REF)
    assert 300 <= mesh.n_dof <= 400
    assert mesh.n_dof == 316  # frozen
    assert mesh.assignment_matrix().shape == (22, mesh.n_dof)
    x, z = ad.value(mesh.x), ad.value(mesh.z)
    xs = np.asarray(PlateGeometry().measurement_xs)
    assert np.allclose(x[mesh.measurement_nodes], xs) and np.all(z[mesh.measurement_nodes] == 0.0)
    top = np.isclose(z, 0.0)
    for xe in PlateGeometry().sensor_span:
        assert np.any(top & np.isclose(x, xe, rtol=0, atol=1e-15))


def test_mesh_conformity():
    mesh = build_mesh(PlateGeometry(), Q_REF)
    count = np.zeros(mesh.n_dof, int)
    for el in mesh.elements:
        count[el.dofs()] += 1
    # every dof belongs to one or two super-elements; internal interfaces to exactly two
    assert count.min() >= 1 and count.max() <= 2
    shared = np.flatnonzero(count == 2)
    assert len(shared) > 0


def test_determinism_and_q1_locality():
    geom = PlateGeometry()
    a = build_mesh(geom, Q_REF)
    assert mesh_dump(a) == mesh_dump(build_mesh(geom, Q_REF))
    b = build_mesh(geom, [3 * mm, 0.8 * mm])
    xa, xb = ad.value(a.x), ad.value(b.x)
    left = xa < -46 * mm + 1e-12
    assert np.array_equal(xa[left], xb[left]) and np.array_equal(ad.value(a.z)[left], ad.value(b.z)[left])
    for wa, wb in zip(a.waveguides, b.waveguides):
        if not wa.q_dependent:
            assert wa.x_left == wb.x_left and wa.x_right == wb.x_right
    ea = element_matrices(a.polygons[0].mesh, Material(), "polygon").values()
    eb = element_matrices(b.polygons[0].mesh, Material(), "polygon").values()
    assert all(np.array_equal(u, v) for u, v in zip(ea, eb))


def test_mesh_errors():
    geom = PlateGeometry()
    with pytest.raises(MeshError):
        build_mesh(geom, [0.0, 2 * mm])
    with pytest.raises(MeshError):
        build_mesh(geom, [0.0, 0.0])
    with pytest.raises(MeshError):
        build_mesh(geom, [-50 * mm, 0.5 * mm])
    with pytest.raises(MeshError):
        build_mesh(geom, [169 * mm, 0.5 * mm])


def test_section_mass_row_sum():
    mesh = build_mesh(PlateGeometry(), Q_REF)
    mat = Material()
    M0 = element_matrices(mesh.section, mat, "waveguide").M0.val
    h = PlateGeometry().thickness
    assert M0[0::2, 0::2].sum() == pytest.approx(mat.rho * h, rel=1e-13)
    assert M0[1::2, 1::2].sum() == pytest.approx(mat.rho * h, rel=1e-13)
    assert abs(M0[0::2, 1::2].sum()) < 1e-12 * mat.rho * h


@pytest.mark.parametrize("kind", ["waveguide", "polygon"])
def test_matrix_properties(kind):
    mesh = build_mesh(PlateGeometry(), Q_REF)
    bm = mesh.section if kind == "waveguide" else mesh.polygons[1].mesh
    mat = Material()
    E0, E1, E2, M0 = element_matrices(bm, mat, kind).values()
    for A in (E0, E2, M0):
        assert np.abs(A - A.T).max() <= 1e-13 * np.abs(A).max()
    assert np.linalg.eigvalsh(E0).min() > 0
    assert np.linalg.eigvalsh(M0).min() > 0
    assert np.linalg.eigvalsh(E2).min() > -1e-10 * np.abs(E2).max()
    heavy = element_matrices(bm, Material(rho=2 * mat.rho), kind).values()
    assert np.array_equal(heavy[3], 2 * M0)
    assert all(np.array_equal(u, v) for u, v in zip(heavy[:3], (E0, E1, E2)))


def test_coordinate_tangents():
    """Element matrix derivatives with respect to q match finite differences."""
    geom, mat = PlateGeometry(), Material()
    q = np.array([2 * mm, 0.7 * mm])
    em = element_matrices(build_mesh(geom, q).polygons[1].mesh, mat, "polygon")
    h = 1e-9
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        p = element_matrices(build_mesh(geom, q + e).polygons[1].mesh, mat, "polygon").values()
        m = element_matrices(build_mesh(geom, q - e).polygons[1].mesh, mat, "polygon").values()
        for A, Ap, Am in zip((em.E0, em.E1, em.E2, em.M0), p, m):
            fd = (Ap - Am) / (2 * h)
            assert np.abs(A.der[k] - fd).max() <= 1e-5 * max(np.abs(fd).max(), 1e-12 * np.abs(A.val).max())


def test_notch_polygons_reference():
    left, right = notch_polygons(Q_REF)
    centers = [tuple(float(ad.value(c)) for c in pg.center) for pg in (left, right)]
    assert centers[0] == pytest.approx((0.0, -0.8 * mm)) and centers[1] == pytest.approx((0.5 * mm, -0.8 * mm))
    for pg, corner in ((left, (0.0, 0.0)), (right, (0.5 * mm, 0.0))):
        cx, cz = pg.center
        gx = ad.value(pg.mesh.x) + float(ad.value(cx))
        gz = ad.value(pg.mesh.z) + float(ad.value(cz))
        assert np.any(np.isclose(gx, corner[0], atol=1e-15) & np.isclose(gz, corner[1], atol=1e-15))


def test_notch_polygons_mirror():
    left, right = notch_polygons([1 * mm, 0.6 * mm])
    lx, lz = ad.value(left.mesh.x), ad.value(left.mesh.z)
    rx, rz = ad.value(right.mesh.x), ad.value(right.mesh.z)
    a = np.sort(np.round(np.stack([-lx, lz], 1), 15).view(complex).ravel())
    b = np.sort(np.round(np.stack([rx, rz], 1), 15).view(complex).ravel())
    assert np.allclose(a, b, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-40e-3, 40e-3), st.floats(0.1e-3, 1.1e-3))
def test_star_convex_over_box(q1, q2):
    for pg in build_mesh(PlateGeometry(), [q1, q2]).polygons:
        assert is_star_convex(pg.mesh)


def test_mesh_dump_lines():
    text = mesh_dump(build_mesh(PlateGeometry(), Q_REF))
    lines = text.splitlines()
    assert lines[0].startswith("# plate mesh p=6 nodes=158 dofs=316")
    assert sum(line.startswith("node ") for line in lines) == 158
    assert lines[-1].startswith("measurement_dofs")
