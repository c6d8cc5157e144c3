"""Plate cross-section, super-element decomposition and coefficient matrices.

Coordinates are SI metres with ``x`` along the plate and ``z`` pointing up;
the plate occupies ``z in [-thickness, 0]``.  Node coordinates that depend
on the notch parameters are :class:`~gwnotch.dual.Dual` arrays carrying
derivatives with respect to ``(q1, q2)``; everything downstream inherits
those derivatives.

Degrees of freedom are interleaved per node: ``(u_x, u_z)`` of node ``n``
sit at ``2n`` and ``2n + 1``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from . import dual as ad

__all__ = [
    "Material",
    "NotchParams",
    "PlateGeometry",
    "BoundaryMesh1D",
    "ElementMatrices",
    "WaveguideElement",
    "PolygonElement",
    "PlateMesh",
    "MeshError",
    "gauss_lobatto",
    "lagrange_basis",
    "gauss_lobatto_basis",
    "element_matrices",
    "build_mesh",
    "notch_polygons",
    "rectangle_polygon",
    "is_star_convex",
    "mesh_dump",
]

mm = 1e-3


class MeshError(ValueError):
    """Inadmissible geometry or a degenerate boundary mesh."""


@dataclass(frozen=True)
class Material:
    """Isotropic linear elastic material under plane strain."""

    rho: float = 7900.0
    E: float = 200e9
    nu: float = 0.3

    def __post_init__(self):
        if not (self.rho > 0 and self.E > 0 and -1 < self.nu < 0.5):
            raise ValueError(f"inadmissible material {self}")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def D(self) -> np.ndarray:
        """Voigt elasticity matrix for ``(eps_xx, eps_zz, gamma_xz)``."""
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])

    @property
    def cs(self) -> float:
        return np.sqrt(self.mu / self.rho)

    @property
    def cl(self) -> float:
        return np.sqrt((self.lam + 2 * self.mu) / self.rho)


@dataclass(frozen=True)
class NotchParams:
    """Notch left-edge position ``q1`` and depth ``q2`` (metres)."""

    q1: float
    q2: float
    width: float = 0.5 * mm

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("notch width must be positive")

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q1, self.q2])


@dataclass(frozen=True)
class PlateGeometry:
    x_min: float = -180 * mm
    x_max: float = 170 * mm
    thickness: float = 2 * mm
    sensor_span: tuple = (-73 * mm, -70 * mm)
    measurement_xs: tuple = tuple(np.round(np.arange(-66, -45, 2) * mm, 12))
    notch_band: float = 2 * mm

    def __post_init__(self):
        xs = np.asarray(self.measurement_xs)
        a, b = self.sensor_span
        if not self.thickness > 0:
            raise ValueError("thickness must be positive")
        if not (self.x_min < a < b < xs.min() and xs.max() < self.x_max):
            raise ValueError("need x_min < sensor span < measurement points < x_max")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("measurement coordinates must be strictly increasing")


def gauss_lobatto(p: int):
    """Gauss-Lobatto-Legendre nodes and weights on [-1, 1] for degree ``p``.

    The ``p + 1`` point rule integrates polynomials up to degree ``2p - 1``
    exactly.
    """
    if p < 1:
        raise ValueError("degree must be at least 1")
    return _gll(int(p))


@lru_cache(maxsize=None)
def _gll(p):
    cp = np.zeros(p + 1)
    cp[-1] = 1.0
    interior = legendre.legroots(legendre.legder(cp)) if p > 1 else np.array([])
    nodes = np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])
    w = 2.0 / (p * (p + 1) * legendre.legval(nodes, cp) ** 2)
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


def lagrange_basis(nodes, pts):
    """Lagrange polynomials on ``nodes`` and their derivatives at ``pts``.

    Returns ``(N, dN)`` with shape ``(len(pts), len(nodes))``.
    """
    nodes = np.asarray(nodes, float)
    pts = np.atleast_1d(np.asarray(pts, float))
    n = len(nodes)
    N = np.ones((len(pts), n))
    dN = np.zeros((len(pts), n))
    for j in range(n):
        others = np.delete(nodes, j)
        denom = np.prod(nodes[j] - others)
        diffs = pts[:, None] - others[None, :]
        N[:, j] = np.prod(diffs, axis=1) / denom
        for m in range(n - 1):
            dN[:, j] += np.prod(np.delete(diffs, m, axis=1), axis=1) / denom
    return N, dN


def gauss_lobatto_basis(p: int, n_quad: int | None = None):
    """Nodes, weights and shape functions of a degree-``p`` spectral element.

    Shape functions are evaluated at the points of an ``n_quad``-point
    Gauss-Lobatto rule (``p + 1`` by default, i.e. at the nodes).

    Returns ``(nodes, qpts, qw, N, dN)``.
    """
    nodes, _ = gauss_lobatto(p)
    n_quad = p + 1 if n_quad is None else n_quad
    qpts, qw = gauss_lobatto(n_quad - 1)
    N, dN = lagrange_basis(nodes, qpts)
    return nodes, qpts, qw, N, dN


@dataclass
class BoundaryMesh1D:
    """Chain of degree-``p`` line elements.

    ``x``/``z`` are node coordinates in the super-element frame (relative to
    the scaling centre for polygons, absolute for waveguide cross-sections).
    ``elements`` holds local node indices, ``node_ids`` the global node ids.
    """

    x: ad.Dual
    z: ad.Dual
    elements: np.ndarray
    p: int
    node_ids: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_dof(self) -> int:
        return 2 * self.n_nodes

    def dofs(self) -> np.ndarray:
        return np.stack([2 * self.node_ids, 2 * self.node_ids + 1], axis=1).ravel()


@dataclass
class ElementMatrices:
    """SBFEM coefficient matrices of one boundary mesh (Dual, possibly nd=0)."""

    E0: ad.Dual
    E1: ad.Dual
    E2: ad.Dual
    M0: ad.Dual

    def values(self):
        return self.E0.val, self.E1.val, self.E2.val, self.M0.val

    def drop(self) -> "ElementMatrices":
        return ElementMatrices(self.E0.drop(), self.E1.drop(), self.E2.drop(), self.M0.drop())


_C1_WG = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
_C2_WG = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])


def element_matrices(mesh: BoundaryMesh1D, material: Material, kind: str, n_quad: int | None = None) -> ElementMatrices:
    """Coefficient matrices ``E0, E1, E2, M0`` of a boundary mesh.

    ``kind`` is ``"waveguide"`` (a through-thickness line, the scaling
    direction being ``x``) or ``"polygon"`` (radial scaling about the
    origin of the mesh frame).  Integration uses ``n_quad``-point
    Gauss-Lobatto quadrature, by default ``p + 2`` points, which is exact
    for straight elements; ``n_quad = p + 1`` gives the nodal rule.
    """
    if kind not in ("waveguide", "polygon"):
        raise ValueError(f"unknown super-element kind {kind!r}")
    x = ad.lift(mesh.x)
    z = ad.lift(mesh.z)
    nd = max(x.nd, z.nd)
    x = x if x.nd == nd else ad.Dual(x.val, nd=nd)
    z = z if z.nd == nd else ad.Dual(z.val, nd=nd)
    _, _, qw, N, dN = gauss_lobatto_basis(mesh.p, mesh.p + 2 if n_quad is None else n_quad)
    D = material.D
    n = mesh.n_dof
    E0 = np.zeros((nd + 1, n, n))
    E1 = np.zeros((nd + 1, n, n))
    E2 = np.zeros((nd + 1, n, n))
    M0 = np.zeros((nd + 1, n, n))
    for el in mesh.elements:
        # value in slot 0, derivative directions after it
        xe = np.concatenate([x.val[None, el], x.der[:, el]])
        ze = np.concatenate([z.val[None, el], z.der[:, el]])
        xq, zq = xe @ N.T, ze @ N.T  # (1+nd, nq)
        xh, zh = xe @ dN.T, ze @ dN.T
        if kind == "waveguide":
            J = zh
            c1 = J[..., None, None] * _C1_WG
            c2 = np.broadcast_to(_C2_WG, J.shape + (3, 2)).copy()
            c2[1:] = 0.0
        else:
            J = xq * zh - zq * xh
            J[1:] = xq[1:] * zh[0] + xq[0] * zh[1:] - zq[1:] * xh[0] - zq[0] * xh[1:]
            c1 = np.zeros(J.shape + (3, 2))
            c1[..., 0, 0] = zh
            c1[..., 1, 1] = -xh
            c1[..., 2, 0] = -xh
            c1[..., 2, 1] = zh
            c2 = np.zeros(J.shape + (3, 2))
            c2[..., 0, 0] = -zq
            c2[..., 1, 1] = xq
            c2[..., 2, 0] = xq
            c2[..., 2, 1] = -zq
        if np.any(J[0] <= 0):
            raise MeshError("non-positive boundary Jacobian (mesh not counter-clockwise about the scaling centre)")
        G = []
        for a, b in ((c1, c1), (c2, c1), (c2, c2)):
            g0 = np.einsum("qia,ij,qjb->qab", a[0], D, b[0]) / J[0][:, None, None]
            gs = [g0]
            for k in range(1, nd + 1):
                dg = np.einsum("qia,ij,qjb->qab", a[k], D, b[0]) + np.einsum("qia,ij,qjb->qab", a[0], D, b[k])
                gs.append(dg / J[0][:, None, None] - g0 * (J[k] / J[0])[:, None, None])
            G.append(np.stack(gs))
        dofs = np.stack([2 * el, 2 * el + 1], axis=1).ravel()
        ix = np.ix_(dofs, dofs)
        m = len(el)
        e0 = np.einsum("q,qi,qj,kqab->kiajb", qw, N, N, G[0]).reshape(nd + 1, 2 * m, 2 * m)
        e1 = np.einsum("q,qi,qj,kqab->kiajb", qw, dN, N, G[1]).reshape(nd + 1, 2 * m, 2 * m)
        e2 = np.einsum("q,qi,qj,kqab->kiajb", qw, dN, dN, G[2]).reshape(nd + 1, 2 * m, 2 * m)
        mm_ = np.einsum("q,qi,qj,kq->kij", qw, N, N, material.rho * J)
        m0 = np.einsum("kij,ab->kiajb", mm_, np.eye(2)).reshape(nd + 1, 2 * m, 2 * m)
        for big, small in ((E0, e0), (E1, e1), (E2, e2), (M0, m0)):
            big[(slice(None),) + ix] += small
    return ElementMatrices(*(ad.Dual(A[0], A[1:]) for A in (E0, E1, E2, M0)))


# ---------------------------------------------------------------------------
# super-elements and the plate mesh


@dataclass
class WaveguideElement:
    name: str
    x_left: object
    x_right: object
    left_nodes: np.ndarray
    right_nodes: np.ndarray
    q_dependent: bool = False

    @property
    def length(self):
        return self.x_right - self.x_left

    def dofs(self) -> np.ndarray:
        ids = np.concatenate([self.left_nodes, self.right_nodes])
        return np.stack([2 * ids, 2 * ids + 1], axis=1).ravel()


@dataclass
class PolygonElement:
    name: str
    mesh: BoundaryMesh1D
    center: tuple
    q_dependent: bool = False
    kind: str = "polygon"

    def dofs(self) -> np.ndarray:
        return self.mesh.dofs()


@dataclass
class PlateMesh:
    """Super-element decomposition of the plate with a notch.

    The node and dof numbering depends only on the discretization settings,
    never on ``q``, so meshes for different notch parameters share it.
    """

    x: ad.Dual
    z: ad.Dual
    section: BoundaryMesh1D
    waveguides: list
    polygons: list
    measurement_nodes: np.ndarray
    sensor_polygon: int
    sensor_elements: np.ndarray
    coupling_nodes: np.ndarray
    q: ad.Dual
    p: int
    geom: PlateGeometry
    width: float
    info: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.x)

    @property
    def n_dof(self) -> int:
        return 2 * self.n_nodes

    @property
    def elements(self) -> list:
        return list(self.waveguides) + list(self.polygons)

    def measurement_dofs(self) -> np.ndarray:
        """Rows of the assignment matrix: all x components, then all z components."""
        ids = self.measurement_nodes
        return np.concatenate([2 * ids, 2 * ids + 1])

    def assignment_matrix(self) -> np.ndarray:
        dofs = self.measurement_dofs()
        A = np.zeros((len(dofs), self.n_dof), dtype=bool)
        A[np.arange(len(dofs)), dofs] = True
        return A


class _NodeTable:
    def __init__(self, nd):
        self.nd = nd
        self.x = []
        self.z = []

    def add(self, x, z) -> int:
        self.x.append(ad.lift(x, self.nd) if isinstance(x, ad.Dual) else ad.Dual(np.asarray(float(x)), nd=self.nd))
        self.z.append(ad.lift(z, self.nd) if isinstance(z, ad.Dual) else ad.Dual(np.asarray(float(z)), nd=self.nd))
        return len(self.x) - 1

    def line(self, a: int, b: int, n_el: int, p: int) -> list:
        """Node ids of ``n_el`` degree-``p`` elements on the segment a -> b."""
        nodes, _ = gauss_lobatto(p)
        ids = [a]
        xa, za, xb, zb = self.x[a], self.z[a], self.x[b], self.z[b]
        for e in range(n_el):
            for s in nodes[1:-1]:
                t = (e + (s + 1) / 2) / n_el
                ids.append(self.add(xa + (xb - xa) * t, za + (zb - za) * t))
            ids.append(b if e == n_el - 1 else self.add(xa + (xb - xa) * ((e + 1) / n_el), za + (zb - za) * ((e + 1) / n_el)))
        return ids

    def arrays(self):
        return ad.stack(self.x), ad.stack(self.z)


def _chain_elements(n_nodes_chain: int, p: int) -> np.ndarray:
    n_el = (n_nodes_chain - 1) // p
    return np.array([np.arange(e * p, e * p + p + 1) for e in range(n_el)])


def _polygon_from_chain(table: _NodeTable, chain: list, center, p: int, closed: bool) -> BoundaryMesh1D:
    if closed:
        assert chain[0] == chain[-1]
        uniq = chain[:-1]
    else:
        uniq = chain
    local = {g: i for i, g in enumerate(uniq)}
    elements = _chain_elements(len(chain), p)
    elements = np.vectorize(lambda i: local[chain[i]])(elements)
    x = ad.stack([table.x[g] for g in uniq]) - center[0]
    z = ad.stack([table.z[g] for g in uniq]) - center[1]
    return BoundaryMesh1D(x=x, z=z, elements=elements, p=p, node_ids=np.array(uniq))


def _section_template(thickness: float, p: int, n_thick: int) -> tuple:
    nodes, _ = gauss_lobatto(p)
    zs = [-thickness]
    for e in range(n_thick):
        z0 = -thickness + thickness * e / n_thick
        z1 = -thickness + thickness * (e + 1) / n_thick
        zs.extend(z0 + (z1 - z0) * (nodes[1:] + 1) / 2)
    return np.array(zs)


def rectangle_polygon(width: float, height: float, p: int, n_el: int = 1) -> BoundaryMesh1D:
    """Closed boundary mesh of a rectangle centred on its scaling centre."""
    table = _NodeTable(0)
    w2, h2 = width / 2, height / 2
    c = [table.add(-w2, -h2), table.add(w2, -h2), table.add(w2, h2), table.add(-w2, h2)]
    chain = []
    for a, b in zip(c, c[1:] + c[:1]):
        seg = table.line(a, b, n_el, p)
        chain.extend(seg if not chain else seg[1:])
    return _polygon_from_chain(table, chain, (0.0, 0.0), p, closed=True)


def build_mesh(
    geom: PlateGeometry,
    q,
    p: int = 6,
    width: float = 0.5 * mm,
    n_thick: int = 1,
    refine: int = 1,
    sensor_elements: int = 1,
) -> PlateMesh:
    """Decompose the notched plate into waveguide and polygon super-elements.

    Layout, left to right: waveguide chain over the q-independent part
    (free end, sensor polygon, one cross-section per measurement point),
    one waveguide up to the notch band, two polygons around the notch with
    scaling centres at its re-entrant corners, one waveguide to the free
    right end.

    Parameters
    ----------
    q : NotchParams, array_like or Dual
        Notch position and depth; a 2-vector Dual propagates derivatives.
    p : int
        Polynomial degree of every boundary element.
    n_thick : int
        Elements through the thickness on each cross-section.
    refine : int
        Elements per edge of the notch polygons.
    sensor_elements : int
        Elements along the loaded top edge and the bottom edge of the sensor polygon.
    """
    if isinstance(q, NotchParams):
        width = q.width
        q = q.q
    if not isinstance(q, ad.Dual):
        q = ad.Dual(np.asarray(q, float), np.eye(2))
    q1, q2 = q[0], q[1]
    h = geom.thickness
    xs = np.asarray(geom.measurement_xs, float)
    sa, sb = geom.sensor_span
    half = geom.notch_band / 2
    q1v, q2v = float(q1.val), float(q2.val)
    if not 0 < q2v < h:
        raise MeshError(f"notch depth {q2v} outside (0, {h})")
    if half <= width / 2:
        raise MeshError("notch band narrower than the notch")
    xa_v = q1v + width / 2 - half
    xb_v = q1v + width / 2 + half
    if not (xs.max() < xa_v and xb_v < geom.x_max):
        raise MeshError(f"notch band [{xa_v}, {xb_v}] overlaps the measurement region or the plate end")
    if xa_v <= sb:
        raise MeshError("notch overlaps the sensor region")

    nd = q.nd
    table = _NodeTable(nd)
    zsec = _section_template(h, p, n_thick)
    sec_elements = _chain_elements(len(zsec), p)
    section = BoundaryMesh1D(
        x=ad.Dual(np.zeros(len(zsec))), z=ad.Dual(zsec), elements=sec_elements, p=p, node_ids=np.arange(len(zsec))
    )

    def new_section(x):
        return np.array([table.add(x, z) for z in zsec])

    waveguides = []
    polygons = []

    # q-independent part
    s_min = new_section(geom.x_min)
    s_a = new_section(sa)
    s_b = new_section(sb)
    waveguides.append(WaveguideElement("wg_left_end", geom.x_min, sa, s_min, s_a))

    # sensor polygon, counter-clockwise from the bottom-left corner
    chain = table.line(s_a[0], s_b[0], sensor_elements, p)
    chain += list(s_b[1:])
    chain += table.line(s_b[-1], s_a[-1], sensor_elements, p)[1:]
    chain += list(s_a[::-1][1:])
    center = ((sa + sb) / 2, -h / 2)
    sensor_mesh = _polygon_from_chain(table, chain, center, p, closed=True)
    polygons.append(PolygonElement("sensor", sensor_mesh, center))
    # loaded elements: the top edge, which follows the bottom edge and the right section
    top0 = sensor_elements + n_thick
    sensor_el = np.arange(top0, top0 + sensor_elements)

    prev, prev_x = s_b, sb
    meas_nodes = []
    for i, xm in enumerate(xs):
        s = new_section(xm)
        waveguides.append(WaveguideElement(f"wg_meas_{i}", prev_x, xm, prev, s))
        meas_nodes.append(s[-1])
        prev, prev_x = s, xm
    coupling = prev

    # q-dependent part
    x_c = q1 + width / 2
    xa = x_c - half
    xb = x_c + half
    s_xa = new_section(xa)
    s_xb = new_section(xb)
    s_end = new_section(geom.x_max)
    waveguides.append(WaveguideElement("wg_to_notch", prev_x, xa, prev, s_xa, q_dependent=True))

    n_top = table.add(q1, 0.0)
    n_top_r = table.add(q1 + width, 0.0)
    n_root = table.add(x_c, -q2)
    n_bot = table.add(x_c, -h)
    # shared interface below the notch, bottom to top
    mid = table.line(n_bot, n_root, refine, p)
    bottom_l = table.line(s_xa[0], n_bot, refine, p)
    bottom_r = table.line(n_bot, s_xb[0], refine, p)
    top_l = table.line(n_top, s_xa[-1], refine, p)
    top_r = table.line(s_xb[-1], n_top_r, refine, p)

    chain_l = top_l + list(s_xa[::-1][1:]) + bottom_l[1:] + mid[1:]
    chain_r = mid[::-1] + bottom_r[1:] + list(s_xb[1:]) + top_r[1:]
    c_l = (q1, -q2)
    c_r = (q1 + width, -q2)
    polygons.append(
        PolygonElement("notch_left", _polygon_from_chain(table, chain_l, c_l, p, closed=False), c_l, q_dependent=True)
    )
    polygons.append(
        PolygonElement("notch_right", _polygon_from_chain(table, chain_r, c_r, p, closed=False), c_r, q_dependent=True)
    )
    waveguides.append(WaveguideElement("wg_right_end", xb, geom.x_max, s_xb, s_end, q_dependent=True))

    x, z = table.arrays()
    return PlateMesh(
        x=x,
        z=z,
        section=section,
        waveguides=waveguides,
        polygons=polygons,
        measurement_nodes=np.array(meas_nodes),
        sensor_polygon=0,
        sensor_elements=sensor_el,
        coupling_nodes=np.asarray(coupling),
        q=q,
        p=p,
        geom=geom,
        width=width,
        info=dict(n_thick=n_thick, refine=refine, sensor_elements=sensor_elements),
    )


def notch_polygons(q, geom: PlateGeometry = PlateGeometry(), p: int = 6, width: float = 0.5 * mm, refine: int = 1):
    """The two polygon super-elements enclosing the notch."""
    mesh = build_mesh(geom, q, p=p, width=width, refine=refine)
    return [e for e in mesh.polygons if e.name.startswith("notch")]


def is_star_convex(mesh: BoundaryMesh1D, tol: float = 1e-12) -> bool:
    """Every boundary element seen counter-clockwise from the scaling centre.

    Checks a positive Jacobian ``x z' - z x'`` at the element nodes and a
    total swept angle not exceeding one turn.
    """
    x, z = ad.value(mesh.x), ad.value(mesh.z)
    nodes, _ = gauss_lobatto(mesh.p)
    _, dN = lagrange_basis(nodes, nodes)
    total = 0.0
    for el in mesh.elements:
        xh, zh = dN @ x[el], dN @ z[el]
        J = x[el] * zh - z[el] * xh
        scale = np.hypot(x[el], z[el]).max() * np.hypot(xh, zh).max()
        if np.any(J <= tol * scale):
            return False
        a0 = np.arctan2(z[el[0]], x[el[0]])
        a1 = np.arctan2(z[el[-1]], x[el[-1]])
        total += (a1 - a0) % (2 * np.pi)
    return total <= 2 * np.pi * (1 + 1e-9)


def mesh_dump(mesh: PlateMesh) -> str:
    """Line-based text dump of nodes, super-elements and dof map."""
    out = io.StringIO()
    x, z = ad.value(mesh.x), ad.value(mesh.z)
    out.write(f"# plate mesh p={mesh.p} nodes={mesh.n_nodes} dofs={mesh.n_dof}\n")
    for i, (xi, zi) in enumerate(zip(x, z)):
        out.write(f"node {i} {xi:.12e} {zi:.12e}\n")
    for w in mesh.waveguides:
        L = float(ad.value(w.length))
        out.write(f"waveguide {w.name} L={L:.12e} dofs " + " ".join(map(str, w.dofs())) + "\n")
    for pg in mesh.polygons:
        cx, cz = (float(ad.value(c)) for c in pg.center)
        out.write(f"polygon {pg.name} center={cx:.12e},{cz:.12e} dofs " + " ".join(map(str, pg.dofs())) + "\n")
    out.write("measurement_dofs " + " ".join(map(str, mesh.measurement_dofs())) + "\n")
    return out.getvalue()
