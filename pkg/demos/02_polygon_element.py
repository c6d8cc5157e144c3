"""A single polygonal super-element against a fine finite element model.

Run: python demos/02_polygon_element.py

The static stiffness comes from a matrix Riccati equation; the dynamic part
is a continued fraction in frequency.  The reference is a bilinear FEM mesh
of the same 2 x 2 mm square, condensed onto the boundary nodes.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
from oracles import fem_rectangle_stiffness  # noqa: E402

from gwnotch.geometry import Material, element_matrices, rectangle_polygon  # noqa: E402
from gwnotch.polygon import continued_fraction_setup, polygon_stiffness, riccati_static_stiffness  # noqa: E402

mm = 1e-3
mat = Material()
square = rectangle_polygon(2 * mm, 2 * mm, 6)
em = element_matrices(square, mat, "polygon")
E0, E1, E2, _ = em.values()

S0 = riccati_static_stiffness(E0, E1, E2).val
res = np.abs((S0 - E1) @ np.linalg.solve(E0, S0 - E1.T) - E2).max() / np.abs(E2).max()
ev = np.sort(np.linalg.eigvalsh(S0))
print(f"Riccati residual {res:.1e}; three smallest eigenvalues {ev[:3] / ev[-1]}")

omega = 2 * np.pi * 500e3
ref = polygon_stiffness(continued_fraction_setup(em, mat, 12, x=square.x, z=square.z), omega).val - S0
for order in (1, 2, 3, 4, 6):
    S = polygon_stiffness(continued_fraction_setup(em, mat, order, x=square.x, z=square.z), omega).val - S0
    print(f"order {order}: dynamic part against order 12 at 500 kHz {np.linalg.norm(S - ref) / np.linalg.norm(ref):.1e}")

# both discretizations approach the exact stiffness from above; the
# difference is smallest near h = 0.1 mm and grows again for finer FEM meshes
omega = 2 * np.pi * 200e3
S = polygon_stiffness(continued_fraction_setup(em, mat, 6, x=square.x, z=square.z), omega).val
for h in (0.2 * mm, 0.1 * mm, 0.05 * mm):
    K = fem_rectangle_stiffness(2 * mm, 2 * mm, omega, square.x.val, square.z.val, 6, 1, mat, h=h)
    print(f"FEM h = {h / mm:.2f} mm: relative Frobenius difference {np.linalg.norm(S - K) / np.linalg.norm(K):.4f}")
