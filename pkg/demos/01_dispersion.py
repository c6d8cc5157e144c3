"""Lamb modes of the 2 mm steel plate.

Run: python demos/01_dispersion.py

The through-thickness line of the plate mesh is enough to get the
propagating modes.  Below the first antisymmetric cutoff only A0 and S0
travel, which is why a 500 kHz pulse is a good choice for sizing a notch.
"""

import numpy as np

from gwnotch.geometry import Material, PlateGeometry, build_mesh
from gwnotch.lamb import lamb_wavenumbers
from gwnotch.waveguide import cutoff_frequencies, dispersion_curves

mm = 1e-3
mat = Material()
section = build_mesh(PlateGeometry(), [0.0, 0.8 * mm]).section

# wavelengths at the centre frequency
rows = dispersion_curves(section, mat, [500e3])
for r in rows:
    print(f"{r.mode_label}: wavelength {r.wavelength_m / mm:.3f} mm")

# cutoff of the next mode: thickness-shear resonance cs / (2 h)
cut = cutoff_frequencies(section, mat)
print(f"first cutoff above zero: {cut[cut > 1e3][0] / 1e3:.1f} kHz")

# compare with roots of the exact Rayleigh-Lamb equations
print("\n  f [kHz]  A0 model/exact   S0 model/exact")
for f in np.linspace(100e3, 1e6, 10):
    lam = {r.mode_label: r.wavelength_m for r in dispersion_curves(section, mat, [f])}
    ratios = []
    for fam in "AS":
        k = lamb_wavenumbers(f, mat.cl, mat.cs, 2 * mm, fam)[0]
        ratios.append(lam[fam + "0"] * k / (2 * np.pi))
    print(f"  {f / 1e3:7.0f}  {ratios[0]:.6f}        {ratios[1]:.6f}")
