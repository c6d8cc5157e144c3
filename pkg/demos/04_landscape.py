"""Coarse map of the misfit over the parameter box.

Run: python demos/04_landscape.py   (about five minutes)

Each row is one notch position q1, each column one depth q2.  The map has a
narrow global valley at the true notch and several shallower pockets where
some echo lines up with a wrong notch position.
"""

import numpy as np

from gwnotch.forward import ForwardContext, scan
from gwnotch.inverse import ParameterBox
from gwnotch.io import RunConfig, synth_measurement

mm = 1e-3
cfg = RunConfig()
ms = synth_measurement([0.0, 0.8 * mm], cfg)
ctx = ForwardContext(ms.V, cfg.grid, cfg.geometry, cfg.model, cfg.material)

box = ParameterBox()
q1s = np.linspace(box.lo[0], box.hi[0], 41)
q2s = np.linspace(box.lo[1], box.hi[1], 11)
vals = scan(ctx, q1s, q2s)

shades = " .:-=+*#%@"
levels = np.quantile(vals, np.linspace(0, 1, len(shades) + 1)[1:-1])
print("q1 [mm]   q2 = 0.1 ... 1.1 mm (dark = large misfit)")
for a, row in zip(q1s, vals):
    print(f"{a / mm:7.1f}   " + "".join(shades[np.searchsorted(levels, v)] * 2 for v in row))
i, j = np.unravel_index(np.argmin(vals), vals.shape)
print(f"grid minimum at ({q1s[i] / mm:.1f}, {q2s[j] / mm:.2f}) mm, value {vals[i, j]:.2f}")
