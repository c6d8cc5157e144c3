"""Guided-wave notch sizing in plates.

Scaled boundary finite elements model a plate with a rectangular notch;
an envelope misfit against laser-vibrometer style measurements is
minimized with multistart sampling and a Gauss-Newton iteration.
"""

from .assembly import PlateModel, TractionSpec, assemble_stiffness, assemble_tractions
from .dual import Dual
from .forward import ForwardContext, ForwardOutput, ModelConfig, forward, jacobian, objective, scan
from .geometry import Material, MeshError, NotchParams, PlateGeometry, PlateMesh, build_mesh
from .inverse import ParameterBox, ReconstructionResult, irgnm, multistart, reconstruct
from .io import MeasurementSet, RunConfig, read_container, synth_measurement, write_container
from .polygon import continued_fraction_setup, polygon_stiffness, riccati_static_stiffness
from .signal import FrequencyGrid, TimeGrid, analytic_signal, dlt, envelope_t, idlt
from .waveguide import dispersion_curves, solve_modes, waveguide_stiffness

__version__ = "0.1.0"
