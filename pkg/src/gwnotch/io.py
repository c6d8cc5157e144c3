"""Measurement container, run configuration and synthetic measurements.

Container layout::

    GWNOTCH-MEASUREMENT\\n
    {"dt": ..., ...}\\n          one line of JSON with sorted keys
    <payload>                   little-endian float64, axis order (component, x, y, time)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .forward import ForwardContext, ModelConfig, spectrum_to_time
from .geometry import Material, PlateGeometry
from .signal import ExcitationConfig, TimeGrid, dlt, excitation_signal, envelope_t, mean_y, nrm

__all__ = [
    "SCHEMA_VERSION",
    "MAGIC",
    "ContainerError",
    "SchemaError",
    "LengthError",
    "NaNPayloadError",
    "MeasurementSet",
    "RunConfig",
    "write_container",
    "read_container",
    "synth_measurement",
]

SCHEMA_VERSION = 1
MAGIC = b"GWNOTCH-MEASUREMENT\n"
mm = 1e-3


class ContainerError(ValueError):
    """Base class of container format problems."""


class SchemaError(ContainerError):
    """Missing magic line, malformed header or unsupported schema version."""


class LengthError(ContainerError):
    """Payload size disagrees with the header."""


class NaNPayloadError(ContainerError):
    """Payload contains NaN or infinite values."""


@dataclass
class MeasurementSet:
    """Time grid, raw velocities and header of one measurement.

    ``raw`` keeps the stored ``(2, n_x, n_y, n_t)`` array; ``V`` is the
    y-averaged and normalized ``(2, n_x, 1, n_t)`` array used for fitting.
    """

    grid: TimeGrid
    x_coords: np.ndarray
    raw: np.ndarray
    geometry: dict = field(default_factory=dict)
    provenance: str = ""

    @property
    def V(self) -> np.ndarray:
        return nrm(mean_y(self.raw))

    @property
    def n_x(self) -> int:
        return self.raw.shape[1]

    @property
    def n_y(self) -> int:
        return self.raw.shape[2]

    def header(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n_components": int(self.raw.shape[0]),
            "n_x": int(self.raw.shape[1]),
            "n_y": int(self.raw.shape[2]),
            "n_t": int(self.raw.shape[3]),
            "dt": float(self.grid.dt),
            "t0": float(self.grid.t0),
            "x_coords": [float(x) for x in self.x_coords],
            "geometry": self.geometry,
            "provenance": self.provenance,
        }


def _geometry_dict(geom: PlateGeometry) -> dict:
    return {
        "x_min": geom.x_min,
        "x_max": geom.x_max,
        "thickness": geom.thickness,
        "sensor_span": list(geom.sensor_span),
        "notch_band": geom.notch_band,
    }


def write_container(ms: MeasurementSet, path) -> None:
    raw = np.asarray(ms.raw, dtype="<f8")
    if raw.ndim != 4 or raw.shape[0] != 2:
        raise ContainerError(f"raw array must be (2, n_x, n_y, n_t), got {raw.shape}")
    if np.any(np.diff(ms.x_coords) <= 0):
        raise ContainerError("x coordinates must be strictly increasing")
    head = json.dumps(ms.header(), sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(head.encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(raw).tobytes())


def read_container(path) -> MeasurementSet:
    """Read and validate a container.

    Raises
    ------
    SchemaError, LengthError, NaNPayloadError
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise SchemaError("not a measurement container (bad magic line)")
    rest = blob[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise SchemaError("header line not terminated")
    try:
        head = json.loads(rest[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"malformed header: {exc}") from exc
    version = head.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version!r} (supported: {SCHEMA_VERSION})")
    required = ["n_components", "n_x", "n_y", "n_t", "dt", "t0", "x_coords"]
    missing = [k for k in required if k not in head]
    if missing:
        raise SchemaError(f"header lacks {missing}")
    if head["n_components"] != 2:
        raise SchemaError("n_components must be 2")
    shape = (2, int(head["n_x"]), int(head["n_y"]), int(head["n_t"]))
    payload = rest[nl + 1:]
    expected = 8 * math.prod(shape)
    if len(payload) != expected:
        raise LengthError(f"payload has {len(payload)} bytes, header implies {expected}")
    raw = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if not np.all(np.isfinite(raw)):
        raise NaNPayloadError("payload contains NaN or infinite values")
    x = np.asarray(head["x_coords"], float)
    if len(x) != shape[1] or np.any(np.diff(x) <= 0):
        raise SchemaError("x_coords must have n_x strictly increasing entries")
    grid = TimeGrid(n_samples=shape[3], dt=float(head["dt"]), t0=float(head["t0"]))
    return MeasurementSet(grid=grid, x_coords=x, raw=raw, geometry=head.get("geometry", {}), provenance=head.get("provenance", ""))


@dataclass
class RunConfig:
    """Everything a run needs besides the measurement itself."""

    material: Material = field(default_factory=Material)
    geometry: PlateGeometry = field(default_factory=PlateGeometry)
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: TimeGrid = field(default_factory=TimeGrid)
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    box: tuple = ((-40 * mm, 40 * mm), (0.1 * mm, 1.1 * mm))
    starts: int = 100
    seed: int = 0
    eps: float = 1e-7
    alpha0: float = 0.0
    max_iter: int = 50
    synth_model: ModelConfig = field(default_factory=lambda: ModelConfig(p=8, refine=2, sensor_elements=2))
    traction_weights: tuple = (1.0, 0.3)

    def to_dict(self) -> dict:
        return asdict(self)


def synth_measurement(q_true, cfg: RunConfig = RunConfig(), noise_rms_fraction: float = 0.0, seed: int = 0, n_y: int = 1, ctx: ForwardContext | None = None) -> MeasurementSet:
    """Synthetic measurement from the forward model at a finer discretization.

    The two unit-traction responses are weighted by ``(w1 s, w2 s)`` where
    ``s`` is the transform of the excitation pulse, transformed to time,
    disturbed by white Gaussian noise whose standard deviation is
    ``noise_rms_fraction`` times the peak envelope, and normalized.

    ``ctx`` may pass a prepared simulation context (built with
    ``cfg.synth_model``) to reuse its cached frequency data.
    """
    if ctx is None:
        ctx = ForwardContext(None, cfg.grid, cfg.geometry, cfg.synth_model, cfg.material)
    Vs = ctx.simulate(np.asarray(q_true, float), derivatives=False).val  # (n_band, n_eval, 2)
    s_hat = dlt(excitation_signal(cfg.grid, cfg.excitation), cfg.grid, ctx.freq.zeta)[ctx.band].astype(complex)
    w = np.asarray(cfg.traction_weights, float)
    spec = np.einsum("bek,k,b->eb", Vs, w, s_hat)
    traces = np.real(spectrum_to_time(spec, ctx.band, cfg.grid, ctx.freq.zeta).val)
    nx = len(cfg.geometry.measurement_xs)
    V = traces.reshape(2, nx, 1, cfg.grid.n_samples)
    V = np.repeat(V, n_y, axis=2)
    if noise_rms_fraction > 0:
        peak = float(np.max(envelope_t(V)))
        rng = np.random.default_rng(seed)
        V = V + rng.normal(0.0, noise_rms_fraction * peak, size=V.shape)
    V = nrm(V)
    q = np.asarray(q_true, float)
    return MeasurementSet(
        grid=cfg.grid,
        x_coords=np.asarray(cfg.geometry.measurement_xs, float),
        raw=V,
        geometry=_geometry_dict(cfg.geometry),
        provenance=f"synthetic q=({q[0]:.6e},{q[1]:.6e}) p={cfg.synth_model.p} refine={cfg.synth_model.refine} noise={noise_rms_fraction}",
    )
