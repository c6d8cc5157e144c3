"""Forward operator: notch parameters to envelope vector.

The q-independent part of the plate (everything left of the coupling
cross-section just after the last measurement point) is condensed once per
frequency onto that cross-section.  Each forward evaluation then only
assembles and solves the small q-dependent system around the notch,
recovers the measurement-point displacements from the stored condensation
data, fits the per-frequency transfer function to the measured spectrum,
and transforms back to time.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from . import dual as ad
from .assembly import PlateModel, TractionSpec, _scatter, assemble_tractions, extract_velocities, solve_frequency
from .geometry import Material, NotchParams, PlateGeometry, build_mesh, element_matrices
from .polygon import continued_fraction_setup, polygon_stiffness_batch
from .signal import FrequencyGrid, TimeGrid, dlt, envelope_t, idlt, vec_env
from .waveguide import ModalStack, waveguide_stiffness_batch

__all__ = [
    "ModelConfig",
    "ForwardContext",
    "ForwardOutput",
    "relevant_band",
    "transfer_fit",
    "forward",
    "objective",
    "jacobian",
    "scan",
    "simulate_spectra",
    "spectrum_to_time",
]

log = logging.getLogger(__name__)
mm = 1e-3


@dataclass(frozen=True)
class ModelConfig:
    """Discretization and fitting settings of the forward model.

    ``response_scale`` multiplies the unit-traction velocities before the
    transfer fit (responses per GPa of traction instead of per Pa).  The
    fitted weights are then of order one, so ``beta`` only guards against
    vanishing responses and does not bias the fit.
    """

    p: int = 6
    order: int | None = None
    n_thick: int = 1
    refine: int = 1
    sensor_elements: int = 1
    width: float = 0.5 * mm
    beta: float = 1e-9
    band: tuple = (10e3, 1.5e6)
    zeta: float | None = None
    response_scale: float = 1e9
    n_quad: int | None = None

    @property
    def cf_order(self) -> int:
        return self.p if self.order is None else self.order


@dataclass
class ForwardOutput:
    y_sim: object
    V_sim: np.ndarray
    h_spectrum: np.ndarray
    band_hz: np.ndarray
    v_hat_sim: object = None

    @property
    def jacobian(self) -> np.ndarray:
        if not isinstance(self.y_sim, ad.Dual) or self.y_sim.nd == 0:
            raise ValueError("forward output carries no derivatives")
        return np.real(self.y_sim.der.T)


def relevant_band(freq: FrequencyGrid, f_min: float, f_max: float) -> np.ndarray:
    """Transform bins with real frequency in ``[f_min, f_max]`` (up to Nyquist)."""
    return replace(freq, band=(f_min, f_max)).band_indices()


def transfer_fit(V, v, beta: float = 1e-9):
    """Regularized least-squares weights ``(V^H V + beta I)^{-1} V^H v``.

    ``V`` is ``(n_eval, 2)``, ``v`` is ``(n_eval,)``; either may be a Dual.
    """
    n = ad.value(V).shape[1]
    VH = V.H if isinstance(V, ad.Dual) else np.conj(np.asarray(V)).T
    Nm = VH @ V + beta * np.eye(n)
    return ad.solve(Nm, VH @ v)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("GWNOTCH_THREADS", "1")))
    except ValueError:
        return 1


class ForwardContext:
    """Measurement, grids and cached q-independent data for repeated forward runs.

    Parameters
    ----------
    V_meas : ndarray, shape (2, n_x, 1, n_t), or None
        Normalized measured velocities; ``None`` for simulation only.
    grid : TimeGrid
    geom : PlateGeometry
        Its ``measurement_xs`` must match the measurement's x axis.
    config : ModelConfig
    """

    def __init__(
        self,
        V_meas,
        grid: TimeGrid = TimeGrid(),
        geom: PlateGeometry = PlateGeometry(),
        config: ModelConfig = ModelConfig(),
        material: Material = Material(),
        tractions: TractionSpec = TractionSpec(),
    ):
        nx = len(geom.measurement_xs)
        self.grid = grid
        self.geom = geom
        self.config = config
        self.material = material
        self.tractions = tractions
        self.freq = grid.frequency_grid(config.band, config.zeta)
        self.band = relevant_band(self.freq, *config.band)
        self.omegas = self.freq.omegas[self.band]
        self.V_meas = self.y_meas = self.v_hat_meas = None
        if V_meas is not None:
            self.set_measurement(V_meas)
        self._fixed = None
        self._cache_key = None
        self._cache_val = None

    def set_measurement(self, V_meas) -> None:
        """Attach a normalized ``(2, n_x, 1, n_t)`` measurement; cached model data are kept."""
        V_meas = np.asarray(V_meas, float)
        nx = len(self.geom.measurement_xs)
        if V_meas.shape != (2, nx, 1, self.grid.n_samples):
            raise ValueError(f"measurement shape {V_meas.shape} != {(2, nx, 1, self.grid.n_samples)}")
        self.V_meas = V_meas
        self.y_meas = vec_env(V_meas)
        vh = dlt(V_meas[:, :, 0, :], self.grid, self.freq.zeta).astype(complex)
        self.v_hat_meas = vh.reshape(2 * nx, -1)[:, self.band].T  # (n_band, n_eval)
        self._cache_key = self._cache_val = None

    def objective(self, q) -> float:
        return objective(q, self)

    def evaluate(self, q):
        """Envelope vector and its Jacobian at ``q``."""
        out = forward(q, self, derivatives=True)
        return np.real(out.y_sim.val), out.jacobian

    # -- q-independent block --------------------------------------------------
    def _template(self):
        c = self.config
        band = self.geom.notch_band
        # any admissible q gives the same fixed part and numbering
        q1 = max(self.geom.measurement_xs) + band + 1 * mm
        return build_mesh(
            self.geom, [q1, 0.5 * self.geom.thickness], p=c.p, width=c.width, n_thick=c.n_thick,
            refine=c.refine, sensor_elements=c.sensor_elements,
        )

    def fixed_block(self):
        """Per-frequency condensation of the q-independent elements (computed once)."""
        if self._fixed is not None:
            return self._fixed
        mesh = self._template()
        c = self.config
        model = PlateModel(mesh, self.material, c.cf_order, n_quad=c.n_quad)
        F = assemble_tractions(mesh, self.tractions)
        fixed = np.unique(np.concatenate([e.dofs() for e in mesh.elements if not e.q_dependent]))
        var = np.unique(np.concatenate([e.dofs() for e in mesh.elements if e.q_dependent]))
        gamma = np.intersect1d(fixed, var)
        expect = np.stack([2 * mesh.coupling_nodes, 2 * mesh.coupling_nodes + 1], 1).ravel()
        if not np.array_equal(np.sort(expect), gamma):
            raise RuntimeError("q-dependent region does not attach through the coupling section only")
        interior = np.setdiff1d(fixed, gamma)
        if np.any(F[var][~np.isin(var, gamma)] != 0):
            raise RuntimeError("sensor load inside the q-dependent region")
        meas = mesh.measurement_dofs()
        n = mesh.n_dof
        loc = np.full(n, -1)
        loc[interior] = np.arange(len(interior))
        nI, nG = len(interior), len(gamma)
        gloc = np.full(n, -1)
        gloc[gamma] = np.arange(nG)
        fidx = np.concatenate([interior, gamma])
        fmap = np.full(n, -1)
        fmap[fidx] = np.arange(len(fidx))
        meas_in_I = loc[meas] >= 0

        def one(omega):
            modes = model.modes(omega)
            K = _scatter(model.element_stiffnesses(omega, modes, which=False), fmap, len(fidx), 0).val
            KII, KIG = K[:nI, :nI], K[:nI, nI:]
            KGI, KGG = K[nI:, :nI], K[nI:, nI:]
            lu = sla.lu_factor(KII)
            X = sla.lu_solve(lu, np.hstack([F[interior], KIG]))
            a, B = X[:, :2], -X[:, 2:]
            Sc = KGG + KGI @ B
            fc = F[gamma] - KGI @ a
            rows = loc[meas[meas_in_I]]
            return modes, Sc, fc, a[rows], B[rows]

        threads = _threads()
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                res = list(ex.map(one, self.omegas))
        else:
            res = [one(w) for w in self.omegas]
        modes = [r[0] for r in res]
        self._fixed = dict(
            mesh=mesh, model=model, gamma=gamma, meas=meas, meas_in_I=meas_in_I, gloc=gloc,
            modes=modes, stack=ModalStack.from_modes(model.section_mats, modes),
            Sc=np.stack([r[1] for r in res]), fc=np.stack([r[2] for r in res]),
            am=np.stack([r[3] for r in res]), Bm=np.stack([r[4] for r in res]),
        )
        return self._fixed

    # -- q-dependent block ----------------------------------------------------
    def mesh_for(self, q, derivatives: bool = True):
        c = self.config
        qd = ad.Dual(np.asarray(q, float), np.eye(2) if derivatives else np.zeros((0, 2)))
        return build_mesh(self.geom, qd, p=c.p, width=c.width, n_thick=c.n_thick, refine=c.refine, sensor_elements=c.sensor_elements)

    def simulate(self, q, derivatives: bool = True, chunk: int = 64):
        """Unit-traction velocities at the measurement dofs, ``(n_band, n_eval, 2)`` Dual.

        Frequencies are processed in stacked chunks of ``chunk``.
        """
        fx = self.fixed_block()
        mesh = self.mesh_for(q, derivatives)
        c = self.config
        var_el = [e for e in mesh.elements if e.q_dependent]
        var = np.unique(np.concatenate([e.dofs() for e in var_el]))
        vmap = np.full(mesh.n_dof, -1)
        vmap[var] = np.arange(len(var))
        gam = vmap[fx["gamma"]]
        wgs = [w for w in mesh.waveguides if w.q_dependent]
        pgs = [pg for pg in mesh.polygons if pg.q_dependent]
        cfs = [
            continued_fraction_setup(
                element_matrices(pg.mesh, self.material, "polygon", n_quad=c.n_quad),
                self.material, c.cf_order, x=pg.mesh.x, z=pg.mesh.z,
            )
            for pg in pgs
        ]
        inI = np.flatnonzero(fx["meas_in_I"])
        onG = np.flatnonzero(~fx["meas_in_I"])
        meas_gamma = fx["gloc"][fx["meas"][onG]]
        n_eval = len(fx["meas"])
        nd = mesh.q.nd

        def run(sl):
            omegas = self.omegas[sl]
            nb = len(omegas)
            parts = [(w.dofs(), waveguide_stiffness_batch(fx["stack"].slice(sl), w.length)) for w in wgs]
            parts += [(pg.dofs(), polygon_stiffness_batch(cf, omegas)) for pg, cf in zip(pgs, cfs)]
            S = _scatter(parts, vmap, len(var), nd, batch=nb)
            S.val[:, gam[:, None], gam] += fx["Sc"][sl]
            rhs = np.zeros((nb, len(var), 2), complex)
            rhs[:, gam] = fx["fc"][sl]
            U = ad.bsolve(S, rhs)
            Ug = U[:, gam]
            Um = ad.Dual(np.zeros((nb, n_eval, 2), complex), nd=nd)
            Um[:, inI] = Ug.__rmatmul__(fx["Bm"][sl]) + fx["am"][sl]
            Um[:, onG] = Ug[:, meas_gamma]
            return Um * (1j * omegas * c.response_scale)[:, None, None]

        n = len(self.omegas)
        slices = [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]
        threads = _threads()
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                out = list(ex.map(run, slices))
        else:
            out = [run(sl) for sl in slices]
        return ad.Dual(np.concatenate([o.val for o in out]), np.concatenate([o.der for o in out], axis=1))

    def simulate_full(self, q, derivatives: bool = True):
        """Reference path: full assembly and solve at every band frequency."""
        c = self.config
        mesh = self.mesh_for(q, derivatives)
        model = PlateModel(mesh, self.material, c.cf_order, n_quad=c.n_quad)
        F = assemble_tractions(mesh, self.tractions)
        A = mesh.assignment_matrix()
        out = []
        for omega in self.omegas:
            U = solve_frequency(model.stiffness(omega), F)
            out.append(extract_velocities(U, A, omega) * c.response_scale)
        return ad.stack(out)


def simulate_spectra(q, ctx: ForwardContext, derivatives: bool = False, full: bool = False):
    """Unit-traction velocity spectra over the band, ``(n_band, n_eval, 2)``."""
    return ctx.simulate_full(q, derivatives) if full else ctx.simulate(q, derivatives)


def spectrum_to_time(Y_band, band: np.ndarray, grid: TimeGrid, zeta: float):
    """Inverse transform of in-band spectra ``(n_eval, n_band)`` to real traces.

    Out-of-band bins are zero; the negative-frequency half is the complex
    conjugate of the positive one, so the traces are real.
    """
    n = grid.n_samples
    Y = ad.lift(Y_band)
    nd = Y.nd
    full = np.zeros((nd + 1, Y.shape[0], n), complex)
    full[0][:, band] = Y.val
    full[1:][:, :, band] = Y.der
    mirror = (n - band) % n
    ok = (band > 0) & (mirror != band)
    full[0][:, mirror[ok]] = np.conj(Y.val[:, ok])
    full[1:][:, :, mirror[ok]] = np.conj(Y.der[:, :, ok])
    t = ad.apply_linear(lambda a: np.fft.ifft(a, axis=-1), ad.Dual(full[0], full[1:]))
    w = np.exp(zeta * grid.times)
    return (t * w).real


def _fit_all(Vs, vm, beta):
    """Transfer fits for every band frequency; returns (h, fitted spectra (n_eval, n_band))."""
    hs, fitted = [], []
    for i in range(Vs.shape[0]):
        V = Vs[i]
        h = transfer_fit(V, vm[i], beta)
        hs.append(h)
        fitted.append(V @ h)
    return ad.stack(hs), ad.stack(fitted, axis=1)


def forward(q, ctx: ForwardContext, derivatives: bool = False, full: bool = False) -> ForwardOutput:
    """Envelope vector of the simulated, transfer-fitted measurement.

    With ``derivatives`` the output ``y_sim`` is a Dual whose two directions
    are d/dq1 and d/dq2.
    """
    q = np.asarray(q, float)
    if ctx.v_hat_meas is None:
        raise ValueError("context has no measurement attached")
    key = (tuple(q), derivatives, full)
    if ctx._cache_key == key:
        return ctx._cache_val
    try:
        Vs = simulate_spectra(q, ctx, derivatives, full)
    except Exception as exc:
        raise RuntimeError(f"forward solve failed at q={q.tolist()}: {exc}") from exc
    h, fitted = _fit_all(Vs, ctx.v_hat_meas, ctx.config.beta)
    traces = spectrum_to_time(fitted, ctx.band, ctx.grid, ctx.freq.zeta)
    nx = len(ctx.geom.measurement_xs)
    V_sim = traces.reshape(2, nx, 1, ctx.grid.n_samples)
    env = envelope_t(V_sim)
    y = env.reshape(-1)
    if not derivatives:
        y = y.val
    out = ForwardOutput(
        y_sim=y, V_sim=V_sim.val, h_spectrum=h.val, band_hz=ctx.freq.frequencies_hz[ctx.band], v_hat_sim=fitted
    )
    ctx._cache_key, ctx._cache_val = key, out
    return out


def objective(q, ctx: ForwardContext) -> float:
    """Squared envelope misfit ``||F(q) - y_meas||^2``."""
    y = forward(q, ctx).y_sim
    return float(np.sum((ad.value(y) - ctx.y_meas) ** 2))


def jacobian(q, ctx: ForwardContext) -> np.ndarray:
    """``N_meas x 2`` derivative of the envelope vector with respect to ``q``."""
    return forward(q, ctx, derivatives=True).jacobian


def scan(ctx: ForwardContext, q1s, q2s, progress=None) -> np.ndarray:
    """Objective on the grid ``q1s x q2s``; returns ``(len(q1s), len(q2s))``."""
    out = np.empty((len(q1s), len(q2s)))
    for i, a in enumerate(q1s):
        for j, b in enumerate(q2s):
            out[i, j] = objective((a, b), ctx)
        if progress:
            progress(i + 1, len(q1s))
    return out
