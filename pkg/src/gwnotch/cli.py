"""Command line entry point: ``gwnotch <subcommand> ...``.

Numerical outputs are CSV files with a one-line header.  Errors go to
standard error with a nonzero exit status.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .forward import ForwardContext, ModelConfig, forward, scan
from .geometry import Material, PlateGeometry, element_matrices, rectangle_polygon
from .inverse import ParameterBox, reconstruct
from .io import RunConfig, read_container, synth_measurement, write_container
from .polygon import riccati_static_stiffness
from .signal import TimeGrid, dlt, idlt
from .waveguide import dispersion_curves, write_dispersion_csv

mm = 1e-3
log = logging.getLogger("gwnotch")


def _pair_mm(text):
    vals = [float(v) * mm for v in text.split(",")]
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated values in mm")
    return np.array(vals)


def _box_mm(text):
    vals = [float(v) * mm for v in text.split(",")]
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("expected q1_lo,q1_hi,q2_lo,q2_hi in mm")
    return ParameterBox((vals[0], vals[2]), (vals[1], vals[3]))


def _model_args(p):
    p.add_argument("--p", type=int, default=6, help="polynomial degree of boundary elements")
    p.add_argument("--order", type=int, default=None, help="continued-fraction order (default: p)")
    p.add_argument("--beta", type=float, default=1e-9, help="transfer-fit regularization")
    p.add_argument("--fmin", type=float, default=10e3, help="lower band edge in Hz")
    p.add_argument("--fmax", type=float, default=1.5e6, help="upper band edge in Hz")


def _model_config(args) -> ModelConfig:
    return ModelConfig(p=args.p, order=args.order, beta=args.beta, band=(args.fmin, args.fmax))


def _context(args):
    ms = read_container(args.measurement)
    g = ms.geometry or {}
    base = PlateGeometry()
    geom = PlateGeometry(
        x_min=g.get("x_min", base.x_min),
        x_max=g.get("x_max", base.x_max),
        thickness=g.get("thickness", base.thickness),
        sensor_span=tuple(g.get("sensor_span", base.sensor_span)),
        measurement_xs=tuple(ms.x_coords),
        notch_band=g.get("notch_band", base.notch_band),
    )
    return ms, ForwardContext(ms.V, ms.grid, geom, _model_config(args))


def cmd_dispersion(args):
    geom = PlateGeometry()
    from .geometry import build_mesh

    mesh = build_mesh(geom, [0.0, 0.5 * geom.thickness], p=args.p)
    freqs = np.linspace(args.fmin, args.fmax, args.n)
    rows = dispersion_curves(mesh.section, Material(), freqs)
    write_dispersion_csv(rows, args.out)
    return 0


def cmd_synth(args):
    cfg = RunConfig()
    ms = synth_measurement(args.q, cfg, args.noise, args.seed, n_y=args.ny)
    write_container(ms, args.out)
    return 0


def cmd_forward(args):
    ms, ctx = _context(args)
    out = forward(args.q, ctx)
    V = np.real(out.V_sim)
    env = np.asarray(out.y_sim).reshape(V.shape)
    env_meas = ctx.y_meas.reshape(out.V_sim.shape)
    t = ctx.grid.times
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "x_m", "t_s", "v_sim", "env_sim", "v_meas", "env_meas"])
        for c in range(2):
            for i, x in enumerate(ms.x_coords):
                for j in range(len(t)):
                    w.writerow([c, repr(float(x)), repr(float(t[j])), repr(float(V[c, i, 0, j])),
                                repr(float(env[c, i, 0, j])), repr(float(ctx.V_meas[c, i, 0, j])), repr(float(env_meas[c, i, 0, j]))])
    return 0


def cmd_scan(args):
    _, ctx = _context(args)
    box = args.box
    q1s = np.linspace(box.lo[0], box.hi[0], args.n1)
    q2s = np.linspace(box.lo[1], box.hi[1], args.n2)
    vals = scan(ctx, q1s, q2s, progress=lambda i, n: log.info("scan row %d/%d", i, n))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q1", "q2", "value"])
        for i, a in enumerate(q1s):
            for j, b in enumerate(q2s):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(vals[i, j]))])
    return 0


def cmd_reconstruct(args):
    _, ctx = _context(args)
    alphas = None if args.alpha0 == 0 else (lambda n: args.alpha0 / (n + 1))
    res = reconstruct(ctx, args.box, seed=args.seed, n_starts=args.starts, alphas=alphas, eps=args.eps, n_max=args.max_iter)
    with open(args.out + ".txt", "w") as fh:
        fh.write(res.record())
    with open(args.out + "_trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "q1", "q2", "objective"])
        for i, (q, v) in enumerate(res.trajectory):
            w.writerow([i, repr(float(q[0])), repr(float(q[1])), repr(float(v))])
    return 0


def cmd_selftest(args):
    ok = True
    grid = TimeGrid()
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, grid.n_samples))
    err = np.max(np.abs(np.real(idlt(dlt(x, grid), grid)) - x)) / np.max(np.abs(x))
    ok &= _report("transform round trip", err, 1e-12)

    mat = Material()
    pm = rectangle_polygon(2 * mm, 2 * mm, args.p)
    E0, E1, E2, _ = element_matrices(pm, mat, "polygon").values()
    S0 = riccati_static_stiffness(E0, E1, E2).val
    res = np.abs((S0 - E1) @ np.linalg.solve(E0, S0 - E1.T) - E2).max() / np.abs(E2).max()
    ok &= _report("static stiffness residual", res, 1e-8)

    cfg = RunConfig(model=ModelConfig(p=args.p, band=(420e3, 580e3)), synth_model=ModelConfig(p=args.p, band=(420e3, 580e3)))
    ctx = ForwardContext(None, cfg.grid, cfg.geometry, cfg.model)
    q = np.array([1 * mm, 0.6 * mm])
    ctx.set_measurement(synth_measurement(q + [0.5 * mm, 0.1 * mm], cfg, ctx=ctx).V)
    J = forward(q, ctx, derivatives=True).jacobian
    worst = 0.0
    for k in range(2):
        best = np.inf
        for h in (1e-6, 1e-7):
            e = np.zeros(2)
            e[k] = h
            fd = (forward(q + e, ctx).y_sim - forward(q - e, ctx).y_sim) / (2 * h)
            best = min(best, np.linalg.norm(fd - J[:, k]) / np.linalg.norm(fd))
        worst = max(worst, best)
    ok &= _report("gradient check", worst, 1e-4)
    return 0 if ok else 1


def _report(name, value, tol) -> bool:
    good = bool(value <= tol)
    print(f"{'PASS' if good else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})")
    return good


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gwnotch", description="Guided-wave notch sizing in plates.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", help="propagating Lamb modes of the plate cross-section")
    p.add_argument("--fmin", type=float, default=10e3)
    p.add_argument("--fmax", type=float, default=1.5e6)
    p.add_argument("--n", type=int, default=150, help="number of frequencies")
    p.add_argument("--p", type=int, default=6)
    p.add_argument("--out", default="/dev/stdout")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("synth", help="write a synthetic measurement container")
    p.add_argument("--q", type=_pair_mm, required=True, help="q1,q2 in mm")
    p.add_argument("--noise", type=float, default=0.0, help="noise RMS as a fraction of the peak envelope")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ny", type=int, default=1, help="number of repeated y lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("forward", help="simulated traces and envelopes for one q")
    p.add_argument("--measurement", required=True)
    p.add_argument("--q", type=_pair_mm, required=True, help="q1,q2 in mm")
    p.add_argument("--out", required=True)
    _model_args(p)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("scan", help="objective on a parameter grid")
    p.add_argument("--measurement", required=True)
    p.add_argument("--box", type=_box_mm, default=ParameterBox(), help="q1_lo,q1_hi,q2_lo,q2_hi in mm (write --box=-40,40,0.1,1.1)")
    p.add_argument("--n1", type=int, default=161)
    p.add_argument("--n2", type=int, default=21)
    p.add_argument("--out", required=True)
    _model_args(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("reconstruct", help="multistart plus Gauss-Newton reconstruction")
    p.add_argument("--measurement", required=True)
    p.add_argument("--box", type=_box_mm, default=ParameterBox(), help="q1_lo,q1_hi,q2_lo,q2_hi in mm (write --box=-40,40,0.1,1.1)")
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha0", type=float, default=0.0, help="regularization alpha0/(n+1) at step n = 0, 1, ...; 0 disables it")
    p.add_argument("--eps", type=float, default=1e-7, help="step-norm stopping tolerance in m")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--out", required=True, help="output prefix")
    _model_args(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("selftest", help="transform, static stiffness and gradient checks")
    p.add_argument("--p", type=int, default=6)
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"gwnotch {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
