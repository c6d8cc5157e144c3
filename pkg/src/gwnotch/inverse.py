"""Multistart initialization and iteratively regularized Gauss-Newton.

Any object with a ``y_meas`` vector, an ``objective(q)`` method and an
``evaluate(q) -> (y, J)`` method can be inverted; :class:`ForwardContext`
is the main one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParameterBox",
    "ReconstructionResult",
    "multistart",
    "irgnm",
    "reconstruct",
    "jacobian",
]

log = logging.getLogger(__name__)
mm = 1e-3


@dataclass(frozen=True)
class ParameterBox:
    """Axis-aligned bounds for ``q = (q1, q2)`` in metres."""

    lo: tuple = (-40 * mm, 0.1 * mm)
    hi: tuple = (40 * mm, 1.1 * mm)

    def __post_init__(self):
        if not np.all(np.asarray(self.lo, float) < np.asarray(self.hi, float)):
            raise ValueError(f"need lo < hi componentwise, got {self.lo}, {self.hi}")

    def project(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, float), self.lo, self.hi)

    def contains(self, q) -> bool:
        q = np.asarray(q, float)
        return bool(np.all(q >= self.lo) and np.all(q <= self.hi))

    def sample(self, n: int, rng) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, len(self.lo)))


@dataclass
class ReconstructionResult:
    q_min: np.ndarray
    iterations: int
    trajectory: list
    converged: bool
    q0: np.ndarray | None = None
    regularized_steps: list = field(default_factory=list)
    starts: np.ndarray | None = None
    start_values: np.ndarray | None = None

    def record(self) -> str:
        """Plain ``key = value`` text record."""
        lines = [
            f"q1_m = {float(self.q_min[0])!r}",
            f"q2_m = {float(self.q_min[1])!r}",
            f"iterations = {self.iterations}",
            f"converged = {str(self.converged).lower()}",
        ]
        if self.q0 is not None:
            lines += [f"q0_q1_m = {float(self.q0[0])!r}", f"q0_q2_m = {float(self.q0[1])!r}"]
        lines.append(f"regularized_steps = {','.join(map(str, self.regularized_steps))}")
        lines.append(f"final_objective = {float(self.trajectory[-1][1])!r}")
        return "\n".join(lines) + "\n"


def jacobian(q, ctx) -> np.ndarray:
    return ctx.evaluate(q)[1]


def multistart(ctx, box: ParameterBox = ParameterBox(), n: int = 100, seed: int = 0):
    """Best of ``n`` uniformly sampled parameter vectors.

    Returns ``(q0, samples, values)``; samples whose forward run fails get
    ``inf``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    qs = box.sample(n, rng)
    vals = np.full(n, np.inf)
    for i, q in enumerate(qs):
        try:
            vals[i] = ctx.objective(q)
        except Exception as exc:  # a failed sample is skipped, not fatal
            log.warning("multistart sample %s failed: %s", q, exc)
    if not np.any(np.isfinite(vals)):
        raise RuntimeError("every multistart sample failed")
    return qs[int(np.argmin(vals))].copy(), qs, vals


def irgnm(q0, ctx, alphas=None, eps: float = 1e-7, n_max: int = 50, box: ParameterBox | None = None) -> ReconstructionResult:
    """Iteratively regularized Gauss-Newton iteration.

    ``q <- q + (J^T J + a_n I)^{-1} (J^T (y_meas - F(q)) + a_n (q0 - q))``,
    projected onto ``box``, until the step is shorter than ``eps``.  With
    ``a_n = 0`` and a singular normal matrix the step uses
    ``a_n = 1e-12 trace(J^T J)`` instead; such steps are recorded.

    Parameters
    ----------
    alphas : sequence or callable, optional
        Nonincreasing nonnegative ``a_n``; zero by default.
    """
    q0 = np.asarray(q0, float)
    if box is not None:
        if not box.contains(q0):
            raise ValueError("start point outside the parameter box")
    if alphas is None:
        alpha = lambda n: 0.0
    elif callable(alphas):
        alpha = alphas
    else:
        seq = list(alphas)
        alpha = lambda n: seq[min(n, len(seq) - 1)]
    q = q0.copy()
    traj = []
    regs = []
    converged = False
    it = 0
    y_meas = np.asarray(ctx.y_meas)
    for it in range(1, n_max + 1):
        y, J = ctx.evaluate(q)
        r = y_meas - y
        traj.append((q.copy(), float(r @ r)))
        a = float(alpha(it - 1))
        N = J.T @ J
        rhs = J.T @ r + a * (q0 - q)
        A = N + a * np.eye(len(q))
        if np.linalg.cond(A) > 1e14:
            a_fb = 1e-12 * max(np.trace(N), np.finfo(float).tiny)
            A = N + a_fb * np.eye(len(q))
            regs.append(it)
        step = np.linalg.solve(A, rhs)
        q_new = q + step
        if box is not None:
            q_new = box.project(q_new)
        moved = np.linalg.norm(q_new - q)
        q = q_new
        log.info("irgnm %d: q=%s obj=%.6e step=%.3e", it, q, traj[-1][1], moved)
        if moved < eps:
            converged = True
            break
    y, _ = ctx.evaluate(q) if not converged else (None, None)
    if y is not None:
        traj.append((q.copy(), float(np.sum((y_meas - y) ** 2))))
    else:
        traj.append((q.copy(), float(ctx.objective(q))))
    return ReconstructionResult(q_min=q, iterations=it, trajectory=traj, converged=converged, q0=q0, regularized_steps=regs)


def reconstruct(ctx, box: ParameterBox = ParameterBox(), seed: int = 0, n_starts: int = 100, alphas=None, eps: float = 1e-7, n_max: int = 50) -> ReconstructionResult:
    """Multistart followed by IRGNM from the best sample."""
    q0, qs, vals = multistart(ctx, box, n_starts, seed)
    res = irgnm(q0, ctx, alphas=alphas, eps=eps, n_max=n_max, box=box)
    res.starts, res.start_values = qs, vals
    return res
