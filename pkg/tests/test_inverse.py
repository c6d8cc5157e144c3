import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwnotch.inverse import ParameterBox, irgnm, jacobian, multistart, reconstruct

mm = 1e-3


class LinearModel:
    """F(q) = A q + b with a known minimizer."""

    def __init__(self, A, q_true, noise=None):
        self.A = np.asarray(A, float)
        self.b = np.arange(self.A.shape[0], dtype=float)
        self.y_meas = self.A @ q_true + self.b + (0 if noise is None else noise)
        self.calls = 0

    def evaluate(self, q):
        self.calls += 1
        return self.A @ q + self.b, self.A

    def objective(self, q):
        r = self.evaluate(q)[0] - self.y_meas
        return float(r @ r)


def test_linear_model_one_step():
    rng = np.random.default_rng(0)
    q_true = np.array([3 * mm, 0.5 * mm])
    m = LinearModel(rng.normal(size=(40, 2)), q_true)
    res = irgnm(np.array([-20 * mm, 1.0 * mm]), m, box=ParameterBox())
    assert np.allclose(res.trajectory[1][0], q_true, rtol=0, atol=1e-15)
    assert res.converged and res.iterations == 2
    assert np.array_equal(jacobian(q_true, m), m.A)


def test_regularized_step_with_zero_jacobian():
    """With alpha > 0 and J = 0 the step lands exactly on q0."""

    class Blind(LinearModel):
        def evaluate(self, q):
            y, A = super().evaluate(q)
            return y, (A if self.calls == 1 else np.zeros_like(A))

    q0 = np.array([1 * mm, 0.5 * mm])
    m = Blind(np.eye(2), np.array([3 * mm, 0.9 * mm]))
    res = irgnm(q0, m, alphas=[0.0, 1.0], n_max=2)
    assert np.allclose(res.trajectory[1][0], [3 * mm, 0.9 * mm])
    assert np.array_equal(res.q_min, q0)


def test_singular_fallback_recorded():
    A = np.zeros((6, 2))
    A[:, 0] = 1.0  # q2 invisible
    m = LinearModel(A, np.array([1 * mm, 0.5 * mm]))
    res = irgnm(np.array([0.0, 0.3 * mm]), m, n_max=3)
    assert 1 in res.regularized_steps
    assert res.q_min[0] == pytest.approx(1 * mm, abs=1e-12)
    assert np.all(np.isfinite(res.q_min))


def test_projection_onto_box():
    m = LinearModel(np.eye(2) * 1e3, np.array([80 * mm, 0.5 * mm]))
    box = ParameterBox()
    res = irgnm(np.array([0.0, 0.5 * mm]), m, box=box)
    assert box.contains(res.q_min)
    assert res.q_min[0] == pytest.approx(40 * mm)


def test_start_outside_box_rejected():
    m = LinearModel(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        irgnm(np.array([0.0, 5 * mm]), m, box=ParameterBox())


def test_box_validation():
    with pytest.raises(ValueError):
        ParameterBox((0, 1), (0, 2))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_box_projection_idempotent(a, b):
    box = ParameterBox()
    q = np.array([a * 0.1, b * 1e-2])
    p = box.project(q)
    assert box.contains(p)
    assert np.array_equal(box.project(p), p)


def test_multistart():
    rng = np.random.default_rng(1)
    q_true = np.array([5 * mm, 0.6 * mm])
    m = LinearModel(rng.normal(size=(10, 2)), q_true)
    box = ParameterBox()
    q0, qs, vals = multistart(m, box, n=1, seed=3)
    assert np.array_equal(q0, qs[0])
    q0, qs, vals = multistart(m, box, n=100, seed=3)
    assert len(qs) == 100 and np.array_equal(q0, qs[np.argmin(vals)])
    assert all(box.contains(q) for q in qs)
    with pytest.raises(ValueError):
        multistart(m, box, n=0)


def test_multistart_skips_failures():
    class Flaky(LinearModel):
        def objective(self, q):
            if q[0] > 0:
                raise RuntimeError("solver failure")
            return super().objective(q)

    m = Flaky(np.eye(2), np.zeros(2))
    q0, qs, vals = multistart(m, n=20, seed=0)
    assert q0[0] <= 0 and np.isinf(vals[qs[:, 0] > 0]).all()


def test_reconstruct_deterministic():
    rng = np.random.default_rng(2)
    q_true = np.array([-12 * mm, 0.9 * mm])
    A = rng.normal(size=(30, 2))
    a = reconstruct(LinearModel(A, q_true), seed=7, n_starts=20)
    b = reconstruct(LinearModel(A, q_true), seed=7, n_starts=20)
    assert np.array_equal(a.q_min, b.q_min)
    assert all(np.array_equal(u[0], v[0]) and u[1] == v[1] for u, v in zip(a.trajectory, b.trajectory))
    assert np.allclose(a.q_min, q_true, atol=1e-12)
    text = a.record()
    assert "q1_m = " in text and "converged = true" in text


def test_irgnm_on_plate(narrow_ctx):
    """Gauss-Newton from a nearby start recovers the data-generating notch."""
    q_true = narrow_ctx.q_true
    res = irgnm(q_true + np.array([0.4 * mm, 0.08 * mm]), narrow_ctx, box=ParameterBox())
    assert res.converged and res.iterations <= 25
    assert np.all(np.abs(res.q_min - q_true) <= 1e-3 * mm)
