import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from gwnotch.forward import ForwardContext, ModelConfig  # noqa: E402
from gwnotch.geometry import PlateGeometry  # noqa: E402
from gwnotch.io import RunConfig, synth_measurement  # noqa: E402
from gwnotch.signal import TimeGrid  # noqa: E402

mm = 1e-3
NARROW = (420e3, 580e3)


@pytest.fixture(scope="session")
def narrow_ctx():
    """p=6 model over a narrow band, fitted to its own output at q = (1, 0.6) mm."""
    cfg = ModelConfig(band=NARROW)
    ctx = ForwardContext(None, TimeGrid(), PlateGeometry(), cfg)
    run = RunConfig(model=cfg, synth_model=cfg)
    ctx.q_true = np.array([1 * mm, 0.6 * mm])
    ctx.set_measurement(synth_measurement(ctx.q_true, run, ctx=ctx).V)
    return ctx


@pytest.fixture(scope="session")
def full_ctx():
    """Default p=6 model with p=8 synthetic data at q* = (0, 0.8) mm."""
    run = RunConfig()
    ctx = ForwardContext(None, run.grid, run.geometry, run.model)
    ctx.q_true = np.array([0.0, 0.8 * mm])
    ctx.set_measurement(synth_measurement(ctx.q_true, run).V)
    return ctx


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line; printed again in the terminal summary."""

    def _add(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} {name}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return _add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
