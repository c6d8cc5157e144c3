import time

import numpy as np
import pytest

from gwnotch import dual as ad
from gwnotch.geometry import Material, PlateGeometry, build_mesh
from gwnotch.lamb import lamb_wavenumbers
from gwnotch.signal import TimeGrid
from gwnotch.waveguide import (
    ModalStack,
    cutoff_frequencies,
    dispersion_curves,
    section_matrices,
    solve_modes,
    waveguide_stiffness,
    waveguide_stiffness_batch,
    write_dispersion_csv,
)

mm = 1e-3
MAT = Material()
SECTION = build_mesh(PlateGeometry(), [0.0, 0.8 * mm]).section
MATS = section_matrices(SECTION, MAT)
OMEGA = 2 * np.pi * 500e3 - 1j * TimeGrid().zeta


def _residuals(mats, modes):
    E0, E1, E2, M0 = mats
    out = []
    for k, psi in zip(modes.k, modes.psi.T):
        lam = 1j * k
        r = (E0 * lam**2 + (E1.T - E1) * lam - E2 + modes.omega**2 * M0) @ psi
        scale = abs(lam) ** 2 * np.abs(E0).max() + abs(lam) * np.abs(E1).max() + np.abs(E2).max() + abs(modes.omega) ** 2 * np.abs(M0).max()
        out.append(np.linalg.norm(r) / scale)
    return np.array(out)


def test_pencil_size_and_residual():
    modes = solve_modes(MATS, OMEGA)
    assert len(modes.k) == 28
    assert np.allclose(np.linalg.norm(modes.psi, axis=0), 1.0)
    assert _residuals(MATS, modes).max() <= 1e-8


def test_residuals_random_frequencies():
    rng = np.random.default_rng(0)
    zeta = TimeGrid().zeta
    worst = max(_residuals(MATS, solve_modes(MATS, 2 * np.pi * f - 1j * zeta)).max() for f in rng.uniform(10e3, 1.5e6, 50))
    assert worst <= 1e-8


def test_real_frequency_spectrum_symmetric():
    k = solve_modes(MATS, 2 * np.pi * 300e3).k
    dist = np.abs(k[:, None] + k[None, :]).min(axis=1)
    assert dist.max() <= 1e-8 * np.abs(k).max()


def test_partition_decays():
    modes = solve_modes(MATS, OMEGA)
    kl, _, kr, _ = modes.split()
    assert len(kl) == len(kr) == 14
    L = 1 * mm
    assert np.all(np.abs(np.exp(1j * kl * L)) < 1)
    assert np.all(np.abs(np.exp(-1j * kr * L)) < 1)


@pytest.mark.parametrize("L", [0.5 * mm, 10 * mm, 130 * mm])
def test_symmetry_and_splitting(L):
    modes = solve_modes(MATS, OMEGA)
    S = waveguide_stiffness(MATS, modes, L).val
    assert np.abs(S - S.T).max() <= 1e-10 * np.abs(S).max()
    H = waveguide_stiffness(MATS, modes, L / 2).val
    n = 14
    # assemble two halves and condense the middle section
    K = np.zeros((3 * n, 3 * n), complex)
    K[: 2 * n, : 2 * n] += H
    K[n:, n:] += H
    o = np.r_[0:n, 2 * n : 3 * n]
    i = np.r_[n : 2 * n]
    C = K[np.ix_(o, o)] - K[np.ix_(o, i)] @ np.linalg.solve(K[np.ix_(i, i)], K[np.ix_(i, o)])
    assert np.linalg.norm(C - S) <= 1e-8 * np.linalg.norm(S)


def test_length_derivative():
    modes = solve_modes(MATS, OMEGA)
    L = ad.Dual(7 * mm, np.array([1.0]))
    S = waveguide_stiffness(MATS, modes, L)
    h = 1e-9
    fd = (waveguide_stiffness(MATS, modes, 7 * mm + h).val - waveguide_stiffness(MATS, modes, 7 * mm - h).val) / (2 * h)
    assert np.linalg.norm(S.der[0] - fd) <= 1e-6 * np.linalg.norm(fd)


def test_batch_matches_single():
    omegas = [OMEGA, OMEGA + 2 * np.pi * 100e3]
    modes = [solve_modes(MATS, w) for w in omegas]
    stack = ModalStack.from_modes(MATS, modes)
    L = ad.Dual(5 * mm, np.array([1.0, 0.5]))
    B = waveguide_stiffness_batch(stack, L)
    for i, m in enumerate(modes):
        S = waveguide_stiffness(MATS, m, L)
        assert np.allclose(B.val[i], S.val, rtol=1e-12, atol=1e-12 * np.abs(S.val).max())
        assert np.allclose(B.der[:, i], S.der, rtol=1e-10, atol=1e-10 * np.abs(S.der).max())


def test_cost_independent_of_length():
    modes = solve_modes(MATS, OMEGA)

    def clock(L):
        t = time.perf_counter()
        for _ in range(50):
            waveguide_stiffness(MATS, modes, L)
        return time.perf_counter() - t

    clock(1 * mm)
    short, long_ = min(clock(10 * mm) for _ in range(3)), min(clock(130 * mm) for _ in range(3))
    assert 0.5 < long_ / short < 2.0


def _wavelengths(f):
    rows = dispersion_curves(SECTION, MAT, [f])
    return {r.mode_label: r.wavelength_m for r in rows}


def test_reference_wavelengths_500khz():
    lam = _wavelengths(500e3)
    assert lam["A0"] == pytest.approx(4.6 * mm, rel=0.02)
    assert lam["S0"] == pytest.approx(10.4 * mm, rel=0.02)
    # frozen values of this discretization
    assert lam["A0"] == pytest.approx(4.6139e-3, rel=1e-4)
    assert lam["S0"] == pytest.approx(10.4154e-3, rel=1e-4)


def test_against_rayleigh_lamb():
    worst = 0.0
    for f in np.linspace(100e3, 1e6, 10):
        lam = _wavelengths(f)
        for fam in "AS":
            k = lamb_wavenumbers(f, MAT.cl, MAT.cs, 2 * mm, fam)[0]
            worst = max(worst, abs(lam[fam + "0"] - 2 * np.pi / k) / (2 * np.pi / k))
    assert worst <= 0.01


def test_only_fundamental_modes_below_a1_cutoff():
    cut = cutoff_frequencies(SECTION, MAT)
    f_a1 = cut[cut > 1e3][0]
    # first antisymmetric thickness-shear cutoff of a 2 mm plate: cs / (2 h)
    assert f_a1 == pytest.approx(MAT.cs / (2 * 2 * mm), rel=1e-4)
    assert f_a1 == pytest.approx(780.1e3, rel=1e-3)
    for f in (200e3, 0.95 * f_a1):
        assert sorted(_wavelengths(f)) == ["A0", "S0"]
    assert "A1" in _wavelengths(1.05 * f_a1)


def test_dispersion_csv(tmp_path):
    rows = dispersion_curves(SECTION, MAT, np.linspace(100e3, 1.5e6, 8))
    path = tmp_path / "d.csv"
    write_dispersion_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "frequency_hz,mode_label,wavelength_m,re_k,im_k"
    f = [float(line.split(",")[0]) for line in lines[1:]]
    assert f == sorted(f)
