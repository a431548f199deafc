import math

import numpy as np
import pytest
from scipy.linalg import expm

from xnls.errors import ConfigError
from xnls.grid import Grid
import xnls.bloch as bl
import xnls.spectral as sp
from xnls.potentials import lattice_field

from oracles import dense_hamiltonian_1d, project_fiber

W = 2 * math.pi


@pytest.fixture
def grid1():
    # 8 lattice cells across the box, 8 modes per quasimomentum fiber
    return Grid(lengths=(4.0,), counts=(64,))


@pytest.fixture
def table1(grid1):
    return bl.build_band_table(grid1, (W,))


def random_field(grid, rng):
    return rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)


class TestBandTable:
    def test_energies_ascending_and_real(self, table1):
        ax = table1.axes[0]
        assert np.all(np.diff(ax.energies, axis=1) >= -1e-12)
        assert np.isrealobj(ax.energies)

    def test_vectors_orthonormal(self, table1):
        ax = table1.axes[0]
        for j in range(ax.n_cells):
            gram = ax.vectors[j].conj().T @ ax.vectors[j]
            assert np.max(np.abs(gram - np.eye(ax.n_bands))) < 1e-10

    def test_free_lattice_gives_folded_parabolas(self, grid1):
        ax = bl._build_axis_table(grid1, 0, W, diag_shift=0.0, cos_coeff=0.0,
                                  n_bands=None)
        k_fiber = bl._axis_fiber_wavenumbers(grid1, 0, ax.n_cells)
        for j in range(ax.n_cells):
            expected = np.sort(k_fiber[:, j] ** 2)
            assert np.max(np.abs(np.sort(ax.energies[j]) - expected)) < 1e-10

    def test_lowest_band_even_in_quasimomentum(self, table1):
        ax = table1.axes[0]
        for j in range(ax.n_cells):
            mirror = (ax.n_cells - j) % ax.n_cells
            assert ax.energies[j, 0] == pytest.approx(ax.energies[mirror, 0],
                                                      abs=1e-10)

    def test_matches_dense_fiber_restricted_eigensolve(self, grid1, table1):
        # independent path: dense physical-space operator projected onto each
        # quasimomentum fiber, then eigensolved
        v = np.sin(W * grid1.axis_points(0)) ** 2
        dense = dense_hamiltonian_1d(grid1, v)
        ax = table1.axes[0]
        for j in range(ax.n_cells):
            block = project_fiber(grid1, dense, ax.n_cells, j)
            ref = np.linalg.eigvalsh(block)
            assert np.max(np.abs(ref - ax.energies[j])) < 1e-8

    def test_incommensurate_lattice_rejected(self, grid1):
        with pytest.raises(ConfigError):
            bl.build_band_table(grid1, (1.234,))

    def test_epsilon_scales_kinetic_part(self):
        g = Grid(lengths=(4.0,), counts=(64,), epsilon=0.125)
        table = bl.build_band_table(g, (W,))
        v = np.sin(W * g.axis_points(0)) ** 2
        dense = dense_hamiltonian_1d(g, v)
        ax = table.axes[0]
        block = project_fiber(g, dense, ax.n_cells, 3)
        assert np.max(np.abs(np.linalg.eigvalsh(block) - ax.energies[3])) < 1e-10


class TestDecomposition:
    def test_round_trip(self, grid1, table1, rng):
        u = random_field(grid1, rng)
        coeffs = bl.bloch_decompose(grid1, u, table1)
        back = bl.bloch_reconstruct(grid1, coeffs, table1)
        assert np.max(np.abs(back - u)) < 1e-10 * np.max(np.abs(u))

    def test_norm_preserved(self, grid1, table1, rng):
        u = random_field(grid1, rng)
        coeffs = bl.bloch_decompose(grid1, u, table1)
        assert abs(bl.coefficient_norm(grid1, coeffs)
                   - sp.l2_norm(grid1, u)) < 1e-10

    def test_plane_wave_single_coefficient_free_lattice(self, grid1):
        ax = bl._build_axis_table(grid1, 0, W, diag_shift=0.0, cos_coeff=0.0,
                                  n_bands=None)
        table = bl.BlochBandTable(grid=grid1, lattice_freqs=(W,), axes=(ax,))
        x = grid1.axis_points(0)
        k = grid1.axis_wavenumbers(0)[2]  # inside the first Brillouin zone
        u = np.exp(1j * k * x)
        coeffs = np.abs(bl.bloch_decompose(grid1, u, table))
        assert (coeffs > 1e-9 * coeffs.max()).sum() == 1

    def test_truncation_reports_loss(self, grid1, rng):
        table = bl.build_band_table(grid1, (W,), n_bands=2)
        u = random_field(grid1, rng)
        with pytest.warns(bl.BandTruncationWarning):
            bl.bloch_decompose(grid1, u, table)

    def test_3d_round_trip(self, rng):
        g = Grid(lengths=(2.0, 2.0, 2.0), counts=(16, 16, 16))
        table = bl.build_band_table(g, (W, W, W))
        u = random_field(g, rng)
        back = bl.bloch_reconstruct(g, bl.bloch_decompose(g, u, table), table)
        assert np.max(np.abs(back - u)) < 1e-10


class TestBlochStep:
    def test_zero_dt_identity(self, grid1, table1, rng):
        u = random_field(grid1, rng)
        assert np.max(np.abs(bl.bloch_step(grid1, u, 0.0, table1) - u)) < 1e-12

    def test_unitary(self, grid1, table1, rng):
        u = random_field(grid1, rng)
        out = bl.bloch_step(grid1, u, 0.37, table1)
        assert abs(sp.l2_norm(grid1, out) - sp.l2_norm(grid1, u)) < 1e-10

    def test_free_lattice_equals_kinetic(self, grid1, rng):
        ax = bl._build_axis_table(grid1, 0, W, diag_shift=0.0, cos_coeff=0.0,
                                  n_bands=None)
        table = bl.BlochBandTable(grid=grid1, lattice_freqs=(W,), axes=(ax,))
        u = random_field(grid1, rng)
        a = bl.bloch_step(grid1, u, 0.21, table)
        b = sp.kinetic_propagate(grid1, u, 0.21)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_band_eigenfunction_gets_pure_phase(self, grid1, table1):
        ax = table1.axes[0]
        j, m = 3, 2
        modes = np.zeros((ax.n_modes, ax.n_cells), dtype=complex)
        modes[:, j] = ax.vectors[j][:, m]
        phi = sp.fft_inverse(grid1, modes.reshape(grid1.counts[0]))
        out = bl.bloch_step(grid1, phi, 0.5, table1)
        expected = phi * np.exp(-1j * ax.energies[j, m] * 0.5)
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_matches_dense_exponential(self, grid1, table1, rng):
        v = np.sin(W * grid1.axis_points(0)) ** 2
        dense = dense_hamiltonian_1d(grid1, v)
        dt = 0.11
        u = random_field(grid1, rng)
        ref = expm(-1j * dt * dense) @ u
        out = bl.bloch_step(grid1, u, dt, table1)
        assert np.max(np.abs(out - ref)) < 1e-10

    def test_shifted_step_matches_conjugated_dense_exponential(self, grid1,
                                                               table1, rng):
        v = np.sin(W * grid1.axis_points(0)) ** 2
        dense = dense_hamiltonian_1d(grid1, v)
        n = grid1.counts[0]
        k = grid1.axis_wavenumbers(0)
        f_mat = np.fft.fft(np.eye(n), axis=0)
        translate = lambda s: np.fft.ifft(np.exp(1j * k[:, None] * s) * f_mat,
                                          axis=0)
        b, dt = 0.3, 0.11
        ref_op = translate(-b) @ expm(-1j * dt * dense) @ translate(b)
        u = random_field(grid1, rng)
        out = bl.bloch_step(grid1, u, dt, table1, shift_b=(b,))
        assert np.max(np.abs(ref_op @ u - out)) < 1e-10

    def test_shifted_step_matches_sampled_potential_on_smooth_field(self, grid1,
                                                                    table1):
        # pointwise-sampled translated lattice: agrees up to aliasing, which is
        # negligible for a resolved field
        b, dt = 0.3, 0.11
        v = lattice_field(grid1, (W,), offset=(b,))
        dense = dense_hamiltonian_1d(grid1, v)
        x = grid1.axis_points(0)
        u = np.exp(-4 * x ** 2).astype(complex)
        ref = expm(-1j * dt * dense) @ u
        out = bl.bloch_step(grid1, u, dt, table1, shift_b=(b,))
        assert np.max(np.abs(ref - out)) < 1e-9


class TestExport:
    def test_band_csv(self, tmp_path, table1):
        path = tmp_path / "bands.csv"
        bl.write_band_csv(table1, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "axis,k,band,energy"
        ax = table1.axes[0]
        assert len(lines) == 1 + ax.n_cells * ax.n_bands
