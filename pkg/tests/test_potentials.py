import math

import numpy as np
import pytest
from scipy.special import j0

from xnls.errors import ConfigError
from xnls.grid import Grid
import xnls.potentials as pot

from oracles import (averaged_coulomb_adaptive, mollified_coulomb_quadrature,
                     step_integral_adaptive)


@pytest.fixture
def grid3():
    return Grid.cubic(16, 16.0, dim=3)


class TestShiftLaw:
    def test_constant_drive_at_zero(self):
        s = pot.ShiftSpec(e0=(0, 0, 1), omega=5.0)
        assert np.allclose(pot.b_of_t(s, 0.0), 0.0)

    def test_quarter_period(self):
        s = pot.ShiftSpec(e0=(0, 0, 1), omega=5.0)
        assert np.allclose(pot.b_of_t(s, 0.05), (0, 0, 1), atol=1e-12)

    def test_sinusoidal_drive_node(self):
        s = pot.ShiftSpec(e0=(-1, -1, -1), omega=100.0, e_law="sinusoidal")
        # e(0.25) = e0, but sin(2*pi*100*0.25) = sin(50*pi) = 0
        assert np.max(np.abs(pot.b_of_t(s, 0.25))) < 1e-11

    def test_fast_kind_needs_omega(self):
        with pytest.raises(ConfigError):
            pot.PotentialSpec(kind="fast_coulomb", c=1.0,
                              shift=pot.ShiftSpec(e0=(0, 0, 1), omega=0.0))


class TestMollifiedCoulomb:
    def test_far_field_is_coulomb(self):
        # erf saturates: at r=1, eta=0.01 the kernel equals 1/r to machine eps
        assert pot.mollified_coulomb_at((1, 0, 0), (0, 0, 0), 1.0, 0.01) == \
            pytest.approx(1.0, abs=1e-14)

    def test_center_limit(self):
        assert pot.mollified_coulomb_at((0, 0, 0), (0, 0, 0), 1.0, 2.0) == \
            pytest.approx(2.0, rel=1e-13)

    def test_zero_strength(self, grid3):
        v = pot.mollified_coulomb_field(grid3, (0, 0, 0), 0.0, 0.1)
        assert np.all(v == 0.0)

    def test_matches_convolution_quadrature(self, rng):
        for _ in range(20):
            r0 = 10 ** rng.uniform(-1.2, 0.8)
            eta = 10 ** rng.uniform(-2.5, 0.3)
            closed = float(pot.mollified_coulomb_radial(r0, 1.0, eta))
            direct = mollified_coulomb_quadrature(r0, eta)
            assert closed == pytest.approx(direct, rel=1e-8)

    def test_rejects_nonpositive_eta(self):
        with pytest.raises(ConfigError):
            pot.mollified_coulomb_at((1, 0, 0), (0, 0, 0), 1.0, -1.0)


class TestAveragedCoulomb:
    def test_zero_drive_is_static_coulomb(self, grid3):
        v = pot.averaged_coulomb_field(grid3, (0, 0, 0), 1.0, 0.05, n_quad=32)
        ref = pot.mollified_coulomb_field(grid3, (0, 0, 0), 1.0, 0.05)
        assert np.max(np.abs(v - ref)) < 1e-13

    def test_on_axis_closed_form(self):
        # on the drive axis at distance 2 with |e|=1 the sharp-kernel average
        # is Int ds/(2 - sin) = 1/sqrt(3)
        g = Grid.cubic(8, 16.0, dim=3)
        v = pot.averaged_coulomb_field(g, (0, 0, 1.0), 1.0, 1e-8, n_quad=512)
        iz = 4 + int(round(2.0 / g.spacing[2]))
        assert v[4, 4, iz] == pytest.approx(1.0 / math.sqrt(3), abs=1e-6)

    def test_far_field(self, grid3):
        v = pot.averaged_coulomb_field(grid3, (0, 0, 1.0), 1.0, 0.01, n_quad=64)
        ix = 8 + int(round(6.0 / grid3.spacing[0]))
        assert v[ix, 8, 8] == pytest.approx(1.0 / 6.0, rel=0.02)

    def test_matches_adaptive_quadrature(self):
        g = Grid.cubic(8, 16.0, dim=3)
        v = pot.averaged_coulomb_field(g, (0, 0, 1.0), 1.0, 0.04, n_quad=128)
        x = (g.axis_points(0)[5], g.axis_points(1)[2], g.axis_points(2)[6])
        ref = averaged_coulomb_adaptive(x, (0, 0, 1.0), 1.0, 0.04)
        assert v[5, 2, 6] == pytest.approx(ref, rel=1e-8)

    def test_even_in_drive(self, grid3):
        a = pot.averaged_coulomb_field(grid3, (0.4, -0.3, 1.0), 1.0, 0.05)
        b = pot.averaged_coulomb_field(grid3, (-0.4, 0.3, -1.0), 1.0, 0.05)
        assert np.max(np.abs(a - b)) < 1e-13

    def test_reflection_symmetry_across_drive_normal_plane(self, grid3):
        # drive along z: reflecting z -> -z maps the field to itself
        v = pot.averaged_coulomb_field(grid3, (0, 0, 1.0), 1.0, 0.05)
        flipped = np.roll(v[:, :, ::-1], 1, axis=2)
        assert np.max(np.abs(v - flipped)) < 1e-12

    def test_rejects_small_n_quad(self, grid3):
        with pytest.raises(ConfigError):
            pot.averaged_coulomb_field(grid3, (0, 0, 1), 1.0, 0.05, n_quad=8)


class TestTrap:
    def test_zero_drive_average_equals_trap(self, grid3):
        assert np.allclose(pot.averaged_trap_field(grid3, 50.0, (0, 0, 0)),
                           pot.trap_field(grid3, 50.0))

    def test_averaged_value_at_origin(self, grid3):
        v = pot.averaged_trap_field(grid3, 50.0, (0, 0, 1.0))
        assert v[8, 8, 8] == pytest.approx(25.0)

    def test_averaged_value_off_origin(self, grid3):
        v = pot.averaged_trap_field(grid3, 50.0, (0, 0, 1.0))
        ix = 8 + int(round(1.0 / grid3.spacing[0]))
        assert v[ix, 8, 8] == pytest.approx(75.0)

    def test_average_matches_quadrature(self, grid3, rng):
        e = (0.3, -0.8, 0.5)
        v = pot.averaged_trap_field(grid3, 7.0, e)
        s = (np.arange(4096) + 0.5) / 4096
        centers = np.sin(2 * math.pi * s)
        pt = np.array([grid3.axis_points(d)[3] for d in range(3)])
        ref = np.mean([7.0 * np.sum((pt - np.asarray(e) * c) ** 2) for c in centers])
        assert v[3, 3, 3] == pytest.approx(ref, rel=1e-10)


class TestLattice:
    def test_incommensurate_rejected(self):
        g = Grid(lengths=(4.0,), counts=(64,))
        with pytest.raises(ConfigError):
            pot.lattice_field(g, (1.7,))

    def test_zero_drive_average_equals_lattice(self):
        g = Grid(lengths=(4.0, 4.0), counts=(32, 32))
        freqs = (2 * math.pi, 2 * math.pi)
        assert np.allclose(pot.averaged_lattice_field(g, freqs, (0, 0)),
                           pot.lattice_field(g, freqs), atol=1e-12)

    def test_bessel_zero_flattens_average(self):
        g = Grid(lengths=(4.0,), counts=(64,))
        w = 2 * math.pi
        e1 = 2.404825557695773 / (2 * w)  # first zero of J0
        v = pot.averaged_lattice_field(g, (w,), (e1,))
        assert np.max(np.abs(v - 0.5)) < 1e-6

    def test_closed_form_matches_quadrature(self, rng):
        w = 2 * math.pi
        y = rng.uniform(-2, 2, size=64)
        e = 0.37
        closed = pot._averaged_lattice_axis(y, w, e)
        quad = pot._averaged_lattice_axis_quad(y, w, e, 256)
        assert np.max(np.abs(closed - quad)) < 1e-10


class TestStepTimeIntegral:
    def spec(self, e=(0, 0, 1.0), omega=40.0, eta=0.0625, c=1.0):
        return pot.PotentialSpec(kind="fast_coulomb", c=c,
                                 shift=pot.ShiftSpec(e0=e, omega=omega), eta=eta)

    def test_rejects_nonpositive_dt(self, grid3):
        with pytest.raises(ConfigError):
            pot.step_time_integral(grid3, self.spec(), 0.0, 0.0)

    def test_static_drive(self, grid3):
        out = pot.step_time_integral(grid3, self.spec(e=(0, 0, 0)), 0.0, 0.1)
        ref = 0.1 * pot.mollified_coulomb_field(grid3, (0, 0, 0), 1.0, 0.0625)
        assert np.max(np.abs(out - ref)) < 1e-14

    def test_whole_periods_give_dt_times_average(self, grid3):
        # two non-integral pieces force the quadrature path; their sum spans
        # exactly two periods and must reproduce dt * <V>
        spec = self.spec(omega=5.0)
        out = pot.step_time_integral(grid3, spec, 0.0, 0.1, n_sub=200, n_quad=512) \
            + pot.step_time_integral(grid3, spec, 0.1, 0.3, n_sub=600, n_quad=512)
        avg = pot.averaged_coulomb_field(grid3, (0, 0, 1.0), 1.0, 0.0625,
                                         n_quad=512)
        assert np.max(np.abs(out - 0.4 * avg)) < 1e-8

    def test_whole_period_shortcut_matches_quadrature(self, grid3):
        # the closed whole-period branch against the split quadrature result
        spec = self.spec(omega=5.0)
        shortcut = pot.step_time_integral(grid3, spec, 0.0, 0.4, n_quad=512)
        pieces = pot.step_time_integral(grid3, spec, 0.0, 0.1, n_sub=200, n_quad=512) \
            + pot.step_time_integral(grid3, spec, 0.1, 0.3, n_sub=600, n_quad=512)
        assert np.max(np.abs(shortcut - pieces)) < 1e-8

    def test_matches_adaptive_quadrature_pointwise(self):
        g = Grid.cubic(8, 16.0, dim=3)
        spec = self.spec(omega=5.0, eta=0.01)
        out = pot.step_time_integral(g, spec, 0.0, 0.1, n_sub=16)
        iz = 4 + int(round(2.0 / g.spacing[2]))
        x = (0.0, 0.0, g.axis_points(2)[iz])
        ref = step_integral_adaptive(x, (0, 0, 1.0), 5.0, 1.0, 0.01, 0.0, 0.1)
        assert out[4, 4, iz] == pytest.approx(ref, rel=1e-6)

    def test_additivity(self, grid3):
        spec = self.spec(omega=40.0)
        a = pot.step_time_integral(grid3, spec, 0.0, 1e-3, n_sub=8)
        b = pot.step_time_integral(grid3, spec, 1e-3, 1e-3, n_sub=8)
        c = pot.step_time_integral(grid3, spec, 0.0, 2e-3, n_sub=8)
        scale = np.max(np.abs(c))
        assert np.max(np.abs(a + b - c)) < 1e-4 * scale

    def test_ten_period_mean_recovers_average(self, grid3):
        spec = self.spec(omega=5.0)
        T = 10 / 5.0
        n_steps = 200
        acc = np.zeros(grid3.shape)
        for i in range(n_steps):
            # uneven panel boundaries so the whole-period shortcut never fires
            acc += pot.step_time_integral(grid3, spec, i * T / n_steps,
                                          T / n_steps, n_sub=16)
        avg = pot.averaged_coulomb_field(grid3, (0, 0, 1.0), 1.0, 0.0625,
                                         n_quad=256)
        assert np.max(np.abs(acc / T - avg)) < 1e-6

    def test_fast_trap_whole_period(self, grid3):
        spec = pot.PotentialSpec(kind="trap", trap_strength=50.0,
                                 shift=pot.ShiftSpec(e0=(0, 0, 1.0), omega=10.0))
        out = pot.step_time_integral(grid3, spec, 0.0, 0.1, n_sub=64)
        ref = 0.1 * pot.averaged_trap_field(grid3, 50.0, (0, 0, 1.0))
        assert np.max(np.abs(out - ref)) < 1e-8 * np.max(np.abs(ref))

    def test_composite_is_sum(self, grid3):
        m1 = self.spec(omega=40.0)
        m2 = pot.PotentialSpec(kind="trap", trap_strength=3.0)
        comp = pot.PotentialSpec(kind="composite", children=(m1, m2))
        a = pot.step_time_integral(grid3, comp, 0.0, 1e-3)
        b = pot.step_time_integral(grid3, m1, 0.0, 1e-3) \
            + pot.step_time_integral(grid3, m2, 0.0, 1e-3)
        assert np.max(np.abs(a - b)) < 1e-14


class TestCounterparts:
    def test_round_trip(self):
        comp = pot.PotentialSpec(kind="composite", children=(
            pot.PotentialSpec(kind="fast_coulomb", c=1.0,
                              shift=pot.ShiftSpec(e0=(0, 0, 1), omega=40.0)),
            pot.PotentialSpec(kind="trap", trap_strength=50.0,
                              shift=pot.ShiftSpec(e0=(0, 0, 1), omega=40.0)),
        ))
        averaged = pot.averaged_counterpart(comp)
        kinds = [m.kind for m in averaged.members()]
        assert kinds == ["averaged_coulomb", "averaged_trap"]
        assert pot.fast_counterpart(averaged) == comp

    def test_composite_children_validated(self):
        inner = pot.PotentialSpec(kind="composite", children=(
            pot.PotentialSpec(kind="trap", trap_strength=1.0),))
        with pytest.raises(ConfigError):
            pot.PotentialSpec(kind="composite", children=(inner,))

    def test_with_omega_updates_fast_members_only(self):
        comp = pot.PotentialSpec(kind="composite", children=(
            pot.PotentialSpec(kind="fast_coulomb", c=1.0,
                              shift=pot.ShiftSpec(e0=(0, 0, 1), omega=40.0)),
            pot.PotentialSpec(kind="averaged_coulomb", c=1.0,
                              shift=pot.ShiftSpec(e0=(0, 0, 1), omega=40.0)),
        ))
        out = comp.with_omega(80.0)
        assert out.children[0].shift.omega == 80.0
        assert out.children[1].shift.omega == 40.0
