"""Tests for the discrete truncated Wigner sampler.

Statistical checks run at fixed seeds, so they are deterministic: the
tolerances below were chosen against the frozen sample streams, with the
closed-form Ising results (independently validated in test_ising.py) as
the reference.
"""

import numpy as np
import pytest

from spinquench import dtwa, ising
from spinquench.lattice import build_couplings, build_lattice


def couplings_for(n, alpha, axes=(0.0, 0.0, 1.0), mode="powerlaw", seed=None):
    lat = build_lattice("chain1D", n)
    return build_couplings(lat, mode, alpha=alpha, couplings=axes, seed=seed)


class TestSampling:
    def test_initial_configuration_structure(self):
        s = dtwa.sample_initial(6, seed=1, trajectory_index=0)
        assert s.shape == (6, 3)
        np.testing.assert_array_equal(s[:, 0], 1.0)
        assert set(np.unique(s[:, 1:])) <= {-1.0, 1.0}

    def test_trajectory_stream_is_keyed_by_index(self):
        a = dtwa.sample_initial(6, seed=1, trajectory_index=4)
        b = dtwa.sample_initial(6, seed=1, trajectory_index=4)
        c = dtwa.sample_initial(6, seed=1, trajectory_index=5)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_transverse_signs_cover_all_four_quadrants(self):
        seen = {
            tuple(dtwa.sample_initial(1, seed=0, trajectory_index=k)[0, 1:])
            for k in range(64)
        }
        assert seen == {(1, 1), (1, -1), (-1, 1), (-1, -1)}


class TestEquationOfMotion:
    def test_rhs_is_orthogonal_to_each_spin(self):
        cm = couplings_for(5, 3.0, axes=(0.5, 1.0, 0.25))
        s = np.stack([dtwa.sample_initial(5, 0, k) for k in range(3)])
        rhs = dtwa.eom_rhs(s, cm.jx, cm.jy, cm.jz)
        dots = np.einsum("...ic,...ic->...i", s, rhs)
        np.testing.assert_allclose(dots, 0.0, atol=1e-13)

    def test_rhs_conserves_classical_energy_to_first_order(self):
        cm = couplings_for(5, 3.0, axes=(0.5, 1.0, 0.25))
        s = dtwa.sample_initial(5, 0, 7)[None]
        rhs = dtwa.eom_rhs(s, cm.jx, cm.jy, cm.jz)
        eps = 1e-6
        de = dtwa.classical_energy(cm, s + eps * rhs) - dtwa.classical_energy(cm, s)
        assert abs(de[0]) < 1e-9  # quadratic in eps, not linear

    def test_single_pair_precession_frequency(self):
        # Two spins coupled only by J^z: spin 0 sees the static field
        # B_0 = J s_1^z = -1 along z (z-components are frozen), so it rotates
        # about -z at angular rate 2J from (s^x, s^y) = (1, 1).
        cm = couplings_for(2, 0.0)
        s0 = np.array([[[1.0, 1.0, 1.0], [1.0, 1.0, -1.0]]])
        t = 0.53
        s_t = dtwa._rk4_advance(s0, t, 1e-3, cm.jx, cm.jy, cm.jz)
        assert s_t[0, 0, 0] == pytest.approx(np.cos(2 * t) + np.sin(2 * t), abs=1e-9)
        assert s_t[0, 0, 1] == pytest.approx(np.cos(2 * t) - np.sin(2 * t), abs=1e-9)
        assert s_t[0, 0, 2] == pytest.approx(1.0, abs=1e-12)


class TestDeterminism:
    def test_same_spec_reproduces_bitwise(self):
        cm = couplings_for(6, 3.0)
        t = np.array([0.0, 0.4])
        r1 = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(500, seed=3), t)
        r2 = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(500, seed=3), t)
        np.testing.assert_array_equal(r1.one_point, r2.one_point)
        np.testing.assert_array_equal(r1.two_point_xx, r2.two_point_xx)
        np.testing.assert_array_equal(r1.dsx, r2.dsx)

    def test_chunk_size_does_not_change_trajectories(self):
        cm = couplings_for(5, 3.0)
        t = np.array([0.3])
        small = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(97, seed=5, chunk_size=8), t)
        big = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(97, seed=5, chunk_size=4096), t)
        np.testing.assert_allclose(small.one_point, big.one_point, atol=1e-13)
        np.testing.assert_allclose(small.sx, big.sx, atol=1e-13)

    def test_grid_offset_matches_zero_started_grid(self):
        cm = couplings_for(5, 3.0)
        spec = dtwa.EnsembleSpec(64, seed=9)
        direct = dtwa.run_ensemble(cm, spec, np.array([0.4]))
        via_zero = dtwa.run_ensemble(cm, spec, np.array([0.0, 0.4]))
        np.testing.assert_array_equal(direct.one_point[0], via_zero.one_point[1])


class TestConservation:
    def test_spin_norm_and_energy_drift_small(self):
        # The conservation contract for the sampler is 1e-6 over a full
        # quench window; RK4 at the default step sits well inside it.
        cm = couplings_for(8, 3.0, axes=(0.5, 1.0, 0.25))
        res = dtwa.run_ensemble(
            cm, dtwa.EnsembleSpec(200, seed=11), np.array([0.0, 1.0, 3.0])
        )
        assert res.max_spin_norm_drift < 1e-6
        assert res.max_energy_drift < 1e-6

    def test_ising_z_spins_are_frozen(self):
        cm = couplings_for(6, 0.0)
        s0 = np.stack([dtwa.sample_initial(6, 2, k) for k in range(16)])
        s_t = dtwa._rk4_advance(s0, 2.0, 0.005, cm.jx, cm.jy, cm.jz)
        np.testing.assert_allclose(s_t[..., 2], s0[..., 2], atol=1e-12)


class TestMoments:
    def test_t0_moments_are_exact(self):
        cm = couplings_for(6, 3.0)
        res = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(300, seed=1), np.array([0.0]))
        np.testing.assert_allclose(res.one_point[0, :, 0], 1.0, atol=1e-14)
        np.testing.assert_allclose(res.one_point_sem[0, :, 0], 0.0, atol=1e-14)
        np.testing.assert_allclose(res.two_point_xx[0], 1.0, atol=1e-14)
        assert res.sx[0] == pytest.approx(6.0, abs=1e-12)
        assert res.dsx[0] == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.0, 3.0])
    def test_ising_one_point_within_sampling_error(self, alpha):
        cm = couplings_for(8, alpha)
        case = ising.as_ising_case(cm)
        t = np.array([0.2, 0.6, 1.1])
        res = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(4000, seed=13), t)
        exact = ising.one_point_x_all(case, t)
        sem = np.maximum(res.one_point_sem[:, :, 0], 1e-12)
        sigma = np.abs(res.one_point[:, :, 0] - exact) / sem
        assert sigma.max() < 4.0

    def test_ising_two_point_matches_damped_form(self):
        cm = couplings_for(8, 3.0)
        case = ising.as_ising_case(cm)
        t = 0.7
        res = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(4000, seed=17), np.array([t]))
        for i in range(8):
            for j in range(i + 1, 8):
                want = ising.dtwa_two_point_x(case, i, j, t)
                sem = max(res.two_point_xx_sem[0, i, j], 1e-12)
                assert abs(res.two_point_xx[0, i, j] - want) < 4.0 * sem

    def test_sem_scales_down_with_trajectories(self):
        cm = couplings_for(6, 3.0)
        t = np.array([0.8])
        small = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(500, seed=23), t)
        large = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(8000, seed=23), t)
        assert large.sx_sem[0] < 0.5 * small.sx_sem[0]

    def test_two_point_symmetric_with_unit_diagonal(self):
        cm = couplings_for(5, 3.0, axes=(0.5, 1.0, 0.25))
        res = dtwa.run_ensemble(cm, dtwa.EnsembleSpec(200, seed=29), np.array([0.9]))
        m = res.two_point_xx[0]
        np.testing.assert_allclose(m, m.T, atol=1e-13)
        np.testing.assert_array_equal(np.diag(m), 1.0)


class TestValidation:
    def test_rejects_empty_grid(self):
        cm = couplings_for(4, 0.0)
        with pytest.raises(ValueError):
            dtwa.run_ensemble(cm, dtwa.EnsembleSpec(10, seed=0), np.array([]))

    def test_rejects_decreasing_grid(self):
        cm = couplings_for(4, 0.0)
        with pytest.raises(ValueError):
            dtwa.run_ensemble(cm, dtwa.EnsembleSpec(10, seed=0), np.array([1.0, 0.5]))

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            dtwa.EnsembleSpec(0)
        with pytest.raises(ValueError):
            dtwa.EnsembleSpec(10, dt=0.0)
