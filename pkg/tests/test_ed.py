"""Tests for the Krylov state-vector propagator and its observables.

The propagation oracle is scipy.linalg.expm on the dense Hamiltonian; the
partial-trace oracle is an explicit double loop over basis states.  Neither
shares code with the module under test.
"""

import numpy as np
import pytest
from scipy.linalg import expm

from helpers import dense_matrix, partial_trace_loops, random_state, site_operator

from spinquench import ed
from spinquench.hamiltonian import heisenberg_terms
from spinquench.lattice import build_couplings, build_lattice


def heisenberg(n, mode="powerlaw", alpha=3.0, couplings=(0.5, 1.0, 0.25), seed=None,
               geometry="chain1D", size=None):
    lat = build_lattice(geometry, size if size is not None else n)
    cm = build_couplings(lat, mode, alpha=alpha, couplings=couplings, seed=seed)
    return heisenberg_terms(cm)


class TestInitialState:
    def test_amplitudes_are_uniform(self):
        st = ed.prepare_x_polarized(4)
        np.testing.assert_allclose(st.amplitudes, 0.25)
        assert st.norm() == pytest.approx(1.0)
        assert st.time == 0.0

    def test_every_site_is_x_polarized(self):
        st = ed.prepare_x_polarized(5)
        one, two = ed.pauli_x_expectations(st)
        np.testing.assert_allclose(one, 1.0)
        np.testing.assert_allclose(two, 1.0)

    def test_ceiling_guard(self):
        with pytest.raises(ValueError, match="ceiling"):
            ed.prepare_x_polarized(17)
        st = ed.prepare_x_polarized(17, max_sites=17)
        assert st.n_sites == 17


class TestPropagate:
    @pytest.mark.parametrize(
        "couplings,alpha",
        [((0.0, 0.0, 1.0), 0.0), ((0.0, 0.0, 1.0), 3.0), ((0.5, 1.0, 0.25), 3.0)],
    )
    def test_matches_dense_expm(self, couplings, alpha):
        tl = heisenberg(6, alpha=alpha, couplings=couplings)
        st = ed.prepare_x_polarized(6)
        t_grid = [0.0, 0.4, 1.1]
        snaps = ed.propagate(st, tl, t_grid)
        h = dense_matrix(tl)
        for t, snap in zip(t_grid, snaps):
            exact = expm(-1j * t * h) @ st.amplitudes
            np.testing.assert_allclose(snap.amplitudes, exact, atol=5e-10)
            assert snap.time == pytest.approx(t)

    def test_disordered_matches_dense_expm(self):
        tl = heisenberg(6, mode="disordered_powerlaw", alpha=3.0, seed=21)
        st = ed.prepare_x_polarized(6)
        snap = ed.propagate(st, tl, [0.9])[0]
        exact = expm(-1j * 0.9 * dense_matrix(tl)) @ st.amplitudes
        np.testing.assert_allclose(snap.amplitudes, exact, atol=5e-10)

    def test_long_step_is_bisected_not_wrong(self):
        # A single 6J interval exceeds what one 30-vector Krylov space can
        # represent; the propagator must subdivide rather than lose accuracy.
        tl = heisenberg(8, alpha=0.0, couplings=(0.0, 0.0, 1.0))
        st = ed.prepare_x_polarized(8)
        snap = ed.propagate(st, tl, [6.0])[0]
        exact = expm(-1j * 6.0 * dense_matrix(tl)) @ st.amplitudes
        np.testing.assert_allclose(snap.amplitudes, exact, atol=1e-8)

    def test_norm_conserved(self):
        tl = heisenberg(8)
        snaps = ed.propagate(ed.prepare_x_polarized(8), tl, np.linspace(0.0, 3.0, 7))
        for snap in snaps:
            assert abs(snap.norm() - 1.0) < 1e-10

    def test_energy_conserved(self):
        tl = heisenberg(8)
        st = ed.prepare_x_polarized(8)
        e0 = ed.expectation(st, tl)
        for snap in ed.propagate(st, tl, np.linspace(0.0, 3.0, 7)):
            assert abs(ed.expectation(snap, tl) - e0) < 1e-8

    def test_grid_must_be_increasing(self):
        tl = heisenberg(4)
        st = ed.prepare_x_polarized(4)
        with pytest.raises(ValueError):
            ed.propagate(st, tl, [1.0, 0.5])

    def test_state_and_terms_must_agree_on_size(self):
        tl = heisenberg(4)
        st = ed.prepare_x_polarized(5)
        with pytest.raises(ValueError):
            ed.propagate(st, tl, [0.1])

    def test_propagation_can_start_from_nonzero_time(self):
        tl = heisenberg(6)
        st = ed.prepare_x_polarized(6)
        mid = ed.propagate(st, tl, [0.5])[0]
        end_two_leg = ed.propagate(mid, tl, [1.2])[0]
        end_direct = ed.propagate(st, tl, [1.2])[0]
        np.testing.assert_allclose(
            end_two_leg.amplitudes, end_direct.amplitudes, atol=1e-9
        )


class TestPauliXExpectations:
    def test_matches_dense_operator(self):
        n = 5
        psi = random_state(n, 3)
        st = ed.StateVector(psi, n)
        one, two = ed.pauli_x_expectations(st)
        for i in range(n):
            xi = site_operator(n, i, "x")
            assert one[i] == pytest.approx(np.vdot(psi, xi @ psi).real, abs=1e-12)
            for j in range(n):
                if i == j:
                    continue
                xj = site_operator(n, j, "x")
                want = np.vdot(psi, xi @ (xj @ psi)).real
                assert two[i, j] == pytest.approx(want, abs=1e-12)

    def test_two_site_ising_cosine(self):
        # H = -J ZZ on two spins from |->->: <X_i>(t) = cos(2Jt).
        tl = heisenberg(2, alpha=0.0, couplings=(0.0, 0.0, 1.0))
        t = 0.37
        snap = ed.propagate(ed.prepare_x_polarized(2), tl, [t])[0]
        one, _ = ed.pauli_x_expectations(snap)
        np.testing.assert_allclose(one, np.cos(2.0 * t), atol=1e-10)


class TestReducedDensity:
    @pytest.mark.parametrize("sites", [(0,), (2,), (0, 1), (0, 3), (1, 2, 3)])
    def test_matches_loop_oracle(self, sites):
        n = 4
        psi = random_state(n, 8)
        rho = ed.reduced_density(ed.StateVector(psi, n), sites)
        np.testing.assert_allclose(
            rho.matrix, partial_trace_loops(psi, n, sites), atol=1e-13
        )

    def test_trace_one_and_hermitian(self):
        psi = random_state(5, 9)
        rho = ed.reduced_density(ed.StateVector(psi, 5), (1, 3, 4)).matrix
        assert np.trace(rho).real == pytest.approx(1.0)
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)

    def test_complementary_cuts_have_equal_entropy(self):
        psi = random_state(6, 10)
        st = ed.StateVector(psi, 6)
        s_left = ed.von_neumann_entropy(ed.reduced_density(st, (0, 1, 2)))
        s_right = ed.von_neumann_entropy(ed.reduced_density(st, (3, 4, 5)))
        assert s_left == pytest.approx(s_right, abs=1e-10)

    def test_full_system_is_pure_projector(self):
        psi = random_state(3, 11)
        rho = ed.reduced_density(ed.StateVector(psi, 3), range(3)).matrix
        np.testing.assert_allclose(rho @ rho, rho, atol=1e-12)

    def test_rejects_bad_subsets(self):
        st = ed.StateVector(random_state(3, 1), 3)
        with pytest.raises(ValueError):
            ed.reduced_density(st, ())
        with pytest.raises(ValueError):
            ed.reduced_density(st, (0, 3))
        with pytest.raises(ValueError):
            ed.reduced_density(st, (1, 1))


class TestEntropy:
    def test_product_state_has_zero_entropy(self):
        st = ed.prepare_x_polarized(4)
        rho = ed.reduced_density(st, (0, 1))
        assert ed.von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-12)

    def test_bell_pair_gives_ln2(self):
        psi = np.zeros(4, dtype=complex)
        psi[0b00] = psi[0b11] = 1.0 / np.sqrt(2.0)
        rho = ed.reduced_density(ed.StateVector(psi, 2), (0,))
        assert ed.von_neumann_entropy(rho) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_maximally_mixed_limit(self):
        assert ed.von_neumann_entropy(np.eye(8) / 8.0) == pytest.approx(
            3.0 * np.log(2.0)
        )

    def test_tiny_eigenvalues_do_not_produce_nan(self):
        rho = np.diag([1.0 - 1e-16, 1e-16])
        s = ed.von_neumann_entropy(rho)
        assert np.isfinite(s)
        assert s == pytest.approx(0.0, abs=1e-12)


def test_renormalized_restores_unit_norm():
    st = ed.StateVector(2.0 * random_state(3, 2), 3)
    assert ed.renormalized(st).norm() == pytest.approx(1.0)
