"""Validation of the closed-form Ising expectations against exact propagation.

These closed forms serve as the reference oracle for large-L acceptance runs,
so before anything trusts them they are checked here against Krylov-propagated
state vectors at every size/exponent combination the tolerance budget allows.
"""

import numpy as np
import pytest

from spinquench import ed, ising
from spinquench.hamiltonian import heisenberg_terms
from spinquench.lattice import build_couplings, build_lattice


def ising_setup(n, alpha, mode="powerlaw", seed=None, geometry="chain1D", size=None):
    lat = build_lattice(geometry, size if size is not None else n)
    cm = build_couplings(lat, mode, alpha=alpha, couplings=(0.0, 0.0, 1.0), seed=seed)
    return ising.as_ising_case(cm), heisenberg_terms(cm)


class TestAgainstExactPropagation:
    @pytest.mark.parametrize("alpha", [0.0, 3.0, 6.0])
    @pytest.mark.parametrize("n", [6, 8, 10])
    def test_one_and_two_point_forms(self, n, alpha):
        case, tl = ising_setup(n, alpha)
        t_grid = [0.13, 0.62, 1.41]
        snaps = ed.propagate(ed.prepare_x_polarized(n), tl, t_grid)
        for t, snap in zip(t_grid, snaps):
            one_ed, two_ed = ed.pauli_x_expectations(snap)
            for i in range(n):
                assert ising.one_point_x(case, i, t) == pytest.approx(
                    one_ed[i], abs=1e-10
                )
            for i in range(n):
                for j in range(i + 1, n):
                    assert ising.two_point_x(case, i, j, t) == pytest.approx(
                        two_ed[i, j], abs=1e-10
                    )

    def test_disordered_realization(self):
        case, tl = ising_setup(8, 3.0, mode="disordered_powerlaw", seed=17)
        t = 0.8
        snap = ed.propagate(ed.prepare_x_polarized(8), tl, [t])[0]
        one_ed, two_ed = ed.pauli_x_expectations(snap)
        got = np.array([ising.one_point_x(case, i, t) for i in range(8)])
        np.testing.assert_allclose(got, one_ed, atol=1e-10)
        assert ising.two_point_x(case, 2, 5, t) == pytest.approx(
            two_ed[2, 5], abs=1e-10
        )

    def test_square_lattice(self):
        case, tl = ising_setup(9, 3.0, geometry="square2D", size=(3, 3))
        t = 0.5
        snap = ed.propagate(ed.prepare_x_polarized(9), tl, [t])[0]
        one_ed, two_ed = ed.pauli_x_expectations(snap)
        np.testing.assert_allclose(
            ising.one_point_x_all(case, np.array([t]))[0], one_ed, atol=1e-10
        )
        assert ising.two_point_x(case, 0, 4, t) == pytest.approx(
            two_ed[0, 4], abs=1e-10
        )

    @pytest.mark.parametrize("alpha", [0.0, 3.0, 6.0])
    def test_collective_series(self, alpha):
        n = 8
        case, tl = ising_setup(n, alpha)
        t_grid = np.array([0.0, 0.3, 0.9, 1.7])
        sx, dsx = ising.collective_series(case, t_grid)
        snaps = ed.propagate(ed.prepare_x_polarized(n), tl, t_grid)
        for k, snap in enumerate(snaps):
            one_ed, two_ed = ed.pauli_x_expectations(snap)
            # <(sum X_i)^2> - <sum X_i>^2; two_ed's unit diagonal already
            # encodes X_i^2 = 1 for the i = j contribution.
            dsx_ed = two_ed.sum() - np.outer(one_ed, one_ed).sum()
            assert sx[k] == pytest.approx(one_ed.sum(), abs=1e-9)
            assert dsx[k] == pytest.approx(dsx_ed, abs=1e-9)


class TestAnalyticStructure:
    def test_initial_values(self):
        case, _ = ising_setup(6, 3.0)
        assert ising.one_point_x(case, 0, 0.0) == pytest.approx(1.0)
        assert ising.two_point_x(case, 0, 3, 0.0) == pytest.approx(1.0)
        sx, dsx = ising.collective_series(case, np.array([0.0]))
        assert sx[0] == pytest.approx(6.0)
        assert dsx[0] == pytest.approx(0.0, abs=1e-12)

    def test_all_to_all_revival(self):
        # With alpha=0 every coupling is J, so each factor cos(2tJ) returns
        # to +-1 at t = pi/2 and the transverse magnetization revives fully.
        case, _ = ising_setup(10, 0.0)
        sx, _ = ising.collective_series(case, np.array([np.pi / 2.0]))
        assert abs(sx[0]) == pytest.approx(10.0, abs=1e-12)

    def test_one_point_is_product_of_cosines(self):
        case, _ = ising_setup(5, 2.0)
        t = 0.41
        want = np.prod([np.cos(2.0 * t * case.jz[2, k]) for k in range(5) if k != 2])
        assert ising.one_point_x(case, 2, t) == pytest.approx(want, abs=1e-14)

    def test_vectorized_one_point_matches_scalar(self):
        case, _ = ising_setup(7, 3.0)
        t_grid = np.linspace(0.0, 2.0, 9)
        table = ising.one_point_x_all(case, t_grid)
        for k, t in enumerate(t_grid):
            for i in range(7):
                assert table[k, i] == pytest.approx(
                    ising.one_point_x(case, i, t), abs=1e-14
                )

    def test_grid_evaluation_matches_scalar(self):
        case, _ = ising_setup(6, 3.0)
        t_grid = np.array([0.1, 0.7, 1.3])
        np.testing.assert_allclose(
            ising.one_point_x(case, 1, t_grid),
            [ising.one_point_x(case, 1, t) for t in t_grid],
            atol=1e-15,
        )
        np.testing.assert_allclose(
            ising.two_point_x(case, 1, 4, t_grid),
            [ising.two_point_x(case, 1, 4, t) for t in t_grid],
            atol=1e-15,
        )

    def test_two_point_is_symmetric(self):
        case, _ = ising_setup(6, 3.0)
        assert ising.two_point_x(case, 1, 4, 0.9) == pytest.approx(
            ising.two_point_x(case, 4, 1, 0.9), abs=1e-15
        )


class TestSemiclassicalTwoPoint:
    def test_reduces_to_exact_times_cos_squared(self):
        case, _ = ising_setup(7, 3.0)
        t = 0.77
        for i, j in [(0, 1), (2, 5), (1, 6)]:
            exact = ising.two_point_x(case, i, j, t)
            damped = ising.dtwa_two_point_x(case, i, j, t)
            assert damped == pytest.approx(
                exact * np.cos(2.0 * t * case.jz[i, j]) ** 2, abs=1e-14
            )

    def test_agrees_with_exact_at_t0(self):
        case, _ = ising_setup(5, 0.0)
        assert ising.dtwa_two_point_x(case, 0, 3, 0.0) == pytest.approx(1.0)


class TestCaseConstruction:
    def test_rejects_transverse_couplings(self):
        lat = build_lattice("chain1D", 4)
        cm = build_couplings(lat, "powerlaw", alpha=0.0, couplings=(0.5, 0.0, 1.0))
        with pytest.raises(ValueError):
            ising.as_ising_case(cm)

    def test_accepts_pure_z(self):
        lat = build_lattice("chain1D", 4)
        cm = build_couplings(lat, "powerlaw", alpha=2.0, couplings=(0.0, 0.0, 1.0))
        case = ising.as_ising_case(cm)
        assert case.n_sites == 4
