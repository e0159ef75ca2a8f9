import numpy as np
import pytest

from helpers import random_density, random_hamiltonian_spec, random_ket
from stroblim import (HamiltonianSpec, InitialState, basis_ket, effective_rank1,
                      effective_rankr, heisenberg3_hamiltonian, kron,
                      nonlinear_density_rhs, nonlinear_state_rhs, pauli,
                      projector_from_kets, propagate_kraus, purity_derivative,
                      swap_hamiltonian, trace_distance)
from stroblim.linalg import dag, is_psd, max_abs
from stroblim.selective_limit import integrate_density, integrate_state

TAU = 0.04
GAMMA = 5.0
OMEGA = GAMMA ** 2 * TAU


def swap_eff():
    return effective_rank1(swap_hamiltonian(GAMMA), basis_ket("u"), TAU)


def embed_rankr(eff):
    """Lift compressed joint-space operators back to the full product space."""
    v = kron(np.eye(eff.h1.shape[0] // eff.probe_basis.shape[1]), eff.probe_basis)
    return v @ eff.h1 @ dag(v), v @ eff.h2 @ dag(v)


class TestEffectiveRank1:
    def test_swap_structure(self):
        eff = swap_eff()
        assert max_abs(eff.h1 - GAMMA * np.diag([1.0, 0.0])) < 1e-12
        assert max_abs(eff.h2 - (OMEGA / 2) * np.diag([0.0, 1.0])) < 1e-12
        assert eff.omega == pytest.approx(OMEGA)

    def test_probe_decoupled_gives_zero_h2(self, rng):
        from helpers import random_hermitian
        a = random_hermitian(rng, 3, norm=1.0)
        ham = HamiltonianSpec(2.0, ((a, np.eye(2)),))
        eff = effective_rank1(ham, random_ket(rng, 2), 0.1)
        assert max_abs(eff.h1 - 2.0 * a) < 1e-12
        assert max_abs(eff.h2) < 1e-14

    def test_probe_eigenvector_gives_zero_h2(self, rng):
        from helpers import random_hermitian
        terms = tuple((random_hermitian(rng, 2, norm=1.0), np.diag([1.0, -0.5]))
                      for _ in range(2))
        ham = HamiltonianSpec(1.5, terms)
        eff = effective_rank1(ham, basis_ket("u"), 0.2)
        assert max_abs(eff.h2) < 1e-14

    def test_h2_equals_tau_half_dagd(self, rng):
        # H2 = (tau/2) D+ D with D = (I - C) H (I_sys (x) |phi>)
        for _ in range(20):
            ds = int(rng.integers(2, 5))
            dp = int(rng.integers(2, 5))
            ham = random_hamiltonian_spec(rng, ds, dp, n_terms=2, gamma=2.0)
            phi = random_ket(rng, dp)
            tau = 0.25
            eff = effective_rank1(ham, phi, tau)
            h = ham.assemble()
            c = kron(np.eye(ds), np.outer(phi, phi.conj()))
            iso = kron(np.eye(ds), phi.reshape(-1, 1))
            d_op = (np.eye(ds * dp) - c) @ h @ iso
            assert max_abs(eff.h2 - (tau / 2) * dag(d_op) @ d_op) < 1e-10
            assert is_psd(eff.h2, 1e-10)

    def test_rejects_unnormalized_phi(self):
        with pytest.raises(ValueError):
            effective_rank1(swap_hamiltonian(1.0), [1.0, 1.0], 0.1)


class TestEffectiveRankr:
    def test_rank1_reduces_to_system_form(self, rng):
        for _ in range(5):
            ds = int(rng.integers(2, 4))
            dp = int(rng.integers(2, 4))
            ham = random_hamiltonian_spec(rng, ds, dp, n_terms=2, gamma=1.5)
            phi = random_ket(rng, dp)
            tau = 0.3
            e1 = effective_rank1(ham, phi, tau)
            er = effective_rankr(ham, np.outer(phi, phi.conj()), tau,
                                 basis=phi.reshape(-1, 1))
            assert max_abs(er.h1 - e1.h1) < 1e-12
            assert max_abs(er.h2 - e1.h2) < 1e-12

    def test_full_projector_is_uninformative(self, rng):
        ham = random_hamiltonian_spec(rng, 2, 3, n_terms=2, gamma=2.0)
        eff = effective_rankr(ham, np.eye(3), 0.1, basis=np.eye(3))
        assert max_abs(eff.h1 - ham.assemble()) < 1e-12
        assert max_abs(eff.h2) < 1e-13

    def test_heisenberg_rank2_h2_positive(self):
        # 8x8 construction oracle: H2 = (tau/2) C H (I - C) H C in range(C)
        ham = heisenberg3_hamiltonian(GAMMA, "local_xyz")
        p = projector_from_kets([basis_ket("ud"), basis_ket("du")])
        eff = effective_rankr(ham, p, TAU)
        h1_full, h2_full = embed_rankr(eff)
        h = ham.assemble()
        c = kron(np.eye(2), p)
        oracle = (TAU / 2) * c @ h @ (np.eye(8) - c) @ h @ c
        assert max_abs(h2_full - oracle) < 1e-10
        w = np.linalg.eigvalsh(eff.h2)
        assert w.min() > -1e-10
        assert w.max() > 1e-3

    def test_h2_zero_iff_no_outward_transitions(self, rng):
        # block-diagonal probe factors commute with P: no leakage, H2 = 0
        p = np.diag([1.0, 1.0, 0.0]).astype(complex)
        terms = []
        for _ in range(2):
            from helpers import random_hermitian
            b = np.zeros((3, 3), dtype=complex)
            b[:2, :2] = random_hermitian(rng, 2)
            b[2, 2] = rng.standard_normal()
            b /= np.linalg.norm(b, 2)
            terms.append((random_hermitian(rng, 2, norm=1.0), b))
        ham = HamiltonianSpec(2.0, tuple(terms))
        eff = effective_rankr(ham, p, 0.2)
        h = ham.assemble()
        c = kron(np.eye(2), p)
        assert max_abs((np.eye(6) - c) @ h @ c) < 1e-12
        assert max_abs(eff.h2) < 1e-12

    def test_rejects_non_projector(self, rng):
        ham = random_hamiltonian_spec(rng, 2, 3)
        with pytest.raises(ValueError):
            effective_rankr(ham, 0.7 * np.eye(3), 0.1)


class TestPropagateKraus:
    def test_time_zero_identity(self, rng):
        eff = swap_eff()
        init = InitialState.from_kets(random_ket(rng, 2), basis_ket("u"))
        traj = propagate_kraus(eff, init, [0.0])
        assert max_abs(traj.states[0] - init.rho_sys) < 1e-13
        assert traj.norms[0] == pytest.approx(1.0)

    def test_matches_closed_form_probability(self):
        a2 = 0.2
        eff = swap_eff()
        init = InitialState.from_kets([np.sqrt(a2), np.sqrt(1 - a2)], basis_ket("u"))
        times = np.linspace(0.0, 10.0, 101)
        traj = propagate_kraus(eff, init, times)
        want = a2 / (a2 + np.exp(-OMEGA * times) * (1 - a2))
        assert max_abs(traj.p_up() - want) < 1e-12

    def test_zero_h2_is_unitary(self, rng):
        from helpers import random_hermitian
        a = random_hermitian(rng, 2, norm=1.0)
        ham = HamiltonianSpec(2.0, ((a, np.eye(2)),))
        eff = effective_rank1(ham, basis_ket("u"), 0.1)
        init = InitialState.from_kets(random_ket(rng, 2), basis_ket("u"))
        traj = propagate_kraus(eff, init, np.linspace(0, 5, 21))
        assert max_abs(traj.norms - 1.0) < 1e-12

    def test_norm_non_increasing(self, rng):
        eff = swap_eff()
        init = InitialState.from_kets(random_ket(rng, 2), basis_ket("u"))
        traj = propagate_kraus(eff, init, np.linspace(0, 8, 33))
        assert np.all(np.diff(traj.norms) <= 1e-12)

    def test_truncates_on_vanishing_branch(self):
        eff = swap_eff()
        init = InitialState.from_kets([0.0, 1.0], basis_ket("u"))
        with pytest.warns(UserWarning):
            traj = propagate_kraus(eff, init, [0.0, 1.0, 50.0])
        assert len(traj) == 2

    def test_requires_matching_probe(self):
        eff = swap_eff()
        init = InitialState.from_kets([1.0, 0.0], basis_ket("d"))
        with pytest.raises(ValueError):
            propagate_kraus(eff, init, [0.0])


class TestNonlinearRhs:
    def test_stationary_eigenprojector(self, rng):
        from helpers import random_hermitian
        a = random_hermitian(rng, 2, norm=1.0)
        ham = HamiltonianSpec(1.0, ((a, np.eye(2)),))
        eff = effective_rank1(ham, basis_ket("u"), 0.1)  # H2 = 0
        w, v = np.linalg.eigh(eff.h1)
        rho = np.outer(v[:, 0], v[:, 0].conj())
        assert max_abs(nonlinear_density_rhs(eff, rho)) < 1e-12

    def test_traceless_on_random_densities(self, rng):
        eff = swap_eff()
        for _ in range(10):
            rho = random_density(rng, 2)
            assert abs(np.trace(nonlinear_density_rhs(eff, rho))) < 1e-12

    def test_logistic_growth_matches_analytic_derivative(self):
        # d p / dT of p(T) = a / (a + e^{-Omega T} b) equals Omega p (1 - p)
        eff = swap_eff()
        for p in (0.1, 0.35, 0.8):
            rho = np.diag([p, 1.0 - p]).astype(complex)
            rhs = nonlinear_density_rhs(eff, rho)
            assert abs(rhs[0, 0].real - OMEGA * p * (1 - p)) < 1e-12

    def test_state_rhs_reduces_to_schroedinger(self, rng):
        from helpers import random_hermitian
        a = random_hermitian(rng, 3, norm=1.0)
        ham = HamiltonianSpec(2.0, ((a, np.eye(2)),))
        eff = effective_rank1(ham, basis_ket("u"), 0.1)
        psi = random_ket(rng, 3)
        assert max_abs(nonlinear_state_rhs(eff, psi) + 1j * eff.h1 @ psi) < 1e-12

    def test_state_rhs_pure_phase_on_joint_eigenvector(self):
        eff = swap_eff()  # H1, H2 both diagonal
        psi = basis_ket("u")
        rhs = nonlinear_state_rhs(eff, psi)
        assert max_abs(rhs + 1j * GAMMA * psi) < 1e-12

    def test_state_rhs_norm_preserving(self, rng):
        eff = swap_eff()
        psi = random_ket(rng, 2)
        assert abs(np.vdot(psi, nonlinear_state_rhs(eff, psi)).real) < 1e-12


class TestPurityDerivative:
    def test_pure_state_stationary_purity(self, rng):
        eff = swap_eff()
        psi = random_ket(rng, 2)
        rho = np.outer(psi, psi.conj())
        assert abs(purity_derivative(eff, rho)) < 1e-12

    def test_zero_h2(self, rng):
        ham = HamiltonianSpec(1.0, ((pauli(1), np.eye(2)),))
        eff = effective_rank1(ham, basis_ket("u"), 0.1)
        assert purity_derivative(eff, random_density(rng, 2)) == pytest.approx(0.0)

    def test_maximally_mixed(self):
        eff = swap_eff()
        assert abs(purity_derivative(eff, np.eye(2) / 2)) < 1e-12

    def test_matches_finite_difference(self):
        a2 = 0.3
        eff = swap_eff()
        init = InitialState.from_kets([np.sqrt(a2), np.sqrt(1 - a2)], basis_ket("u"))
        h = 1e-3
        for t in (0.5, 2.0, 5.0):
            traj = propagate_kraus(eff, init, [t - h, t, t + h])
            fd = (np.trace(traj.states[2] @ traj.states[2]).real
                  - np.trace(traj.states[0] @ traj.states[0]).real) / (2 * h)
            got = purity_derivative(eff, traj.states[1])
            assert abs(got - fd) < 1e-4


class TestConsistency:
    def test_density_state_kraus_agree(self, rng):
        # one fixed and one random rank-1 scenario, three propagation routes
        cases = []
        a2 = 0.2
        cases.append((swap_eff(),
                      np.array([np.sqrt(a2), np.sqrt(1 - a2)], dtype=complex)))
        ham = random_hamiltonian_spec(rng, 2, 3, n_terms=2, gamma=2.0)
        cases.append((effective_rank1(ham, random_ket(rng, 3), 0.25),
                      random_ket(rng, 2)))
        for eff, psi0 in cases:
            times = np.linspace(0.0, 5.0, 11)
            rho0 = np.outer(psi0, psi0.conj())
            dens = integrate_density(eff, rho0, times, n_steps=2000)
            stat = integrate_state(eff, psi0, times, n_steps=2000)
            init = InitialState(rho0, np.outer(eff.phi, eff.phi.conj()))
            kraus = propagate_kraus(eff, init, times)
            for k in range(len(times)):
                rho_s = np.outer(stat[k], stat[k].conj())
                assert trace_distance(dens[k], rho_s) < 1e-6
                assert trace_distance(dens[k], kraus.states[k]) < 1e-6
                assert abs(np.trace(dens[k] @ dens[k]).real - 1.0) < 1e-6

    def test_state_integration_matches_analytic_probability(self):
        # RK4 on the state equation reproduces a2 / (a2 + e^{-Omega T} b2)
        a2 = 0.2
        eff = swap_eff()
        psi0 = np.array([np.sqrt(a2), np.sqrt(1 - a2)], dtype=complex)
        times = np.linspace(0.0, 4.0, 9)
        psis = integrate_state(eff, psi0, times, n_steps=2000)
        want = a2 / (a2 + np.exp(-OMEGA * times) * (1 - a2))
        got = np.array([abs(p[0]) ** 2 / np.linalg.norm(p) ** 2 for p in psis])
        assert max_abs(got - want) < 1e-6

    def test_rhs_matches_kraus_finite_difference(self):
        eff = swap_eff()
        init = InitialState.from_kets([np.sqrt(0.2), np.sqrt(0.8)], basis_ket("u"))
        h = 1e-3
        for t in (1.0, 3.0):
            traj = propagate_kraus(eff, init, [t - h, t, t + h])
            fd = (traj.states[2] - traj.states[0]) / (2 * h)
            rhs = nonlinear_density_rhs(eff, traj.states[1])
            assert max_abs(fd - rhs) < 1e-4
