"""Closed-form conditional dynamics in the frequent-measurement limit.

When the probe is projectively measured every tau with coincident outcomes
and tau -> 0 at fixed Omega = gamma^2 tau, the surviving branch evolves under
a non-Hermitian generator H1 - i H2: H1 is the probe-averaged Hamiltonian and
H2 >= 0 encodes the trace decay caused by transitions out of the measured
subspace.  For a rank-1 projector the dynamics closes on the system alone;
for rank r the pair lives on system (x) range(P) and the system state follows
by partial trace.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import (DEFAULT_TOL, TensorDims, as_matrix, dag, expm,
                     is_projector, kron, max_abs, ode_step_rk4, partial_trace)
from .model import HamiltonianSpec, InitialState
from .trajectory import Trajectory

PROB_FLOOR = 1e-14
DEFAULT_ODE_STEPS = 2000


@dataclass(frozen=True)
class SelectiveEffective:
    """Effective generator H1 - i H2 of the post-selected branch.

    space is "sys" (rank-1 measurement: operators act on the system alone,
    `phi` is the measured probe vector) or "joint" (rank-r: operators act on
    system (x) range(P) compressed through the isometry `probe_basis`, with
    `dims` the compressed split).  `covariance` keeps the probe covariance
    matrix M_jk in the rank-1 case.
    """

    h1: np.ndarray
    h2: np.ndarray
    gamma: float
    tau: float
    space: str
    covariance: np.ndarray | None = None
    phi: np.ndarray | None = None
    probe_basis: np.ndarray | None = None
    dims: TensorDims | None = None

    @property
    def omega(self) -> float:
        return self.gamma ** 2 * self.tau

    @property
    def h_eff(self) -> np.ndarray:
        return self.h1 - 1j * self.h2

    @property
    def dim(self) -> int:
        return self.h1.shape[0]


def _validate_h1_h2(h1: np.ndarray, h2: np.ndarray) -> None:
    if max_abs(h1 - dag(h1)) > DEFAULT_TOL:
        raise ValueError("H1 must come out Hermitian; check the Hamiltonian terms")
    if max_abs(h2 - dag(h2)) > DEFAULT_TOL:
        raise ValueError("H2 must come out Hermitian; check the Hamiltonian terms")
    w = np.linalg.eigvalsh((h2 + dag(h2)) / 2)
    if w.size and float(w.min()) < -DEFAULT_TOL:
        raise ValueError(f"H2 must be positive semidefinite, min eigenvalue {w.min():.3e}")


def effective_rank1(ham: HamiltonianSpec, phi, tau: float) -> SelectiveEffective:
    """System-only effective generator for a rank-1 probe projector |phi><phi|.

    H1 = gamma * sum_j A_j <B_j> and H2 = (Omega/2) * sum_jk A_j A_k M_jk with
    M_jk the covariance <B_j B_k> - <B_j><B_k> in |phi>.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.size != ham.dim_pr:
        raise ValueError("probe vector dimension does not match the Hamiltonian")
    if abs(np.linalg.norm(phi) - 1.0) > DEFAULT_TOL:
        raise ValueError("probe vector must be normalized within 1e-10")
    omega = ham.gamma ** 2 * tau
    n = len(ham.terms)
    b_phi = [b @ phi for _, b in ham.terms]
    b_avg = np.array([np.vdot(phi, bp) for bp in b_phi])
    cov = np.empty((n, n), dtype=complex)
    for j in range(n):
        bj_dag_phi = dag(ham.terms[j][1]) @ phi
        for k in range(n):
            # <B_j B_k> - <B_j><B_k>
            cov[j, k] = np.vdot(bj_dag_phi, b_phi[k]) - b_avg[j] * b_avg[k]
    h1 = sum(b_avg[j] * ham.terms[j][0] for j in range(n)) * ham.gamma
    h2 = np.zeros((ham.dim_sys, ham.dim_sys), dtype=complex)
    for j in range(n):
        for k in range(n):
            h2 += cov[j, k] * (ham.terms[j][0] @ ham.terms[k][0])
    h2 *= omega / 2.0
    _validate_h1_h2(h1, h2)
    return SelectiveEffective(h1=h1, h2=h2, gamma=ham.gamma, tau=tau, space="sys",
                              covariance=cov, phi=phi)


def effective_rankr(ham: HamiltonianSpec, proj, tau: float,
                    basis: np.ndarray | None = None) -> SelectiveEffective:
    """Effective generator on system (x) range(P) for a rank-r probe projector.

    Uses the in-range matrices G_j = P B_j P and G_jk = P B_j B_k P,
    compressed through an orthonormal basis of range(P): H1 = gamma * sum_j
    A_j (x) G_j, H2 = (Omega/2) * sum_jk A_j A_k (x) (G_jk - G_j G_k).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    p = as_matrix(proj)
    if p.shape[0] != ham.dim_pr:
        raise ValueError("projector dimension does not match the Hamiltonian")
    if not is_projector(p, DEFAULT_TOL):
        raise ValueError("measurement operator must be a projector within 1e-10")
    r = round(float(np.trace(p).real))
    if r < 1:
        raise ValueError("projector rank must be at least 1")
    if basis is None:
        w, vfull = np.linalg.eigh(p)
        v = np.ascontiguousarray(vfull[:, w > 0.5])
    else:
        v = np.asarray(basis, dtype=complex)
        if v.shape != (ham.dim_pr, r) or max_abs(dag(v) @ v - np.eye(r)) > DEFAULT_TOL \
                or max_abs(v @ dag(v) - p) > DEFAULT_TOL:
            raise ValueError("basis must be an orthonormal spanning set of range(P)")
    omega = ham.gamma ** 2 * tau
    n = len(ham.terms)
    g = [dag(v) @ b @ v for _, b in ham.terms]
    h1 = np.zeros((ham.dim_sys * r,) * 2, dtype=complex)
    for j in range(n):
        h1 += kron(ham.terms[j][0], g[j])
    h1 *= ham.gamma
    h2 = np.zeros_like(h1)
    for j in range(n):
        bj_dag_v = dag(ham.terms[j][1]) @ v
        for k in range(n):
            # compressed G_jk = V+ B_j B_k V
            gg_jk = dag(bj_dag_v) @ (ham.terms[k][1] @ v)
            h2 += kron(ham.terms[j][0] @ ham.terms[k][0], gg_jk - g[j] @ g[k])
    h2 *= omega / 2.0
    _validate_h1_h2(h1, h2)
    return SelectiveEffective(h1=h1, h2=h2, gamma=ham.gamma, tau=tau, space="joint",
                              probe_basis=v, dims=TensorDims(ham.dim_sys, r))


def _initial_in_space(eff: SelectiveEffective, init: InitialState) -> np.ndarray:
    if eff.space == "sys":
        phi = eff.phi
        if init.rho_pr.shape[0] != phi.size:
            raise ValueError("initial probe dimension does not match the generator")
        if max_abs(init.rho_pr - np.outer(phi, phi.conj())) > 1e-8:
            raise ValueError("rank-1 limit requires the probe prepared in the "
                             "measured vector")
        return init.rho_sys.copy()
    v = eff.probe_basis
    if init.rho_pr.shape[0] != v.shape[0]:
        raise ValueError("initial probe dimension does not match the generator")
    rp = dag(v) @ init.rho_pr @ v
    if abs(np.trace(rp).real - 1.0) > 1e-8:
        raise ValueError("initial probe state must be supported in range(P)")
    return kron(init.rho_sys, rp)


def propagate_kraus(eff: SelectiveEffective, init: InitialState, times,
                    prob_floor: float = PROB_FLOOR) -> Trajectory:
    """Propagate rho(T) = K rho(0) K+ with K = exp(-i (H1 - i H2) T).

    The reported norms are the branch probabilities tr[K rho K+], which are
    non-increasing in T.  If the probability falls below prob_floor the
    trajectory is truncated with a warning (the conditional state is undefined
    on a zero-probability branch).
    """
    times = np.asarray(times, dtype=float)
    rho0 = _initial_in_space(eff, init)
    h_eff = eff.h_eff
    out_t: list[float] = []
    states: list[np.ndarray] = []
    sys_states: list[np.ndarray] = []
    norms: list[float] = []
    for t in times:
        k = expm(-1j * t * h_eff)
        rho_u = k @ rho0 @ dag(k)
        norm = float(np.trace(rho_u).real)
        if norm < prob_floor:
            warnings.warn(f"branch probability vanished at T = {t:g}; trajectory "
                          "truncated", stacklevel=2)
            break
        rho = rho_u / norm
        out_t.append(float(t))
        states.append(rho)
        norms.append(norm)
        if eff.space == "sys":
            sys_states.append(rho)
        else:
            sys_states.append(partial_trace(rho, eff.dims, "sys"))
    return Trajectory(np.array(out_t), states, sys_states, np.array(norms), eff.dims)


def nonlinear_density_rhs(eff: SelectiveEffective, rho) -> np.ndarray:
    """Norm-preserving density equation
    d rho / dT = -i [H1, rho] - {H2, rho} + 2 tr(H2 rho) rho.

    Traceless on unit-trace input, so RK4 integration keeps normalization.
    """
    rho = as_matrix(rho)
    if rho.shape[0] != eff.dim:
        raise ValueError("state dimension does not match the generator")
    h1, h2 = eff.h1, eff.h2
    return (-1j * (h1 @ rho - rho @ h1)
            - (h2 @ rho + rho @ h2)
            + 2.0 * np.trace(h2 @ rho).real * rho)


def nonlinear_state_rhs(eff: SelectiveEffective, psi) -> np.ndarray:
    """State-vector form of the branch dynamics for pure states:
    d psi / dT = -i H1 psi - H2 psi + <psi|H2|psi> psi (norm-preserving)."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != eff.dim:
        raise ValueError("state dimension does not match the generator")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValueError("state vector must be normalized")
    h2_psi = eff.h2 @ psi
    return -1j * (eff.h1 @ psi) - h2_psi + np.vdot(psi, h2_psi).real * psi


def purity_derivative(eff: SelectiveEffective, rho) -> float:
    """d tr[rho^2] / dT along the nonlinear density equation:
    4 (tr[rho^2] tr[H2 rho] - tr[H2 rho^2])."""
    rho = as_matrix(rho)
    rho2 = rho @ rho
    h2 = eff.h2
    return 4.0 * float((np.trace(rho2) * np.trace(h2 @ rho) - np.trace(h2 @ rho2)).real)


def _integrate(rhs, y0, times, n_steps):
    times = np.asarray(times, dtype=float)
    span = float(times[-1] - times[0])
    target = span / n_steps if span > 0 else 0.0
    out = [y0]
    y = y0
    for a, b in zip(times[:-1], times[1:]):
        gap = float(b - a)
        if gap < 0:
            raise ValueError("times must be non-decreasing")
        if gap == 0:
            out.append(y)
            continue
        m = max(1, round(gap / target)) if target > 0 else 1
        dt = gap / m
        for _ in range(m):
            y = ode_step_rk4(rhs, y, dt)
        out.append(y)
    return out


def integrate_density(eff: SelectiveEffective, rho0, times,
                      n_steps: int = DEFAULT_ODE_STEPS) -> list[np.ndarray]:
    """Fixed-step RK4 integration of the nonlinear density equation, sampled
    at `times` (n_steps RK4 steps across the whole span)."""
    rho0 = as_matrix(rho0).astype(complex)
    return _integrate(lambda r: nonlinear_density_rhs(eff, r), rho0, times, n_steps)


def integrate_state(eff: SelectiveEffective, psi0, times,
                    n_steps: int = DEFAULT_ODE_STEPS) -> list[np.ndarray]:
    """Fixed-step RK4 integration of the state-vector equation."""
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)

    def rhs(psi):
        h2_psi = eff.h2 @ psi
        return -1j * (eff.h1 @ psi) - h2_psi + np.vdot(psi, h2_psi).real * psi

    return _integrate(rhs, psi0, times, n_steps)
