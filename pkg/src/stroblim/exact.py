"""Exact interrupted evolution, the oracle for every stroboscopic-limit result.

A run alternates unitary segments of duration tau with projective events:
in selective mode a single Kraus projector per observed outcome (the state
becomes unnormalized and its trace tracks the cumulative outcome
probability), in non-selective mode the full measurement channel.  Each
period is unitary first, then measurement, so the k-th measurement happens
at t = k*tau and samples taken at t = n*tau are post-measurement states;
that ordering is what makes the closed-form checks exact at integer
multiples of tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (DEFAULT_TOL, as_matrix, dag, expm, is_projector, kron,
                     max_abs, partial_trace)
from .model import HamiltonianSpec, InitialState, MeasurementSpec
from .trajectory import Trajectory

PROB_FLOOR = 1e-14


class VanishingProbabilityError(RuntimeError):
    """A conditional branch reached numerically zero probability."""


def steps_in(total_time: float, tau: float) -> int:
    """Number of whole measurement periods in total_time, floor with fp slack."""
    return int(math.floor(total_time / tau + 1e-9))


@dataclass(frozen=True)
class EvolutionPlan:
    """One interrupted-evolution run: Hamiltonian, measurement, timing, outcomes.

    Without an explicit outcome_sequence, a selective run repeats the
    measurement's selected outcome (the coincident-outcome shortcut).
    """

    hamiltonian: HamiltonianSpec
    measurement: MeasurementSpec
    tau: float
    total_time: float
    outcome_sequence: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.total_time < 0:
            raise ValueError("total_time must be non-negative")
        if self.measurement.dim_pr != self.hamiltonian.dim_pr:
            raise ValueError("measurement and Hamiltonian probe dimensions differ")
        if self.outcome_sequence is not None:
            seq = tuple(int(i) for i in self.outcome_sequence)
            if len(seq) != self.n_steps:
                raise ValueError(f"outcome sequence length {len(seq)} does not match "
                                 f"floor(T/tau) = {self.n_steps}")
            if any(not 0 <= i < len(self.measurement.projectors) for i in seq):
                raise ValueError("outcome index out of range")
            object.__setattr__(self, "outcome_sequence", seq)

    @property
    def n_steps(self) -> int:
        return steps_in(self.total_time, self.tau)

    @property
    def residual(self) -> float:
        res = self.total_time - self.n_steps * self.tau
        return res if res > 1e-9 * self.tau else 0.0


def unitary_step(rho, h, t: float) -> np.ndarray:
    """Conjugate rho by exp(-i h t).  Works for unnormalized states too."""
    rho = as_matrix(rho)
    h = as_matrix(h)
    if rho.shape != h.shape:
        raise ValueError("state and Hamiltonian dimensions differ")
    u = expm(-1j * t * h)
    return u @ rho @ dag(u)


def apply_instrument(rho, c, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Single-Kraus projective instrument rho -> C rho C (trace-decreasing)."""
    rho = as_matrix(rho)
    c = as_matrix(c)
    if not is_projector(c, tol):
        raise ValueError("instrument Kraus operator must be a projector")
    return c @ rho @ c


def nonselective_channel(rho, spec: MeasurementSpec) -> np.ndarray:
    """Measurement channel sum_i C_i rho C_i for a complete probe family.

    rho may live on the probe alone or on any system (x) probe space whose
    probe factor matches the projector dimension.
    """
    rho = as_matrix(rho)
    projs = spec.projectors
    if max_abs(sum(projs) - np.eye(spec.dim_pr)) > DEFAULT_TOL:
        raise ValueError("non-selective channel requires a complete projector family")
    if rho.shape[0] % spec.dim_pr != 0:
        raise ValueError("state dimension is not a multiple of the probe dimension")
    dim_sys = rho.shape[0] // spec.dim_pr
    eye_sys = np.eye(dim_sys, dtype=complex)
    out = np.zeros_like(rho)
    for p in projs:
        c = kron(eye_sys, p)
        out += c @ rho @ c
    return out


def _record(times, states, sys_states, norms, t, rho_u, dims):
    norm = float(np.trace(rho_u).real)
    rho = rho_u / norm
    times.append(t)
    states.append(rho)
    sys_states.append(partial_trace(rho, dims, "sys"))
    norms.append(norm)


def run_selective(plan: EvolutionPlan, init: InitialState,
                  prob_floor: float = PROB_FLOOR) -> Trajectory:
    """Propagate the post-selected branch, sampling at every measurement instant.

    The state is carried unnormalized; `norms` is the cumulative probability
    p_Phi of the observed outcome string.  Raises VanishingProbabilityError as
    soon as p_Phi drops below prob_floor.
    """
    ham = plan.hamiltonian
    meas = plan.measurement
    dims = ham.dims
    if init.dims != dims:
        raise ValueError("initial state does not match Hamiltonian dimensions")
    if plan.outcome_sequence is not None:
        seq = plan.outcome_sequence
    elif meas.selected_index is not None:
        seq = (meas.selected_index,) * plan.n_steps
        p_sel = meas.selected_projector()
        if max_abs(p_sel @ init.rho_pr @ p_sel - init.rho_pr) > DEFAULT_TOL:
            raise ValueError("initial probe state must be supported in the "
                             "selected projector's range")
    else:
        raise ValueError("selective run needs a selected outcome or an "
                         "explicit outcome sequence")

    eye_sys = np.eye(dims.dim_sys, dtype=complex)
    c_ops = [kron(eye_sys, p) for p in meas.projectors]
    u = expm(-1j * plan.tau * ham.assemble())
    u_dag = dag(u)

    times: list[float] = []
    states: list[np.ndarray] = []
    sys_states: list[np.ndarray] = []
    norms: list[float] = []
    rho_u = init.joint()
    _record(times, states, sys_states, norms, 0.0, rho_u, dims)
    for k in range(plan.n_steps):
        rho_u = u @ rho_u @ u_dag
        c = c_ops[seq[k]]
        rho_u = c @ rho_u @ c
        norm = float(np.trace(rho_u).real)
        if norm < prob_floor:
            raise VanishingProbabilityError(
                f"outcome sequence has vanishing probability at step {k + 1} "
                f"(p_Phi = {norm:.3e} < {prob_floor:.1e})")
        _record(times, states, sys_states, norms, (k + 1) * plan.tau, rho_u, dims)
    if plan.residual > 0:
        rho_u = unitary_step(rho_u, ham.assemble(), plan.residual)
        _record(times, states, sys_states, norms, plan.total_time, rho_u, dims)
    return Trajectory(np.array(times), states, sys_states, np.array(norms), dims)


def run_nonselective(plan: EvolutionPlan, init: InitialState) -> Trajectory:
    """Propagate under repeated channel applications, sampling at t = n*tau.

    The channel is applied once at t = 0, which realizes the convention of
    starting the clock at the first measurement when the initial state is not
    already a channel fixed point.  Samples at integer multiples of tau are
    therefore block-diagonal in the measurement eigenbasis; a trailing
    fractional-period sample (present only when total_time is not a multiple
    of tau) is pre-measurement.
    """
    ham = plan.hamiltonian
    meas = plan.measurement
    if meas.selected_index is not None:
        raise ValueError("non-selective run requires the complete projector family "
                         "(no selected outcome)")
    dims = ham.dims
    if init.dims != dims:
        raise ValueError("initial state does not match Hamiltonian dimensions")
    u = expm(-1j * plan.tau * ham.assemble())
    u_dag = dag(u)

    times: list[float] = []
    states: list[np.ndarray] = []
    sys_states: list[np.ndarray] = []
    norms: list[float] = []
    rho = nonselective_channel(init.joint(), meas)
    _record(times, states, sys_states, norms, 0.0, rho, dims)
    for k in range(plan.n_steps):
        rho = u @ rho @ u_dag
        rho = nonselective_channel(rho, meas)
        _record(times, states, sys_states, norms, (k + 1) * plan.tau, rho, dims)
    if plan.residual > 0:
        rho = unitary_step(rho, ham.assemble(), plan.residual)
        _record(times, states, sys_states, norms, plan.total_time, rho, dims)
    return Trajectory(np.array(times), states, sys_states, np.array(norms), dims)
