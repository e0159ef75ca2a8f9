"""Time-series carrier shared by the exact and stroboscopic-limit runners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import TensorDims, as_matrix
from .model import pauli

_PAULI_XYZ = (pauli(1), pauli(2), pauli(3))


@dataclass
class Trajectory:
    """Sampled evolution: normalized states plus per-sample bookkeeping.

    `states` live on the propagation space (system-probe, a restricted joint
    space, or the system alone, depending on the producer); `sys_states` are
    always the normalized reduced system states.  `norms` is the trace of the
    unnormalized state before renormalization, i.e. the cumulative success
    probability of a conditional run (identically 1 for trace-preserving runs).
    """

    times: np.ndarray
    states: list[np.ndarray]
    sys_states: list[np.ndarray]
    norms: np.ndarray
    dims: TensorDims | None = None

    def __len__(self) -> int:
        return len(self.times)

    @property
    def p_err(self) -> np.ndarray:
        """Probability that the run left the post-selected outcome branch."""
        return 1.0 - self.norms

    def p_up(self) -> np.ndarray:
        """Population of the first system basis state."""
        return np.array([s[0, 0].real for s in self.sys_states])

    def purities(self) -> np.ndarray:
        return np.array([np.trace(s @ s).real for s in self.sys_states])

    def bloch(self) -> np.ndarray:
        """Bloch vectors (n, 3) of a two-dimensional system marginal."""
        if self.sys_states[0].shape[0] != 2:
            raise ValueError("Bloch vectors need a two-dimensional system state")
        return np.array([[np.trace(s @ sig).real for sig in _PAULI_XYZ]
                         for s in self.sys_states])

    def subsample(self, indices) -> "Trajectory":
        idx = list(indices)
        return Trajectory(
            times=self.times[idx],
            states=[self.states[i] for i in idx],
            sys_states=[self.sys_states[i] for i in idx],
            norms=self.norms[idx],
            dims=self.dims,
        )


def bloch_vector(rho) -> np.ndarray:
    """Bloch vector of one 2x2 state."""
    m = as_matrix(rho)
    if m.shape[0] != 2:
        raise ValueError("Bloch vector needs a 2x2 state")
    return np.array([np.trace(m @ sig).real for sig in _PAULI_XYZ])


def bloch_to_density(r) -> np.ndarray:
    """Inverse of bloch_vector: rho = (I + sum_k r_k sigma_k) / 2."""
    r = np.asarray(r, dtype=float).reshape(3)
    rho = np.eye(2, dtype=complex)
    for rk, sig in zip(r, _PAULI_XYZ):
        rho = rho + rk * sig
    return rho / 2.0
