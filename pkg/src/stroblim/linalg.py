"""Dense complex linear-algebra kernel shared by all dynamics modules.

Operators are plain complex numpy arrays and stay small (dim <= ~16 in every
bundled scenario), so the routines here favor robustness and determinism over
speed: dense storage, a scaling-and-squaring Pade exponential with an
eigendecomposition fast path for (anti-)Hermitian generators, and a fixed-step
classical RK4 integrator.  All functions are pure; nothing mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class TensorDims:
    """Factor dimensions of a system (x) probe bipartition."""

    dim_sys: int
    dim_pr: int

    def __post_init__(self) -> None:
        if self.dim_sys < 1 or self.dim_pr < 1:
            raise ValueError("tensor factor dimensions must be positive")

    @property
    def total(self) -> int:
        return self.dim_sys * self.dim_pr


def as_matrix(a) -> np.ndarray:
    """Coerce input to a square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.asarray(a)).T


def max_abs(a) -> float:
    a = np.asarray(a)
    return 0.0 if a.size == 0 else float(np.max(np.abs(a)))


def op_norm(a) -> float:
    """Operator norm (largest singular value)."""
    return float(np.linalg.norm(as_matrix(a), 2))


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(a)
    return max_abs(m - dag(m)) <= tol


def is_psd(a, tol: float = DEFAULT_TOL) -> bool:
    """Hermitian with spectrum above -tol."""
    m = as_matrix(a)
    if not is_hermitian(m, tol):
        return False
    w = np.linalg.eigvalsh((m + dag(m)) / 2)
    return bool(w.min() >= -tol)


def is_projector(a, tol: float = DEFAULT_TOL) -> bool:
    """X is Hermitian and idempotent within tol."""
    m = as_matrix(a)
    return is_hermitian(m, tol) and max_abs(m @ m - m) <= tol


def is_unitary(a, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(a)
    return max_abs(dag(m) @ m - np.eye(m.shape[0])) <= tol


def is_density(a, tol: float = DEFAULT_TOL) -> bool:
    """Hermitian, positive semidefinite, unit trace."""
    m = as_matrix(a)
    return is_psd(m, tol) and abs(complex(np.trace(m)) - 1.0) <= tol


def kron(*ops) -> np.ndarray:
    """Kronecker product of one or more operators, left-associated."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


# Degree-13 diagonal Pade coefficients for the exponential.
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def _expm_pade(m: np.ndarray) -> np.ndarray:
    norm1 = float(np.linalg.norm(m, 1))
    s = 0
    if norm1 > _PADE13_THETA:
        s = int(math.ceil(math.log2(norm1 / _PADE13_THETA)))
        if s > 60:
            raise ValueError("matrix exponential did not converge: ill-scaled input "
                             f"(1-norm {norm1:.3e})")
        m = m / (2.0 ** s)
    b = _PADE13_B
    eye = np.eye(m.shape[0], dtype=complex)
    m2 = m @ m
    m4 = m2 @ m2
    m6 = m2 @ m4
    u = m @ (m6 @ (b[13] * m6 + b[11] * m4 + b[9] * m2)
             + b[7] * m6 + b[5] * m4 + b[3] * m2 + b[1] * eye)
    v = (m6 @ (b[12] * m6 + b[10] * m4 + b[8] * m2)
         + b[6] * m6 + b[4] * m4 + b[2] * m2 + b[0] * eye)
    out = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        out = out @ out
    return out


def expm(a) -> np.ndarray:
    """Matrix exponential.

    (Anti-)Hermitian inputs go through an exact eigendecomposition; everything
    else uses degree-13 Pade with scaling and squaring.  Raises ValueError on
    non-finite input or when scaling cannot tame the norm.
    """
    m = as_matrix(a)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix exponential requires finite entries")
    scale = max(1.0, max_abs(m))
    if max_abs(m - dag(m)) <= 1e-12 * scale:
        w, v = np.linalg.eigh((m + dag(m)) / 2)
        return (v * np.exp(w)) @ dag(v)
    if max_abs(m + dag(m)) <= 1e-12 * scale:
        # m = -i h with h Hermitian, so expm(m) = V e^{-i w} V+
        w, v = np.linalg.eigh(1j * m)
        return (v * np.exp(-1j * w)) @ dag(v)
    return _expm_pade(m)


def partial_trace(rho, dims: TensorDims, keep: str = "sys") -> np.ndarray:
    """Trace out one tensor factor of a system (x) probe operator."""
    m = as_matrix(rho)
    if m.shape[0] != dims.total:
        raise ValueError(f"operator dim {m.shape[0]} does not match "
                         f"{dims.dim_sys}x{dims.dim_pr} split")
    r = m.reshape(dims.dim_sys, dims.dim_pr, dims.dim_sys, dims.dim_pr)
    if keep == "sys":
        return np.einsum("ipjp->ij", r)
    if keep == "pr":
        return np.einsum("ipiq->pq", r)
    raise ValueError(f"keep must be 'sys' or 'pr', got {keep!r}")


def hermitian_eig(a, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition a = V diag(w) V+ with w ascending.  Input must be Hermitian."""
    m = as_matrix(a)
    if not is_hermitian(m, tol):
        raise ValueError("hermitian_eig: input is not Hermitian within tolerance")
    w, v = np.linalg.eigh(m)
    return w, v


def ode_step_rk4(rhs: Callable[[np.ndarray], np.ndarray], state: np.ndarray,
                 dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of an autonomous ODE."""
    if dt <= 0:
        raise ValueError("RK4 step size must be positive")
    k1 = rhs(state)
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def trace_distance(a, b) -> float:
    """(1/2)||a - b||_1 for Hermitian a, b."""
    d = as_matrix(a) - as_matrix(b)
    w = np.linalg.eigvalsh((d + dag(d)) / 2)
    return 0.5 * float(np.sum(np.abs(w)))


def purity(rho) -> float:
    m = as_matrix(rho)
    return float(np.trace(m @ m).real)
