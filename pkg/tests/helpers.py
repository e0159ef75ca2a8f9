"""Seeded random generators shared across the test modules."""

import numpy as np

from stroblim import HamiltonianSpec, MeasurementSpec


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, dim, norm=None):
    m = random_complex(rng, (dim, dim))
    h = (m + m.conj().T) / 2
    if norm is not None:
        h = h / np.linalg.norm(h, 2) * norm
    return h


def random_unitary(rng, dim):
    q, r = np.linalg.qr(random_complex(rng, (dim, dim)))
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def random_density(rng, dim):
    m = random_complex(rng, (dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def random_ket(rng, dim):
    v = random_complex(rng, dim)
    return v / np.linalg.norm(v)


def random_hamiltonian_spec(rng, dim_sys, dim_pr, n_terms=2, gamma=2.0):
    """Random interaction with Hermitian unit-norm factors."""
    terms = []
    for _ in range(n_terms):
        a = random_hermitian(rng, dim_sys, norm=1.0)
        b = random_hermitian(rng, dim_pr, norm=1.0)
        terms.append((a, b))
    return HamiltonianSpec(gamma, tuple(terms))


def random_projector_family(rng, dim, n_blocks=None):
    """Complete orthogonal projector family from a random unitary's columns."""
    u = random_unitary(rng, dim)
    if n_blocks is None:
        n_blocks = int(rng.integers(2, dim + 1))
    cuts = sorted(rng.choice(np.arange(1, dim), size=n_blocks - 1, replace=False))
    bounds = [0, *cuts, dim]
    groups = [[u[:, k] for k in range(bounds[i], bounds[i + 1])]
              for i in range(n_blocks)]
    return groups


def family_spec(groups, selected_index=None):
    projs = []
    bases = []
    for g in groups:
        v = np.column_stack(g)
        projs.append(v @ v.conj().T)
        bases.append(v)
    return MeasurementSpec(tuple(projs), selected_index, tuple(bases))
