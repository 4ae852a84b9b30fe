"""Ready-made problem instances and point families used by tests and demos."""
from __future__ import annotations

import numpy as np

from .measure import Measure
from .operator_model import OperatorSpec

__all__ = [
    "one_atom",
    "two_atom",
    "zero_kernel",
    "lebesgue_spec",
    "random_atomic",
    "random_commuting",
    "random_z",
    "geometric_points",
    "cluster_points",
    "cluster_spec",
    "geometric_spec",
]


def one_atom(x: float = 0.5, mass: float = 1.0, alpha: float = 0.0, k: float = 2.0) -> OperatorSpec:
    """Scalar operator on a single atom; ``A = alpha + i mass k / 2``."""
    return OperatorSpec.from_functions(Measure.atomic([x], [mass]), alpha, np.sqrt(k))


def two_atom(masses=(1.0, 1.0), c: float = 1.0) -> OperatorSpec:
    """Two atoms, ``alpha = 0`` and constant scalar ``c``."""
    return OperatorSpec.from_functions(Measure.atomic([0.25, 0.75], masses), 0.0, c)


def zero_kernel(n_atoms: int = 3, n: int = 2, r: int = 1, seed: int = 0) -> OperatorSpec:
    """Selfadjoint case ``k = 0`` with random Hermitian ``alpha``."""
    rng = np.random.default_rng(seed)
    m = Measure.atomic(np.sort(rng.uniform(0, 1, n_atoms)), rng.uniform(0.2, 1, n_atoms))
    X = rng.normal(size=(n_atoms, n, n)) + 1j * rng.normal(size=(n_atoms, n, n))
    return OperatorSpec.from_arrays(m, (X + X.conj().transpose(0, 2, 1)) / 2,
                                    np.zeros((n_atoms, n, r)))


def lebesgue_spec(alpha=lambda x: x, k: float = 1.0, n_nodes: int = 512, atoms=()) -> OperatorSpec:
    """Scalar ``alpha`` and constant ``k`` over Lebesgue measure (plus optional atoms)."""
    m = Measure.from_density("lebesgue", n_nodes=n_nodes, atoms=atoms)
    return OperatorSpec.from_functions(m, alpha, np.sqrt(k))


def _atomic_measure(rng, n_atoms):
    x = np.sort(rng.choice(np.arange(1, 1000), size=n_atoms, replace=False)) / 1000.0
    return Measure.atomic(x, rng.uniform(0.05, 1.0, n_atoms))


def random_atomic(rng, n_atoms=None, n=None, r=None, scale: float = 1.0) -> OperatorSpec:
    """Random purely atomic spec (up to 20 atoms, dim H up to 4, rank up to 3)."""
    n_atoms = n_atoms or int(rng.integers(1, 21))
    n = n or int(rng.integers(1, 5))
    r = r or int(rng.integers(1, 4))
    m = _atomic_measure(rng, n_atoms)
    X = rng.normal(size=(n_atoms, n, n)) + 1j * rng.normal(size=(n_atoms, n, n))
    alpha = (X + X.conj().transpose(0, 2, 1)) / 2
    c = scale * (rng.normal(size=(n_atoms, n, r)) + 1j * rng.normal(size=(n_atoms, n, r))) / np.sqrt(2 * n)
    return OperatorSpec.from_arrays(m, alpha, c)


def _unitary(rng, n):
    Q, R = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_commuting(rng, n_atoms=None, n=None, r=None, scale: float = 1.0) -> OperatorSpec:
    """Random atomic spec with ``k(x, x)`` and ``alpha(x)`` sharing an eigenbasis.

    ``alpha = U diag(a) U^*`` and ``c = U D V`` with ``D`` zero off its
    diagonal, so ``k = U D D^* U^*`` is diagonal in the same basis.
    """
    n_atoms = n_atoms or int(rng.integers(1, 21))
    n = n or int(rng.integers(1, 5))
    r = r or int(rng.integers(1, 4))
    m = _atomic_measure(rng, n_atoms)
    alpha = np.empty((n_atoms, n, n), complex)
    c = np.empty((n_atoms, n, r), complex)
    for i in range(n_atoms):
        U, V = _unitary(rng, n), _unitary(rng, r)
        D = np.zeros((n, r))
        d = min(n, r)
        D[np.arange(d), np.arange(d)] = scale * rng.uniform(0.2, 1.5, d)
        alpha[i] = U @ np.diag(rng.normal(size=n)) @ U.conj().T
        c[i] = U @ D @ V
    return OperatorSpec.from_arrays(m, alpha, c, commutativity=True)


def random_z(rng, size: int, re=(-3.0, 3.0), im=(0.05, 5.0)) -> np.ndarray:
    """Points in the upper half-plane, log-uniform in the imaginary part."""
    x = rng.uniform(*re, size)
    y = np.exp(rng.uniform(np.log(im[0]), np.log(im[1]), size))
    return x + 1j * y


def geometric_points(K: int) -> np.ndarray:
    """``i 2^k`` for ``k = 0..K``: a Carleson (interpolating) sequence."""
    return 1j * 2.0 ** np.arange(K + 1)


def cluster_points(N: int) -> np.ndarray:
    """``i / n^2`` for ``n = 1..N``: accumulates at 0, not Carleson."""
    n = np.arange(1, N + 1)
    return 1j / n**2


def _diagonal_spec(z):
    """Atomic rank-one scalar spec with eigenvalues ``z`` (one per atom).

    Atoms of mass 1 carry ``alpha = Re z`` and ``|c|^2 = 2 Im z``; the model is
    triangular, not diagonal, but its point spectrum is exactly ``z``.
    """
    z = np.asarray(z, complex)
    N = len(z)
    m = Measure.atomic((np.arange(N) + 1) / (N + 1), np.ones(N))
    return OperatorSpec.from_arrays(m, z.real.reshape(N, 1, 1),
                                    np.sqrt(2 * z.imag).reshape(N, 1, 1))


def cluster_spec(N: int) -> OperatorSpec:
    """Rank-one spec whose eigenvalues are ``i / n^2``."""
    return _diagonal_spec(cluster_points(N))


def geometric_spec(K: int) -> OperatorSpec:
    """Rank-one spec whose eigenvalues are ``i 2^k``."""
    return _diagonal_spec(geometric_points(K))
