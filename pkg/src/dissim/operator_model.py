"""Problem data (alpha, c, k) and the finite matrix model of the operator.

The operator acts on H-valued functions on [0, 1] by

    (A f)(x) = alpha(x) f(x) + (i/2) mu({x}) k(x, x) f(x) + i int_{[0, x)} k(x, s) f(s) dmu(s)

with ``k(x, s) = c(x) c(s)^*``.  On the nodes of a :class:`~dissim.measure.Measure`
(atoms and quadrature nodes alike, each carrying its mass) this becomes a
block lower-triangular matrix.  For purely atomic measures the matrix is the
operator itself; with a continuous part every quadrature node is treated as an
atom of its own weight, which keeps ``2 Im A`` exactly equal to the sampled
kernel and therefore positive semidefinite.

Matrices act on stacked node values ``f = (f(x_0), f(x_1), ...)``.  The
relevant inner product is ``<f, g> = sum_x mu_x g(x)^* f(x)``, so adjoints are
``W^{-1} A^H W`` with ``W = diag(mu) (x) I_n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError, ModelError
from .measure import Measure

__all__ = [
    "OperatorSpec",
    "DiscreteOperator",
    "SpectrumData",
    "kernel_eval",
    "assemble",
    "adjoint",
    "imag_part",
    "joint_spectrum",
    "commutativity_defect",
    "is_commuting",
    "atom_eigenvalues",
    "point_spectrum",
    "phase_of",
]

HERMITIAN_TOL = 1e-12
COMMUTE_RTOL = 1e-9
KAPPA_RTOL = 1e-10
PHASE_ATOL = 1e-12


def _as_matrix_fn(f, shape_hint=None):
    if f is None:
        return None
    if callable(f):
        return f
    val = np.asarray(f, dtype=complex)
    return lambda x, _v=val: _v


def _to_2d(v, rows=None):
    v = np.asarray(v, dtype=complex)
    if v.ndim == 0:
        return v.reshape(1, 1)
    if v.ndim == 1:
        return v.reshape(-1, 1) if rows is None or rows == v.size else v.reshape(rows, -1)
    return v


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """A full problem instance.

    Parameters
    ----------
    measure : Measure
    alpha : ndarray, shape (N, n, n)
        Hermitian multiplier at the merged nodes of ``measure``.
    c : ndarray, shape (N, n, r)
        Kernel factor at the merged nodes.
    commutativity : bool or None
        Whether ``k(x, x)`` commutes with ``alpha(x)`` everywhere.  ``None``
        detects it; ``True`` is verified and rejected if false.
    alpha_fn, c_fn : callable, optional
        Pointwise evaluators ``x -> matrix``.  When present the continuous
        stretches of the Cauchy problem are integrated with error control
        instead of cell by cell.
    """

    measure: Measure
    alpha: np.ndarray
    c: np.ndarray
    commutativity: bool | None = None
    alpha_fn: Callable | None = None
    c_fn: Callable | None = None

    def __post_init__(self):
        m = self.measure
        a = np.asarray(self.alpha, dtype=complex)
        c = np.asarray(self.c, dtype=complex)
        N = m.n_nodes
        if a.ndim != 3 or a.shape[0] != N or a.shape[1] != a.shape[2]:
            raise InputError(f"alpha must have shape ({N}, n, n), got {a.shape}")
        if c.ndim != 3 or c.shape[0] != N or c.shape[1] != a.shape[1]:
            raise InputError(f"c must have shape ({N}, {a.shape[1]}, r), got {c.shape}")
        if c.shape[2] < 1 or a.shape[1] < 1:
            raise InputError("dimensions must be positive")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise InputError("alpha and c must be finite")
        herm = hermitian_defects(a)
        bad = np.nonzero(herm > HERMITIAN_TOL * np.maximum(1.0, np.abs(a).max(axis=(1, 2))))[0]
        if bad.size:
            raise ModelError(f"alpha is not Hermitian at node(s) {m.positions[bad].tolist()}")
        a = (a + a.conj().transpose(0, 2, 1)) / 2
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)
        commuting = is_commuting(self)
        if self.commutativity is None:
            object.__setattr__(self, "commutativity", bool(commuting))
        elif self.commutativity and not commuting:
            raise ModelError(
                f"commutativity declared but defect is {commutativity_defect(self):.3e}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_functions(cls, measure: Measure, alpha, c, commutativity=None) -> "OperatorSpec":
        """Sample callables (or constants) ``alpha(x)`` and ``c(x)`` at the nodes."""
        afn = _as_matrix_fn(alpha)
        cfn = _as_matrix_fn(c)
        a0 = _to_2d(afn(float(measure.positions[0]) if measure.n_nodes else 0.0))
        n = a0.shape[0]
        wrap_a = lambda x: _to_2d(afn(x)).reshape(n, n)  # noqa: E731
        wrap_c = lambda x: _to_2d(cfn(x), rows=n).reshape(n, -1)  # noqa: E731
        A = np.array([wrap_a(x) for x in measure.positions]).reshape(-1, n, n)
        C = np.array([wrap_c(x) for x in measure.positions])
        C = C.reshape(len(A), n, -1) if len(A) else np.zeros((0, n, wrap_c(0.0).shape[1]))
        return cls(measure, A, C, commutativity, wrap_a, wrap_c)

    @classmethod
    def from_arrays(cls, measure: Measure, alpha, c, commutativity=None) -> "OperatorSpec":
        """Use node values directly; continuous stretches are then piecewise constant."""
        return cls(measure, np.asarray(alpha, complex), np.asarray(c, complex), commutativity)

    # -- shape ------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.alpha.shape[1]

    @property
    def r(self) -> int:
        return self.c.shape[2]

    @property
    def is_atomic(self) -> bool:
        return not self.measure.has_continuous

    def kernel_diag(self) -> np.ndarray:
        """k(x, x) at every node, shape (N, n, n)."""
        return self.c @ self.c.conj().transpose(0, 2, 1)

    def trace_k(self) -> np.ndarray:
        return np.sum(np.abs(self.c) ** 2, axis=(1, 2))

    def kernel_norms(self) -> np.ndarray:
        """Operator norm of k(x, x) at each node (= largest singular value of c squared)."""
        if self.measure.n_nodes == 0:
            return np.zeros(0)
        return np.linalg.norm(self.c, ord=2, axis=(1, 2)) ** 2

    def node_index(self, x: float) -> int:
        hit = np.nonzero(np.abs(self.measure.positions - x) <= 1e-14)[0]
        if hit.size == 0:
            raise InputError(f"{x!r} is not a node of the measure")
        return int(hit[0])

    def atom_index(self, x: float) -> int:
        """Merged node index of the atom at ``x``."""
        k = self.node_index(x)
        if not self.measure.is_atom[k]:
            raise InputError(f"{x!r} is a quadrature node, not an atom")
        return k

    def alpha_at(self, x):
        return self.alpha_fn(x) if self.alpha_fn is not None else self.alpha[self.node_index(x)]

    def c_at(self, x):
        return self.c_fn(x) if self.c_fn is not None else self.c[self.node_index(x)]


def hermitian_defects(a: np.ndarray) -> np.ndarray:
    return np.abs(a - a.conj().transpose(0, 2, 1)).max(axis=(1, 2)) if len(a) else np.zeros(0)


# -- kernel and commutativity ---------------------------------------------

def kernel_eval(spec: OperatorSpec, x: float, s: float) -> np.ndarray:
    """k(x, s) = c(x) c(s)^* at two nodes."""
    cx = spec.c[spec.node_index(x)]
    cs = spec.c[spec.node_index(s)]
    return cx @ cs.conj().T


def _commutators(spec: OperatorSpec):
    k = spec.kernel_diag()
    return k @ spec.alpha - spec.alpha @ k, k


def commutativity_defect(spec: OperatorSpec) -> float:
    """max over nodes of the spectral norm of ``k(x,x) alpha(x) - alpha(x) k(x,x)``."""
    if spec.measure.n_nodes == 0:
        return 0.0
    comm, _ = _commutators(spec)
    return float(np.linalg.norm(comm, ord=2, axis=(1, 2)).max())


def is_commuting(spec: OperatorSpec, rtol: float = COMMUTE_RTOL) -> bool:
    if spec.measure.n_nodes == 0:
        return True
    comm, k = _commutators(spec)
    d = np.linalg.norm(comm, ord=2, axis=(1, 2))
    scale = np.linalg.norm(k, ord=2, axis=(1, 2)) * np.linalg.norm(spec.alpha, ord=2, axis=(1, 2))
    return bool(np.all(d <= rtol * scale + 1e-300))


# -- matrix model ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Dense block matrix acting on stacked node values, with its mu-weights."""

    matrix: np.ndarray
    weights: np.ndarray  # per node
    n: int
    positions: np.ndarray

    @property
    def w(self) -> np.ndarray:
        """Weight of every scalar coordinate (node weight repeated n times)."""
        return np.repeat(self.weights, self.n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def normalized(self) -> np.ndarray:
        """``W^{1/2} M W^{-1/2}``: the same operator in an orthonormal basis."""
        s = np.sqrt(self.w)
        return s[:, None] * self.matrix / s[None, :]

    def adjoint(self) -> "DiscreteOperator":
        """Adjoint with respect to the mu-weighted inner product."""
        w = self.w
        return DiscreteOperator(self.matrix.conj().T * w[None, :] / w[:, None],
                                self.weights, self.n, self.positions)

    def block(self, i: int, j: int) -> np.ndarray:
        n = self.n
        return self.matrix[i * n:(i + 1) * n, j * n:(j + 1) * n]


def assemble(spec: OperatorSpec) -> DiscreteOperator:
    """Block lower-triangular matrix of the operator on the nodes."""
    m = spec.measure
    N, n = m.n_nodes, spec.n
    mu = m.masses
    c = spec.c
    # K[x, s] = c(x) c(s)^* mu_s
    K = np.einsum("xar,sbr->xsab", c, c.conj()) * mu[None, :, None, None]
    lower = np.tril(np.ones((N, N)), -1)[:, :, None, None]
    blocks = 1j * K * lower
    idx = np.arange(N)
    blocks[idx, idx] = spec.alpha + 0.5j * K[idx, idx]
    A = blocks.transpose(0, 2, 1, 3).reshape(N * n, N * n)
    return DiscreteOperator(A, mu.copy(), n, m.positions.copy())


def adjoint(spec: OperatorSpec) -> DiscreteOperator:
    """Adjoint assembled directly from the upper integral over [x, 1]."""
    m = spec.measure
    N, n = m.n_nodes, spec.n
    mu = m.masses
    c = spec.c
    K = np.einsum("xar,sbr->xsab", c, c.conj()) * mu[None, :, None, None]
    upper = np.triu(np.ones((N, N)), 1)[:, :, None, None]
    blocks = -1j * K * upper
    idx = np.arange(N)
    blocks[idx, idx] = spec.alpha - 0.5j * K[idx, idx]
    A = blocks.transpose(0, 2, 1, 3).reshape(N * n, N * n)
    return DiscreteOperator(A, mu.copy(), n, m.positions.copy())


def imag_part(spec: OperatorSpec) -> tuple[DiscreteOperator, float]:
    """``Im A`` assembled from the kernel, and ``tr(2 Im A) = int tr k(x, x) dmu``."""
    m = spec.measure
    N, n = m.n_nodes, spec.n
    mu = m.masses
    K = np.einsum("xar,sbr->xsab", spec.c, spec.c.conj()) * mu[None, :, None, None]
    M = 0.5 * K.transpose(0, 2, 1, 3).reshape(N * n, N * n)
    trace = float(np.sum(spec.trace_k() * mu))
    return DiscreteOperator(M, mu.copy(), n, m.positions.copy()), trace


# -- point spectrum -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectrumData:
    """Non-real eigenvalues contributed by the atoms.

    Each entry ``j`` belongs to the atom at ``x[j]`` (branch ``branch[j]``) and
    has ``z[j] = alpha_j + (i/2) mass * kappa2``.  ``phase[j]`` makes
    ``exp(i phase) (i - z) / (i - conj z)`` positive.
    """

    x: np.ndarray
    branch: np.ndarray
    z: np.ndarray
    phase: np.ndarray
    kappa2: np.ndarray
    alpha: np.ndarray
    mass: np.ndarray
    vectors: tuple = ()

    def __len__(self):
        return len(self.z)

    @property
    def weights(self) -> np.ndarray:
        return self.z.imag

    @classmethod
    def from_points(cls, z) -> "SpectrumData":
        """Bare point set in the upper half-plane (no operator attached)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(z.imag <= 0):
            raise InputError("points must lie in the open upper half-plane")
        nan = np.full(len(z), np.nan)
        return cls(nan, np.zeros(len(z), int), z, phase_of(z), nan, z.real.copy(), nan)


def phase_of(z) -> np.ndarray:
    """Phase making ``exp(i phase) (i - z)/(i - conj z)`` real and positive.

    The factor vanishes at ``z = i``, where the phase is undefined; points
    within rounding of ``i`` get phase 0.
    """
    z = np.asarray(z, dtype=complex)
    num = 1j - z
    ratio = num / (1j - z.conj())
    return np.where(np.abs(ratio) > PHASE_ATOL, -np.angle(ratio), 0.0)


def _cluster_eigh(k: np.ndarray, tol: float):
    lam, V = np.linalg.eigh(k)
    order = np.argsort(-lam, kind="stable")
    lam, V = lam[order], V[:, order]
    groups, start = [], 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or abs(lam[i] - lam[start]) > tol:
            groups.append((float(np.mean(lam[start:i])), V[:, start:i]))
            start = i
    return groups


def joint_spectrum(spec: OperatorSpec, x: float):
    """Common eigenbasis of ``k(x, x)`` and ``alpha(x)`` at an atom.

    Returns a list of ``(kappa2, alpha_j, e_j)`` over the positive eigenvalues
    of ``k(x, x)``, ordered by descending ``kappa2`` then ascending
    ``alpha_j``; ties in ``kappa2`` are split by diagonalizing ``alpha`` on the
    eigenspace.  The part of ``alpha`` on ``ker k(x, x)`` is dropped.
    """
    i = spec.atom_index(x)
    k = spec.c[i] @ spec.c[i].conj().T
    a = spec.alpha[i]
    kn = np.linalg.norm(k, 2)
    d = np.linalg.norm(k @ a - a @ k, 2)
    if d > COMMUTE_RTOL * kn * np.linalg.norm(a, 2) + 1e-300:
        raise ModelError(f"k(x,x) and alpha(x) do not commute at x={x} (defect {d:.3e})")
    if kn == 0:
        return []
    out = []
    for lam, V in _cluster_eigh(k, KAPPA_RTOL * kn):
        if lam <= KAPPA_RTOL * kn:
            continue
        aj, U = np.linalg.eigh(V.conj().T @ a @ V)
        for j in range(len(aj)):
            out.append((lam, float(aj[j]), V @ U[:, j]))
    return out


def atom_eigenvalues(spec: OperatorSpec) -> SpectrumData:
    """Eigenvalues ``alpha_j(x) + (i/2) mu_x kappa_j(x)^2`` over atoms and branches."""
    m = spec.measure
    cols = {k: [] for k in ("x", "branch", "z", "kappa2", "alpha", "mass")}
    vecs = []
    for x, mass in zip(m.atoms_x, m.atoms_mass):
        for j, (k2, aj, e) in enumerate(joint_spectrum(spec, float(x))):
            cols["x"].append(float(x))
            cols["branch"].append(j)
            cols["z"].append(aj + 0.5j * mass * k2)
            cols["kappa2"].append(k2)
            cols["alpha"].append(aj)
            cols["mass"].append(float(mass))
            vecs.append(e)
    z = np.array(cols["z"], dtype=complex)
    return SpectrumData(np.array(cols["x"], float), np.array(cols["branch"], int), z,
                        phase_of(z), np.array(cols["kappa2"], float),
                        np.array(cols["alpha"], float), np.array(cols["mass"], float),
                        tuple(vecs))


def point_spectrum(spec: OperatorSpec, atoms_only: bool = True) -> np.ndarray:
    """Non-real eigenvalues of the diagonal blocks ``alpha + (i/2) mu k``.

    The matrix model is block triangular, so these are its eigenvalues in the
    upper half-plane; unlike :func:`atom_eigenvalues` no commutativity is
    needed.
    """
    m = spec.measure
    sel = np.nonzero(m.is_atom)[0] if atoms_only else np.arange(m.n_nodes)
    out = []
    for i in sel:
        D = spec.alpha[i] + 0.5j * m.masses[i] * (spec.c[i] @ spec.c[i].conj().T)
        ev = np.linalg.eigvals(D)
        scale = max(1.0, np.abs(D).max())
        out.extend(ev[ev.imag > 1e-12 * scale])
    return np.array(out, dtype=complex)
