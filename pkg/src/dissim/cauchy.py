"""The matrix Cauchy problem for G(t, z) on the mass coordinate [0, M].

``G`` solves ``G'(t) = c_*(t)^* Omega(t, z) c_*(t) G(t)`` backwards from
``G(M) = I``, where

    Omega(t, z) = [(t - phi_*(t)) k_*(t, t) + i (alpha_*(t) - z)]^{-1}.

Writing ``R = (alpha - z)^{-1}`` and ``K = c^* R c`` (an r x r matrix), the
generator equals ``-i K [I - i (t - phi_*) K]^{-1}``.

* On an atom interval ``[phi(x-0), phi(x+0)]`` the solution is affine in ``t``,
  ``G(t) = [I - i (t - phi(x)) K] G(phi(x))``, so atoms are crossed exactly.
* On continuous stretches ``t = phi_*(t)`` and the generator is ``-i K(t)``.
  With pointwise evaluators the stretch is integrated by an embedded
  Runge-Kutta pair with error control; with node data only the coefficients
  are constant on each quadrature cell and every cell is crossed by a matrix
  exponential.

All sweeps are vectorized over a batch of spectral parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import AccuracyError, DomainError, InputError, SingularityError, SolverError
from .operator_model import OperatorSpec

__all__ = [
    "GPath",
    "PathBatch",
    "sweep_chunks",
    "omega",
    "generator",
    "solve_G",
    "sweep",
    "solve_G_picard",
    "picard_iterates",
    "picard_tail",
    "inverse_path",
    "resolvent_apply",
    "kernel_mass",
    "tail_integral",
    "resolvent_gain_bound",
    "region_threshold",
]

COND_LIMIT = 1e12
DEFAULT_TOL = 1e-10
CHUNK = 256
SWEEP_BYTES = 1 << 27  # memory budget for one chunk of sweep_chunks


# -- per-node spectral data -----------------------------------------------

def _node_eig(spec: OperatorSpec):
    cache = getattr(spec, "_eig_cache", None)
    if cache is None:
        lam, U = np.linalg.eigh(spec.alpha) if spec.measure.n_nodes else (
            np.zeros((0, spec.n)), np.zeros((0, spec.n, spec.n)))
        B = U.conj().transpose(0, 2, 1) @ spec.c
        cache = (lam, B)
        object.__setattr__(spec, "_eig_cache", cache)
    return cache


def _K_batch(lam, B, zs):
    """c^* (alpha - z)^{-1} c for every z, given alpha = U diag(lam) U^*, B = U^* c."""
    d = 1.0 / (lam[None, :] - zs[:, None])
    return np.einsum("ja,zj,jb->zab", B.conj(), d, B)


def _check_alpha(lam, zs, t):
    dist = np.abs(lam[None, :] - zs[:, None])
    bad = dist.min(axis=1) <= dist.max(axis=1) / COND_LIMIT
    if np.any(bad):
        z = complex(zs[np.argmax(bad)])
        raise SingularityError(f"alpha - z is singular at t={t:.6g}, z={z}", t=t, z=z)


def _singular(M):
    """Batch flag for ``sigma_min <= max(1, sigma_max) / COND_LIMIT``.

    The scale floor of 1 matters for ``I + ...`` factors: a plain condition
    number cannot see that a 1 x 1 factor has collapsed to zero.
    """
    s = np.linalg.svd(M, compute_uv=False)
    return ~np.all(np.isfinite(s), axis=-1) | (s[..., -1] * COND_LIMIT <= np.maximum(1.0, s[..., 0]))


def _check_cond(M, zs, t, what):
    bad = _singular(M)
    if np.any(bad):
        z = complex(zs[np.argmax(bad)])
        raise SingularityError(f"{what} is singular at t={t:.6g}, z={z}", t=t, z=z)


def _expm_batch(M):
    if M.shape[-1] == 1:
        return np.exp(M)
    return expm(M)


# -- breakpoint plan ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Plan:
    t: np.ndarray            # ascending breakpoints
    steps: tuple             # backward steps, see _build_plan
    node_t: np.ndarray       # index into t of phi(node) for every merged node
    atom_t: np.ndarray       # (n_atoms, 3): indices of phi(x-0), phi(x), phi(x+0)


def _build_plan(spec: OperatorSpec, continuous: str) -> _Plan:
    m = spec.measure
    grid = m.star_grid()
    images = grid.node_images
    ts = [grid.total_mass]  # collected backwards
    steps = []
    node_t = np.zeros(m.n_nodes, int)
    atom_order = {int(k): a for a, k in enumerate(m.atom_nodes)}
    atom_t = np.zeros((len(m.atoms_x), 3), int)

    def push(t):
        ts.append(float(t))
        return len(ts) - 1

    for seg in reversed(grid.segments):
        right = len(ts) - 1
        if seg.kind == "atom":
            i_phi = push(seg.t0 + seg.mass / 2)
            i_0 = push(seg.t0)
            node_t[seg.node] = i_phi
            atom_t[atom_order[seg.node]] = (i_0, i_phi, right)
            steps.append(("atom", seg.node, seg.mass, i_0, i_phi, right))
            continue
        if continuous == "ivp":
            idx = []
            for k in range(len(seg.piece_node) - 1, -1, -1):
                node = int(seg.piece_node[k])
                a, b = seg.piece_t[k], seg.piece_t[k + 1]
                if a < images[node] < b:
                    node_t[node] = push(images[node])
                    idx.append(node_t[node])
                idx.append(push(a))
            steps.append(("ivp", seg, right, tuple(idx)))
            continue
        for k in range(len(seg.piece_node) - 1, -1, -1):
            node = int(seg.piece_node[k])
            a, b = seg.piece_t[k], seg.piece_t[k + 1]
            cur = len(ts) - 1
            if a < images[node] < b:
                node_t[node] = push(images[node])
                steps.append(("cell", node, b - images[node], node_t[node], cur))
                cur = node_t[node]
                b = images[node]
            i_a = push(a)
            steps.append(("cell", node, b - a, i_a, cur))
    T = len(ts)
    flip = lambda i: T - 1 - i  # noqa: E731
    out_steps = []
    for s in steps:
        if s[0] == "atom":
            out_steps.append(("atom", s[1], s[2], flip(s[3]), flip(s[4]), flip(s[5])))
        elif s[0] == "cell":
            out_steps.append(("cell", s[1], s[2], flip(s[3]), flip(s[4])))
        else:
            out_steps.append(("ivp", s[1], flip(s[2]), tuple(flip(i) for i in s[3])))
    t = np.array(ts[::-1])
    t[0] = 0.0
    return _Plan(t, tuple(out_steps), flip(node_t) if m.n_nodes else node_t,
                 flip(atom_t) if len(atom_t) else atom_t)


def _plan(spec: OperatorSpec, method: str) -> _Plan:
    continuous = _mode(spec, method)
    key = "_plan_" + continuous
    p = getattr(spec, key, None)
    if p is None:
        p = _build_plan(spec, continuous)
        object.__setattr__(spec, key, p)
    return p


def _mode(spec, method):
    if method not in ("auto", "ivp", "cells"):
        raise InputError(f"unknown method {method!r}")
    if method == "auto":
        return "ivp" if (spec.alpha_fn is not None and spec.c_fn is not None
                         and spec.measure.has_continuous) else "cells"
    if method == "ivp" and (spec.alpha_fn is None or spec.c_fn is None):
        raise InputError("the error-controlled integrator needs pointwise alpha and c")
    return method


# -- results --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GPath:
    """``G(t, z)`` (and its inverse) at the breakpoints of [0, M].

    ``t`` is ascending and contains 0, M, every ``phi(x-0)``, ``phi(x)``,
    ``phi(x+0)`` of an atom and the image of every quadrature node.
    ``node_t[i]`` is the index of ``phi(node_i)`` and ``atom_t[a]`` holds the
    indices of ``phi(x-0), phi(x), phi(x+0)`` of atom ``a``.  Inverse values
    are NaN where ``G`` is singular (at eigenvalues of the operator).
    """

    z: complex
    t: np.ndarray
    values: np.ndarray
    inverse_values: np.ndarray | None
    node_t: np.ndarray
    atom_t: np.ndarray

    @property
    def G0(self) -> np.ndarray:
        return self.values[0]

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[i] - t) > 1e-12 * max(1.0, self.t[-1]):
            raise InputError(f"{t!r} is not a breakpoint")
        return self.values[i]


@dataclass(frozen=True, eq=False)
class PathBatch:
    """Sweeps for a batch of ``z``: ``values[j]`` is the path for ``zs[j]``."""

    zs: np.ndarray
    t: np.ndarray
    values: np.ndarray
    inverse_values: np.ndarray | None
    node_t: np.ndarray
    atom_t: np.ndarray

    def path(self, j: int) -> GPath:
        inv = None if self.inverse_values is None else self.inverse_values[j]
        return GPath(complex(self.zs[j]), self.t, self.values[j], inv, self.node_t, self.atom_t)


# -- the sweep ------------------------------------------------------------

def _check_z(zs):
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if np.any(~np.isfinite(zs)) or np.any(zs.imag <= 0):
        raise DomainError("spectral parameters must lie in the open upper half-plane")
    return zs


def sweep(spec: OperatorSpec, zs, tol: float = DEFAULT_TOL, method: str = "auto",
          inverse: bool = True) -> PathBatch:
    """Solve the Cauchy problem for every ``z`` in ``zs`` (vectorized)."""
    zs = _check_z(zs)
    plan = _plan(spec, method)
    if len(zs) > CHUNK:
        parts = [sweep(spec, zs[i:i + CHUNK], tol, method, inverse) for i in range(0, len(zs), CHUNK)]
        inv = np.concatenate([p.inverse_values for p in parts]) if inverse else None
        return PathBatch(zs, plan.t, np.concatenate([p.values for p in parts]), inv,
                         plan.node_t, plan.atom_t)
    nz, r, T = len(zs), spec.r, len(plan.t)
    eye = np.broadcast_to(np.eye(r, dtype=complex), (nz, r, r))
    G = np.empty((nz, T, r, r), complex)
    Y = np.empty((nz, T, r, r), complex) if inverse else None
    G[:, T - 1] = eye
    if inverse:
        Y[:, T - 1] = eye
    lam, B = _node_eig(spec)
    for step in plan.steps:
        kind = step[0]
        if kind == "atom":
            _, i, mu, i0, ip, i1 = step
            _check_alpha(lam[i], zs, plan.t[ip])
            K = _K_batch(lam[i], B[i], zs)
            Lm = eye - 0.5j * mu * K
            Lp = eye + 0.5j * mu * K
            _check_cond(Lm, zs, plan.t[ip], "I - (i/2) mu K")
            G[:, ip] = np.linalg.solve(Lm, G[:, i1])
            G[:, i0] = Lp @ G[:, ip]
            if inverse:
                Y[:, ip] = Y[:, i1] @ Lm
                ok = ~_singular(Lp)
                Y[:, i0] = np.nan
                if np.any(ok):
                    Y[ok, i0] = np.linalg.solve(Lp[ok].transpose(0, 2, 1),
                                                Y[ok, ip].transpose(0, 2, 1)).transpose(0, 2, 1)
        elif kind == "cell":
            _, i, L, ia, ib = step
            _check_alpha(lam[i], zs, plan.t[ia])
            K = _K_batch(lam[i], B[i], zs)
            G[:, ia] = _expm_batch(1j * L * K) @ G[:, ib]
            if inverse:
                Y[:, ia] = Y[:, ib] @ _expm_batch(-1j * L * K)
        else:
            _, seg, ib, idx = step
            _ivp_stretch(spec, zs, seg, plan.t, ib, idx, G, Y, tol)
    return PathBatch(zs, plan.t, G, Y, plan.node_t, plan.atom_t)


def sweep_chunks(spec: OperatorSpec, zs, tol: float = DEFAULT_TOL, method: str = "auto",
                 inverse: bool = False, budget: int = SWEEP_BYTES):
    """Yield ``(index, PathBatch)`` over chunks of ``zs`` sized to ``budget`` bytes.

    For reductions over large grids where the full ``(len(zs), T, r, r)``
    path array would not fit in memory.
    """
    zs = _check_z(zs)
    T = len(_plan(spec, method).t)
    per_z = T * spec.r ** 2 * 16 * (2 if inverse else 1)
    size = max(1, min(CHUNK, budget // per_z))
    for i in range(0, len(zs), size):
        idx = np.arange(i, min(i + size, len(zs)))
        yield idx, sweep(spec, zs[idx], tol, method, inverse)


def _K_at(spec, x, zs):
    a = np.asarray(spec.alpha_fn(x), complex)
    c = np.asarray(spec.c_fn(x), complex)
    lam, U = np.linalg.eigh(a)
    return _K_batch(lam, U.conj().T @ c, zs), lam


def _ivp_stretch(spec, zs, seg, t, ib, idx, G, Y, tol):
    nz, r = len(zs), spec.r
    both = Y is not None
    if both:
        # rows whose inverse stopped existing at an atom above stay NaN
        lost = ~np.all(np.isfinite(Y[:, ib]), axis=(1, 2))
        Y0 = np.where(lost[:, None, None], np.eye(r), Y[:, ib])
    y0 = G[:, ib].ravel()
    if both:
        y0 = np.concatenate([y0, Y0.ravel()])
    half = nz * r * r

    def rhs(tt, y):
        K, lam = _K_at(spec, float(seg.x_of(tt)), zs)
        Gm = y[:half].reshape(nz, r, r)
        dG = -1j * K @ Gm
        if not both:
            return dG.ravel()
        Ym = y[half:].reshape(nz, r, r)
        return np.concatenate([dG.ravel(), (1j * Ym @ K).ravel()])

    for x in (seg.x0, seg.x1):
        _, lam = _K_at(spec, float(x), zs)
        _check_alpha(lam, zs, seg.t0)
    t_eval = t[list(idx)]
    try:
        sol = solve_ivp(rhs, (t[ib], t_eval[-1]), y0, method="DOP853", t_eval=t_eval,
                        rtol=tol, atol=tol)
    except (ValueError, FloatingPointError) as exc:  # pragma: no cover - defensive
        raise SolverError(f"integration failed on [{seg.t0:.6g}, {seg.t1:.6g}]: {exc}") from exc
    if sol.status != 0:
        cls = AccuracyError if "step size" in sol.message.lower() else SolverError
        raise cls(f"integration failed on [{seg.t0:.6g}, {seg.t1:.6g}]: {sol.message}")
    for j, i in enumerate(idx):
        G[:, i] = sol.y[:half, j].reshape(nz, r, r)
        if both:
            Y[:, i] = sol.y[half:, j].reshape(nz, r, r)
            Y[lost, i] = np.nan


def solve_G(spec: OperatorSpec, z: complex, tol: float = DEFAULT_TOL, method: str = "auto") -> GPath:
    """Backward sweep from ``G(M) = I`` for a single ``z`` in the upper half-plane."""
    return sweep(spec, [z], tol, method).path(0)


def inverse_path(spec: OperatorSpec, z: complex, tol: float = DEFAULT_TOL, method: str = "auto") -> GPath:
    """``G(t, z)^{-1}`` from its own backward equation ``Y' = -Y c^* Omega c``."""
    p = solve_G(spec, z, tol, method)
    if np.any(~np.isfinite(p.inverse_values)):
        i = int(np.nonzero(~np.isfinite(p.inverse_values).all(axis=(1, 2)))[0][0])
        raise SingularityError(f"G(t, z) is singular at t={p.t[i]:.6g}", t=float(p.t[i]), z=complex(z))
    return p


# -- pointwise Omega and generator ----------------------------------------

def _local(spec: OperatorSpec, t: float):
    m = spec.measure
    M = m.total_mass
    if not (0 <= t <= M):
        raise DomainError(f"t must lie in [0, {M}], got {t!r}")
    seg = m.star_grid().segment_at(t)
    if seg.kind == "atom":
        i = seg.node
        return spec.alpha[i], spec.c[i], seg.t0 + seg.mass / 2
    x = float(seg.x_of(t))
    if spec.alpha_fn is not None and spec.c_fn is not None:
        return np.asarray(spec.alpha_fn(x), complex), np.asarray(spec.c_fn(x), complex), t
    k = int(np.clip(np.searchsorted(seg.piece_t, t, side="right") - 1, 0, len(seg.piece_node) - 1))
    i = int(seg.piece_node[k])
    return spec.alpha[i], spec.c[i], t


def omega(spec: OperatorSpec, t: float, z: complex) -> np.ndarray:
    """``[(t - phi_*(t)) k_*(t, t) + i (alpha_*(t) - z)]^{-1}`` (n x n)."""
    a, c, ph = _local(spec, t)
    n = a.shape[0]
    br = (t - ph) * (c @ c.conj().T) + 1j * (a - z * np.eye(n))
    if _singular(br):
        raise SingularityError(f"Omega bracket singular at t={t:.6g}, z={z}", t=t, z=z)
    return np.linalg.inv(br)


def generator(spec: OperatorSpec, t: float, z: complex) -> np.ndarray:
    """``c_*^* Omega c_*`` in the r x r form ``-i K [I - i (t - phi_*) K]^{-1}``."""
    a, c, ph = _local(spec, t)
    n, r = c.shape
    Ra = a - z * np.eye(n)
    if _singular(Ra):
        raise SingularityError(f"alpha - z singular at t={t:.6g}, z={z}", t=t, z=z)
    K = c.conj().T @ np.linalg.solve(Ra, c)
    L = np.eye(r) - 1j * (t - ph) * K
    if _singular(L):
        raise SingularityError(f"Omega bracket singular at t={t:.6g}, z={z}", t=t, z=z)
    return -1j * K @ np.linalg.inv(L)


# -- norms of the kernel along [0, M] --------------------------------------

def kernel_mass(spec: OperatorSpec, norm: str = "op") -> float:
    """``int ||k(x, x)|| dmu`` with the operator (``"op"``) or trace norm."""
    return float(np.sum(_node_norms(spec, norm) * spec.measure.masses))


def _node_norms(spec, norm):
    if norm == "op":
        return spec.kernel_norms()
    if norm == "trace":
        return spec.trace_k()
    raise InputError(f"unknown norm {norm!r}")


def tail_integral(spec: OperatorSpec, t, norm: str = "op") -> np.ndarray:
    """``int_t^M ||k_*(tau, tau)|| dtau`` with node-constant kernel norms."""
    t = np.atleast_1d(np.asarray(t, float))
    vals = _node_norms(spec, norm)
    out = np.zeros_like(t)
    for seg in spec.measure.star_grid().segments:
        if seg.kind == "atom":
            lo, hi, w = np.array([seg.t0]), np.array([seg.t1]), np.array([vals[seg.node]])
            length = np.array([seg.mass])
        else:
            lo, hi = seg.piece_t[:-1], seg.piece_t[1:]
            w = vals[seg.piece_node]
            length = hi - lo
        frac = np.clip((hi[None, :] - t[:, None]) / np.where(length > 0, hi - lo, 1.0), 0, 1)
        out += np.sum(frac * length * w, axis=1)
    return out


def region_threshold(spec: OperatorSpec) -> float:
    """``1 + (1/2) max_x mu_x ||k(x, x)||`` over the atoms.

    For ``Im z`` at or above this value the bracket defining ``Omega`` is
    invertible with ``||Omega|| <= 1``, which the a priori bounds assume.
    """
    m = spec.measure
    if not m.has_atoms:
        return 1.0
    i = m.atom_nodes
    return 1.0 + 0.5 * float(np.max(m.masses[i] * spec.kernel_norms()[i]))


def resolvent_gain_bound(spec: OperatorSpec) -> float:
    """A priori gain of the resolvent map ``h -> g``.

    ``(1/2) exp(I) (exp(2 I) - 1)`` with ``I = int ||k(x, x)|| dmu``.
    """
    I = kernel_mass(spec, "op")
    return 0.5 * math.exp(I) * math.expm1(2 * I)


# -- Picard iteration -----------------------------------------------------

_CHEB_P = 20


def _cheb_setup(p=_CHEB_P):
    x = np.cos(np.pi * np.arange(p) / (p - 1))[::-1]  # ascending Lobatto points
    V = np.polynomial.chebyshev.chebvander(x, p - 1)
    Vinv = np.linalg.inv(V)
    # Q[j, :] @ v = int_{x_j}^{1} v
    Q = np.zeros((p, p))
    for k in range(p):
        e = np.zeros(p)
        e[k] = 1.0
        F = np.polynomial.chebyshev.chebint(e)
        Q[:, k] = np.polynomial.chebyshev.chebval(1.0, F) - np.polynomial.chebyshev.chebval(x, F)
    return x, Q @ Vinv


def _panels(spec, z, method):
    """Generator samples ``(a, b, Phi(t_j))`` on Chebyshev panels covering [0, M]."""
    xs, _ = _cheb_setup()
    lam, B = _node_eig(spec)
    mode = _mode(spec, method)
    zs = np.array([z])
    out = []

    def add(a, b, fn, scale):
        n_sub = max(1, int(math.ceil((b - a) * scale)))
        edges = np.linspace(a, b, n_sub + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            tj = lo + (xs + 1) * (hi - lo) / 2
            out.append((lo, hi, fn(tj)))

    for seg in spec.measure.star_grid().segments:
        if seg.kind == "atom":
            i = seg.node
            K = _K_batch(lam[i], B[i], zs)[0]
            ph = seg.t0 + seg.mass / 2
            eye = np.eye(spec.r)

            def gen(tj, K=K, ph=ph, eye=eye):
                return np.array([-1j * K @ np.linalg.inv(eye - 1j * (s - ph) * K) for s in tj])
            add(seg.t0, seg.t1, gen, 2 * np.linalg.norm(K, 2) + 1e-300)
        elif mode == "cells":
            for k, i in enumerate(seg.piece_node):
                K = _K_batch(lam[i], B[i], zs)[0]
                add(seg.piece_t[k], seg.piece_t[k + 1],
                    lambda tj, K=K: np.broadcast_to(-1j * K, (len(tj),) + K.shape),
                    2 * np.linalg.norm(K, 2) + 1e-300)
        else:
            def gen(tj, seg=seg):
                return np.array([-1j * _K_at(spec, float(seg.x_of(s)), zs)[0][0] for s in tj])
            k_sup = max(np.linalg.norm(_K_at(spec, float(x), zs)[0][0], 2)
                        for x in np.linspace(seg.x0, seg.x1, 9))
            add(seg.t0, seg.t1, gen, max(2 * k_sup, 16.0))
    return out


def picard_tail(gamma: float, k: int) -> float:
    """``sum_{j > k} gamma^j / j!`` evaluated term by term."""
    if gamma <= 0:
        return 0.0
    total, lg = 0.0, math.log(gamma)
    for j in range(k + 1, k + 400):
        term = math.exp(j * lg - math.lgamma(j + 1))
        total += term
        if term < 1e-300 or (j > gamma and term < 1e-17 * total):
            break
    return total


def picard_iterates(spec: OperatorSpec, z: complex, kmax: int, method: str = "auto"):
    """Picard iterates ``X_k(0)`` for ``k = 0..kmax`` and ``Gamma = int ||k_*||``.

    ``X_{k+1}(t) = I - int_t^M Phi(tau) X_k(tau) dtau`` with ``X_0 = I``; the
    integrals are evaluated by piecewise Chebyshev collocation, exact to
    rounding for the polynomial-in-t iterates on short panels.
    """
    _check_z([z])
    r = spec.r
    panels = _panels(spec, complex(z), method)
    gamma = kernel_mass(spec, "op")
    eye = np.eye(r, dtype=complex)
    if not panels:
        return [eye.copy() for _ in range(kmax + 1)], gamma
    _, Q = _cheb_setup()
    P = len(panels)
    half = np.array([(b - a) / 2 for a, b, _ in panels])
    F = np.array([f for _, _, f in panels])           # (P, p, r, r)
    X = np.broadcast_to(eye, F.shape).copy()
    out = [X[0, 0].copy()]
    for _ in range(kmax):
        integrand = F @ X                               # (P, p, r, r)
        local = np.einsum("jk,Pkab->Pjab", Q, integrand) * half[:, None, None, None]
        whole = local[:, 0]                             # integral over each panel
        right = np.concatenate([np.cumsum(whole[::-1], axis=0)[::-1][1:],
                                np.zeros((1, r, r), complex)])
        X = eye - (local + right[:, None])
        out.append(X[0, 0].copy())
    return out, gamma


def solve_G_picard(spec: OperatorSpec, z: complex, iterations: int, method: str = "auto"):
    """k-th Picard iterate at ``t = 0`` and the tail bound ``sum_{j>k} Gamma^j/j!``."""
    its, gamma = picard_iterates(spec, z, iterations, method)
    return its[-1], picard_tail(gamma, iterations)


# -- resolvent ------------------------------------------------------------

def resolvent_apply(spec: OperatorSpec, z: complex, h, return_g: bool = False):
    """``f = (A^* - z)^{-1} h`` through the auxiliary function ``g``.

    ``g(t) = -i int_t^M c_*(tau)^* f_*(tau) dtau`` solves a linear equation
    with the same generator as ``G``; it is swept backwards from ``g(M) = 0``
    (atoms in closed form, cells with an augmented matrix exponential) and
    ``f(x) = (alpha(x) - z)^{-1} [h(x) - c(x) g(phi(x))]``.

    Parameters
    ----------
    h : array_like, shape (N, n) or (N,)
        Values at the merged nodes.
    return_g : bool
        Also return the breakpoints and ``g`` there.
    """
    z = complex(_check_z([z])[0])
    m = spec.measure
    N, n, r = m.n_nodes, spec.n, spec.r
    h = np.asarray(h, dtype=complex)
    if h.shape == (N,) and n == 1:
        h = h.reshape(N, 1)
    if h.shape != (N, n):
        raise InputError(f"h must have shape ({N}, {n}), got {h.shape}")
    plan = _plan(spec, "cells")
    lam, B = _node_eig(spec)
    zs = np.array([z])
    T = len(plan.t)
    g = np.zeros((T, r), complex)
    Rh = np.zeros((N, n), complex)
    cRh = np.zeros((N, r), complex)
    for i in range(N):
        _check_alpha(lam[i], zs, 0.0)
        Rh[i] = np.linalg.solve(spec.alpha[i] - z * np.eye(n), h[i])
        cRh[i] = spec.c[i].conj().T @ Rh[i]
    eye = np.eye(r)
    for step in plan.steps:
        if step[0] == "atom":
            _, i, mu, i0, ip, i1 = step
            K = _K_batch(lam[i], B[i], zs)[0]
            Lm = eye - 0.5j * mu * K
            _check_cond(Lm[None], zs, plan.t[ip], "I - (i/2) mu K")
            g[ip] = np.linalg.solve(Lm, g[i1] - 0.5j * mu * cRh[i])
            g[i0] = (eye + 0.5j * mu * K) @ g[ip] - 0.5j * mu * cRh[i]
        else:
            _, i, L, ia, ib = step
            K = _K_batch(lam[i], B[i], zs)[0]
            aug = np.zeros((r + 1, r + 1), complex)
            aug[:r, :r] = -1j * K
            aug[:r, r] = 1j * cRh[i]
            E = expm(-L * aug)
            g[ia] = E[:r, :r] @ g[ib] + E[:r, r]
    f = np.empty((N, n), complex)
    for i in range(N):
        Ra_c = np.linalg.solve(spec.alpha[i] - z * np.eye(n), spec.c[i] @ g[plan.node_t[i]])
        f[i] = Rh[i] - Ra_c
    if return_g:
        return f, plan.t, g
    return f
