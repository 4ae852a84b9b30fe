"""Similarity tests: resolvent and trace constants, Carleson geometry, nu-measures.

Suprema over the upper half-plane are maxima over a :class:`ZGrid` and are
therefore lower bounds of the true suprema.  Suprema over boundary squares
and windows are computed exactly from their finite critical sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cauchy import DEFAULT_TOL, _node_eig, sweep_chunks
from .charfunc import CLUSTER_TOL, char_fn_batch, cluster_points, kernel_at
from .errors import InapplicableError, InputError, UnsupportedFormError
from .operator_model import OperatorSpec, SpectrumData, assemble, atom_eigenvalues, point_spectrum

__all__ = [
    "ZGrid",
    "CriteriaReport",
    "Verdict",
    "NuCResult",
    "lrg_constant",
    "utb_constant_trace",
    "utb_constant_integral",
    "trace_defect_matrix",
    "trace_defect_integral",
    "c3_constant",
    "carleson_kernel",
    "carleson_sup",
    "carleson_square",
    "carleson_delta",
    "sparse_constant",
    "n_sparse_decompose",
    "nu_c_pieces",
    "nu_c_density",
    "nu_dh_sup",
    "nu_h_sup",
    "poisson_nu_c",
    "sing_outer_bound",
    "sing_outer_check",
    "compute_report",
    "verdict",
]

MAX_DIM = 400
EXACT_PAIRS = 300
SPARSE_MIN = 1e-6
LRG_EXCLUDE = 1e-6
SING_TOL = 1e-12
SWEEP_METHOD = "auto"


# -- grids ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ZGrid:
    """Tensor grid ``re x im`` in the upper half-plane."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self):
        re = np.unique(np.asarray(self.re, float))
        im = np.unique(np.asarray(self.im, float))
        if np.any(im <= 0):
            raise InputError("grid points must have positive imaginary part")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.re, self.im)
        return (X + 1j * Y).ravel()

    def __len__(self):
        return len(self.re) * len(self.im)

    @classmethod
    def explicit(cls, re_min, re_max, im_min, im_max, nx=64, ny=64) -> "ZGrid":
        """Linear in Re z, logarithmic in Im z."""
        if not (im_min > 0 and im_max >= im_min and re_max >= re_min and nx >= 1 and ny >= 1):
            raise InputError("invalid grid parameters")
        return cls(np.linspace(re_min, re_max, int(nx)),
                   np.geomspace(im_min, im_max, int(ny)))

    @classmethod
    def around(cls, points=(), real_values=(), nx: int = 64, ny: int = 64) -> "ZGrid":
        """Grid adapted to a spectrum.

        Re z spans the real extent of ``points`` and ``real_values`` padded by
        one diameter; Im z is log-spaced over ``[1e-3, 1e3] * scale`` with the
        lower end also below the smallest Im of the points.  The real and
        imaginary parts of the points themselves are added so that the grid
        passes through every eigenvalue.
        """
        pts = np.atleast_1d(np.asarray(points, complex))
        rv = np.atleast_1d(np.asarray(real_values, float))
        allre = np.concatenate([pts.real, rv])
        allim = np.concatenate([pts.imag, np.zeros(len(rv))])
        if allre.size == 0:
            allre, allim = np.zeros(1), np.zeros(1)
        diam = math.hypot(allre.max() - allre.min(), allim.max() - allim.min())
        scale = max(np.abs(allre).max(), allim.max(), diam)
        scale = scale if scale > 0 else 1.0
        pad = diam if diam > 0 else scale
        lo = scale if pts.size == 0 else min(scale, pts.imag.min())
        re = np.concatenate([np.linspace(allre.min() - pad, allre.max() + pad, nx), pts.real])
        im = np.concatenate([np.geomspace(1e-3 * lo, 1e3 * scale, ny), pts.imag])
        return cls(re, im)

    @classmethod
    def for_spec(cls, spec: OperatorSpec, nx: int = 64, ny: int = 64) -> "ZGrid":
        return cls.around(point_spectrum(spec), _continuous_alpha_values(spec), nx, ny)

    def with_lower(self, factors=(10.0, 100.0)) -> "ZGrid":
        """Same grid with extra Im levels ``im.min() / f``."""
        return ZGrid(self.re, np.concatenate([self.im, [self.im.min() / f for f in factors]]))


def _continuous_alpha_values(spec):
    m = spec.measure
    if not m.has_continuous:
        return np.zeros(0)
    return np.linalg.eigvalsh(spec.alpha[m.cont_nodes]).ravel()


def _grid_points(grid):
    zs = grid.points if isinstance(grid, ZGrid) else np.atleast_1d(np.asarray(grid, complex))
    if zs.size == 0:
        raise InputError("empty grid")
    if np.any(zs.imag <= 0):
        raise InputError("grid points must lie in the upper half-plane")
    return zs


def _points(spectrum) -> np.ndarray:
    if isinstance(spectrum, SpectrumData):
        return spectrum.z
    return np.atleast_1d(np.asarray(spectrum, complex))


# -- resolvent and trace constants ----------------------------------------

def _model(spec, max_dim):
    A = assemble(spec)
    if A.dim > max_dim:
        raise InapplicableError(f"matrix dimension {A.dim} exceeds {max_dim}")
    Ah = A.normalized()
    C = spec.c.reshape(-1, spec.r) * np.sqrt(A.w)[:, None]
    return Ah, C


def _model_spectrum(spec):
    m = spec.measure
    out = []
    for i in range(m.n_nodes):
        if m.is_atom[i]:
            D = spec.alpha[i] + 0.5j * m.masses[i] * (spec.c[i] @ spec.c[i].conj().T)
            out.extend(np.linalg.eigvals(D))
        else:
            out.extend(np.linalg.eigvalsh(spec.alpha[i]))
    return np.array(out, complex)


def _chunks(zs, size=64):
    for i in range(0, len(zs), size):
        yield zs[i:i + size]


def lrg_constant(spec: OperatorSpec, grid, max_dim: int = MAX_DIM, return_details: bool = False):
    """max over the grid of ``||(A - z)^{-1}|| dist(z, sigma(A))``.

    Points closer than ``1e-6`` to the spectrum are excluded.  With a
    continuous part the spectrum is approximated by the atom eigenvalues and
    the eigenvalues of ``alpha`` at the quadrature nodes.
    """
    zs = _grid_points(grid)
    Ah, _ = _model(spec, max_dim)
    sig = _model_spectrum(spec)
    dist = np.abs(zs[:, None] - sig[None, :]).min(axis=1) if sig.size else np.full(len(zs), np.inf)
    keep = dist >= LRG_EXCLUDE
    zk, dk = zs[keep], dist[keep]
    eye = np.eye(Ah.shape[0])
    best, arg = 0.0, None
    for idx in _chunks(np.arange(len(zk))):
        s = np.linalg.svd(Ah[None] - zk[idx, None, None] * eye, compute_uv=False)[:, -1]
        val = dk[idx] / s
        j = int(np.argmax(val))
        if val[j] > best:
            best, arg = float(val[j]), complex(zk[idx][j])
    if return_details:
        return best, arg, int((~keep).sum())
    return best


def trace_defect_matrix(spec: OperatorSpec, zs, max_dim: int = MAX_DIM) -> np.ndarray:
    """``4 Im z tr[(A^* - z)^{-1} Im A (A - conj z)^{-1}]`` for every z.

    Equal to ``2 Im z ||(A^* - z)^{-1} c||_HS^2`` in orthonormal coordinates;
    evaluated through an eigendecomposition when it is well conditioned.
    """
    zs = np.atleast_1d(np.asarray(zs, complex))
    Ah, C = _model(spec, max_dim)
    lam, V = np.linalg.eig(Ah)
    if np.linalg.cond(V) < 1e6:
        # (A^H - z)^{-1} C = V^{-H} diag(1/(conj lam - z)) V^H C
        P = V.conj().T @ C
        Gm = np.linalg.inv(V.conj().T @ V)  # V^{-1} V^{-H}
        Mx = Gm * (P @ P.conj().T).T
        out = np.empty(len(zs))
        for idx in _chunks(np.arange(len(zs)), 512):
            d = 1.0 / (lam.conj()[None, :] - zs[idx, None])
            out[idx] = np.einsum("za,ab,zb->z", d.conj(), Mx, d).real
        return 2 * zs.imag * out
    out = np.empty(len(zs))
    eye = np.eye(Ah.shape[0])
    for idx in _chunks(np.arange(len(zs))):
        X = np.linalg.solve(Ah.conj().T[None] - zs[idx, None, None] * eye, np.broadcast_to(C, (len(idx),) + C.shape))
        out[idx] = 2 * zs[idx].imag * np.sum(np.abs(X) ** 2, axis=(1, 2))
    return out


def utb_constant_trace(spec: OperatorSpec, grid, route: str = "auto", max_dim: int = MAX_DIM,
                       tol: float = DEFAULT_TOL, S=None) -> float:
    """max over the grid of the trace defect ``tr(I - S^* S)``.

    ``route="matrix"`` uses the resolvent formula on the matrix model,
    ``route="charfn"`` the characteristic function (or the precomputed
    values ``S``); ``"auto"`` prefers the matrix for atomic specs of
    moderate size.
    """
    zs = _grid_points(grid)
    if route == "auto":
        route = "matrix" if spec.is_atomic and spec.measure.n_nodes * spec.n <= max_dim else "charfn"
    if route == "matrix":
        return float(trace_defect_matrix(spec, zs, max_dim).max())
    if route == "charfn":
        S = char_fn_batch(spec, zs, tol, SWEEP_METHOD) if S is None else S
        return float((spec.r - np.sum(np.abs(S) ** 2, axis=(1, 2))).max())
    raise InputError(f"unknown route {route!r}")


def trace_defect_integral(spec: OperatorSpec, zs, tol: float = DEFAULT_TOL, paths=None) -> np.ndarray:
    """``2 Im z sum_x mu_x ||(alpha(x) - z)^{-1} c(x) G(phi(x), z)||_HS^2`` for every z.

    Exact for atoms; over a continuous part this is the quadrature rule of the
    measure applied to the integrand, which loses accuracy once Im z is
    smaller than the node spacing.
    """
    zs = np.atleast_1d(np.asarray(zs, complex))
    if paths is not None:
        return _integral_from_paths(spec, zs, paths)
    out = np.empty(len(zs))
    for idx, pb in sweep_chunks(spec, zs, tol, SWEEP_METHOD):
        out[idx] = _integral_from_paths(spec, zs[idx], pb)
    return out


def _integral_from_paths(spec, zs, pb):
    lam, B = _node_eig(spec)
    m = spec.measure
    total = np.zeros(len(zs))
    for i in range(m.n_nodes):
        Gi = pb.values[:, pb.node_t[i]]
        BG = np.einsum("jr,zrs->zjs", B[i], Gi)
        d2 = 1.0 / np.abs(lam[i][None, :] - zs[:, None]) ** 2
        total += m.masses[i] * np.einsum("zj,zjs->z", d2, np.abs(BG) ** 2)
    return 2 * zs.imag * total


def utb_constant_integral(spec: OperatorSpec, grid, tol: float = DEFAULT_TOL, paths=None) -> float:
    """max over the grid of :func:`trace_defect_integral`."""
    return float(trace_defect_integral(spec, _grid_points(grid), tol, paths).max())


def c3_constant(spec: OperatorSpec, grid, tol: float = DEFAULT_TOL, return_details: bool = False,
                S=None):
    """max over the grid of ``||S(z)^{-1}|| inf_lambda |b_lambda(z)|``.

    The infimum runs over the eigenvalues in the upper half-plane (taken as
    1 when there are none).  Grid points where ``S`` is numerically singular
    are skipped and counted.  ``S`` may carry precomputed values on the grid.
    """
    zs = _grid_points(grid)
    S = char_fn_batch(spec, zs, tol, SWEEP_METHOD) if S is None else S
    smin = np.linalg.svd(S, compute_uv=False)[:, -1]
    pts = point_spectrum(spec)
    if pts.size:
        b = np.abs((zs[:, None] - pts[None, :]) / (zs[:, None] - pts.conj()[None, :])).min(axis=1)
    else:
        b = np.ones(len(zs))
    ok = smin > SING_TOL
    vals = b[ok] / smin[ok]
    best = float(vals.max()) if vals.size else float("nan")
    if return_details:
        return best, int((~ok).sum())
    return best


# -- Carleson and sparse geometry -----------------------------------------

def carleson_kernel(points, zs) -> np.ndarray:
    """``sum_k Im z Im z_k / |z - conj z_k|^2`` for every z."""
    p = _points(points)
    zs = np.atleast_1d(np.asarray(zs, complex))
    if p.size == 0:
        return np.zeros(len(zs))
    out = np.empty(len(zs))
    for idx in _chunks(np.arange(len(zs)), 2048):
        z = zs[idx, None]
        out[idx] = np.sum(z.imag * p.imag / np.abs(z - p.conj()) ** 2, axis=1)
    return out


def carleson_sup(spectrum, grid=None) -> float:
    """max over the grid of the Carleson kernel sum (grid adapted to the points by default)."""
    p = _points(spectrum)
    if p.size == 0:
        return 0.0
    grid = ZGrid.around(p) if grid is None else grid
    return float(carleson_kernel(p, _grid_points(grid)).max())


def _window_sup(pos, weight, thresh, h_extra=()):
    """sup over h > 0, x0 of ``sum{w_e : thresh_e <= h, |pos_e - x0| <= h} / h``.

    The quantity only changes when ``h`` crosses a threshold or half a gap
    between two positions, and is decreasing in ``h`` in between, so the sup
    is attained on that finite set.  For more than ``EXACT_PAIRS`` points the
    gaps are replaced by a log-spaced set (the result is then a lower bound).
    Returns ``(sup, x0, h)`` with ``x0`` centred on the points it captures.
    """
    pos, weight, thresh = (np.asarray(a, float) for a in (pos, weight, thresh))
    keep = weight > 0
    pos, weight, thresh = pos[keep], weight[keep], thresh[keep]
    P = len(pos)
    if P == 0:
        return 0.0, 0.0, 0.0
    order = np.argsort(pos, kind="stable")
    pos, weight, thresh = pos[order], weight[order], thresh[order]
    cands = [thresh]
    if P <= EXACT_PAIRS:
        gaps = np.abs(pos[:, None] - pos[None, :]) / 2
        need = np.maximum(thresh[:, None], thresh[None, :])
        cands.append(gaps[gaps >= need])
    else:
        span = max(pos.max() - pos.min(), thresh.max())
        cands.append(np.geomspace(thresh.min(), max(span, thresh.min()), 512))
    cands.append(np.asarray(h_extra, float))
    hs = np.unique(np.concatenate(cands))
    hs = hs[hs > 0]
    best = (0.0, 0.0, 0.0)
    eps = 1e-12
    for h in hs:
        sel = thresh <= h * (1 + eps)
        if not sel.any():
            continue
        p, w = pos[sel], weight[sel]
        cw = np.concatenate([[0.0], np.cumsum(w)])
        j = np.searchsorted(p, p + 2 * h * (1 + eps) + eps * abs(h), side="right")
        sums = cw[j] - cw[np.arange(len(p))]
        k = int(np.argmax(sums))
        val = sums[k] / h
        if val > best[0]:
            best = (float(val), float((p[k] + p[j[k] - 1]) / 2), float(h))
    return best


def carleson_square(spectrum, h_grid=None, x_grid=None) -> float:
    """sup of ``sigma(Q)/h`` over squares ``[x0-h, x0+h] x (0, 2h]``, ``sigma = sum Im z_k delta``.

    Exact (critical-set) computation unless explicit ``h_grid`` and
    ``x_grid`` are supplied, in which case only those squares are used.
    """
    p = _points(spectrum)
    if p.size == 0:
        return 0.0
    if h_grid is None and x_grid is None:
        return _window_sup(p.real, p.imag, p.imag / 2)[0]
    h_grid = np.atleast_1d(np.asarray(h_grid, float))
    x_grid = np.atleast_1d(np.asarray(x_grid, float))
    best = 0.0
    for h in h_grid:
        inside = (np.abs(p.real[None, :] - x_grid[:, None]) <= h) & (p.imag[None, :] <= 2 * h)
        best = max(best, float((inside * p.imag).sum(axis=1).max() / h))
    return best


def _pseudo(a, b):
    return np.abs(a - b) / np.abs(a - np.conj(b))


def sparse_constant(spectrum) -> float:
    """Pairwise infimum of ``|b_{z_k}(z_j)|``; +inf for fewer than two points, 0 for duplicates."""
    p = _points(spectrum)
    if p.size < 2:
        return float("inf")
    best = np.inf
    for idx in _chunks(np.arange(len(p)), 1024):
        d = _pseudo(p[idx, None], p[None, :])
        d[np.arange(len(idx)), idx] = np.inf
        best = min(best, float(d.min()))
    return best


def n_sparse_decompose(spectrum, eps: float):
    """Greedy first-fit split into classes with pairwise ``|b| >= eps``.

    Points are visited in increasing Im z.  Returns ``(N, labels)``; ``N`` is
    an upper bound on the least number of eps-sparse classes.
    """
    p = _points(spectrum)
    labels = np.full(len(p), -1)
    classes: list[list[int]] = []
    for i in np.argsort(p.imag, kind="stable"):
        for c, members in enumerate(classes):
            if np.all(_pseudo(p[i], p[members]) >= eps):
                members.append(i)
                labels[i] = c
                break
        else:
            classes.append([i])
            labels[i] = len(classes) - 1
    return len(classes), labels


def carleson_delta(spectrum) -> float:
    """``inf_z prod_{w != z} |b_w(z)|`` over the points (1 for a single point)."""
    p = _points(spectrum)
    if p.size < 2:
        return 1.0
    best = np.inf
    for idx in _chunks(np.arange(len(p)), 1024):
        d = _pseudo(p[idx, None], p[None, :])
        d[np.arange(len(idx)), idx] = 1.0
        with np.errstate(divide="ignore"):
            s = np.sum(np.log(d), axis=1)
        best = min(best, float(np.exp(s.min())))
    return best


# -- the measures nu_c, nu_{d,h} ------------------------------------------

def _alpha_ends(spec):
    """alpha at both ends of every quadrature cell, shape (Nc, 2, n, n)."""
    m = spec.measure
    cells = m.cells
    idx = m.cont_nodes
    if spec.alpha_fn is not None:
        return np.array([[spec.alpha_fn(float(a)), spec.alpha_fn(float(b))] for a, b in cells],
                        dtype=complex).reshape(len(idx), 2, spec.n, spec.n)
    xs, A = m.nodes_x, spec.alpha[idx]
    if len(xs) == 1:
        return np.stack([A, A], axis=1)
    out = np.empty((len(xs), 2, spec.n, spec.n), complex)
    for e in range(2):
        q = cells[:, e]
        j = np.clip(np.searchsorted(xs, q) - 1, 0, len(xs) - 2)
        t = ((q - xs[j]) / (xs[j + 1] - xs[j]))[:, None, None]
        out[:, e] = A[j] + t * (A[j + 1] - A[j])
    return out


def nu_c_pieces(spec: OperatorSpec):
    """Decompose ``nu_c`` into uniform pieces ``(lo, hi, mass)``.

    At every quadrature node ``alpha = sum_j lambda_j u_j u_j^*`` and branch
    ``j`` carries ``||u_j^* c||^2`` times the node weight; the mass is spread
    uniformly between the values ``u_j^* alpha u_j`` at the two ends of the
    node's cell.
    """
    m = spec.measure
    if not m.has_continuous:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    idx = m.cont_nodes
    lam, U = np.linalg.eigh(spec.alpha[idx])
    B = U.conj().transpose(0, 2, 1) @ spec.c[idx]
    mass = np.sum(np.abs(B) ** 2, axis=2) * m.nodes_w[:, None]
    ends = _alpha_ends(spec)
    ray = np.einsum("xaj,xeab,xbj->xej", U.conj(), ends, U).real
    lo = np.minimum(ray[:, 0], ray[:, 1]).ravel()
    hi = np.maximum(ray[:, 0], ray[:, 1]).ravel()
    return lo, hi, mass.ravel()


class _PiecewiseCDF:
    """Cumulative function of a sum of uniform pieces (and point masses)."""

    def __init__(self, lo, hi, mass):
        keep = mass > 0
        lo, hi, mass = lo[keep], hi[keep], mass[keep]
        self._total = float(mass.sum())
        width = hi - lo
        flat = width <= 1e-15 * max(1.0, np.abs(hi).max() if hi.size else 1.0)
        self.pt, self.pt_m = np.sort(lo[flat]), mass[flat][np.argsort(lo[flat])]
        self.pt_c = np.concatenate([[0.0], np.cumsum(self.pt_m)])
        lo, hi, mass = lo[~flat], hi[~flat], mass[~flat]
        s = mass / (hi - lo) if lo.size else np.zeros(0)
        o = np.argsort(lo)
        self.lo, self.s_lo = lo[o], s[o]
        self.c1_lo = np.concatenate([[0.0], np.cumsum(self.s_lo)])
        self.c2_lo = np.concatenate([[0.0], np.cumsum(self.s_lo * self.lo)])
        o = np.argsort(hi)
        self.hi, self.s_hi = hi[o], s[o]
        self.c1_hi = np.concatenate([[0.0], np.cumsum(self.s_hi)])
        self.c2_hi = np.concatenate([[0.0], np.cumsum(self.s_hi * self.hi)])

    def _ramp(self, x):
        x = np.asarray(x, float)
        j = np.searchsorted(self.lo, x, side="right")
        a = x * self.c1_lo[j] - self.c2_lo[j]
        j = np.searchsorted(self.hi, x, side="right")
        b = x * self.c1_hi[j] - self.c2_hi[j]
        return a - b

    def right(self, x):
        """nu((-inf, x])."""
        return self._ramp(x) + self.pt_c[np.searchsorted(self.pt, x, side="right")]

    def left(self, x):
        """nu((-inf, x))."""
        return self._ramp(x) + self.pt_c[np.searchsorted(self.pt, x, side="left")]

    def interval(self, a, b):
        return self.right(b) - self.left(a)

    @property
    def breakpoints(self):
        return np.unique(np.concatenate([self.lo, self.hi, self.pt]))

    @property
    def total(self):
        return self._total


@dataclass(frozen=True)
class NuCResult:
    """Histogram density of ``nu_c`` at successively halved bin widths.

    ``sups[l]`` is the largest bin density with ``bins * 2**l`` bins; the
    ratio ``growth = sups[-1] / sups[0]`` decides ``status``: below 1.5
    ``"bounded"``, at least 2 ``"unbounded"``, otherwise ``"inconclusive"``.
    """

    edges: np.ndarray
    density: np.ndarray
    sups: np.ndarray
    growth: float
    status: str

    @property
    def sup(self) -> float:
        return float(self.sups[0])


def nu_c_density(spec: OperatorSpec, bins: int = 64, levels: int = 4) -> NuCResult:
    """Density of ``nu_c`` on a uniform grid of the alpha-eigenvalue axis."""
    if not spec.measure.has_continuous:
        raise InapplicableError("the measure has no continuous part")
    lo, hi, mass = nu_c_pieces(spec)
    cdf = _PiecewiseCDF(lo, hi, mass)
    pos = mass > 0
    if not pos.any():
        edges = np.linspace(0.0, 1.0, bins + 1)
        return NuCResult(edges, np.zeros(bins), np.zeros(levels), 1.0, "bounded")
    a, b = lo[pos].min(), hi[pos].max()
    if b <= a:
        edges = np.array([a, a])
        return NuCResult(edges, np.array([np.inf]), np.full(levels, np.inf), np.inf, "unbounded")
    sups, first = [], None
    for lvl in range(levels):
        edges = np.linspace(a, b, bins * 2**lvl + 1)
        F = cdf.right(edges)
        F[0] = cdf.left(edges[:1])[0]
        dens = np.diff(F) / np.diff(edges)
        sups.append(float(dens.max()))
        if first is None:
            first = (edges, dens)
    sups = np.array(sups)
    growth = float(sups[-1] / sups[0]) if sups[0] > 0 else 1.0
    status = "bounded" if growth < 1.5 else ("unbounded" if growth >= 2 else "inconclusive")
    return NuCResult(first[0], first[1], sups, growth, status)


def _dh_entries(spec):
    if spec.measure.has_atoms and not spec.commutativity:
        raise UnsupportedFormError("nu_{d,h} needs k(x,x) to commute with alpha(x)")
    sd = atom_eigenvalues(spec)
    w = sd.mass * sd.kappa2
    return sd.alpha, w


def nu_dh_sup(spec: OperatorSpec, h_grid=None, x_grid=None, return_argmax: bool = False):
    """sup over ``x0, h`` of ``nu_{d,h}([x0 - h, x0 + h]) / h``.

    Atom branch ``j`` at ``x`` sits at ``alpha_j(x)`` with weight
    ``mu_x kappa_j(x)^2`` and counts only while that weight is at most
    ``4h``.  Exact over all windows unless grids are given.
    """
    pos, w = _dh_entries(spec)
    if h_grid is None and x_grid is None:
        val, x0, h = _window_sup(pos, w, w / 4)
        return (val, x0, h) if return_argmax else val
    best, arg = 0.0, (0.0, 0.0)
    for h in np.atleast_1d(np.asarray(h_grid, float)):
        xg = np.atleast_1d(np.asarray(x_grid, float))
        inside = (np.abs(pos[None, :] - xg[:, None]) <= h) & (w[None, :] <= 4 * h)
        sums = (inside * w).sum(axis=1) if pos.size else np.zeros(len(xg))
        k = int(np.argmax(sums))
        if sums[k] / h > best:
            best, arg = float(sums[k] / h), (float(xg[k]), float(h))
    return (best,) + arg if return_argmax else best


def _dh_truncation_status(spec):
    """Growth of the nu_{d,h} sup over heaviest-first truncations N/4, N/2, N."""
    pos, w = _dh_entries(spec)
    N = len(w)
    if N < 8:
        return "bounded", 1.0
    order = np.argsort(-w, kind="stable")
    sups = [_window_sup(pos[order[:k]], w[order[:k]], w[order[:k]] / 4)[0]
            for k in (N // 4, N // 2, N)]
    growth = sups[-1] / sups[0] if sups[0] > 0 else 1.0
    status = "bounded" if growth <= 1.5 else ("unbounded" if growth >= 2 else "inconclusive")
    return status, float(growth)


def nu_h_sup(spec: OperatorSpec, n_h: int = 96) -> float:
    """sup over ``x0, h`` of ``(nu_c + nu_{d,h})([x0 - h, x0 + h]) / h``.

    For each ``h`` the window mass is piecewise linear in ``x0`` with kinks
    where a window end meets a breakpoint of ``nu_c`` or an atom, so those
    ``x0`` are exhaustive.  ``h`` runs over the critical values of the atomic
    part plus ``n_h`` log-spaced values.
    """
    pos, w = _dh_entries(spec)
    lo, hi, mass = nu_c_pieces(spec)
    cdf = _PiecewiseCDF(lo, hi, mass)
    if cdf.total == 0 and pos.size == 0:
        return 0.0
    brk = cdf.breakpoints
    allpos = np.concatenate([brk, pos])
    span = allpos.max() - allpos.min()
    wpos = w[w > 0]
    h_lo = min([span * 1e-4] + ([wpos.min() / 8] if wpos.size else [])) or 1e-6
    h_hi = 2 * max(span, wpos.max() / 4 if wpos.size else 0.0, h_lo)
    hs = [np.geomspace(h_lo, h_hi, n_h), w / 4]
    if 0 < len(pos) <= EXACT_PAIRS:
        gaps = np.abs(pos[:, None] - pos[None, :]) / 2
        hs.append(gaps[gaps > 0])
    hs = np.unique(np.concatenate(hs))
    hs = hs[hs > 0]
    order = np.argsort(pos)
    ps, ws = pos[order], w[order]
    best = 0.0
    eps = 1e-12
    for h in hs:
        x0 = np.concatenate([brk - h, brk + h, ps - h, ps + h])
        val = cdf.interval(x0 - h, x0 + h) if cdf.total > 0 else np.zeros(len(x0))
        if ps.size:
            wh = np.where(ws <= 4 * h * (1 + eps), ws, 0.0)
            cw = np.concatenate([[0.0], np.cumsum(wh)])
            tol = eps * max(1.0, abs(h))
            val = val + cw[np.searchsorted(ps, x0 + h + tol, side="right")] \
                - cw[np.searchsorted(ps, x0 - h - tol, side="left")]
        best = max(best, float(val.max() / h))
    return best


# -- the outer factor of det S --------------------------------------------

def poisson_nu_c(spec: OperatorSpec, zs, form: str = "pieces") -> np.ndarray:
    """``Im z int dnu_c(s) / |s - z|^2`` for every z.

    ``form="pieces"`` integrates the uniform pieces exactly (arctan
    differences); ``form="nodes"`` uses the quadrature nodes directly, which
    equals ``-log |exp(i int tr c^*(alpha - z)^{-1} c dmu_c)|``.
    """
    zs = np.atleast_1d(np.asarray(zs, complex))
    m = spec.measure
    if not m.has_continuous:
        return np.zeros(len(zs))
    out = np.zeros(len(zs))
    if form == "nodes":
        lam, B = _node_eig(spec)
        idx = m.cont_nodes
        wts = np.sum(np.abs(B[idx]) ** 2, axis=2) * m.nodes_w[:, None]
        lam = lam[idx].ravel()
        wts = wts.ravel()
        for sl in _chunks(np.arange(len(zs)), 256):
            z = zs[sl, None]
            out[sl] = np.sum(wts * z.imag / np.abs(lam - z) ** 2, axis=1)
        return out
    if form != "pieces":
        raise InputError(f"unknown form {form!r}")
    lo, hi, mass = nu_c_pieces(spec)
    keep = mass > 0
    lo, hi, mass = lo[keep], hi[keep], mass[keep]
    flat = hi - lo <= 1e-15 * max(1.0, np.abs(hi).max() if hi.size else 1.0)
    for sl in _chunks(np.arange(len(zs)), 256):
        x, y = zs[sl, None].real, zs[sl, None].imag
        width = np.where(flat, 1.0, hi - lo)
        spread = mass / width * (np.arctan((hi - x) / y) - np.arctan((lo - x) / y))
        point = mass * y / ((lo - x) ** 2 + y**2)
        out[sl] = np.sum(np.where(flat, point, spread), axis=1)
    return out


def sing_outer_bound(spec: OperatorSpec, grid) -> float:
    """min over the grid of ``exp(-Im z int dnu_c(s)/|s - z|^2)``."""
    zs = _grid_points(grid)
    return float(np.exp(-poisson_nu_c(spec, zs)).min())


def sing_outer_check(spec: OperatorSpec, grid: ZGrid, factors=(10.0, 100.0)):
    """Stability of :func:`sing_outer_bound` when the grid reaches closer to the axis.

    Returns ``(value, refined, status)``; ``status`` is ``"bounded"`` unless
    the refined infimum drops below half of the original one.
    """
    v = sing_outer_bound(spec, grid)
    v2 = sing_outer_bound(spec, grid.with_lower(factors))
    status = "unbounded" if (v == 0 or v2 < 0.5 * v) else "bounded"
    return v, v2, status


# -- report and verdicts --------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    """``status`` is one of holds / fails / inconclusive / inapplicable."""

    status: str
    reasons: tuple = ()
    checks: dict = field(default_factory=dict)


@dataclass
class CriteriaReport:
    """All constants and verdicts for one spec; NaN marks an inapplicable entry (see ``notes``)."""

    C1: float = float("nan")
    C2_trace: float = float("nan")
    C2_integral: float = float("nan")
    C3: float = float("nan")
    carleson_sup: float = float("nan")
    carleson_square: float = float("nan")
    sparse_inf: float = float("nan")
    n_sparse: int = 0
    nu_c_density_sup: float = float("nan")
    nu_c_status: str = "inapplicable"
    nu_c_growth: float = float("nan")
    nu_dh_sup: float = float("nan")
    nu_dh_status: str = "inapplicable"
    nu_h_sup: float = float("nan")
    sing_outer_inf: float = float("nan")
    sing_outer_status: str = "inapplicable"
    eigenvalues: list = field(default_factory=list)
    root_checks: list = field(default_factory=list)
    verdict_2_5: Verdict | None = None
    verdict_2_6: Verdict | None = None
    notes: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)


def _try(report, name, fn):
    try:
        return fn()
    except (InapplicableError, UnsupportedFormError) as exc:
        report.notes[name] = str(exc)
        return None


def compute_report(spec: OperatorSpec, grid: ZGrid | None = None, bins: int = 64,
                   max_dim: int = MAX_DIM, tol: float = DEFAULT_TOL, sparse_eps: float = 0.1,
                   analyses=None) -> CriteriaReport:
    """Evaluate every constant on ``grid`` and derive the verdicts."""
    grid = ZGrid.for_spec(spec) if grid is None else grid
    want = set(analyses) if analyses else None
    on = lambda name: want is None or name in want  # noqa: E731
    rep = CriteriaReport(grid={"re": [float(grid.re.min()), float(grid.re.max()), len(grid.re)],
                               "im": [float(grid.im.min()), float(grid.im.max()), len(grid.im)]})
    zs = grid.points
    pts = point_spectrum(spec)
    centres, counts = cluster_points(pts) if pts.size else (np.zeros(0, complex), np.zeros(0, int))
    rep.eigenvalues = [[float(c.real), float(c.imag), int(k)] for c, k in zip(centres, counts)]
    if on("lrg"):
        v = _try(rep, "C1", lambda: lrg_constant(spec, zs, max_dim))
        rep.C1 = float("nan") if v is None else v
    S = integral = None
    if on("utb") or on("c3"):
        # one pass over the grid in memory-bounded chunks feeds both constants
        S = np.empty((len(zs), spec.r, spec.r), complex)
        integral = np.empty(len(zs))
        for idx, pb in sweep_chunks(spec, zs, tol, SWEEP_METHOD):
            S[idx] = pb.values[:, 0]
            integral[idx] = _integral_from_paths(spec, zs[idx], pb)
    if on("utb"):
        if spec.is_atomic and spec.measure.n_nodes * spec.n <= max_dim:
            rep.C2_trace = utb_constant_trace(spec, zs, "matrix", max_dim)
        else:
            rep.C2_trace = float((spec.r - np.sum(np.abs(S) ** 2, axis=(1, 2))).max())
            rep.notes["C2_trace"] = "evaluated from the characteristic function"
        rep.C2_integral = float(integral.max())
        if spec.measure.has_continuous:
            rep.notes["C2_integral"] = "quadrature of the integrand over the continuous part"
    if on("c3"):
        v, skipped = c3_constant(spec, zs, tol, return_details=True, S=S)
        rep.C3 = v
        if skipped:
            rep.notes["C3"] = f"{skipped} grid point(s) at eigenvalues skipped"
    if on("carleson"):
        rep.carleson_sup = carleson_sup(centres, zs) if centres.size else 0.0
        rep.carleson_square = carleson_square(centres)
        rep.sparse_inf = sparse_constant(centres)
        rep.n_sparse = n_sparse_decompose(centres, sparse_eps)[0] if centres.size else 0
    if on("nu"):
        nc = _try(rep, "nu_c", lambda: nu_c_density(spec, bins))
        if nc is not None:
            rep.nu_c_density_sup, rep.nu_c_status, rep.nu_c_growth = nc.sup, nc.status, nc.growth
        dh = _try(rep, "nu_dh", lambda: nu_dh_sup(spec))
        if dh is not None:
            rep.nu_dh_sup = dh
            rep.nu_dh_status = _dh_truncation_status(spec)[0]
        nh = _try(rep, "nu_h", lambda: nu_h_sup(spec))
        rep.nu_h_sup = float("nan") if nh is None else nh
        so = _try(rep, "sing_outer", lambda: sing_outer_check(spec, grid))
        if so is not None:
            rep.sing_outer_inf, _, rep.sing_outer_status = so
    v25, v26 = verdict(spec, rep, tol)
    rep.verdict_2_5, rep.verdict_2_6 = v25, v26
    return rep


def _combine(parts):
    statuses = [s for s, _ in parts.values()]
    reasons = tuple(f"{k}: {r}" for k, (s, r) in parts.items() if s != "holds")
    if "inapplicable" in statuses:
        return "inapplicable", reasons
    if "fails" in statuses:
        return "fails", reasons
    if "inconclusive" in statuses:
        return "inconclusive", reasons
    return "holds", reasons


def verdict(spec: OperatorSpec, report: CriteriaReport | None = None, tol: float = DEFAULT_TOL):
    """Verdicts for the general similarity criterion and its rank-one form.

    The general criterion needs: the density condition on ``nu_h`` (decided
    through ``nu_c`` bin halving and ``nu_{d,h}`` truncation growth), a
    sparse set of distinct eigenvalues and no root vectors.  The rank-one
    form drops the root-vector condition and is inapplicable for ``r != 1``.
    Both need ``k(x, x)`` to commute with ``alpha(x)``.
    """
    if spec.measure.has_atoms and not spec.commutativity:
        v = Verdict("inapplicable", ("k(x,x) does not commute with alpha(x)",))
        return v, v
    parts = {}
    if spec.measure.has_continuous:
        nc = nu_c_density(spec)
        st = {"bounded": "holds", "unbounded": "fails"}.get(nc.status, "inconclusive")
        parts["nu_c density"] = (st, f"{nc.status} (growth {nc.growth:.3g} under bin halving)")
    else:
        parts["nu_c density"] = ("holds", "no continuous part")
    dst, growth = _dh_truncation_status(spec)
    st = {"bounded": "holds", "unbounded": "fails"}.get(dst, "inconclusive")
    parts["nu_dh density"] = (st, f"{dst} (growth {growth:.3g} across truncations)")
    sd = atom_eigenvalues(spec)
    centres, counts = cluster_points(sd.z) if len(sd) else (np.zeros(0, complex), np.zeros(0, int))
    sp = sparse_constant(centres)
    parts["sparse"] = ("holds" if sp > SPARSE_MIN else "fails", f"pairwise infimum {sp:.3g}")
    roots = []
    for lam in centres:
        dim, mult, free = kernel_at(spec, lam, tol)
        roots.append((complex(lam), dim, mult, free))
    bad = [r for r in roots if not r[3]]
    parts["root vectors"] = ("fails" if bad else "holds",
                             f"{len(bad)} eigenvalue(s) with root vectors" if bad else "none")
    if report is not None:
        report.root_checks = [[l.real, l.imag, d, m, f] for l, d, m, f in roots]
    checks = {k: s for k, (s, _) in parts.items()}
    v25 = Verdict(*_combine(parts), checks=checks)
    if spec.r != 1:
        v26 = Verdict("inapplicable", ("rank is not one",))
    else:
        p26 = {k: v for k, v in parts.items() if k != "root vectors"}
        v26 = Verdict(*_combine(p26), checks={k: s for k, (s, _) in p26.items()})
    return v25, v26
