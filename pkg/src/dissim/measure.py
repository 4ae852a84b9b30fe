"""Finite positive measures on [0, 1] and the mass coordinate on [0, M].

A measure is a finite set of atoms plus a quadrature model of its continuous
part.  Each quadrature node carries its weight spread uniformly over a *cell*
of [0, 1]; the cells tile the support of the continuous part.  This makes the
cumulative function piecewise linear, so ``phi`` and ``psi`` are exact for the
model and the pullback ``f_*(t) = f(psi(t))`` is piecewise constant in ``t``
for node-sampled ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "Measure",
    "Segment",
    "StarGrid",
    "phi",
    "psi",
    "phi_star",
    "build_star_grid",
    "star_integral",
    "sample",
]

_POS_TOL = 1e-14


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Measure:
    """Atoms plus a cell-based quadrature model of the continuous part.

    Parameters
    ----------
    atoms_x, atoms_mass : array_like
        Atom positions (strictly increasing, in [0, 1]) and masses (> 0).
    nodes_x, nodes_w : array_like
        Quadrature nodes and weights of the continuous part.
    cells : array_like, shape (len(nodes_x), 2), optional
        Interval of [0, 1] over which each node's weight is spread.  Derived
        from node midpoints when omitted.

    Nodes coinciding with an atom are moved off it by half the local node
    spacing before the cells are derived.
    """

    atoms_x: np.ndarray
    atoms_mass: np.ndarray
    nodes_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    nodes_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cells: np.ndarray | None = None

    def __post_init__(self):
        ax = np.atleast_1d(np.asarray(self.atoms_x, dtype=float))
        am = np.atleast_1d(np.asarray(self.atoms_mass, dtype=float))
        nx = np.atleast_1d(np.asarray(self.nodes_x, dtype=float))
        nw = np.atleast_1d(np.asarray(self.nodes_w, dtype=float))
        if ax.shape != am.shape or nx.shape != nw.shape:
            raise InputError("positions and masses/weights must have equal length")
        if np.any((ax < 0) | (ax > 1)) or np.any((nx < 0) | (nx > 1)):
            raise InputError("positions must lie in [0, 1]")
        if np.any(am <= 0) or not np.all(np.isfinite(am)):
            raise InputError("atom masses must be finite and strictly positive")
        if np.any(nw <= 0) or not np.all(np.isfinite(nw)):
            raise InputError("quadrature weights must be finite and strictly positive")
        if np.any(np.diff(ax) <= 0):
            raise InputError("atom positions must be strictly increasing")
        if np.any(np.diff(nx) <= 0):
            raise InputError("quadrature nodes must be strictly increasing")

        cells = self.cells
        if len(nx) and np.any(np.isin(nx, ax)):
            if cells is not None:
                raise InputError("quadrature node coincides with an atom")
            nx = _perturb_off_atoms(nx, ax)
        if cells is None:
            cells = _midpoint_cells(nx)
        cells = np.asarray(cells, dtype=float).reshape(len(nx), 2)
        if len(nx) and (np.any(cells[:, 0] > nx) or np.any(cells[:, 1] < nx)):
            raise InputError("each node must lie inside its cell")

        object.__setattr__(self, "atoms_x", _frozen(ax))
        object.__setattr__(self, "atoms_mass", _frozen(am))
        object.__setattr__(self, "nodes_x", _frozen(nx))
        object.__setattr__(self, "nodes_w", _frozen(nw))
        object.__setattr__(self, "cells", _frozen(cells))

        pos = np.concatenate([ax, nx])
        order = np.argsort(pos, kind="stable")
        is_atom = np.concatenate([np.ones(len(ax), bool), np.zeros(len(nx), bool)])[order]
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        object.__setattr__(self, "positions", _frozen(pos[order]))
        object.__setattr__(self, "masses", _frozen(np.concatenate([am, nw])[order]))
        object.__setattr__(self, "is_atom", _frozen(is_atom, bool))
        object.__setattr__(self, "atom_nodes", _frozen(inv[: len(ax)], int))
        object.__setattr__(self, "cont_nodes", _frozen(inv[len(ax):], int))
        object.__setattr__(self, "_grid", None)

    # -- constructors -----------------------------------------------------
    @classmethod
    def atomic(cls, xs: Sequence[float], masses: Sequence[float]) -> "Measure":
        """Purely atomic measure."""
        return cls(np.asarray(xs, float), np.asarray(masses, float))

    @classmethod
    def from_density(
        cls,
        density: Callable[[np.ndarray], np.ndarray] | str | None = "lebesgue",
        n_nodes: int = 512,
        atoms: Sequence[tuple[float, float]] = (),
        order: int = 4,
    ) -> "Measure":
        """Composite Gauss-Legendre model of ``density(x) dx`` plus atoms.

        Atoms may be given in any order.  Panels are uniform and additionally
        split at atom positions, so no node ever coincides with an atom.
        Inside a panel the cell of each node has the Lebesgue length of its
        Gauss weight, which keeps every node inside its own cell.
        """
        atoms = sorted(atoms)
        ax = np.array([a[0] for a in atoms], float)
        am = np.array([a[1] for a in atoms], float)
        if density is None:
            return cls(ax, am)
        if isinstance(density, str):
            if density != "lebesgue":
                raise InputError(f"unknown density {density!r}")
            density = lambda x: np.ones_like(x)  # noqa: E731
        n_panels = max(1, int(n_nodes) // order)
        edges = np.union1d(np.linspace(0.0, 1.0, n_panels + 1), ax[(ax > 0) & (ax < 1)])
        g, gw = np.polynomial.legendre.leggauss(order)
        g = (g + 1) / 2
        gw = gw / 2
        cum = np.concatenate([[0.0], np.cumsum(gw)])
        a, b = edges[:-1, None], edges[1:, None]
        h = b - a
        nodes = (a + h * g).ravel()
        lo = (a + h * cum[:-1]).ravel()
        hi = (a + h * cum[1:]).ravel()
        hi = np.where(np.arange(hi.size) % order == order - 1, np.repeat(edges[1:], order), hi)
        rho = np.asarray(density(nodes), float)
        if np.any(rho < 0):
            raise InputError("density must be nonnegative")
        w = rho * (hi - lo)
        keep = w > 0
        return cls(ax, am, nodes[keep], w[keep], np.column_stack([lo, hi])[keep])

    # -- basic properties -------------------------------------------------
    @property
    def total_mass(self) -> float:
        return float(self.atoms_mass.sum() + self.nodes_w.sum())

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def has_continuous(self) -> bool:
        return len(self.nodes_x) > 0

    @property
    def has_atoms(self) -> bool:
        return len(self.atoms_x) > 0

    def star_grid(self) -> "StarGrid":
        if self._grid is None:
            object.__setattr__(self, "_grid", build_star_grid(self))
        return self._grid

    def cumulative(self, x) -> np.ndarray:
        """mu([0, x)) for an array of points."""
        x = np.asarray(x, float)
        xa = x[..., None]
        out = np.sum(np.where(self.atoms_x < xa, self.atoms_mass, 0.0), axis=-1)
        if self.has_continuous:
            lo, hi = self.cells[:, 0], self.cells[:, 1]
            width = hi - lo
            safe = np.where(width > 0, width, 1.0)
            frac = np.where(width > 0, np.clip((xa - lo) / safe, 0.0, 1.0), (lo < xa).astype(float))
            out = out + np.sum(frac * self.nodes_w, axis=-1)
        return out

    def point_mass(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        hit = np.abs(x[..., None] - self.atoms_x) <= _POS_TOL
        return np.sum(np.where(hit, self.atoms_mass, 0.0), axis=-1)


def _perturb_off_atoms(nx, ax):
    nx = nx.copy()
    for i in np.nonzero(np.isin(nx, ax))[0]:
        left = nx[i] - (nx[i - 1] if i > 0 else 0.0)
        right = (nx[i + 1] if i + 1 < len(nx) else 1.0) - nx[i]
        nx[i] += 0.5 * right if right >= left else -0.5 * left
    if np.any(np.diff(nx) <= 0) or np.any(np.isin(nx, ax)):
        raise InputError("could not move quadrature nodes off the atoms")
    return nx


def _midpoint_cells(nx):
    if len(nx) == 0:
        return np.zeros((0, 2))
    mids = (nx[1:] + nx[:-1]) / 2
    return np.column_stack([np.concatenate([[0.0], mids]), np.concatenate([mids, [1.0]])])


# -- the coordinate change ------------------------------------------------

def phi(m: Measure, x):
    """Mass coordinate ``mu([0, x)) + mu({x})/2`` of a point ``x`` in [0, 1]."""
    xa = np.asarray(x, float)
    if np.any((xa < 0) | (xa > 1)):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    out = m.cumulative(xa) + 0.5 * m.point_mass(xa)
    return float(out) if out.ndim == 0 else out


def psi(m: Measure, t):
    """Generalized inverse ``inf{x : mu([0, x)) > t}`` (1 once t >= mu([0, 1)))."""
    ta = np.asarray(t, float)
    M = m.total_mass
    if np.any((ta < -1e-15 * max(M, 1)) | (ta > M * (1 + 1e-15) + 1e-300)):
        raise DomainError(f"t must lie in [0, {M}], got {t!r}")
    grid = m.star_grid()
    out = grid.x_of(ta)
    top = M - float(m.point_mass(1.0))
    out = np.where(ta >= top, 1.0, out)
    return float(out) if out.ndim == 0 else out


def phi_star(m: Measure, t):
    """``phi(psi(t))``; equals ``t`` wherever ``psi(t)`` is not an atom."""
    return phi(m, psi(m, t))


# -- StarGrid -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Segment:
    """One piece of the partition of [0, M].

    ``kind`` is ``"atom"`` (then ``node`` is the merged node index of the atom
    and ``mass`` its exact mass) or ``"continuous"`` (then the stretch is cut
    into pieces ``piece_t[k]..piece_t[k+1]`` mapped linearly onto
    ``piece_x[k]..piece_x[k+1]``, each owned by quadrature node
    ``piece_node[k]``).
    """

    kind: str
    t0: float
    t1: float
    x0: float
    x1: float
    node: int = -1
    mass: float = 0.0
    piece_t: np.ndarray | None = None
    piece_x: np.ndarray | None = None
    piece_node: np.ndarray | None = None

    @property
    def length(self) -> float:
        return self.mass if self.kind == "atom" else self.t1 - self.t0

    def x_of(self, t):
        if self.kind == "atom":
            return np.full_like(np.asarray(t, float), self.x0)
        return np.interp(t, self.piece_t, self.piece_x)


@dataclass(frozen=True, eq=False)
class StarGrid:
    """Ordered partition of [0, M] into atom intervals and continuous stretches."""

    segments: tuple
    total_mass: float
    node_images: np.ndarray  # phi(position) of every merged node

    def x_of(self, t):
        t = np.asarray(t, float)
        if not self.segments:
            return np.ones_like(t)
        starts = np.array([s.t0 for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1)
        out = np.empty_like(t, dtype=float)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.segments[k].x_of(t[sel])
        return out

    def segment_at(self, t: float) -> Segment:
        starts = np.array([s.t0 for s in self.segments])
        k = int(np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(starts) - 1))
        return self.segments[k]


def build_star_grid(m: Measure) -> StarGrid:
    """Partition [0, M] into atom intervals and continuous stretches."""
    events = []  # (x_left, x_right, kind, node, mass)
    for k, (x, mass) in enumerate(zip(m.atoms_x, m.atoms_mass)):
        events.append((x, x, 0, int(m.atom_nodes[k]), float(mass)))
    for i in range(len(m.nodes_x)):
        lo, hi = m.cells[i]
        w = float(m.nodes_w[i])
        inner = m.atoms_x[(m.atoms_x > lo) & (m.atoms_x < hi)]
        cuts = np.concatenate([[lo], inner, [hi]])
        node = int(m.cont_nodes[i])
        if hi <= lo:
            events.append((lo, hi, 1, node, w))
            continue
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a:
                events.append((a, b, 1, node, w * (b - a) / (hi - lo)))
    events.sort(key=lambda e: (e[0], e[1], e[2]))

    segments = []
    t = 0.0
    run = []

    def flush():
        nonlocal run
        if not run:
            return
        ts = np.concatenate([[run[0][0]], [r[1] for r in run]])
        xs = np.concatenate([[run[0][2]], [r[3] for r in run]])
        segments.append(Segment("continuous", float(ts[0]), float(ts[-1]), float(xs[0]), float(xs[-1]),
                                piece_t=_frozen(ts), piece_x=_frozen(xs),
                                piece_node=_frozen([r[4] for r in run], int)))
        run = []

    for a, b, kind, node, mass in events:
        if kind == 0:
            flush()
            segments.append(Segment("atom", t, t + mass, a, a, node=node, mass=mass))
        else:
            run.append((t, t + mass, a, b, node))
        t += mass
    flush()
    images = phi(m, m.positions) if m.n_nodes else np.zeros(0)
    return StarGrid(tuple(segments), m.total_mass, _frozen(images))


# -- sampling and the change of variables ---------------------------------

def sample(m: Measure, f) -> np.ndarray:
    """Values of ``f`` at the merged nodes; ``f`` is a callable or an array."""
    if callable(f):
        vals = [f(x) for x in m.positions]
        return np.asarray(vals)
    vals = np.asarray(f)
    if vals.shape[:1] != (m.n_nodes,):
        raise InputError(f"expected {m.n_nodes} node samples, got shape {vals.shape}")
    return vals


def star_integral(m: Measure, f, x: float) -> tuple[complex, complex]:
    """Both sides of the change of variables ``int_0^phi(x) f_* dt = int_0^{x+} f dmu``.

    The left side is summed over the StarGrid in the mass coordinate, the
    right side over the measure in [0, 1] with half the atom at ``x``.
    """
    vals = sample(m, f).astype(complex)
    if vals.ndim != 1:
        raise InputError("star_integral expects scalar samples")
    T = phi(m, x)
    left = 0.0 + 0.0j
    for seg in m.star_grid().segments:
        if seg.t0 >= T:
            break
        if seg.kind == "atom":
            frac = 1.0 if seg.t1 <= T else (T - seg.t0) / (seg.t1 - seg.t0)
            left += vals[seg.node] * seg.mass * frac
        else:
            overlap = np.clip(np.minimum(seg.piece_t[1:], T) - seg.piece_t[:-1], 0.0, None)
            left += np.sum(vals[seg.piece_node] * overlap)
    right = 0.0 + 0.0j
    below = m.atoms_x < x
    right += np.sum(vals[m.atom_nodes[below]] * m.atoms_mass[below])
    at = np.abs(m.atoms_x - x) <= _POS_TOL
    right += 0.5 * np.sum(vals[m.atom_nodes[at]] * m.atoms_mass[at])
    if m.has_continuous:
        lo, hi = m.cells[:, 0], m.cells[:, 1]
        width = np.where(hi > lo, hi - lo, 1.0)
        frac = np.where(hi > lo, np.clip((x - lo) / width, 0, 1), (lo < x).astype(float))
        right += np.sum(vals[m.cont_nodes] * m.nodes_w * frac)
    return complex(left), complex(right)
