import numpy as np
import pytest
from hypothesis import given, strategies as st

from dissim.errors import InputError
from dissim.measure import Measure, build_star_grid, phi, phi_star, psi, sample, star_integral


def atom_plus_lebesgue():
    return Measure.from_density("lebesgue", n_nodes=256, atoms=[(0.3, 2.0)])


# -- phi ------------------------------------------------------------------

def test_phi_identity_on_lebesgue():
    assert phi(Measure.from_density("lebesgue", n_nodes=64), 0.5) == pytest.approx(0.5, abs=1e-14)


def test_phi_single_atom_half_mass():
    assert phi(Measure.atomic([0.0], [1.0]), 0.0) == pytest.approx(0.5)


def test_phi_atom_plus_lebesgue_by_direct_sum():
    m = atom_plus_lebesgue()
    # oracle: mass strictly left of 0.3 plus half the atom, summed directly from the nodes
    left = m.nodes_w[m.nodes_x < 0.3].sum()
    assert phi(m, 0.3) == pytest.approx(left + 1.0, abs=1e-14)
    assert phi(m, 0.3) == pytest.approx(1.3, abs=1e-12)


def test_phi_star_is_phi_of_psi():
    m = atom_plus_lebesgue()
    t = np.linspace(0, m.total_mass, 37)
    assert np.allclose(phi_star(m, t), phi(m, psi(m, t)))


# -- psi ------------------------------------------------------------------

def test_psi_identity_on_lebesgue():
    assert psi(Measure.from_density("lebesgue", n_nodes=64), 0.25) == pytest.approx(0.25, abs=1e-12)


def test_psi_constant_on_atom_interval():
    m = atom_plus_lebesgue()
    assert np.allclose(psi(m, np.linspace(0.31, 2.29, 11)), 0.3)


@pytest.mark.parametrize("m", [Measure.atomic([0.2, 0.7], [1.0, 3.0]),
                               Measure.from_density("lebesgue", n_nodes=32),
                               Measure.from_density("lebesgue", n_nodes=64, atoms=[(0.5, 1.0)])])
def test_psi_at_total_mass_is_one(m):
    assert psi(m, m.total_mass) == 1.0


# -- star grid ------------------------------------------------------------

def test_star_grid_single_atom():
    segs = build_star_grid(Measure.atomic([0.5], [1.0])).segments
    assert len(segs) == 1
    assert (segs[0].kind, segs[0].t0, segs[0].t1, segs[0].x0) == ("atom", 0.0, 1.0, 0.5)


def test_star_grid_lebesgue():
    segs = build_star_grid(Measure.from_density("lebesgue", n_nodes=64)).segments
    assert len(segs) == 1 and segs[0].kind == "continuous"
    assert segs[0].t0 == 0.0 and segs[0].t1 == pytest.approx(1.0, abs=1e-14)


def test_star_grid_atom_plus_lebesgue():
    segs = build_star_grid(atom_plus_lebesgue()).segments
    got = [(s.kind, round(s.t0, 12), round(s.t1, 12)) for s in segs]
    assert got == [("continuous", 0.0, 0.3), ("atom", 0.3, 2.3), ("continuous", 2.3, 3.0)]


# -- star_integral --------------------------------------------------------

def test_star_integral_constant_lebesgue():
    assert np.allclose(star_integral(Measure.from_density("lebesgue", n_nodes=64), lambda s: 1.0, 1.0),
                       (1.0, 1.0))


def test_star_integral_constant_single_atom():
    assert np.allclose(star_integral(Measure.atomic([0.5], [2.0]), lambda s: 1.0, 0.5), (1.0, 1.0))


def test_star_integral_linear_atom_plus_lebesgue():
    left, right = star_integral(atom_plus_lebesgue(), lambda s: s, 0.3)
    # 0.3^2/2 plus half the atom times its position
    assert left == pytest.approx(0.345, abs=1e-12)
    assert right == pytest.approx(0.345, abs=1e-12)


# -- validation and properties --------------------------------------------

def test_rejects_bad_input():
    with pytest.raises(InputError):
        Measure.atomic([0.5], [0.0])
    with pytest.raises(InputError):
        Measure.atomic([1.5], [1.0])


def test_sample_shape_checked():
    m = Measure.atomic([0.2, 0.4], [1.0, 1.0])
    assert sample(m, lambda x: 2 * x).shape[0] == 2
    with pytest.raises(InputError):
        sample(m, np.ones(3))


atoms = st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(0.05, 3.0)), min_size=1, max_size=6,
                 unique_by=lambda a: round(a[0], 3))


@given(atoms)
def test_phi_monotone_and_bounded(atoms):
    m = Measure.from_density("lebesgue", n_nodes=32, atoms=atoms)
    x = np.linspace(0, 1, 101)
    v = phi(m, x)
    assert np.all(np.diff(v) >= -1e-12)
    assert v.min() >= 0 and v.max() <= m.total_mass + 1e-12


@given(atoms, st.floats(0.0, 1.0))
def test_psi_inverts_phi(atoms, u):
    m = Measure.from_density("lebesgue", n_nodes=32, atoms=atoms)
    t = u * m.total_mass
    # psi(phi(x)) = x away from atoms, and phi(psi(t)) lies in the atom interval otherwise
    x = psi(m, t)
    assert 0 <= x <= 1
    if t < m.total_mass:
        assert abs(m.cumulative(x) - t) <= m.point_mass(x) + 1e-9


@given(atoms)
def test_total_mass_matches_segments(atoms):
    m = Measure.from_density("lebesgue", n_nodes=32, atoms=atoms)
    segs = m.star_grid().segments
    assert sum(s.t1 - s.t0 for s in segs) == pytest.approx(m.total_mass, abs=1e-12)
    assert m.total_mass == pytest.approx(1.0 + sum(a[1] for a in atoms), abs=1e-12)
