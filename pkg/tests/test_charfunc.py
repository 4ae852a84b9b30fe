import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dissim.charfunc import (atom_factor, blaschke_factor, chain_factorize, char_fn, char_fn_batch,
                             cluster_points, det_char_fn, factorize, kernel_at)
from dissim.errors import InputError, UnsupportedFormError
from dissim.families import (lebesgue_spec, one_atom, random_atomic, random_commuting, random_z,
                             two_atom, zero_kernel)
from dissim.measure import Measure
from dissim.operator_model import OperatorSpec, atom_eigenvalues
from dissim.oracle import direct_char_fn, normal_similarity_check

seeds = st.integers(0, 2**32 - 1)


def test_char_fn_one_atom():
    s = char_fn(one_atom(), 2j)
    assert s.S == pytest.approx(np.array([[1 / 3]]), abs=1e-15)
    assert s.det == pytest.approx(1 / 3) and s.trace_defect == pytest.approx(8 / 9)


def test_char_fn_zero_kernel():
    assert np.allclose(char_fn_batch(zero_kernel(r=2), [1j, 3 + 0.1j]), np.eye(2))


def test_char_fn_blaschke_zero():
    s = char_fn(one_atom(), 1j)
    assert abs(s.S[0, 0]) < 1e-15 and s.trace_defect == pytest.approx(1.0)


def test_blaschke_factor_examples():
    assert blaschke_factor(1j, 1j) == 0
    assert blaschke_factor(1j, 2j) == pytest.approx(1 / 3)
    assert abs(blaschke_factor(1j, 5.0)) == pytest.approx(1.0)
    with pytest.raises(InputError):
        blaschke_factor(-1j, 1.0)


def test_det_examples():
    assert det_char_fn(one_atom(), 2j) == pytest.approx(1 / 3)
    assert det_char_fn(one_atom(), 2j, normalized=True) == pytest.approx(1 / 3)
    assert abs(det_char_fn(lebesgue_spec(), 1j)) == pytest.approx(math.exp(-math.pi / 4), abs=1e-9)
    empty = OperatorSpec.from_functions(Measure.from_density("lebesgue", n_nodes=16), 0.3, 0.0)
    assert det_char_fn(empty, 1j) == pytest.approx(1.0)


def test_det_lebesgue_closed_form():
    # exp(i int_0^1 dx / (x - z)) = ((1 - z) / (-z))^i
    z = 0.4 + 0.3j
    want = np.exp(1j * (np.log(1 - z) - np.log(-z)))
    assert det_char_fn(lebesgue_spec(), z) == pytest.approx(want, abs=1e-9)


def test_det_normalized_differs_by_unimodular_constant():
    spec = random_commuting(np.random.default_rng(1), n_atoms=5)
    ratios = [det_char_fn(spec, z, normalized=True) / det_char_fn(spec, z) for z in (1j, 2 + 1j, 0.1j)]
    assert np.allclose(np.abs(ratios), 1) and np.allclose(ratios, ratios[0])
    assert det_char_fn(spec, 1j, normalized=True).real > 0


def test_det_non_commuting_atoms_refused():
    m = Measure.atomic([0.5], [1.0])
    spec = OperatorSpec.from_arrays(m, np.array([[[0, 1], [1, 0]]]), np.diag([1.0, 2.0])[None])
    with pytest.raises(UnsupportedFormError):
        det_char_fn(spec, 1j)


@given(seeds)
def test_det_formula_matches_dense(seed):
    rng = np.random.default_rng(seed)
    spec = random_commuting(rng)
    for z in random_z(rng, 3):
        assert det_char_fn(spec, z) == pytest.approx(np.linalg.det(direct_char_fn(spec, z)), abs=1e-9)


def test_factorize_single_atom():
    spec = one_atom()
    Sm, B, Sp = factorize(spec, 0.5, 0.3 + 2j)
    assert np.allclose(Sm, 1) and np.allclose(Sp, 1)
    assert np.allclose(B, direct_char_fn(spec, 0.3 + 2j))


def test_factorize_two_atom_first():
    spec, z = two_atom(), 0.5 + 0.7j
    Sm, B, Sp = factorize(spec, 0.25, z)
    assert np.allclose(Sm @ B @ Sp, direct_char_fn(spec, z), atol=1e-10)


@given(seeds)
def test_atom_factor_diagonal_in_joint_basis(seed):
    rng = np.random.default_rng(seed)
    spec = random_commuting(rng, n_atoms=2, n=3, r=3)
    z = complex(random_z(rng, 1)[0])
    x = float(spec.measure.atoms_x[0])
    sd = atom_eigenvalues(spec)
    sel = sd.x == x
    B = atom_factor(spec, x, z)
    c = spec.c[spec.atom_index(x)]
    # in the auxiliary space the eigenvectors are c^* e_j / kappa_j
    for zj, e, k2 in zip(sd.z[sel], [v for v, s in zip(sd.vectors, sel) if s], sd.kappa2[sel]):
        q = c.conj().T @ e / math.sqrt(k2)
        assert np.allclose(B @ q, (z - zj) / (z - np.conj(zj)) * q, atol=1e-10)


def test_chain_factorize_three_atoms():
    spec = random_atomic(np.random.default_rng(5), n_atoms=3)
    z = 0.2 + 0.9j
    factors = chain_factorize(spec, spec.measure.atoms_x, z)
    assert len(factors) == 7
    assert np.allclose(np.linalg.multi_dot(factors), direct_char_fn(spec, z), atol=1e-10)
    one = chain_factorize(spec, [spec.measure.atoms_x[1]], z)
    assert all(np.allclose(a, b) for a, b in zip(one, factorize(spec, spec.measure.atoms_x[1], z)))


def test_chain_factor_determinants_are_blaschke_products():
    spec = random_commuting(np.random.default_rng(6), n_atoms=3)
    sd = atom_eigenvalues(spec)
    z = 0.4 + 1.3j
    for x in spec.measure.atoms_x:
        want = np.prod(blaschke_factor(sd.z[sd.x == x], z))
        assert np.linalg.det(atom_factor(spec, x, z)) == pytest.approx(want, abs=1e-12)


def test_chain_factorize_validation():
    spec = two_atom()
    with pytest.raises(InputError):
        chain_factorize(spec, [0.75, 0.25], 1j)
    with pytest.raises(InputError):
        chain_factorize(spec, [], 1j)


def test_kernel_at_one_atom():
    assert kernel_at(one_atom(), 1j) == (1, 1, True)


def test_kernel_at_repeated_eigenvalue():
    m = Measure.atomic([0.25, 0.75], [1.0, 1.0])
    spec = OperatorSpec.from_arrays(m, np.zeros((2, 1, 1)), np.array([[[math.sqrt(2), 0.0]],
                                                                       [[0.0, math.sqrt(2)]]]))
    dim, mult, free = kernel_at(spec, 1j)
    assert (dim, mult, free) == (2, 2, True)
    assert normal_similarity_check(spec).diagonalizable


def test_kernel_at_root_vector():
    # the same rank-one direction twice produces a Jordan block
    spec = OperatorSpec.from_arrays(Measure.atomic([0.25, 0.75], [1.0, 1.0]), np.zeros((2, 1, 1)),
                                    np.full((2, 1, 1), math.sqrt(2)))
    dim, mult, free = kernel_at(spec, 1j)
    assert (dim, mult, free) == (1, 2, False)
    assert not normal_similarity_check(spec).diagonalizable


def test_kernel_at_no_eigenvalues():
    with pytest.raises(InputError):
        kernel_at(zero_kernel(), 1j)
    with pytest.raises(InputError):
        kernel_at(one_atom(), 2j)


def test_cluster_points():
    c, n = cluster_points(np.array([1j, 1j + 1e-12, 2j]))
    assert np.allclose(sorted(c, key=abs), [1j, 2j]) and sorted(n) == [1, 2]
