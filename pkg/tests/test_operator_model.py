import numpy as np
import pytest
from hypothesis import given, strategies as st

from dissim.errors import InputError, ModelError
from dissim.families import one_atom, random_atomic, random_commuting, two_atom, zero_kernel
from dissim.measure import Measure
from dissim.operator_model import (OperatorSpec, adjoint, assemble, atom_eigenvalues,
                                   commutativity_defect, imag_part, joint_spectrum, kernel_eval,
                                   phase_of, point_spectrum)
from dissim.oracle import example_3_11

seeds = st.integers(0, 2**32 - 1)


def loop_matrix(spec):
    """Operator matrix built entry by entry from its integral definition."""
    m = spec.measure
    N, n = m.n_nodes, spec.n
    A = np.zeros((N * n, N * n), complex)
    for x in range(N):
        for s in range(N):
            k = spec.c[x] @ spec.c[s].conj().T
            if s == x:
                blk = spec.alpha[x] + 0.5j * m.masses[x] * k
            elif m.positions[s] < m.positions[x]:
                blk = 1j * k * m.masses[s]
            else:
                continue
            A[x * n:(x + 1) * n, s * n:(s + 1) * n] = blk
    return A


def test_kernel_scalar():
    spec = OperatorSpec.from_functions(Measure.atomic([0.2, 0.6], [1.0, 1.0]), 0.0, np.sqrt(2))
    assert kernel_eval(spec, 0.2, 0.6) == pytest.approx(2.0)


def test_kernel_outer_product():
    m = Measure.atomic([0.2, 0.6], [1.0, 1.0])
    c = np.array([[[1.0], [0.0]], [[0.0], [1.0]]])
    spec = OperatorSpec.from_arrays(m, np.zeros((2, 2, 2)), c)
    assert np.array_equal(kernel_eval(spec, 0.2, 0.6), np.array([[0, 1], [0, 0]]))


@given(seeds)
def test_kernel_diag_psd_low_rank(seed):
    rng = np.random.default_rng(seed)
    spec = random_atomic(rng, n_atoms=3, n=3, r=2)
    for x in spec.measure.atoms_x:
        ev = np.linalg.eigvalsh(kernel_eval(spec, x, x))
        assert ev.min() >= -1e-12
        assert np.sum(ev > 1e-10 * max(ev.max(), 1e-300)) <= 2


def test_assemble_one_atom():
    assert assemble(one_atom()).matrix == pytest.approx(np.array([[1j]]))


def test_assemble_zero_kernel_is_block_diagonal():
    spec = zero_kernel(n_atoms=3, n=2)
    A = assemble(spec).matrix
    expected = np.zeros_like(A)
    for i in range(3):
        expected[2 * i:2 * i + 2, 2 * i:2 * i + 2] = spec.alpha[i]
    assert np.allclose(A, expected)


def test_assemble_two_atom():
    assert np.allclose(assemble(two_atom()).matrix, [[0.5j, 0], [1j, 0.5j]])


@given(seeds)
def test_assemble_matches_loop_definition(seed):
    spec = random_atomic(np.random.default_rng(seed), n_atoms=5)
    assert np.allclose(assemble(spec).matrix, loop_matrix(spec), atol=1e-13)


def test_adjoint_examples():
    assert adjoint(one_atom()).matrix == pytest.approx(np.array([[-1j]]))
    assert np.allclose(adjoint(two_atom()).matrix, [[-0.5j, -1j], [0, -0.5j]])
    spec = zero_kernel()
    assert np.allclose(adjoint(spec).matrix, assemble(spec).matrix)


@given(seeds)
def test_adjoint_routes_agree_and_weighted_inner_product(seed):
    rng = np.random.default_rng(seed)
    spec = random_atomic(rng, n_atoms=6)
    A, As = assemble(spec), adjoint(spec)
    assert np.allclose(As.matrix, A.adjoint().matrix, atol=1e-13)
    f = rng.normal(size=A.dim) + 1j * rng.normal(size=A.dim)
    g = rng.normal(size=A.dim) + 1j * rng.normal(size=A.dim)
    w = A.w
    assert np.vdot(g, w * (A.matrix @ f)) == pytest.approx(np.vdot(As.matrix @ g, w * f), abs=1e-10)


def test_imag_part_examples():
    op, tr = imag_part(one_atom())
    assert op.matrix == pytest.approx(np.array([[1.0]])) and tr == pytest.approx(2.0)
    op, tr = imag_part(two_atom())
    assert np.allclose(2 * op.matrix, np.ones((2, 2))) and tr == pytest.approx(2.0)
    op, tr = imag_part(zero_kernel())
    assert np.all(op.matrix == 0) and tr == 0


@given(seeds)
def test_imag_part_matches_matrix_and_is_dissipative(seed):
    spec = random_atomic(np.random.default_rng(seed), n_atoms=4)
    A = assemble(spec)
    Ah = A.normalized()
    im = (Ah - Ah.conj().T) / 2j
    op, tr = imag_part(spec)
    s = np.sqrt(A.w)
    assert np.allclose(im, s[:, None] * op.matrix / s[None, :], atol=1e-12)
    assert np.linalg.eigvalsh(im).min() >= -1e-10
    assert np.trace(2 * im).real == pytest.approx(tr, rel=1e-12)


def test_joint_spectrum_examples():
    pairs = joint_spectrum(one_atom(), 0.5)
    assert len(pairs) == 1 and pairs[0][:2] == pytest.approx((2.0, 0.0))
    m = Measure.atomic([0.5], [1.0])
    spec = OperatorSpec.from_arrays(m, np.diag([1.0, 5.0])[None], np.array([[[2.0], [0.0]]]))
    pairs = joint_spectrum(spec, 0.5)
    assert len(pairs) == 1 and pairs[0][:2] == pytest.approx((4.0, 1.0))


@given(seeds)
def test_joint_spectrum_recovers_construction(seed):
    rng = np.random.default_rng(seed)
    n = 3
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    kap = np.array([0.5, 1.2, 2.0])
    alp = rng.normal(size=n)
    m = Measure.atomic([0.5], [1.0])
    spec = OperatorSpec.from_arrays(m, (Q @ np.diag(alp) @ Q.conj().T)[None],
                                    (Q @ np.diag(np.sqrt(kap)))[None], commutativity=True)
    got = sorted((k, a) for k, a, _ in joint_spectrum(spec, 0.5))
    want = sorted(zip(kap, alp))
    assert np.allclose(got, want, atol=1e-10)


def test_commutativity_defect_examples():
    assert commutativity_defect(one_atom()) == 0
    m = Measure.atomic([0.5], [1.0])
    diag = OperatorSpec.from_arrays(m, np.diag([1.0, 3.0])[None], np.diag([1.0, 2.0])[None])
    assert commutativity_defect(diag) == 0
    spec = OperatorSpec.from_arrays(m, np.array([[[0, 1], [1, 0]]]), np.diag([1.0, np.sqrt(2)])[None])
    assert commutativity_defect(spec) == pytest.approx(1.0)
    assert spec.commutativity is False
    with pytest.raises(ModelError):
        OperatorSpec.from_arrays(m, np.array([[[0, 1], [1, 0]]]), np.diag([1.0, np.sqrt(2)])[None],
                                 commutativity=True)


def test_point_spectrum_examples():
    assert np.allclose(atom_eigenvalues(one_atom()).z, [1j])
    leb = OperatorSpec.from_functions(Measure.from_density("lebesgue", n_nodes=16), lambda x: x, 1.0)
    assert len(atom_eigenvalues(leb)) == 0
    mu = 1.0 / np.arange(1, 6) ** 2
    alphas = np.linspace(-1, 1, 5)
    spec = example_3_11(5, masses=mu, weights=3.0, alphas=alphas)
    z = np.sort_complex(atom_eigenvalues(spec).z)
    assert np.allclose(z, np.sort_complex(alphas + 0.5j * 3.0 * mu))


@given(seeds)
def test_point_spectrum_matches_matrix_eigenvalues(seed):
    spec = random_commuting(np.random.default_rng(seed), n_atoms=4)
    a = np.sort_complex(atom_eigenvalues(spec).z)
    b = np.sort_complex(point_spectrum(spec))
    ev = np.linalg.eigvals(assemble(spec).matrix)
    ev = np.sort_complex(ev[ev.imag > 1e-9])
    assert np.allclose(a, b, atol=1e-9) and np.allclose(a, ev, atol=1e-7)


def test_phase_of():
    assert phase_of(1j) == 0
    z = np.array([2j, 0.5 + 0.3j, -3 + 2j])
    v = np.exp(1j * phase_of(z)) * (1j - z) / (1j - z.conj())
    assert np.allclose(v.imag, 0, atol=1e-14) and np.all(v.real > 0)


def test_validation():
    m = Measure.atomic([0.5], [1.0])
    with pytest.raises(ModelError, match="0.5"):
        OperatorSpec.from_arrays(m, np.array([[[0, 1], [2, 0]]]), np.ones((1, 2, 1)))
    with pytest.raises(InputError):
        OperatorSpec.from_arrays(m, np.zeros((2, 1, 1)), np.ones((2, 1, 1)))
    with pytest.raises(InputError):
        OperatorSpec.from_arrays(m, np.zeros((1, 1, 1)), np.full((1, 1, 1), np.nan))


def test_phase_of_rounding_near_i():
    assert phase_of(1.0000000000000002j) == 0
    assert phase_of(3j) == pytest.approx(np.pi)
