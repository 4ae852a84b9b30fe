import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dissim.charfunc import char_fn_batch
from dissim.criteria import (ZGrid, c3_constant, carleson_kernel, carleson_square, carleson_sup,
                             compute_report, lrg_constant, n_sparse_decompose, nu_c_density,
                             nu_c_pieces, nu_dh_sup, nu_h_sup, poisson_nu_c, sing_outer_bound,
                             sing_outer_check, sparse_constant, trace_defect_integral,
                             trace_defect_matrix, utb_constant_integral, utb_constant_trace,
                             verdict)
from dissim.errors import InapplicableError, InputError
from dissim.families import (_diagonal_spec, cluster_points, cluster_spec, geometric_points,
                             lebesgue_spec, one_atom, random_atomic, random_commuting, random_z,
                             two_atom, zero_kernel)
from dissim.measure import Measure
from dissim.operator_model import OperatorSpec, assemble, atom_eigenvalues
from dissim.oracle import example_3_11

seeds = st.integers(0, 2**32 - 1)


def dense_lrg(spec, zs):
    """Resolvent norm times distance to the eigenvalues, one dense solve per z."""
    A = assemble(spec).normalized()
    ev = np.linalg.eigvals(A)
    best = 0.0
    for z in zs:
        d = np.abs(ev - z).min()
        if d > 1e-6:
            best = max(best, np.linalg.norm(np.linalg.inv(A - z * np.eye(len(A))), 2) * d)
    return best


# -- grid -----------------------------------------------------------------

def test_zgrid_explicit_and_around():
    g = ZGrid.explicit(-1, 1, 0.01, 100, 5, 3)
    assert len(g) == 15 and np.allclose(g.im, [0.01, 1, 100])
    g = ZGrid.around([1j, 0.5 + 0.25j], nx=8, ny=8)
    assert 0.25 in g.im and 1.0 in g.im and 0.5 in g.re
    assert g.im.min() <= 0.25e-3 * (1 + 1e-12) and g.re.min() < 0
    with pytest.raises(InputError):
        ZGrid.explicit(0, 1, -1, 1)


# -- LRG ------------------------------------------------------------------

def test_lrg_normal_examples():
    assert lrg_constant(one_atom(), ZGrid.for_spec(one_atom(), 16, 16)) == pytest.approx(1.0)
    spec = zero_kernel()
    assert lrg_constant(spec, ZGrid.for_spec(spec, 16, 16)) == pytest.approx(1.0)


def test_lrg_two_atom_matches_dense_sweep():
    spec = two_atom()
    g = ZGrid.for_spec(spec, 16, 16)
    v = lrg_constant(spec, g)
    assert v > 1 and v == pytest.approx(dense_lrg(spec, g.points), rel=1e-10)


def test_lrg_dimension_cap():
    with pytest.raises(InapplicableError):
        lrg_constant(lebesgue_spec(n_nodes=64), [1j], max_dim=32)


# -- UTB ------------------------------------------------------------------

def test_utb_examples():
    spec = one_atom()
    g = ZGrid.around([1j], nx=33, ny=33)
    assert utb_constant_trace(spec, g) == pytest.approx(1.0, abs=1e-12)
    assert trace_defect_matrix(spec, [1j])[0] == pytest.approx(1.0)
    assert utb_constant_trace(zero_kernel(), g) == 0
    assert utb_constant_integral(zero_kernel(), g) == 0


def test_trace_defect_integral_one_atom_at_i():
    assert trace_defect_integral(one_atom(), [1j])[0] == pytest.approx(1.0, abs=1e-14)


@given(seeds)
def test_trace_defect_routes_agree(seed):
    rng = np.random.default_rng(seed)
    spec = random_commuting(rng, n_atoms=4)
    zs = random_z(rng, 20)
    S = char_fn_batch(spec, zs)
    direct = spec.r - np.sum(np.abs(S) ** 2, axis=(1, 2))
    assert np.allclose(trace_defect_matrix(spec, zs), direct, rtol=1e-6, atol=1e-12)
    assert np.allclose(trace_defect_integral(spec, zs), direct, rtol=1e-6, atol=1e-12)


@given(seeds)
def test_trace_defect_non_commuting_routes_agree(seed):
    rng = np.random.default_rng(seed)
    spec = random_atomic(rng, n_atoms=5)
    zs = random_z(rng, 10)
    S = char_fn_batch(spec, zs)
    direct = spec.r - np.sum(np.abs(S) ** 2, axis=(1, 2))
    assert np.allclose(trace_defect_matrix(spec, zs), direct, rtol=1e-6, atol=1e-12)
    assert np.allclose(trace_defect_integral(spec, zs), direct, rtol=1e-6, atol=1e-12)


@given(seeds)
def test_rank_one_utb_at_most_one(seed):
    spec = random_atomic(np.random.default_rng(seed), r=1)
    # the matrix route carries rounding of order eps times the eigenvector condition number
    assert utb_constant_trace(spec, ZGrid.for_spec(spec, 16, 16), route="charfn") <= 1 + 1e-9


def test_utb_bad_route():
    with pytest.raises(InputError):
        utb_constant_trace(one_atom(), [1j], route="nope")


def test_trace_defect_pointwise_bound():
    """tr(I - S^*S) <= 2 P[nu_c] + 4 (Carleson kernel of the eigenvalues), each discretization consistent."""
    for f in (lambda x: x, lambda x: x * x):
        spec = lebesgue_spec(alpha=f, n_nodes=128, atoms=[(0.4, 0.5)])
        zs = ZGrid.for_spec(spec, 16, 16).points
        K = 4 * carleson_kernel(atom_eigenvalues(spec).z, zs)
        for method, form in (("ivp", "pieces"), ("cells", "nodes")):
            S = char_fn_batch(spec, zs, method=method)
            td = 1 - np.abs(S[:, 0, 0]) ** 2
            assert np.all(td <= 2 * poisson_nu_c(spec, zs, form) + K + 1e-9)
    rng = np.random.default_rng(9)
    for _ in range(5):
        spec = random_commuting(rng)
        zs = ZGrid.for_spec(spec, 16, 16).points
        S = char_fn_batch(spec, zs)
        td = spec.r - np.sum(np.abs(S) ** 2, axis=(1, 2))
        assert np.all(td <= 4 * carleson_kernel(atom_eigenvalues(spec).z, zs) + 1e-9)


# -- C3 -------------------------------------------------------------------

def test_c3_examples():
    assert c3_constant(zero_kernel(), ZGrid.explicit(-2, 2, 0.01, 10, 9, 9)) == pytest.approx(1.0)
    # |S^{-1}| |b_i| = 1 exactly for a single Blaschke factor
    g = ZGrid.explicit(-3, 3, 0.001, 100, 31, 31)
    v, skipped = c3_constant(one_atom(), g, return_details=True)
    # the grid contains the eigenvalue i itself, where S is not invertible
    assert v == pytest.approx(1.0, abs=1e-9) and skipped == 1


def test_c3_lebesgue_within_outer_bound():
    spec = lebesgue_spec(n_nodes=256)
    g = ZGrid.for_spec(spec, 16, 16)
    # |S^{-1}| = exp(P) <= exp(pi) for the unit density on [0, 1]
    assert c3_constant(spec, g) <= math.exp(math.pi) * (1 + 1e-6)
    assert c3_constant(spec, g) == pytest.approx(1 / sing_outer_bound(spec, g), rel=1e-6)


# -- Carleson and sparse geometry -----------------------------------------

def test_carleson_sup_single_point():
    assert carleson_sup([1j]) == pytest.approx(0.25, abs=1e-12)
    assert carleson_sup([]) == 0


def test_carleson_sup_geometric_bounded_cluster_grows():
    geo = [carleson_sup(geometric_points(K)) for K in (10, 20, 40, 80)]
    # increasing to the limit 1 / log 2 of the dyadic geometric sum
    assert np.all(np.diff(geo) >= 0) and geo[-1] == pytest.approx(1 / math.log(2), abs=1e-5)
    cl = [carleson_sup(cluster_points(N)) for N in (10, 40, 160)]
    assert cl[0] < cl[1] < cl[2] and cl[2] > 2 * cl[1]


def test_carleson_square_examples():
    assert carleson_square([1j]) == pytest.approx(2.0)
    assert carleson_square([]) == 0
    # grid version agrees at the critical square
    assert carleson_square([1j], h_grid=[0.5, 1, 2], x_grid=[0.0]) == pytest.approx(2.0)
    cl = [carleson_square(cluster_points(N)) for N in (10, 40, 160)]
    assert cl[0] < cl[1] < cl[2]


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.01, 3)), min_size=1, max_size=12))
def test_carleson_square_exact_dominates_grid(pts):
    p = np.array([complex(a, b) for a, b in pts])
    exact = carleson_square(p)
    hs = np.geomspace(1e-3, 10, 40)
    xs = np.linspace(-3, 3, 61)
    assert carleson_square(p, h_grid=hs, x_grid=xs) <= exact * (1 + 1e-12)


def test_sparse_examples():
    assert sparse_constant([1j, 2j]) == pytest.approx(1 / 3)
    assert sparse_constant([1j]) == np.inf
    assert n_sparse_decompose([1j], 0.1)[0] == 1
    p = [1j, 1j * (1 + 1e-9)]
    assert sparse_constant(p) < 1e-8
    assert n_sparse_decompose(p, 0.1)[0] == 2


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.01, 3)), min_size=1, max_size=15),
       st.floats(0.05, 0.9))
def test_n_sparse_classes_are_sparse(pts, eps):
    p = np.array([complex(a, b) for a, b in pts])
    N, labels = n_sparse_decompose(p, eps)
    assert labels.min() == 0 and labels.max() == N - 1
    for c in range(N):
        q = p[labels == c]
        if len(q) > 1:
            assert sparse_constant(q) >= eps


# -- nu_c, nu_{d,h}, nu_h -------------------------------------------------

def test_nu_c_lebesgue_density_one():
    res = nu_c_density(lebesgue_spec())
    assert res.sup == pytest.approx(1.0, abs=0.05) and res.status == "bounded"


def test_nu_c_square_unbounded():
    assert nu_c_density(lebesgue_spec(alpha=lambda x: x * x)).status == "unbounded"


def test_nu_c_zero_kernel():
    spec = OperatorSpec.from_functions(Measure.from_density("lebesgue", n_nodes=32), lambda x: x, 0.0)
    assert nu_c_density(spec).sup == 0


def test_nu_c_pieces_mass():
    spec = lebesgue_spec(k=2.0, n_nodes=64)
    lo, hi, mass = nu_c_pieces(spec)
    assert mass.sum() == pytest.approx(2.0) and lo.min() >= -1e-12 and hi.max() <= 1 + 1e-12


def test_nu_dh_single_atom():
    val, x0, h = nu_dh_sup(one_atom(k=1.0), return_argmax=True)
    assert val == pytest.approx(4.0, abs=1e-12) and x0 == 0 and h == pytest.approx(0.25)
    assert nu_dh_sup(one_atom(k=1.0), h_grid=[0.2, 0.25, 0.5], x_grid=[0.0, 0.1]) == pytest.approx(4.0)


def test_nu_dh_no_atoms():
    assert nu_dh_sup(lebesgue_spec(n_nodes=32)) == 0


def test_nu_dh_grows_on_cluster():
    vals = [nu_dh_sup(cluster_spec(N)) for N in (10, 40, 160)]
    assert vals[0] < vals[1] < vals[2]


def test_nu_h_examples():
    assert nu_h_sup(lebesgue_spec()) == pytest.approx(2.0, rel=1e-6)
    assert nu_h_sup(one_atom(k=1.0)) == pytest.approx(4.0, rel=1e-9)
    both = lebesgue_spec(atoms=[(0.5, 1.0)])
    assert nu_h_sup(both) <= nu_h_sup(lebesgue_spec()) + nu_dh_sup(both) + 1e-9


# -- outer bound ----------------------------------------------------------

def test_sing_outer_examples():
    assert sing_outer_bound(one_atom(), ZGrid.for_spec(one_atom(), 8, 8)) == 1.0
    assert sing_outer_bound(lebesgue_spec(), [1j]) == pytest.approx(math.exp(-math.pi / 4), abs=1e-9)
    spec = lebesgue_spec(alpha=lambda x: x * x)
    assert sing_outer_check(spec, ZGrid.for_spec(spec))[2] == "unbounded"
    spec = lebesgue_spec()
    assert sing_outer_check(spec, ZGrid.for_spec(spec))[2] == "bounded"


def test_poisson_forms_agree_away_from_axis():
    # midpoint nodes against exact pieces: second order in the spacing 1/256
    spec = lebesgue_spec(alpha=lambda x: x * x, n_nodes=256)
    zs = random_z(np.random.default_rng(0), 20, re=(-1, 2), im=(0.2, 3))
    assert np.allclose(poisson_nu_c(spec, zs, "pieces"), poisson_nu_c(spec, zs, "nodes"), rtol=1e-4)
    with pytest.raises(InputError):
        poisson_nu_c(spec, zs, "other")


# -- report and verdicts --------------------------------------------------

def test_report_one_atom():
    rep = compute_report(one_atom())
    assert rep.verdict_2_6.status == "holds" and rep.verdict_2_5.status == "holds"
    assert rep.C1 == pytest.approx(1.0) and rep.C2_trace == pytest.approx(1.0)
    assert rep.carleson_sup == pytest.approx(0.25) and rep.sparse_inf == np.inf


def test_report_cluster_fails():
    rep = compute_report(cluster_spec(30))
    assert rep.verdict_2_6.status == "fails"
    assert rep.verdict_2_6.checks["nu_dh density"] == "fails"


def test_report_zero_kernel_holds():
    v25, v26 = verdict(zero_kernel(r=1))
    assert v25.status == "holds" and v26.status == "holds"


def test_verdict_gating():
    m = Measure.atomic([0.5], [1.0])
    spec = OperatorSpec.from_arrays(m, np.array([[[0, 1], [1, 0]]]), np.diag([1.0, 2.0])[None])
    v25, v26 = verdict(spec)
    assert v25.status == v26.status == "inapplicable"
    v25, v26 = verdict(random_commuting(np.random.default_rng(1), n_atoms=3, n=2, r=2))
    assert v26.status == "inapplicable" and v25.status != "inapplicable"


def test_verdict_root_vectors_fail():
    spec = OperatorSpec.from_arrays(Measure.atomic([0.25, 0.75], [1.0, 1.0]), np.zeros((2, 1, 1)),
                                    np.full((2, 1, 1), math.sqrt(2)))
    v25, _ = verdict(spec)
    assert v25.status == "fails" and v25.checks["root vectors"] == "fails"


def test_report_example_normal_but_not_utb():
    reps = [compute_report(s, ZGrid.for_spec(s, 16, 16), analyses=["utb"])
            for s in (example_3_11(5), example_3_11(40))]
    assert reps[1].C2_trace > 5 * reps[0].C2_trace
    # the matrix route and the integral route see the same defect
    assert all(r.C2_trace == pytest.approx(r.C2_integral, rel=1e-9) for r in reps)


def test_report_analyses_subset():
    rep = compute_report(one_atom(), analyses=["carleson"])
    assert math.isnan(rep.C1) and rep.carleson_sup == pytest.approx(0.25)


def test_diagonal_spec_eigenvalues():
    z = np.array([1j, 0.5 + 0.25j])
    assert np.allclose(np.sort_complex(atom_eigenvalues(_diagonal_spec(z)).z), np.sort_complex(z))
