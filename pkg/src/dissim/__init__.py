"""Characteristic functions and similarity tests for dissipative integral operators."""

from .errors import (AccuracyError, DissimError, DomainError, InapplicableError, InputError,
                     ModelError, SingularityError, SolverError, UnsupportedFormError)
from .measure import Measure, StarGrid, build_star_grid, phi, phi_star, psi, star_integral
from .operator_model import (DiscreteOperator, OperatorSpec, SpectrumData, adjoint, assemble,
                             atom_eigenvalues, commutativity_defect, imag_part, joint_spectrum,
                             kernel_eval, point_spectrum)
from .cauchy import (GPath, generator, inverse_path, omega, resolvent_apply, solve_G,
                     solve_G_picard, sweep)
from .charfunc import (CharSample, blaschke_factor, chain_factorize, char_fn, det_char_fn,
                       factorize, kernel_at)
from .oracle import (OracleResult, direct_char_fn, direct_resolvent, example_3_11,
                     normal_similarity_check)
from .criteria import (CriteriaReport, ZGrid, c3_constant, carleson_square, carleson_sup,
                       compute_report, lrg_constant, n_sparse_decompose, nu_c_density, nu_dh_sup,
                       nu_h_sup, sing_outer_bound, sparse_constant, utb_constant_integral,
                       utb_constant_trace, verdict)

__version__ = "0.1.0"
