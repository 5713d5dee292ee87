"""Equivalence transformations and linearization analysis for the
(2+1)-dimensional wave family u_tt = f_x + g_y + h."""

from .expr import (
    Binding, Context, DomainError, EPS, Expr, ExprError, ParseError,
    U, V1, V2, V3, X, Y, T,
    derivative_table, evaluate, expr_function, formal_function, normalize,
    parse, partial, substitute, to_text, total_derivative,
)
from .family import (
    BalanceForm, DependencySignature, FamilyMember, balance_form, is_linear,
    member_from_text, member_to_text, residual, signature,
)
from .generators import (
    AdditionalComponents, ConstraintError, FreeData, GeneratorSet,
    additional_components, build_general, compute_H, determining_residual,
    generic_free_data, solve_wave_determining,
)
from .cases import (
    CATALOG, CaseReport, CaseSpec, ClassificationResult, LINEARIZABLE,
    NOT_LINEARIZABLE, ROW_IDS, UNCOVERED, classify, constraint_residuals,
    restriction_flags, row_generator_set, row_instance, verify_case,
)
from .transforms import (
    FAMILIES, InvarianceReport, JetMapMismatch, LieSystem, PointTransformation,
    closed_form_state, group_law_residuals, induced_jet_map, integrate_lie,
    jacobian_determinant, lie_system, make_transform, make_transform_4_1,
    make_transform_4_2, make_transform_4_3, make_transform_4_4,
    transform_member, verify_invariance,
)
from .transport import (
    DalembertSolution, GridReport, ImplicitSolution, NewtonError, SolvedField,
    certify, dalembert, newton_solve, sine_cosine_pair, transport_solution,
)

__version__ = "0.1.0"
