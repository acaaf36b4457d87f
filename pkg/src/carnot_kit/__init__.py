"""Exact arithmetic, abnormality criteria and semigroup sampling for Carnot algebras."""
from .abnormality import (
    AbnormalityVerdict,
    AnalysisReport,
    Subspace,
    abnormal_directions_filiform,
    ad_chain_span,
    is_non_abnormal,
    scan_abnormal_directions,
)
from .algebra import (
    AlgebraElement,
    GradedAlgebra,
    ValidationReport,
    ad_power,
    bch_product,
    bracket,
    dilate,
    format_element,
    group_inverse,
    quasi_norm,
    validate_algebra,
)
from .automorphy import (
    ExtensionResult,
    GradedMapCandidate,
    extend_graded_map,
    graded_derivation_dimension,
    is_graded_automorphism,
)
from .catalog import (
    AlgebraSpecTag,
    builtin,
    direct_product,
    hall_basis,
    make_abelian,
    make_filiform,
    make_free_nilpotent,
    make_heisenberg,
    quotient,
)
from .cloudio import export_cloud, load_points
from .control import (
    ConeSpec,
    HorizontalControl,
    SemigroupCloud,
    cone_property_check,
    endpoint,
    endpoint_jacobian,
    endpoint_jacobian_rank,
    interior_membership_heuristic,
    lipschitz_cone_check,
    sample_semigroup,
)
from .dsl import AlgebraDocument, format_algebra, parse_algebra_file
from .errors import CarnotKitError, ConstructorError, NotAnIdealError, StructureError, UsageError

__version__ = "0.1.0"
