"""Block operators on simplicial complexes: conservation chains,
lattice reductions, scattering matrices, and discrete Lagrangian
systems."""

__version__ = "0.1.0"

from .complex_core import (
    Chain1,
    DomainError,
    PathChain,
    Simplex,
    SimplicialComplex,
    barycentric_subdivision,
    canonical_path,
    complex_from_json,
    complex_to_json,
    load_complex,
    materialize_tails,
    save_complex,
)
from .operators import (
    DiscreteOperator,
    HodgeOperators,
    OperatorReport,
    TriangleFactorization,
    build_hodge,
    factorize_triangle,
    harmonic_basis,
    load_operator,
    operator_from_json,
    operator_to_json,
    save_operator,
    to_vertex_operator,
)
from .swronskian import (
    CycleReport,
    SWronskianChain,
    elementary_swronskian,
    interior_vertices,
    quantum_current,
    swronskian,
    verify_cycle,
)
from .line_lattice import (
    CoveringGraph,
    DirectImage,
    LineOperator,
    SolutionBasis,
    SymplecticFormMatrix,
    TransferMatrix,
    cover_apply,
    direct_image,
    leading_determinant_product,
    line_operator_from_json,
    line_operator_to_json,
    load_line_operator,
    periodized_cover_matrix,
    periodized_line_matrix,
    save_line_operator,
    solution_basis,
    swronskian_form,
    transfer_between,
    transfer_map,
    truncated_line_matrix,
)
from .scattering import (
    AsymptoticSubspace,
    BandScan,
    BoundState,
    CriticalPoint,
    MonodromyClassification,
    Mode,
    ScatteringResult,
    Tail,
    TailedGraph,
    asymptotic_subspace,
    band_scan,
    classify_monodromy,
    find_critical_points,
    load_tailed_graph,
    regular_discrete_spectrum,
    save_tailed_graph,
    scattering_matrix,
    tail_modes,
    tailed_graph_from_json,
    tailed_graph_to_json,
    wave_basis,
    worker_count,
)
from .nonlinear import (
    DegeneracyError,
    Density,
    DiscreteLagrangianSystem,
    LinearizeResult,
    NonConvergenceError,
    build_homogeneous_order4,
    build_translation_invariant,
    dynamical_step,
    el_residual,
    linearize,
    local_action,
    quadratic_pair_density,
    standard_map_density,
    variational_swronskian,
)
from . import examples, verify
