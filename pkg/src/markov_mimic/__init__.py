"""Approximation of Markov kernels on [0,1] by averages of composition maps,
with exact preservation of boundary-ratio subspaces."""

from .errors import (
    CapExceededError,
    GridMismatchError,
    InfeasibleError,
    MarkovMimicError,
    StageError,
)
from .grids import (
    CellPartition,
    Grid,
    SampledFunction,
    dense_points,
    make_partition,
    modulus_delta,
    sup_distance,
)
from .kernels import (
    DiscreteMeasure,
    KernelReport,
    MarkovKernel,
    apply,
    concentration_check,
    endpoint_measures,
    from_composition,
    from_weighted_compositions,
    induced_ratio,
    validate_kernel,
)
from .relations import (
    CellMasses,
    RationalSnapshot,
    boundary_count_identity,
    check_relations,
    feasibility,
    rational_snapshot,
    select_modulus_N1,
    snapshot_oracle,
)
from .subspace import (
    SubspaceSpec,
    check_extendibility,
    decompose,
    extend_map,
    realize_integers,
    test_function,
)
from .pipeline import (
    BlockSchedule,
    CoefficientField,
    EigenvalueFamily,
    TransportProfile,
    approximate,
    assemble_family,
    build_coefficients,
    build_profile,
    choose_delta,
    interleave_coefficients,
    select_indices_cross,
    select_indices_same,
    snap_endpoints,
    step_one_error,
)
from .certify import (
    BoundaryTally,
    Certificate,
    boundary_tally,
    certify_boundary,
    evaluate,
    sup_error,
)

__version__ = "0.1.0"
