"""Transportation polytopes C(P, Q) and information projections between them."""

from .core import (
    CapacityError,
    DimensionError,
    Distribution,
    JointTable,
    ModeError,
    Polytope,
    SupportPattern,
    TransportError,
    ValidationError,
    kl_divergence,
    marginals,
    product_table,
    support,
)
from .oracle import OracleResult, fw_minimize
from .polytope import (
    Equivalence,
    Face,
    FaceLattice,
    Vertex,
    combinatorially_equivalent,
    enumerate_vertices,
    face_lattice,
    face_support,
    feasible_within_support,
    fh_lower,
    fh_upper,
    geometrically_equivalent,
    has_crossing,
    is_generic,
)
from .projection import (
    ConvergenceError,
    FHMappingCheck,
    PreconditionError,
    ProjectionReport,
    UndefinedProjectionError,
    certify_pythagorean,
    continuity_probe,
    fh_mapping_check,
    project,
    roundtrip,
)

__version__ = "0.1.0"
