"""fracfield: squared-increment statistics of the maximum of two isotropic
fractional Brownian fields observed on Poisson-Delaunay graphs.

The package samples joint field pairs exactly, computes the edge/triangle
increment statistics of the maximum field with their exact decompositions,
estimates the local time of the difference field, evaluates the limit
constants by numerical integration over typical-cell distributions, and
orchestrates convergence experiments.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DegenerateInput,
    DegenerateTriangle,
    EmptySelection,
    EmptyWindow,
    FactorizationFailure,
    FracfieldError,
    IdentityViolation,
    InsufficientData,
    MissingGrid,
    NumericalGuard,
    OutOfRange,
    QuadratureFailure,
)
from .field import (  # noqa: F401
    FieldParams,
    PointSet,
    SampledScene,
    build_covariance,
    covariance,
    kappa,
    proof_correlations,
    sample_pair,
    semivariogram,
)
from .geom import (  # noqa: F401
    DelaunayComplex,
    OrderedSelection,
    WindowSpec,
    sample_poisson,
    select_ordered,
    triangulate,
)
from .palm import (  # noqa: F401
    FdTable,
    edge_length_density,
    sample_typical_cell,
    sample_typical_couple,
    triangle_side_lengths,
)
from .stats import (  # noqa: F401
    IncrementReport,
    compute_increment_report,
    corr_r,
    h2,
    omega,
    psi,
    scaled_statistics,
    v2_decomposition,
    v2_statistic,
    v3_decomposition,
    v3_statistic,
)
from .ltime import estimate_local_time, occupation_histogram  # noqa: F401
from .consts import c_v2, c_v3, compute_constants, f2_of_z, f3_of_z  # noqa: F401
from .harness import RunConfig, ReplicateRecord, convergence_report, run_campaign, run_replicate  # noqa: F401
