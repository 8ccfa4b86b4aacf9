"""Matrix-free solver library for 2-D Riesz space-fractional diffusion.

Linear finite elements on a uniform tensor grid give block-Toeplitz mass
and fractional-stiffness operators with closed-form generators; time
stepping is a Crank-Nicolson-type scheme on uniform or boundary-layer
graded meshes, solved sequentially, by parareal, or by multilevel
time-multigrid (MGRIT) with FCF-relaxation, together with an a-priori
two-level convergence-bound predictor.
"""

__version__ = "0.1.0"

from .mesh import (  # noqa: F401
    CfSplitting,
    SpatialGrid,
    TemporalMesh,
    coarsen,
    shishkin_temporal,
    uniform_temporal,
)
from .stepper import (  # noqa: F401
    Discretization,
    ProblemSpec,
    sequential_solve,
    spacetime_residual,
)
from .mgrit import (  # noqa: F401
    IterationTrace,
    MgritFailure,
    MgritOptions,
    convergence_factor,
    parareal_solve,
    solve,
)
from .theory import (  # noqa: F401
    BoundReport,
    ModeSpectrum,
    mode_spectrum,
    two_level_bound,
)
from .verify import (  # noqa: F401
    FactorConfig,
    ManufacturedCase,
    factor_study,
    l2_error_at_T,
    manufactured_case,
    run_table,
)
