"""paretoc: simplicial continuation for Pareto critical sets.

Approximates the singular set, the Pareto critical set and the stable Pareto
critical set of a smooth vector map by piecewise-linear continuation over a
Delaunay tessellation, with iterative refinement and set-wise convergence
metrics.
"""

from .constrained import (
    ManifoldMesh,
    analyze_constrained,
    augmented_minors,
    icosphere,
    project_gradients,
)
from .continuation import (
    Analyzer,
    CellAnalysis,
    MinorSelection,
    selection_for,
    ParetoComplex,
    SingularVertex,
    analyze,
    clip_polytope,
    finite_difference_hessians,
    generalized_hessian,
    glue,
    minor_values,
    solve_lambda,
    STRATUM_SINGULAR,
    STRATUM_STABLE,
    STRATUM_UNSTABLE,
)
from .errors import *  # noqa: F401,F403
from .metrics import DistanceReport, convergence_slope, hausdorff
from .problems import (
    ConstrainedProblem,
    VectorProblem,
    check_derivatives,
    registry_get,
    registry_names,
)
from .refinement import (
    RefinementState,
    initial_state,
    iterate,
    maximin_fill,
    resample_polyline,
    should_stop,
)
from .tessellation import (
    NodeSet,
    Tessellation,
    build_delaunay,
    enumerate_faces,
    grid_nodes,
    insert_node,
    insert_nodes,
    kuhn_tessellation,
)



__version__ = "0.1.0"
