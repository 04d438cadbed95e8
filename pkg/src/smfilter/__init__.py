"""Set Membership multistep-predictor filtering for linear systems.

Identifies guaranteed multistep prediction error bounds and feasible
parameter sets from input-output data under bounded measurement noise,
then filters the output by intersecting the containment intervals of
independent multistep predictors (an online LP variant with local bounds
and a constant-time variant with precomputed global bounds).
"""

from .baseline import (
    FilterMetrics,
    StateSpaceModel,
    compute_metrics,
    dare_steady_gain,
    kf_step,
)
from .filtering import (
    EmptyIntersection,
    FilterReport,
    GlobalPredictorBank,
    OutputInterval,
    StreamFilter,
    global_filter_step,
    global_interval_bounds,
    intersect_intervals,
    local_filter_step,
    local_interval_bounds,
)
from .identify import (
    ErrorBoundLambda,
    FeasibleParameterSet,
    GlobalPredictor,
    IdentificationBundle,
    RegressorDataset,
    assemble_regressors,
    build_fps,
    estimate_lambda,
    identify_min_global_bound_predictor,
    load_bundle,
    precompute_support_constants,
    reduce_fps,
    save_bundle,
)
from .lpcore import (
    InfeasiblePolytope,
    LinearProgram,
    LpOutcome,
    Polytope,
    SolverFailure,
    UnboundedDirection,
    remove_redundant_constraints,
    solve_lp,
    support_value,
)
from .pipeline import RunConfig, generate_data, run_filtering, run_identification
from .simharness import (
    ContinuousStateSpace,
    DiscreteArxModel,
    ExperimentData,
    NoiseSpec,
    benchmark_plant,
    generate_three_level_input,
    simulate_arx,
    zoh_discretize,
)

__version__ = "0.1.0"
