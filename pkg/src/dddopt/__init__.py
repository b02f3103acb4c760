"""dddopt: stochastic optimization over data partitioned by rows and columns.

The engine trains linear models on a P-by-Q grid of data cells: observations
split into P partitions, features into Q blocks further cut into P sub-blocks.
Each outer iteration computes a sampled, masked anchor gradient and lets every
(partition, block) worker run variance-reduced stochastic steps on its own
sub-block. The special case with all sampling fractions at 1 is exposed as
"radisa"; the subsampled variant is "sodda".
"""

from .anchor import AnchorGradient, approx_full_gradient, estimator_error, exact_full_gradient
from .datasets import generate_synthetic, load_dataset, save_dataset
from .engine import (
    CostModel,
    DiagnosticsRecord,
    EngineState,
    RunConfig,
    TraceRecord,
    inner_step,
    make_radisa_config,
    run,
    run_outer_iteration,
    worker_count,
)
from .estimators import SoddaClassifier, SoddaRegressor
from .exceptions import (
    ConfigError,
    ConstantError,
    DatasetMismatchError,
    DddoptError,
    DimensionError,
    DivisibilityError,
    EmptyDataError,
    FractionError,
    LabelError,
    LengthMismatchError,
    ParseError,
    RootError,
    SizeError,
    SubsetError,
)
from .grid import (
    DataGrid,
    ParameterVector,
    PartitionScheme,
    block_feature_range,
    build_scheme,
    partition_row_range,
    row_partition,
    subblock_feature_range,
)
from .harness import (
    ComparisonReport,
    ExperimentSpec,
    GenerateParams,
    SweepStats,
    bounds_report,
    compare,
    loss_at_budget,
    run_experiment,
    run_seeds,
    sweep_stats,
    trace_losses,
)
from .losses import (
    LossModel,
    estimate_constants,
    loss_value,
    masked_gradient,
    per_obs_gradient,
    subblock_gradient,
)
from .sampling import (
    Assignment,
    RngPolicy,
    SampleSet,
    draw_assignment,
    draw_local_observation,
    draw_sets,
    resolve_fractions,
)
from .theory import (
    Schedule,
    TheoryConstants,
    b_lower_bound,
    constant_rate_bound,
    cubic_step_root,
    gamma,
    lambda_rate,
    min_inner_batch,
    strong_convexity_gap_bound,
)

__version__ = "0.1.0"
