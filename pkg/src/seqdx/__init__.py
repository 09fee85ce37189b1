"""seqdx: a desk-scale laboratory for sequential diagnosis.

A synthetic clinical world samples patients with pre-committed test results;
a factorized probabilistic diagnoser turns revealed evidence into disease
posteriors and a stop decision; a trainable planner policy learns, by KL
alignment against information-gain targets, which test to order next. An
exact trajectory-preference oracle over the enumerated trajectory space and
a baseline/metric suite make every quantity in the pipeline checkable.
"""

from .diagnoser import (
    DiagnoserModel,
    DiseasePosterior,
    StopDecision,
    decide,
    fit_full_info,
    log_posterior,
    oracle_model,
    oracle_posterior,
    posterior,
)
from .episode import (
    EpisodeLimits,
    EpisodeRecord,
    PolicySpec,
    run_benchmark,
    run_episode,
)
from .errors import SeqdxError
from .metrics import (
    ComparisonTable,
    MetricsReport,
    compare_reports,
    compute_metrics,
    histogram_csv,
)
from .planner import (
    FeatureVector,
    PolicyParams,
    SupervisionTarget,
    TrainConfig,
    featurize,
    init_params,
    kl_step_loss,
    loss_gradient,
    policy_distribution,
    train_planner,
)
from .presets import w2_config, w4_config
from .trajectory import (
    ActionDistribution,
    Trajectory,
    TrajectoryDistribution,
    action_posterior,
    enumerate_trajectories,
    info_gain,
    marginal_action_posterior,
    trajectory_posterior,
)
from .world import (
    ActionSpec,
    CaseSet,
    PatientCase,
    PatientState,
    World,
    WorldConfig,
    build_world,
    initial_state,
    sample_cases,
    split_cases,
    update_state,
)

__version__ = "0.1.0"
