"""Discrete-to-deep supervised policy learning laboratory.

Learn a coarse tabular actor-critic policy, consolidate its best
episodes into per-discrete-state averages, distill those into a small
neural classifier, and evaluate every controller under one protocol on
cart-pole and a 2-D pure-pursuit simulator.
"""

from .actor_critic import (
    Buffer,
    EpisodeRecord,
    Hyperparams,
    StepDiagnostics,
    Traces,
    policy_probabilities,
    run_reinforcement_phase,
    sample_action,
    td_update,
)
from .cartpole import CartpoleDiscretizer, CartpoleEnv, CartpoleParams, cartpole_step, discretize_cartpole
from .classifier import (
    MlpController,
    MlpModel,
    TrainConfig,
    fit_normalizer,
    forward,
    gradient_check,
    load_model,
    predict,
    save_model,
    train,
)
from .distill import (
    TrainingDataset,
    build_dataset,
    consolidate,
    distill,
    load_dataset,
    save_dataset,
    select_top_episodes,
)
from .envcore import (
    BatchController,
    Controller,
    Environment,
    EnvironmentSpec,
    EnvUsageError,
    RandomController,
    StepOutcome,
)
from .harness import (
    EvalReport,
    GreedyDiscreteController,
    SampledDiscreteController,
    TrialConfig,
    TrialResult,
    evaluate_controller,
    greedy_controller,
    run_d2dspl_trial,
    run_suite,
)
from .pursuit import (
    AircraftState,
    DiscretizationScheme,
    McGrewParams,
    OpponentScript,
    PursuitAction,
    PursuitConfig,
    PursuitDiscretizer,
    PursuitEnv,
    RelativeGeometry,
    ScriptSegment,
    bundled_scenario,
    discretize_pursuit,
    load_script,
    mcgrew_angular,
    mcgrew_range,
    mcgrew_score,
    pursuit_reward,
    pursuit_step,
    relative_geometry,
    save_script,
    spawn_training_episode,
)

__version__ = "0.1.0"
