"""Actor/identifier/critic tracking control under Bernoulli packet dropouts."""
from ._accel import BACKEND
from .actor import ActorNet, bracket_term
from .aic import AicController, StepRecord, TrajectoryLog, control_step, run_episode
from .channels import DropoutChannel, substream
from .config import STANDARD_SCENARIOS, PRESETS, RunConfig, ScenarioSet, parse_config
from .critic import CostWeights, CriticNet, QuadraticBasis, running_cost
from .dynamics import (PlantModel, ReferenceTrajectory, SimState, VsmParams, eval_f, eval_g,
                       make_benchmark, reference_at, step_euler)
from .errors import (ActorDiverged, AicError, ConfigError, CriticDiverged, DivergenceError,
                     DynamicsBlowup, IdentifierDiverged, MetricUndefined)
from .identifier import IdentifierNet, bipolar_sigmoid
from .metrics import MetricReport, aggregate, evaluate_log, nrmse, pcc, settle_time, split_windows

__version__ = "0.1.0"
