"""Kalman-filter refinement for graph state-space models.

State estimation and output prediction for node-attributed dynamical
systems: differentiable model families (a structural replica of the
benchmark generator and a message-passing network), an extended Kalman
filter over their flattened state, synthetic benchmark generation,
window-based training, and an experiment CLI.
"""

from .diffable import AdamState, DiffFn, adam_step, fd_jacobian
from .errors import (
    DataFormatError,
    DimensionError,
    GeneratorInstabilityError,
    GraphKfError,
    NumericalError,
    SingularInnovationError,
    UnsupportedNoiseModeError,
)
from .experiment import EvalResult, evaluate, evaluate_oracle, format_report, rpi_over_blocks, true_replica
from .gkf import GkfConfig, GkfTrace, gkf_run, gkf_step, initial_belief
from .graphs import GraphTopology, row_normalize, sym_normalize
from .io import load_checkpoint, load_episode, save_checkpoint, save_episode
from .kalman import Belief, LinearSystem, ekf_step, joseph_update, kf_predict, kf_update, run_kf
from .models import AdjacencyNoiseModel, GssModel, ReplicaModel, ReplicaParams, StgnnModel
from .simulate import (
    Episode,
    GeneratorConfig,
    gen_inputs,
    gen_topology,
    generate_episode,
    lingss_config,
    nonlingss_config,
    simulate,
)
from .training import TrainConfig, TrainReport, make_windows, train, window_loss_and_grad, windowed_mse

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # graphs
    "GraphTopology", "sym_normalize", "row_normalize",
    # models
    "GssModel", "ReplicaModel", "ReplicaParams", "StgnnModel", "AdjacencyNoiseModel",
    # filtering
    "Belief", "LinearSystem", "kf_predict", "kf_update", "joseph_update", "ekf_step", "run_kf",
    "GkfConfig", "GkfTrace", "gkf_step", "gkf_run", "initial_belief",
    # differentiation / optimization
    "DiffFn", "fd_jacobian", "AdamState", "adam_step",
    # data
    "GeneratorConfig", "Episode", "lingss_config", "nonlingss_config",
    "gen_topology", "gen_inputs", "simulate", "generate_episode",
    "save_episode", "load_episode", "save_checkpoint", "load_checkpoint",
    # training / evaluation
    "TrainConfig", "TrainReport", "make_windows", "window_loss_and_grad", "windowed_mse", "train",
    "EvalResult", "evaluate", "evaluate_oracle", "true_replica", "rpi_over_blocks", "format_report",
    # errors
    "GraphKfError", "DimensionError", "DataFormatError", "NumericalError",
    "SingularInnovationError", "GeneratorInstabilityError", "UnsupportedNoiseModeError",
]
