from .adversarial import Discriminator, ObjectiveResult, discriminator_accuracy, evaluate_objective
from .gradcheck import grad_check, objective_evaluator
from .mapping import MappingParams, apply_mapping
from .noise import NoiseParams, simulate_sensor_noise
from .normalize import NormalizedDepthMap, eta, eta_backward, minmax_normalize
from .objectives import EPS, cycle_loss, gan_loss, total_objective
from .training import TrainConfig, TraceRecord, bias_shift_fixture, format_trace, train_minmax

__all__ = [
    "EPS",
    "Discriminator",
    "MappingParams",
    "NoiseParams",
    "NormalizedDepthMap",
    "ObjectiveResult",
    "TrainConfig",
    "TraceRecord",
    "apply_mapping",
    "bias_shift_fixture",
    "cycle_loss",
    "discriminator_accuracy",
    "eta",
    "eta_backward",
    "evaluate_objective",
    "format_trace",
    "gan_loss",
    "grad_check",
    "minmax_normalize",
    "objective_evaluator",
    "simulate_sensor_noise",
    "total_objective",
    "train_minmax",
]
