"""Universal background adversarial perturbation synthesis, desk scale.

Optimizes a single perturbation over the background region of a scene
dataset so a pluggable differentiable detector stops seeing the untouched
foreground objects.  Everything is self-contained numpy: synthetic sprite
scenes with exact masks, a toy grid detector with hand-derived gradients,
the attack losses, AMSGrad, grid-mask ensembling, convergence diagnostics,
and detection metrics.
"""

from .attack import (AttackConfig, ConvergenceTrace, EnsembleConfig,
                     PhaseMode, fit_convergence_slope, random_init,
                     run_attack)
from .detector import (Detection, DetectionSet, ToyGridDetector,
                       UpstreamGrad, matched_filter_init)
from .errors import (BgAttackError, CalibrationError, CapacityError,
                     ConfigError, ContractError, DataError, DimensionError,
                     FormatError)
from .losses import (BidirAnchor, LossBreakdown, LossWeights, TvMode,
                     adaptive_weights, box_loss, grad_total,
                     objectness_loss, tv_loss)
from .masks import (GridMaskPair, Phase, boundary_indices, build_grid_masks,
                    ensemble_recombine)
from .metrics import (EvalConfig, PrCurve, attack_success_rate,
                      average_precision, detection_rate, iou,
                      map_over_classes, match_detections,
                      mean_average_precision, nms,
                      per_class_average_precision, pr_curve)
from .optimizer import AmsGradState, LrMode, LrSchedule, lr_at, step
from .scene import (GtBox, PhysicalAdaptation, Scene, Sprite, apply_pa,
                    compose_adversarial, generate_scene, make_dataset,
                    make_sprite)
from .tensor import clamp01, hadamard, lincomb, reduce_sum

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "ConvergenceTrace", "EnsembleConfig", "PhaseMode",
    "fit_convergence_slope", "random_init", "run_attack",
    "Detection", "DetectionSet", "ToyGridDetector", "UpstreamGrad",
    "matched_filter_init",
    "BgAttackError", "CalibrationError", "CapacityError", "ConfigError",
    "ContractError", "DataError", "DimensionError", "FormatError",
    "BidirAnchor", "LossBreakdown", "LossWeights", "TvMode",
    "adaptive_weights", "box_loss", "grad_total", "objectness_loss",
    "tv_loss",
    "GridMaskPair", "Phase", "boundary_indices", "build_grid_masks",
    "ensemble_recombine",
    "EvalConfig", "PrCurve", "attack_success_rate", "average_precision",
    "detection_rate", "iou", "map_over_classes", "match_detections",
    "mean_average_precision", "nms", "per_class_average_precision",
    "pr_curve",
    "AmsGradState", "LrMode", "LrSchedule", "lr_at", "step",
    "GtBox", "PhysicalAdaptation", "Scene", "Sprite", "apply_pa",
    "compose_adversarial", "generate_scene", "make_dataset", "make_sprite",
    "clamp01", "hadamard", "lincomb", "reduce_sum",
]
