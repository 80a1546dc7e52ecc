"""qprune: threshold-pruned data encodings for small quantum classifiers.

Subpackages by concern: qsim (statevector simulator), encoders (image ->
circuit/state encodings and prune masks), qnn (variational classifier),
threshold (bi-level prune-threshold optimizer), data (IDX/CSV loading and
splits), robustness (noise, input gradients, FGSM), experiment and cli
(config-driven runs).  The names below cover the common path: load a
dataset, build a pipeline, train, and search the prune threshold.
"""

from qprune.data import (
    PairDataset,
    RawDataset,
    SplitSpec,
    filter_pair,
    load_gray_csv,
    load_idx,
)
from qprune.encoders import (
    EncoderPipeline,
    ImageGrid,
    PruneMask,
    apply_mask,
    build_mask,
    class_average,
    pca_fit,
)
from qprune.experiment import (
    ExperimentConfig,
    load_config,
    optimize_experiment,
    run_experiment,
    sweep_experiment,
)
from qprune.qnn import ModelParams, TrainConfig, evaluate, fit_eval, init_params, predict
from qprune.robustness import (
    AttackConfig,
    NoiseConfig,
    adversarial_train,
    fgsm_accuracy,
    input_gradient,
    noisy_evaluate,
)
from qprune.threshold import ThresholdProblem, ThresholdResult, optimize_threshold

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "EncoderPipeline",
    "ExperimentConfig",
    "ImageGrid",
    "ModelParams",
    "NoiseConfig",
    "PairDataset",
    "PruneMask",
    "RawDataset",
    "SplitSpec",
    "ThresholdProblem",
    "ThresholdResult",
    "TrainConfig",
    "adversarial_train",
    "apply_mask",
    "build_mask",
    "class_average",
    "evaluate",
    "fgsm_accuracy",
    "filter_pair",
    "fit_eval",
    "init_params",
    "input_gradient",
    "load_config",
    "load_gray_csv",
    "load_idx",
    "noisy_evaluate",
    "optimize_experiment",
    "optimize_threshold",
    "pca_fit",
    "predict",
    "run_experiment",
    "sweep_experiment",
]
