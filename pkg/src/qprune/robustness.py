"""Noise evaluation, gradient-sign input attacks, adversarial training.

Depolarizing noise is realized as stochastic Pauli trajectories: after each
eligible gate, every touched qubit is independently hit with probability p
by a uniform random Pauli.  Averaging trajectory <Z> values converges to
the density-matrix channel result, which keeps wide registers affordable.

Input attacks differentiate the hinge loss through the encoding rotations
with the parameter-shift rule, then chain back to pixels through each
encoder's map.  Amplitude encoding is excluded: its normalization couples
every pixel to every amplitude, so per-pixel gradients are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .encoders import _RANGE_EPS, EncoderPipeline, ImageGrid
from .errors import ConfigError, DataError, GradientError
from .qnn import (
    ModelParams,
    TrainConfig,
    TrainReport,
    build_model_circuit,
    initial_register_state,
    label_from_expectation,
    predict,
    train,
)
from .qsim import Circuit, Statevector, qubit_bit

# continues the tagged seed streams defined in qnn
SEED_TAG_ADVERSARIAL = 3
SEED_TAG_NOISE = 4

DEFAULT_TRAJECTORIES = 200

NOISE_SCOPES = ("all", "encoding", "model")


@dataclass(frozen=True)
class NoiseConfig:
    """Depolarizing intensity, trajectory budget, and gate scope.

    scope restricts which gates the noise touches: "encoding" hits only the
    data-encoding prefix, "model" only the readout init and entangling
    layers, "all" (default) both.
    """

    p: float
    trajectories: int = DEFAULT_TRAJECTORIES
    seed: int = 0
    scope: str = "all"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"noise probability {self.p} outside [0, 1]")
        if self.trajectories < 1:
            raise ConfigError(
                f"trajectories must be >= 1, got {self.trajectories}"
            )
        if self.scope not in NOISE_SCOPES:
            raise ConfigError(
                f"scope must be one of {NOISE_SCOPES}, got {self.scope!r}"
            )


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 0.3
    clip: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class AdvTrainConfig:
    base: TrainConfig
    attack: AttackConfig
    adversarial_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.adversarial_fraction <= 1.0:
            raise ConfigError(
                f"adversarial_fraction {self.adversarial_fraction} "
                "outside [0, 1]"
            )


def _kernel_seed(*stream) -> int:
    """Fold a tagged stream id into the 32-bit seed the kernel accepts."""
    return int(np.random.default_rng(list(stream)).integers(0, 2**32))


def trajectory_expectation(
    circuit: Circuit,
    state0: Statevector,
    qubit: int,
    noise: NoiseConfig,
    eligible=None,
):
    """Trajectory-mean <Z> on one qubit: returns (mean, standard error).

    `eligible` optionally marks which ops are noisy (None = all); the
    scope field is ignored here because an arbitrary circuit has no
    encoding/model split.
    """
    bit = qubit_bit(circuit.n_qubits, qubit)
    codes, b0s, b1s, thetas = circuit.packed
    if eligible is None:
        eligible = np.ones(len(circuit.ops), dtype=np.bool_)
    else:
        eligible = np.asarray(eligible, dtype=np.bool_)
    zs = _kernels.traj_z(
        state0.amps.copy(),
        codes,
        b0s,
        b1s,
        thetas,
        eligible,
        noise.p,
        bit,
        noise.trajectories,
        _kernel_seed(noise.seed, SEED_TAG_NOISE),
    )
    mean = float(zs.mean())
    if zs.size < 2:
        return mean, 0.0
    return mean, float(zs.std(ddof=1) / np.sqrt(zs.size))


def _scope_eligible(n_ops: int, n_prefix: int, scope: str) -> np.ndarray:
    eligible = np.zeros(n_ops, dtype=np.bool_)
    if scope in ("all", "encoding"):
        eligible[:n_prefix] = True
    if scope in ("all", "model"):
        eligible[n_prefix:] = True
    return eligible


def _noisy_model_z(
    params: ModelParams, encoded, noise: NoiseConfig, sample_index: int
) -> float:
    circuit = build_model_circuit(params, encoded)
    state0 = initial_register_state(encoded)
    codes, b0s, b1s, thetas = circuit.packed
    zbit = 1  # readout is the last qubit, hence the least significant bit
    if noise.p == 0.0:
        z, _ = _kernels.run_and_measure(
            state0.amps.copy(), codes, b0s, b1s, thetas, zbit
        )
        return float(z)
    n_model = 2 + 2 * 3 * params.n_data + 1  # X, H, entanglers, final H
    n_prefix = len(circuit.ops) - n_model
    eligible = _scope_eligible(len(circuit.ops), n_prefix, noise.scope)
    zs = _kernels.traj_z(
        state0.amps.copy(),
        codes,
        b0s,
        b1s,
        thetas,
        eligible,
        noise.p,
        zbit,
        noise.trajectories,
        _kernel_seed(noise.seed, SEED_TAG_NOISE, sample_index),
    )
    return float(zs.mean())


def noisy_evaluate(
    params: ModelParams, test_set, noise: NoiseConfig, *, pipeline: EncoderPipeline
) -> float:
    """Accuracy with each <Z> replaced by its trajectory-mean estimate.

    Every sample draws from its own (seed, tag, index) stream, so the
    result is reproducible and independent of evaluation order.  p = 0
    short-circuits to the exact noiseless readout.
    """
    if len(test_set) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    correct = 0
    for i, (im, label) in enumerate(zip(test_set.images, test_set.labels)):
        z = _noisy_model_z(params, pipeline.encode(im), noise, i)
        correct += label_from_expectation(z) == label
    return correct / len(test_set)


def input_gradient(
    params: ModelParams,
    image: ImageGrid,
    label: int,
    *,
    pipeline: EncoderPipeline,
) -> np.ndarray:
    """Hinge-loss gradient w.r.t. every input pixel, as a side x side array.

    Parameter-shift gives d<Z>/dtheta for each encoding rotation; the
    hinge chain turns that into dL/dtheta, and each encoder's input map
    carries it back to pixels: angle rotations scale by pi, pruned pixels
    get exactly 0, PCA routes through its projection rows and rescaling
    widths (0 where the rescale clamps or the width is degenerate).
    """
    if label not in (-1, 1):
        raise DataError(f"label must be -1 or +1, got {label!r}")
    if pipeline.kind == "amplitude":
        raise GradientError(
            "amplitude encoding has no per-pixel gradient: normalization "
            "couples all pixels"
        )
    encoded = pipeline.encode(image)
    circuit = build_model_circuit(params, encoded)
    codes, b0s, b1s, thetas = circuit.packed
    n_prefix = len(encoded.payload.ops)
    param_pos = np.arange(n_prefix, dtype=np.int64)
    state0 = initial_register_state(encoded)
    dz, z = _kernels.ps_sweep(
        state0.amps.copy(), codes, b0s, b1s, thetas, param_pos, 1
    )
    side = image.side
    flat_grad = np.zeros(side * side)
    if label * z >= 1.0:
        return flat_grad.reshape(side, side)
    dl_dtheta = -label * dz

    if pipeline.kind in ("angle", "atp", "sqe"):
        keep = None
        if pipeline.mask is not None:
            keep = pipeline.mask.keep.ravel()
        for j, p in enumerate(encoded.positions):
            if keep is not None and not keep[p]:
                continue
            flat_grad[p] += np.pi * dl_dtheta[j]
    else:  # pca
        model = pipeline.pca
        proj = model.components @ (image.flatten() - model.mean)
        for k in range(model.k):
            width = model.hi[k] - model.lo[k]
            if width < _RANGE_EPS:
                continue
            v = (proj[k] - model.lo[k]) / width
            if not 0.0 < v < 1.0:
                continue  # rescale clamps: locally flat
            flat_grad += (np.pi / width) * dl_dtheta[k] * model.components[k]
    return flat_grad.reshape(side, side)


def fgsm_attack(
    params: ModelParams,
    image: ImageGrid,
    label: int,
    attack: AttackConfig,
    *,
    pipeline: EncoderPipeline,
) -> ImageGrid:
    """x' = clip(x + epsilon * sign(grad_x L)); sign(0) leaves a pixel alone.

    With clipping disabled the perturbed pixels must still land in [0, 1]
    (downstream encoders require it); otherwise construction fails.
    """
    if attack.epsilon == 0.0:
        return image
    grad = input_gradient(params, image, label, pipeline=pipeline)
    perturbed = image.pixels + attack.epsilon * np.sign(grad)
    if attack.clip:
        perturbed = np.clip(perturbed, 0.0, 1.0)
    return ImageGrid(image.side, perturbed)


def fgsm_accuracy(
    params: ModelParams,
    test_set,
    attack: AttackConfig,
    *,
    pipeline: EncoderPipeline,
) -> float:
    """Accuracy after attacking every sample against its true label."""
    if len(test_set) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    correct = 0
    for im, label in zip(test_set.images, test_set.labels):
        adv = fgsm_attack(params, im, label, attack, pipeline=pipeline)
        _, pred = predict(params, pipeline.encode(adv))
        correct += pred == label
    return correct / len(test_set)


def adversarial_train(
    params0: ModelParams,
    train_set,
    cfg: AdvTrainConfig,
    *,
    pipeline: EncoderPipeline,
) -> TrainReport:
    """Training where a seeded fraction of each batch is FGSM-perturbed.

    Perturbations are recomputed against the parameters in effect when the
    batch is visited, so the attack tracks the model as it learns.  The
    selection stream is independent of the shuffle stream; fraction 0 (or
    epsilon 0) reproduces plain training bit for bit.
    """
    rng = np.random.default_rng([cfg.base.seed, SEED_TAG_ADVERSARIAL])

    def hook(params, indices):
        count = round(cfg.adversarial_fraction * len(indices))
        if count == 0:
            return {}
        chosen = rng.choice(len(indices), size=count, replace=False)
        out = {}
        for c in chosen:
            i = indices[int(c)]
            out[i] = fgsm_attack(
                params,
                train_set.images[i],
                train_set.labels[i],
                cfg.attack,
                pipeline=pipeline,
            )
        return out

    return train(
        params0, train_set, cfg.base, pipeline=pipeline, batch_hook=hook
    )
