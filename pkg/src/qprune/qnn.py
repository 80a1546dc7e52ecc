"""Three-layer variational classifier on top of the statevector simulator.

Circuit layout: data qubits 0..n-1 carry the encoded input, the readout
qubit r = n is prepared with X then H, and each of the 3 layers entangles
every data qubit with the readout through an XX then a ZZ rotation; a final
H precedes the Z measurement on the readout.  Labels are the sign of <Z>.

Training is plain mini-batch SGD on the hinge loss, with gradients from the
parameter-shift rule (exact for XX/ZZ generators).  All randomness flows
from the config seed through tagged generator streams, so identical seeds
give bit-identical reports.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .encoders import AMPLITUDE_STATE, EncodedInput, EncoderPipeline
from .errors import CircuitError, DataError
from .qsim import Circuit, Statevector, h, von_neumann_entropy, x, xx, zz

N_LAYERS = 3
INIT_SCALE = 0.1

# tags appended to the run seed for independent generator streams
SEED_TAG_INIT = 1
SEED_TAG_SHUFFLE = 2


@dataclass(frozen=True)
class ModelParams:
    """Entangler angles, shaped (layer, data qubit, [xx, zz])."""

    n_data: int
    thetas: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.thetas, dtype=np.float64)
        if th.shape != (N_LAYERS, self.n_data, 2):
            raise CircuitError(
                f"expected thetas shaped {(N_LAYERS, self.n_data, 2)}, "
                f"got {th.shape}"
            )
        if not np.all(np.isfinite(th)):
            raise CircuitError("model parameters must be finite")
        th = th.copy()
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)

    @classmethod
    def zeros(cls, n_data: int) -> "ModelParams":
        return cls(n_data, np.zeros((N_LAYERS, n_data, 2)))

    @classmethod
    def from_flat(cls, n_data: int, flat) -> "ModelParams":
        return cls(n_data, np.asarray(flat, float).reshape(N_LAYERS, n_data, 2))

    def flat(self) -> np.ndarray:
        """Angles in circuit order: layer, then data qubit, then xx/zz."""
        return self.thetas.ravel().copy()

    @property
    def count(self) -> int:
        return 2 * N_LAYERS * self.n_data


def init_params(n_data: int, seed: int) -> ModelParams:
    """Uniform angles in [-0.1, 0.1] from the seed's init stream."""
    rng = np.random.default_rng([seed, SEED_TAG_INIT])
    return ModelParams(
        n_data, rng.uniform(-INIT_SCALE, INIT_SCALE, size=(N_LAYERS, n_data, 2))
    )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")
        # zero is allowed so a no-op training pass stays expressible
        if self.learning_rate < 0:
            raise DataError(
                f"learning_rate must be >= 0, got {self.learning_rate}"
            )


@dataclass(frozen=True)
class TrainReport:
    """Training outcome; test metrics appear once a test set is evaluated."""

    loss_curve: tuple
    final_params: ModelParams
    train_accuracy: float
    test_accuracy: float | None = None
    mean_entropy: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.train_accuracy <= 1.0:
            raise DataError("train accuracy outside [0, 1]")
        if self.test_accuracy is not None and not 0.0 <= self.test_accuracy <= 1.0:
            raise DataError("test accuracy outside [0, 1]")
        if self.mean_entropy is not None and not (
            0.0 <= self.mean_entropy <= 1.0 + 1e-9
        ):
            raise DataError("mean entropy outside [0, 1]")


def label_from_expectation(z: float) -> int:
    """Sign readout; an exact 0 counts as +1."""
    return 1 if z >= 0.0 else -1


def hinge_loss(expectation: float, label: int) -> float:
    if label not in (-1, 1):
        raise DataError(f"label must be -1 or +1, got {label!r}")
    return max(0.0, 1.0 - label * expectation)


def build_model_circuit(params: ModelParams, encoded: EncodedInput) -> Circuit:
    """Full circuit: encoding prefix, readout init, entangling layers, H.

    Amplitude-encoded inputs carry no prefix; the caller starts from the
    encoded register state instead (see `initial_register_state`).
    """
    n = encoded.n_data_qubits
    if n != params.n_data:
        raise CircuitError(
            f"encoded input drives {n} data qubits, params expect {params.n_data}"
        )
    r = n
    ops = []
    if encoded.kind != AMPLITUDE_STATE:
        ops.extend(encoded.payload.ops)
    ops.append(x(r))
    ops.append(h(r))
    for layer in range(N_LAYERS):
        for d in range(n):
            ops.append(xx(d, r, float(params.thetas[layer, d, 0])))
            ops.append(zz(d, r, float(params.thetas[layer, d, 1])))
    ops.append(h(r))
    return Circuit(n + 1, tuple(ops))


def initial_register_state(encoded: EncodedInput) -> Statevector:
    """Starting state for the full model circuit.

    |0...0> for circuit-prefix encodings; for amplitude encoding, the
    encoded data register joined with a |0> readout qubit.
    """
    n = encoded.n_data_qubits
    if encoded.kind != AMPLITUDE_STATE:
        return Statevector.zero(n + 1)
    amps = np.kron(encoded.payload.amps, np.array([1.0, 0.0], np.complex128))
    return Statevector(n + 1, amps)


@lru_cache(maxsize=64)
def _suffix_structure(n_data: int):
    """Packed arrays for the post-encoding model ops: entanglers + final H.

    The readout-init X and H are folded into the pre-entangler state, so the
    parametric gates sit at positions 0..6n-1 and the final H closes the op
    list.  Shared across calls; the theta template is copied per use.
    """
    r = n_data
    ops = []
    for _ in range(N_LAYERS):
        for d in range(n_data):
            ops.append(xx(d, r, 0.0))
            ops.append(zz(d, r, 0.0))
    ops.append(h(r))
    circ = Circuit(n_data + 1, tuple(ops))
    codes, b0s, b1s, thetas = circ.packed
    param_pos = np.arange(2 * N_LAYERS * n_data, dtype=np.int64)
    zbit = 1  # readout qubit n_data is the least significant bit
    return codes, b0s, b1s, thetas, param_pos, zbit


# readout after X then H: (|0> - |1>) / sqrt(2)
_READOUT_INIT = np.array([1.0, -1.0], np.complex128) / np.sqrt(2.0)


def _pre_entangler_state(encoded: EncodedInput) -> np.ndarray:
    """Joint state after the encoding prefix and the readout X, H."""
    n = encoded.n_data_qubits
    if encoded.kind == AMPLITUDE_STATE:
        data = encoded.payload.amps
    else:
        data = np.zeros(2**n, np.complex128)
        data[0] = 1.0
        codes, b0s, b1s, thetas = encoded.payload.packed
        _kernels.run_ops(data, codes, b0s, b1s, thetas)
    return np.kron(data, _READOUT_INIT)


def _suffix_thetas(template: np.ndarray, flat_params: np.ndarray) -> np.ndarray:
    th = template.copy()
    th[: flat_params.size] = flat_params
    return th


def predict(params: ModelParams, encoded: EncodedInput):
    """Noiseless readout: (<Z> on the readout qubit, sign label)."""
    if encoded.n_data_qubits != params.n_data:
        raise CircuitError(
            f"encoded input drives {encoded.n_data_qubits} data qubits, "
            f"params expect {params.n_data}"
        )
    pre = _pre_entangler_state(encoded)
    codes, b0s, b1s, tmpl, _, zbit = _suffix_structure(params.n_data)
    z, _ = _kernels.run_and_measure(
        pre, codes, b0s, b1s, _suffix_thetas(tmpl, params.flat()), zbit
    )
    return float(z), label_from_expectation(z)


def expectation_gradient(params: ModelParams, encoded: EncodedInput):
    """Parameter-shift d<Z>/dtheta for every entangler angle.

    Returns (gradient vector in circuit order, unshifted <Z>).
    """
    if encoded.n_data_qubits != params.n_data:
        raise CircuitError(
            f"encoded input drives {encoded.n_data_qubits} data qubits, "
            f"params expect {params.n_data}"
        )
    pre = _pre_entangler_state(encoded)
    codes, b0s, b1s, tmpl, param_pos, zbit = _suffix_structure(params.n_data)
    dz, z = _kernels.ps_sweep(
        pre, codes, b0s, b1s, _suffix_thetas(tmpl, params.flat()), param_pos, zbit
    )
    return dz, float(z)


def param_gradient(params: ModelParams, encoded: EncodedInput, label: int):
    """Hinge-loss gradient: zero when the margin is met, else -label * dz."""
    if label not in (-1, 1):
        raise DataError(f"label must be -1 or +1, got {label!r}")
    dz, z = expectation_gradient(params, encoded)
    if label * z >= 1.0:
        return np.zeros_like(dz)
    return -label * dz


def _encode_all(pipeline: EncoderPipeline, dataset):
    return [pipeline.encode(im) for im in dataset.images]


def train(
    params0: ModelParams,
    train_set,
    config: TrainConfig,
    *,
    pipeline: EncoderPipeline,
    batch_hook=None,
) -> TrainReport:
    """Mini-batch SGD over the hinge loss.

    Per epoch the sample order is reshuffled from the seed's shuffle stream;
    each batch applies one update with the mean loss gradient.  The loss
    curve records each epoch's running mean loss (computed at the params in
    effect when each batch was visited).

    `batch_hook(params, indices)` may return replacement images for a subset
    of the batch (keyed by sample index); replacements are re-encoded on the
    spot, which is how adversarial training injects perturbed inputs.
    """
    n_samples = len(train_set)
    if n_samples == 0:
        raise DataError("cannot train on an empty dataset")
    encoded = _encode_all(pipeline, train_set)
    n_data = encoded[0].n_data_qubits
    if n_data != params0.n_data:
        raise CircuitError(
            f"pipeline produces {n_data} data qubits, params expect "
            f"{params0.n_data}"
        )
    labels = train_set.labels
    pre_states = [_pre_entangler_state(enc) for enc in encoded]
    codes, b0s, b1s, tmpl, param_pos, zbit = _suffix_structure(n_data)

    flat = params0.flat()
    rng = np.random.default_rng([config.seed, SEED_TAG_SHUFFLE])
    loss_curve = []
    for _ in range(config.epochs):
        perm = rng.permutation(n_samples)
        epoch_loss = 0.0
        for start in range(0, n_samples, config.batch_size):
            batch = perm[start : start + config.batch_size]
            replacements = {}
            if batch_hook is not None:
                replacements = batch_hook(
                    ModelParams.from_flat(n_data, flat),
                    [int(i) for i in batch],
                ) or {}
            grad = np.zeros_like(flat)
            th = _suffix_thetas(tmpl, flat)
            for i in batch:
                i = int(i)
                if i in replacements:
                    pre = _pre_entangler_state(
                        pipeline.encode(replacements[i])
                    )
                else:
                    pre = pre_states[i]
                z, _ = _kernels.run_and_measure(pre, codes, b0s, b1s, th, zbit)
                margin = labels[i] * z
                if margin < 1.0:
                    epoch_loss += 1.0 - margin
                    dz, _ = _kernels.ps_sweep(
                        pre, codes, b0s, b1s, th, param_pos, zbit
                    )
                    grad += -labels[i] * dz
            if config.learning_rate != 0.0:
                flat = flat - config.learning_rate * grad / batch.size
        loss_curve.append(epoch_loss / n_samples)

    final = ModelParams.from_flat(n_data, flat)
    th = _suffix_thetas(tmpl, flat)
    correct = 0
    for i in range(n_samples):
        z, _ = _kernels.run_and_measure(pre_states[i], codes, b0s, b1s, th, zbit)
        correct += label_from_expectation(z) == labels[i]
    return TrainReport(tuple(loss_curve), final, correct / n_samples)


def evaluate(params: ModelParams, test_set, *, pipeline: EncoderPipeline):
    """Accuracy and mean readout entanglement entropy on a test set.

    Entropy is the von Neumann entropy of the readout qubit's reduced state
    after the full circuit (the final H does not change the spectrum).
    """
    n_samples = len(test_set)
    if n_samples == 0:
        raise DataError("cannot evaluate on an empty dataset")
    codes, b0s, b1s, tmpl, _, zbit = _suffix_structure(params.n_data)
    th = _suffix_thetas(tmpl, params.flat())
    correct = 0
    entropy_sum = 0.0
    for im, label in zip(test_set.images, test_set.labels):
        pre = _pre_entangler_state(pipeline.encode(im))
        z, rho = _kernels.run_and_measure(pre, codes, b0s, b1s, th, zbit)
        correct += label_from_expectation(z) == label
        entropy_sum += von_neumann_entropy(rho)
    return correct / n_samples, entropy_sum / n_samples


def fit_eval(
    train_set,
    test_set,
    config: TrainConfig,
    *,
    pipeline: EncoderPipeline,
    params0: ModelParams | None = None,
    batch_hook=None,
) -> TrainReport:
    """Train from a seeded init and fill in the test-set metrics."""
    if params0 is None:
        params0 = init_params(
            pipeline.data_qubits(train_set.side), config.seed
        )
    report = train(
        params0, train_set, config, pipeline=pipeline, batch_hook=batch_hook
    )
    accuracy, entropy = evaluate(
        report.final_params, test_set, pipeline=pipeline
    )
    return dataclasses.replace(
        report, test_accuracy=accuracy, mean_entropy=entropy
    )


def params_to_jsonable(params: ModelParams) -> dict:
    return {"n_data": params.n_data, "thetas": params.thetas.tolist()}


def params_from_jsonable(obj: dict) -> ModelParams:
    return ModelParams(int(obj["n_data"]), np.asarray(obj["thetas"], float))
