"""Dense statevector simulator.

Conventions, fixed across the package:

* A state over n qubits is a complex128 vector of length 2**n.  Qubit 0 is
  the MOST significant bit of the basis index, so |q0 q1 ... q_{n-1}> lives
  at index sum(q_k << (n-1-k)).
* Gate set: X, H, RX, RY, RZ, XX, ZZ.  Rotations follow
  RX(t) = exp(-i t X / 2), RY(t) = exp(-i t Y / 2), RZ(t) = exp(-i t Z / 2),
  and the two-qubit entanglers follow XX(t) = exp(-i t (X@X) / 2),
  ZZ(t) = exp(-i t (Z@Z) / 2).  Consequently RX(pi)|0> = -i|1>,
  ZZ(t)|00> = e^{-i t/2}|00>, and XX(pi/2)|00> = (|00> - i|11>)/sqrt(2).
* Entropies are in bits (base-2 logarithm).

Gates are applied through numba kernels; `gate_matrix` exposes the defining
dense matrices for tests and documentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import BipartitionError, CircuitError, StateError

ONE_QUBIT_KINDS = ("X", "H", "RX", "RY", "RZ")
TWO_QUBIT_KINDS = ("XX", "ZZ")
GATE_KINDS = ONE_QUBIT_KINDS + TWO_QUBIT_KINDS
PARAMETRIC_KINDS = ("RX", "RY", "RZ", "XX", "ZZ")

_KIND_CODE = {
    "X": _kernels.CODE_X,
    "H": _kernels.CODE_H,
    "RX": _kernels.CODE_RX,
    "RY": _kernels.CODE_RY,
    "RZ": _kernels.CODE_RZ,
    "XX": _kernels.CODE_XX,
    "ZZ": _kernels.CODE_ZZ,
}

EIG_CUTOFF = 1e-12
TRACE_TOL = 1e-6


@dataclass(frozen=True)
class GateOp:
    """A single gate: kind, target qubits, and an angle for rotations."""

    kind: str
    targets: tuple[int, ...]
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "theta", float(self.theta))
        want = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(targets) != want:
            raise CircuitError(
                f"{self.kind} takes {want} target(s), got {len(targets)}"
            )
        if len(set(targets)) != len(targets):
            raise CircuitError(f"{self.kind} targets must be distinct: {targets}")
        if any(t < 0 for t in targets):
            raise CircuitError(f"negative target in {targets}")


def x(q: int) -> GateOp:
    return GateOp("X", (q,))


def h(q: int) -> GateOp:
    return GateOp("H", (q,))


def rx(q: int, theta: float) -> GateOp:
    return GateOp("RX", (q,), theta)


def ry(q: int, theta: float) -> GateOp:
    return GateOp("RY", (q,), theta)


def rz(q: int, theta: float) -> GateOp:
    return GateOp("RZ", (q,), theta)


def xx(q0: int, q1: int, theta: float) -> GateOp:
    return GateOp("XX", (q0, q1), theta)


def zz(q0: int, q1: int, theta: float) -> GateOp:
    return GateOp("ZZ", (q0, q1), theta)


def gate_matrix(op: GateOp) -> np.ndarray:
    """Dense matrix of a gate (2x2, or 4x4 over (first target, second target)
    with the first listed target as the more significant bit)."""
    t = op.theta
    c, s = math.cos(0.5 * t), math.sin(0.5 * t)
    if op.kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if op.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if op.kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if op.kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if op.kind == "RZ":
        return np.array(
            [[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex
        )
    if op.kind == "XX":
        m = np.eye(4, dtype=complex) * c
        for a, b in ((0, 3), (1, 2), (2, 1), (3, 0)):
            m[a, b] = -1j * s
        return m
    # ZZ
    return np.diag(
        np.exp(-0.5j * t * np.array([1, -1, -1, 1]))
    ).astype(complex)


@dataclass(frozen=True)
class Statevector:
    """Immutable dense state.  amps has length 2**n_qubits and unit norm."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise StateError("need at least one qubit")
        amps = np.asarray(self.amps, dtype=np.complex128).reshape(-1).copy()
        if amps.shape[0] != 2**n:
            raise StateError(
                f"state over {n} qubit(s) needs {2**n} amplitudes, got {amps.shape[0]}"
            )
        nrm = float(np.linalg.norm(amps))
        if abs(nrm - 1.0) > TRACE_TOL:
            raise StateError(f"state norm {nrm} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list over a fixed register."""

    n_qubits: int
    ops: tuple[GateOp, ...]

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise CircuitError("need at least one qubit")
        ops = tuple(self.ops)
        for op in ops:
            for t in op.targets:
                if t >= n:
                    raise CircuitError(
                        f"target {t} out of range for {n} qubit(s) in {op.kind}"
                    )
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "ops", ops)

    def __len__(self) -> int:
        return len(self.ops)

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(codes, bitmask0, bitmask1, thetas) arrays for the kernels."""
        m = len(self.ops)
        codes = np.empty(m, dtype=np.int64)
        b0 = np.empty(m, dtype=np.int64)
        b1 = np.zeros(m, dtype=np.int64)
        thetas = np.zeros(m, dtype=np.float64)
        for k, op in enumerate(self.ops):
            codes[k] = _KIND_CODE[op.kind]
            b0[k] = qubit_bit(self.n_qubits, op.targets[0])
            if len(op.targets) == 2:
                b1[k] = qubit_bit(self.n_qubits, op.targets[1])
            thetas[k] = op.theta
        return codes, b0, b1, thetas


def qubit_bit(n_qubits: int, qubit: int) -> int:
    """Basis-index bit mask for a qubit (qubit 0 = most significant bit)."""
    if not 0 <= qubit < n_qubits:
        raise CircuitError(f"qubit {qubit} out of range for {n_qubits} qubit(s)")
    return 1 << (n_qubits - 1 - qubit)


@dataclass(frozen=True)
class NoiseSpec:
    """Single-trajectory noise: after each eligible gate, each touched qubit
    is independently hit with probability p by a uniform Pauli from {X,Y,Z}.
    eligible marks which ops are noisy (None = all)."""

    p: float
    eligible: tuple[bool, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise CircuitError(f"noise probability {self.p} outside [0, 1]")


def apply_gate(state: Statevector, op: GateOp) -> Statevector:
    """Apply one gate and return the new state."""
    return run_circuit(state, Circuit(state.n_qubits, (op,)))


def run_circuit(
    state0: Statevector,
    circuit: Circuit,
    noise: NoiseSpec | None = None,
    seed: int | None = None,
) -> Statevector:
    """Run a circuit, optionally as one noisy trajectory.

    With noise, `seed` seeds the trajectory's Pauli draws; the same seed
    reproduces the same trajectory.
    """
    if state0.n_qubits != circuit.n_qubits:
        raise CircuitError(
            f"state has {state0.n_qubits} qubit(s), circuit has {circuit.n_qubits}"
        )
    codes, b0, b1, thetas = circuit.packed
    psi = state0.amps.copy()
    if noise is None:
        _kernels.run_ops(psi, codes, b0, b1, thetas)
    else:
        eligible = _eligible_array(circuit, noise.eligible)
        np_seed = (0 if seed is None else int(seed)) & 0xFFFFFFFF
        _kernels.run_one_noisy(psi, codes, b0, b1, thetas, eligible, noise.p, np_seed)
    return Statevector(circuit.n_qubits, psi)


def _eligible_array(circuit: Circuit, eligible) -> np.ndarray:
    if eligible is None:
        return np.ones(len(circuit.ops), dtype=np.bool_)
    arr = np.asarray(eligible, dtype=np.bool_)
    if arr.shape != (len(circuit.ops),):
        raise CircuitError("eligible mask length must match op count")
    return arr


def expectation_z(state: Statevector, qubit: int) -> float:
    """<Z> on one qubit: sum of |amp|^2 signed by that qubit's bit."""
    bit = qubit_bit(state.n_qubits, qubit)
    return float(_kernels.expect_z(state.amps.copy(), bit))


def reduced_density(state: Statevector, qubit: int) -> np.ndarray:
    """2x2 reduced density matrix of one qubit (trace out the rest)."""
    if state.n_qubits == 1:
        raise BipartitionError("cannot bipartition a single-qubit state")
    bit = qubit_bit(state.n_qubits, qubit)
    return np.asarray(_kernels.reduced_1q(state.amps.copy(), bit))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy of a 2x2 density matrix in bits.

    Eigenvalues <= 1e-12 contribute zero; a trace deviating from 1 by more
    than 1e-6 raises.  The result is clamped below at 0 to absorb eigenvalue
    roundoff.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (2, 2):
        raise StateError(f"expected a 2x2 density matrix, got shape {rho.shape}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise StateError(f"density matrix trace {tr} is not 1")
    evals = np.linalg.eigvalsh(rho)
    total = 0.0
    for lam in evals:
        lam = float(lam)
        if lam > EIG_CUTOFF:
            total -= lam * math.log2(lam)
    return max(total, 0.0)
