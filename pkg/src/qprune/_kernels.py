"""Numba kernels for statevector evolution.

States are dense complex128 vectors of length 2**n over qubits 0..n-1, where
qubit 0 is the most significant bit of the basis index.  Kernels address
qubits through precomputed bit masks (qubit q -> 1 << (n - 1 - q)) so they
never need to know n.  Circuits arrive packed as parallel arrays: an int64
gate code, two int64 bit masks (second mask 0 for one-qubit gates), and a
float64 angle per operation.

All kernels mutate the state argument in place; callers pass freshly copied
arrays.  Everything is single-threaded and uses cache=True so compilation is
paid once per checkout.
"""

import numpy as np
from numba import njit

# Gate codes shared with qsim's packing.
CODE_X = 0
CODE_H = 1
CODE_RX = 2
CODE_RY = 3
CODE_RZ = 4
CODE_XX = 5
CODE_ZZ = 6

_SQRT_HALF = 1.0 / np.sqrt(2.0)


@njit(cache=True)
def _apply_1q(psi, bit, m00, m01, m10, m11):
    for i in range(psi.shape[0]):
        if i & bit == 0:
            j = i | bit
            a = psi[i]
            b = psi[j]
            psi[i] = m00 * a + m01 * b
            psi[j] = m10 * a + m11 * b


@njit(cache=True)
def _apply_xx(psi, b0, b1, theta):
    # exp(-i theta (X@X)/2): couples |00>-|11> and |01>-|10> within each pair block.
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    both = b0 | b1
    for i in range(psi.shape[0]):
        if i & both == 0:
            i01 = i | b1
            i10 = i | b0
            i11 = i | both
            a00 = psi[i]
            a01 = psi[i01]
            a10 = psi[i10]
            a11 = psi[i11]
            psi[i] = c * a00 - 1j * s * a11
            psi[i11] = c * a11 - 1j * s * a00
            psi[i01] = c * a01 - 1j * s * a10
            psi[i10] = c * a10 - 1j * s * a01


@njit(cache=True)
def _apply_zz(psi, b0, b1, theta):
    # exp(-i theta (Z@Z)/2): phase e^{-i theta/2} on equal bits, e^{+i theta/2} otherwise.
    ph_same = np.exp(-0.5j * theta)
    ph_diff = np.exp(0.5j * theta)
    for i in range(psi.shape[0]):
        if ((i & b0) != 0) == ((i & b1) != 0):
            psi[i] *= ph_same
        else:
            psi[i] *= ph_diff


@njit(cache=True)
def _apply_op(psi, code, b0, b1, theta):
    if code == CODE_X:
        _apply_1q(psi, b0, 0.0 + 0j, 1.0 + 0j, 1.0 + 0j, 0.0 + 0j)
    elif code == CODE_H:
        r = _SQRT_HALF + 0j
        _apply_1q(psi, b0, r, r, r, -r)
    elif code == CODE_RX:
        c = np.cos(0.5 * theta)
        s = np.sin(0.5 * theta)
        _apply_1q(psi, b0, c + 0j, -1j * s, -1j * s, c + 0j)
    elif code == CODE_RY:
        c = np.cos(0.5 * theta)
        s = np.sin(0.5 * theta)
        _apply_1q(psi, b0, c + 0j, -s + 0j, s + 0j, c + 0j)
    elif code == CODE_RZ:
        _apply_1q(psi, b0, np.exp(-0.5j * theta), 0j, 0j, np.exp(0.5j * theta))
    elif code == CODE_XX:
        _apply_xx(psi, b0, b1, theta)
    else:
        _apply_zz(psi, b0, b1, theta)


@njit(cache=True)
def run_ops(psi, codes, b0s, b1s, thetas):
    for k in range(codes.shape[0]):
        _apply_op(psi, codes[k], b0s[k], b1s[k], thetas[k])


@njit(cache=True)
def _apply_pauli(psi, bit, which):
    if which == 0:  # X
        _apply_1q(psi, bit, 0j, 1.0 + 0j, 1.0 + 0j, 0j)
    elif which == 1:  # Y
        _apply_1q(psi, bit, 0j, -1j, 1j, 0j)
    else:  # Z
        _apply_1q(psi, bit, 1.0 + 0j, 0j, 0j, -1.0 + 0j)


@njit(cache=True)
def run_ops_noisy(psi, codes, b0s, b1s, thetas, eligible, p):
    """One noisy trajectory.  After each eligible gate, each touched qubit is
    independently hit with probability p by a Pauli drawn uniformly from
    {X, Y, Z}.  The caller seeds np.random before invoking."""
    for k in range(codes.shape[0]):
        _apply_op(psi, codes[k], b0s[k], b1s[k], thetas[k])
        if eligible[k]:
            if np.random.random() < p:
                _apply_pauli(psi, b0s[k], int(np.random.random() * 3.0))
            if b1s[k] != 0:
                if np.random.random() < p:
                    _apply_pauli(psi, b1s[k], int(np.random.random() * 3.0))


@njit(cache=True)
def expect_z(psi, bit):
    e = 0.0
    for i in range(psi.shape[0]):
        pr = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        if i & bit:
            e -= pr
        else:
            e += pr
    return e


@njit(cache=True)
def traj_z(state0, codes, b0s, b1s, thetas, eligible, p, zbit, n_traj, seed):
    """Per-trajectory <Z> samples for one input state under depolarizing-style
    Pauli insertion noise.  Deterministic for a given seed."""
    np.random.seed(seed)
    out = np.empty(n_traj)
    psi = np.empty_like(state0)
    for t in range(n_traj):
        psi[:] = state0
        run_ops_noisy(psi, codes, b0s, b1s, thetas, eligible, p)
        out[t] = expect_z(psi, zbit)
    return out


@njit(cache=True)
def run_one_noisy(psi, codes, b0s, b1s, thetas, eligible, p, seed):
    """Seed and run a single noisy trajectory in place."""
    np.random.seed(seed)
    run_ops_noisy(psi, codes, b0s, b1s, thetas, eligible, p)


@njit(cache=True)
def reduced_1q(psi, bit):
    """2x2 reduced density matrix of the qubit addressed by bit."""
    rho = np.zeros((2, 2), dtype=np.complex128)
    for i in range(psi.shape[0]):
        if i & bit == 0:
            j = i | bit
            a = psi[i]
            b = psi[j]
            rho[0, 0] += a * np.conj(a)
            rho[1, 1] += b * np.conj(b)
            rho[0, 1] += a * np.conj(b)
    rho[1, 0] = np.conj(rho[0, 1])
    return rho


@njit(cache=True)
def run_and_measure(pre_state, codes, b0s, b1s, thetas, zbit):
    """Apply ops to a copy of pre_state; return (<Z>, 2x2 readout density)."""
    psi = pre_state.copy()
    run_ops(psi, codes, b0s, b1s, thetas)
    return expect_z(psi, zbit), reduced_1q(psi, zbit)


@njit(cache=True)
def ps_sweep(pre_state, codes, b0s, b1s, thetas, param_pos, zbit):
    """Parameter-shift sweep over the gates listed in param_pos (strictly
    increasing op indices).

    For each listed gate the two shifted circuits (theta_j +- pi/2) are
    evaluated in full and dz[j] = (<Z>(+) - <Z>(-)) / 2.  The unshifted
    prefix is advanced in place so each shifted evaluation only re-runs that
    parameter's gate and suffix; the values are exactly the shifted-run
    values.  Returns (dz, <Z> of the unshifted circuit).
    """
    n_ops = codes.shape[0]
    n_par = param_pos.shape[0]
    dz = np.zeros(n_par)
    prefix = pre_state.copy()
    scratch = np.empty_like(pre_state)
    half_pi = 0.5 * np.pi
    j = 0
    for k in range(n_ops):
        if j < n_par and param_pos[j] == k:
            z_plus = 0.0
            z_minus = 0.0
            for sgn in range(2):
                shift = half_pi if sgn == 0 else -half_pi
                scratch[:] = prefix
                _apply_op(scratch, codes[k], b0s[k], b1s[k], thetas[k] + shift)
                for kk in range(k + 1, n_ops):
                    _apply_op(scratch, codes[kk], b0s[kk], b1s[kk], thetas[kk])
                if sgn == 0:
                    z_plus = expect_z(scratch, zbit)
                else:
                    z_minus = expect_z(scratch, zbit)
            dz[j] = 0.5 * (z_plus - z_minus)
            j += 1
        _apply_op(prefix, codes[k], b0s[k], b1s[k], thetas[k])
    return dz, expect_z(prefix, zbit)
