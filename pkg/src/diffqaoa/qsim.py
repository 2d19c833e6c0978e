"""Dense statevector simulation of depth-3 QAOA for Max-Cut.

Bit order: qubit ``i`` is bit ``i`` of the amplitude index (bit 0 least
significant), and bit value ``b`` maps to spin ``1 - 2b``. The cost operator
is ``H_c = sum_{(i,j) in E} Z_i Z_j``; it is minimised, so its ground energy is
``|E| - 2 * maxcut``.

Parameter vectors are length-6 float arrays ordered
``(gamma_1, gamma_2, gamma_3, beta_1, beta_2, beta_3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from diffqaoa.errors import CapacityError, ParameterError
from diffqaoa.graph import Graph

P_LAYERS = 3
NUM_PARAMS = 2 * P_LAYERS
MAX_QUBITS = 24
FD_STEP = 1e-5
SHIFT = math.pi / 4


@dataclass
class StateVector:
    n: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def copy(self) -> StateVector:
        return StateVector(self.n, self.amplitudes.copy())


def as_params(params) -> np.ndarray:
    p = np.asarray(params, dtype=np.float64)
    if p.shape != (NUM_PARAMS,):
        raise ParameterError(f"expected {NUM_PARAMS} parameters, got shape {p.shape}")
    return p


def make_params(gammas, betas) -> np.ndarray:
    return as_params(np.concatenate([np.asarray(gammas, float), np.asarray(betas, float)]))


def _check_qubits(n: int) -> None:
    if not (1 <= n <= MAX_QUBITS):
        raise CapacityError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


def cost_diagonal(g: Graph) -> np.ndarray:
    """Diagonal of ``H_c`` in the computational basis, as float64 holding integers."""
    _check_qubits(g.n)
    k = np.arange(1 << g.n, dtype=np.int64)
    vals = np.zeros(k.size, dtype=np.int64)
    for i, j in g.edges:
        vals += 1 - 2 * (((k >> i) ^ (k >> j)) & 1)
    return vals.astype(np.float64)


def _check_diag(diag) -> np.ndarray:
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    # the phase kernel indexes a lookup table by eigenvalue
    if not np.array_equal(diag, np.rint(diag)):
        raise ParameterError("cost diagonal must hold integer eigenvalues")
    return diag


def _num_qubits(diag: np.ndarray) -> int:
    n = int(diag.size).bit_length() - 1
    if diag.ndim != 1 or diag.size != 1 << n:
        raise ParameterError(f"cost diagonal length {diag.size} is not a power of two")
    return n


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _phase(amp, diag, gamma):
    # diag holds integers in [-m, m]; one sincos per distinct value
    m = 0
    for k in range(diag.size):
        v = int(abs(diag[k]))
        if v > m:
            m = v
    table = np.empty(2 * m + 1, dtype=np.complex128)
    for v in range(-m, m + 1):
        a = gamma * v
        table[v + m] = complex(math.cos(a), -math.sin(a))
    for k in range(amp.size):
        amp[k] *= table[int(diag[k]) + m]


@numba.njit(cache=True)
def _rx(amp, q, c, s):
    # exp(-i theta X_q) with c = cos(theta), s = sin(theta)
    bit = 1 << q
    for hi in range(0, amp.size, 2 * bit):
        for k in range(hi, hi + bit):
            a0 = amp[k]
            a1 = amp[k + bit]
            amp[k] = complex(c * a0.real + s * a1.imag, c * a0.imag - s * a1.real)
            amp[k + bit] = complex(c * a1.real + s * a0.imag, c * a1.imag - s * a0.real)


@numba.njit(cache=True)
def _mixer(amp, n, beta):
    c = math.cos(beta)
    s = math.sin(beta)
    for q in range(n):
        _rx(amp, q, c, s)


@numba.njit(cache=True)
def _expect(amp, diag):
    acc = 0.0
    for k in range(amp.size):
        a = amp[k]
        acc += (a.real * a.real + a.imag * a.imag) * diag[k]
    return acc


@numba.njit(cache=True)
def _plus(dim):
    out = np.empty(dim, dtype=np.complex128)
    v = 1.0 / math.sqrt(dim)
    for k in range(dim):
        out[k] = v
    return out


@numba.njit(cache=True)
def _run_layers(amp, diag, n, params, first):
    for layer in range(first, 3):
        _phase(amp, diag, params[layer])
        _mixer(amp, n, params[3 + layer])


@numba.njit(cache=True)
def _energy_batch(diag, n, params, out):
    for b in range(params.shape[0]):
        amp = _plus(diag.size)
        _run_layers(amp, diag, n, params[b], 0)
        out[b] = _expect(amp, diag)


@numba.njit(cache=True)
def _energy_grad_one(diag, n, params, fd_step, grad):
    dim = diag.size
    # snaps[l] holds the state entering layer l; snaps[3] is the output state
    snaps = np.empty((4, dim), dtype=np.complex128)
    snaps[0] = _plus(dim)
    for layer in range(3):
        snaps[layer + 1] = snaps[layer]
        _phase(snaps[layer + 1], diag, params[layer])
        _mixer(snaps[layer + 1], n, params[3 + layer])
    energy = _expect(snaps[3], diag)

    work = np.empty(dim, dtype=np.complex128)
    cs = math.cos(SHIFT)
    sn = math.sin(SHIFT)
    for layer in range(3):
        # gamma: central difference (H_c's spectrum has many frequencies)
        vals = np.empty(2)
        for idx in range(2):
            h = fd_step if idx == 0 else -fd_step
            work[:] = snaps[layer]
            _phase(work, diag, params[layer] + h)
            _mixer(work, n, params[3 + layer])
            _run_layers(work, diag, n, params, layer + 1)
            vals[idx] = _expect(work, diag)
        grad[layer] = (vals[0] - vals[1]) / (2.0 * fd_step)

        # beta: two-term shift per X_q generator; extra rotations commute within the layer
        total = 0.0
        for q in range(n):
            for idx in range(2):
                work[:] = snaps[layer + 1]
                _rx(work, q, cs, sn if idx == 0 else -sn)
                _run_layers(work, diag, n, params, layer + 1)
                vals[idx] = _expect(work, diag)
            total += vals[0] - vals[1]
        grad[3 + layer] = total
    return energy


@numba.njit(cache=True)
def _energy_grad_batch(diag, n, params, fd_step, energies, grads):
    for b in range(params.shape[0]):
        energies[b] = _energy_grad_one(diag, n, params[b], fd_step, grads[b])


# ---------------------------------------------------------------- public API


def prepare_plus_state(n: int) -> StateVector:
    _check_qubits(n)
    return StateVector(n, _plus(1 << n))


def apply_cost_evolution(sv: StateVector, diag: np.ndarray, gamma: float) -> StateVector:
    """Return ``exp(-i gamma H_c) |sv>``; the input state is not modified."""
    diag = _check_diag(diag)
    if diag.size != sv.amplitudes.size:
        raise ParameterError(
            f"state has {sv.amplitudes.size} amplitudes but diagonal has {diag.size}"
        )
    out = sv.copy()
    _phase(out.amplitudes, diag, float(gamma))
    return out


def apply_mixer_evolution(sv: StateVector, beta: float) -> StateVector:
    """Return ``exp(-i beta sum_q X_q) |sv>``, i.e. ``Rx(2 beta)`` on every qubit."""
    out = sv.copy()
    _mixer(out.amplitudes, sv.n, float(beta))
    return out


def qaoa_state(g: Graph, params) -> StateVector:
    p = as_params(params)
    diag = cost_diagonal(g)
    sv = prepare_plus_state(g.n)
    for layer in range(P_LAYERS):
        sv = apply_cost_evolution(sv, diag, p[layer])
        sv = apply_mixer_evolution(sv, p[P_LAYERS + layer])
    return sv


def energies(diag: np.ndarray, params_batch) -> np.ndarray:
    """``<H_c>`` for each row of a ``(B, 6)`` parameter batch."""
    diag = _check_diag(diag)
    pb = np.ascontiguousarray(np.atleast_2d(params_batch), dtype=np.float64)
    if pb.shape[1] != NUM_PARAMS:
        raise ParameterError(f"expected (B, {NUM_PARAMS}) parameters, got {pb.shape}")
    out = np.empty(pb.shape[0])
    _energy_batch(diag, _num_qubits(diag), pb, out)
    return out


def energies_and_gradients(diag: np.ndarray, params_batch) -> tuple[np.ndarray, np.ndarray]:
    diag = _check_diag(diag)
    pb = np.ascontiguousarray(np.atleast_2d(params_batch), dtype=np.float64)
    if pb.shape[1] != NUM_PARAMS:
        raise ParameterError(f"expected (B, {NUM_PARAMS}) parameters, got {pb.shape}")
    e = np.empty(pb.shape[0])
    gr = np.empty_like(pb)
    _energy_grad_batch(diag, _num_qubits(diag), pb, FD_STEP, e, gr)
    return e, gr


def cost_expectation(g: Graph, params) -> float:
    return float(energies(cost_diagonal(g), as_params(params))[0])


def cost_gradient(g: Graph, params) -> np.ndarray:
    """Gradient of :func:`cost_expectation` with respect to the six angles.

    Mixer angles use the exact shift rule on each ``X_q`` term (shift pi/4);
    cost angles use central differences with step ``FD_STEP``.
    """
    _, gr = energies_and_gradients(cost_diagonal(g), as_params(params))
    return gr[0]
