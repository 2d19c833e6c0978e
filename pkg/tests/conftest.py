import itertools
import math

import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.linalg import expm

from diffqaoa.graph import Graph

# ---------------------------------------------------------------- dense reference
# Independent of diffqaoa.qsim: every operator is a materialized 2^n x 2^n matrix.
# np.kron puts its first factor on the most significant bit, so qubit n-1 goes first.

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def on_qubits(ops: dict, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, np.eye(2)))
    return out


def dense_cost_hamiltonian(g: Graph) -> np.ndarray:
    h = np.zeros((1 << g.n, 1 << g.n), dtype=complex)
    for i, j in g.edges:
        h += on_qubits({i: PAULI_Z, j: PAULI_Z}, g.n)
    return h


def dense_qaoa_energy(g: Graph, params) -> float:
    n = g.n
    hc = dense_cost_hamiltonian(g)
    zero = np.zeros(1 << n, dtype=complex)
    zero[0] = 1.0
    psi = on_qubits({q: HADAMARD for q in range(n)}, n) @ zero
    for layer in range(3):
        psi = expm(-1j * params[layer] * hc) @ psi
        mixer = on_qubits({q: rx(2 * params[3 + layer]) for q in range(n)}, n)
        psi = mixer @ psi
    return float(np.real(np.conj(psi) @ hc @ psi))


def full_enumeration_maxcut(g: Graph) -> int:
    best = 0
    for bits in itertools.product((0, 1), repeat=g.n):
        best = max(best, sum(bits[i] != bits[j] for i, j in g.edges))
    return best


# ---------------------------------------------------------------- fixtures


@pytest.fixture
def k3():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def c4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def single_edge():
    return Graph.from_edges(2, [(0, 1)])


@st.composite
def graphs(draw, min_n=2, max_n=6, nonempty=True):
    n = draw(st.integers(min_n, max_n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [p for p, keep in zip(pairs, mask) if keep]
    if nonempty and not edges:
        edges = [pairs[draw(st.integers(0, len(pairs) - 1))]]
    return Graph.from_edges(n, edges)


angles = st.floats(-math.pi, math.pi, allow_nan=False, allow_infinity=False)
param_vectors = st.lists(angles, min_size=6, max_size=6).map(np.array)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
