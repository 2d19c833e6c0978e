import math

import numpy as np
import pytest
from conftest import dense_qaoa_energy, graphs, param_vectors
from hypothesis import given, settings

from diffqaoa.errors import CapacityError, ParameterError
from diffqaoa.graph import Graph, brute_force_maxcut, generate_random_graph
from diffqaoa.qsim import (
    StateVector,
    apply_cost_evolution,
    apply_mixer_evolution,
    cost_diagonal,
    cost_expectation,
    cost_gradient,
    prepare_plus_state,
    qaoa_state,
)


def central_difference(g, params, h=1e-5):
    out = np.empty(6)
    for k in range(6):
        up, down = params.copy(), params.copy()
        up[k] += h
        down[k] -= h
        out[k] = (cost_expectation(g, up) - cost_expectation(g, down)) / (2 * h)
    return out


def random_state(rng, n):
    a = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(n, a / np.linalg.norm(a))


@pytest.mark.parametrize("n", [1, 3, 8])
def test_plus_state(n):
    sv = prepare_plus_state(n)
    np.testing.assert_allclose(sv.amplitudes, np.full(1 << n, 2 ** (-n / 2)), rtol=0, atol=1e-15)
    assert abs(sv.norm() - 1) < 1e-12


def test_plus_state_capacity():
    with pytest.raises(CapacityError):
        prepare_plus_state(0)
    with pytest.raises(CapacityError):
        prepare_plus_state(25)


def test_cost_evolution_examples(single_edge):
    diag = cost_diagonal(single_edge)
    assert diag[0] == 1
    sv = StateVector(2, np.array([1, 0, 0, 0], dtype=complex))
    out = apply_cost_evolution(sv, diag, math.pi)
    np.testing.assert_allclose(out.amplitudes, [-1, 0, 0, 0], atol=1e-15)
    rng = np.random.default_rng(0)
    psi = random_state(rng, 2)
    np.testing.assert_array_equal(apply_cost_evolution(psi, diag, 0.0).amplitudes, psi.amplitudes)


def test_cost_evolution_rejects_mismatch(single_edge):
    with pytest.raises(ParameterError):
        apply_cost_evolution(prepare_plus_state(3), cost_diagonal(single_edge), 0.1)
    with pytest.raises(ParameterError):
        apply_cost_evolution(prepare_plus_state(1), np.array([0.5, 1.0]), 0.1)


def test_evolutions_preserve_norm():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        g = generate_random_graph(n, 0.6, int(rng.integers(1 << 30)))
        psi = random_state(rng, n)
        gamma, beta = rng.uniform(-4, 4, 2)
        assert abs(apply_cost_evolution(psi, cost_diagonal(g), gamma).norm() - psi.norm()) < 1e-12
        assert abs(apply_mixer_evolution(psi, beta).norm() - psi.norm()) < 1e-12


def test_mixer_examples():
    psi = StateVector(1, np.array([1, 0], dtype=complex))
    np.testing.assert_array_equal(apply_mixer_evolution(psi, 0.0).amplitudes, psi.amplitudes)
    flipped = apply_mixer_evolution(psi, math.pi / 2).amplitudes
    np.testing.assert_allclose(flipped, [0, -1j], atol=1e-15)
    two = apply_mixer_evolution(StateVector(2, np.array([1, 0, 0, 0], dtype=complex)), math.pi / 4)
    np.testing.assert_allclose(np.abs(two.amplitudes), 0.5, atol=1e-15)


def test_mixer_flips_both_qubits_at_half_pi():
    # exp(-i pi/2 X) = -i X on each qubit, so |01> -> (-i)^2 |10>
    psi = StateVector(2, np.array([0, 1, 0, 0], dtype=complex))
    np.testing.assert_allclose(apply_mixer_evolution(psi, math.pi / 2).amplitudes, [0, 0, -1, 0], atol=1e-15)


def test_cost_diagonal_bit_order():
    # qubit i is bit i of the index: setting bit 0 cuts edge (0,1), setting bit 2 does not
    diag = cost_diagonal(Graph.from_edges(3, [(0, 1)]))
    assert diag[0b001] == -1
    assert diag[0b100] == 1
    assert diag[0b011] == 1


def test_cost_diagonal_values(k3):
    diag = cost_diagonal(k3)
    # |000> and |111> leave every edge uncut
    assert diag[0] == 3 and diag[7] == 3
    assert sorted(diag.tolist()) == [-1] * 6 + [3] * 2


@settings(max_examples=50)
@given(graphs(max_n=8))
def test_cost_diagonal_invariants(g):
    diag = cost_diagonal(g)
    m = g.num_edges
    assert diag.min() == brute_force_maxcut(g).ground_energy
    assert np.all(np.abs(diag) <= m)
    assert np.all((diag.astype(int) - m) % 2 == 0)
    flip = np.arange(diag.size) ^ (diag.size - 1)
    np.testing.assert_array_equal(diag, diag[flip])


def test_qaoa_state_zero_params_is_plus():
    g = generate_random_graph(5, 0.5, 3)
    np.testing.assert_allclose(qaoa_state(g, np.zeros(6)).amplitudes, prepare_plus_state(5).amplitudes,
                               atol=1e-15)
    assert cost_expectation(g, np.zeros(6)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("gamma,beta", [(math.pi / 8, math.pi / 8), (0.3, 0.2), (0.7, 1.1)])
def test_single_edge_closed_form(single_edge, gamma, beta):
    # p=1 on one edge: <Z0 Z1> = sin(4 beta) sin(2 gamma)
    params = np.array([gamma, 0, 0, beta, 0, 0])
    expected = math.sin(4 * beta) * math.sin(2 * gamma)
    assert cost_expectation(single_edge, params) == pytest.approx(expected, abs=1e-12)
    assert dense_qaoa_energy(single_edge, params) == pytest.approx(expected, abs=1e-12)


def test_single_edge_closed_form_gradient(single_edge):
    gamma, beta = math.pi / 8, 0.3
    grad = cost_gradient(single_edge, np.array([gamma, 0, 0, beta, 0, 0]))
    assert grad[3] == pytest.approx(4 * math.cos(4 * beta) * math.sin(2 * gamma), abs=1e-10)
    assert grad[0] == pytest.approx(2 * math.sin(4 * beta) * math.cos(2 * gamma), abs=1e-8)
    # at beta = pi/8 the derivative in beta vanishes
    assert cost_gradient(single_edge, np.array([gamma, 0, 0, math.pi / 8, 0, 0]))[3] == pytest.approx(
        0.0, abs=1e-12
    )


def test_k3_dense_oracle(k3):
    params = np.random.default_rng(7).uniform(-math.pi, math.pi, 6)
    assert cost_expectation(k3, params) == pytest.approx(dense_qaoa_energy(k3, params), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(graphs(max_n=4), param_vectors)
def test_matches_dense_oracle(g, params):
    assert abs(cost_expectation(g, params) - dense_qaoa_energy(g, params)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(graphs(max_n=6), param_vectors)
def test_variational_bound_and_norm(g, params):
    e = cost_expectation(g, params)
    assert brute_force_maxcut(g).ground_energy - 1e-9 <= e <= g.num_edges + 1e-9
    assert abs(qaoa_state(g, params).norm() - 1) < 1e-10


def test_gradient_zero_params_beta_components(c4):
    grad = cost_gradient(c4, np.zeros(6))
    np.testing.assert_allclose(grad[3:], 0.0, atol=1e-12)
    np.testing.assert_allclose(grad, central_difference(c4, np.zeros(6)), atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(graphs(max_n=6), param_vectors)
def test_gradient_matches_finite_differences(g, params):
    grad = cost_gradient(g, params)
    fd = central_difference(g, params)
    assert np.all(np.abs(grad - fd) <= np.maximum(1e-5 * np.abs(fd), 1e-7))


def test_expectation_consistent_with_state(k3):
    params = np.array([0.3, -0.2, 1.1, 0.5, 0.1, -0.7])
    amp = qaoa_state(k3, params).amplitudes
    assert cost_expectation(k3, params) == pytest.approx(
        float(np.sum(np.abs(amp) ** 2 * cost_diagonal(k3))), abs=1e-12
    )


def test_wrong_param_count(k3):
    with pytest.raises(ParameterError):
        cost_expectation(k3, np.zeros(4))


def test_sixteen_qubits_runs():
    g = Graph.from_edges(16, [(i, (i + 1) % 16) for i in range(16)])
    params = np.array([0.2, 0.3, 0.1, 0.4, 0.2, 0.1])
    e = cost_expectation(g, params)
    assert brute_force_maxcut(g).ground_energy <= e <= g.num_edges
    assert abs(qaoa_state(g, params).norm() - 1) < 1e-10
