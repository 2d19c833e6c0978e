"""Adam refinement of QAOA angles and the multi-start search used to label training data."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from diffqaoa.errors import ParameterError
from diffqaoa.graph import Graph
from diffqaoa.qsim import NUM_PARAMS, as_params, cost_diagonal, energies, energies_and_gradients
from diffqaoa.rng import derive_seed, make_rng


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    learning_rate: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class OptimizationTrace:
    energies: np.ndarray  # one entry per iterate, initial point included
    best_params: np.ndarray
    best_energy: float
    start_index: int = 0


def random_init(seed: int) -> np.ndarray:
    """Six angles drawn independently from U[-pi, pi)."""
    x = make_rng(seed).uniform(-math.pi, math.pi, NUM_PARAMS)
    # uniform() can round up onto the open endpoint
    return np.where(x >= math.pi, -math.pi, x)


def start_seed(seed: int, index: int) -> int:
    return derive_seed(seed, index)


def optimize_batch(diag: np.ndarray, inits: np.ndarray, cfg: OptimizerConfig) -> list[OptimizationTrace]:
    # rows evolve independently; each row matches a batch-of-one run bit for bit
    x = np.array(inits, dtype=np.float64, copy=True)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b = x.shape[0]
    hist = np.empty((b, cfg.max_iters + 1))
    best_e = np.full(b, np.inf)
    best_x = x.copy()

    def record(it: int, e: np.ndarray) -> None:
        if not np.all(np.isfinite(e)):
            raise RuntimeError(f"non-finite energy at iteration {it}")
        hist[:, it] = e
        better = e < best_e
        best_e[better] = e[better]
        best_x[better] = x[better]

    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for it in range(cfg.max_iters):
        e, g = energies_and_gradients(diag, x)
        if not np.all(np.isfinite(g)):
            raise RuntimeError(f"non-finite gradient at iteration {it}")
        record(it, e)
        t = it + 1
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        x = x - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    record(cfg.max_iters, energies(diag, x))

    return [
        OptimizationTrace(hist[i].copy(), best_x[i].copy(), float(best_e[i]), i) for i in range(b)
    ]


def optimize(g: Graph, init, cfg: OptimizerConfig) -> OptimizationTrace:
    """Run ``cfg.max_iters`` Adam steps from ``init`` and return the best iterate seen."""
    return optimize_batch(cost_diagonal(g), as_params(init)[None, :], cfg)[0]


def multi_start_optimize(
    g: Graph, n_starts: int, cfg: OptimizerConfig, diag: np.ndarray | None = None
) -> OptimizationTrace:
    """Optimize from ``n_starts`` random inits seeded by ``start_seed(cfg.seed, j)``.

    The winner is the start with the lowest best energy, ties going to the
    lower index; its ``start_index`` field records which one.
    """
    if n_starts < 1:
        raise ParameterError(f"n_starts must be >= 1, got {n_starts}")
    if diag is None:
        diag = cost_diagonal(g)
    inits = np.stack([random_init(start_seed(cfg.seed, j)) for j in range(n_starts)])
    traces = optimize_batch(diag, inits, cfg)
    return traces[int(np.argmin([t.best_energy for t in traces]))]
