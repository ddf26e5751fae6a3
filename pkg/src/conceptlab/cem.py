"""Cross-entropy method: diagonal-Gaussian sample / rank / refit minimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

_EXPLORATION_DECAY = 0.8


@dataclass(frozen=True)
class CemConfig:
    population: int = 64
    elite_fraction: float = 0.1
    iterations: int = 30
    init_std: float | np.ndarray = 1.0
    std_floor: float = 1e-4
    seed: int = 0
    # decaying exploration noise, as a fraction of init_std; keeps the
    # search from collapsing into a narrow valley before it has tracked it
    exploration: float = 0.3

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if not 0.0 < self.elite_fraction <= 0.5:
            raise ValueError("elite_fraction must be in (0, 0.5]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @property
    def n_elite(self) -> int:
        return max(1, int(self.population * self.elite_fraction))


def cem_minimize(cost, init_mean: np.ndarray, cfg: CemConfig):
    """Minimize a cost over R^n; returns (best_x, best_cost).

    `cost` is evaluated on whole populations at once: it takes an array of
    shape (population, n) and returns (population,) costs. Out-of-domain
    samples should be penalized by the caller, not rejected. Each round
    samples a diagonal Gaussian, refits it to the elite fraction, and adds
    exploration noise that decays geometrically across rounds. The best
    sample ever seen is returned, so best_cost is non-increasing over
    iterations. Deterministic for a fixed seed.
    """
    mean = np.asarray(init_mean, dtype=np.float64).copy()
    init_std = np.broadcast_to(np.asarray(cfg.init_std, dtype=np.float64), mean.shape).copy()
    std = init_std.copy()
    rng = np.random.default_rng(cfg.seed)
    best_x = mean.copy()
    best_cost = np.inf
    for iteration in range(cfg.iterations):
        samples = mean + std * rng.standard_normal((cfg.population, mean.size))
        costs = np.asarray(cost(samples), dtype=np.float64)
        bad = ~np.isfinite(costs)
        if bad.sum() > cfg.population // 2:
            raise DivergenceError(
                f"{int(bad.sum())}/{cfg.population} non-finite costs in a population"
            )
        costs = np.where(bad, np.inf, costs)
        order = np.argsort(costs, kind="stable")
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_x = samples[order[0]].copy()
        elites = samples[order[: cfg.n_elite]]
        mean = elites.mean(axis=0)
        extra = cfg.exploration * init_std * _EXPLORATION_DECAY**iteration
        std = np.maximum(np.sqrt(elites.std(axis=0) ** 2 + extra**2), cfg.std_floor)
    return best_x, best_cost
