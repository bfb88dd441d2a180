"""Shared randomized-instance builders for the test suite.

Instances are built over a directed ring plus random extra edges, so both
interaction graphs are strongly connected by construction and all rate
bounds hold with margin.
"""
import numpy as np

from polarsis.params import ModelParams


def ring_plus_random_mask(rng: np.random.Generator, n: int, extra: float) -> np.ndarray:
    """Receiver-indexed sparsity pattern: directed ring plus extra edges."""
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        mask[(i + 1) % n, i] = True
    if n > 1:
        mask |= (rng.random((n, n)) < extra) & ~np.eye(n, dtype=bool)
    return mask


def random_params(
    rng: np.random.Generator,
    n: int,
    beta_row_max: tuple[float, float] = (0.3, 0.95),
) -> ModelParams:
    """Draw an admissible instance with every rate strictly inside its range."""
    mask = ring_plus_random_mask(rng, n, extra=0.15)
    B = np.where(mask, rng.uniform(0.2, 1.0, (n, n)), 0.0)
    if n > 1:
        B *= rng.uniform(*beta_row_max) / B.sum(axis=1).max()
    B_min = rng.uniform(0.1, 0.9) * B

    delta_min = rng.uniform(0.05, 0.3)
    delta = rng.uniform(delta_min, 0.98, n)

    wmask = ring_plus_random_mask(rng, n, extra=0.2)
    W = np.where(wmask, rng.uniform(0.2, 1.0, (n, n)), 0.0)
    np.fill_diagonal(W, rng.uniform(0.2, 1.0, n))
    W /= W.sum(axis=1, keepdims=True)

    theta = rng.uniform(0.05, 0.95, n)
    return ModelParams(B=B, B_min=B_min, delta=delta, delta_min=delta_min, W=W, theta=theta)
