"""Model parameters and their admissibility checks.

A model instance couples two layers over n communities:

* epidemic side: infection matrix B (receiver-indexed, B[i, j] is the rate at
  which community j infects community i), its cautious floor B_min with the
  same sparsity, per-community recovery rates delta, and the naive recovery
  floor delta_min;
* opinion side: row-stochastic influence matrix W with positive self-weights,
  and coupling weights theta in (0,1) giving how strongly local prevalence
  pulls opinions.

Admissibility mirrors the standing assumptions of the model: rates inside
(0, 1], unit row-sum budget on infection rates, both interaction graphs
strongly connected. `validate` returns a report listing every violated
requirement with the offending node or entry; it never raises on bad rates,
only on malformed shapes.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .network import strongly_connected_matrix

# absolute tolerance for matrix/stochasticity equalities
MATRIX_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter bundle for one coupled instance."""

    B: np.ndarray
    B_min: np.ndarray
    delta: np.ndarray
    delta_min: float
    W: np.ndarray
    theta: np.ndarray
    Lbar: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        b = _frozen(self.B)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("B must be a square matrix")
        n = b.shape[0]
        bmin = _frozen(self.B_min)
        w = _frozen(self.W)
        delta = _frozen(self.delta).reshape(-1)
        theta = _frozen(self.theta).reshape(-1)
        if bmin.shape != (n, n) or w.shape != (n, n):
            raise ValueError("B, B_min and W must share one shape")
        if delta.shape != (n,) or theta.shape != (n,):
            raise ValueError("delta and theta must have one entry per node")
        delta.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "B_min", bmin)
        object.__setattr__(self, "W", w)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "delta_min", float(self.delta_min))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "Lbar", _frozen(np.eye(n) - w))

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def digest(self) -> str:
        """Content hash used to tie trajectories back to their parameters."""
        h = hashlib.sha256()
        for a in (self.B, self.B_min, self.delta, self.W, self.theta):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(repr(self.delta_min).encode())
        return h.hexdigest()


def effective_recovery(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Per-node recovery rates at opinion state z: delta_min+(delta-delta_min)z."""
    return params.delta_min + (params.delta - params.delta_min) * z

def effective_infection(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Infection matrix at opinion state z; row i interpolates B -> B_min as
    z_i goes 0 -> 1."""
    return params.B - z[:, None] * (params.B - params.B_min)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.valid:
            return "all requirements satisfied"
        return "\n".join(self.violations)


def validate(params: ModelParams) -> ValidationReport:
    """Check every admissibility requirement; collect one message per breach."""
    out: list[str] = []
    n = params.n
    B, B_min, W = params.B, params.B_min, params.W

    if not params.delta_min > 0:
        out.append("delta_min not positive")
    for i in range(n):
        if not (params.delta_min <= params.delta[i] <= 1.0):
            out.append(f"recovery rate outside [delta_min, 1], node {i}")
        if not (0.0 < params.theta[i] < 1.0):
            out.append(f"coupling weight outside (0, 1), node {i}")

    neg = np.argwhere(B < 0)
    for i, j in neg[:16]:
        out.append(f"negative infection rate, entry ({i},{j})")
    mism = np.argwhere((B > 0) != (B_min > 0))
    for i, j in mism[:16]:
        out.append(f"sparsity mismatch between B and B_min, entry ({i},{j})")
    edge_mask = B > 0
    low = np.argwhere(edge_mask & (B_min <= 0))
    for i, j in low[:16]:
        out.append(f"minimum infection rate not positive, edge ({i},{j})")
    over = np.argwhere(B_min > B + MATRIX_TOL)
    for i, j in over[:16]:
        out.append(f"minimum infection rate exceeds rate, edge ({i},{j})")
    rows = np.nonzero(B.sum(axis=1) > 1.0 + MATRIX_TOL)[0]
    for i in rows:
        out.append(f"infection rates exceed unit row sum, row {i}")

    if (W < 0).any() or ((W - np.diag(np.diag(W))) >= 1.0).any():
        bad = np.argwhere((W < 0) | ((W >= 1.0) & ~np.eye(n, dtype=bool)))
        for i, j in bad[:16]:
            out.append(f"social weight out of range, entry ({i},{j})")
    wsums = W.sum(axis=1)
    for i in np.nonzero(np.abs(wsums - 1.0) > MATRIX_TOL)[0]:
        out.append(f"row not stochastic, row {i}")
    for i in range(n):
        if not W[i, i] > 0:
            out.append(f"missing self-weight, node {i}")

    if not strongly_connected_matrix(B):
        out.append("physical graph not strongly connected")
    social = W - np.diag(np.diag(W))
    if not strongly_connected_matrix(social):
        out.append("social graph not strongly connected")

    return ValidationReport(tuple(out))


def require_valid(params: ModelParams) -> ModelParams:
    """Raise ValueError carrying the report when params are inadmissible."""
    report = validate(params)
    if not report.valid:
        raise ValueError(f"invalid model parameters:\n{report}")
    return params


@dataclass(frozen=True)
class ScaledRates:
    """Epidemic-side parameter fragments produced by scale_base_matrices."""

    B: np.ndarray
    B_min: np.ndarray
    delta: np.ndarray
    delta_min: float


def scale_base_matrices(
    B_bar: np.ndarray,
    delta_bar: np.ndarray,
    c_beta: float,
    c_beta_min: float,
    c_delta: float,
    c_delta_min: float,
) -> ScaledRates:
    """Scale nominal rate data into a scenario's epidemic parameters.

    B = c_beta*B_bar and B_min = c_beta_min*B_bar share B_bar's sparsity;
    delta = c_delta*delta_bar, and the scalar naive floor is
    delta_min = c_delta_min * min(delta_bar). Coefficients must satisfy
    0 < c_beta_min <= c_beta and 0 < c_delta_min <= c_delta, and the scaled
    rates are re-checked against the admissibility bounds.
    """
    if not 0 < c_beta_min <= c_beta:
        raise ValueError("need 0 < c_beta_min <= c_beta")
    if not 0 < c_delta_min <= c_delta:
        raise ValueError("need 0 < c_delta_min <= c_delta")
    B_bar = np.asarray(B_bar, dtype=float)
    delta_bar = np.asarray(delta_bar, dtype=float).reshape(-1)
    if (B_bar < 0).any():
        raise ValueError("B_bar has negative entries")
    if (delta_bar <= 0).any():
        raise ValueError("delta_bar must be positive")
    B = c_beta * B_bar
    rows = np.nonzero(B.sum(axis=1) > 1.0 + MATRIX_TOL)[0]
    if rows.size:
        raise ValueError(f"infection rates exceed unit row sum, row {rows[0]}")
    delta = c_delta * delta_bar
    if (delta > 1.0 + MATRIX_TOL).any():
        raise ValueError("scaled recovery rate exceeds 1")
    return ScaledRates(
        B=B,
        B_min=c_beta_min * B_bar,
        delta=delta,
        delta_min=float(c_delta_min * delta_bar.min()),
    )
