"""Equilibrium location, certification and Lyapunov monitoring.

The coupled map always fixes the healthy-consensus point (x, z) = (0, 0);
severe instances additionally admit interior endemic equilibria. The solver
here is damped Picard iteration on the map itself, which certifies whatever
fixed point it reaches by one-step residuals and reports the stability
conditions:

* cond_17: B x* <= x* entrywise (base infection rates),
* cond_18: -2 w_ii - theta_i/(1-theta_i) < [(I-W) z*]_i < theta_i/(1-theta_i)
  strictly with a 1e-12 margin.

Both together certify global attraction of the endemic point. The Lyapunov
monitor replays a recorded trajectory and checks the weighted-distance
candidate V(k) = v(k)' |x(k) - x*|, with v(k) the left Perron vector of
diag(1 - (B(z(k)) x*)/x*) + B(z(k)), for per-step non-increase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory, epidemic_step, opinion_step
from .params import ModelParams, effective_infection, effective_recovery
from .spectral import spectral_radius

RESIDUAL_TOL = 1e-10
HEALTHY_NORM_TOL = 1e-8
CONSENSUS_TOL = 1e-9
COND_18_MARGIN = 1e-12
MONOTONE_SLACK = 1e-12


class EndemicSolveError(RuntimeError):
    """Picard iteration exhausted its budget without reaching a fixed point."""

    def __init__(self, message: str, iterations: int, last_diff: float):
        super().__init__(message)
        self.iterations = iterations
        self.last_diff = last_diff


@dataclass(frozen=True)
class EquilibriumRecord:
    x_star: np.ndarray
    z_star: np.ndarray
    kind: str  # healthy | endemic
    consensus: bool
    residual_x: float
    residual_z: float
    cond_17: bool
    cond_18: bool
    solver_iterations: int

    def __post_init__(self) -> None:
        x = np.array(self.x_star, dtype=float).reshape(-1)
        z = np.array(self.z_star, dtype=float).reshape(-1)
        if x.shape != z.shape:
            raise ValueError("x_star and z_star must have matching lengths")
        if self.kind not in ("healthy", "endemic"):
            raise ValueError("kind must be healthy or endemic")
        if self.kind == "endemic" and not ((x > 0).all() and (x < 1).all()
                                           and (z > 0).all() and (z < 1).all()):
            raise ValueError("endemic equilibria are strictly interior")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x_star", x)
        object.__setattr__(self, "z_star", z)


def residuals(x, z, params: ModelParams) -> tuple[float, float]:
    """Infinity-norm one-step gaps of the two update rules at (x, z)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    rx = float(np.abs(epidemic_step(x, z, params) - x).max())
    rz = float(np.abs(opinion_step(x, z, params) - z).max())
    return rx, rz


def _condition_flags(x, z, params: ModelParams) -> tuple[bool, bool]:
    cond_17 = bool((params.B @ x <= x).all())
    lz = params.Lbar @ z
    ratio = params.theta / (1.0 - params.theta)
    lower = -2.0 * np.diag(params.W) - ratio
    cond_18 = bool(((lz > lower + COND_18_MARGIN) & (lz < ratio - COND_18_MARGIN)).all())
    return cond_17, cond_18


def _build_record(x, z, params: ModelParams, iterations: int) -> EquilibriumRecord:
    rx, rz = residuals(x, z, params)
    if max(rx, rz) > RESIDUAL_TOL:
        raise EndemicSolveError(
            f"converged point fails the residual check ({max(rx, rz):.3e})",
            iterations, max(rx, rz),
        )
    kind = "healthy" if np.abs(x).max() < HEALTHY_NORM_TOL else "endemic"
    cond_17, cond_18 = _condition_flags(x, z, params)
    return EquilibriumRecord(
        x_star=x, z_star=z, kind=kind,
        consensus=bool(z.max() - z.min() <= CONSENSUS_TOL),
        residual_x=rx, residual_z=rz,
        cond_17=cond_17, cond_18=cond_18,
        solver_iterations=iterations,
    )


def solve_endemic(
    params: ModelParams,
    x0=None,
    z0=None,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> EquilibriumRecord:
    """Run damped Picard iteration on the coupled map to a fixed point.

    Starts from the interior point x = z = 0.5 unless told otherwise; the
    start must be strictly inside (0,1)^{2n} so the always-present healthy
    point does not trap the search at the boundary. Damping drops to 0.5
    when step differences alternate direction for ten consecutive
    iterations. Convergence to a near-zero x is reported as kind="healthy";
    anything else as an interior endemic record. Non-convergence raises
    EndemicSolveError (in the moderate regime the iteration may genuinely
    oscillate; that outcome is a finding, not a bug).
    """
    n = params.n
    x = np.full(n, 0.5) if x0 is None else np.asarray(x0, dtype=float).reshape(-1).copy()
    z = np.full(n, 0.5) if z0 is None else np.asarray(z0, dtype=float).reshape(-1).copy()
    if x.shape != (n,) or z.shape != (n,):
        raise ValueError(f"init vectors must have {n} entries")
    if x.min() <= 0.0 or x.max() >= 1.0 or z.min() <= 0.0 or z.max() >= 1.0:
        raise ValueError("init must lie strictly inside (0, 1)")
    if not tol > 0:
        raise ValueError("tol must be positive")

    lam = 1.0
    neg_run = 0
    prev_step = None
    diff = np.inf
    for it in range(1, max_iter + 1):
        x_map = epidemic_step(x, z, params)
        z_map = opinion_step(x, z, params)
        x_new = lam * x_map + (1.0 - lam) * x
        z_new = lam * z_map + (1.0 - lam) * z
        step = np.concatenate([x_new - x, z_new - z])
        diff = np.abs(step).max()
        if prev_step is not None and float(step @ prev_step) < 0.0:
            neg_run += 1
        else:
            neg_run = 0
        if neg_run >= 10 and lam > 0.5:
            lam = 0.5
            neg_run = 0
        x, z = x_new, z_new
        prev_step = step
        if diff < tol:
            return _build_record(x, z, params, it)

    raise EndemicSolveError(
        f"no fixed point within {max_iter} iterations "
        f"(joint step difference {diff:.3e}); the iteration may be "
        "oscillating near a limit cycle",
        max_iter, float(diff),
    )


def consensus_condition(params: ModelParams, a: float) -> np.ndarray:
    """Per-node defect of a uniform endemic guess x* = z* = a.

    A consensus endemic equilibrium at level a requires every defect to be
    zero: recovery outflow must balance infection inflow at that level.
    """
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    za = np.full(params.n, float(a))
    inflow = effective_infection(params, za).sum(axis=1)
    return effective_recovery(params, za) - (1.0 - a) * inflow


def endemic_stability_check(record: EquilibriumRecord, params: ModelParams) -> str:
    """Certify global attraction of an endemic record, or return Unknown.

    Re-evaluates both stability conditions from the record's state; they are
    sufficient, so a failed check means "not certified", never "unstable".
    """
    if record.kind != "endemic":
        raise ValueError("stability check applies to endemic records only")
    cond_17, cond_18 = _condition_flags(record.x_star, record.z_star, params)
    return "CertifiedStable" if cond_17 and cond_18 else "Unknown"


@dataclass(frozen=True)
class LyapunovReport:
    monotone_fraction: float
    steps_checked: int
    violations: int
    final_value: float


def lyapunov_certificate(
    trajectory: Trajectory,
    record: EquilibriumRecord,
    params: ModelParams,
) -> LyapunovReport:
    """Replay a trajectory and check the endemic Lyapunov candidate per step.

    For each recorded state the weight vector v is the left Perron vector of
    diag(1 - (B(z) x*)/x*) + B(z) at that state's caution level (warm
    started from the previous step), V = v' |x - x*| is compared against the
    value after one exact map application, and the report counts the steps
    where V does not increase beyond the allowed slack.

    The slack is MONOTONE_SLACK plus v' |F_z(x*) - x*|, where F_z is the
    epidemic update frozen at the state's caution level. By the triangle
    inequality one step can raise V by at most that displacement term, so a
    stored equilibrium known only to solver precision never produces spurious
    violations once the trajectory has converged below that precision.
    """
    if record.kind != "endemic":
        raise ValueError("certificate requires an endemic record")
    if not record.cond_17:
        raise ValueError("certificate requires cond_17 (the weights need a "
                         "nonnegative comparison matrix)")
    if trajectory.params_digest != params.digest():
        raise ValueError("trajectory was produced under different parameters")
    rx, rz = residuals(record.x_star, record.z_star, params)
    if max(rx, rz) > RESIDUAL_TOL:
        raise ValueError("record is not an equilibrium of these parameters")
    if np.abs(trajectory.states[0].x).max() == 0.0:
        raise ValueError("trajectory must start with disease present")

    x_star = record.x_star
    violations = 0
    v = None
    value = np.nan
    for state in trajectory.states:
        bz = effective_infection(params, state.z)
        comparison = bz.copy()
        comparison[np.diag_indices_from(comparison)] += 1.0 - (bz @ x_star) / x_star
        res = spectral_radius(comparison.T, v0=v)
        v = res.right_vector
        value = float(v @ np.abs(state.x - x_star))
        x_next = epidemic_step(state.x, state.z, params)
        value_next = float(v @ np.abs(x_next - x_star))
        # one step moves x* itself by the frozen-caution residual; V may
        # legitimately gain up to its v-weighted size
        drift = float(v @ np.abs(epidemic_step(x_star, state.z, params) - x_star))
        if value_next > value + MONOTONE_SLACK + drift:
            violations += 1
    steps = len(trajectory.states)
    return LyapunovReport(
        monotone_fraction=(steps - violations) / steps,
        steps_checked=steps,
        violations=violations,
        final_value=value,
    )
