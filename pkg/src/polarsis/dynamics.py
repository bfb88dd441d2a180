"""Coupled opinion-epidemic state updates and trajectory simulation.

One time step advances both layers simultaneously from the state (x, z) at
time k:

* infection proportions follow a networked SIS rule whose recovery rate
  rises and whose infection rates fall as local caution z_i grows,
    x+ = x - (delta_min + (delta - delta_min) z) x
           + (1 - x) (B x - z ((B - B_min) x)),
* opinions follow a polar consensus rule anchored by local prevalence,
    z+ = theta x + (1 - theta)(z + (1 - z)(W z - z)).

Both updates read the time-k state only (Jacobi style). For admissible
parameters the box [0,1]^{2n} is forward invariant, so the simulator never
clamps: any excursion past a small drift tolerance is treated as a bug and
stops the run with stop_reason "diverged-guard".
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams

# tolerated floating-point excursion outside [0,1]; beyond this is divergence
BOX_DRIFT_TOL = 1e-9


def _box_vector(name: str, v, n: int, tol: float = BOX_DRIFT_TOL) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"{name} must have {n} entries")
    if v.min() < -tol or v.max() > 1.0 + tol:
        raise ValueError(f"{name} outside [0, 1]")
    return v


@dataclass(frozen=True)
class CoupledState:
    """State of the joint map at one time index."""

    k: int
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError("time index must be nonnegative")
        x = np.array(self.x, dtype=float).reshape(-1)
        z = np.array(self.z, dtype=float).reshape(-1)
        if x.shape != z.shape:
            raise ValueError("x and z must have matching lengths")
        for name, v in (("x", x), ("z", z)):
            if v.min() < -BOX_DRIFT_TOL or v.max() > 1.0 + BOX_DRIFT_TOL:
                raise ValueError(f"{name} outside [0, 1]")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)


def _make_state(k: int, x: np.ndarray, z: np.ndarray) -> CoupledState:
    # fast path for simulate: arrays are freshly allocated and already guarded
    s = object.__new__(CoupledState)
    x.setflags(write=False)
    z.setflags(write=False)
    object.__setattr__(s, "k", k)
    object.__setattr__(s, "x", x)
    object.__setattr__(s, "z", z)
    return s


@dataclass(frozen=True)
class Trajectory:
    """Recorded run of the coupled map.

    states holds the initial state, every record_every-th state and always
    the final one; params_digest ties the run to the parameters that
    produced it.
    """

    states: tuple[CoupledState, ...]
    params_digest: str
    stop_reason: str

    @property
    def final(self) -> CoupledState:
        return self.states[-1]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stack the recorded states as (time indices, X, Z) arrays."""
        ks = np.array([s.k for s in self.states], dtype=int)
        return ks, np.array([s.x for s in self.states]), np.array([s.z for s in self.states])


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 10_000
    conv_tol: float = 1e-10
    record_every: int = 1

    def __post_init__(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be an integer >= 1")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be an integer >= 1")


def _next_arrays(x, z, B, Bdiff, dmin, ddiff, W, theta, omt):
    bx = B @ x
    bdx = Bdiff @ x
    x_next = x - (dmin + ddiff * z) * x + (1.0 - x) * (bx - z * bdx)
    wz = W @ z
    z_next = theta * x + omt * (z + (1.0 - z) * (wz - z))
    return x_next, z_next


def opinion_step(x, z, params: ModelParams) -> np.ndarray:
    """One opinion update: prevalence anchor plus polar consensus pull."""
    x = _box_vector("x", x, params.n)
    z = _box_vector("z", z, params.n)
    wz = params.W @ z
    return params.theta * x + (1.0 - params.theta) * (z + (1.0 - z) * (wz - z))


def opinion_step_transformed(x, z, params: ModelParams) -> np.ndarray:
    """Algebraically rearranged opinion update, kept as a cross-check."""
    x = _box_vector("x", x, params.n)
    z = _box_vector("z", z, params.n)
    wz = params.W @ z
    return z + params.theta * (x - z) + (1.0 - params.theta) * (1.0 - z) * (wz - z)


def epidemic_step(x, z, params: ModelParams) -> np.ndarray:
    """One SIS update with opinion-modulated infection and recovery rates."""
    x = _box_vector("x", x, params.n)
    z = _box_vector("z", z, params.n)
    x_next, _ = _next_arrays(
        x, z, params.B, params.B - params.B_min,
        params.delta_min, params.delta - params.delta_min,
        params.W, params.theta, 1.0 - params.theta,
    )
    return x_next


def coupled_step(state: CoupledState, params: ModelParams) -> CoupledState:
    """Advance the joint state one step; both layers read time k only."""
    if state.x.shape != (params.n,):
        raise ValueError(f"state has {state.x.shape[0]} nodes, params {params.n}")
    x_next, z_next = _next_arrays(
        state.x, state.z, params.B, params.B - params.B_min,
        params.delta_min, params.delta - params.delta_min,
        params.W, params.theta, 1.0 - params.theta,
    )
    return CoupledState(k=state.k + 1, x=x_next, z=z_next)


def simulate(params: ModelParams, x0, z0, cfg: SimConfig | None = None) -> Trajectory:
    """Iterate the coupled map from (x0, z0).

    Stops at cfg.horizon steps, or as soon as one step moves the joint state
    by less than cfg.conv_tol in the infinity norm, or when numerical drift
    pushes the state more than BOX_DRIFT_TOL outside the box (a model or
    parameter bug; the offending state is not recorded).
    """
    if cfg is None:
        cfg = SimConfig()
    x = _box_vector("x0", x0, params.n, tol=0.0)
    z = _box_vector("z0", z0, params.n, tol=0.0)

    B = params.B
    Bdiff = B - params.B_min
    W = params.W
    theta = params.theta
    omt = 1.0 - theta
    dmin = params.delta_min
    ddiff = params.delta - dmin

    states = [_make_state(0, x, z)]
    last_recorded = 0
    k_cur = 0
    stop = "horizon"
    for k in range(1, cfg.horizon + 1):
        x_next, z_next = _next_arrays(x, z, B, Bdiff, dmin, ddiff, W, theta, omt)
        if (x_next.min() < -BOX_DRIFT_TOL or x_next.max() > 1.0 + BOX_DRIFT_TOL
                or z_next.min() < -BOX_DRIFT_TOL or z_next.max() > 1.0 + BOX_DRIFT_TOL):
            stop = "diverged-guard"
            break
        diff = max(np.max(np.abs(x_next - x)), np.max(np.abs(z_next - z)))
        x, z = x_next, z_next
        k_cur = k
        if k % cfg.record_every == 0:
            states.append(_make_state(k, x, z))
            last_recorded = k
        if diff < cfg.conv_tol:
            stop = "converged"
            break

    if last_recorded != k_cur:
        states.append(_make_state(k_cur, x, z))
    return Trajectory(states=tuple(states), params_digest=params.digest(), stop_reason=stop)
