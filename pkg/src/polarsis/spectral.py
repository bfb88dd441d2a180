"""Spectral machinery: reproduction numbers, Jacobians, healthy-state verdicts.

The reproduction number at caution level z is the spectral radius of the
linearized infection map I - D(z) + B(z), where D(z) holds the effective
recovery rates and B(z) the effective infection rates. Its extremes over the
opinion box are reached at z = 1 (r_min) and z = 0 (r_max) and classify an
instance as mild (r_max <= 1), severe (r_min > 1) or moderate (in between).

Radii come from power iteration on nonnegative matrices, certified by
two-sided Collatz-Wielandt bounds min_i (Mv)_i/v_i <= rho <= max_i (Mv)_i/v_i
rather than by any eigensolver. Inputs whose iteration cannot close those
bounds (reducible or periodic patterns) raise SpectralConvergenceError; a
dense eigensolver is provided for small cross-checks only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams, effective_infection, effective_recovery

# Collatz-Wielandt gap accepted as a certified radius
CW_GAP_TOL = 1e-9
# infinity-norm stagnation threshold for the iterated vector
VECTOR_TOL = 1e-12


class SpectralConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralResult:
    radius: float
    right_vector: np.ndarray
    iterations: int
    residual: float


def spectral_radius(M, v0=None, max_iter: int = 100_000) -> SpectralResult:
    """Certified spectral radius of a nonnegative matrix.

    Runs power iteration from a strictly positive vector (v0 when given),
    nudged by a tiny multiple of the identity so the iterate stays positive,
    and stops once the vector stagnates below VECTOR_TOL and the
    Collatz-Wielandt bounds agree within CW_GAP_TOL. The reported radius is
    the midpoint of the final bounds; the certificate never uses the nudge.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if (M < 0).any():
        raise ValueError("matrix has negative entries")
    n = M.shape[0]

    if M.max() == 0.0:
        return SpectralResult(radius=0.0, right_vector=np.ones(n), iterations=0, residual=0.0)

    eps = 1e-12 * np.abs(M).sum(axis=1).max()
    if v0 is None:
        v = np.ones(n)
    else:
        v = np.asarray(v0, dtype=float).copy()
        if v.shape != (n,) or (v <= 0).any():
            raise ValueError("v0 must be a strictly positive vector of matching length")
        v /= v.max()

    for it in range(1, max_iter + 1):
        w = M @ v
        ratios = w / v
        rmin = ratios.min()
        rmax = ratios.max()
        v_next = w + eps * v
        v_next /= v_next.max()
        vec_resid = np.abs(v_next - v).max()
        gap = rmax - rmin
        if vec_resid < VECTOR_TOL and gap < CW_GAP_TOL:
            radius = 0.5 * (rmin + rmax)
            residual = np.abs(w - radius * v).max()
            return SpectralResult(radius=radius, right_vector=v_next, iterations=it,
                                  residual=residual)
        v = v_next

    raise SpectralConvergenceError(
        "power iteration did not certify the radius within "
        f"{max_iter} iterations; the matrix is likely reducible or periodic, "
        "use dense_spectral_radius on a small copy to diagnose"
    )


def dense_spectral_radius(M) -> float:
    """Eigensolver oracle for cross-checks; refuses matrices larger than 8x8."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] > 8:
        raise ValueError("dense oracle is limited to n <= 8")
    return float(np.abs(np.linalg.eigvals(M)).max())


def _linearized_infection_map(z: np.ndarray, params: ModelParams) -> np.ndarray:
    M = effective_infection(params, z).copy()
    M[np.diag_indices_from(M)] += 1.0 - effective_recovery(params, z)
    return M


def reproduction_number(z, params: ModelParams) -> float:
    """Spectral radius of the infection linearization at caution level z."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (params.n,):
        raise ValueError(f"z must have {params.n} entries")
    if z.min() < 0.0 or z.max() > 1.0:
        raise ValueError("z outside [0, 1]")
    return spectral_radius(_linearized_infection_map(z, params)).radius


@dataclass(frozen=True)
class ReproductionExtremes:
    r_min: float
    r_max: float
    severity: str  # mild | moderate | severe


def reproduction_extremes(params: ModelParams) -> ReproductionExtremes:
    """Reproduction-number range over the opinion box, with severity class."""
    r_min = reproduction_number(np.ones(params.n), params)
    r_max = reproduction_number(np.zeros(params.n), params)
    if r_max <= 1.0:
        severity = "mild"
    elif r_min > 1.0:
        severity = "severe"
    else:
        severity = "moderate"
    return ReproductionExtremes(r_min=r_min, r_max=r_max, severity=severity)


def jacobian(x, z, params: ModelParams) -> np.ndarray:
    """Jacobian of the coupled map at (x, z), as one 2n x 2n array.

    Block layout: rows/columns 0..n-1 are the infection coordinates,
    n..2n-1 the opinion coordinates.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    n = params.n
    if x.shape != (n,) or z.shape != (n,):
        raise ValueError(f"x and z must have {n} entries")
    for name, v in (("x", x), ("z", z)):
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError(f"{name} outside [0, 1]")

    Bz = effective_infection(params, z)
    j11 = (1.0 - x)[:, None] * Bz
    j11[np.diag_indices(n)] += 1.0 - effective_recovery(params, z) - Bz @ x
    j12 = -np.diag((1.0 - x) * ((params.B - params.B_min) @ x)
                   + (params.delta - params.delta_min) * x)
    j21 = np.diag(params.theta)
    lbar = params.Lbar
    j22 = (1.0 - params.theta)[:, None] * (params.W + np.diag(lbar @ z) + z[:, None] * lbar)
    return np.block([[j11, j12], [j21, j22]])


@dataclass(frozen=True)
class HealthyVerdict:
    verdict: str  # GloballyStable | Unstable
    r_max: float
    origin_jacobian_radius: float


def healthy_verdict(params: ModelParams) -> HealthyVerdict:
    """Classify the infection-free state: globally stable iff r_max <= 1.

    The origin Jacobian is block triangular, so its radius is the larger of
    the infection-block radius (= r_max) and the opinion-block radius; both
    are reported as evidence.
    """
    r_max = reproduction_number(np.zeros(params.n), params)
    opinion_block = (1.0 - params.theta)[:, None] * params.W
    origin_radius = max(r_max, spectral_radius(opinion_block).radius)
    verdict = "GloballyStable" if r_max <= 1.0 else "Unstable"
    return HealthyVerdict(verdict=verdict, r_max=r_max, origin_jacobian_radius=origin_radius)
