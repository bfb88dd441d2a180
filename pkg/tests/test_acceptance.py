"""End-to-end acceptance gate.

Ten criteria covering well-posedness, threshold behavior, certified
endemic attraction, closed-form oracles, monotonicity, spectral and
Jacobian cross-checks, response planning on the bundled fixtures, and
CLI determinism. Every test prints exactly one PASS/FAIL line with the
measured margin, so the suite output doubles as an acceptance report.
All randomness is seeded and every random instance is checked against
the admissibility rules before use.
"""
import time
from pathlib import Path

import numpy as np

from conftest import random_params
from polarsis.cli import main
from polarsis.dynamics import SimConfig, simulate
from polarsis.equilibria import lyapunov_certificate, solve_endemic
from polarsis.intervention import critical_uniform_opinion
from polarsis.params import ModelParams, validate
from polarsis.spectral import (
    jacobian,
    reproduction_extremes,
    reproduction_number,
    spectral_radius,
)

FIXTURES = Path(__file__).parent / "fixtures"
A_STAR = (1.1 - np.sqrt(0.97)) / 0.6


def _verdict(capsys, num, label, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {num:02d} {label}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num:02d} {label}: {detail}"


def _rescaled(p, s):
    """Same instance with both infection matrices scaled by s."""
    return ModelParams(B=s * p.B, B_min=s * p.B_min, delta=p.delta,
                       delta_min=p.delta_min, W=p.W, theta=p.theta)


def _run_raw(p, x, z, steps, on_step):
    """Iterate the coupled map with local arrays; on_step may stop the run.

    The update is written out here rather than taken from the package so
    the box checks below judge independent arithmetic.
    """
    B, Bd, W = p.B, p.B - p.B_min, p.W
    th, omt = p.theta, 1.0 - p.theta
    dmin, dd = p.delta_min, p.delta - p.delta_min
    for k in range(1, steps + 1):
        bx = B @ x
        x_new = x - (dmin + dd * z) * x + (1.0 - x) * (bx - z * (Bd @ x))
        z = th * x + omt * (z + (1.0 - z) * (W @ z - z))
        x = x_new
        if on_step(k, x, z):
            break
    return x, z


def test_box_invariance_and_eventual_positivity(capsys):
    """Criterion 01: the box [0,1]^2n is forward invariant in exact float64
    terms, and infection spreads to every node within n-1 steps.

    200 random admissible instances, n from 2 to 46, random box starts,
    10^4 steps each: zero componentwise box violations allowed, and from
    any nonzero start x must be strictly positive on all nodes by step
    n-1 (the interaction graph is strongly connected, so support grows by
    at least one hop per step). Positivity is only required to be reached
    by that deadline: in float64 a geometrically dying epidemic underflows
    to exact zero eventually, which is a representation limit rather than
    a dynamics violation.
    """
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    box_violations = 0
    late_positivity = 0
    for _ in range(200):
        n = int(rng.integers(2, 47))
        p = random_params(rng, n)
        assert validate(p).valid
        x0 = rng.random(n)
        z0 = rng.random(n)
        assert x0.max() > 0.0
        state = {"pos_k": 0 if (x0 > 0).all() else None, "bad": False}

        def watch(k, x, z, state=state):
            if (x.min() < 0.0 or x.max() > 1.0
                    or z.min() < 0.0 or z.max() > 1.0):
                state["bad"] = True
                return True
            if state["pos_k"] is None and (x > 0.0).all():
                state["pos_k"] = k
            return False

        _run_raw(p, x0, z0, 10_000, watch)
        if state["bad"]:
            box_violations += 1
        if state["pos_k"] is None or state["pos_k"] > n - 1:
            late_positivity += 1
    elapsed = time.perf_counter() - t0
    ok = box_violations == 0 and late_positivity == 0 and elapsed < 60.0
    _verdict(capsys, 1, "box-invariance", ok,
             f"{box_violations} box violations, {late_positivity} late "
             f"positivity cases over 200 instances, {elapsed:.1f}s")


def test_subcritical_instances_reach_eradication(capsys):
    """Criterion 02: with the complacent reproduction number at most 1 the
    disease-free state is reached from anywhere.

    50 random instances are scaled down (both infection matrices by 0.9
    per step) until r_max <= 1, then run from a random box start; every
    run must bring both max infection and max opinion below 1e-6 within
    10^5 steps.
    """
    rng = np.random.default_rng(202)
    worst = 0
    failures = 0
    for _ in range(50):
        n = int(rng.integers(2, 31))
        p = random_params(rng, n)
        while reproduction_extremes(p).r_max > 1.0:
            p = _rescaled(p, 0.9)
        assert validate(p).valid
        x0 = rng.random(n)
        z0 = rng.random(n)
        state = {"done": None}

        def watch(k, x, z, state=state):
            if x.max() < 1e-6 and z.max() < 1e-6:
                state["done"] = k
                return True
            return False

        _run_raw(p, x0, z0, 100_000, watch)
        if state["done"] is None:
            failures += 1
        else:
            worst = max(worst, state["done"])
    ok = failures == 0
    _verdict(capsys, 2, "eradication", ok,
             f"{failures} of 50 instances missed the 1e-6 norms; "
             f"slowest needed {worst} steps")


def test_supercritical_seed_grows(capsys):
    """Criterion 03: with the complacent reproduction number above 1 a tiny
    seed infection grows rather than dies.

    20 random instances are pushed into the unstable regime: infection
    rates are rescaled to row sums near 0.98, then the naive recovery
    floor is halved until r_max clears 1.05 (strictly above 1, with
    enough margin that tenfold growth fits the step budget). A 1e-6 seed
    at one random node, with everyone complacent, must grow by 10x in
    max norm within 10^3 steps.
    """
    rng = np.random.default_rng(303)
    worst = 0
    failures = 0
    for _ in range(20):
        n = int(rng.integers(2, 11))
        p = random_params(rng, n, beta_row_max=(0.8, 0.95))
        p = _rescaled(p, 0.98 / p.B.sum(axis=1).max())
        halvings = 0
        while reproduction_extremes(p).r_max < 1.05:
            p = ModelParams(B=p.B, B_min=p.B_min, delta=p.delta,
                            delta_min=p.delta_min / 2.0, W=p.W, theta=p.theta)
            halvings += 1
            assert halvings < 60, "construction failed to reach r_max >= 1.05"
        assert validate(p).valid
        x0 = np.zeros(n)
        x0[int(rng.integers(n))] = 1e-6
        z0 = np.zeros(n)
        state = {"grown": None}

        def watch(k, x, z, state=state):
            if x.max() >= 1e-5:
                state["grown"] = k
                return True
            return False

        _run_raw(p, x0, z0, 1_000, watch)
        if state["grown"] is None:
            failures += 1
        else:
            worst = max(worst, state["grown"])
    ok = failures == 0
    _verdict(capsys, 3, "outbreak-growth", ok,
             f"{failures} of 20 seeds failed to grow 10x; "
             f"slowest took {worst} steps")


def test_certified_endemic_attraction(capsys):
    """Criterion 04: certified endemic equilibria attract trajectories and
    the per-step Lyapunov replay never increases.

    The two sufficient stability conditions are demanding, so the 20
    severe instances come from the opinion-invariant family (B_min = B,
    delta = delta_min): rates do not react to caution there, every row of
    the jittered dense infection matrix sums to the same c, and the
    reproduction number is exactly 1 - delta + c > 1 by construction.
    Social layer, coupling weights and jitter vary freely. For each
    instance the solved equilibrium must pass both certificate
    conditions; three random disease-carrying starts must land on
    (x*, z*) within 1e-6; and the Lyapunov replay of each trajectory
    must be monotone at every recorded step.
    """
    rng = np.random.default_rng(404)
    worst_gap = 0.0
    min_fraction = 1.0
    for _ in range(20):
        n = int(rng.integers(3, 9))
        c = rng.uniform(0.5, 0.95)
        jit = rng.uniform(0.5, 1.5, (n, n))
        np.fill_diagonal(jit, 0.0)
        B = c * jit / jit.sum(axis=1, keepdims=True)
        delta = float(rng.uniform(0.15, 0.8) * c)
        w = rng.uniform(0.2, 1.0, (n, n))
        w /= w.sum(axis=1, keepdims=True)
        p = ModelParams(B=B, B_min=B.copy(), delta=np.full(n, delta),
                        delta_min=delta, W=w, theta=rng.uniform(0.1, 0.9, n))
        assert validate(p).valid
        assert reproduction_extremes(p).severity == "severe"

        rec = solve_endemic(p)
        assert rec.kind == "endemic"
        assert rec.cond_17 and rec.cond_18

        for _start in range(3):
            x0 = rng.uniform(0.05, 0.95, n)
            z0 = rng.uniform(0.05, 0.95, n)
            traj = simulate(p, x0, z0,
                            SimConfig(horizon=20_000, conv_tol=1e-12,
                                      record_every=25))
            final = traj.final
            gap = max(np.abs(final.x - rec.x_star).max(),
                      np.abs(final.z - rec.z_star).max())
            worst_gap = max(worst_gap, gap)
            report = lyapunov_certificate(traj, rec, p)
            min_fraction = min(min_fraction, report.monotone_fraction)
    ok = worst_gap <= 1e-6 and min_fraction == 1.0
    _verdict(capsys, 4, "endemic-attraction", ok,
             f"worst trajectory gap {worst_gap:.2e}, "
             f"min monotone fraction {min_fraction}")


def test_two_node_closed_forms(capsys):
    """Criterion 05: closed-form oracle on the symmetric two-node family.

    Two nodes with cross infection 0.4 (floor 0.1), recovery 0.6 (floor
    0.2), equal-weight averaging and coupling 0.2. At uniform caution a
    the effective recovery is 0.2 + 0.4a and the cross rate 0.4 - 0.3a,
    so the linearized infection map is [[1-d(a), b(a)], [b(a), 1-d(a)]]
    with spectral radius 1 - d(a) + b(a) = 1.2 - 0.7a. A uniform interior
    fixed point x = z = a balances recovery against infection pressure,
    d(a) = (1-a) b(a), i.e. 0.3a^2 - 1.1a + 0.2 = 0, whose interior root
    is (1.1 - sqrt(0.97)) / 0.6. The critical caution level solves
    1.2 - 0.7a = 1, giving exactly 2/7.
    """
    p = ModelParams(
        B=np.array([[0.0, 0.4], [0.4, 0.0]]),
        B_min=np.array([[0.0, 0.1], [0.1, 0.0]]),
        delta=np.array([0.6, 0.6]),
        delta_min=0.2,
        W=np.full((2, 2), 0.5),
        theta=np.array([0.2, 0.2]),
    )
    radius_err = max(
        abs(reproduction_number(np.full(2, a), p) - (1.2 - 0.7 * a))
        for a in (0.0, 0.25, 0.5, 0.75, 1.0)
    )
    rec = solve_endemic(p)
    endemic_err = max(np.abs(rec.x_star - A_STAR).max(),
                      np.abs(rec.z_star - A_STAR).max())
    critical_err = abs(critical_uniform_opinion(p) - 2.0 / 7.0)
    ok = radius_err <= 1e-9 and endemic_err <= 1e-8 and critical_err <= 1e-8
    _verdict(capsys, 5, "closed-forms", ok,
             f"radius err {radius_err:.1e}, endemic err {endemic_err:.1e}, "
             f"critical err {critical_err:.1e}")


def test_reproduction_number_monotone_in_caution(capsys):
    """Criterion 06: the reproduction number never increases when any
    community becomes more cautious.

    10^4 ordered pairs z1 <= z2 (componentwise) across 20 random
    instances; R(z1) >= R(z2) - 1e-10 must hold for every pair.
    """
    rng = np.random.default_rng(606)
    violations = 0
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        p = random_params(rng, n)
        assert validate(p).valid
        for _pair in range(500):
            z1 = rng.random(n)
            z2 = z1 + rng.random(n) * (1.0 - z1)
            gap = reproduction_number(z1, p) - reproduction_number(z2, p)
            worst = min(worst, gap)
            if gap < -1e-10:
                violations += 1
    ok = violations == 0
    _verdict(capsys, 6, "monotonicity", ok,
             f"{violations} violations in 10000 pairs, "
             f"worst signed gap {worst:.2e}")


def test_power_iteration_matches_eigenvalue_oracle(capsys):
    """Criterion 07: the certified power iteration agrees with a dense
    eigenvalue solve on 500 random positive matrices of order up to 5.
    """
    rng = np.random.default_rng(707)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 6))
        M = rng.random((n, n)) * rng.uniform(0.1, 3.0)
        got = spectral_radius(M).radius
        want = float(np.abs(np.linalg.eigvals(M)).max())
        worst = max(worst, abs(got - want))
    ok = worst <= 1e-9
    _verdict(capsys, 7, "spectral-oracle", ok,
             f"max |power - eigensolver| = {worst:.2e} over 500 matrices")


def test_jacobian_matches_finite_differences(capsys):
    """Criterion 08: the analytic Jacobian of the coupled map matches
    central finite differences at 100 random interior points (10 random
    instances, 10 points each, step 1e-6).
    """
    from polarsis.dynamics import epidemic_step, opinion_step

    rng = np.random.default_rng(808)
    h = 1e-6
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(2, 9))
        p = random_params(rng, n)
        assert validate(p).valid

        def joint(v, p=p, n=n):
            return np.concatenate([epidemic_step(v[:n], v[n:], p),
                                   opinion_step(v[:n], v[n:], p)])

        for _point in range(10):
            v = rng.uniform(0.05, 0.95, 2 * n)
            J = jacobian(v[:n], v[n:], p)
            fd = np.empty((2 * n, 2 * n))
            for j in range(2 * n):
                e = np.zeros(2 * n)
                e[j] = h
                fd[:, j] = (joint(v + e) - joint(v - e)) / (2.0 * h)
            worst = max(worst, np.abs(J - fd).max())
    ok = worst <= 1e-6
    _verdict(capsys, 8, "jacobian", ok,
             f"max |analytic - central difference| = {worst:.2e} "
             f"over 100 points")


def test_response_plans_on_bundled_fixtures(capfd):
    """Criterion 09: the three bundled 46-node fixtures produce the three
    response branches through the command line, each with exit code 0 and
    the branch-specific evidence (post-intervention reproduction number
    below 1 for the opinion branch, an endemic record for the severe
    branch), all within a 30 second budget.
    """
    t0 = time.perf_counter()
    outputs = {}
    codes = {}
    for name in ("mild", "moderate", "severe"):
        codes[name] = main(["respond", str(FIXTURES / f"{name}.json"),
                            "--budget", "2.5"])
        outputs[name] = capfd.readouterr().out
    elapsed = time.perf_counter() - t0

    ok_codes = all(code == 0 for code in codes.values())
    ok_mild = "branch: mild-null" in outputs["mild"]
    ok_moderate = "branch: moderate-opinion" in outputs["moderate"]
    r_floor = None
    for line in outputs["moderate"].splitlines():
        if line.startswith("r_at_floor:"):
            r_floor = float(line.split(":")[1])
    ok_moderate = ok_moderate and r_floor is not None and r_floor < 1.0
    ok_severe = ("branch: severe-administrative" in outputs["severe"]
                 and "class: endemic" in outputs["severe"])
    ok = ok_codes and ok_mild and ok_moderate and ok_severe and elapsed < 30.0
    _verdict(capfd, 9, "response-plans", ok,
             f"exit codes {sorted(codes.values())}, branches "
             f"{'ok' if ok_mild and ok_moderate and ok_severe else 'WRONG'}, "
             f"r_at_floor {r_floor}, {elapsed:.1f}s")


def test_seeded_cli_runs_are_byte_identical(capfd, tmp_path):
    """Criterion 10: repeating a seeded command-line run reproduces the
    trajectory CSV byte for byte. Checked for a bundled fixture whose
    social layer comes from a seeded generator, and for a scenario file
    freshly emitted by the seeded network generator.
    """
    pairs = []
    fixture = str(FIXTURES / "moderate.json")
    for run in ("a", "b"):
        out = tmp_path / f"fixture-{run}.csv"
        assert main(["simulate", fixture, "--horizon", "400",
                     "--out", str(out)]) == 0
        pairs.append(out.read_bytes())
    capfd.readouterr()

    scen = tmp_path / "generated.json"
    assert main(["generate", "ws", "--n", "24", "--k", "4", "--p", "0.2",
                 "--seed", "9", "--out", str(scen)]) == 0
    for run in ("a", "b"):
        out = tmp_path / f"generated-{run}.csv"
        assert main(["simulate", str(scen), "--horizon", "400",
                     "--out", str(out)]) == 0
        pairs.append(out.read_bytes())
    capfd.readouterr()

    ok = pairs[0] == pairs[1] and pairs[2] == pairs[3] and len(pairs[0]) > 0
    _verdict(capfd, 10, "determinism", ok,
             f"two seeded pairs, {len(pairs[0])} and {len(pairs[2])} "
             f"byte CSVs, identical={ok}")
