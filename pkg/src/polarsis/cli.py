"""Command-line front end.

Subcommands cover the full workflow on scenario files: simulate, analyze
(reproduction extremes plus the infection-free verdict), equilibrium
(locate and certify), respond (plan generation), generate ws (scenario
skeletons on small-world social graphs) and threshold (critical uniform
caution level). Exit codes: 0 success, 2 validation failure, 3 solver
non-convergence, 4 I/O error. The only randomness is behind explicit
--seed flags; nothing reads the environment.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .dynamics import SimConfig, simulate
from .equilibria import EndemicSolveError, endemic_stability_check, solve_endemic
from .intervention import critical_uniform_opinion, respond
from .network import generate_watts_strogatz
from .scenario import ScenarioError, load_scenario, write_trajectory, emit_plot
from .spectral import SpectralConvergenceError, healthy_verdict, reproduction_extremes

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4

MULTI_START_AGREEMENT = 1e-6


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _fmt_vector(vec) -> str:
    return ",".join(_fmt(float(v)) for v in vec)


def _cmd_simulate(args) -> int:
    params, state = load_scenario(args.scenario)
    cfg = SimConfig(horizon=args.horizon, conv_tol=args.tol)
    traj = simulate(params, state.x, state.z, cfg)
    final = traj.final
    print(f"steps: {final.k}")
    print(f"stop: {traj.stop_reason}")
    print(f"final_x_norm: {_fmt(float(np.abs(final.x).max()))}")
    print(f"final_z_norm: {_fmt(float(np.abs(final.z).max()))}")
    if args.out:
        write_trajectory(traj, args.out)
        print(f"wrote: {args.out}")
    if args.plot:
        emit_plot(traj, args.plot)
        print(f"plot: {args.plot}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    params, _ = load_scenario(args.scenario)
    ext = reproduction_extremes(params)
    verdict = healthy_verdict(params)
    print(f"r_min: {_fmt(ext.r_min)}")
    print(f"r_max: {_fmt(ext.r_max)}")
    print(f"severity: {ext.severity}")
    print(f"healthy_state: {verdict.verdict}")
    print(f"origin_jacobian_radius: {_fmt(verdict.origin_jacobian_radius)}")
    return EXIT_OK


def _print_record(record) -> None:
    print(f"class: {record.kind}")
    print(f"x_star: {_fmt_vector(record.x_star)}")
    print(f"z_star: {_fmt_vector(record.z_star)}")
    print(f"consensus: {record.consensus}")
    print(f"residual_x: {_fmt(record.residual_x)}")
    print(f"residual_z: {_fmt(record.residual_z)}")
    print(f"cond_17: {record.cond_17}")
    print(f"cond_18: {record.cond_18}")
    print(f"iterations: {record.solver_iterations}")


def _cmd_equilibrium(args) -> int:
    params, _ = load_scenario(args.scenario)
    record = solve_endemic(params, tol=args.tol, max_iter=args.max_iter)
    if args.starts > 1:
        rng = np.random.default_rng(args.seed)
        for _ in range(args.starts - 1):
            x0 = rng.uniform(0.05, 0.95, params.n)
            z0 = rng.uniform(0.05, 0.95, params.n)
            other = solve_endemic(params, x0=x0, z0=z0, tol=args.tol,
                                  max_iter=args.max_iter)
            gap = max(
                float(np.abs(other.x_star - record.x_star).max()),
                float(np.abs(other.z_star - record.z_star).max()),
            )
            if gap > MULTI_START_AGREEMENT:
                print(f"error: starts disagree, gap {gap:.3g}", file=sys.stderr)
                return EXIT_SOLVER
        print(f"starts_agree: {args.starts}")
    _print_record(record)
    if record.kind == "endemic":
        print(f"stability: {endemic_stability_check(record, params)}")
    else:
        print(f"stability: {healthy_verdict(params).verdict}")
    return EXIT_OK


def _load_input_matrix(path, n: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(cell) for cell in line.split(",")])
    c = np.array(rows, dtype=float)
    if c.ndim != 2 or c.shape[0] != n:
        raise ValueError(f"input matrix must have {n} rows")
    return c


def _cmd_respond(args) -> int:
    params, _ = load_scenario(args.scenario)
    if args.input_matrix:
        c = _load_input_matrix(args.input_matrix, params.n)
    else:
        c = np.eye(params.n)
    plan = respond(params, c, args.budget, seed=args.seed)
    if args.json:
        print(json.dumps(plan.to_dict(), indent=2))
        return EXIT_OK
    print(f"branch: {plan.branch}")
    print(f"r_min: {_fmt(plan.r_min)}")
    print(f"r_max: {_fmt(plan.r_max)}")
    if plan.u_star is not None:
        print(f"u_star: {_fmt_vector(plan.u_star)}")
    if plan.z_floor is not None:
        print(f"z_floor: {_fmt_vector(plan.z_floor)}")
    if plan.r_at_floor is not None:
        print(f"r_at_floor: {_fmt(plan.r_at_floor)}")
    if plan.measures:
        print(f"measures: {','.join(plan.measures)}")
    if plan.redistribution is not None:
        ranked = " ".join(f"{node}:{weight:.6g}" for node, weight in plan.redistribution)
        print(f"redistribution: {ranked}")
    if plan.endemic_record is not None:
        _print_record(plan.endemic_record)
    if plan.diagnostic is not None:
        print(f"diagnostic: {plan.diagnostic}")
    return EXIT_OK


def _cmd_generate_ws(args) -> int:
    n = args.n
    # fail before writing if the generator parameters cannot produce a graph
    generate_watts_strogatz(n, args.k, args.p, args.seed)
    # loadable skeleton: seeded small-world social layer plus a placeholder
    # physical ring, meant to be edited with real rates
    ring = [[i, (i + 1) % n, 0.1] for i in range(n)]
    ring += [[(i + 1) % n, i, 0.1] for i in range(n)]
    doc = {
        "version": "1",
        "n": n,
        "physical": {"edges": ring, "beta_min": 0.05},
        "social": {
            "generator": {
                "type": "watts-strogatz",
                "n": n,
                "k": args.k,
                "p": args.p,
                "seed": args.seed,
            }
        },
        "recovery": {"delta": [0.5] * n, "delta_min": 0.25},
        "theta": [0.3] * n,
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"wrote: {args.out}")
    return EXIT_OK


def _cmd_threshold(args) -> int:
    params, _ = load_scenario(args.scenario)
    print(f"a_star: {_fmt(critical_uniform_opinion(params))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarsis",
        description="Coupled epidemic-opinion dynamics: simulate, analyze, plan.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate the coupled dynamics")
    p_sim.add_argument("scenario")
    p_sim.add_argument("--horizon", type=int, default=10_000)
    p_sim.add_argument("--tol", type=float, default=1e-10)
    p_sim.add_argument("--out", help="trajectory CSV path")
    p_sim.add_argument("--plot", help="two-panel SVG path")
    p_sim.set_defaults(handler=_cmd_simulate)

    p_an = sub.add_parser("analyze", help="reproduction extremes and verdict")
    p_an.add_argument("scenario")
    p_an.set_defaults(handler=_cmd_analyze)

    p_eq = sub.add_parser("equilibrium", help="locate and certify equilibrium")
    p_eq.add_argument("scenario")
    p_eq.add_argument("--tol", type=float, default=1e-12)
    p_eq.add_argument("--max-iter", type=int, default=200_000)
    p_eq.add_argument("--starts", type=int, default=1,
                      help="extra seeded random starts that must agree")
    p_eq.add_argument("--seed", type=int, default=0)
    p_eq.set_defaults(handler=_cmd_equilibrium)

    p_re = sub.add_parser("respond", help="generate the epidemic response plan")
    p_re.add_argument("scenario")
    p_re.add_argument("--budget", type=float, required=True)
    p_re.add_argument("--input-matrix", help="CSV channel matrix, defaults to identity")
    p_re.add_argument("--json", action="store_true")
    p_re.add_argument("--seed", type=int, default=0)
    p_re.set_defaults(handler=_cmd_respond)

    p_gen = sub.add_parser("generate", help="emit scenario skeletons")
    gen_sub = p_gen.add_subparsers(dest="generator", required=True)
    p_ws = gen_sub.add_parser("ws", help="small-world social layer skeleton")
    p_ws.add_argument("--n", type=int, required=True)
    p_ws.add_argument("--k", type=int, required=True)
    p_ws.add_argument("--p", type=float, required=True)
    p_ws.add_argument("--seed", type=int, required=True)
    p_ws.add_argument("--out", required=True)
    p_ws.set_defaults(handler=_cmd_generate_ws)

    p_th = sub.add_parser("threshold", help="critical uniform caution level")
    p_th.add_argument("scenario")
    p_th.set_defaults(handler=_cmd_threshold)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.handler(args)
    except (EndemicSolveError, SpectralConvergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except (ScenarioError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
