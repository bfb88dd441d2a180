"""Scenario files, trajectory CSVs and figure emission.

A scenario is a JSON document describing one model instance: the physical
contact layer with its infection rates, the social layer (explicit edges or
a seeded small-world generator), recovery rates, coupling weights, and an
optional initial state. Loading validates the full admissibility contract,
so every (ModelParams, CoupledState) pair produced here is simulation-ready.
Trajectories are exchanged as flat CSV with 17 significant digits, which
round-trips float64 exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dynamics import CoupledState, Trajectory
from .network import generate_watts_strogatz
from .params import ModelParams, validate

SCHEMA_VERSION = "1"
SEED_NODE = 0
SEED_LEVEL = 0.01
TRAJECTORY_HEADER = "k,node,x,z"


class ScenarioError(Exception):
    """Base for scenario load/store failures."""


class ScenarioFormatError(ScenarioError):
    """The document does not match the schema; the message names the field."""


class ScenarioValidationError(ScenarioError):
    """The described model violates an admissibility assumption."""


def _require(mapping, name, where=""):
    label = f"{where}.{name}" if where else name
    if not isinstance(mapping, dict) or name not in mapping:
        raise ScenarioFormatError(f'missing field "{label}"')
    return mapping[name], label


def _number(value, label):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f'field "{label}" must be a number')
    return float(value)


def _integer(value, label):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioFormatError(f'field "{label}" must be an integer')
    return value


def _vector(value, label, n):
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioFormatError(f'field "{label}" must list {n} numbers')
    return np.array([_number(v, label) for v in value])


def _edge_matrix(value, label, n):
    """Dense receiver-indexed matrix from [[src, dst, weight]] triples."""
    if not isinstance(value, list):
        raise ScenarioFormatError(f'field "{label}" must be a list of edge triples')
    out = np.zeros((n, n))
    seen = set()
    for entry in value:
        if not isinstance(entry, list) or len(entry) != 3:
            raise ScenarioFormatError(
                f'field "{label}" entries must be [src, dst, weight] triples'
            )
        src = _integer(entry[0], f"{label}[].src")
        dst = _integer(entry[1], f"{label}[].dst")
        w = _number(entry[2], f"{label}[].weight")
        if not (0 <= src < n and 0 <= dst < n):
            raise ScenarioFormatError(f'edge [{src}, {dst}] in "{label}" out of range')
        if (src, dst) in seen:
            raise ScenarioFormatError(f'duplicate edge [{src}, {dst}] in "{label}"')
        seen.add((src, dst))
        out[dst, src] = w
    return out


def _social_matrix(social, n):
    has_edges = isinstance(social, dict) and "edges" in social
    has_generator = isinstance(social, dict) and "generator" in social
    if has_edges == has_generator:
        raise ScenarioFormatError(
            'field "social" must have exactly one of "edges" or "generator"'
        )
    if has_edges:
        return _edge_matrix(social["edges"], "social.edges", n)
    gen = social["generator"]
    if not isinstance(gen, dict):
        raise ScenarioFormatError('field "social.generator" must be an object')
    gtype, _ = _require(gen, "type", "social.generator")
    if gtype != "watts-strogatz":
        raise ScenarioFormatError('field "social.generator.type" must be "watts-strogatz"')
    gn = _integer(*_require(gen, "n", "social.generator"))
    if gn != n:
        raise ScenarioFormatError(f'field "social.generator.n" must equal n ({n})')
    k = _integer(*_require(gen, "k", "social.generator"))
    p = _number(*_require(gen, "p", "social.generator"))
    seed = _integer(*_require(gen, "seed", "social.generator"))
    try:
        net = generate_watts_strogatz(gn, k, p, seed)
    except ValueError as err:
        raise ScenarioFormatError(f'field "social.generator" invalid: {err}') from err
    # lazy-uniform influence: every neighbor and the node itself weigh equally
    adj = net.adjacency()
    return (adj + np.eye(n)) / (adj.sum(axis=1) + 1.0)[:, None]


def load_scenario(path):
    """Read a scenario file into a validated (params, initial state) pair.

    Schema problems raise ScenarioFormatError naming the offending field;
    admissibility failures raise ScenarioValidationError rendering every
    violated check. When the file has no initial block, the epidemic is
    seeded at node 0 with level 0.01 and opinions start at zero.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioFormatError(f"not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario document must be a JSON object")

    version, _ = _require(doc, "version")
    if version != SCHEMA_VERSION:
        raise ScenarioFormatError(f'unsupported schema version "{version}"')
    n = _integer(*_require(doc, "n"))
    if n < 1:
        raise ScenarioFormatError('field "n" must be a positive integer')

    if "node_labels" in doc:
        labels = doc["node_labels"]
        if (
            not isinstance(labels, list)
            or len(labels) != n
            or not all(isinstance(s, str) for s in labels)
        ):
            raise ScenarioFormatError(f'field "node_labels" must list {n} strings')

    physical, _ = _require(doc, "physical")
    b = _edge_matrix(*_require(physical, "edges", "physical"), n)
    beta_min = _number(*_require(physical, "beta_min", "physical"))
    b_min = np.where(b != 0.0, beta_min, 0.0)

    social, _ = _require(doc, "social")
    w = _social_matrix(social, n)

    recovery, _ = _require(doc, "recovery")
    delta = _vector(*_require(recovery, "delta", "recovery"), n)
    delta_min = _number(*_require(recovery, "delta_min", "recovery"))
    theta = _vector(*_require(doc, "theta"), n)

    params = ModelParams(B=b, B_min=b_min, delta=delta, delta_min=delta_min,
                         W=w, theta=theta)
    report = validate(params)
    if not report.valid:
        raise ScenarioValidationError(str(report))

    if "initial" in doc:
        initial = doc["initial"]
        x0 = _vector(*_require(initial, "x", "initial"), n)
        z0 = _vector(*_require(initial, "z", "initial"), n)
        for label, vec in (("initial.x", x0), ("initial.z", z0)):
            if vec.min() < 0.0 or vec.max() > 1.0:
                raise ScenarioFormatError(f'field "{label}" must lie within [0, 1]')
    else:
        x0 = np.zeros(n)
        x0[SEED_NODE] = SEED_LEVEL
        z0 = np.zeros(n)
    return params, CoupledState(k=0, x=x0, z=z0)


def _edge_list(matrix):
    # receiver-indexed storage back to [src, dst, weight], sorted by (src, dst)
    dsts, srcs = np.nonzero(matrix)
    triples = [[int(s), int(d), float(matrix[d, s])] for d, s in zip(dsts, srcs)]
    triples.sort(key=lambda t: (t[0], t[1]))
    return triples


def write_scenario(params, path, x0=None, z0=None, node_labels=None):
    """Store a parameter set (and optional initial state) as a scenario file.

    The schema keeps one scalar beta_min, so parameter sets with per-edge
    minimum rates are not expressible and are rejected.
    """
    mask = params.B != 0.0
    min_rates = params.B_min[mask]
    if min_rates.size and not (min_rates == min_rates[0]).all():
        raise ValueError("per-edge minimum infection rates do not fit the scenario schema")
    if (x0 is None) != (z0 is None):
        raise ValueError("provide both x0 and z0 or neither")

    doc = {
        "version": SCHEMA_VERSION,
        "n": params.n,
    }
    if node_labels is not None:
        labels = [str(s) for s in node_labels]
        if len(labels) != params.n:
            raise ValueError(f"need {params.n} node labels")
        doc["node_labels"] = labels
    doc["physical"] = {
        "edges": _edge_list(params.B),
        "beta_min": float(min_rates[0]) if min_rates.size else 0.0,
    }
    doc["social"] = {"edges": _edge_list(params.W)}
    doc["recovery"] = {
        "delta": [float(v) for v in params.delta],
        "delta_min": params.delta_min,
    }
    doc["theta"] = [float(v) for v in params.theta]
    if x0 is not None:
        doc["initial"] = {
            "x": [float(v) for v in np.asarray(x0)],
            "z": [float(v) for v in np.asarray(z0)],
        }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def write_trajectory(trajectory: Trajectory, path) -> None:
    """Store recorded states as CSV: one row per (step, node), 17 digits."""
    if not trajectory.states:
        raise ValueError("empty trajectory")
    ks, xs, zs = trajectory.arrays()
    n = xs.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for row, k in enumerate(ks):
            for node in range(n):
                fh.write(f"{k},{node},{xs[row, node]:.17g},{zs[row, node]:.17g}\n")


def read_trajectory(path):
    """Parse a trajectory CSV back into (steps, x, z) arrays.

    Exact inverse of write_trajectory for float64 data.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER.split(","):
            raise ValueError(f'trajectory CSV must start with header "{TRAJECTORY_HEADER}"')
        rows = [(int(k), int(node), float(x), float(z)) for k, node, x, z in reader]
    if not rows:
        raise ValueError("trajectory CSV has no data rows")
    n = max(node for _, node, _, _ in rows) + 1
    if len(rows) % n != 0:
        raise ValueError("trajectory CSV rows do not tile the node set")
    steps = len(rows) // n
    ks = np.empty(steps, dtype=int)
    xs = np.empty((steps, n))
    zs = np.empty((steps, n))
    for block in range(steps):
        k0 = rows[block * n][0]
        for node in range(n):
            k, node_got, x, z = rows[block * n + node]
            if k != k0 or node_got != node:
                raise ValueError("trajectory CSV rows must be sorted by (k, node)")
            xs[block, node] = x
            zs[block, node] = z
        ks[block] = k0
    return ks, xs, zs


def emit_plot(trajectory: Trajectory, path) -> None:
    """Render the trajectory as a static two-panel vector figure."""
    if not trajectory.states:
        raise ValueError("empty trajectory")
    from matplotlib.figure import Figure

    ks, xs, zs = trajectory.arrays()
    fig = Figure(figsize=(8.0, 6.0))
    ax_x, ax_z = fig.subplots(2, 1, sharex=True)
    for node in range(xs.shape[1]):
        ax_x.plot(ks, xs[:, node], linewidth=1.0)
        ax_z.plot(ks, zs[:, node], linewidth=1.0)
    ax_x.set_ylabel("infection level x")
    ax_z.set_ylabel("opinion z")
    ax_z.set_xlabel("step k")
    fig.savefig(path)
