"""Directed weighted interaction graphs.

Both layers of the model live on directed graphs over the same node set: a
physical contact layer carrying infection rates and a social layer carrying
opinion influence weights. An edge (src, dst, w) means src influences dst, so
the adjacency matrix is receiver-indexed: ``adjacency()[dst, src] = w``. All
reachability questions in this package reduce to "is the whole graph one
strongly connected component", computed here by Tarjan's algorithm with
self-loops ignored.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DirectedWeightedNetwork:
    """A directed graph with nonnegative edge weights.

    Edges are (src, dst, weight) triples; at most one edge per ordered pair.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("network needs at least one node")
        canon = tuple((int(s), int(d), float(w)) for s, d, w in self.edges)
        seen: set[tuple[int, int]] = set()
        for src, dst, w in canon:
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise ValueError(f"edge ({src},{dst}) out of range for n={self.n}")
            if w < 0:
                raise ValueError(f"negative weight on edge ({src},{dst})")
            if (src, dst) in seen:
                raise ValueError(f"duplicate edge ({src},{dst})")
            seen.add((src, dst))
        object.__setattr__(self, "edges", canon)

    def adjacency(self) -> np.ndarray:
        """Receiver-indexed weight matrix: A[dst, src] = weight."""
        a = np.zeros((self.n, self.n))
        for src, dst, w in self.edges:
            a[dst, src] = w
        return a


def _tarjan_component_count(succ: list[list[int]], n: int) -> int:
    """Number of strongly connected components, iterative Tarjan."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0
    components = 0
    for root in range(n):
        if index[root] != -1:
            continue
        # explicit DFS stack of (node, iterator position)
        work = [(root, 0)]
        while work:
            node, ptr = work.pop()
            if ptr == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack[node] = True
            advanced = False
            for i in range(ptr, len(succ[node])):
                nxt = succ[node][i]
                if index[nxt] == -1:
                    work.append((node, i + 1))
                    work.append((nxt, 0))
                    advanced = True
                    break
                if on_stack[nxt]:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            if low[node] == index[node]:
                components += 1
                while True:
                    top = stack.pop()
                    on_stack[top] = False
                    if top == node:
                        break
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return components


def _successors_from_matrix(a: np.ndarray) -> list[list[int]]:
    # a is receiver-indexed: a[i, j] > 0 means j -> i; self-loops dropped
    n = a.shape[0]
    succ: list[list[int]] = [[] for _ in range(n)]
    rows, cols = np.nonzero(a)
    for dst, src in zip(rows.tolist(), cols.tolist()):
        if dst != src:
            succ[src].append(dst)
    return succ


def strongly_connected(net: DirectedWeightedNetwork) -> bool:
    """True when every node can reach every other along directed edges."""
    return strongly_connected_matrix(net.adjacency())


def strongly_connected_matrix(a: np.ndarray) -> bool:
    """Strong connectivity of the graph whose receiver-indexed weights are a."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 1:
        return True
    return _tarjan_component_count(_successors_from_matrix(a), n) == 1


def laplacian(w: np.ndarray) -> np.ndarray:
    """I - W for a row-stochastic nonnegative W.

    Raises ValueError when W is not row-stochastic (rows must sum to 1 within
    1e-12 with nonnegative entries).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("W must be square")
    if (w < 0).any():
        raise ValueError("W has negative entries")
    sums = w.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > 1e-12)[0]
    if bad.size:
        raise ValueError(f"row not stochastic, row {bad[0]}")
    return np.eye(w.shape[0]) - w


def generate_watts_strogatz(
    n: int, k: int, p: float, seed: int, max_retries: int = 100
) -> DirectedWeightedNetwork:
    """Small-world graph: ring lattice with single-pass random rewiring.

    Each node starts connected to its k nearest ring neighbors (k even,
    2 <= k < n). Every lattice edge is rewired with probability p to a
    uniformly drawn target, rejecting self-loops and duplicates; a node
    already adjacent to everyone keeps its edge. The undirected result is
    emitted as symmetric directed edges of weight 1.0, so the graph has
    exactly n*k directed edges. Generation is deterministic per seed and
    retries (bounded) until the graph is strongly connected.

    Args:
        n: node count.
        k: even ring degree, 2 <= k < n.
        p: rewiring probability in [0, 1].
        seed: RNG seed; the retry loop continues the same stream.
        max_retries: attempts before giving up.

    Returns:
        A strongly connected DirectedWeightedNetwork.
    """
    if k < 2 or k % 2 != 0:
        raise ValueError("k must be even and >= 2")
    if n <= k:
        raise ValueError("need n > k")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        adj = np.zeros((n, n), dtype=bool)
        for lane in range(1, k // 2 + 1):
            for i in range(n):
                j = (i + lane) % n
                adj[i, j] = adj[j, i] = True
        for lane in range(1, k // 2 + 1):
            for i in range(n):
                if rng.random() >= p:
                    continue
                j = (i + lane) % n
                if not adj[i, j]:
                    continue  # already rewired away from the other end
                if adj[i].sum() >= n - 1:
                    continue  # saturated node keeps the lattice edge
                t = int(rng.integers(n))
                while t == i or adj[i, t]:
                    t = int(rng.integers(n))
                adj[i, j] = adj[j, i] = False
                adj[i, t] = adj[t, i] = True
        if strongly_connected_matrix(adj.astype(float)):
            edges = [
                (i, j, 1.0)
                for i in range(n)
                for j in range(n)
                if adj[i, j]
            ]
            return DirectedWeightedNetwork(n=n, edges=tuple(edges))
    raise RuntimeError(
        f"could not draw a strongly connected graph in {max_retries} attempts"
    )
