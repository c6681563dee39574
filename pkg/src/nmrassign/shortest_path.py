"""Shortest paths through the layered assignment graph.

``dp_shortest_path`` is the unconstrained dynamic program; it ignores peak
reuse and serves as the baseline solver and as a cross-check for the LP
relaxation. ``exhaustive_constrained`` enumerates every start-to-end path
that never consumes a peak twice; it is exponential and only usable on tiny
instances, where it acts as the ground-truth oracle for the constrained
solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .domain import NmrAssignError
from .graph import AssignmentGraph


class NoPathError(NmrAssignError):
    """The graph admits no start-to-end path."""


class InstanceTooLargeError(NmrAssignError):
    """Exhaustive enumeration would exceed the path budget."""


@dataclass(frozen=True)
class PathSolution:
    """A start-to-end path: one node index per layer, plus its cost."""

    nodes: tuple[int, ...]
    total_cost: float
    edge_costs: tuple[float, ...]
    optimal: bool = True

    def __post_init__(self) -> None:
        if len(self.edge_costs) != len(self.nodes) - 1:
            raise NmrAssignError("edge_costs length must be len(nodes) - 1")


def _solution(g: AssignmentGraph, nodes: Sequence[int], optimal: bool = True) -> PathSolution:
    edge_costs = tuple(
        g.edges[k][(nodes[k], nodes[k + 1])] for k in range(len(nodes) - 1)
    )
    return PathSolution(tuple(nodes), sum(edge_costs), edge_costs, optimal)


def dp_shortest_path(g: AssignmentGraph) -> PathSolution:
    """Unconstrained shortest path by backward dynamic programming.

    Ties are broken towards the lexicographically smallest node index
    sequence, chosen during the forward reconstruction, so the result is
    deterministic.
    """
    n = g.n
    # value[k][i]: cost of the cheapest path from node i in layer k to the end
    value: list[dict[int, float]] = [dict() for _ in range(n + 2)]
    value[n + 1][0] = 0.0
    for k in range(n, -1, -1):
        for (i, j), cost in g.edges[k].items():
            tail = value[k + 1].get(j)
            if tail is None:
                continue
            candidate = cost + tail
            if candidate < value[k].get(i, math.inf):
                value[k][i] = candidate

    if 0 not in value[0]:
        raise NoPathError("no start-to-end path exists")

    nodes = [0]
    for k in range(n + 1):
        i = nodes[-1]
        best_j = None
        for j in sorted(j for (src, j) in g.edges[k] if src == i):
            tail = value[k + 1].get(j)
            if tail is None:
                continue
            if math.isclose(g.edges[k][(i, j)] + tail, value[k][i], rel_tol=0.0, abs_tol=1e-9):
                best_j = j
                break
        if best_j is None:
            # guard against accumulated rounding: fall back to the argmin
            best_j = min(
                (j for (src, j) in g.edges[k] if src == i and j in value[k + 1]),
                key=lambda j: (g.edges[k][(i, j)] + value[k + 1][j], j),
            )
        nodes.append(best_j)
    return _solution(g, nodes)


def exhaustive_constrained(g: AssignmentGraph, budget: int = 1_000_000) -> PathSolution:
    """Cheapest path that never consumes the same peak twice.

    Raises InstanceTooLargeError when the number of candidate paths exceeds
    ``budget``, and NoPathError when no conflict-free path exists. Ties are
    broken towards the lexicographically smallest node sequence.
    """
    paths = 1
    for layer in g.layers[1:-1]:
        paths *= len(layer)
        if paths > budget:
            raise InstanceTooLargeError(
                f"more than {budget} candidate paths; refusing exhaustive search"
            )

    n = g.n
    best_nodes: tuple[int, ...] | None = None
    best_cost = math.inf

    def extend(k: int, node: int, cost: float, used: frozenset[str], trail: tuple[int, ...]) -> None:
        nonlocal best_nodes, best_cost
        if k == n + 1:
            if cost < best_cost - 1e-12 or (
                math.isclose(cost, best_cost, rel_tol=0.0, abs_tol=1e-12)
                and (best_nodes is None or trail < best_nodes)
            ):
                best_nodes, best_cost = trail, cost
            return
        for j in sorted(j for (src, j) in g.edges[k] if src == node):
            peaks = g.usage(k + 1, j) if k + 1 <= n else frozenset()
            if used & peaks:
                continue
            extend(
                k + 1,
                j,
                cost + g.edges[k][(node, j)],
                used | peaks,
                trail + (j,),
            )

    extend(0, 0, 0.0, frozenset(), (0,))
    if best_nodes is None:
        raise NoPathError("no conflict-free start-to-end path exists")
    return _solution(g, best_nodes)
