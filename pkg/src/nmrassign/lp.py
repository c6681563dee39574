"""Linear programming formulations of the constrained assignment problem.

The shortest-path problem is written as a flow LP over the layered graph:
one variable per edge, a selection row per inner layer forcing unit flow,
and a conservation row per inner node. Peak-sharing is discouraged through
utilization rows, one per contested peak, that cap the total flow leaving
nodes consuming that peak. The hard variant caps it at one; the soft
variant allows overuse through slack variables priced at ``lambda``.

The relaxations are solved with the dual simplex backend of HiGHS (through
scipy), which returns vertex solutions; on pure flow polytopes these are
integral. When utilization rows make the optimum fractional, the fractional
support is frozen and re-solved as a primal heuristic, and a branch and
bound pruned by that incumbent certifies or improves the answer.
"""
from __future__ import annotations

import importlib.util
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .domain import NmrAssignError, Tolerances
from .graph import DUMMY, AssignmentGraph
from .shortest_path import NoPathError, PathSolution

VARIANTS = ("flow", "lian1", "lian2")

_STATUS = {
    0: "optimal",
    1: "iteration_limit",
    2: "infeasible",
    3: "unbounded",
    4: "numerical_failure",
}


class SolverError(NmrAssignError):
    """The LP backend failed to produce a usable solution."""


@dataclass(frozen=True)
class LpRow:
    """One constraint row: a sparse coefficient map, a sense, and a bound."""

    name: str
    coeffs: Mapping[int, float]
    rhs: float
    kind: str  # "eq" or "ub"


@dataclass
class LinearProgram:
    """A minimization LP with named variables and cached scipy matrices."""

    variant: str
    var_names: list[str]
    costs: np.ndarray
    rows: list[LpRow]
    bounds: list[tuple[float, float | None]]
    #: (k, i, j) -> variable index for the edge between layers k and k+1
    edge_vars: dict[tuple[int, int, int], int]
    #: peak id -> slack variable index (soft variant only)
    eps_vars: dict[str, int] = field(default_factory=dict)
    #: peak id -> edge variable indices its utilization row touches
    utilization: dict[str, tuple[int, ...]] = field(default_factory=dict)
    _cache: dict | None = None

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def matrices(self):
        """(A_eq, b_eq, A_ub, b_ub) as scipy sparse/ndarray, built once."""
        if self._cache is None:
            eq_rows = [r for r in self.rows if r.kind == "eq"]
            ub_rows = [r for r in self.rows if r.kind == "ub"]
            self._cache = {
                "A_eq": _sparse_from_rows(eq_rows, self.n_vars),
                "b_eq": np.array([r.rhs for r in eq_rows]),
                "A_ub": _sparse_from_rows(ub_rows, self.n_vars),
                "b_ub": np.array([r.rhs for r in ub_rows]),
            }
        c = self._cache
        return c["A_eq"], c["b_eq"], c["A_ub"], c["b_ub"]


def _sparse_from_rows(rows: Sequence[LpRow], n_vars: int):
    if not rows:
        return None
    data, ri, ci = [], [], []
    for r_idx, row in enumerate(rows):
        for c_idx, coeff in sorted(row.coeffs.items()):
            ri.append(r_idx)
            ci.append(c_idx)
            data.append(coeff)
    return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n_vars))


@dataclass(frozen=True)
class LpSolution:
    status: str
    objective: float | None
    values: np.ndarray | None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def value_of(self, lp: LinearProgram, key: tuple[int, int, int]) -> float:
        if self.values is None:
            raise SolverError("solution carries no variable values")
        return float(self.values[lp.edge_vars[key]])


def formulate(g: AssignmentGraph, variant: str, tol: Tolerances) -> LinearProgram:
    """Build the flow LP for a graph, optionally with utilization rows."""
    if variant not in VARIANTS:
        raise NmrAssignError(f"unknown LP variant {variant!r}")
    n = g.n

    edge_keys = sorted(
        (k, i, j) for k, layer_edges in enumerate(g.edges) for (i, j) in layer_edges
    )
    edge_vars = {key: idx for idx, key in enumerate(edge_keys)}
    var_names = [f"x_{k}_{i}_{j}" for k, i, j in edge_keys]
    costs = [g.edges[k][(i, j)] for k, i, j in edge_keys]
    bounds: list[tuple[float, float | None]] = [(0.0, 1.0)] * len(edge_keys)

    rows: list[LpRow] = []
    for k in range(1, n + 1):
        coeffs = {edge_vars[(k, i, j)]: 1.0 for (i, j) in g.edges[k]}
        rows.append(LpRow(f"select_{k}", coeffs, 1.0, "eq"))
    for k in range(1, n + 1):
        for node in g.layers[k]:
            coeffs: dict[int, float] = {}
            for (i, j) in g.edges[k - 1]:
                if j == node.index:
                    coeffs[edge_vars[(k - 1, i, j)]] = 1.0
            for (i, j) in g.edges[k]:
                if i == node.index:
                    coeffs[edge_vars[(k, i, j)]] = coeffs.get(edge_vars[(k, i, j)], 0.0) - 1.0
            rows.append(LpRow(f"flow_{k}_{node.index}", coeffs, 0.0, "eq"))

    eps_vars: dict[str, int] = {}
    utilization: dict[str, tuple[int, ...]] = {}
    if variant in ("lian1", "lian2"):
        consumers: dict[str, set[tuple[int, int]]] = {}
        for k in range(1, n + 1):
            for i, peaks in g.peak_usage[k].items():
                for pid in peaks:
                    consumers.setdefault(pid, set()).add((k, i))
        contested = sorted(p for p, nodes in consumers.items() if len(nodes) >= 2)
        for pid in contested:
            indices: set[int] = set()
            for k, i in consumers[pid]:
                for (src, j) in g.edges[k]:
                    if src == i:
                        indices.add(edge_vars[(k, src, j)])
            if not indices:
                continue
            utilization[pid] = tuple(sorted(indices))
            coeffs = {idx: 1.0 for idx in utilization[pid]}
            if variant == "lian2":
                eps_idx = len(var_names) + len(eps_vars)
                eps_vars[pid] = eps_idx
                coeffs[eps_idx] = -1.0
            rows.append(LpRow(f"use_{pid}", coeffs, 1.0, "ub"))
        for pid in sorted(eps_vars):
            var_names.append(f"eps_{pid}")
            costs.append(tol.lam)
            bounds.append((0.0, None))

    return LinearProgram(
        variant=variant,
        var_names=var_names,
        costs=np.array(costs, dtype=float),
        rows=rows,
        bounds=bounds,
        edge_vars=edge_vars,
        eps_vars=eps_vars,
        utilization=utilization,
    )


# ---------------------------------------------------------------------------
# solving

#: backend signature: (lp, bounds) -> LpSolution
Backend = Callable[[LinearProgram, Sequence[tuple[float, float | None]]], LpSolution]


def solve_lp(
    lp: LinearProgram,
    bounds: Sequence[tuple[float, float | None]] | None = None,
    backend: Backend | None = None,
) -> LpSolution:
    """Solve the relaxation with the bundled HiGHS dual simplex backend.

    ``bounds`` overrides the program's own variable bounds, which is how the
    branch and bound fixes variables without rebuilding the program.
    """
    if backend is not None:
        return backend(lp, bounds if bounds is not None else lp.bounds)
    A_eq, b_eq, A_ub, b_ub = lp.matrices()
    res = linprog(
        lp.costs,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=list(bounds) if bounds is not None else lp.bounds,
        method="highs-ds",
    )
    status = _STATUS.get(res.status, "numerical_failure")
    if status != "optimal":
        return LpSolution(status, None, None)
    return LpSolution(status, float(res.fun), np.asarray(res.x, dtype=float))


def load_backend(path: str | Path) -> Backend:
    """Load an external solver from a Python file exposing ``solve(lp, bounds)``."""
    path = Path(path)
    spec = importlib.util.spec_from_file_location(f"lp_backend_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise SolverError(f"cannot load solver backend from {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    if not hasattr(module, "solve"):
        raise SolverError(f"backend {path} does not expose a solve() function")
    return module.solve


def is_integral(lp: LinearProgram, solution: LpSolution, tol: float = 1e-6) -> bool:
    if solution.values is None:
        return False
    x = solution.values[: len(lp.edge_vars)]
    return bool(np.all(np.minimum(np.abs(x), np.abs(x - 1.0)) <= tol))


@dataclass(frozen=True)
class BnbResult:
    solution: LpSolution | None
    proven_optimal: bool
    nodes_explored: int
    lower_bound: float


def branch_and_bound(
    lp: LinearProgram,
    bounds: Sequence[tuple[float, float | None]] | None = None,
    backend: Backend | None = None,
    node_limit: int = 100_000,
    int_tol: float = 1e-6,
    gap_eps: float = 1e-9,
    incumbent: LpSolution | None = None,
) -> BnbResult:
    """Exact solve with integrality on the edge variables.

    Depth-first search branching on the most fractional edge variable,
    exploring the fix-to-one child first. Slack variables stay continuous.
    An ``incumbent`` from a primal heuristic seeds the pruning bound. When
    the node limit is hit the incumbent is returned unproven.
    """
    base = list(bounds if bounds is not None else lp.bounds)
    n_edges = len(lp.edge_vars)

    incumbent_obj = math.inf
    if incumbent is not None and incumbent.objective is not None:
        incumbent_obj = incumbent.objective
    nodes = 0
    proven = True
    root_bound = math.inf

    stack: list[dict[int, tuple[float, float]]] = [{}]
    while stack:
        fixes = stack.pop()
        if nodes >= node_limit:
            proven = False
            break
        nodes += 1
        local = base if not fixes else [
            fixes.get(idx, b) for idx, b in enumerate(base)
        ]
        sol = solve_lp(lp, local, backend)
        if not sol.ok:
            continue
        assert sol.objective is not None and sol.values is not None
        if nodes == 1:
            root_bound = sol.objective
        if sol.objective >= incumbent_obj - gap_eps:
            continue
        x = sol.values[:n_edges]
        frac = np.minimum(np.abs(x), np.abs(x - 1.0))
        branch_var = int(np.argmax(frac))
        if frac[branch_var] <= int_tol:
            incumbent, incumbent_obj = sol, sol.objective
            continue
        stack.append({**fixes, branch_var: (0.0, 0.0)})
        stack.append({**fixes, branch_var: (1.0, 1.0)})

    return BnbResult(incumbent, proven, nodes, root_bound)


def extract_path(g: AssignmentGraph, lp: LinearProgram, solution: LpSolution) -> PathSolution:
    """Follow the unit-flow edges of an integral solution from the start."""
    if solution.values is None:
        raise SolverError("cannot extract a path without variable values")
    nodes = [0]
    for k in range(g.n + 1):
        i = nodes[-1]
        nxt = None
        for (src, j) in sorted(g.edges[k]):
            if src == i and solution.values[lp.edge_vars[(k, src, j)]] > 0.5:
                nxt = j
                break
        if nxt is None:
            raise SolverError(f"integral solution has no outgoing flow at layer {k}")
        nodes.append(nxt)
    edge_costs = tuple(g.edges[k][(nodes[k], nodes[k + 1])] for k in range(g.n + 1))
    return PathSolution(tuple(nodes), sum(edge_costs), edge_costs)


def _restricted_bounds(
    g: AssignmentGraph, lp: LinearProgram, solution: LpSolution, round_eps: float
) -> list[tuple[float, float | None]]:
    """Bounds that zero every edge outside the rounded support.

    Dummy-incident edges are always retained so the restricted problem
    keeps a feasible all-dummy fallback.
    """
    assert solution.values is not None
    bounds = list(lp.bounds)
    n = g.n
    for (k, i, j), idx in lp.edge_vars.items():
        src_dummy = 1 <= k <= n and g.layers[k][i].kind == DUMMY
        dst_dummy = k <= n - 1 and g.layers[k + 1][j].kind == DUMMY
        if src_dummy or dst_dummy:
            continue
        if solution.values[idx] <= round_eps:
            bounds[idx] = (0.0, 0.0)
    return bounds


def round_and_resolve(
    g: AssignmentGraph,
    lp: LinearProgram,
    relaxed: LpSolution,
    tol: Tolerances,
    backend: Backend | None = None,
    node_limit: int = 100_000,
    gap_eps: float = 1e-9,
) -> BnbResult:
    """Exact solve seeded by a search restricted to the relaxation's support.

    The induced subgraph is a primal heuristic: a true optimum may use edges
    the fractional vertex left at zero. Its incumbent is therefore only
    accepted outright when it meets the relaxation bound; otherwise a global
    branch and bound, pruned by that incumbent, certifies or improves it.
    """
    bounds = _restricted_bounds(g, lp, relaxed, tol.round_eps)
    primal = branch_and_bound(lp, bounds, backend, node_limit=node_limit)
    assert relaxed.objective is not None
    if (
        primal.solution is not None
        and primal.solution.objective is not None
        and primal.solution.objective <= relaxed.objective + gap_eps
    ):
        return primal
    remaining = max(1, node_limit - primal.nodes_explored)
    full = branch_and_bound(
        lp, None, backend, node_limit=remaining, incumbent=primal.solution
    )
    if full.solution is None:
        # the seed incumbent was never beaten; fall back to it
        full = BnbResult(
            primal.solution, full.proven_optimal, full.nodes_explored,
            full.lower_bound,
        )
    return BnbResult(
        full.solution,
        full.proven_optimal,
        primal.nodes_explored + full.nodes_explored,
        full.lower_bound,
    )


# ---------------------------------------------------------------------------
# end-to-end solvers


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one constrained-assignment solve."""

    path: PathSolution
    objective: float
    lp_bound: float
    #: peak id -> times consumed along the path, for peaks consumed twice+
    reused_peaks: dict[str, int]
    #: peak id -> slack value (soft variant only)
    epsilons: dict[str, float]
    proven_optimal: bool
    nodes_explored: int
    variant: str


def _finish(
    g: AssignmentGraph,
    lp: LinearProgram,
    sol: LpSolution,
    lp_bound: float,
    proven: bool,
    nodes: int,
    tol: Tolerances,
) -> SolveResult:
    path = extract_path(g, lp, sol)
    path = PathSolution(path.nodes, path.total_cost, path.edge_costs, optimal=proven)
    counts = g.path_usage_counts(path.nodes)
    reused = {p: c for p, c in sorted(counts.items()) if c >= 2}
    epsilons = {}
    if lp.eps_vars and sol.values is not None:
        for pid, idx in sorted(lp.eps_vars.items()):
            value = float(sol.values[idx])
            if value > tol.round_eps:
                epsilons[pid] = value
    overuse = sum(max(0, c - 1) for c in counts.values())
    objective = path.total_cost + (tol.lam * overuse if lp.variant == "lian2" else 0.0)
    return SolveResult(
        path=path,
        objective=objective,
        lp_bound=lp_bound,
        reused_peaks=reused,
        epsilons=epsilons,
        proven_optimal=proven,
        nodes_explored=nodes,
        variant=lp.variant,
    )


def _solve_variant(
    g: AssignmentGraph,
    variant: str,
    tol: Tolerances,
    backend: Backend | None,
    node_limit: int,
    exact: bool,
) -> SolveResult:
    lp = formulate(g, variant, tol)
    relaxed = solve_lp(lp, backend=backend)
    if relaxed.status in ("infeasible", "unbounded"):
        raise NoPathError(f"relaxation is {relaxed.status}")
    if not relaxed.ok:
        raise SolverError(f"relaxation failed with status {relaxed.status}")
    assert relaxed.objective is not None
    if is_integral(lp, relaxed):
        return _finish(g, lp, relaxed, relaxed.objective, True, 1, tol)
    if exact:
        result = branch_and_bound(lp, backend=backend, node_limit=node_limit)
    else:
        result = round_and_resolve(g, lp, relaxed, tol, backend, node_limit=node_limit)
    if result.solution is None:
        raise SolverError("no integral solution found within the node budget")
    return _finish(
        g, lp, result.solution, relaxed.objective, result.proven_optimal,
        result.nodes_explored, tol,
    )


def solve_lian1(
    g: AssignmentGraph,
    tol: Tolerances,
    backend: Backend | None = None,
    node_limit: int = 100_000,
) -> SolveResult:
    """Hard utilization: relaxation, then exact re-solve on its support."""
    return _solve_variant(g, "lian1", tol, backend, node_limit, exact=False)


def solve_lian2(
    g: AssignmentGraph,
    tol: Tolerances,
    backend: Backend | None = None,
    node_limit: int = 100_000,
) -> SolveResult:
    """Soft utilization: peak reuse allowed at ``lambda`` per extra use."""
    return _solve_variant(g, "lian2", tol, backend, node_limit, exact=False)


def solve_ilp(
    g: AssignmentGraph,
    tol: Tolerances,
    backend: Backend | None = None,
    node_limit: int = 100_000,
) -> SolveResult:
    """Exact branch and bound on the full hard-utilization program."""
    return _solve_variant(g, "lian1", tol, backend, node_limit, exact=True)


# ---------------------------------------------------------------------------
# export


def lp_to_text(lp: LinearProgram, integral: bool = False) -> str:
    """Render the program in CPLEX LP text format."""
    lines = ["Minimize", " obj: " + _linear_expr(
        {i: c for i, c in enumerate(lp.costs) if c != 0.0}, lp
    )]
    lines.append("Subject To")
    for row in lp.rows:
        op = "=" if row.kind == "eq" else "<="
        lines.append(f" {row.name}: {_linear_expr(row.coeffs, lp)} {op} {row.rhs:.17g}")
    lines.append("Bounds")
    for idx, (lo, hi) in enumerate(lp.bounds):
        hi_txt = "+inf" if hi is None else f"{hi:.17g}"
        lines.append(f" {lo:.17g} <= {lp.var_names[idx]} <= {hi_txt}")
    if integral and lp.edge_vars:
        lines.append("General")
        lines.append(" " + " ".join(lp.var_names[: len(lp.edge_vars)]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _linear_expr(coeffs: Mapping[int, float], lp: LinearProgram) -> str:
    terms = []
    for idx, coeff in sorted(coeffs.items()):
        sign = "-" if coeff < 0 else "+"
        prefix = sign if terms or sign == "-" else ""
        terms.append(f"{prefix} {abs(coeff):.17g} {lp.var_names[idx]}".strip())
    return " ".join(terms) if terms else "0"


def export_lp(lp: LinearProgram, path: str | Path, integral: bool = False) -> None:
    Path(path).write_text(lp_to_text(lp, integral), encoding="utf-8")
