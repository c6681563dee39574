"""High-level runs: simulate, assign, evaluate.

Each run writes machine-readable outputs into a directory. Wall-clock
timings go to a separate timings.json so everything else is byte-stable
under a fixed seed.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import evaluate as ev
from . import lp as lpmod
from .domain import (
    NmrAssignError,
    PriorTable,
    ProteinSequence,
    Tolerances,
    read_peaks,
    read_priors,
    read_spins,
    validate_dataset,
    write_peaks,
    write_spins,
)
from .experiments import (
    FULL_SET,
    canonical_name,
    expected_observation_counts,
    expected_pattern,
    spin_observation_counts,
)
from .graph import build_graph, export_graph, graph_stats
from .grouping import build_compatibility_graph, enumerate_groupings, spins_to_groupings
from .shortest_path import dp_shortest_path
from .simulate import (
    Reference,
    SimulationSpec,
    read_ground_truth,
    sample_reference,
    simulate_cisa,
    simulate_flya,
    write_ground_truth,
)

VARIANTS = ("dp", "ilp", "lian1", "lian2")


def bundled_priors() -> PriorTable:
    with resources.files("nmrassign.data").joinpath("priors.json").open("r") as fh:
        from .domain import priors_from_dict

        return priors_from_dict(json.load(fh))


def bundled_reference(name: str) -> Reference:
    with resources.files("nmrassign.data").joinpath(f"{name}.json").open("r") as fh:
        doc = json.load(fh)
    return Reference(
        ProteinSequence(doc["sequence"]),
        {int(k): v for k, v in doc["shifts"].items()},
    )


def load_sequence(spec: str) -> ProteinSequence:
    """A literal one-letter sequence, or a path to a file holding one."""
    path = Path(spec)
    if path.exists():
        lines = [
            line.strip()
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.startswith((">", "#"))
        ]
        return ProteinSequence("".join(lines))
    return ProteinSequence(spec)


def _write_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class Timer:
    stages: dict

    def __init__(self) -> None:
        self.stages = {}

    def stage(self, name: str):
        timer = self

        class _Stage:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()
                return self_inner

            def __exit__(self_inner, *exc):
                timer.stages[name] = time.perf_counter() - self_inner.t0
                return False

        return _Stage()

    def write(self, outdir: Path) -> None:
        _write_json({"seconds": self.stages}, outdir / "timings.json")


def run_simulate(
    outdir: str | Path,
    protocol: str,
    seq: ProteinSequence,
    priors: PriorTable,
    seed: int,
    noise: str = "low",
    reference: Reference | None = None,
    experiments=FULL_SET,
    deletion_rate: float = 0.0,
) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    timer = Timer()
    if reference is None:
        reference = sample_reference(seq, priors, seed)
    if protocol == "cisa":
        spec = SimulationSpec.cisa(noise, seed, deletion_rate)
        with timer.stage("simulate"):
            spins, gt = simulate_cisa(spec, seq, reference)
        write_spins(spins, outdir / "spins.tsv")
        summary = {"protocol": "cisa", "noise": noise, "records": len(spins)}
    elif protocol == "flya":
        spec = SimulationSpec.flya(seed, deletion_rate)
        with timer.stage("simulate"):
            peaks, gt = simulate_flya(spec, seq, reference, experiments)
        write_peaks(peaks, outdir / "peaks.tsv")
        summary = {"protocol": "flya", "records": len(peaks)}
    else:
        raise NmrAssignError(f"unknown protocol {protocol!r}")
    write_ground_truth(gt, outdir / "ground_truth.json")
    summary["residues"] = len(seq)
    _write_json(summary, outdir / "simulate_summary.json")
    timer.write(outdir)
    return summary


def run_assign(
    outdir: str | Path,
    dataset: str | Path,
    seq: ProteinSequence,
    priors: PriorTable,
    tol: Tolerances,
    variant: str = "lian1",
    kind: str | None = None,
    top_k: int | None = 20,
    threads: int = 1,
    backend: str = "bundled",
    node_limit: int = 100_000,
) -> dict:
    """Full assignment run; returns a summary including the exit status."""
    if variant not in VARIANTS:
        raise NmrAssignError(f"unknown variant {variant!r}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    timer = Timer()
    dataset = Path(dataset)
    if kind is None:
        kind = _sniff_kind(dataset)

    lp_backend = None
    if backend != "bundled":
        if not backend.startswith("external:"):
            raise NmrAssignError(f"unknown backend {backend!r}")
        lp_backend = lpmod.load_backend(backend.split(":", 1)[1])

    with timer.stage("load"):
        if kind == "spins":
            spins = read_spins(dataset)
            report = validate_dataset(priors, seq, spins=spins)
        else:
            peaks = read_peaks(dataset)
            report = validate_dataset(priors, seq, peaks=peaks)
    if not report.ok:
        messages = "; ".join(i.message for i in report.errors)
        raise NmrAssignError(f"dataset validation failed: {messages}")

    with timer.stage("group"):
        if kind == "spins":
            groupings = spins_to_groupings(spins, priors)
            expected = spin_observation_counts(priors)
        else:
            spectra = sorted(
                {canonical_name(p.spectrum_id) for p in peaks},
                key=lambda s: FULL_SET.index(s),
            )
            compat = build_compatibility_graph(peaks, tol)
            groupings = enumerate_groupings(
                compat, peaks, expected_pattern(spectra), top_k, priors, tol,
                workers=threads,
            )
            expected = expected_observation_counts(spectra, priors)

    with timer.stage("graph"):
        g = build_graph(groupings, seq, priors, tol, expected)
    _write_json(graph_stats(g), outdir / "graph_stats.json")

    with timer.stage("solve"):
        if variant == "dp":
            path = dp_shortest_path(g)
            counts = g.path_usage_counts(path.nodes)
            result = lpmod.SolveResult(
                path=path,
                objective=path.total_cost,
                lp_bound=path.total_cost,
                reused_peaks={p: c for p, c in sorted(counts.items()) if c >= 2},
                epsilons={},
                proven_optimal=True,
                nodes_explored=0,
                variant="dp",
            )
        elif variant == "ilp":
            result = lpmod.solve_ilp(g, tol, lp_backend, node_limit)
        elif variant == "lian1":
            result = lpmod.solve_lian1(g, tol, lp_backend, node_limit)
        else:
            result = lpmod.solve_lian2(g, tol, lp_backend, node_limit)

    assignment = ev.assignment_from_result(g, result)
    ev.write_assignment(assignment, outdir / "assignment.json")
    _write_json(
        {
            "variant": result.variant,
            "objective": result.objective,
            "lp_bound": result.lp_bound,
            "proven_optimal": result.proven_optimal,
            "nodes_explored": result.nodes_explored,
            "reused_peaks": result.reused_peaks,
            "epsilons": result.epsilons,
        },
        outdir / "lp_report.json",
    )
    _write_json({"rows": ev.diagnostics(assignment, g)}, outdir / "diagnostics.json")
    timer.write(outdir)
    return {
        "variant": result.variant,
        "objective": result.objective,
        "proven_optimal": result.proven_optimal,
        "assigned": sum(1 for r in assignment.residues if r.assigned_id is not None),
        "residues": len(seq),
    }


def _sniff_kind(path: Path) -> str:
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            if "system_id" in line:
                return "spins"
            if "peak_id" in line:
                return "peaks"
        break
    raise NmrAssignError(
        f"cannot infer dataset kind from {path}; pass kind explicitly"
    )


def run_evaluate(
    outdir: str | Path, assignment_path: str | Path, ground_truth_path: str | Path
) -> tuple[float, float]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    assignment = ev.read_assignment(assignment_path)
    gt = read_ground_truth(ground_truth_path)
    report = ev.score(assignment, gt)
    ev.write_report(report, outdir / "report.json")
    (outdir / "report.txt").write_text(ev.report_to_text(report), encoding="utf-8")
    return report.precision, report.recall


def run_graph_stats(
    outdir: str | Path,
    dataset: str | Path,
    seq: ProteinSequence,
    priors: PriorTable,
    tol: Tolerances,
    kind: str | None = None,
    top_k: int | None = 20,
    threads: int = 1,
    export: bool = False,
) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dataset = Path(dataset)
    if kind is None:
        kind = _sniff_kind(dataset)
    if kind == "spins":
        groupings = spins_to_groupings(read_spins(dataset), priors)
        expected = spin_observation_counts(priors)
    else:
        peaks = read_peaks(dataset)
        spectra = sorted(
            {canonical_name(p.spectrum_id) for p in peaks},
            key=lambda s: FULL_SET.index(s),
        )
        compat = build_compatibility_graph(peaks, tol)
        groupings = enumerate_groupings(
            compat, peaks, expected_pattern(spectra), top_k, priors, tol,
            workers=threads,
        )
        expected = expected_observation_counts(spectra, priors)
    g = build_graph(groupings, seq, priors, tol, expected)
    stats = graph_stats(g)
    _write_json(stats, outdir / "graph_stats.json")
    if export:
        export_graph(g, outdir / "graph.json")
    return stats


def load_priors(path: str | None) -> PriorTable:
    return bundled_priors() if path is None else read_priors(path)
