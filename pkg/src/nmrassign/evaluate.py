"""Scoring assignments against ground truth.

Precision is correct-over-assigned and recall correct-over-assignable,
counted per residue. For spin-system input a residue is correct when the
assigned system id matches the generating residue; for peak-list input the
assigned grouping must contain exactly the peaks the residue generated.
Atom-level correctness gives partial credit per consensus shift.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .domain import NmrAssignError
from .graph import DUMMY, AssignmentGraph
from .lp import SolveResult
from .simulate import FLYA_BOUND, GroundTruth


class LengthMismatchError(NmrAssignError):
    pass


class PathNotInGraphError(NmrAssignError):
    pass


@dataclass(frozen=True)
class ResidueAssignment:
    residue: int
    #: grouping or spin-system id, None for a null (dummy) assignment
    assigned_id: str | None
    member_peaks: tuple[str, ...]
    #: role -> consensus shift, including previous-residue roles
    consensus: Mapping[str, float]
    edge_cost: float
    threshold: float
    reused_peaks: tuple[str, ...] = ()


@dataclass
class Assignment:
    sequence: str
    residues: list[ResidueAssignment]
    variant: str
    objective: float
    proven_optimal: bool
    path: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.residues) != len(self.sequence):
            raise LengthMismatchError("one residue assignment required per residue")


def assignment_from_result(g: AssignmentGraph, result: SolveResult) -> Assignment:
    residues = []
    for k in range(1, g.n + 1):
        node = g.node(k, result.path.nodes[k])
        if node.kind == DUMMY:
            residues.append(
                ResidueAssignment(k, None, (), {}, result.path.edge_costs[k], g.thresholds[k])
            )
            continue
        assert node.grouping is not None
        consensus = {
            role: sum(o.value for o in obs) / len(obs)
            for role, obs in sorted(node.grouping.consensus.items())
        }
        members = tuple(sorted(node.grouping.member_peaks))
        reused = tuple(p for p in members if p in result.reused_peaks)
        residues.append(
            ResidueAssignment(
                k,
                node.grouping.grouping_id,
                members,
                consensus,
                result.path.edge_costs[k],
                g.thresholds[k],
                reused,
            )
        )
    return Assignment(
        g.sequence.residues,
        residues,
        result.variant,
        result.objective,
        result.proven_optimal,
        result.path.nodes,
    )


@dataclass
class ScoreReport:
    m_assigned: int
    m_correct: int
    m_assignable: int
    #: residue -> "correct" | "wrong" | "unassigned" | "absent"
    verdicts: dict[int, str]
    flags: list[str] = field(default_factory=list)

    @property
    def precision(self) -> float:
        return self.m_correct / self.m_assigned if self.m_assigned else 0.0

    @property
    def recall(self) -> float:
        return self.m_correct / self.m_assignable if self.m_assignable else 0.0


def score(a: Assignment, gt: GroundTruth) -> ScoreReport:
    if len(a.sequence) != len(gt.sequence):
        raise LengthMismatchError(
            f"assignment covers {len(a.sequence)} residues, ground truth {len(gt.sequence)}"
        )
    m_assigned = m_correct = m_assignable = 0
    verdicts: dict[int, str] = {}
    for ra in a.residues:
        k = ra.residue
        if gt.kind == "spins":
            truth = gt.residue_to_id.get(k)
            assignable = truth is not None
            correct = ra.assigned_id is not None and ra.assigned_id == truth
        else:
            truth_peaks = frozenset(gt.residue_to_peaks.get(k, ()))
            assignable = bool(truth_peaks)
            correct = ra.assigned_id is not None and frozenset(ra.member_peaks) == truth_peaks
        if assignable:
            m_assignable += 1
        if ra.assigned_id is not None:
            m_assigned += 1
            if correct:
                m_correct += 1
                verdicts[k] = "correct"
            else:
                verdicts[k] = "wrong"
        else:
            verdicts[k] = "unassigned" if assignable else "absent"
    report = ScoreReport(m_assigned, m_correct, m_assignable, verdicts)
    if m_assigned == 0:
        report.flags.append("no residues assigned; precision reported as 0 by convention")
    return report


def atom_correctness(
    a: Assignment,
    gt: GroundTruth,
    bounds: Mapping[str, float] | None = None,
    roles: Sequence[str] = ("N", "HN", "CA", "CB", "CO"),
) -> tuple[float, int, int]:
    """(fraction, correct, total) of atoms placed within the noise bound.

    An atom counts when the reference defines it on an observable residue;
    it is correct when the assigned consensus estimate for its own residue
    sits within the per-dimension bound of the reference value.
    """
    bounds = dict(FLYA_BOUND if bounds is None else bounds)
    total = correct = 0
    for ra in a.residues:
        k = ra.residue
        if gt.kind == "peaks" and not gt.residue_to_peaks.get(k):
            continue
        if gt.kind == "spins" and gt.residue_to_id.get(k) is None:
            continue
        reference = gt.reference.get(k, {})
        for role in roles:
            if role not in reference:
                continue
            total += 1
            estimate = ra.consensus.get(role)
            if estimate is None:
                continue
            dim = "H" if role == "HN" else ("N" if role == "N" else "C")
            if abs(estimate - reference[role]) <= bounds[dim]:
                correct += 1
    return (correct / total if total else 0.0), correct, total


def diagnostics(a: Assignment, g: AssignmentGraph) -> list[dict]:
    """Per-residue cost table: cost, threshold, margin, reuse."""
    if len(a.path) != g.n + 2:
        raise PathNotInGraphError("path length does not match graph layers")
    for k in range(g.n + 1):
        if (a.path[k], a.path[k + 1]) not in g.edges[k]:
            raise PathNotInGraphError(f"path edge missing at layer {k}")
    rows = []
    for ra in a.residues:
        rows.append(
            {
                "residue": ra.residue,
                "type": a.sequence[ra.residue - 1],
                "assigned": ra.assigned_id,
                "cost": ra.edge_cost,
                "threshold": ra.threshold,
                "margin": ra.threshold - ra.edge_cost,
                "reused_peaks": list(ra.reused_peaks),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# serialization


def write_assignment(a: Assignment, path: str | Path) -> None:
    doc = {
        "sequence": a.sequence,
        "variant": a.variant,
        "objective": a.objective,
        "proven_optimal": a.proven_optimal,
        "path": list(a.path),
        "residues": [
            {
                "residue": ra.residue,
                "assigned": ra.assigned_id,
                "member_peaks": list(ra.member_peaks),
                "consensus": dict(ra.consensus),
                "cost": ra.edge_cost,
                "threshold": ra.threshold,
                "reused_peaks": list(ra.reused_peaks),
            }
            for ra in a.residues
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_assignment(path: str | Path) -> Assignment:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    residues = [
        ResidueAssignment(
            residue=r["residue"],
            assigned_id=r["assigned"],
            member_peaks=tuple(r["member_peaks"]),
            consensus=dict(r["consensus"]),
            edge_cost=r["cost"],
            threshold=r["threshold"],
            reused_peaks=tuple(r.get("reused_peaks", ())),
        )
        for r in doc["residues"]
    ]
    return Assignment(
        sequence=doc["sequence"],
        residues=residues,
        variant=doc["variant"],
        objective=doc["objective"],
        proven_optimal=doc["proven_optimal"],
        path=tuple(doc["path"]),
    )


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "m_assigned": report.m_assigned,
        "m_correct": report.m_correct,
        "m_assignable": report.m_assignable,
        "precision": report.precision,
        "recall": report.recall,
        "verdicts": {str(k): v for k, v in sorted(report.verdicts.items())},
        "flags": list(report.flags),
    }


def write_report(report: ScoreReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def report_to_text(report: ScoreReport) -> str:
    lines = [
        f"{'residue':>8}  verdict",
        "-" * 22,
    ]
    for k, verdict in sorted(report.verdicts.items()):
        lines.append(f"{k:>8}  {verdict}")
    lines.append("-" * 22)
    lines.append(
        f"assigned {report.m_assigned}  correct {report.m_correct}  "
        f"assignable {report.m_assignable}"
    )
    lines.append(f"precision {report.precision:.3f}  recall {report.recall:.3f}")
    for flag in report.flags:
        lines.append(f"note: {flag}")
    return "\n".join(lines) + "\n"
