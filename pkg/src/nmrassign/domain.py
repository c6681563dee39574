"""Core data types, validation, and file formats for assignment datasets.

Frequencies are chemical shifts in ppm. All values are immutable after
construction and safe to share across threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
DIMENSIONS = ("H", "N", "C")

#: roles a spin system may carry
SPIN_ROLES = ("N", "HN", "CA", "CB", "CA_prev", "CB_prev")
#: atom roles of a single residue, as referenced by priors
BASE_ROLES = ("N", "HN", "CA", "CB", "CO")

PREV_SUFFIX = "_prev"


class NmrAssignError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateIdError(NmrAssignError):
    pass


class UnknownResidueTypeError(NmrAssignError):
    pass


class NonPositiveSigmaError(NmrAssignError):
    pass


class PriorMissingError(NmrAssignError):
    pass


class MissingReferenceError(NmrAssignError):
    pass


def is_prev(role: str) -> bool:
    return role.endswith(PREV_SUFFIX)


def base_role(role: str) -> str:
    """Strip the previous-residue marker: CA_prev -> CA."""
    return role[: -len(PREV_SUFFIX)] if is_prev(role) else role


def dimension_of(role: str) -> str:
    """Spectral dimension in which observations of this role appear."""
    b = base_role(role)
    if b == "HN":
        return "H"
    if b == "N":
        return "N"
    return "C"


@dataclass(frozen=True)
class Peak:
    """A measured resonance peak: 2 or 3 coordinates in ppm.

    ``phase`` is the peak sign: +1, -1, or 0 when unknown.
    """

    peak_id: str
    spectrum_id: str
    coords: tuple[tuple[str, float], ...]
    phase: int = 0

    def __post_init__(self) -> None:
        labels = [lab for lab, _ in self.coords]
        if not 2 <= len(labels) <= 3:
            raise NmrAssignError(f"peak {self.peak_id}: needs 2 or 3 coordinates")
        if len(set(labels)) != len(labels):
            raise NmrAssignError(f"peak {self.peak_id}: duplicate dimension labels")
        for lab, value in self.coords:
            if lab not in DIMENSIONS:
                raise NmrAssignError(f"peak {self.peak_id}: unknown dimension {lab!r}")
            if not math.isfinite(value):
                raise NmrAssignError(f"peak {self.peak_id}: non-finite coordinate")
        if self.phase not in (-1, 0, 1):
            raise NmrAssignError(f"peak {self.peak_id}: phase must be -1, 0 or +1")

    def coord(self, label: str) -> float | None:
        for lab, value in self.coords:
            if lab == label:
                return value
        return None


@dataclass(frozen=True)
class SpinSystem:
    """Consensus shifts for one residue and the previous residue's carbons."""

    system_id: str
    shifts: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "shifts", dict(self.shifts))
        for role, value in self.shifts.items():
            if role not in SPIN_ROLES:
                raise NmrAssignError(f"spin {self.system_id}: unknown role {role!r}")
            if not math.isfinite(value):
                raise NmrAssignError(f"spin {self.system_id}: non-finite shift for {role}")
        if "N" not in self.shifts and "HN" not in self.shifts:
            raise NmrAssignError(f"spin {self.system_id}: needs at least one of N, HN")


@dataclass(frozen=True)
class ProteinSequence:
    """Residue types as one-letter codes, 1-indexed via residue_type()."""

    residues: str

    def __post_init__(self) -> None:
        if len(self.residues) < 1:
            raise NmrAssignError("sequence must contain at least one residue")
        for code in self.residues:
            if code not in AMINO_ACIDS:
                raise UnknownResidueTypeError(f"unknown residue type {code!r}")

    def __len__(self) -> int:
        return len(self.residues)

    def residue_type(self, k: int) -> str:
        if not 1 <= k <= len(self.residues):
            raise IndexError(f"residue index {k} out of range")
        return self.residues[k - 1]


@dataclass(frozen=True)
class Prior:
    """Gaussian prior (mean, std) on one atom's chemical shift, in ppm."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise NonPositiveSigmaError(f"prior std must be positive, got {self.std}")


class PriorTable:
    """Per-(residue type, atom role) Gaussian priors plus per-spectrum noise.

    An atom entry of None marks a chemically absent atom (e.g. Gly CB, the
    Pro amide pair). Noise is keyed by spectrum id, then by atom role with a
    fallback to the dimension label.
    """

    def __init__(
        self,
        atoms: Mapping[str, Mapping[str, Prior | None]],
        noise: Mapping[str, Mapping[str, float]],
    ) -> None:
        self.atoms = {rt: dict(entries) for rt, entries in atoms.items()}
        self.noise = {sp: dict(entries) for sp, entries in noise.items()}
        for sp, entries in self.noise.items():
            for key, sigma in entries.items():
                if not sigma > 0:
                    raise NonPositiveSigmaError(f"noise[{sp}][{key}] must be positive")

    def prior(self, residue_type: str, role: str) -> Prior | None:
        """Prior for an atom role; None when the atom is absent."""
        try:
            entries = self.atoms[residue_type]
        except KeyError:
            raise PriorMissingError(f"no priors for residue type {residue_type!r}")
        role = base_role(role)
        if role not in entries:
            raise PriorMissingError(f"no prior entry for ({residue_type}, {role})")
        return entries[role]

    def noise_for(self, spectrum_id: str, role_or_dim: str) -> float:
        try:
            entries = self.noise[spectrum_id]
        except KeyError:
            raise PriorMissingError(f"no noise entries for spectrum {spectrum_id!r}")
        key = base_role(role_or_dim)
        if key in entries:
            return entries[key]
        dim = dimension_of(key) if key not in DIMENSIONS else key
        if dim in entries:
            return entries[dim]
        raise PriorMissingError(f"no noise entry for ({spectrum_id}, {role_or_dim})")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PriorTable)
            and self.atoms == other.atoms
            and self.noise == other.noise
        )


@dataclass(frozen=True)
class Tolerances:
    """Matching windows and thresholds; all strictly positive.

    delta1/delta2/delta3: H/N/C matching windows in ppm. delta: typing
    threshold multiplier. lam: peak-reuse penalty. round_eps: cutoff below
    which a fractional LP value is treated as zero.
    """

    delta1: float = 0.03
    delta2: float = 0.3
    delta3: float = 0.3
    delta: float = 3.0
    lam: float = 5.0
    round_eps: float = 1e-6

    def __post_init__(self) -> None:
        for name in ("delta1", "delta2", "delta3", "delta", "lam", "round_eps"):
            if not getattr(self, name) > 0:
                raise NmrAssignError(f"tolerance {name} must be strictly positive")


@dataclass(frozen=True)
class Observation:
    """One measured value attributed to an atom role."""

    role: str
    value: float
    peak_id: str
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise NonPositiveSigmaError(f"observation sigma must be positive")


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    fatal: bool


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(issue.fatal for issue in self.issues)

    def add(self, code: str, message: str, fatal: bool) -> None:
        self.issues.append(Issue(code, message, fatal))

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.fatal]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if not i.fatal]


def validate_dataset(
    priors: PriorTable,
    seq: ProteinSequence,
    peaks: Sequence[Peak] | None = None,
    spins: Sequence[SpinSystem] | None = None,
) -> ValidationReport:
    """Check a dataset for fatal problems before any processing.

    Exactly one of peaks/spins must be given. The report is a pure function
    of the inputs.
    """
    if (peaks is None) == (spins is None):
        raise ValueError("exactly one of peaks or spins must be supplied")
    report = ValidationReport()

    for code in sorted(set(seq.residues)):
        if code not in priors.atoms:
            report.add("PriorMissing", f"residue type {code!r} absent from priors", fatal=True)
        else:
            for role in BASE_ROLES:
                if role not in priors.atoms[code]:
                    report.add(
                        "MissingPriorEntry",
                        f"no prior entry for ({code}, {role})",
                        fatal=False,
                    )

    records: Iterable[tuple[str, str]]
    if peaks is not None:
        if len(peaks) == 0:
            report.add("EmptyDataset", "0 peaks", fatal=False)
        records = [(p.peak_id, "peak") for p in peaks]
        for p in peaks:
            if p.coord("H") is None and p.coord("N") is None:
                report.add(
                    "MalformedCoordinates",
                    f"peak {p.peak_id} carries neither H nor N",
                    fatal=False,
                )
    else:
        assert spins is not None
        if len(spins) == 0:
            report.add("EmptyDataset", "0 spin systems", fatal=False)
        records = [(s.system_id, "spin system") for s in spins]

    seen: set[str] = set()
    for rec_id, kind in records:
        if rec_id in seen:
            report.add("DuplicateId", f"duplicate {kind} id {rec_id!r}", fatal=True)
        seen.add(rec_id)
    return report


# ---------------------------------------------------------------------------
# file formats

_MISSING = "-"


def _fmt(value: float | None) -> str:
    return _MISSING if value is None else format(value, ".6f")


def write_peaks(peaks: Sequence[Peak], path: str | Path) -> None:
    """Tab-separated: peak_id, spectrum_id, H, N, C ('-' if 2-D), phase."""
    lines = ["# peak_id\tspectrum_id\tH\tN\tC\tphase"]
    for p in peaks:
        lines.append(
            "\t".join(
                [
                    p.peak_id,
                    p.spectrum_id,
                    _fmt(p.coord("H")),
                    _fmt(p.coord("N")),
                    _fmt(p.coord("C")),
                    str(p.phase),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_peaks(path: str | Path) -> list[Peak]:
    peaks = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < 4:
            raise NmrAssignError(f"malformed peak line: {raw!r}")
        peak_id, spectrum_id, h, n = fields[:4]
        coords = []
        if h != _MISSING:
            coords.append(("H", float(h)))
        if n != _MISSING:
            coords.append(("N", float(n)))
        if len(fields) > 4 and fields[4] != _MISSING:
            coords.append(("C", float(fields[4])))
        phase = int(fields[5]) if len(fields) > 5 and fields[5] != _MISSING else 0
        peaks.append(Peak(peak_id, spectrum_id, tuple(coords), phase))
    return peaks


def write_spins(spins: Sequence[SpinSystem], path: str | Path) -> None:
    """Tab-separated: system_id, N, HN, CA, CB, CA_prev, CB_prev ('-' missing)."""
    lines = ["# system_id\t" + "\t".join(SPIN_ROLES)]
    for s in spins:
        lines.append(
            "\t".join([s.system_id] + [_fmt(s.shifts.get(role)) for role in SPIN_ROLES])
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_spins(path: str | Path) -> list[SpinSystem]:
    spins = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 1 + len(SPIN_ROLES):
            raise NmrAssignError(f"malformed spin line: {raw!r}")
        shifts = {
            role: float(value)
            for role, value in zip(SPIN_ROLES, fields[1:])
            if value != _MISSING
        }
        spins.append(SpinSystem(fields[0], shifts))
    return spins


def write_priors(priors: PriorTable, path: str | Path) -> None:
    doc = {
        "atoms": {
            rt: {
                role: (None if p is None else {"mean": p.mean, "std": p.std})
                for role, p in entries.items()
            }
            for rt, entries in priors.atoms.items()
        },
        "noise": priors.noise,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_priors(path: str | Path) -> PriorTable:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return priors_from_dict(doc)


def priors_from_dict(doc: Mapping) -> PriorTable:
    atoms = {
        rt: {
            role: (None if spec is None else Prior(spec["mean"], spec["std"]))
            for role, spec in entries.items()
        }
        for rt, entries in doc["atoms"].items()
    }
    return PriorTable(atoms, doc.get("noise", {}))


def write_tolerances(tol: Tolerances, path: str | Path) -> None:
    doc = {
        "delta1": tol.delta1,
        "delta2": tol.delta2,
        "delta3": tol.delta3,
        "delta": tol.delta,
        "lambda": tol.lam,
        "round_eps": tol.round_eps,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_tolerances(path: str | Path) -> Tolerances:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    defaults = Tolerances()
    return Tolerances(
        delta1=doc.get("delta1", defaults.delta1),
        delta2=doc.get("delta2", defaults.delta2),
        delta3=doc.get("delta3", defaults.delta3),
        delta=doc.get("delta", defaults.delta),
        lam=doc.get("lambda", defaults.lam),
        round_eps=doc.get("round_eps", defaults.round_eps),
    )
