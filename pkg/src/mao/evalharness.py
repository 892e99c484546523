"""Dataset evaluation: distance statistics and surpass proportions.

A case directory holds one modeling scenario: the requirement text, a
reference model, optional human-made models, and candidate models to score.
Every entity is compared to the reference with the full four-algorithm
distance suite; the per-entity benchmark is the mean of the four distances.
Statistics are reported over humans when present (candidates otherwise),
and each candidate gets the fraction of humans it strictly surpasses.
"""

from __future__ import annotations

import json
import statistics
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .diff import ALGORITHMS, CostModel, SolverParams, distance_suite
from .dsl import parse
from .graph import FlatGraph, flatten
from .interop import import_xml


class CaseLayoutError(ValueError):
    """The case directory does not follow the expected layout."""


@dataclass(frozen=True)
class NamedGraph:
    name: str
    graph: FlatGraph


@dataclass(frozen=True)
class EvalCase:
    case_id: str
    requirement: str
    reference: FlatGraph
    humans: tuple[NamedGraph, ...]
    candidates: tuple[NamedGraph, ...]


@dataclass(frozen=True)
class DistanceStats:
    mean: float
    median: float
    min: float
    max: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "median": self.median,
            "min": self.min,
            "max": self.max,
        }


def stats(values) -> DistanceStats:
    """Mean/median/min/max; the median of an even count is the middle mean."""
    values = list(values)
    if not values:
        raise ValueError("stats of an empty list")
    return DistanceStats(
        mean=statistics.fmean(values),
        median=statistics.median(values),
        min=min(values),
        max=max(values),
    )


def surpass_proportion(candidate_distance: float, human_distances) -> float:
    """Fraction of humans strictly beaten; ties do not count as surpassing."""
    human_distances = list(human_distances)
    if not human_distances:
        raise ValueError("surpass proportion needs at least one human distance")
    beaten = sum(1 for h in human_distances if h > candidate_distance)
    return beaten / len(human_distances)


def load_graph(path) -> FlatGraph:
    """Read a flat graph from a `.bpmt` (parse + flatten) or `.bpmn` file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CaseLayoutError(f"{path}: {exc}")
    try:
        if path.suffix == ".bpmt":
            return flatten(parse(text))
        if path.suffix == ".bpmn":
            return import_xml(text).graph
    except ValueError as exc:
        raise CaseLayoutError(f"{path}: {exc}")
    raise CaseLayoutError(f"{path}: unsupported extension {path.suffix!r}")


def load_case(path) -> EvalCase:
    """Load a case directory.

    Layout: ``requirement.txt``, ``reference.bpmt`` or ``reference.bpmn``,
    ``humans/*.bpmn``, ``candidates/*.bpmt|*.bpmn``.  Humans are optional;
    without them the surpass metrics are unavailable.
    """
    root = Path(path)
    req_path = root / "requirement.txt"
    if not req_path.is_file():
        raise CaseLayoutError(f"{req_path}: missing requirement file")
    requirement = req_path.read_text(encoding="utf-8").strip()

    reference = None
    for candidate in (root / "reference.bpmt", root / "reference.bpmn"):
        if candidate.is_file():
            reference = load_graph(candidate)
            break
    if reference is None:
        raise CaseLayoutError(
            f"{root}: neither reference.bpmt nor reference.bpmn found"
        )

    humans = []
    humans_dir = root / "humans"
    if humans_dir.is_dir():
        for file in sorted(humans_dir.glob("*.bpmn")):
            humans.append(NamedGraph(file.stem, load_graph(file)))

    candidates = []
    cand_dir = root / "candidates"
    if cand_dir.is_dir():
        for file in sorted(cand_dir.iterdir()):
            if file.suffix in (".bpmt", ".bpmn"):
                candidates.append(NamedGraph(file.stem, load_graph(file)))

    return EvalCase(
        case_id=root.name,
        requirement=requirement,
        reference=reference,
        humans=tuple(humans),
        candidates=tuple(candidates),
    )


def _entity_seed(seed: int, group: str, name: str) -> int:
    return seed ^ zlib.crc32(f"{group}/{name}".encode("utf-8"))


@dataclass(frozen=True)
class EntityScores:
    name: str
    per_algorithm: dict  # algorithm -> distance
    benchmark: float  # mean of the four distances


@dataclass(frozen=True)
class EvalReport:
    case_id: str
    seed: int
    per_algorithm_stats: dict  # algorithm -> DistanceStats
    stats_over: str  # "humans" | "candidates"
    humans: tuple
    candidates: tuple
    surpass: dict  # candidate name -> fraction; empty without humans

    def to_dict(self) -> dict:
        rows = []
        for entity in self.candidates:
            row = {
                "name": entity.name,
                "benchmark": entity.benchmark,
                "per_algorithm": entity.per_algorithm,
            }
            if entity.name in self.surpass:
                row["surpass"] = self.surpass[entity.name]
            rows.append(row)
        return {
            "case": self.case_id,
            "seed": self.seed,
            "stats_over": self.stats_over,
            "per_algorithm_stats": {
                algo: s.to_dict() for algo, s in self.per_algorithm_stats.items()
            },
            "humans": [
                {
                    "name": h.name,
                    "benchmark": h.benchmark,
                    "per_algorithm": h.per_algorithm,
                }
                for h in self.humans
            ],
            "candidates": rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        lines = [f"Case: {self.case_id} (seed {self.seed})"]
        lines.append(f"Distance statistics over {self.stats_over}:")
        header = f"{'Algorithm':<20}{'Mean':>10}{'Median':>10}{'Min':>10}{'Max':>10}"
        lines.append(header)
        for algo in ALGORITHMS:
            if algo not in self.per_algorithm_stats:
                continue
            s = self.per_algorithm_stats[algo]
            lines.append(
                f"{algo:<20}{s.mean:>10.3f}{s.median:>10.3f}"
                f"{s.min:>10.3f}{s.max:>10.3f}"
            )
        if self.candidates:
            lines.append("")
            if self.surpass:
                lines.append(f"{'Candidate':<20}{'Benchmark':>12}{'Surpass':>10}")
            else:
                lines.append(f"{'Candidate':<20}{'Benchmark':>12}")
            for entity in self.candidates:
                row = f"{entity.name:<20}{entity.benchmark:>12.3f}"
                if entity.name in self.surpass:
                    row += f"{self.surpass[entity.name]:>10.3f}"
                lines.append(row)
        return "\n".join(lines) + "\n"


def _score(
    case: EvalCase,
    group: str,
    entity: NamedGraph,
    cost: Optional[CostModel],
    seed: int,
    params: Optional[SolverParams],
) -> EntityScores:
    try:
        suite = distance_suite(
            entity.graph,
            case.reference,
            cost,
            seed=_entity_seed(seed, group, entity.name),
            params=params,
        )
    except ValueError as exc:
        raise ValueError(f"{group}/{entity.name}: {exc}")
    per_algorithm = {
        algo: suite.results[algo].distance for algo in ALGORITHMS
    }
    return EntityScores(entity.name, per_algorithm, suite.benchmark)


def evaluate_case(
    case: EvalCase,
    cost: Optional[CostModel] = None,
    seed: int = 0,
    params: Optional[SolverParams] = None,
) -> EvalReport:
    """Score every human and candidate against the reference.

    Deterministic for a given seed: each entity derives its own RNG seed
    from its name, so scores do not depend on evaluation order.
    """
    humans = tuple(
        _score(case, "humans", h, cost, seed, params) for h in case.humans
    )
    candidates = tuple(
        _score(case, "candidates", c, cost, seed, params)
        for c in case.candidates
    )
    if humans:
        stats_over = "humans"
        basis = humans
    else:
        stats_over = "candidates"
        basis = candidates
    per_algorithm_stats = {}
    if basis:
        for algo in ALGORITHMS:
            per_algorithm_stats[algo] = stats(
                [e.per_algorithm[algo] for e in basis]
            )
    surpass = {}
    if humans:
        human_benchmarks = [h.benchmark for h in humans]
        for entity in candidates:
            surpass[entity.name] = surpass_proportion(
                entity.benchmark, human_benchmarks
            )
    return EvalReport(
        case_id=case.case_id,
        seed=seed,
        per_algorithm_stats=per_algorithm_stats,
        stats_over=stats_over,
        humans=humans,
        candidates=candidates,
        surpass=surpass,
    )
