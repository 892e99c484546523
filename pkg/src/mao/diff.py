"""Graph edit distance between flattened process graphs.

The distance is the cost of the best partial node mapping between two
graphs: label substitutions plus deletions, insertions, and unpreserved
edges on both sides.  An exhaustive branch-and-bound oracle handles small
instances; four metaheuristics (Greedy, TabuSearch, Ants,
SimulatedAnnealing) handle arbitrary sizes.  Every solver is deterministic
for a fixed (inputs, params, seed); each draws from its own RNG stream so
results do not depend on scheduling.

The cost weights and the Levenshtein label similarity are centralized in
:class:`CostModel` and configurable; the defaults are w_del = w_ins = 1.0,
w_edge = 0.5.
"""

from __future__ import annotations

import json
import math
import random
import zlib
from dataclasses import dataclass
from statistics import fmean
from typing import Callable, Optional

from .graph import ACTIVITY, FlatGraph, FlatNode

ALGORITHMS = ("Greedy", "TabuSearch", "Ants", "SimulatedAnnealing")

_EPS = 1e-12


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(
                min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
            )
        prev = cur
    return prev[-1]


def label_similarity(a: str, b: str) -> float:
    """Normalized Levenshtein similarity in [0, 1]; two empty labels match."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


@dataclass(frozen=True)
class CostModel:
    w_del: float = 1.0
    w_ins: float = 1.0
    w_edge: float = 0.5
    # custom substitution cost over same-kind node pairs; must stay within
    # [0, w_del + w_ins] or mappings can beat the empty mapping unfairly
    substitution: Optional[Callable[[FlatNode, FlatNode], float]] = None

    def sub(self, n1: FlatNode, n2: FlatNode) -> float:
        if n1.kind_key != n2.kind_key:
            raise ValueError(
                f"substitution between different kinds: {n1.kind_key} vs"
                f" {n2.kind_key}"
            )
        if self.substitution is not None:
            return self.substitution(n1, n2)
        if n1.kind == ACTIVITY:
            sim = label_similarity(n1.label or "", n2.label or "")
            return (self.w_del + self.w_ins) * (1.0 - sim)
        return 0.0


@dataclass(frozen=True)
class SolverParams:
    tabu_tenure: int = 7
    tabu_iters: int = 200
    sa_t0_samples: int = 100
    sa_epoch: int = 100
    sa_cooling: float = 0.95
    sa_min_temp: float = 1e-3
    sa_stagnant_epochs: int = 50
    ants: int = 20
    ant_iters: int = 100
    evaporation: float = 0.1
    pheromone_power: float = 1.0
    heuristic_power: float = 2.0
    ant_stagnation: int = 30  # extra convergence cutoff, iterations


@dataclass(frozen=True)
class EditMapping:
    """Injective partial same-kind map from g1 node ids to g2 node ids."""

    pairs: tuple[tuple[str, str], ...]

    def __init__(self, pairs):
        object.__setattr__(self, "pairs", tuple(sorted(tuple(p) for p in pairs)))

    def as_dict(self) -> dict:
        return dict(self.pairs)

    def check(self, g1: FlatGraph, g2: FlatGraph) -> None:
        fwd: dict = {}
        rev: dict = {}
        by1 = {n.id: n for n in g1.nodes}
        by2 = {n.id: n for n in g2.nodes}
        for a, b in self.pairs:
            if a not in by1 or b not in by2:
                raise ValueError(f"mapping pair ({a!r}, {b!r}) references unknown node")
            if a in fwd or b in rev:
                raise ValueError(f"mapping is not injective at ({a!r}, {b!r})")
            if by1[a].kind_key != by2[b].kind_key:
                raise ValueError(
                    f"mapping pairs different kinds: {a!r} is {by1[a].kind_key},"
                    f" {b!r} is {by2[b].kind_key}"
                )
            fwd[a] = b
            rev[b] = a


@dataclass(frozen=True)
class DiffResult:
    distance: float
    mapping: EditMapping
    breakdown: dict  # substitution / deletion / insertion / edge
    algorithm: str
    seed: int
    iterations: int

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "algorithm": self.algorithm,
            "seed": self.seed,
            "breakdown": {
                "substitution": self.breakdown["substitution"],
                "deletion": self.breakdown["deletion"],
                "insertion": self.breakdown["insertion"],
                "edge": self.breakdown["edge"],
            },
            "mapping": [[a, b] for a, b in self.mapping.pairs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


class SizeExceeded(ValueError):
    """Input too large for the exhaustive oracle."""


def mapping_cost(
    g1: FlatGraph,
    g2: FlatGraph,
    mapping: EditMapping,
    cost: Optional[CostModel] = None,
    algorithm: str = "Mapping",
    seed: int = 0,
    iterations: int = 0,
) -> DiffResult:
    """Evaluate a mapping: substitutions + deletions + insertions + edges.

    An edge (u, v) of g1 is preserved iff both endpoints are mapped and
    (m(u), m(v)) is an edge of g2; unpreserved edges on either side cost
    w_edge each.  Invalid mappings are rejected.
    """
    c = cost or CostModel()
    mapping.check(g1, g2)
    fwd = mapping.as_dict()
    rev = {b: a for a, b in fwd.items()}
    by1 = {n.id: n for n in g1.nodes}
    by2 = {n.id: n for n in g2.nodes}

    substitution = sum(c.sub(by1[a], by2[b]) for a, b in mapping.pairs)
    deletion = c.w_del * (len(g1.nodes) - len(mapping.pairs))
    insertion = c.w_ins * (len(g2.nodes) - len(mapping.pairs))
    unpreserved = 0
    for a, b in g1.edges:
        if a not in fwd or b not in fwd or (fwd[a], fwd[b]) not in g2.edges:
            unpreserved += 1
    for a, b in g2.edges:
        if a not in rev or b not in rev or (rev[a], rev[b]) not in g1.edges:
            unpreserved += 1
    edge = c.w_edge * unpreserved
    breakdown = {
        "substitution": substitution,
        "deletion": deletion,
        "insertion": insertion,
        "edge": edge,
    }
    distance = substitution + deletion + insertion + edge
    return DiffResult(distance, mapping, breakdown, algorithm, seed, iterations)


class _Engine:
    """Shared incremental-cost machinery for all solvers."""

    def __init__(self, g1: FlatGraph, g2: FlatGraph, cost: CostModel):
        self.g1, self.g2, self.cost = g1, g2, cost
        self.by1 = {n.id: n for n in g1.nodes}
        self.by2 = {n.id: n for n in g2.nodes}
        self.out1: dict = {n.id: [] for n in g1.nodes}
        self.in1: dict = {n.id: [] for n in g1.nodes}
        for a, b in sorted(g1.edges):
            self.out1[a].append(b)
            self.in1[b].append(a)
        self.e2 = g2.edges
        # same-kind candidate id lists, sorted for deterministic iteration
        kinds1: dict = {}
        kinds2: dict = {}
        for n in g1.nodes:
            kinds1.setdefault(n.kind_key, []).append(n.id)
        for n in g2.nodes:
            kinds2.setdefault(n.kind_key, []).append(n.id)
        self.candidates = []
        for key in sorted(kinds1, key=repr):
            if key in kinds2:
                self.candidates.append((sorted(kinds1[key]), sorted(kinds2[key])))
        self.base = (
            cost.w_del * len(g1.nodes)
            + cost.w_ins * len(g2.nodes)
            + cost.w_edge * (len(g1.edges) + len(g2.edges))
        )
        self.anchors = (
            (g1.start_id, g2.start_id),
            (g1.end_id, g2.end_id),
        )
        self._subcache: dict = {}

    def sub(self, u: str, v: str) -> float:
        key = (u, v)
        got = self._subcache.get(key)
        if got is None:
            got = self.cost.sub(self.by1[u], self.by2[v])
            self._subcache[key] = got
        return got

    def preserved(self, u: str, v: str, fwd: dict, exclude: str = "") -> int:
        """Edges incident to u preserved if u maps to v, given fwd for others."""
        count = 0
        for x in self.out1[u]:
            if x != u and x != exclude and x in fwd and (v, fwd[x]) in self.e2:
                count += 1
        for x in self.in1[u]:
            if x != u and x != exclude and x in fwd and (fwd[x], v) in self.e2:
                count += 1
        return count

    def add_delta(self, u: str, v: str, fwd: dict) -> float:
        both = self.cost.w_del + self.cost.w_ins
        return (
            self.sub(u, v)
            - both
            - 2.0 * self.cost.w_edge * self.preserved(u, v, fwd)
        )

    def remove_delta(self, u: str, v: str, fwd: dict) -> float:
        both = self.cost.w_del + self.cost.w_ins
        return (
            -self.sub(u, v)
            + both
            + 2.0 * self.cost.w_edge * self.preserved(u, v, fwd)
        )

    def anchored_state(self) -> tuple[dict, dict, float]:
        fwd: dict = {}
        rev: dict = {}
        cost = self.base
        for u, v in self.anchors:
            cost += self.add_delta(u, v, fwd)
            fwd[u] = v
            rev[v] = u
        return fwd, rev, cost

    def result(
        self, fwd: dict, algorithm: str, seed: int, iterations: int
    ) -> DiffResult:
        mapping = EditMapping(tuple(fwd.items()))
        return mapping_cost(
            self.g1,
            self.g2,
            mapping,
            self.cost,
            algorithm=algorithm,
            seed=seed,
            iterations=iterations,
        )


def _greedy_mapping(eng: _Engine) -> tuple[dict, dict, float, int]:
    """Anchored greedy descent: repeatedly add the most improving pair."""
    fwd, rev, cost = eng.anchored_state()
    iterations = 0
    while True:
        best = None
        for ids1, ids2 in eng.candidates:
            for u in ids1:
                if u in fwd:
                    continue
                for v in ids2:
                    if v in rev:
                        continue
                    key = (eng.add_delta(u, v, fwd), u, v)
                    if best is None or key < best:
                        best = key
        if best is None or best[0] >= -_EPS:
            return fwd, rev, cost, iterations
        delta, u, v = best
        fwd[u] = v
        rev[v] = u
        cost += delta
        iterations += 1


# neighborhood move encodings: ("add", u, v), ("remove", u, v),
# ("image", u, v, v2) re-images u, ("source", u, v, u2) re-sources v
def _list_moves(eng: _Engine, fwd: dict, rev: dict) -> list:
    anchors1 = {a for a, _ in eng.anchors}
    moves = []
    for ids1, ids2 in eng.candidates:
        free1 = [u for u in ids1 if u not in fwd]
        free2 = [v for v in ids2 if v not in rev]
        for u in free1:
            for v in free2:
                moves.append((eng.add_delta(u, v, fwd), ("add", u, v)))
        for u in ids1:
            if u not in fwd or u in anchors1:
                continue
            v = fwd[u]
            base = eng.remove_delta(u, v, fwd)
            moves.append((base, ("remove", u, v)))
            for v2 in free2:
                delta = (
                    -eng.sub(u, v)
                    + eng.sub(u, v2)
                    + 2.0
                    * eng.cost.w_edge
                    * (eng.preserved(u, v, fwd) - eng.preserved(u, v2, fwd))
                )
                moves.append((delta, ("image", u, v, v2)))
            for u2 in free1:
                delta = (
                    -eng.sub(u, v)
                    + eng.sub(u2, v)
                    + 2.0
                    * eng.cost.w_edge
                    * (
                        eng.preserved(u, v, fwd)
                        - eng.preserved(u2, v, fwd, exclude=u)
                    )
                )
                moves.append((delta, ("source", u, v, u2)))
    moves.sort(key=lambda m: (m[0],) + m[1])
    return moves


def _apply_move(move: tuple, fwd: dict, rev: dict) -> tuple:
    """Apply a move; returns the pairs it touched (for the tabu list)."""
    kind = move[0]
    if kind == "add":
        _, u, v = move
        fwd[u] = v
        rev[v] = u
        return ((u, v),)
    if kind == "remove":
        _, u, v = move
        del fwd[u]
        del rev[v]
        return ((u, v),)
    if kind == "image":
        _, u, v, v2 = move
        del rev[v]
        fwd[u] = v2
        rev[v2] = u
        return ((u, v), (u, v2))
    _, u, v, u2 = move
    del fwd[u]
    fwd[u2] = v
    rev[v] = u2
    return ((u, v), (u2, v))


def _solve_tabu(eng: _Engine, seed: int, params: SolverParams, rng) -> tuple:
    fwd, rev, cost, _ = _greedy_mapping(eng)
    best_fwd, best_cost = dict(fwd), cost
    if best_cost <= _EPS:
        return best_fwd, 0
    tabu: dict = {}
    iterations = 0
    for it in range(params.tabu_iters):
        iterations = it + 1
        chosen = None
        for delta, move in _list_moves(eng, fwd, rev):
            pairs = _touched(move)
            is_tabu = any(tabu.get(p, -1) >= it for p in pairs)
            if is_tabu and not cost + delta < best_cost - _EPS:
                continue
            chosen = (delta, move)
            break
        if chosen is None:
            break
        delta, move = chosen
        for p in _apply_move(move, fwd, rev):
            tabu[p] = it + params.tabu_tenure
        cost += delta
        if cost < best_cost - _EPS:
            best_cost, best_fwd = cost, dict(fwd)
            if best_cost <= _EPS:
                break
    return best_fwd, iterations


def _touched(move: tuple) -> tuple:
    kind = move[0]
    if kind in ("add", "remove"):
        return ((move[1], move[2]),)
    if kind == "image":
        return ((move[1], move[2]), (move[1], move[3]))
    return ((move[1], move[2]), (move[3], move[2]))


def _solve_annealing(eng: _Engine, seed: int, params: SolverParams, rng) -> tuple:
    fwd, rev, cost, _ = _greedy_mapping(eng)
    best_fwd, best_cost = dict(fwd), cost
    if best_cost <= _EPS:
        return best_fwd, 0
    moves = _list_moves(eng, fwd, rev)
    if not moves:
        return best_fwd, 0
    samples = [abs(rng.choice(moves)[0]) for _ in range(params.sa_t0_samples)]
    temp = max(fmean(samples), params.sa_min_temp)
    stagnant = 0
    iterations = 0
    while temp >= params.sa_min_temp and stagnant < params.sa_stagnant_epochs:
        improved = False
        for _ in range(params.sa_epoch):
            moves = _list_moves(eng, fwd, rev)
            if not moves:
                break
            delta, move = rng.choice(moves)
            iterations += 1
            if delta > _EPS and rng.random() >= math.exp(-delta / temp):
                continue
            _apply_move(move, fwd, rev)
            cost += delta
            if cost < best_cost - _EPS:
                best_cost, best_fwd = cost, dict(fwd)
                improved = True
                if best_cost <= _EPS:
                    return best_fwd, iterations
        temp *= params.sa_cooling
        stagnant = 0 if improved else stagnant + 1
    return best_fwd, iterations


def _solve_ants(eng: _Engine, seed: int, params: SolverParams, rng) -> tuple:
    greedy_fwd, _, greedy_cost, _ = _greedy_mapping(eng)
    best_fwd, best_cost = dict(greedy_fwd), greedy_cost
    if best_cost <= _EPS:
        return best_fwd, 0
    tau: dict = {}
    for ids1, ids2 in eng.candidates:
        for u in ids1:
            for v in ids2:
                tau[(u, v)] = 1.0
    stagnant = 0
    iterations = 0
    for it in range(params.ant_iters):
        iterations = it + 1
        improved = False
        for _ in range(params.ants):
            fwd, rev, cost = eng.anchored_state()
            while True:
                cands = []
                total = 0.0
                for ids1, ids2 in eng.candidates:
                    for u in ids1:
                        if u in fwd:
                            continue
                        for v in ids2:
                            if v in rev:
                                continue
                            delta = eng.add_delta(u, v, fwd)
                            if delta >= -_EPS:
                                continue
                            # the heuristic term is defined for nonnegative
                            # marginals; improving moves clamp to weight 1
                            heur = 1.0 / (1.0 + max(0.0, delta))
                            weight = (
                                tau[(u, v)] ** params.pheromone_power
                                * heur ** params.heuristic_power
                            )
                            cands.append((u, v, delta, weight))
                            total += weight
                if not cands:
                    break
                pick = rng.random() * total
                acc = 0.0
                chosen = cands[-1]
                for cand in cands:
                    acc += cand[3]
                    if pick < acc:
                        chosen = cand
                        break
                u, v, delta, _w = chosen
                fwd[u] = v
                rev[v] = u
                cost += delta
            if cost < best_cost - _EPS:
                best_cost, best_fwd = cost, dict(fwd)
                improved = True
                if best_cost <= _EPS:
                    return best_fwd, iterations
        for key in tau:
            tau[key] *= 1.0 - params.evaporation
        deposit = 1.0 / best_cost
        for pair in best_fwd.items():
            if pair in tau:
                tau[pair] += deposit
        stagnant = 0 if improved else stagnant + 1
        if stagnant >= params.ant_stagnation:
            break
    return best_fwd, iterations


def solve(
    g1: FlatGraph,
    g2: FlatGraph,
    cost: Optional[CostModel] = None,
    algorithm: str = "Greedy",
    params: Optional[SolverParams] = None,
    seed: int = 0,
) -> DiffResult:
    """Run one metaheuristic; bit-identical output for a fixed seed.

    Each algorithm owns an RNG stream derived from seed XOR crc32(name), so
    suite results never depend on call order.  All solvers start from the
    anchored greedy incumbent and stop early on a perfect mapping.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}"
        )
    c = cost or CostModel()
    p = params or SolverParams()
    eng = _Engine(g1, g2, c)
    rng = random.Random(seed ^ zlib.crc32(algorithm.encode("ascii")))
    if algorithm == "Greedy":
        fwd, _, _, iterations = _greedy_mapping(eng)
    elif algorithm == "TabuSearch":
        fwd, iterations = _solve_tabu(eng, seed, p, rng)
    elif algorithm == "SimulatedAnnealing":
        fwd, iterations = _solve_annealing(eng, seed, p, rng)
    else:
        fwd, iterations = _solve_ants(eng, seed, p, rng)
    return eng.result(fwd, algorithm, seed, iterations)


def exact_ged(
    g1: FlatGraph,
    g2: FlatGraph,
    cost: Optional[CostModel] = None,
    cap: int = 10,
) -> DiffResult:
    """Exhaustive branch-and-bound optimum; capped at ``cap`` nodes per side."""
    if len(g1.nodes) > cap or len(g2.nodes) > cap:
        raise SizeExceeded(
            f"exact oracle is capped at {cap} nodes per side; got"
            f" {len(g1.nodes)} and {len(g2.nodes)}"
        )
    c = cost or CostModel()
    eng = _Engine(g1, g2, c)

    greedy_fwd, _, greedy_cost, _ = _greedy_mapping(eng)
    best = {"cost": greedy_cost, "fwd": dict(greedy_fwd), "expanded": 0}
    if greedy_cost <= _EPS:
        return eng.result(best["fwd"], "Exact", 0, 0)

    anchor1 = {a for a, _ in eng.anchors}
    anchor2 = {b for _, b in eng.anchors}
    free1 = sorted(n.id for n in g1.nodes if n.id not in anchor1)
    kind1 = {n.id: n.kind_key for n in g1.nodes}
    kind2 = {n.id: n.kind_key for n in g2.nodes}

    out1_all: dict = {n.id: [] for n in g1.nodes}
    in1_all: dict = {n.id: [] for n in g1.nodes}
    for a, b in sorted(g1.edges):
        out1_all[a].append(b)
        in1_all[b].append(a)
    out2_all: dict = {n.id: [] for n in g2.nodes}
    in2_all: dict = {n.id: [] for n in g2.nodes}
    for a, b in sorted(g2.edges):
        out2_all[a].append(b)
        in2_all[b].append(a)

    fwd: dict = {}
    rev: dict = {}
    deleted: set = set()

    def decide_delta_map(u: str, v: str) -> float:
        # edges are charged when their second endpoint gets decided; a
        # self-loop is its own second endpoint
        d = eng.sub(u, v)
        for x in out1_all[u]:
            if x == u:
                if (v, v) not in eng.e2:
                    d += c.w_edge
            elif x in deleted or (x in fwd and (v, fwd[x]) not in eng.e2):
                d += c.w_edge
        for x in in1_all[u]:
            if x == u:
                continue
            if x in deleted or (x in fwd and (fwd[x], v) not in eng.e2):
                d += c.w_edge
        for y in out2_all[v]:
            if y == v:
                if (u, u) not in g1.edges:
                    d += c.w_edge
            elif y in rev and (u, rev[y]) not in g1.edges:
                d += c.w_edge
        for y in in2_all[v]:
            if y == v:
                continue
            if y in rev and (rev[y], u) not in g1.edges:
                d += c.w_edge
        return d

    def decide_delta_del(u: str) -> float:
        d = c.w_del
        for x in out1_all[u]:
            if x == u or x in fwd or x in deleted:
                d += c.w_edge
        for x in in1_all[u]:
            if x == u:
                continue
            if x in fwd or x in deleted:
                d += c.w_edge
        return d

    def forced_bound(i: int) -> float:
        remaining: dict = {}
        for u in free1[i:]:
            remaining[kind1[u]] = remaining.get(kind1[u], 0) + 1
        avail: dict = {}
        for v, k in kind2.items():
            if v not in rev:
                avail[k] = avail.get(k, 0) + 1
        bound = 0.0
        for k in set(remaining) | set(avail):
            r, a = remaining.get(k, 0), avail.get(k, 0)
            if r > a:
                bound += c.w_del * (r - a)
            elif a > r:
                bound += c.w_ins * (a - r)
        return bound

    def finish_cost(decided: float) -> float:
        total = decided
        for v in kind2:
            if v not in rev:
                total += c.w_ins
        for a, b in eng.e2:
            if a not in rev or b not in rev:
                total += c.w_edge
        return total

    def recurse(i: int, decided: float) -> None:
        if decided + forced_bound(i) >= best["cost"] - _EPS:
            return
        if i == len(free1):
            total = finish_cost(decided)
            if total < best["cost"] - _EPS:
                best["cost"] = total
                best["fwd"] = dict(fwd)
            return
        best["expanded"] += 1
        u = free1[i]
        options = []
        for v in sorted(kind2):
            if v not in rev and kind2[v] == kind1[u]:
                options.append((decide_delta_map(u, v), 0, v))
        options.append((decide_delta_del(u), 1, ""))
        options.sort()
        for delta, is_del, v in options:
            if is_del:
                deleted.add(u)
                recurse(i + 1, decided + delta)
                deleted.discard(u)
            else:
                fwd[u] = v
                rev[v] = u
                recurse(i + 1, decided + delta)
                del fwd[u]
                del rev[v]

    start = 0.0
    for u, v in eng.anchors:
        start += decide_delta_map(u, v)
        fwd[u] = v
        rev[v] = u
    recurse(0, start)
    return eng.result(best["fwd"], "Exact", 0, best["expanded"])


@dataclass(frozen=True)
class DistanceSuite:
    """All four solver results for one pair, plus their mean."""

    results: dict

    @property
    def benchmark(self) -> float:
        return fmean(r.distance for r in self.results.values())


def distance_suite(
    g1: FlatGraph,
    g2: FlatGraph,
    cost: Optional[CostModel] = None,
    seed: int = 0,
    params: Optional[SolverParams] = None,
) -> DistanceSuite:
    """Run all four solvers on one pair; the mean distance is the benchmark."""
    results = {
        name: solve(g1, g2, cost, algorithm=name, params=params, seed=seed)
        for name in ALGORITHMS
    }
    return DistanceSuite(results)
