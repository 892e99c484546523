"""Flattening between the block-structured tree and a flow-node graph.

The distance engine and the BPMN 2.0 interop both work on a flat directed
graph: explicit Start/End nodes, activities, and split/join pairs per
gateway.  ``flatten`` goes tree → graph; ``graph_to_model`` reconstructs the
tree and raises :class:`NonBlockStructured` for graphs that do not decompose
into nested single-entry single-exit regions (the only shape the tree can
express).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import Activity, Branch, Gateway, GatewayKind, ProcessModel
from .semlint import normalize_action

START = "start"
END = "end"
ACTIVITY = "activity"
SPLIT = "split"
JOIN = "join"


@dataclass(frozen=True)
class FlatNode:
    id: str
    kind: str  # start | end | activity | split | join
    label: Optional[str] = None  # normalized action, activities only
    gateway: Optional[GatewayKind] = None  # split/join only

    @property
    def kind_key(self) -> tuple:
        """Substitution compatibility key: kind plus gateway flavor."""
        return (self.kind, self.gateway)


@dataclass(frozen=True)
class FlatGraph:
    nodes: tuple[FlatNode, ...]
    edges: frozenset  # of (from_id, to_id)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> FlatNode:
        return self._by_id[node_id]

    def successors(self, node_id: str) -> list[str]:
        order = {n.id: i for i, n in enumerate(self.nodes)}
        return sorted(
            (b for a, b in self.edges if a == node_id), key=lambda x: order[x]
        )

    def predecessors(self, node_id: str) -> list[str]:
        order = {n.id: i for i, n in enumerate(self.nodes)}
        return sorted(
            (a for a, b in self.edges if b == node_id), key=lambda x: order[x]
        )

    def check(self) -> None:
        """Raise ValueError when the graph breaks its own invariants."""
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids in graph")
        starts = [n for n in self.nodes if n.kind == START]
        ends = [n for n in self.nodes if n.kind == END]
        if len(starts) != 1 or len(ends) != 1:
            raise ValueError(
                f"graph needs exactly one start and one end, has"
                f" {len(starts)} and {len(ends)}"
            )
        known = set(ids)
        for a, b in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown node")
        if any(b == starts[0].id for _, b in self.edges):
            raise ValueError("start node has incoming edges")
        if any(a == ends[0].id for a, _ in self.edges):
            raise ValueError("end node has outgoing edges")

    @property
    def start_id(self) -> str:
        return next(n.id for n in self.nodes if n.kind == START)

    @property
    def end_id(self) -> str:
        return next(n.id for n in self.nodes if n.kind == END)


class _Builder:
    def __init__(self):
        self.nodes: list[FlatNode] = []
        self.edges: set = set()
        self.used: set = set()

    def fresh(self, wanted: str) -> str:
        node_id = wanted
        while node_id in self.used:
            node_id += "'"
        self.used.add(node_id)
        return node_id

    def add(self, node: FlatNode) -> str:
        self.nodes.append(node)
        return node.id

    def edge(self, a: str, b: str) -> None:
        self.edges.add((a, b))


def flatten(model: ProcessModel) -> FlatGraph:
    """Flatten the tree: Start/End added, each gateway a split/join pair.

    Activity labels are normalized action strings; an empty branch becomes a
    direct split→join edge.  Ids are kept, suffixed only on collision with
    the synthesized Start/End/split/join ids.
    """
    return flatten_with_conditions(model)[0]


def flatten_with_conditions(model: ProcessModel) -> tuple[FlatGraph, dict]:
    """Like :func:`flatten`, also returning branch conditions keyed by
    (split id, branch head id), the graph edge that enters the branch."""
    b = _Builder()
    conditions: dict = {}
    start = b.add(FlatNode(b.fresh("Start"), START))
    tail = _chain(b, model.nodes, start, conditions)
    end = b.add(FlatNode(b.fresh("End"), END))
    b.edge(tail, end)
    return FlatGraph(tuple(b.nodes), frozenset(b.edges)), conditions


def _chain(b: _Builder, nodes, tail: str, conditions: dict) -> str:
    for node in nodes:
        if isinstance(node, Activity):
            nid = b.add(
                FlatNode(b.fresh(node.id), ACTIVITY, label=normalize_action(node.action))
            )
            b.edge(tail, nid)
            tail = nid
        else:
            split = b.add(
                FlatNode(b.fresh(f"{node.id}:split"), SPLIT, gateway=node.kind)
            )
            b.edge(tail, split)
            branch_tails = []
            heads = []
            for branch in node.branches:
                mark = len(b.nodes)
                branch_tails.append(_chain(b, branch.children, split, conditions))
                heads.append(b.nodes[mark].id if len(b.nodes) > mark else None)
            join = b.add(
                FlatNode(b.fresh(f"{node.id}:join"), JOIN, gateway=node.kind)
            )
            for bt in branch_tails:
                b.edge(bt, join)
            for branch, head in zip(node.branches, heads):
                if branch.condition is not None:
                    # empty branches enter at the join itself
                    key = (split, head if head is not None else join)
                    conditions.setdefault(key, branch.condition)
            tail = join
    return tail


class NonBlockStructured(ValueError):
    """The flat graph has no nested single-entry single-exit decomposition."""


def graph_to_model(
    graph: FlatGraph,
    conditions: Optional[dict] = None,
    name: str = "",
) -> tuple[ProcessModel, list[str]]:
    """Rebuild a block-structured tree from a flat graph.

    ``conditions`` maps (split-id, branch-head-id) to the branch condition
    text.  Exclusive/inclusive branches with no condition get a synthesized
    "branch N" so the result stays structurally valid; each synthesis is
    reported in the returned warnings list.
    """
    graph.check()
    conditions = conditions or {}
    warnings: list[str] = []
    order = {n.id: i for i, n in enumerate(graph.nodes)}
    succ: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    pred: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    for a, bb in graph.edges:
        succ[a].append(bb)
        pred[bb].append(a)
    for lst in succ.values():
        lst.sort(key=lambda x: order[x])

    visited: set = set()

    def gateway_id(split: FlatNode) -> str:
        raw = split.id
        return raw[: -len(":split")] if raw.endswith(":split") else raw

    def step(node_id: str) -> str:
        nexts = succ[node_id]
        if len(nexts) != 1:
            raise NonBlockStructured(
                f"node {node_id!r} has {len(nexts)} outgoing edges where"
                " exactly one is expected"
            )
        return nexts[0]

    def parse_seq(node_id: str, stop) -> tuple[list, str]:
        """Parse nodes until ``stop(current)``; return (children, stop node)."""
        children: list = []
        current = node_id
        while not stop(current):
            if current in visited:
                raise NonBlockStructured(f"node {current!r} visited twice (cycle?)")
            visited.add(current)
            node = graph.node(current)
            if node.kind == ACTIVITY:
                children.append(
                    Activity(id=current, role="", action=node.label or "")
                )
                current = step(current)
            elif node.kind == SPLIT:
                gateway, after = parse_gateway(node)
                children.append(gateway)
                current = after
            elif node.kind == JOIN:
                raise NonBlockStructured(
                    f"join {current!r} reached without a matching split"
                )
            else:
                raise NonBlockStructured(
                    f"{node.kind} node {current!r} in the middle of a flow"
                )
        return children, current

    def parse_gateway(split: FlatNode) -> tuple[Gateway, str]:
        heads = succ[split.id]
        if not heads:
            raise NonBlockStructured(f"split {split.id!r} has no outgoing edges")
        join_id: Optional[str] = None
        branches: list[Branch] = []
        meta: list[tuple[str, Optional[str]]] = []  # (head, condition)
        for head in heads:
            is_join_of_kind = (
                lambda nid: graph.node(nid).kind == JOIN
                and graph.node(nid).gateway == split.gateway
            )
            if is_join_of_kind(head):
                children: list = []
                terminal = head
            else:
                children, terminal = parse_seq(head, is_join_of_kind)
            if join_id is None:
                join_id = terminal
            elif join_id != terminal:
                raise NonBlockStructured(
                    f"branches of split {split.id!r} reconverge at different"
                    f" joins ({join_id!r} vs {terminal!r})"
                )
            branches.append(Branch(condition=None, children=tuple(children)))
            meta.append((head, conditions.get((split.id, head))))
        assert join_id is not None
        if join_id in visited:
            raise NonBlockStructured(f"join {join_id!r} shared by two splits")
        visited.add(join_id)
        gid = gateway_id(split)
        needs_condition = split.gateway in (
            GatewayKind.EXCLUSIVE,
            GatewayKind.INCLUSIVE,
        )
        final: list[Branch] = []
        for i, (branch, (head, cond)) in enumerate(zip(branches, meta)):
            if cond is None and needs_condition:
                cond = f"branch {i + 1}"
                warnings.append(
                    f"gateway {gid!r}: branch {i} has no condition;"
                    f" synthesized {cond!r}"
                )
            final.append(Branch(condition=cond, children=branch.children))
        gateway = Gateway(id=gid, kind=split.gateway, branches=tuple(final))
        return gateway, step(join_id)

    start = graph.start_id
    end = graph.end_id
    visited.add(start)
    first = step(start)
    children, terminal = parse_seq(first, lambda nid: nid == end)
    visited.add(end)
    unreached = [n.id for n in graph.nodes if n.id not in visited]
    if unreached:
        raise NonBlockStructured(
            f"nodes unreachable from the start: {', '.join(sorted(unreached))}"
        )
    return ProcessModel(name=name, nodes=tuple(children)), warnings
