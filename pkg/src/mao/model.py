"""In-memory process model tree.

A process model is a block-structured tree: a flat sequence of nodes, where
each node is either an activity or a gateway, and gateways contain branches
that recursively hold node sequences.  Start and end events are implicit
(they materialize only in the flat graph and in BPMN XML export).

Construction is permissive: invariants are *not* enforced by constructors so
that defective trees (as produced by imperfect agents) can be represented,
inspected, and reported.  Use :func:`structural_check` to find defects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class GatewayKind(enum.Enum):
    EXCLUSIVE = "exclusive"
    PARALLEL = "parallel"
    INCLUSIVE = "inclusive"


@dataclass(frozen=True)
class Activity:
    """A single unit of work: who (role) does what (action) with what (object)."""

    id: str
    role: str
    action: str
    object: Optional[str] = None


@dataclass(frozen=True)
class Branch:
    """One alternative inside a gateway.  Children may be empty (a skip path)."""

    condition: Optional[str] = None
    children: tuple["Node", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Gateway:
    id: str
    kind: GatewayKind
    branches: tuple[Branch, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "branches", tuple(self.branches))


Node = Union[Activity, Gateway]


@dataclass(frozen=True)
class ProcessModel:
    name: str = ""
    nodes: tuple[Node, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))


@dataclass(frozen=True)
class StructuralDefect:
    """One violated invariant, named by a stable code, located by a tree path."""

    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


# Stable defect codes, used by the validator to map defects onto rule codes.
DUPLICATE_ID = "duplicate-id"
EMPTY_ID = "empty-id"
EMPTY_ACTION = "empty-action"
BRANCH_COUNT = "branch-count"
MISSING_CONDITION = "missing-condition"
EMPTY_PROCESS = "empty-process"


def walk(model: ProcessModel) -> Iterator[tuple[str, Node]]:
    """Yield (tree path, node) pairs in document order.

    Paths look like ``/nodes/0`` or ``/nodes/1/branches/0/children/2``.
    """

    def _walk(nodes: tuple[Node, ...], prefix: str) -> Iterator[tuple[str, Node]]:
        for i, node in enumerate(nodes):
            path = f"{prefix}/{i}"
            yield path, node
            if isinstance(node, Gateway):
                for b, branch in enumerate(node.branches):
                    yield from _walk(branch.children, f"{path}/branches/{b}/children")

    yield from _walk(model.nodes, "/nodes")


def collect_ids(model: ProcessModel) -> list[str]:
    """Every activity and gateway id, in document order."""
    return [node.id for _, node in walk(model)]


def structural_check(model: ProcessModel) -> list[StructuralDefect]:
    """Check every structural invariant; defects are data, not failures.

    Returns an empty list exactly when the model is valid:
    ids unique and non-empty, actions non-empty, every gateway has at least
    two branches, exclusive/inclusive branches carry a non-empty condition,
    and the top-level node list is non-empty.
    """
    defects: list[StructuralDefect] = []

    if not model.nodes:
        defects.append(
            StructuralDefect(EMPTY_PROCESS, "/nodes", "process contains no nodes")
        )

    seen: dict[str, str] = {}
    for path, node in walk(model):
        if not node.id.strip():
            defects.append(
                StructuralDefect(EMPTY_ID, path, "node has an empty id")
            )
        elif node.id in seen:
            defects.append(
                StructuralDefect(
                    DUPLICATE_ID,
                    path,
                    f"id {node.id!r} already used at {seen[node.id]}",
                )
            )
        else:
            seen[node.id] = path

        if isinstance(node, Activity):
            if not node.action.strip():
                defects.append(
                    StructuralDefect(EMPTY_ACTION, path, "activity action is empty")
                )
        else:
            if len(node.branches) < 2:
                defects.append(
                    StructuralDefect(
                        BRANCH_COUNT,
                        path,
                        f"gateway has {len(node.branches)} branch(es), needs at least 2",
                    )
                )
            if node.kind in (GatewayKind.EXCLUSIVE, GatewayKind.INCLUSIVE):
                for b, branch in enumerate(node.branches):
                    if branch.condition is None or not branch.condition.strip():
                        defects.append(
                            StructuralDefect(
                                MISSING_CONDITION,
                                f"{path}/branches/{b}",
                                f"{node.kind.value} branch has no condition",
                            )
                        )

    return defects
