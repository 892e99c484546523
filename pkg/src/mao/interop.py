"""BPMN 2.0 XML interop: export process models, import real `.bpmn` files.

Export emits the flattened graph as a minimal, schema-conformant XML
document (no diagram-interchange section).  Import targets the flat graph
rather than the tree, because files from the wild may not be
block-structured; callers wanting a tree go through
:func:`mao.graph.graph_to_model` with the imported conditions.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .dsl import escape_attr
from .graph import END, JOIN, SPLIT, START, ACTIVITY, FlatGraph, FlatNode, flatten_with_conditions
from .model import GatewayKind, ProcessModel, structural_check
from .semlint import normalize_action

log = logging.getLogger(__name__)

BPMN_NS = "http://www.omg.org/spec/BPMN/20100524/MODEL"

TASK_TAGS = {
    "task",
    "userTask",
    "serviceTask",
    "sendTask",
    "receiveTask",
    "manualTask",
    "scriptTask",
    "businessRuleTask",
}
GATEWAY_TAGS = {
    "exclusiveGateway": GatewayKind.EXCLUSIVE,
    "parallelGateway": GatewayKind.PARALLEL,
    "inclusiveGateway": GatewayKind.INCLUSIVE,
}
_DI_TAGS = {"BPMNDiagram", "BPMNPlane", "BPMNShape", "BPMNEdge", "BPMNLabel"}

_NCNAME_OK = re.compile(r"[^A-Za-z0-9_.-]")


class BpmnImportError(ValueError):
    """The XML has no usable process content."""


@dataclass
class ImportResult:
    graph: FlatGraph
    warnings: list = field(default_factory=list)
    # branch conditions keyed by (split id, branch head id)
    conditions: dict = field(default_factory=dict)


def _escape_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _xml_ids(graph: FlatGraph) -> dict:
    """Deterministic NCName-safe ids derived from the flat node ids."""
    taken: set = set()
    mapping: dict = {}
    for node in graph.nodes:
        candidate = _NCNAME_OK.sub("_", node.id)
        if not candidate or not (candidate[0].isalpha() or candidate[0] == "_"):
            candidate = f"n_{candidate}"
        base = candidate
        n = 2
        while candidate in taken:
            candidate = f"{base}_{n}"
            n += 1
        taken.add(candidate)
        mapping[node.id] = candidate
    return mapping


def export_xml(model: ProcessModel) -> str:
    """Emit the flattened model as BPMN 2.0 XML.

    Gateways become paired gateway elements (the split and join halves);
    branch conditions become conditionExpression children on the split's
    outgoing flows.  Output is deterministic; defective models are refused.
    """
    defects = structural_check(model)
    if defects:
        listing = "; ".join(str(d) for d in defects[:5])
        raise ValueError(f"model has structural defects: {listing}")
    graph, conditions = flatten_with_conditions(model)
    ids = _xml_ids(graph)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<definitions xmlns="{BPMN_NS}" id="definitions_1"'
        ' targetNamespace="http://example.org/bpmn">',
        f'  <process id="process_1" name="{escape_attr(model.name)}"'
        ' isExecutable="false">',
    ]
    for node in graph.nodes:
        xid = ids[node.id]
        if node.kind == START:
            lines.append(f'    <startEvent id="{xid}"/>')
        elif node.kind == END:
            lines.append(f'    <endEvent id="{xid}"/>')
        elif node.kind == ACTIVITY:
            lines.append(
                f'    <task id="{xid}" name="{escape_attr(node.label or "")}"/>'
            )
        else:
            tag = next(t for t, k in GATEWAY_TAGS.items() if k == node.gateway)
            lines.append(f'    <{tag} id="{xid}"/>')

    order = {n.id: i for i, n in enumerate(graph.nodes)}
    flows = sorted(graph.edges, key=lambda e: (order[e[0]], order[e[1]]))
    for i, (a, b) in enumerate(flows, start=1):
        condition = conditions.get((a, b))
        head = (
            f'    <sequenceFlow id="flow_{i}" sourceRef="{ids[a]}"'
            f' targetRef="{ids[b]}"'
        )
        if condition is None:
            lines.append(head + "/>")
        else:
            lines.append(head + ">")
            lines.append(
                "      <conditionExpression>"
                f"{_escape_text(condition)}</conditionExpression>"
            )
            lines.append("    </sequenceFlow>")
    lines.append("  </process>")
    lines.append("</definitions>")
    return "\n".join(lines) + "\n"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def import_xml(xml: str) -> ImportResult:
    """Read the supported BPMN element subset into a flat graph.

    Both prefixed and default namespaces are accepted; diagram-interchange
    sections are ignored; unsupported elements are skipped with a warning
    each.  Multiple start (or end) events are normalized behind a single
    synthetic node.  Task-like elements all become activities labeled by
    their name.
    """
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise BpmnImportError(f"not well-formed XML: {exc}")

    process = None
    candidates = [root] + list(root.iter())
    for element in candidates:
        if _local(element.tag) == "process":
            process = element
            break
    if process is None:
        raise BpmnImportError("no <process> element found")

    warnings: list = []
    nodes: list[FlatNode] = []
    starts: list[str] = []
    ends: list[str] = []
    raw_edges: list = []
    conditions: dict = {}
    known: set = set()

    def anon_id(prefix: str, n: int) -> str:
        return f"{prefix}_{n}"

    anon = 0
    for element in process:
        tag = _local(element.tag)
        if tag in _DI_TAGS:
            continue
        eid = element.get("id")
        if tag == "sequenceFlow":
            source, target = element.get("sourceRef"), element.get("targetRef")
            if not source or not target:
                warnings.append(f"skipped sequenceFlow {eid!r}: missing endpoint refs")
                continue
            condition = None
            for child in element:
                if _local(child.tag) == "conditionExpression":
                    condition = (child.text or "").strip()
            if condition is None and element.get("name"):
                condition = element.get("name")
            raw_edges.append((source, target, condition))
            continue
        if eid is None:
            anon += 1
            eid = anon_id(tag, anon)
        if tag == "startEvent":
            nodes.append(FlatNode(eid, START))
            starts.append(eid)
        elif tag == "endEvent":
            nodes.append(FlatNode(eid, END))
            ends.append(eid)
        elif tag in TASK_TAGS:
            label = normalize_action(element.get("name") or eid)
            nodes.append(FlatNode(eid, ACTIVITY, label=label))
        elif tag in GATEWAY_TAGS:
            # split/join role is decided after edges are known
            nodes.append(FlatNode(eid, SPLIT, gateway=GATEWAY_TAGS[tag]))
        else:
            warnings.append(f"skipped unsupported <{tag}> {eid!r}")
            continue
        known.add(eid)

    if not starts:
        raise BpmnImportError("process has no startEvent")
    if not ends:
        raise BpmnImportError("process has no endEvent")

    edges: set = set()
    for source, target, condition in raw_edges:
        if source not in known or target not in known:
            warnings.append(
                f"skipped sequenceFlow {source!r} -> {target!r}:"
                " endpoint is not an imported element"
            )
            continue
        edges.add((source, target))
        if condition:
            conditions[(source, target)] = condition

    # classify each gateway by its degrees
    out_deg: dict = {n.id: 0 for n in nodes}
    in_deg: dict = {n.id: 0 for n in nodes}
    preds: dict = {n.id: [] for n in nodes}
    for a, b in edges:
        out_deg[a] += 1
        in_deg[b] += 1
        preds[b].append(a)
    flavor = {n.id: n.gateway for n in nodes}
    kind_of: dict = {}
    final_nodes: list[FlatNode] = []
    for node in nodes:
        if node.kind == SPLIT:
            if in_deg[node.id] > 1 and out_deg[node.id] > 1:
                warnings.append(
                    f"gateway {node.id!r} both merges and splits; treated"
                    " as a join"
                )
                node = FlatNode(node.id, JOIN, gateway=node.gateway)
            elif in_deg[node.id] > out_deg[node.id]:
                node = FlatNode(node.id, JOIN, gateway=node.gateway)
            elif in_deg[node.id] == 1 and out_deg[node.id] == 1:
                # a gateway whose branches are all empty collapses to a
                # 1-in/1-out pair; the half fed by its own split (same
                # flavor, single outgoing edge pointing here) is the join
                prev = preds[node.id][0]
                if (
                    kind_of.get(prev) == SPLIT
                    and flavor.get(prev) is node.gateway
                    and out_deg[prev] == 1
                ):
                    node = FlatNode(node.id, JOIN, gateway=node.gateway)
        kind_of[node.id] = node.kind
        final_nodes.append(node)
    nodes = final_nodes

    def synthesize(kind: str, terminal_ids: list, name: str) -> list:
        nonlocal nodes, edges
        if len(terminal_ids) == 1:
            return terminal_ids
        warnings.append(
            f"{len(terminal_ids)} {kind} events; normalized behind a"
            f" synthetic {name}"
        )
        synthetic = name
        while synthetic in known:
            synthetic += "'"
        known.add(synthetic)
        replaced = [
            FlatNode(n.id, ACTIVITY, label="") if n.id in terminal_ids else n
            for n in nodes
        ]
        # demote the old terminals to unlabeled activities and attach the
        # synthetic terminal around them
        if kind == "start":
            nodes = [FlatNode(synthetic, START)] + replaced
            for t in terminal_ids:
                edges.add((synthetic, t))
        else:
            nodes = replaced + [FlatNode(synthetic, END)]
            for t in terminal_ids:
                edges.add((t, synthetic))
        return [synthetic]

    synthesize("start", starts, "Start")
    synthesize("end", ends, "End")

    graph = FlatGraph(tuple(nodes), frozenset(edges))
    try:
        graph.check()
    except ValueError as exc:
        raise BpmnImportError(str(exc))
    result = ImportResult(graph, warnings, conditions)
    for w in warnings:
        log.info("import: %s", w)
    return result
