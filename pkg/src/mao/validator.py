"""Format-hallucination checks for BPMN text.

A data-driven registry of constraint rules is applied to the input: parse
findings are mapped onto rule codes, then tree rules run against the
best-effort model.  All findings are data; nothing raises.  A report is
``clean`` when it has no Error-severity violations (Warnings never block).
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .dsl import ParseErrorKind, ParseOutcome, parse_outcome, serialize
from .model import Activity, Gateway, GatewayKind, ProcessModel, walk


class Severity(enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class ConstraintRule:
    code: str
    description: str
    severity: Severity = Severity.ERROR


@dataclass(frozen=True)
class Violation:
    rule: str
    location: str
    line: Optional[int]
    message: str
    suggestion: str
    severity: Severity = Severity.ERROR


@dataclass(frozen=True)
class ValidationReport:
    subject: str  # sha256 hex of the validated text
    violations: tuple[Violation, ...]

    @property
    def clean(self) -> bool:
        return not any(v.severity is Severity.ERROR for v in self.violations)


# checker signature: (model, spans) -> violations
Checker = Callable[[ProcessModel, dict], list[Violation]]

C2_SUGGESTION = "add a second branch or remove the gateway"


def _line_of(spans: dict, path: str) -> Optional[int]:
    span = spans.get(path)
    return span.start_line if span is not None else None


def _check_unique_ids(model: ProcessModel, spans: dict) -> list[Violation]:
    seen: dict[str, str] = {}
    out = []
    for path, node in walk(model):
        if not node.id.strip():
            out.append(
                Violation(
                    "C1",
                    path,
                    _line_of(spans, path),
                    "element has an empty id",
                    "give the element a unique id",
                )
            )
            continue
        if node.id in seen:
            out.append(
                Violation(
                    "C1",
                    path,
                    _line_of(spans, path),
                    f"id {node.id!r} is already used at {seen[node.id]}",
                    "rename the id so every element id is unique",
                )
            )
        else:
            seen[node.id] = path
    return out


def _check_branch_count(model: ProcessModel, spans: dict) -> list[Violation]:
    out = []
    for path, node in walk(model):
        if isinstance(node, Gateway) and len(node.branches) < 2:
            out.append(
                Violation(
                    "C2",
                    path,
                    _line_of(spans, path),
                    f"gateway {node.id!r} has {len(node.branches)} branch(es);"
                    " it must include two branches",
                    C2_SUGGESTION,
                )
            )
    return out


def _check_action(model: ProcessModel, spans: dict) -> list[Violation]:
    out = []
    for path, node in walk(model):
        if isinstance(node, Activity) and not node.action.strip():
            out.append(
                Violation(
                    "C3",
                    path,
                    _line_of(spans, path),
                    f"activity {node.id!r} has an empty action",
                    "add a non-empty action attribute",
                )
            )
    return out


def _check_conditions(model: ProcessModel, spans: dict) -> list[Violation]:
    out = []
    for path, node in walk(model):
        if not isinstance(node, Gateway):
            continue
        if node.kind not in (GatewayKind.EXCLUSIVE, GatewayKind.INCLUSIVE):
            continue
        for i, branch in enumerate(node.branches):
            if branch.condition is None or not branch.condition.strip():
                bpath = f"{path}/branches/{i}"
                out.append(
                    Violation(
                        "C4",
                        bpath,
                        _line_of(spans, bpath),
                        f"branch {i} of {node.kind.value} gateway {node.id!r}"
                        " has no condition",
                        "add a condition attribute to the branch",
                    )
                )
    return out


def _check_non_empty(model: ProcessModel, spans: dict) -> list[Violation]:
    if model.nodes:
        return []
    return [
        Violation(
            "C7",
            "/",
            _line_of(spans, "/"),
            "process has no activities",
            "add at least one activity",
        )
    ]


def _check_parallel_conditions(model: ProcessModel, spans: dict) -> list[Violation]:
    out = []
    for path, node in walk(model):
        if not isinstance(node, Gateway) or node.kind is not GatewayKind.PARALLEL:
            continue
        for i, branch in enumerate(node.branches):
            if branch.condition is not None:
                bpath = f"{path}/branches/{i}"
                out.append(
                    Violation(
                        "C8",
                        bpath,
                        _line_of(spans, bpath),
                        f"branch {i} of parallel gateway {node.id!r} carries"
                        " a condition, but parallel branches always run",
                        "drop the condition or use an exclusive gateway",
                        severity=Severity.WARNING,
                    )
                )
    return out


@dataclass
class Registry:
    """Rule metadata plus the tree checkers that enforce them."""

    rules: dict[str, ConstraintRule] = field(default_factory=dict)
    checkers: list[Checker] = field(default_factory=list)

    def add(self, rule: ConstraintRule, checker: Optional[Checker] = None) -> None:
        if rule.code in self.rules:
            raise ValueError(f"duplicate rule code {rule.code!r}")
        self.rules[rule.code] = rule
        if checker is not None:
            self.checkers.append(checker)

    def severity_of(self, code: str) -> Severity:
        rule = self.rules.get(code)
        return rule.severity if rule is not None else Severity.ERROR


def default_registry() -> Registry:
    reg = Registry()
    reg.add(ConstraintRule("C0", "the text must be well-formed process markup"))
    reg.add(
        ConstraintRule("C1", "every element id must be present and unique"),
        _check_unique_ids,
    )
    reg.add(
        ConstraintRule("C2", "a gateway must include two branches or more"),
        _check_branch_count,
    )
    reg.add(
        ConstraintRule("C3", "every activity must have a non-empty action"),
        _check_action,
    )
    reg.add(
        ConstraintRule(
            "C4",
            "every branch of an exclusive or inclusive gateway must carry"
            " a condition",
        ),
        _check_conditions,
    )
    reg.add(ConstraintRule("C5", "a branch may appear only directly inside a gateway"))
    reg.add(ConstraintRule("C6", "only the documented tags and attributes may be used"))
    reg.add(
        ConstraintRule("C7", "a process must contain at least one activity"),
        _check_non_empty,
    )
    reg.add(
        ConstraintRule(
            "C8",
            "branches of a parallel gateway should not carry conditions",
            Severity.WARNING,
        ),
        _check_parallel_conditions,
    )
    return reg


_DEFAULT = default_registry()

_PARSE_RULE_SUGGESTIONS = {
    "C0": "correct the markup so the text parses",
    "C3": "add a non-empty action attribute",
    "C5": "move the branch inside a gateway element",
    "C6": "use only the documented tags and attributes",
}


def _rule_for_parse_error(kind: ParseErrorKind, detail: Optional[str]) -> str:
    if kind in (ParseErrorKind.UNKNOWN_ATTRIBUTE, ParseErrorKind.UNEXPECTED_TAG):
        return "C6"
    if kind is ParseErrorKind.BAD_NESTING and detail == "branch":
        return "C5"
    if kind is ParseErrorKind.MISSING_ATTRIBUTE and detail == "action":
        return "C3"
    return "C0"


def _path_at(outcome: ParseOutcome, start_byte: int) -> Optional[str]:
    """Tree path of the element whose span starts exactly at ``start_byte``."""
    best = None
    for path, span in outcome.spans.items():
        if span.start_byte == start_byte:
            if best is None or len(path) > len(best):
                best = path
    return best


def _from_parse(outcome: ParseOutcome, registry: Registry) -> list[Violation]:
    out = []
    for err, demoted in [(e, False) for e in outcome.errors] + [
        (w, True) for w in outcome.warnings
    ]:
        code = _rule_for_parse_error(err.kind, err.detail)
        location = _path_at(outcome, err.span.start_byte) or str(err.span)
        severity = Severity.WARNING if demoted else registry.severity_of(code)
        out.append(
            Violation(
                code,
                location,
                err.span.start_line,
                err.message,
                _PARSE_RULE_SUGGESTIONS.get(code, ""),
                severity=severity,
            )
        )
    return out


def validate(
    text: str, strict: bool = True, registry: Optional[Registry] = None
) -> ValidationReport:
    """Check BPMN text against the constraint registry.

    Deterministic for a given input; violations are sorted by source
    position (findings without a position sort last, in tree order).
    """
    reg = registry or _DEFAULT
    outcome = parse_outcome(text, strict=strict)
    violations = _from_parse(outcome, reg)
    if outcome.model is not None:
        for checker in reg.checkers:
            for v in checker(outcome.model, outcome.spans):
                violations.append(v)
    subject = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ValidationReport(subject, _ordered(violations))


def validate_model(
    model: ProcessModel, registry: Optional[Registry] = None
) -> ValidationReport:
    """Check an in-memory model; the subject hash covers its canonical form."""
    reg = registry or _DEFAULT
    violations: list[Violation] = []
    for checker in reg.checkers:
        violations.extend(checker(model, {}))
    text = serialize(model, check=False)
    subject = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ValidationReport(subject, _ordered(violations))


def _ordered(violations: list[Violation]) -> tuple[Violation, ...]:
    deduped: dict[tuple[str, str], Violation] = {}
    for v in violations:
        deduped.setdefault((v.rule, v.location), v)

    def key(v: Violation):
        line = v.line if v.line is not None else 10**9
        parts = tuple(
            int(p) if p.isdigit() else p for p in v.location.split("/") if p
        )
        return (line, parts, v.rule)

    return tuple(sorted(deduped.values(), key=key))


def render_report(report: ValidationReport, format: str = "human") -> str:
    """Render a report: one line per finding (human) or stable JSON (machine)."""
    if format == "machine":
        payload = {
            "subject": report.subject,
            "clean": report.clean,
            "violations": [
                {
                    "rule": v.rule,
                    "location": v.location,
                    "line": v.line,
                    "message": v.message,
                    "suggestion": v.suggestion,
                }
                for v in report.violations
            ],
        }
        return json.dumps(payload, indent=2, ensure_ascii=False)
    if format != "human":
        raise ValueError(f"unknown report format {format!r}")
    if not report.violations:
        return "OK: no format hallucinations found"
    lines = []
    for v in report.violations:
        line = f"{v.rule} at {v.location}: {v.message}"
        if v.suggestion:
            line += f" — {v.suggestion}"
        lines.append(line)
    return "\n".join(lines)
