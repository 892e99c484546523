"""Semantic review support: logic-error taxonomy, deterministic detectors,
and the reviewer prompt/reply contract.

Format errors are the validator's job; this module covers *semantic*
hallucinations: flow logic that parses fine but cannot be right.  Cheap
structural symptoms (duplicate activities, empty branches, cloned branches)
are flagged deterministically; genuine ordering and relevance judgements need
world knowledge and stay with the reviewer agent, which answers in a
machine-checkable line format parsed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .dsl import serialize
from .model import Activity, Branch, Gateway, ProcessModel, collect_ids, walk


@dataclass(frozen=True)
class LintCategory:
    code: str
    name: str
    description: str
    example: str


CATEGORIES: tuple[LintCategory, ...] = (
    LintCategory(
        "SH1",
        "OutOfSequence",
        "activities occurring out of sequence",
        'the activity "prepare to send a package" must be executed before'
        ' "go to the mailing point to send" in a delivery process',
    ),
    LintCategory(
        "SH2",
        "IrrelevantActivity",
        "irrelevant activities appearing in the process model",
        'the activity "delivery system" may seem related to the delivery'
        " business, but it does not contribute to the process",
    ),
    LintCategory(
        "SH3",
        "GatewayKindError",
        "a gateway whose kind contradicts how its branches relate",
        '"confirm the pickup location" and "assign a courier for pickup" must'
        " both be executed, so putting them in an exclusive gateway that"
        " selects only one of them is wrong",
    ),
    LintCategory(
        "SH4",
        "BranchMembershipError",
        "activities placed inside or outside the wrong gateway branch",
        '"assign a courier for pickup" belongs in its own branch of the'
        ' exclusive gateway; the unrelated "go to the mailing point to send"'
        " must not share it",
    ),
)

CATEGORY_BY_CODE = {c.code: c for c in CATEGORIES}

NO_ISSUES = "NO_ISSUES"


@dataclass(frozen=True)
class ReviewSuggestion:
    category: str
    targets: tuple[str, ...]
    proposal: str

    def as_line(self) -> str:
        return f"{self.category} | {','.join(self.targets)} | {self.proposal}"


@dataclass(frozen=True)
class ReviewReply:
    """Parsed reviewer answer: the sentinel, or suggestions, never neither."""

    no_issues: bool
    suggestions: tuple[ReviewSuggestion, ...] = ()
    dropped: tuple[str, ...] = ()  # notes about discarded malformed targets


class ReviewReplyError(ValueError):
    """The reviewer answer had no sentinel and no well-formed suggestion line."""


def normalize_action(text: str) -> str:
    """Case-fold, collapse whitespace, strip trailing punctuation."""
    return " ".join(text.split()).casefold().rstrip(".,;:!?")


def _branch_signature(branch: Branch) -> tuple:
    def node_sig(node) -> tuple:
        if isinstance(node, Activity):
            return (
                "activity",
                normalize_action(node.role),
                normalize_action(node.action),
                normalize_action(node.object or ""),
            )
        return (
            node.kind.value,
            tuple(
                tuple(node_sig(child) for child in b.children)
                for b in node.branches
            ),
        )

    return tuple(node_sig(child) for child in branch.children)


def deterministic_lint(model: ProcessModel) -> list[ReviewSuggestion]:
    """Flag cheap structural symptoms of semantic hallucinations.

    Pure and idempotent; findings are hints for the reviewer, they never
    block the pipeline on their own.
    """
    out: list[ReviewSuggestion] = []

    groups: dict[str, list[str]] = {}
    for _, node in walk(model):
        if isinstance(node, Activity):
            groups.setdefault(normalize_action(node.action), []).append(node.id)
    for action, ids in groups.items():
        if len(ids) >= 2 and action:
            out.append(
                ReviewSuggestion(
                    "SH2",
                    tuple(ids),
                    f"the action {action!r} appears {len(ids)} times"
                    f" ({', '.join(ids)}); keep one occurrence or make them"
                    " genuinely different activities",
                )
            )

    for _, node in walk(model):
        if not isinstance(node, Gateway):
            continue
        for i, branch in enumerate(node.branches):
            if not branch.children:
                out.append(
                    ReviewSuggestion(
                        "SH4",
                        (node.id,),
                        f"branch {i} of gateway {node.id!r} is empty; move the"
                        " activities that belong on this path inside it or"
                        " remove the branch",
                    )
                )
        seen: dict[tuple, int] = {}
        for i, branch in enumerate(node.branches):
            sig = _branch_signature(branch)
            if not branch.children:
                continue
            if sig in seen:
                out.append(
                    ReviewSuggestion(
                        "SH3",
                        (node.id,),
                        f"branches {seen[sig]} and {i} of gateway {node.id!r}"
                        " contain identical activities; a single branch or a"
                        " different gateway kind is probably intended",
                    )
                )
            else:
                seen[sig] = i
    return out


def build_review_prompt(
    model: ProcessModel,
    categories: Iterable[LintCategory] = CATEGORIES,
    hints: Iterable[ReviewSuggestion] = (),
) -> str:
    """Prompt asking the reviewer to find semantic hallucinations.

    Embeds the serialized model verbatim, the category catalogue with
    examples, and the reply contract (``NO_ISSUES`` or suggestion lines).
    """
    lines = [
        "Review the following process model for semantic hallucinations:",
        " logical errors in the flow, not formatting problems.",
        "",
        serialize(model, check=False).rstrip("\n"),
        "",
        "Check for these categories of semantic hallucinations:",
    ]
    for cat in categories:
        lines.append(f"- {cat.code} {cat.name}: {cat.description}.")
        lines.append(f"  Example: {cat.example}.")
    hints = list(hints)
    if hints:
        lines.append("")
        lines.append("Automated checks already flagged these candidates;")
        lines.append("confirm or reject each one:")
        for hint in hints:
            lines.append(f"- {hint.as_line()}")
    lines += [
        "",
        "Answer with one line per finding, exactly in this format:",
        "SHk | <comma-separated activity or gateway ids> | <how to fix it>",
        "Use the ids from the model above.",
        f"If the model has no semantic hallucinations, answer exactly: {NO_ISSUES}",
    ]
    return "\n".join(lines)


def parse_review_reply(reply: str, model: ProcessModel) -> ReviewReply:
    """Parse a reviewer answer against the model under review.

    The sentinel line wins when present.  Suggestion lines use the exact
    separator ``" | "``; ones naming ids absent from the model are dropped
    with a note.  Raises :class:`ReviewReplyError` when nothing parses.
    """
    known = collect_ids(model)
    suggestions: list[ReviewSuggestion] = []
    dropped: list[str] = []
    saw_sentinel = False
    for raw in reply.splitlines():
        line = raw.strip()
        if line.startswith(("- ", "* ")):
            line = line[2:].strip()
        if line == NO_ISSUES:
            saw_sentinel = True
            continue
        parts = line.split(" | ", 2)
        if len(parts) != 3:
            continue
        code, targets_text, proposal = (p.strip() for p in parts)
        if code not in CATEGORY_BY_CODE or not proposal:
            continue
        targets = tuple(t.strip() for t in targets_text.split(",") if t.strip())
        if not targets:
            continue
        unknown = [t for t in targets if t not in known]
        if unknown:
            dropped.append(
                f"{code} suggestion names unknown id(s) {', '.join(unknown)};"
                " dropped"
            )
            continue
        suggestions.append(ReviewSuggestion(code, targets, proposal))
    if saw_sentinel:
        return ReviewReply(True, (), tuple(dropped))
    if not suggestions and not dropped:
        raise ReviewReplyError(
            "reviewer answer has no NO_ISSUES sentinel and no well-formed"
            " suggestion line"
        )
    return ReviewReply(False, tuple(suggestions), tuple(dropped))
