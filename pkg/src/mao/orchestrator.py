"""Four-phase multi-agent pipeline: Generation, Refinement, Reviewing, Testing.

An instructor (team leader) drives two assistant agents (process design
expert, process reviewer) over a pluggable chat backend.  Generation drafts
a model from the requirement; Refinement deepens it; Reviewing repairs
semantic hallucinations via reviewer/expert rounds; Testing repairs format
hallucinations via the deterministic validator.  Phases are individually
toggleable; round caps bound every loop; a replay backend makes whole runs
byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .backends import ChatBackend
from .dsl import extract_model_block, parse_outcome, serialize
from .model import ProcessModel
from .semlint import (
    ReviewReplyError,
    build_review_prompt,
    deterministic_lint,
    parse_review_reply,
)
from .validator import (
    Registry,
    ValidationReport,
    default_registry,
    render_report,
    validate,
)

log = logging.getLogger(__name__)

GENERATION = "Generation"
REFINEMENT = "Refinement"
REVIEWING = "Reviewing"
TESTING = "Testing"
PHASES = (GENERATION, REFINEMENT, REVIEWING, TESTING)

TEAM_LEADER = "TeamLeader"
EXPERT = "ProcessDesignExpert"
REVIEWER = "ProcessReviewer"

FORMAT_DESCRIPTION = """\
A process model is written as XML-like text:
- The root element is <process name="..."> and contains the flow in order.
- <activity role="..." action="..." object="..." id="..."/> is one
  self-closing step: role = who performs it, action = what is done,
  object = what it acts on (optional), id = a unique identifier.
- <exclusiveGateway id="...">, <parallelGateway id="...">, and
  <inclusiveGateway id="..."> contain <branch> elements. Exclusive means
  exactly one branch runs, parallel means all branches run, inclusive
  means one or more branches run.
- <branch condition="..."> wraps the activities of one path. Branches of
  exclusive and inclusive gateways carry a condition attribute; branches
  of parallel gateways do not.
- Attribute values are double-quoted; escape & as &amp;, < as &lt;,
  > as &gt;, and " as &quot;."""

DELIVERY_EXAMPLE = """\
<process name="package delivery">
  <activity role="customer" action="prepare to send a package" id="a1"/>
  <exclusiveGateway id="g1">
    <branch condition="courier pickup">
      <activity role="customer" action="confirm the pickup location" id="a2"/>
      <activity role="courier company" action="assign a courier for pickup" id="a3"/>
    </branch>
    <branch condition="self delivery">
      <activity role="customer" action="go to the mailing point to send" object="package" id="a4"/>
    </branch>
  </exclusiveGateway>
</process>"""

STEP_BY_STEP = (
    "Let's think step by step, then answer with exactly one complete"
    " <process> block."
)

INSTRUCTOR = "Instructor"
ASSISTANT = "Assistant"


@dataclass(frozen=True)
class RoleCard:
    role: str
    stance: str  # Instructor | Assistant
    system_prompt: str


def default_roles() -> tuple[RoleCard, ...]:
    expert_prompt = (
        "You are a process design expert on a process modeling team. You"
        " design business process models and write them in the following"
        " text format.\n\n"
        f"{FORMAT_DESCRIPTION}\n\n"
        "Always answer with exactly one complete <process>...</process>"
        " block."
    )
    reviewer_prompt = (
        "You are a process reviewer on a process modeling team. You examine"
        " process models for logical errors (semantic hallucinations) and"
        " propose precise fixes. Answer strictly in the line format you are"
        " asked for."
    )
    leader_prompt = (
        "You lead a process modeling team: you hand out tasks to the process"
        " design expert and the process reviewer and collect their results."
    )
    return (
        RoleCard(TEAM_LEADER, INSTRUCTOR, leader_prompt),
        RoleCard(EXPERT, ASSISTANT, expert_prompt),
        RoleCard(REVIEWER, ASSISTANT, reviewer_prompt),
    )


@dataclass(frozen=True)
class ChatMessage:
    speaker: str
    content: str
    phase: str
    index: int
    params: Optional[dict] = None

    def to_dict(self) -> dict:
        row = {
            "index": self.index,
            "speaker": self.speaker,
            "phase": self.phase,
            "content": self.content,
        }
        if self.params is not None:
            row["params"] = self.params
        return row


@dataclass
class PipelineConfig:
    backend: ChatBackend
    phases_enabled: frozenset = frozenset(PHASES)
    max_review_rounds: int = 3
    max_test_rounds: int = 3
    max_parse_retries: int = 2
    few_shot_examples: tuple = (DELIVERY_EXAMPLE,)
    registry: Registry = field(default_factory=default_registry)
    temperature: float = 0.0
    refinement_fallback: bool = True
    roles: tuple = field(default_factory=default_roles)
    # named external tools the Testing phase may call on the model text;
    # extensible, the format validator is the one default
    tools: Optional[dict] = None
    tool_name: str = "format-validator"

    def __post_init__(self):
        self.phases_enabled = frozenset(self.phases_enabled)
        unknown = self.phases_enabled - set(PHASES)
        if unknown:
            raise ValueError(f"unknown phases: {', '.join(sorted(unknown))}")
        if GENERATION not in self.phases_enabled:
            raise ValueError("the Generation phase cannot be disabled")
        if self.max_review_rounds < 1 or self.max_test_rounds < 1:
            raise ValueError("round caps must be >= 1")
        if self.max_parse_retries < 0:
            raise ValueError("max_parse_retries must be >= 0")
        if self.tools is None:
            self.tools = {
                self.tool_name: lambda text: validate(text, registry=self.registry)
            }

    def card(self, role: str) -> RoleCard:
        for card in self.roles:
            if card.role == role:
                return card
        raise ValueError(f"no role card for {role!r}")


@dataclass(frozen=True)
class PipelineResult:
    final_model: Optional[ProcessModel]
    final_text: str
    transcript: tuple
    reports: dict
    clean: Optional[bool]  # absent (None) when Testing did not run

    def to_json(self) -> str:
        payload = {
            "final_text": self.final_text,
            "clean": self.clean,
            "reports": self.reports,
            "transcript": [m.to_dict() for m in self.transcript],
        }
        return json.dumps(payload, indent=2, ensure_ascii=False)


class PipelineError(Exception):
    """Phase failure; carries the partial transcript for post-mortems."""

    def __init__(self, message: str, transcript=()):
        super().__init__(message)
        self.transcript = tuple(transcript)


class GenerationFailed(PipelineError):
    pass


class RefinementFailed(PipelineError):
    pass


class Session:
    """One pipeline run: transcript bookkeeping plus per-assistant threads."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.transcript: list = []
        self._threads: dict = {}

    def _record(
        self, speaker: str, content: str, phase: str, params: Optional[dict] = None
    ) -> None:
        self.transcript.append(
            ChatMessage(speaker, content, phase, len(self.transcript), params)
        )

    def thread(self, role: str) -> list:
        if role not in self._threads:
            card = self.cfg.card(role)
            self._threads[role] = [
                {"role": "system", "content": card.system_prompt}
            ]
        return self._threads[role]

    def ask(self, role: str, content: str, phase: str) -> str:
        """Instructor sends ``content`` to the assistant; returns its reply."""
        self._record(TEAM_LEADER, content, phase)
        thread = self.thread(role)
        thread.append({"role": "user", "content": content})
        reply = self.cfg.backend.complete(
            thread, {"temperature": self.cfg.temperature}
        )
        thread.append({"role": "assistant", "content": reply})
        self._record(
            role, reply, phase, params={"temperature": self.cfg.temperature}
        )
        return reply


def build_generation_prompt(requirement: str, cfg: PipelineConfig) -> str:
    """Generation instruction: requirement, format description, constraints,
    few-shot examples, and the step-by-step trigger, in that order."""
    if not requirement.strip():
        raise ValueError("requirement must be non-empty")
    parts = [
        "Design a process model for the following user requirement.",
        "",
        f"User requirement: {requirement}",
        "",
        "Process format description:",
        FORMAT_DESCRIPTION,
        "",
        "Process constraints:",
    ]
    for i, code in enumerate(sorted(cfg.registry.rules), start=1):
        parts.append(f"{i}. {cfg.registry.rules[code].description}")
    if cfg.few_shot_examples:
        parts.append("")
        parts.append("Example process models:")
        for example in cfg.few_shot_examples:
            parts.append(example)
    parts.append("")
    parts.append(STEP_BY_STEP)
    return "\n".join(parts)


def _parse_block(reply: str):
    """Best-effort model from a chat reply: (model, block, problems)."""
    block = extract_model_block(reply)
    if block is None:
        return None, "", ["the reply contains no <process> block"]
    outcome = parse_outcome(block, strict=True)
    if outcome.errors or outcome.model is None:
        problems = [str(e) for e in outcome.errors] or ["no parseable model"]
        return None, block, problems
    return outcome.model, block, []


def _request_model(
    session: Session, phase: str, prompt: str
) -> tuple[Optional[ProcessModel], str]:
    """Ask the expert for a model; on parse failure send repair turns."""
    cfg = session.cfg
    content = prompt
    for _ in range(1 + cfg.max_parse_retries):
        reply = session.ask(EXPERT, content, phase)
        model, block, problems = _parse_block(reply)
        if model is not None:
            return model, block
        listing = "\n".join(f"- {p}" for p in problems)
        content = (
            "The process model in your reply could not be parsed:\n"
            f"{listing}\n"
            "Reply again with one corrected, complete <process> block and"
            " nothing else."
        )
    return None, ""


def model_hash(model: ProcessModel) -> str:
    text = serialize(model, check=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_generation(
    requirement: str, cfg: PipelineConfig, session: Session
) -> ProcessModel:
    prompt = build_generation_prompt(requirement, cfg)
    model, _ = _request_model(session, GENERATION, prompt)
    if model is None:
        raise GenerationFailed(
            f"no parseable model after {1 + cfg.max_parse_retries} expert"
            " turns",
            session.transcript,
        )
    return model


def run_refinement(
    model: ProcessModel,
    requirement: str,
    cfg: PipelineConfig,
    session: Session,
    warnings: Optional[list] = None,
) -> ProcessModel:
    if REFINEMENT not in cfg.phases_enabled:
        return model
    parts = [
        "Refine the process model below: split coarse activities into",
        "sub-activities where the requirement implies more detail, and add",
        "appropriate gateways where it implies choice or concurrency. Keep",
        "everything that is already correct.",
        "",
        f"User requirement: {requirement}",
        "",
        "Current process model:",
        serialize(model, check=False).rstrip("\n"),
    ]
    if cfg.few_shot_examples:
        parts.append("")
        parts.append("Example of the expected level of detail:")
        parts.extend(cfg.few_shot_examples)
    parts.append("")
    parts.append(STEP_BY_STEP)
    refined, _ = _request_model(session, REFINEMENT, "\n".join(parts))
    if refined is None:
        if cfg.refinement_fallback:
            note = "refinement reply unusable; keeping the unrefined model"
            log.warning(note)
            if warnings is not None:
                warnings.append(note)
            return model
        raise RefinementFailed(
            "no parseable refined model", session.transcript
        )
    return refined


def run_reviewing(
    model: ProcessModel, cfg: PipelineConfig, session: Session
) -> tuple[ProcessModel, list]:
    """Reviewer/expert rounds until NO_ISSUES, a stall, or the round cap."""
    if REVIEWING not in cfg.phases_enabled:
        return model, []
    review_log: list = []
    for round_no in range(1, cfg.max_review_rounds + 1):
        prompt = build_review_prompt(model, hints=deterministic_lint(model))
        entry = {"round": round_no, "model_hash": model_hash(model)}
        reply_text = session.ask(REVIEWER, prompt, REVIEWING)
        reply = None
        for _ in range(cfg.max_parse_retries):
            try:
                reply = parse_review_reply(reply_text, model)
                break
            except ReviewReplyError:
                reply_text = session.ask(
                    REVIEWER,
                    "Your answer did not follow the required format. Answer"
                    " with suggestion lines 'SHk | ids | proposal' or the"
                    " single line NO_ISSUES.",
                    REVIEWING,
                )
        if reply is None:
            try:
                reply = parse_review_reply(reply_text, model)
            except ReviewReplyError:
                entry["note"] = "review reply unparseable; reviewing stopped"
                review_log.append(entry)
                break
        if reply.dropped:
            entry["dropped"] = list(reply.dropped)
        if reply.no_issues:
            entry["suggestions"] = []
            review_log.append(entry)
            break
        if not reply.suggestions:
            entry["suggestions"] = []
            entry["note"] = "all suggestions named unknown ids; nothing to apply"
            review_log.append(entry)
            break
        lines = [s.as_line() for s in reply.suggestions]
        entry["suggestions"] = lines
        fix_prompt = "\n".join(
            [
                "The process reviewer found these semantic hallucinations in",
                "the current process model; apply the proposed fixes.",
                "",
                "Current process model:",
                serialize(model, check=False).rstrip("\n"),
                "",
                "Findings:",
            ]
            + [f"- {line}" for line in lines]
            + ["", "Answer with the complete corrected <process> block."]
        )
        revised, _ = _request_model(session, REVIEWING, fix_prompt)
        if revised is None:
            entry["note"] = "expert revision unparseable; keeping prior model"
            review_log.append(entry)
            break
        new_hash = model_hash(revised)
        if new_hash == entry["model_hash"]:
            entry["note"] = "stalled: revision identical to prior model"
            review_log.append(entry)
            model = revised
            break
        model = revised
        review_log.append(entry)
    return model, review_log


def run_testing(
    text: str, cfg: PipelineConfig, session: Session
) -> tuple[str, ValidationReport]:
    """Validate/repair rounds until the report is clean or the cap hits."""
    tool = cfg.tools[cfg.tool_name]
    report = None
    for round_no in range(1, cfg.max_test_rounds + 1):
        report = tool(text)
        if report.clean or round_no == cfg.max_test_rounds:
            break
        fix_prompt = "\n".join(
            [
                f"The external tool '{cfg.tool_name}' checked the process"
                " model below and found format hallucinations.",
                "",
                "Process model:",
                text.rstrip("\n"),
                "",
                "Tool report:",
                render_report(report, format="machine"),
                "",
                "Fix every reported violation and answer with the complete"
                " corrected <process> block.",
            ]
        )
        reply = session.ask(EXPERT, fix_prompt, TESTING)
        block = extract_model_block(reply)
        if block is None:
            log.warning("testing repair reply has no <process> block; stopping")
            break
        text = block
    assert report is not None
    return text, report


def run_pipeline(
    requirement: str,
    cfg: PipelineConfig,
    transcript_path=None,
) -> PipelineResult:
    """Run the enabled phases in order and assemble the result.

    Deterministic with a replay backend: identical config and script give a
    byte-identical ``to_json()``.  Phase failures propagate with the partial
    transcript attached.
    """
    session = Session(cfg)
    warnings: list = []
    reports: dict = {"sampling": {"temperature": cfg.temperature}}

    model = run_generation(requirement, cfg, session)
    model = run_refinement(model, requirement, cfg, session, warnings)
    model, review_log = run_reviewing(model, cfg, session)
    if REVIEWING in cfg.phases_enabled:
        reports["reviewing"] = review_log

    text = serialize(model, check=False)
    clean: Optional[bool] = None
    if TESTING in cfg.phases_enabled:
        text, final_report = run_testing(text, cfg, session)
        machine = json.loads(render_report(final_report, format="machine"))
        reports["testing"] = machine
        clean = final_report.clean

    reports["warnings"] = warnings
    if not text.endswith("\n"):
        text += "\n"  # repaired replies come back without the file newline
    final_model = parse_outcome(text, strict=False).model
    result = PipelineResult(
        final_model=final_model,
        final_text=text,
        transcript=tuple(session.transcript),
        reports=reports,
        clean=clean,
    )
    if transcript_path is not None:
        save_transcript(result.transcript, transcript_path)
    return result


def save_transcript(transcript, path) -> None:
    """Persist messages as JSON-Lines, one ChatMessage object per line."""
    with open(path, "w", encoding="utf-8") as handle:
        for message in transcript:
            handle.write(json.dumps(message.to_dict(), ensure_ascii=False))
            handle.write("\n")


def load_transcript(path) -> list:
    messages = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            messages.append(
                ChatMessage(
                    speaker=row["speaker"],
                    content=row["content"],
                    phase=row["phase"],
                    index=row["index"],
                    params=row.get("params"),
                )
            )
    return messages
