"""Personalized prompt assembly from task templates and retrieved reviews."""

from __future__ import annotations

import json
import logging
import math
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from reviewrag.errors import TemplateMismatch
from reviewrag.retrieval import RetrievedContext
from reviewrag.tasks import SHORT_GEN, TASK_TYPES

log = logging.getLogger(__name__)

DEFAULT_LENGTH_WORDS = 5
DEFAULT_TOKEN_BUDGET = 6000

_INSTRUCTION_FIELDS = {"input", "context", "length_constraint"}
_ENTRY_FIELDS = {"title", "text", "rating"}


def _placeholders(fmt: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(fmt) if name is not None}


@dataclass(frozen=True)
class PromptTemplate:
    task_id: int
    task_type: str
    instruction: str
    instruction_no_context: str
    context_entry_format: str
    length_constraint: str = "in at most {n} words"
    system: str = ""

    def __post_init__(self):
        if self.task_type not in TASK_TYPES:
            raise TemplateMismatch(f"unknown task type {self.task_type!r}")
        for name, fmt, allowed in (
            ("instruction", self.instruction, _INSTRUCTION_FIELDS),
            ("instruction_no_context", self.instruction_no_context, _INSTRUCTION_FIELDS - {"context"}),
            ("context_entry_format", self.context_entry_format, _ENTRY_FIELDS),
        ):
            extra = _placeholders(fmt) - allowed
            if extra:
                raise TemplateMismatch(f"task {self.task_id} {name} has unknown placeholders {sorted(extra)}")
        if "input" not in _placeholders(self.instruction):
            raise TemplateMismatch(f"task {self.task_id} instruction lacks {{input}}")
        if "context" not in _placeholders(self.instruction):
            raise TemplateMismatch(f"task {self.task_id} instruction lacks {{context}}")
        if self.task_type == SHORT_GEN and "length_constraint" not in _placeholders(self.instruction):
            raise TemplateMismatch(f"task {self.task_id} short-text instruction lacks {{length_constraint}}")


@dataclass(frozen=True)
class TemplateSet:
    version: str
    system: str
    templates: dict

    def __getitem__(self, task_id: int) -> PromptTemplate:
        return self.templates[int(task_id)]


def load_templates(path: Optional[str | Path] = None) -> TemplateSet:
    """Load the template file; the bundled one when ``path`` is None."""
    if path is None:
        raw = resources.files("reviewrag").joinpath("data/templates.json").read_text(encoding="utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    doc = json.loads(raw)
    system = doc.get("system", "")
    length = doc.get("length_constraint", "in at most {n} words")
    templates = {}
    for rec in doc["templates"]:
        tpl = PromptTemplate(
            task_id=int(rec["task_id"]),
            task_type=rec["task_type"],
            instruction=rec["instruction"],
            instruction_no_context=rec["instruction_no_context"],
            context_entry_format=rec["context_entry_format"],
            length_constraint=rec.get("length_constraint", length),
            system=rec.get("system", system),
        )
        templates[tpl.task_id] = tpl
    return TemplateSet(str(doc.get("version", "")), system, templates)


@dataclass(frozen=True)
class AssembledPrompt:
    text: str
    token_estimate: int
    context_count: int
    system: str = ""
    # Raw context review texts in rank order; read by the extractive mock.
    context_texts: tuple = ()


def estimate_tokens(text: str) -> int:
    # ~4/3 tokens per whitespace word for English BPE vocabularies.
    return math.ceil(len(text.split()) * 4 / 3)


def render_entry(template: PromptTemplate, review) -> str:
    rating = "N/A" if review.rating is None else str(review.rating)
    return template.context_entry_format.format(title=review.title, text=review.text, rating=rating)


def assemble(template: PromptTemplate, x: str, ctx: RetrievedContext, *,
             length_constraint_words: Optional[int] = DEFAULT_LENGTH_WORDS,
             task_type: Optional[str] = None,
             token_budget: Optional[int] = DEFAULT_TOKEN_BUDGET) -> AssembledPrompt:
    """Combine the task input with the retrieved reviews.

    Entries are numbered ``1.``, ``2.``, ... in rank order. An empty context
    switches to the no-retrieval wording instead of printing an empty block.
    """
    if task_type is not None and task_type != template.task_type:
        raise TemplateMismatch(f"template is for {template.task_type}, task is {task_type}")
    if template.task_type == SHORT_GEN:
        n = DEFAULT_LENGTH_WORDS if length_constraint_words is None else int(length_constraint_words)
        clause = template.length_constraint.format(n=n)
    else:
        clause = ""
    items = list(ctx.items)
    if items:
        block = "\n".join(f"{i}. {render_entry(template, it.review)}" for i, it in enumerate(items, 1))
        text = template.instruction.format(input=x, context=block, length_constraint=clause)
    else:
        text = template.instruction_no_context.format(input=x, length_constraint=clause)
    est = estimate_tokens(template.system + " " + text)
    if token_budget is not None and est > token_budget:
        log.warning("prompt for task %d is ~%d tokens, over the budget of %d",
                    template.task_id, est, token_budget)
    return AssembledPrompt(
        text=text,
        token_estimate=est,
        context_count=len(items),
        system=template.system,
        context_texts=tuple(it.review.text for it in items),
    )
