"""Custom prompt assembly: five sections, guardrails, delimiters and
token-budget trimming.

Section order in the assembled prompt is always introduction, preamble,
context, instructions, example, question; follow-up turns slot in between
example and question. The preamble is assembled last because it needs both
the query entities and the finally-selected chunks.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MalformedTemplate, MissingTemplate, PromptOverflow
from .forge import DataChunk
from .intent import IntentCategory, intent_by_code
from .lexicon import (
    KeywordDictionary, NamedEntities, extract_entities, filter_definitions,
)
from .ranking import RankedSelection

DEFAULT_TOKEN_LIMIT = 4096
DEFAULT_TOKEN_MULTIPLIER = 1.3

SECTION_ORDER = ("introduction", "preamble", "context", "instructions", "example", "question")
HISTORY_SECTION = "prior turns"

REFUSAL_TEXT = "I cannot answer the question."

GUARDRAIL_SENTENCES = [
    "If you are uncertain about any statement, refrain from generating it.",
    f"If the context does not contain the information needed, reply exactly: {REFUSAL_TEXT}",
]

BULLET_INSTRUCTION = "Format the response as bullet points, one fact per bullet."

_SECTION_MARK_RE = re.compile(r"^---SECTION:([a-z ]+)---\s*$", re.MULTILINE)


@dataclass(frozen=True)
class PromptTemplate:
    """Per-intent template: introduction text, instruction steps, example QA."""

    intent: IntentCategory
    introduction: str
    instructions: tuple[str, ...]
    example: str
    delimiter: str = "---{name}---"


@dataclass
class PromptBundle:
    """An assembled prompt with individually addressable sections."""

    full_text: str
    sections: dict[str, str]
    chunk_ids: list[str]
    chunks: list[DataChunk]
    definitions: list[str]
    est_tokens: int
    query: str
    intent: IntentCategory


def parse_template(text: str, intent: IntentCategory) -> PromptTemplate:
    marks = list(_SECTION_MARK_RE.finditer(text))
    sections: dict[str, str] = {}
    for i, mark in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        sections[mark.group(1)] = text[mark.end():end].strip()
    for needed in ("introduction", "instructions", "example"):
        if needed not in sections:
            raise MalformedTemplate(f"intent {intent.code}: missing section '{needed}'")
    steps = [line.strip() for line in sections["instructions"].splitlines() if line.strip()]
    if not steps:
        raise MalformedTemplate(f"intent {intent.code}: empty instructions")
    return PromptTemplate(
        intent=intent,
        introduction=sections["introduction"],
        instructions=tuple(steps),
        example=sections["example"],
    )


def load_templates(directory: str | Path) -> dict[int, PromptTemplate]:
    """One template file per intent code, named '<code>_<anything>.txt'."""
    directory = Path(directory)
    templates: dict[int, PromptTemplate] = {}
    for code in range(9):
        matches = sorted(directory.glob(f"{code}_*.txt"))
        if not matches:
            raise MissingTemplate(code)
        templates[code] = parse_template(
            matches[0].read_text(encoding="utf-8"), intent_by_code(code)
        )
    return templates


def default_templates() -> dict[int, PromptTemplate]:
    base = resources.files("veritab").joinpath("templates")
    templates: dict[int, PromptTemplate] = {}
    for code in range(9):
        candidates = sorted(
            p.name for p in base.iterdir() if p.name.startswith(f"{code}_")
        )
        if not candidates:
            raise MissingTemplate(code)
        templates[code] = parse_template(
            base.joinpath(candidates[0]).read_text(encoding="utf-8"), intent_by_code(code)
        )
    return templates


def estimate_tokens(text: str, multiplier: float = DEFAULT_TOKEN_MULTIPLIER) -> int:
    """ceil(whitespace tokens x multiplier): a stated, provider-overridable
    approximation of provider tokenizers."""
    words = len(text.split())
    if words == 0:
        return 0
    return math.ceil(round(words * multiplier, 9))


def _join_names(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def build_preamble(
    query_entities: NamedEntities,
    dictionary: KeywordDictionary,
    chunks: list[DataChunk],
) -> str:
    """Definitions for the query's metrics plus hierarchy facts that connect
    query entities to entities actually present in the selected chunks."""
    lines: list[str] = []
    for name in dictionary.metric_names:
        if name in query_entities.metrics and name in dictionary.definitions:
            lines.append(f"{name}: {dictionary.definitions[name]}")

    present: set[str] = set()
    for chunk in chunks:
        present.update(chunk.metrics)
        present.update(chunk.geos)
        present.update(chunk.periods)

    for entity in sorted(query_entities.geos | query_entities.periods):
        inside = sorted(set(dictionary.descendants(entity)) & present)
        if inside:
            lines.append(f"{_join_names(inside)} are part of {entity}.")
        elif entity not in present:
            for ancestor in dictionary.ancestors(entity):
                if ancestor in present:
                    lines.append(f"{entity} belongs to {ancestor}.")
                    break

    if not lines:
        lines.append("All terms carry their ordinary financial meaning.")
    return "\n".join(lines)


def _wrap(name: str, body: str, delimiter: str = "---{name}---") -> str:
    mark = delimiter.format(name=name)
    return f"{mark}\n{body}\n{mark}"


def build_prompt(
    query: str,
    intent: IntentCategory,
    templates: dict[int, PromptTemplate],
    dictionary: KeywordDictionary,
    selection: RankedSelection,
    chunks: list[DataChunk],
    token_limit: int = DEFAULT_TOKEN_LIMIT,
    history: list[tuple[str, str]] | None = None,
    token_multiplier: float = DEFAULT_TOKEN_MULTIPLIER,
) -> PromptBundle:
    """Assemble the prompt, dropping lowest-similarity chunks until it fits.

    ``chunks`` must be the selection's chunks in ranked order. Raises
    PromptOverflow when even a single chunk cannot fit the budget.
    """
    if not selection.items or not chunks:
        raise ValueError("build_prompt needs a non-empty selection")
    if len(chunks) != len(selection.items):
        raise ValueError("chunks must align with the selection")
    template = templates.get(intent.code)
    if template is None:
        raise MissingTemplate(intent.code)

    query_entities = extract_entities(query, dictionary)
    definitions = filter_definitions(dictionary, query_entities)

    for keep in range(len(chunks), 0, -1):
        kept = chunks[:keep]
        sections = _assemble_sections(
            query, template, dictionary, query_entities, kept, history
        )
        full_text = "\n\n".join(
            _wrap(name, sections[name], template.delimiter)
            for name in _section_sequence(sections)
        )
        est = estimate_tokens(full_text, token_multiplier)
        if est <= token_limit:
            return PromptBundle(
                full_text=full_text,
                sections=sections,
                chunk_ids=[cid for cid, _ in selection.items[:keep]],
                chunks=list(kept),
                definitions=definitions,
                est_tokens=est,
                query=query,
                intent=intent,
            )
    raise PromptOverflow(
        f"one chunk plus mandatory sections exceeds the limit of {token_limit} tokens"
    )


def _section_sequence(sections: dict[str, str]) -> list[str]:
    order = list(SECTION_ORDER[:-1])
    if HISTORY_SECTION in sections:
        order.append(HISTORY_SECTION)
    order.append("question")
    return order


def _assemble_sections(
    query: str,
    template: PromptTemplate,
    dictionary: KeywordDictionary,
    query_entities: NamedEntities,
    chunks: list[DataChunk],
    history: list[tuple[str, str]] | None,
) -> dict[str, str]:
    introduction = "\n".join([template.introduction] + GUARDRAIL_SENTENCES)
    instructions = "\n".join(
        [f"{i}. {step}" for i, step in enumerate(template.instructions, start=1)]
        + [f"{len(template.instructions) + 1}. {BULLET_INSTRUCTION}"]
    )
    sections = {
        "introduction": introduction,
        "preamble": build_preamble(query_entities, dictionary, chunks),
        "context": "\n\n".join(c.text for c in chunks),
        "instructions": instructions,
        "example": template.example,
        "question": query,
    }
    if history:
        sections[HISTORY_SECTION] = "\n".join(
            f"Q: {q}\nA: {a}" for q, a in history
        )
    return sections
