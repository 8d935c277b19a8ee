"""Response quality scoring: six binary metrics and a confidence label.

Also home of the number grammar used everywhere else: chunk number
multisets, prompt-context ground truth and response checks all go through
:func:`extract_numbers` so that "number" means exactly one thing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .lexicon import KeywordDictionary, NamedEntities, extract_entities

if TYPE_CHECKING:  # pragma: no cover
    from .forge import DataChunk
    from .prompting import PromptBundle

NUMBER_TOLERANCE = 1e-9

HIGH, MEDIUM, LOW = "High", "Medium", "Low"

POSITIVE_WORDS = frozenset(
    {"increase", "increasing", "increased", "grew", "growth", "improved", "up", "gain"}
)
NEGATIVE_WORDS = frozenset(
    {"decrease", "decreasing", "declined", "dropped", "fell", "down", "slowed"}
)

# Fiscal-calendar tokens are not data values. Masks keep string length so
# character offsets into the original text stay valid.
_FISCAL_MASKS = [
    re.compile(r"\bFY\s?-?\d{2,4}(?:\s*-\s*Q[1-4])?\b", re.IGNORECASE),
    re.compile(r"\bQ[1-4]\b(?:\s+(?:of\s+)?(?:FY\s?-?)?\d{2,4}\b)?", re.IGNORECASE),
    re.compile(r"\b(?:19\d{2}|20\d{2}|2100)\b(?=\s*(?:Q[1-4]\b|FY\b))", re.IGNORECASE),
]

_NUMBER_RE = re.compile(
    r"(?<![\w.,])[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?!\w)"
)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")
_NORMALIZE_RE = re.compile(r"[^a-z0-9]+")


def _mask_fiscal_tokens(text: str) -> str:
    for pattern in _FISCAL_MASKS:
        text = pattern.sub(lambda m: " " * len(m.group(0)), text)
    return text


def extract_numbers(text: str) -> list[float]:
    """All decimal values in the text, in order of appearance.

    Signed decimals and thousands separators are recognized; "%"/"percent"
    suffixes are dropped while the magnitude is kept; fiscal tokens such as
    FY23, Q3 or "Q3 2024" never count as numbers.
    """
    return [value for value, _ in extract_numbers_with_spans(text)]


def extract_numbers_with_spans(text: str) -> list[tuple[float, tuple[int, int]]]:
    masked = _mask_fiscal_tokens(text)
    out = []
    for m in _NUMBER_RE.finditer(masked):
        out.append((float(m.group(0).replace(",", "")), m.span()))
    return out


def numbers_match(a: float, b: float, tol: float = NUMBER_TOLERANCE) -> bool:
    return abs(a - b) <= tol


def number_in(value: float, pool: Iterable[float], tol: float = NUMBER_TOLERANCE) -> bool:
    return any(numbers_match(value, x, tol) for x in pool)


def split_sentences(text: str) -> list[str]:
    """Sentence split on ./!/? followed by whitespace, and on line breaks.

    Decimal points are safe: they are never followed by whitespace.
    """
    parts = _SENTENCE_SPLIT_RE.split(text)
    out = []
    for part in parts:
        s = part.strip()
        if s.startswith(("- ", "* ")):
            s = s[2:].strip()
        if s:
            out.append(s)
    return out


def normalize_words(text: str) -> list[str]:
    """Lowercase, strip punctuation, collapse whitespace; returns word list."""
    return [w for w in _NORMALIZE_RE.sub(" ", text.lower()).split() if w]


def has_common_run(a_words: Sequence[str], b_words: Sequence[str], delta: int) -> bool:
    """True if some contiguous run of >= delta words occurs in both sequences."""
    if delta < 1 or len(a_words) < delta or len(b_words) < delta:
        return False
    grams = {tuple(a_words[i:i + delta]) for i in range(len(a_words) - delta + 1)}
    return any(
        tuple(b_words[i:i + delta]) in grams
        for i in range(len(b_words) - delta + 1)
    )


def _covered(entity: str, available: frozenset[str] | set[str], dictionary: KeywordDictionary) -> bool:
    """An entity counts as covered when it or one of its descendants is present."""
    if entity in available:
        return True
    return any(d in available for d in dictionary.descendants(entity))


def entities_covered(
    required: NamedEntities, available: NamedEntities, dictionary: KeywordDictionary
) -> list[str]:
    """Names of required entities that the available set fails to cover."""
    pool = available.all()
    return [e for e in sorted(required.all()) if not _covered(e, pool, dictionary)]


# --- the six metrics ---------------------------------------------------------

def score_s1(
    query_entities: NamedEntities,
    response_entities: NamedEntities,
    dictionary: KeywordDictionary,
) -> int:
    """Question-answer continuity: the response must name every query entity,
    either verbatim or through one of its descendants."""
    return 0 if entities_covered(query_entities, response_entities, dictionary) else 1


def score_s2(response_text: str, chunks: Sequence["DataChunk"]) -> int:
    """Numeric grounding: every response number must exist in the context."""
    context = [n for c in chunks for n in c.numbers]
    return 1 if all(number_in(v, context) for v in extract_numbers(response_text)) else 0


def score_s3(prompt_text: str, response_text: str, delta: int = 10) -> int:
    """Uniqueness from prompt: no shared run of >= delta words."""
    if delta < 2:
        raise ValueError("delta must be >= 2")
    return 0 if has_common_run(
        normalize_words(prompt_text), normalize_words(response_text), delta
    ) else 1


def score_s4(response_text: str) -> int:
    """Numeric sensibility: directional wording must agree with number signs."""
    for sentence in split_sentences(response_text):
        words = set(normalize_words(sentence))
        numbers = extract_numbers(sentence)
        if not numbers:
            continue
        if words & POSITIVE_WORDS and any(v < 0 for v in numbers):
            return 0
        if words & NEGATIVE_WORDS and (
            re.search(r"\+\s?\d", _mask_fiscal_tokens(sentence)) or "positive" in words
        ):
            return 0
    return 1


def score_s5(
    query_entities: NamedEntities,
    chunks: Sequence["DataChunk"],
    dictionary: KeywordDictionary,
) -> int:
    """Context cleanliness: 1 when no selected chunk brings foreign metrics."""
    if not query_entities.metrics:
        return 1
    allowed = set(query_entities.metrics)  # metric hierarchy is flat
    return 1 if all(set(c.metrics) <= allowed for c in chunks) else 0


def score_s6(
    response_text: str,
    chunks: Sequence["DataChunk"],
    dictionary: KeywordDictionary,
) -> int:
    """Contextual continuity: every numeric response sentence must be backed by
    a context sentence carrying the same number and covering its entities."""
    context_sentences = []
    for chunk in chunks:
        for sentence in split_sentences(chunk.text):
            context_sentences.append(
                (extract_numbers(sentence), extract_entities(sentence, dictionary))
            )

    for sentence in split_sentences(response_text):
        numbers = extract_numbers(sentence)
        if not numbers:
            continue
        entities = extract_entities(sentence, dictionary)
        for value in numbers:
            witnessed = any(
                number_in(value, nums) and not entities_covered(entities, ents, dictionary)
                for nums, ents in context_sentences
            )
            if not witnessed:
                return 0
    return 1


def confidence(flags: Sequence[int]) -> str:
    """High / Medium / Low from the sum of the six binary flags."""
    total = sum(flags)
    if total >= 5:
        return HIGH
    if total >= 3:
        return MEDIUM
    return LOW


@dataclass
class ResponseScores:
    """The six flags, their sum, the confidence label and failure reasons."""

    s1: int
    s2: int
    s3: int
    s4: int
    s5: int
    s6: int
    sum: int = 0
    confidence: str = ""
    diagnostics: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.sum = self.s1 + self.s2 + self.s3 + self.s4 + self.s5 + self.s6
        self.confidence = confidence(self.flags())

    def flags(self) -> tuple[int, int, int, int, int, int]:
        return (self.s1, self.s2, self.s3, self.s4, self.s5, self.s6)

    def to_dict(self) -> dict:
        return {
            "s1": self.s1, "s2": self.s2, "s3": self.s3,
            "s4": self.s4, "s5": self.s5, "s6": self.s6,
            "sum": self.sum,
            "confidence": self.confidence,
            "diagnostics": [
                {"metric": k, "reason": v} for k, v in sorted(self.diagnostics.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseScores":
        scores = cls(*(int(data[f"s{i}"]) for i in range(1, 7)))
        scores.diagnostics = {
            d["metric"]: d["reason"] for d in data.get("diagnostics", [])
        }
        return scores


def score_response(
    query: str,
    bundle: "PromptBundle",
    response_text: str,
    dictionary: KeywordDictionary,
    delta: int = 10,
) -> ResponseScores:
    """Compute s1..s6 and confidence for one (query, prompt, response) triple."""
    query_entities = extract_entities(query, dictionary)
    response_entities = extract_entities(response_text, dictionary)
    chunks = bundle.chunks

    s1 = score_s1(query_entities, response_entities, dictionary)
    s2 = score_s2(response_text, chunks)
    s3 = score_s3(bundle.full_text, response_text, delta)
    s4 = score_s4(response_text)
    s5 = score_s5(query_entities, chunks, dictionary)
    s6 = score_s6(response_text, chunks, dictionary)

    diagnostics: dict[str, str] = {}
    if not s1:
        missing = entities_covered(query_entities, response_entities, dictionary)
        diagnostics["s1"] = f"response does not address: {', '.join(missing)}"
    if not s2:
        context = [n for c in chunks for n in c.numbers]
        fabricated = sorted(
            {v for v in extract_numbers(response_text) if not number_in(v, context)}
        )
        diagnostics["s2"] = (
            "numbers absent from context: " + ", ".join(f"{v:g}" for v in fabricated)
        )
    if not s3:
        diagnostics["s3"] = f"response repeats a run of {delta}+ prompt words verbatim"
    if not s4:
        diagnostics["s4"] = "directional wording contradicts a number's sign"
    if not s5:
        foreign = sorted(
            {m for c in chunks for m in c.metrics} - set(query_entities.metrics)
        )
        diagnostics["s5"] = "context includes metrics beyond the query: " + ", ".join(foreign)
    if not s6:
        diagnostics["s6"] = "a numeric sentence cites entities its context sentence does not back"

    scores = ResponseScores(s1, s2, s3, s4, s5, s6)
    scores.diagnostics = diagnostics
    return scores
