"""Query intent classification: 9 categories, a rule-based classifier, an
LLM-prompt classifier with rule fallback, and an evaluation harness.

The rule classifier is a transparent stand-in baseline, not a trained
model; the harness accepts anything that maps a query to a category code.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from .errors import EmptyDataset

INTENT_NAMES = [
    "BasicInfo", "Ranking", "Direction", "Summary", "ProblemSolving",
    "Diagnostics", "Performance", "Outliers", "Impact",
]

INTENT_EXAMPLES = {
    0: "What is the growth in USA in FY 23?",
    1: "Which regions in USA have the highest revenue?",
    2: "Is the revenue in Canada increasing?",
    3: "Summarize the key economic insights in USA?",
    4: "How can the agricultural revenue be improved in USA?",
    5: "What are the top drivers for revenue deficits in the Midwest in FY23?",
    6: "How is the revenue trend in the south for industrial products in FY23?",
    7: "What are the outliers/exceptions for financial stocks in NYSE in FY23?",
    8: "How does the revenue deficits for northeast impact the Midwest trends?",
}


@dataclass(frozen=True)
class IntentCategory:
    code: int
    name: str

    def __post_init__(self):
        if not 0 <= self.code <= 8 or INTENT_NAMES[self.code] != self.name:
            raise ValueError(f"unknown intent ({self.code}, {self.name})")


INTENTS = [IntentCategory(i, name) for i, name in enumerate(INTENT_NAMES)]


def intent_by_code(code: int) -> IntentCategory:
    return INTENTS[code]


@dataclass
class RuleTable:
    """Ordered precedence list of (intent code, compiled patterns)."""

    rules: list[tuple[int, list[re.Pattern]]]
    default: int = 0

    @classmethod
    def from_data(cls, data: dict) -> "RuleTable":
        rules = [
            (int(entry["intent"]), [re.compile(p) for p in entry["patterns"]])
            for entry in data["rules"]
        ]
        return cls(rules=rules, default=int(data.get("default", 0)))

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleTable":
        return cls.from_data(json.loads(Path(path).read_text(encoding="utf-8")))


def default_rules() -> RuleTable:
    raw = resources.files("veritab").joinpath("data/intent_rules.json").read_text("utf-8")
    return RuleTable.from_data(json.loads(raw))


_DEFAULT_RULES: RuleTable | None = None


def classify_rule(query: str, rules: RuleTable | None = None) -> IntentCategory:
    """First matching rule in precedence order; no match falls to the default."""
    global _DEFAULT_RULES
    if rules is None:
        if _DEFAULT_RULES is None:
            _DEFAULT_RULES = default_rules()
        rules = _DEFAULT_RULES
    low = query.lower()
    for code, patterns in rules.rules:
        if any(p.search(low) for p in patterns):
            return intent_by_code(code)
    return intent_by_code(rules.default)


def classification_prompt(query: str) -> str:
    lines = [
        "Classify the user question into exactly one of these 9 intent categories.",
        "Reply with a single integer between 0 and 8 and nothing else.",
        "",
    ]
    for code, name in enumerate(INTENT_NAMES):
        lines.append(f'{code} = {name}. Example: "{INTENT_EXAMPLES[code]}"')
    lines += ["", f'Question: "{query}"', "Answer:"]
    return "\n".join(lines)


_INT_RE = re.compile(r"-?\d+")


def classify_llm(
    query: str,
    gateway: Callable[[str], str],
    rules: RuleTable | None = None,
) -> tuple[IntentCategory, bool]:
    """Ask a completion backend to pick the category.

    Returns (category, used_fallback). Unparseable or failing completions
    fall back to the rule classifier.
    """
    try:
        text = gateway(classification_prompt(query))
    except Exception:
        return classify_rule(query, rules), True
    m = _INT_RE.search(text or "")
    if m:
        code = int(m.group(0))
        if 0 <= code <= 8:
            return intent_by_code(code), False
    return classify_rule(query, rules), True


@dataclass
class ClassifierReport:
    """Per-class precision/recall, macro averages and the confusion matrix."""

    precision: dict[int, float] = field(default_factory=dict)
    recall: dict[int, float] = field(default_factory=dict)
    support: dict[int, int] = field(default_factory=dict)
    macro_precision: float = 0.0
    macro_recall: float = 0.0
    confusion: list[list[int]] = field(default_factory=list)  # [true][predicted]

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {
                    "intent": code,
                    "name": INTENT_NAMES[code],
                    "precision": self.precision[code],
                    "recall": self.recall[code],
                    "support": self.support[code],
                }
                for code in sorted(self.precision)
            ],
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "confusion": self.confusion,
        }


def evaluate_classifier(
    classifier: Callable[[str], IntentCategory | int],
    labeled: list[tuple[str, int]],
) -> ClassifierReport:
    """Standard one-vs-all precision/recall from the confusion matrix.

    Macro averages are unweighted means over classes with support > 0;
    a class that was never predicted gets precision 0.0.
    """
    if not labeled:
        raise EmptyDataset("no labeled queries")
    n = len(INTENT_NAMES)
    confusion = [[0] * n for _ in range(n)]
    for question, label in labeled:
        if not 0 <= int(label) <= 8:
            raise ValueError(f"label out of range: {label}")
        predicted = classifier(question)
        code = predicted.code if isinstance(predicted, IntentCategory) else int(predicted)
        confusion[int(label)][code] += 1

    report = ClassifierReport(confusion=confusion)
    for c in range(n):
        tp = confusion[c][c]
        support = sum(confusion[c])
        predicted_c = sum(confusion[t][c] for t in range(n))
        report.support[c] = support
        report.precision[c] = tp / predicted_c if predicted_c else 0.0
        report.recall[c] = tp / support if support else 0.0
    with_support = [c for c in range(n) if report.support[c] > 0]
    report.macro_precision = sum(report.precision[c] for c in with_support) / len(with_support)
    report.macro_recall = sum(report.recall[c] for c in with_support) / len(with_support)
    return report
