"""Keyword dictionary: canonical entities, hierarchies, spell correction, extraction.

The lexicon file is JSON with three top-level keys:

    {
      "metrics": [
        {"name": "GDP", "synonyms": ["gross domestic product"], "definition": "..."}
      ],
      "geo_tree": [
        {"name": "Europe", "children": [{"name": "Germany"}, {"name": "France"}]}
      ],
      "period_tree": [
        {"name": "FY23", "children": [{"name": "FY23-Q1"}, {"name": "FY23-Q2"}]}
      ]
    }

Every node may carry "synonyms". Surface forms are matched case-insensitively
and must be globally unambiguous: one surface form points at exactly one
canonical entity.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AmbiguousSynonym, CycleError, SchemaError

_WORD_RE = re.compile(r"[a-z0-9]+")
_NUMERIC_TOKEN_RE = re.compile(r"^[+-]?[\d.,]+%?$")

METRIC = "metric"
GEO = "geo"
PERIOD = "period"


def _phrase_words(surface: str) -> tuple[str, ...]:
    return tuple(_WORD_RE.findall(surface.lower()))


@dataclass(frozen=True)
class NamedEntities:
    """Canonical metric/geo/period sets pulled out of a piece of text."""

    metrics: frozenset[str] = frozenset()
    geos: frozenset[str] = frozenset()
    periods: frozenset[str] = frozenset()

    def __bool__(self) -> bool:
        return bool(self.metrics or self.geos or self.periods)

    def all(self) -> frozenset[str]:
        return self.metrics | self.geos | self.periods

    def union(self, other: "NamedEntities") -> "NamedEntities":
        return NamedEntities(
            metrics=self.metrics | other.metrics,
            geos=self.geos | other.geos,
            periods=self.periods | other.periods,
        )


@dataclass(eq=False)
class KeywordDictionary:
    """Immutable-after-load dictionary of metrics, geos and periods."""

    definitions: dict[str, str] = field(default_factory=dict)  # metric -> text, file order
    metric_names: list[str] = field(default_factory=list)
    _kind_of: dict[str, str] = field(default_factory=dict)  # canonical -> kind
    _surface_to_canonical: dict[str, str] = field(default_factory=dict)  # lowercase surface -> canonical
    _children: dict[str, list[str]] = field(default_factory=dict)
    _parent: dict[str, str] = field(default_factory=dict)
    _phrases: dict[str, list[tuple[tuple[str, ...], str]]] = field(default_factory=dict)
    _max_phrase_len: int = 1
    vocabulary: set[str] = field(default_factory=set)  # lowercase single words
    _display: dict[str, str] = field(default_factory=dict)  # lowercase word -> original casing
    # memo for extract_entities; the dictionary never mutates after load
    _entity_cache: dict[str, "NamedEntities"] = field(
        default_factory=dict, repr=False, compare=False
    )

    # -- construction ----------------------------------------------------

    @classmethod
    def from_data(cls, data: dict) -> "KeywordDictionary":
        if not isinstance(data, dict):
            raise SchemaError("lexicon root must be a JSON object")
        for key in ("metrics", "geo_tree", "period_tree"):
            if key not in data:
                raise SchemaError(f"missing top-level key: {key}")
            if not isinstance(data[key], list):
                raise SchemaError(f"{key} must be a list")

        d = cls()
        for i, entry in enumerate(data["metrics"]):
            path = f"metrics[{i}]"
            if not isinstance(entry, dict) or not entry.get("name"):
                raise SchemaError(f"{path}: metric entries need a non-empty 'name'")
            name = str(entry["name"])
            d._register(name, METRIC, path)
            d.metric_names.append(name)
            for syn in entry.get("synonyms", []) or []:
                d._register_surface(str(syn), name, f"{path}.synonyms")
            definition = str(entry.get("definition", "") or "")
            if definition:
                d.definitions[name] = definition

        d._load_forest(data["geo_tree"], GEO, "geo_tree")
        d._load_forest(data["period_tree"], PERIOD, "period_tree")
        d._index_phrases()
        return d

    def _register(self, name: str, kind: str, path: str) -> None:
        if name in self._kind_of:
            raise CycleError(f"{path}: entity '{name}' declared twice")
        self._kind_of[name] = kind
        self._register_surface(name, name, path)

    def _register_surface(self, surface: str, canonical: str, path: str) -> None:
        key = surface.lower()
        owner = self._surface_to_canonical.get(key)
        if owner is not None and owner != canonical:
            raise AmbiguousSynonym(
                f"{path}: surface form '{surface}' maps to both '{owner}' and '{canonical}'"
            )
        self._surface_to_canonical[key] = canonical
        for word in surface.split():
            w = word.lower()
            self.vocabulary.add(w)
            self._display.setdefault(w, word)

    def _load_forest(self, roots: list, kind: str, path: str) -> None:
        for i, node in enumerate(roots):
            self._load_node(node, kind, None, f"{path}[{i}]")

    def _load_node(self, node, kind: str, parent: str | None, path: str) -> None:
        if not isinstance(node, dict) or not node.get("name"):
            raise SchemaError(f"{path}: tree nodes need a non-empty 'name'")
        name = str(node["name"])
        self._register(name, kind, path)
        if parent is not None:
            self._parent[name] = parent
            self._children.setdefault(parent, []).append(name)
        for syn in node.get("synonyms", []) or []:
            self._register_surface(str(syn), name, f"{path}.synonyms")
        for j, child in enumerate(node.get("children", []) or []):
            self._load_node(child, kind, name, f"{path}.children[{j}]")

    def _index_phrases(self) -> None:
        for surface, canonical in self._surface_to_canonical.items():
            words = _phrase_words(surface)
            if not words:
                continue
            self._phrases.setdefault(words[0], []).append((words, canonical))
            self._max_phrase_len = max(self._max_phrase_len, len(words))
        for bucket in self._phrases.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))

    # -- queries ----------------------------------------------------------

    def lookup(self, surface: str) -> str | None:
        """Canonical entity for a surface form, or None."""
        return self._surface_to_canonical.get(surface.lower())

    def kind(self, canonical: str) -> str | None:
        return self._kind_of.get(canonical)

    def ancestors(self, name: str) -> list[str]:
        """Chain of ancestors from closest parent to the root."""
        out = []
        cur = self._parent.get(name)
        while cur is not None:
            out.append(cur)
            cur = self._parent.get(cur)
        return out

    def descendants(self, name: str) -> list[str]:
        out = []
        stack = list(self._children.get(name, []))
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(self._children.get(n, []))
        return out

    def entities_of_kind(self, kind: str) -> list[str]:
        return [name for name, k in self._kind_of.items() if k == kind]


def load_lexicon(path: str | Path) -> KeywordDictionary:
    """Parse and validate a lexicon file, rejecting schema violations."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return KeywordDictionary.from_data(data)


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character inserts, deletes and substitutions."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,          # delete from a
                cur[j - 1] + 1,       # insert into a
                prev[j - 1] + (ca != cb),  # substitute
            ))
        prev = cur
    return prev[-1]


def spell_correct(query: str, dictionary: KeywordDictionary, max_dist: int = 2) -> str:
    """Replace out-of-vocabulary tokens by their closest vocabulary word.

    Numeric tokens and tokens already in the vocabulary pass through.
    Tokens of length <= 3 only accept corrections at distance 1.
    Ties prefer the smaller distance, then the lexicographically smaller word.
    """
    out: list[str] = []
    for token in query.split():
        core, prefix, suffix = _split_affixes(token)
        low = core.lower()
        if not core or low in dictionary.vocabulary or _NUMERIC_TOKEN_RE.match(core):
            out.append(token)
            continue
        budget = max_dist if len(core) > 3 else min(max_dist, 1)
        best_word, best_dist = None, budget + 1
        for word in sorted(dictionary.vocabulary):
            dist = levenshtein(low, word)
            if dist < best_dist:
                best_word, best_dist = word, dist
        if best_word is None:
            out.append(token)
        else:
            out.append(prefix + dictionary._display.get(best_word, best_word) + suffix)
    return " ".join(out)


def _split_affixes(token: str) -> tuple[str, str, str]:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end], token[:start], token[end:]


_ENTITY_CACHE_LIMIT = 100_000


def extract_entities(text: str, dictionary: KeywordDictionary) -> NamedEntities:
    """Longest-match, case-insensitive phrase scan over all surface forms."""
    cached = dictionary._entity_cache.get(text)
    if cached is not None:
        return cached
    words = _WORD_RE.findall(text.lower())
    metrics: set[str] = set()
    geos: set[str] = set()
    periods: set[str] = set()
    by_kind = {METRIC: metrics, GEO: geos, PERIOD: periods}

    i = 0
    n = len(words)
    while i < n:
        matched = False
        for phrase, canonical in dictionary._phrases.get(words[i], []):
            if tuple(words[i:i + len(phrase)]) == phrase:
                by_kind[dictionary.kind(canonical)].add(canonical)
                i += len(phrase)
                matched = True
                break
        if not matched:
            i += 1
    result = NamedEntities(
        metrics=frozenset(metrics), geos=frozenset(geos), periods=frozenset(periods)
    )
    if len(dictionary._entity_cache) < _ENTITY_CACHE_LIMIT:
        dictionary._entity_cache[text] = result
    return result


def expand_hierarchy(entities: NamedEntities, dictionary: KeywordDictionary) -> NamedEntities:
    """Add every descendant of each geo and period; metrics are flat."""
    geos = set(entities.geos)
    for g in entities.geos:
        geos.update(dictionary.descendants(g))
    periods = set(entities.periods)
    for p in entities.periods:
        periods.update(dictionary.descendants(p))
    return NamedEntities(
        metrics=entities.metrics, geos=frozenset(geos), periods=frozenset(periods)
    )


def filter_definitions(dictionary: KeywordDictionary, entities: NamedEntities) -> list[str]:
    """Definitions of exactly the query's metrics, in dictionary order."""
    return [
        dictionary.definitions[name]
        for name in dictionary.metric_names
        if name in entities.metrics and name in dictionary.definitions
    ]
