"""Provider-agnostic completions: deterministic mocks, an HTTP client with
retries, and the per-provider cost/token-limit registry.

The faithful mock stands in for a well-behaved model: it answers strictly
from the prompt's context section, rephrased so no long word run survives
verbatim. The adversarial mock starts from that answer and injects exactly
one class of defect, which gives the scoring engine something to catch.
"""

from __future__ import annotations

import contextlib
import json
import os
import re
import threading
import time
import weakref
import zlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import httpx

from .errors import (
    DefectImpossible, GatewayError, ProviderError, Timeout, TokenLimitExceeded,
)
from .lexicon import (
    GEO, METRIC, PERIOD, KeywordDictionary, expand_hierarchy, extract_entities,
)
from .prompting import REFUSAL_TEXT, PromptBundle
from .scoring import (
    extract_numbers, extract_numbers_with_spans, normalize_words, number_in,
    split_sentences,
)

ADVERSARIAL_MODES = (
    "fabricate_number", "entity_swap", "verbatim_copy", "wrong_sign", "off_topic",
)

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass
class ProviderConfig:
    """One completion backend: mock or HTTP, with cost and token limit."""

    name: str
    kind: str = "mock-faithful"  # mock-faithful | mock-adversarial | http
    endpoint: str | None = None
    token_limit: int = 4096
    prompt_token_cost: float = 0.0
    timeout: float = 30.0
    retries: int = 3
    backoff_base: float = 1.0
    mode: str = ""  # adversarial mode, for kind=mock-adversarial
    seed: int = 0
    api_key_env: str = ""  # env var holding the bearer credential, if any
    max_concurrency: int = 0  # 0 = unlimited in-flight completions

    def __post_init__(self):
        if self.token_limit <= 0:
            raise ValueError("token limit must be > 0")
        if self.prompt_token_cost < 0:
            raise ValueError("cost must be >= 0")
        if self.kind == "mock-adversarial" and self.mode not in ADVERSARIAL_MODES:
            raise ValueError(f"unknown adversarial mode: {self.mode!r}")
        if self.max_concurrency < 0:
            raise ValueError("max_concurrency must be >= 0")


@dataclass
class CompletionResult:
    text: str
    provider: str
    latency: float
    cost: float


def load_providers(path: str | Path) -> dict[str, ProviderConfig]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {p["name"]: ProviderConfig(**p) for p in data["providers"]}


def default_providers() -> dict[str, ProviderConfig]:
    raw = resources.files("veritab").joinpath("data/providers.json").read_text("utf-8")
    return {p["name"]: ProviderConfig(**p) for p in json.loads(raw)["providers"]}


def cost_estimate(tokens: int, provider: ProviderConfig) -> float:
    return tokens * provider.prompt_token_cost


class Gateway:
    """Dispatches completions to named providers; reentrant for mocks."""

    def __init__(
        self,
        providers: dict[str, ProviderConfig] | None = None,
        dictionary: KeywordDictionary | None = None,
        delta: int = 10,
        sleeper=time.sleep,
        http_client=None,
    ):
        self.providers = dict(providers) if providers is not None else default_providers()
        self.dictionary = dictionary
        self.delta = delta
        self._sleep = sleeper
        self._http = http_client or httpx
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._semaphore_lock = threading.Lock()

    def provider(self, name: str) -> ProviderConfig:
        if name not in self.providers:
            raise GatewayError(f"unknown provider: {name}")
        return self.providers[name]

    def complete(self, bundle: PromptBundle, provider_name: str) -> CompletionResult:
        provider = self.provider(provider_name)
        if bundle.est_tokens > provider.token_limit:
            raise TokenLimitExceeded(
                f"{bundle.est_tokens} estimated tokens > limit {provider.token_limit}"
            )
        start = time.perf_counter()
        with self._slot(provider):
            if provider.kind == "mock-faithful":
                text = mock_faithful(
                    bundle, self._require_dictionary(), delta=self.delta, seed=provider.seed
                )
            elif provider.kind == "mock-adversarial":
                text = mock_adversarial(
                    bundle, provider.mode, self._require_dictionary(),
                    delta=self.delta, seed=provider.seed,
                )
            elif provider.kind == "http":
                text = self._http_complete(bundle.full_text, provider)
            else:
                raise GatewayError(f"unknown provider kind: {provider.kind}")
        latency = time.perf_counter() - start
        return CompletionResult(
            text=text,
            provider=provider.name,
            latency=latency,
            cost=cost_estimate(bundle.est_tokens, provider),
        )

    def _slot(self, provider: ProviderConfig):
        """Per-provider concurrency cap; no-op when unlimited."""
        if provider.max_concurrency <= 0:
            return contextlib.nullcontext()
        with self._semaphore_lock:
            semaphore = self._semaphores.get(provider.name)
            if semaphore is None:
                semaphore = threading.BoundedSemaphore(provider.max_concurrency)
                self._semaphores[provider.name] = semaphore
        return semaphore

    def complete_raw(self, prompt: str, provider_name: str) -> str:
        """Raw text completion, used for auxiliary prompts such as intent
        classification. Mock providers answer nothing useful here."""
        provider = self.provider(provider_name)
        if provider.kind == "http":
            return self._http_complete(prompt, provider)
        return ""

    def _require_dictionary(self) -> KeywordDictionary:
        if self.dictionary is None:
            raise GatewayError("mock providers need the gateway's dictionary set")
        return self.dictionary

    def _http_complete(self, prompt: str, provider: ProviderConfig) -> str:
        if not provider.endpoint:
            raise GatewayError(f"provider {provider.name} has no endpoint configured")
        payload = {"prompt": prompt, "max_tokens": provider.token_limit}
        headers = {}
        if provider.api_key_env:
            credential = os.environ.get(provider.api_key_env, "")
            if not credential:
                raise GatewayError(
                    f"provider {provider.name} needs the {provider.api_key_env} environment variable"
                )
            headers["authorization"] = f"Bearer {credential}"
        last_exc: Exception | None = None
        for attempt in range(provider.retries + 1):
            try:
                response = self._http.post(
                    provider.endpoint, json=payload, headers=headers,
                    timeout=provider.timeout,
                )
            except httpx.TimeoutException as exc:
                last_exc = exc
            else:
                if response.status_code == 200:
                    try:
                        return str(response.json()["text"])
                    except (KeyError, ValueError) as exc:
                        raise ProviderError(200, "payload lacks 'text'") from exc
                if response.status_code < 500:
                    raise ProviderError(response.status_code, response.text[:200])
                last_exc = ProviderError(response.status_code, response.text[:200])
            if attempt < provider.retries:
                self._sleep(provider.backoff_base * (2 ** attempt))
        if isinstance(last_exc, ProviderError):
            raise last_exc
        raise Timeout(
            f"provider {provider.name} unreachable after {provider.retries + 1} attempts"
        ) from last_exc


# --- faithful mock -----------------------------------------------------------

def mock_faithful(
    bundle: PromptBundle,
    dictionary: KeywordDictionary,
    delta: int = 10,
    seed: int = 0,
) -> str:
    """Deterministic well-behaved answerer.

    Picks the context sentences whose entities intersect the question's
    (hierarchy-expanded) entities, rotates each sentence's leading clause to
    the back so no run of ``delta`` words survives verbatim, and emits the
    result as bullet points. Uses only numbers already in the context.
    """
    question = bundle.sections.get("question", "")
    wanted = expand_hierarchy(extract_entities(question, dictionary), dictionary).all()
    if not wanted:
        return REFUSAL_TEXT

    bullets: list[str] = []
    seen: set[str] = set()
    for idx, sentence in enumerate(split_sentences(bundle.sections.get("context", ""))):
        if not (extract_entities(sentence, dictionary).all() & wanted):
            continue
        scrambled = _scramble(
            sentence, dictionary, _salt(seed, idx, sentence), max_run=delta - 1
        )
        if scrambled not in seen:
            seen.add(scrambled)
            bullets.append(scrambled)
    if not bullets:
        return REFUSAL_TEXT

    return _verified_bullets(bullets, bundle.full_text, dictionary, delta, seed)


def _salt(seed: int, idx: int, text: str) -> int:
    return zlib.crc32(f"{seed}:{idx}:{text}".encode("utf-8"))


def _verified_bullets(
    bullets: list[str],
    prompt_text: str,
    dictionary: KeywordDictionary,
    delta: int,
    seed: int,
) -> str:
    """Re-scramble harder until no delta-word run is shared with the prompt.

    Runs can also straddle adjacent bullets, so each round scans the joined
    word stream once, maps every offending run back to the bullet it ends
    in, and hardens exactly those bullets. The final fallback keeps the
    largest clean prefix-subset, so the returned text never violates the
    run bound.
    """
    prompt_words = normalize_words(prompt_text)
    prompt_grams = (
        {tuple(prompt_words[i:i + delta]) for i in range(len(prompt_words) - delta + 1)}
        if len(prompt_words) >= delta else set()
    )
    connectives = ("notably", "meanwhile", "also")
    sizes = (6, 4, 3, 2)

    def offending(bullet_list: list[str]) -> set[int]:
        words: list[str] = []
        owner: list[int] = []
        for index, bullet in enumerate(bullet_list):
            ws = normalize_words(bullet)
            words.extend(ws)
            owner.extend([index] * len(ws))
        hits: set[int] = set()
        for i in range(len(words) - delta + 1):
            if tuple(words[i:i + delta]) in prompt_grams:
                hits.add(owner[i + delta - 1])
        return hits

    for round_no in range(len(sizes) + 1):
        hits = offending(bullets)
        if not hits:
            return "\n".join(f"- {b}" for b in bullets)
        if round_no == len(sizes):
            break
        size = sizes[round_no]
        conn = connectives[:round_no + 1]
        bullets = [
            _group_reverse(b, dictionary, size, conn) if i in hits else b
            for i, b in enumerate(bullets)
        ]

    kept: list[str] = []
    for bullet in bullets:
        if not offending(kept + [bullet]):
            kept = kept + [bullet]
    if kept:
        return "\n".join(f"- {b}" for b in kept)
    return REFUSAL_TEXT


def _token_lists(words: list[str]) -> list[list[str]]:
    return [_WORD_RE.findall(w.lower()) for w in words]


_SPAN_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _protected_spans(words: list[str], dictionary: KeywordDictionary) -> list[tuple[int, int]]:
    """Word-index spans covered by entity phrases; cuts must not land inside."""
    per_dict = _SPAN_CACHE.setdefault(dictionary, {})
    key = tuple(words)
    cached = per_dict.get(key)
    if cached is not None:
        return cached
    tokens = _token_lists(words)
    spans: list[tuple[int, int]] = []
    i = 0
    while i < len(words):
        end = None
        if tokens[i]:
            for phrase, _ in dictionary._phrases.get(tokens[i][0], []):
                end = _match_phrase(tokens, i, phrase)
                if end is not None:
                    break
        if end is not None and end - i >= 1:
            spans.append((i, end))
            i = end
        else:
            i += 1
    if len(per_dict) < 50_000:
        per_dict[key] = spans
    return spans


def _match_phrase(tokens: list[list[str]], start: int, phrase: tuple[str, ...]) -> int | None:
    k, j = 0, start
    while j < len(tokens) and k < len(phrase):
        toks = tokens[j]
        if not toks or list(phrase[k:k + len(toks)]) != toks:
            return None
        k += len(toks)
        j += 1
    return j if k == len(phrase) else None


def _strip_ender(sentence: str) -> tuple[str, str]:
    s = sentence.strip()
    if s and s[-1] in ".!?":
        return s[:-1].rstrip(), s[-1]
    return s, "."


def _scramble(
    sentence: str, dictionary: KeywordDictionary, salt: int, max_run: int = 9
) -> str:
    """Rotate the leading clause to the back without splitting entity phrases.

    The cut keeps both pieces at max_run words or fewer where possible;
    sentences too long for that go through group reversal instead.
    """
    core, ender = _strip_ender(sentence)
    words = core.split()
    m = len(words)
    if m < 2:
        return core + ender
    if m > 2 * max_run:
        return _group_reverse(core + ender, dictionary, max(2, max_run - 3), ())
    spans = _protected_spans(words, dictionary)
    forbidden = {cut for (a, b) in spans for cut in range(a + 1, b)}
    lo = max(1, m - max_run)
    hi = min(m - 1, max_run)
    preferred = lo + (salt % (hi - lo + 1))
    cut = None
    for offset in range(m):
        for candidate in (preferred - offset, preferred + offset):
            if 1 <= candidate <= m - 1 and candidate not in forbidden:
                cut = candidate
                break
        if cut is not None:
            break
    if cut is None:
        return core + ender
    rotated = words[cut:] + words[:cut]
    return " ".join(rotated).rstrip(",;") + ender


def _group_reverse(
    bullet: str,
    dictionary: KeywordDictionary,
    size: int,
    connectives: tuple[str, ...],
) -> str:
    core, ender = _strip_ender(bullet)
    words = core.split()
    spans = _protected_spans(words, dictionary)
    groups: list[list[str]] = []
    i = 0
    while i < len(words):
        j = min(i + size, len(words))
        for (a, b) in spans:
            if a < j < b:
                j = b
        groups.append(words[i:j])
        i = j
    groups.reverse()
    out: list[str] = []
    for g, group in enumerate(groups):
        if g and connectives:
            out.append(connectives[g % len(connectives)])
        out.extend(group)
    return " ".join(out).rstrip(",;") + ender


# --- adversarial mock --------------------------------------------------------

def mock_adversarial(
    bundle: PromptBundle,
    mode: str,
    dictionary: KeywordDictionary,
    delta: int = 10,
    seed: int = 0,
) -> str:
    """Faithful answer with exactly one injected defect class."""
    if mode not in ADVERSARIAL_MODES:
        raise ValueError(f"unknown adversarial mode: {mode!r}")
    faithful = mock_faithful(bundle, dictionary, delta=delta, seed=seed)
    if mode == "verbatim_copy":
        return _inject_verbatim(faithful, bundle)
    if faithful == REFUSAL_TEXT:
        raise DefectImpossible("faithful answer refused; nothing to corrupt")
    if mode == "fabricate_number":
        return _inject_fabricated_number(faithful, bundle)
    if mode == "entity_swap":
        return _inject_entity_swap(faithful, bundle, dictionary)
    if mode == "wrong_sign":
        return _inject_wrong_sign(faithful, bundle)
    return _inject_off_topic(faithful, bundle, dictionary)


def _context_numbers(bundle: PromptBundle) -> list[float]:
    return [n for chunk in bundle.chunks for n in chunk.numbers]


def _inject_fabricated_number(faithful: str, bundle: PromptBundle) -> str:
    ctx = _context_numbers(bundle)
    for value, (a, b) in extract_numbers_with_spans(faithful):
        fabricated = value
        for _ in range(6):
            fabricated = round(fabricated * 1.1, 2)
            if fabricated != value and not number_in(fabricated, ctx):
                return faithful[:a] + f"{fabricated:.2f}" + faithful[b:]
    raise DefectImpossible("no response number can be perturbed out of the context")


def _inject_verbatim(faithful: str, bundle: PromptBundle) -> str:
    # slices of the normalized stream stay contiguous under re-normalization,
    # so the copied run is guaranteed to register; prefer all-letter windows
    # to avoid dragging digits into the response
    words = normalize_words(bundle.full_text)
    run = 12
    if len(words) < run:
        raise DefectImpossible("prompt is shorter than the copied run")
    window = None
    for i in range(len(words) - run + 1):
        if all(w.isalpha() for w in words[i:i + run]):
            window = words[i:i + run]
            break
    if window is None:
        window = words[:run]
    copied = " ".join(window)
    base = "" if faithful == REFUSAL_TEXT else faithful + "\n"
    return f"{base}- {copied}."


def _inject_wrong_sign(faithful: str, bundle: PromptBundle) -> str:
    ctx = sorted(set(_context_numbers(bundle)))
    negatives = [v for v in ctx if v < 0]
    if negatives:
        value = negatives[0]
    elif ctx:
        positives = [v for v in ctx if v > 0]
        if not positives:
            raise DefectImpossible("context has only zeros; no sign to contradict")
        value = -positives[0]
    else:
        raise DefectImpossible("context has no numbers")
    return f"{faithful}\n- Overall it increased by {value:.2f} percent."


def _entity_occurrences(
    text: str, dictionary: KeywordDictionary
) -> list[tuple[int, int, str]]:
    """Character spans of entity phrases in the text, left to right."""
    tokens = [(m.group(0), m.span()) for m in _WORD_RE.finditer(text.lower())]
    token_words = [t for t, _ in tokens]
    out = []
    i = 0
    while i < len(tokens):
        matched = False
        for phrase, canonical in dictionary._phrases.get(token_words[i], []):
            if tuple(token_words[i:i + len(phrase)]) == phrase:
                start = tokens[i][1][0]
                end = tokens[i + len(phrase) - 1][1][1]
                out.append((start, end, canonical))
                i += len(phrase)
                matched = True
                break
        if not matched:
            i += 1
    return out


def _inject_entity_swap(
    faithful: str, bundle: PromptBundle, dictionary: KeywordDictionary
) -> str:
    context_sentences = [
        (extract_numbers(s), extract_entities(s, dictionary).all())
        for chunk in bundle.chunks
        for s in split_sentences(chunk.text)
    ]
    all_geos = sorted(dictionary.entities_of_kind(GEO))

    sentences = split_sentences(faithful)
    for sentence in sentences:
        numbers = extract_numbers(sentence)
        if not numbers:
            continue
        occurrences = [
            (a, b, canonical)
            for a, b, canonical in _entity_occurrences(sentence, dictionary)
            if dictionary.kind(canonical) == GEO
        ]
        if not occurrences:
            continue
        witnesses = [
            ents for nums, ents in context_sentences
            if any(number_in(v, nums) for v in numbers)
        ]
        for swap_in in all_geos:
            family = {swap_in, *dictionary.descendants(swap_in)}
            if any(family & ents for ents in witnesses):
                continue
            if swap_in in extract_entities(sentence, dictionary).geos:
                continue
            a, b, _ = occurrences[0]
            replaced = sentence[:a] + swap_in + sentence[b:]
            return faithful.replace(sentence, replaced, 1)
    raise DefectImpossible("no numeric sentence has a swappable geography")


def _inject_off_topic(
    faithful: str, bundle: PromptBundle, dictionary: KeywordDictionary
) -> str:
    query_entities = extract_entities(bundle.sections.get("question", ""), dictionary)
    if not query_entities:
        raise DefectImpossible("question has no entities to steer away from")
    excluded: set[str] = set()
    for entity in query_entities.all():
        excluded.add(entity)
        excluded.update(dictionary.descendants(entity))

    pools = {
        kind: [e for e in sorted(dictionary.entities_of_kind(kind)) if e not in excluded]
        for kind in (METRIC, GEO, PERIOD)
    }
    counters = {kind: 0 for kind in pools}

    occurrences = _entity_occurrences(faithful, dictionary)
    replaced = faithful
    for a, b, canonical in reversed(occurrences):
        kind = dictionary.kind(canonical)
        pool = pools[kind]
        if not pool:
            raise DefectImpossible(f"lexicon has no spare {kind} outside the question")
        substitute = pool[counters[kind] % len(pool)]
        counters[kind] += 1
        replaced = replaced[:a] + substitute + replaced[b:]
    if replaced == faithful:
        raise DefectImpossible("faithful answer names no entities")
    return replaced
