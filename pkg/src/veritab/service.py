"""The online pipeline: spell-correct, extract, classify, retrieve, prompt,
complete, score; with conversation threads, persistence and atomic re-ingest.

Concurrency: the live (store, lexicon, gateway) triple is one immutable
object replaced by a single attribute swap, so every ask observes exactly
one store version. Asks on the same thread serialize on a per-thread lock;
asks on distinct threads run concurrently.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .embedding import DEFAULT_DIMENSION, HashedEmbedder, HttpEmbedder
from .errors import (
    GatewayError, ProviderError, StoreEmpty, Timeout, TokenLimitExceeded, UnknownThread,
)
from .forge import (
    ANOMALY_THRESHOLD, CORRELATION_THRESHOLD, DataChunk, dumps_chunks,
    generate_all_chunks, ingest_table, read_chunks,
)
from .gateway import Gateway, default_providers, load_providers
from .intent import classify_llm, classify_rule
from .lexicon import (
    KeywordDictionary, NamedEntities, expand_hierarchy, extract_entities,
    load_lexicon, spell_correct,
)
from .prompting import (
    DEFAULT_TOKEN_LIMIT, DEFAULT_TOKEN_MULTIPLIER, build_prompt, default_templates,
    load_templates,
)
from .ranking import DEFAULT_K, ChunkStore, build_store, filter_chunks, rank_chunks
from .scoring import ResponseScores, score_response


@dataclass
class ServiceConfig:
    provider: str = "mock-faithful"
    classifier: str = "rule"  # "rule" | "llm"
    k: int = DEFAULT_K
    delta: int = 10
    token_limit: int = DEFAULT_TOKEN_LIMIT
    token_multiplier: float = DEFAULT_TOKEN_MULTIPLIER
    anomaly_threshold: float = ANOMALY_THRESHOLD
    correlation_threshold: float = CORRELATION_THRESHOLD
    max_history_turns: int = 3
    data_dir: str | None = None
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    embedding_dimension: int = DEFAULT_DIMENSION
    embedding_url: str | None = None
    embedding_timeout: float = 10.0
    providers_path: str | None = None
    templates_dir: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.classifier not in ("rule", "llm"):
            raise ValueError("classifier must be 'rule' or 'llm'")

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Turn:
    query: str
    corrected_query: str
    intent: int
    chunk_ids: list[str]
    response: str
    scores: ResponseScores | None
    relaxation_stage: int
    inherited: list[str]
    entities: dict[str, list[str]]
    provider: str
    cost: float
    latency: float
    started_at: float
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "corrected_query": self.corrected_query,
            "intent": self.intent,
            "chunk_ids": list(self.chunk_ids),
            "response": self.response,
            "scores": self.scores.to_dict() if self.scores else None,
            "relaxation_stage": self.relaxation_stage,
            "inherited": list(self.inherited),
            "entities": self.entities,
            "provider": self.provider,
            "cost": self.cost,
            "latency": self.latency,
            "started_at": self.started_at,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        return cls(
            query=data["query"],
            corrected_query=data["corrected_query"],
            intent=data["intent"],
            chunk_ids=list(data["chunk_ids"]),
            response=data["response"],
            scores=ResponseScores.from_dict(data["scores"]) if data["scores"] else None,
            relaxation_stage=data["relaxation_stage"],
            inherited=list(data["inherited"]),
            entities=data["entities"],
            provider=data["provider"],
            cost=data["cost"],
            latency=data["latency"],
            started_at=data["started_at"],
            error=data.get("error", ""),
        )


@dataclass
class ConversationThread:
    id: str
    turns: list[Turn] = field(default_factory=list)

    @property
    def cached_selection(self) -> list[str]:
        return list(self.turns[-1].chunk_ids) if self.turns else []

    def to_dict(self) -> dict:
        return {"id": self.id, "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, data: dict) -> "ConversationThread":
        return cls(id=data["id"], turns=[Turn.from_dict(t) for t in data["turns"]])


@dataclass(frozen=True)
class _LiveState:
    """One consistent (store, lexicon, gateway) generation; swapped atomically."""

    store: ChunkStore
    lexicon: KeywordDictionary
    gateway: Gateway


class Engine:
    """Library core behind the HTTP API and the CLI."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.templates = (
            load_templates(self.config.templates_dir)
            if self.config.templates_dir else default_templates()
        )
        self.providers = (
            load_providers(self.config.providers_path)
            if self.config.providers_path else default_providers()
        )
        if self.config.provider not in self.providers:
            raise ValueError(f"provider not registered: {self.config.provider}")
        self._live: _LiveState | None = None
        self._threads: dict[str, ConversationThread] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._state_lock = threading.Lock()
        if self.config.data_dir:
            self._restore(Path(self.config.data_dir))

    # -- offline path ---------------------------------------------------

    def ingest(self, table_path: str | Path, lexicon_path: str | Path) -> dict:
        """Run the offline pipeline and swap the live store atomically.

        Everything is built before the swap, so a failing ingest leaves the
        previous store serving.
        """
        records = ingest_table(table_path)
        lexicon = load_lexicon(lexicon_path)
        chunks = generate_all_chunks(
            records,
            anomaly_threshold=self.config.anomaly_threshold,
            correlation_threshold=self.config.correlation_threshold,
        )
        summary = self._install(chunks, lexicon)
        if self.config.data_dir:
            self._persist_store(Path(self.config.data_dir), chunks, Path(lexicon_path))
        return summary

    def ingest_chunks(self, chunks_path: str | Path, lexicon_path: str | Path) -> dict:
        """Load pre-forged chunks (JSON-Lines) instead of a raw table."""
        chunks = read_chunks(chunks_path)
        lexicon = load_lexicon(lexicon_path)
        summary = self._install(chunks, lexicon)
        if self.config.data_dir:
            self._persist_store(Path(self.config.data_dir), chunks, Path(lexicon_path))
        return summary

    def _install(self, chunks: list[DataChunk], lexicon: KeywordDictionary) -> dict:
        store = build_store(chunks, self._make_embedder())
        gateway = Gateway(self.providers, dictionary=lexicon, delta=self.config.delta)
        self._live = _LiveState(store=store, lexicon=lexicon, gateway=gateway)
        kinds = {"primary": 0, "feature": 0, "trend": 0}
        for chunk in chunks:
            kinds[chunk.kind] += 1
        return {**kinds, "total": len(chunks)}

    def _make_embedder(self):
        if self.config.embedding_url:
            return HttpEmbedder(
                self.config.embedding_url,
                dimension=self.config.embedding_dimension,
                timeout=self.config.embedding_timeout,
            )
        return HashedEmbedder(self.config.embedding_dimension)

    # -- online path ------------------------------------------------------

    def ask(self, thread_id: str | None, question: str) -> dict:
        live = self._live
        if live is None:
            raise StoreEmpty("ingest a table before asking")
        thread = self._thread_for(thread_id)
        with self._lock_for(thread.id):
            return self._ask_locked(live, thread, question)

    def _thread_for(self, thread_id: str | None) -> ConversationThread:
        with self._state_lock:
            if thread_id is None:
                thread = ConversationThread(id=uuid.uuid4().hex)
                self._threads[thread.id] = thread
                return thread
            thread = self._threads.get(thread_id)
            if thread is None:
                raise UnknownThread(thread_id)
            return thread

    def _lock_for(self, thread_id: str) -> threading.Lock:
        with self._state_lock:
            return self._locks.setdefault(thread_id, threading.Lock())

    def _ask_locked(self, live: _LiveState, thread: ConversationThread, question: str) -> dict:
        started = time.time()
        t0 = time.perf_counter()
        corrected = spell_correct(question, live.lexicon)
        entities = extract_entities(corrected, live.lexicon)

        inherited: list[str] = []
        previous = thread.turns[-1] if thread.turns else None
        if previous is not None:
            entities, inherited = _inherit_missing(entities, previous)
        follow_up = bool(inherited)

        intent, fallback = self._classify(live, corrected)

        expanded = expand_hierarchy(entities, live.lexicon)
        candidates, stage = filter_chunks(live.store, expanded)
        if follow_up and previous is not None:
            candidates = sorted(set(candidates) | {
                cid for cid in previous.chunk_ids if cid in live.store.chunks
            })
        selection = rank_chunks(
            live.store, corrected, candidates, k=self.config.k, stage=stage
        )
        chunks = [live.store.chunks[cid] for cid in selection.ids]
        history = [
            (t.query, t.response)
            for t in thread.turns[-self.config.max_history_turns:]
            if not t.error
        ]
        bundle = build_prompt(
            corrected, intent, self.templates, live.lexicon, selection, chunks,
            token_limit=self.config.token_limit,
            history=history or None,
            token_multiplier=self.config.token_multiplier,
        )

        turn = Turn(
            query=question,
            corrected_query=corrected,
            intent=intent.code,
            chunk_ids=list(bundle.chunk_ids),
            response="",
            scores=None,
            relaxation_stage=selection.stage,
            inherited=inherited,
            entities={
                "metrics": sorted(entities.metrics),
                "geos": sorted(entities.geos),
                "periods": sorted(entities.periods),
            },
            provider=self.config.provider,
            cost=0.0,
            latency=0.0,
            started_at=started,
        )
        try:
            result = live.gateway.complete(bundle, self.config.provider)
        except (Timeout, ProviderError, TokenLimitExceeded, GatewayError) as exc:
            turn.error = str(exc)
            turn.latency = time.perf_counter() - t0
            self._append_turn(thread, turn)
            raise GatewayError(str(exc)) from exc

        scores = score_response(
            corrected, bundle, result.text, live.lexicon, delta=self.config.delta
        )
        turn.response = result.text
        turn.scores = scores
        turn.cost = result.cost
        turn.latency = time.perf_counter() - t0
        self._append_turn(thread, turn)

        return {
            "thread_id": thread.id,
            "question": question,
            "corrected_question": corrected,
            "answer": result.text,
            "scores": scores.to_dict(),
            "confidence": scores.confidence,
            "source_chunk_ids": list(bundle.chunk_ids),
            "intent": {"code": intent.code, "name": intent.name},
            "classifier_fallback": fallback,
            "relaxation_stage": selection.stage,
            "inherited_dimensions": inherited,
            "provider": result.provider,
            "cost": result.cost,
            "latency_s": turn.latency,
        }

    def _classify(self, live: _LiveState, corrected: str):
        if self.config.classifier == "llm":
            raw = lambda prompt: live.gateway.complete_raw(prompt, self.config.provider)
            return classify_llm(corrected, raw)
        return classify_rule(corrected), False

    def _append_turn(self, thread: ConversationThread, turn: Turn) -> None:
        thread.turns.append(turn)
        if self.config.data_dir:
            self._persist_threads(Path(self.config.data_dir))

    # -- introspection ----------------------------------------------------

    def thread(self, thread_id: str) -> ConversationThread:
        with self._state_lock:
            thread = self._threads.get(thread_id)
        if thread is None:
            raise UnknownThread(thread_id)
        return thread

    def chunk(self, chunk_id: str) -> DataChunk | None:
        live = self._live
        if live is None:
            raise StoreEmpty("no store ingested")
        return live.store.get(chunk_id)

    def store_size(self) -> int:
        live = self._live
        return len(live.store) if live else 0

    def metrics(self) -> dict:
        """Running averages of s1..s6 and the confidence distribution."""
        with self._state_lock:
            turns = [t for thread in self._threads.values() for t in thread.turns]
        scored = [t.scores for t in turns if t.scores is not None]
        counts = {"High": 0, "Medium": 0, "Low": 0}
        for s in scored:
            counts[s.confidence] += 1
        n = len(scored)
        return {
            "questions": len(turns),
            "scored": n,
            "errors": sum(1 for t in turns if t.error),
            "averages": {
                f"s{i}": (sum(getattr(s, f"s{i}") for s in scored) / n if n else None)
                for i in range(1, 7)
            },
            "confidence_counts": counts,
            "confidence_distribution": {
                label: (counts[label] / n if n else 0.0) for label in counts
            },
        }

    # -- persistence --------------------------------------------------------

    def _persist_store(self, data_dir: Path, chunks: list[DataChunk], lexicon_path: Path) -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(data_dir / "chunks.jsonl", dumps_chunks(chunks))
        if lexicon_path.resolve() != (data_dir / "lexicon.json").resolve():
            shutil.copyfile(lexicon_path, data_dir / "lexicon.json")

    def _persist_threads(self, data_dir: Path) -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        with self._state_lock:
            payload = "".join(
                json.dumps(t.to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
                for t in sorted(self._threads.values(), key=lambda t: t.id)
            )
        _atomic_write(data_dir / "threads.jsonl", payload)

    def _restore(self, data_dir: Path) -> None:
        chunks_file = data_dir / "chunks.jsonl"
        lexicon_file = data_dir / "lexicon.json"
        if chunks_file.exists() and lexicon_file.exists():
            chunks = read_chunks(chunks_file)
            if chunks:
                self._install(chunks, load_lexicon(lexicon_file))
        threads_file = data_dir / "threads.jsonl"
        if threads_file.exists():
            with threads_file.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        thread = ConversationThread.from_dict(json.loads(line))
                        self._threads[thread.id] = thread


def _inherit_missing(
    entities: NamedEntities, previous: Turn
) -> tuple[NamedEntities, list[str]]:
    """Fill entity dimensions the follow-up leaves empty from the prior turn."""
    inherited = []
    metrics, geos, periods = entities.metrics, entities.geos, entities.periods
    if not metrics and previous.entities["metrics"]:
        metrics = frozenset(previous.entities["metrics"])
        inherited.append("metrics")
    if not geos and previous.entities["geos"]:
        geos = frozenset(previous.entities["geos"])
        inherited.append("geos")
    if not periods and previous.entities["periods"]:
        periods = frozenset(previous.entities["periods"])
        inherited.append("periods")
    return NamedEntities(metrics=metrics, geos=geos, periods=periods), inherited


def _atomic_write(path: Path, payload: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload, encoding="utf-8")
    os.replace(tmp, path)
