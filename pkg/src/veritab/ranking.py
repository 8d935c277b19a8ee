"""Chunk retrieval: keyword filtering with staged relaxation, then top-k
cosine selection.

The store is immutable after build; concurrent queries share it read-only
and replacing it is an atomic reference swap in the service layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .embedding import HashedEmbedder
from .errors import DuplicateChunkId, EmptyStore
from .forge import KIND_FEATURE, KIND_TREND, DataChunk
from .lexicon import NamedEntities

logger = logging.getLogger(__name__)

DEFAULT_K = 20

STAGE_STRICT = 0          # metric AND geo AND period (non-empty dims only)
STAGE_NO_PERIOD = 1       # period constraint dropped
STAGE_GEO_ONLY = 2        # metric constraint dropped too
STAGE_FALLBACK = 3        # feature/trend chunks for the geo, or anything


@dataclass(frozen=True)
class RankedSelection:
    """Chunk ids with similarity scores, best first, plus the relaxation stage."""

    items: tuple[tuple[str, float], ...]
    stage: int

    @property
    def ids(self) -> list[str]:
        return [chunk_id for chunk_id, _ in self.items]

    @property
    def scores(self) -> list[float]:
        return [score for _, score in self.items]


class ChunkStore:
    """Inverted entity indexes plus an embedding matrix over all chunks."""

    def __init__(self, chunks: list[DataChunk], embedder=None):
        if not chunks:
            raise EmptyStore("cannot build a store from zero chunks")
        self.embedder = embedder or HashedEmbedder()
        by_id: dict[str, DataChunk] = {}
        for chunk in chunks:
            if chunk.id in by_id:
                raise DuplicateChunkId(chunk.id)
            by_id[chunk.id] = chunk
        self.ids: list[str] = sorted(by_id)
        self.chunks: dict[str, DataChunk] = by_id
        self._row: dict[str, int] = {cid: i for i, cid in enumerate(self.ids)}

        self.by_metric: dict[str, set[str]] = {}
        self.by_geo: dict[str, set[str]] = {}
        self.by_period: dict[str, set[str]] = {}
        for cid in self.ids:
            chunk = by_id[cid]
            for m in chunk.metrics:
                self.by_metric.setdefault(m, set()).add(cid)
            for g in chunk.geos:
                self.by_geo.setdefault(g, set()).add(cid)
            for p in chunk.periods:
                self.by_period.setdefault(p, set()).add(cid)

        self.matrix = self.embedder.embed_many([by_id[cid].text for cid in self.ids])

    def __len__(self) -> int:
        return len(self.ids)

    def get(self, chunk_id: str) -> DataChunk | None:
        return self.chunks.get(chunk_id)


def build_store(chunks: list[DataChunk], embedder=None) -> ChunkStore:
    return ChunkStore(chunks, embedder)


def _union(index: dict[str, set[str]], keys) -> set[str]:
    out: set[str] = set()
    for key in keys:
        out |= index.get(key, set())
    return out


def _intersect_dimensions(store: ChunkStore, entities: NamedEntities,
                          use_metric: bool, use_geo: bool, use_period: bool) -> set[str]:
    candidate_sets = []
    if use_metric and entities.metrics:
        candidate_sets.append(_union(store.by_metric, entities.metrics))
    if use_geo and entities.geos:
        candidate_sets.append(_union(store.by_geo, entities.geos))
    if use_period and entities.periods:
        candidate_sets.append(_union(store.by_period, entities.periods))
    if not candidate_sets:
        return set()
    out = candidate_sets[0]
    for s in candidate_sets[1:]:
        out &= s
    return out


def filter_chunks(store: ChunkStore, entities: NamedEntities) -> tuple[list[str], int]:
    """Candidate chunk ids for hierarchy-expanded query entities.

    Constraints relax in stages until something matches: strict intersection,
    then without the period, then geo only, then feature/trend fallback. A
    non-empty store always yields at least one candidate.
    """
    if len(store) == 0:
        raise EmptyStore("store has no chunks")

    if entities:
        strict = _intersect_dimensions(store, entities, True, True, True)
        if strict:
            return sorted(strict), STAGE_STRICT
        if entities.periods:
            relaxed = _intersect_dimensions(store, entities, True, True, False)
            if relaxed:
                return sorted(relaxed), STAGE_NO_PERIOD
        if entities.metrics and entities.geos:
            geo_only = _intersect_dimensions(store, entities, False, True, False)
            if geo_only:
                return sorted(geo_only), STAGE_GEO_ONLY

    return sorted(_fallback_candidates(store, entities)), STAGE_FALLBACK


def _fallback_candidates(store: ChunkStore, entities: NamedEntities) -> set[str]:
    analytic = {
        cid for cid in store.ids
        if store.chunks[cid].kind in (KIND_FEATURE, KIND_TREND)
    }
    if entities.geos:
        for_geo = _union(store.by_geo, entities.geos) & analytic
        if for_geo:
            return for_geo
    if analytic:
        return analytic
    return set(store.ids)


def rank_chunks(
    store: ChunkStore, query: str, candidates: list[str], k: int = DEFAULT_K,
    stage: int = STAGE_STRICT,
) -> RankedSelection:
    """Top-k candidates by cosine similarity to the query text.

    Ties break toward the lexicographically smaller chunk id; fewer than k
    come back when there are fewer candidates.
    """
    if not candidates:
        raise ValueError("rank_chunks needs a non-empty candidate list")
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(candidates)
    rows = np.array([store._row[cid] for cid in ordered], dtype=np.intp)
    query_vec = store.embedder.embed(query)
    scores = store.matrix[rows] @ query_vec
    # stable sort on -score keeps the id-sorted order within ties
    top = np.argsort(-scores, kind="stable")[:k]
    items = tuple((ordered[i], float(scores[i])) for i in top)
    return RankedSelection(items=items, stage=stage)


def select(
    store: ChunkStore, query: str, entities: NamedEntities, k: int = DEFAULT_K
) -> RankedSelection:
    """Filter with staged relaxation, then rank: the full retrieval path."""
    candidates, stage = filter_chunks(store, entities)
    return rank_chunks(store, query, candidates, k=k, stage=stage)
