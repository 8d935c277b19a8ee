"""Text embeddings: a deterministic hashed bag-of-words default plus an
HTTP client for external embedding services.

The default embedder needs no model downloads and always produces the same
vector for the same text, which keeps retrieval tests exact.
"""

from __future__ import annotations

import re

import httpx
import numpy as np

from .errors import BadResponse, DimensionMismatch, Timeout

DEFAULT_DIMENSION = 512

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


def _fnv1a(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


class HashedEmbedder:
    """FNV-1a hashed term-frequency vectors, L2-normalized.

    Empty text maps to the zero vector. Pure and stateless apart from a
    token-hash cache, so concurrent use is safe.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self._index_cache: dict[str, int] = {}

    def _index(self, token: str) -> int:
        idx = self._index_cache.get(token)
        if idx is None:
            idx = _fnv1a(token) % self.dimension
            self._index_cache[token] = idx
        return idx

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            vec[self._index(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec

    def embed_many(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = self.embed(text)
        return out


class HttpEmbedder:
    """Client for a minimal embedding endpoint.

    Contract: POST {"texts": [...]} to the configured URL, receive
    {"vectors": [[...], ...]} with one vector per text. Vectors are
    re-normalized locally so the unit-norm invariant holds regardless of
    the server.
    """

    def __init__(
        self,
        url: str,
        dimension: int = DEFAULT_DIMENSION,
        timeout: float = 10.0,
        client=None,
    ):
        self.url = url
        self.dimension = dimension
        self.timeout = timeout
        self._client = client or httpx

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: list[str]) -> np.ndarray:
        try:
            response = self._client.post(self.url, json={"texts": texts}, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise Timeout(f"embedding endpoint {self.url} timed out") from exc
        if response.status_code != 200:
            raise BadResponse(f"embedding endpoint returned {response.status_code}")
        try:
            vectors = response.json()["vectors"]
        except (KeyError, ValueError) as exc:
            raise BadResponse("embedding endpoint payload lacks 'vectors'") from exc
        if len(vectors) != len(texts):
            raise BadResponse(
                f"expected {len(texts)} vectors, got {len(vectors)}"
            )
        out = np.asarray(vectors, dtype=np.float64)
        if out.ndim != 2 or out.shape[1] != self.dimension:
            raise BadResponse(
                f"expected dimension {self.dimension}, got shape {out.shape}"
            )
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        out[nonzero] /= norms[nonzero, None]
        return out


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a| |b|); involving a zero vector gives 0.0 by convention."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
