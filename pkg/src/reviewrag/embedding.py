"""Token embedding providers for the dense ranker."""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import httpx
import numpy as np


class EmbeddingProvider(Protocol):
    dim: int

    def embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        """Return an array of shape (len(tokens), dim)."""
        ...


class HashEmbedder:
    """Deterministic offline embedder.

    Each token maps to a Gaussian vector seeded by a hash of (seed, token), so
    equal tokens always get equal vectors and nothing needs to be downloaded.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._memo: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._memo.get(token)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}\x00{token}".encode(), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            self._memo[token] = vec
        return vec

    def embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in tokens])


class OneHotEmbedder:
    """One dimension per vocabulary word; unknown tokens embed to zero."""

    def __init__(self, vocabulary: Sequence[str]):
        self.index = {w: i for i, w in enumerate(dict.fromkeys(vocabulary))}
        self.dim = len(self.index)

    def embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(tokens), self.dim))
        for row, tok in enumerate(tokens):
            col = self.index.get(tok)
            if col is not None:
                out[row, col] = 1.0
        return out


class HttpEmbedder:
    """Client for a JSON embedding service.

    Sends ``{"model": ..., "input": [tokens...]}`` to ``{base_url}/embeddings``
    and expects ``{"data": [{"embedding": [...]}, ...]}`` with one vector per
    token, in order.
    """

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 timeout: float = 30.0, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.dim = 0
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def embed_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        resp = self._client.post(f"{self.base_url}/embeddings",
                                 json={"model": self.model, "input": list(tokens)})
        resp.raise_for_status()
        data = resp.json()["data"]
        if len(data) != len(tokens):
            raise ValueError(f"expected {len(tokens)} vectors, got {len(data)}")
        arr = np.asarray([d["embedding"] for d in data], dtype=float)
        if arr.size:
            if self.dim and arr.shape[1] != self.dim:
                raise ValueError(f"embedding dimension changed from {self.dim} to {arr.shape[1]}")
            self.dim = arr.shape[1]
        return arr
