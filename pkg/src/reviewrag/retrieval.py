"""User profiles over the review graph and the rankers that search them."""

from __future__ import annotations

import hashlib
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from reviewrag.errors import EmbedderFailure, InvalidConfig, MissingField, UnknownUser
from reviewrag.graph import Review, ReviewGraph
from reviewrag.tasks import BenchSample, TaskSpec
from reviewrag.text import tokenize

OWN = "own"
NEIGHBOR = "neighbor"

STRATEGIES = ("pgraphrag", "neighbors_only", "user_only", "random", "none")
RANKERS = ("bm25", "dense")

BM25_K1 = 1.2
BM25_B = 0.75


@dataclass(frozen=True)
class ProfileEntry:
    review: Review
    source: str  # OWN or NEIGHBOR


@dataclass
class UserProfile:
    user_id: str
    entries: list[ProfileEntry] = field(default_factory=list)

    def own(self) -> list[ProfileEntry]:
        return [e for e in self.entries if e.source == OWN]

    def neighbors(self) -> list[ProfileEntry]:
        return [e for e in self.entries if e.source == NEIGHBOR]

    def __len__(self) -> int:
        return len(self.entries)


def build_profile(graph: ReviewGraph, user_id: str,
                  exclude_review_id: Optional[str] = None) -> UserProfile:
    """Collect the user's own reviews plus other users' reviews of the same items.

    ``exclude_review_id`` is the held-out target; it is removed from the pool
    but its item still contributes neighbors. Entries follow graph insertion
    order.
    """
    if not graph.has_user(user_id):
        raise UnknownUser(user_id)
    own = graph.user_reviews(user_id)
    picked: dict[str, str] = {}
    for r in own:
        if r.review_id != exclude_review_id:
            picked[r.review_id] = OWN
    for item in dict.fromkeys(r.item_id for r in own):
        for r in graph.item_neighbors(item):
            if r.user_id != user_id:
                picked[r.review_id] = NEIGHBOR
    order = sorted(picked, key=graph.edge_index)
    return UserProfile(user_id, [ProfileEntry(graph.review(rid), picked[rid]) for rid in order])


@dataclass(frozen=True)
class Query:
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise MissingField("query text must be non-empty")


def query_of(task: TaskSpec, sample: BenchSample) -> Query:
    """The query is the task input taken verbatim.

    Multi-field inputs (title and text for rating tasks) are joined with a newline.
    """
    missing = [f for f in task.input_fields if not sample.inputs.get(f)]
    if missing:
        raise MissingField(f"sample {sample.sample_id} lacks input field(s) {missing}")
    return Query("\n".join(sample.inputs[f] for f in task.input_fields))


@dataclass(frozen=True)
class RetrievedItem:
    review: Review
    score: float
    rank: int


@dataclass
class RetrievedContext:
    items: list[RetrievedItem] = field(default_factory=list)
    requested_k: int = 0

    @property
    def actual_k(self) -> int:
        return len(self.items)

    @property
    def review_ids(self) -> list[str]:
        return [it.review.review_id for it in self.items]

    @property
    def scores(self) -> list[float]:
        return [it.score for it in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


@dataclass(frozen=True)
class RetrievalConfig:
    strategy: str = "pgraphrag"
    ranker: str = "bm25"
    k: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidConfig(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.ranker not in RANKERS:
            raise InvalidConfig(f"unknown ranker {self.ranker!r}; choose from {RANKERS}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise InvalidConfig(f"k must be a positive integer, got {self.k!r}")


PoolItem = Union[ProfileEntry, Review]


def _as_review(x: PoolItem) -> Review:
    return x.review if isinstance(x, ProfileEntry) else x


def document_text(review: Review) -> str:
    return f"{review.title} {review.text}"


class BM25Index:
    """Okapi BM25 over a small in-memory corpus, backed by an inverted index.

    IDF uses ln(1 + (N - n + 0.5) / (n + 0.5)), which is never negative, so
    a document scores zero exactly when it shares no term with the query.
    """

    def __init__(self, docs: Sequence[Sequence[str]], k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self.n_docs = len(docs)
        self.doc_len = [len(d) for d in docs]
        total = sum(self.doc_len)
        self.avgdl = total / self.n_docs if self.n_docs else 0.0
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for i, doc in enumerate(docs):
            for term, tf in Counter(doc).items():
                self.postings.setdefault(term, []).append((i, tf))

    def idf(self, term: str) -> float:
        n = len(self.postings.get(term, ()))
        return max(0.0, math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5)))

    def scores(self, query_terms: Sequence[str]) -> list[float]:
        out = [0.0] * self.n_docs
        if not self.avgdl:
            return out
        for term in dict.fromkeys(query_terms):
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for i, tf in plist:
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[i] / self.avgdl)
                out[i] += idf * tf * (self.k1 + 1.0) / (tf + norm)
        return out


def _top_k(pool: Sequence[PoolItem], scores: Sequence[float], k: int) -> RetrievedContext:
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], i))[:k]
    items = [RetrievedItem(_as_review(pool[i]), float(scores[i]), rank)
             for rank, i in enumerate(order, 1)]
    return RetrievedContext(items, k)


def bm25_rank(query: Query, pool: Sequence[PoolItem], k: int,
              k1: float = BM25_K1, b: float = BM25_B) -> RetrievedContext:
    """Rank the pool with BM25, treating the pool itself as the corpus."""
    if not pool:
        return RetrievedContext([], k)
    docs = [tokenize(document_text(_as_review(x))) for x in pool]
    index = BM25Index(docs, k1=k1, b=b)
    return _top_k(pool, index.scores(tokenize(query.text)), k)


def _mean_vector(embedder, tokens: list[str], owner: str) -> Optional[np.ndarray]:
    if not tokens:
        return None
    try:
        vecs = np.asarray(embedder.embed_tokens(tokens), dtype=float)
    except Exception as exc:
        raise EmbedderFailure(owner, exc) from exc
    if vecs.ndim != 2 or vecs.shape[0] != len(tokens):
        raise EmbedderFailure(owner, ValueError(f"bad embedding shape {vecs.shape}"))
    return vecs.mean(axis=0)


def _cosine(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> float:
    if a is None or b is None:
        return 0.0
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def dense_rank(query: Query, pool: Sequence[PoolItem], k: int, embedder) -> RetrievedContext:
    """Rank by cosine similarity of mean-pooled token embeddings."""
    if not pool:
        return RetrievedContext([], k)
    qvec = _mean_vector(embedder, tokenize(query.text), "<query>")
    scores = []
    for x in pool:
        r = _as_review(x)
        dvec = _mean_vector(embedder, tokenize(document_text(r)), r.review_id)
        scores.append(_cosine(qvec, dvec))
    return _top_k(pool, scores, k)


def candidate_pool(strategy: str, profile: UserProfile) -> list[ProfileEntry]:
    if strategy == "pgraphrag":
        return list(profile.entries)
    if strategy == "neighbors_only":
        return profile.neighbors()
    if strategy == "user_only":
        return profile.own()
    if strategy == "none":
        return []
    raise InvalidConfig(f"strategy {strategy!r} has no profile pool")


def sample_seed(run_seed: int, sample_id: str) -> int:
    """Per-sample seed, independent of the order samples are processed in."""
    digest = hashlib.sha256(f"{run_seed}\x00{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def random_context(global_pool: Sequence[Review], k: int, seed: int,
                   exclude_review_id: Optional[str] = None) -> RetrievedContext:
    pool = [r for r in global_pool if r.review_id != exclude_review_id]
    if not pool:
        return RetrievedContext([], k)
    rng = random.Random(seed)
    if len(pool) >= k:
        drawn = rng.sample(pool, k)
    else:
        drawn = [rng.choice(pool) for _ in range(k)]
    return RetrievedContext([RetrievedItem(r, 0.0, i) for i, r in enumerate(drawn, 1)], k)


def retrieve(cfg: RetrievalConfig, graph: ReviewGraph, user_id: str, query: Query, *,
             target_review_id: Optional[str] = None,
             global_pool: Optional[Sequence[Review]] = None,
             sample_id: str = "",
             embedder=None) -> RetrievedContext:
    """Select the candidate pool for ``cfg.strategy`` and rank it.

    The target review is excluded under every strategy. ``global_pool``
    (default: every edge of ``graph``) feeds the random baseline.
    """
    if not graph.has_user(user_id):
        raise UnknownUser(user_id)
    if cfg.strategy == "none":
        return RetrievedContext([], cfg.k)
    if cfg.strategy == "random":
        pool = graph.edges if global_pool is None else global_pool
        return random_context(pool, cfg.k, sample_seed(cfg.seed, sample_id), target_review_id)

    profile = build_profile(graph, user_id, exclude_review_id=target_review_id)
    pool = candidate_pool(cfg.strategy, profile)
    if cfg.ranker == "dense":
        if embedder is None:
            raise InvalidConfig("dense ranker needs an embedder")
        return dense_rank(query, pool, cfg.k, embedder)
    return bm25_rank(query, pool, cfg.k)
