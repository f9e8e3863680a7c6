"""User-centric bipartite review graph: users, items, and review edges."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from reviewrag.errors import (
    DuplicateReviewId,
    EmptyIdentifier,
    GraphFrozen,
    IdCollision,
    UnknownId,
)


@dataclass(frozen=True)
class Review:
    user_id: str
    item_id: str
    review_id: str
    title: str = ""
    text: str = ""
    rating: Optional[int] = None

    def __post_init__(self):
        for name in ("user_id", "item_id", "review_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise EmptyIdentifier(f"{name} must be a non-empty string, got {value!r}")
        if self.rating is not None:
            if isinstance(self.rating, bool) or self.rating not in (1, 2, 3, 4, 5):
                raise ValueError(f"rating must be an integer in 1..5, got {self.rating!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, record: dict) -> "Review":
        return cls(
            user_id=record["user_id"],
            item_id=record["item_id"],
            review_id=record["review_id"],
            title=record.get("title") or "",
            text=record.get("text") or "",
            rating=record.get("rating"),
        )


class ReviewGraph:
    """Bipartite multigraph G = (U, V, E) with one Review per edge.

    Users and items are created on first reference. Every query answers in
    insertion order, which is the tie-break order used everywhere downstream.
    Call :meth:`freeze` once building is done; a frozen graph rejects writes
    and can be shared between threads.
    """

    def __init__(self, reviews: Iterable[Review] = ()):
        self._edges: list[Review] = []
        self._by_id: dict[str, int] = {}
        self._user_edges: dict[str, list[int]] = {}
        self._item_edges: dict[str, list[int]] = {}
        self._frozen = False
        for r in reviews:
            self.add_review(r)

    def add_review(self, review: Review) -> "ReviewGraph":
        if self._frozen:
            raise GraphFrozen("graph is frozen")
        if review.review_id in self._by_id:
            raise DuplicateReviewId(review.review_id)
        if review.user_id == review.item_id:
            raise IdCollision(f"{review.user_id!r} used as both user and item id")
        if review.user_id in self._item_edges:
            raise IdCollision(f"{review.user_id!r} is already an item id")
        if review.item_id in self._user_edges:
            raise IdCollision(f"{review.item_id!r} is already a user id")
        idx = len(self._edges)
        self._edges.append(review)
        self._by_id[review.review_id] = idx
        self._user_edges.setdefault(review.user_id, []).append(idx)
        self._item_edges.setdefault(review.item_id, []).append(idx)
        return self

    def add_user(self, user_id: str) -> "ReviewGraph":
        """Register a user with no reviews yet (a cold-start user)."""
        if self._frozen:
            raise GraphFrozen("graph is frozen")
        if not user_id:
            raise EmptyIdentifier("user_id must be non-empty")
        if user_id in self._item_edges:
            raise IdCollision(f"{user_id!r} is already an item id")
        self._user_edges.setdefault(user_id, [])
        return self

    def freeze(self) -> "ReviewGraph":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def users(self) -> list[str]:
        return list(self._user_edges)

    @property
    def items(self) -> list[str]:
        return list(self._item_edges)

    @property
    def edges(self) -> list[Review]:
        return list(self._edges)

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self) -> Iterator[Review]:
        return iter(self._edges)

    def __contains__(self, review_id: str) -> bool:
        return review_id in self._by_id

    def has_user(self, user_id: str) -> bool:
        return user_id in self._user_edges

    def has_item(self, item_id: str) -> bool:
        return item_id in self._item_edges

    def review(self, review_id: str) -> Review:
        try:
            return self._edges[self._by_id[review_id]]
        except KeyError:
            raise UnknownId(review_id) from None

    def edge_index(self, review_id: str) -> int:
        """Insertion position of a review; the canonical tie-break key."""
        try:
            return self._by_id[review_id]
        except KeyError:
            raise UnknownId(review_id) from None

    def user_reviews(self, user_id: str) -> list[Review]:
        try:
            idxs = self._user_edges[user_id]
        except KeyError:
            raise UnknownId(user_id) from None
        return [self._edges[i] for i in idxs]

    def item_neighbors(self, item_id: str) -> list[Review]:
        """All reviews of an item, by any user, in insertion order."""
        try:
            idxs = self._item_edges[item_id]
        except KeyError:
            raise UnknownId(item_id) from None
        return [self._edges[i] for i in idxs]

    def user_degree(self, user_id: str) -> int:
        try:
            return len(self._user_edges[user_id])
        except KeyError:
            raise UnknownId(user_id) from None

    def item_degree(self, item_id: str) -> int:
        try:
            return len(self._item_edges[item_id])
        except KeyError:
            raise UnknownId(item_id) from None

    def subgraph(self, user_ids: Iterable[str]) -> "ReviewGraph":
        """Graph restricted to the given users' reviews, insertion order kept."""
        keep = set(user_ids)
        sub = ReviewGraph(r for r in self._edges if r.user_id in keep)
        for u in self._user_edges:
            if u in keep and not sub.has_user(u):
                sub.add_user(u)
        return sub

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReviewGraph):
            return NotImplemented
        return self._edges == other._edges and self.users == other.users

    def __repr__(self) -> str:
        return (
            f"ReviewGraph(users={len(self._user_edges)}, items={len(self._item_edges)}, "
            f"edges={len(self._edges)}{', frozen' if self._frozen else ''})"
        )


def degree_stats(n_users: int, n_items: int, n_edges: int) -> dict:
    """Counts plus average degree 2|E| / (|U| + |V|), rounded to 2 decimals."""
    nodes = n_users + n_items
    avg = round(2 * n_edges / nodes, 2) if nodes else 0.0
    return {"users": n_users, "items": n_items, "edges": n_edges, "avg_degree": avg}


def graph_stats(graph: ReviewGraph) -> dict:
    return degree_stats(len(graph.users), len(graph.items), len(graph))


def save_graph(graph: ReviewGraph, path) -> None:
    """Write one JSON review per line. Users without reviews are not persisted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in graph:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def iter_reviews(path) -> Iterator[Review]:
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield Review.from_json(json.loads(line))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad review record: {exc}") from exc


def load_graph(path, freeze: bool = True) -> ReviewGraph:
    graph = ReviewGraph(iter_reviews(path))
    return graph.freeze() if freeze else graph
