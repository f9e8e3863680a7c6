"""Graph-scoped retrieval for personalized review generation."""

from reviewrag.graph import Review, ReviewGraph, graph_stats, load_graph, save_graph
from reviewrag.retrieval import (
    ProfileEntry,
    Query,
    RetrievalConfig,
    RetrievedContext,
    UserProfile,
    bm25_rank,
    build_profile,
    dense_rank,
    query_of,
    retrieve,
)
from reviewrag.tasks import TASKS, TaskSpec, get_task

__version__ = "0.1.0"

__all__ = [
    "Review",
    "ReviewGraph",
    "graph_stats",
    "load_graph",
    "save_graph",
    "ProfileEntry",
    "Query",
    "RetrievalConfig",
    "RetrievedContext",
    "UserProfile",
    "bm25_rank",
    "build_profile",
    "dense_rank",
    "query_of",
    "retrieve",
    "TASKS",
    "TaskSpec",
    "get_task",
]
