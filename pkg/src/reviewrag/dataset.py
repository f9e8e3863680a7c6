"""Corpus ingestion, user-disjoint stratified splits, and task materialization."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from reviewrag.errors import (
    EmptySchemaMap,
    IdCollision,
    InfeasibleSizes,
    UnknownSplit,
    UnreadableInput,
)
from reviewrag.graph import Review, ReviewGraph, load_graph, save_graph
from reviewrag.tasks import ORDINAL, BenchSample, TaskSpec
from reviewrag.text import word_count

log = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")
# Profile-size strata: 1, 2, 3, and 4 or more own reviews.
BIN_LABELS = ("1", "2", "3", "4+")
DEFAULT_CHI2_THRESHOLD = 0.05
REVIEW_FIELDS = ("user_id", "item_id", "review_id", "title", "text", "rating")
REQUIRED_FIELDS = ("user_id", "item_id", "text")


# -- ingestion ------------------------------------------------------------------

@dataclass
class IngestReport:
    rows: int = 0
    kept: int = 0
    malformed: int = 0
    duplicates: int = 0


def _lookup(row: Mapping, path: str):
    cur = row
    for part in path.split("."):
        if not isinstance(cur, Mapping) or part not in cur:
            return None
        cur = cur[part]
    return cur


def _coerce_rating(value) -> Optional[int]:
    """None for a missing rating; ValueError for one that is present but invalid."""
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        raise ValueError("boolean rating")
    f = float(value)
    if not f.is_integer() or not 1 <= f <= 5:
        raise ValueError(f"rating {value!r} outside 1..5")
    return int(f)


def _as_text(value) -> str:
    if value is None:
        return ""
    return str(value).strip()


def content_hash(user_id: str, item_id: str, text: str) -> str:
    return hashlib.sha1(f"{user_id}\x00{item_id}\x00{text}".encode("utf-8")).hexdigest()


def ingest_rows(rows: Iterable, schema_map: Mapping[str, str], *,
                prefix_ids: bool = False) -> tuple[ReviewGraph, IngestReport]:
    if not schema_map:
        raise EmptySchemaMap("schema map is empty")
    missing = [f for f in REQUIRED_FIELDS if f not in schema_map]
    if missing:
        raise EmptySchemaMap(f"schema map does not bind {missing}")
    unknown = set(schema_map) - set(REVIEW_FIELDS)
    if unknown:
        raise ValueError(f"schema map binds unknown review fields {sorted(unknown)}")

    graph = ReviewGraph()
    report = IngestReport()
    seen: set[str] = set()
    for row in rows:
        report.rows += 1
        if not isinstance(row, Mapping):
            report.malformed += 1
            continue
        vals = {f: _lookup(row, src) for f, src in schema_map.items()}
        user, item, text = (_as_text(vals.get(f)) for f in REQUIRED_FIELDS)
        if not (user and item and text):
            report.malformed += 1
            continue
        try:
            rating = _coerce_rating(vals.get("rating"))
        except (TypeError, ValueError):
            report.malformed += 1
            continue
        if prefix_ids:
            user, item = f"u:{user}", f"i:{item}"
        digest = content_hash(user, item, text)
        if digest in seen:
            report.duplicates += 1
            continue
        rid = _as_text(vals.get("review_id")) or f"r{digest[:16]}"
        if rid in graph:
            report.duplicates += 1
            continue
        try:
            graph.add_review(Review(user, item, rid, _as_text(vals.get("title")), text, rating))
        except IdCollision:
            report.malformed += 1
            continue
        seen.add(digest)
        report.kept += 1
    return graph, report


def _read_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except ValueError:
                yield None  # counted as malformed


def ingest(path, schema_map: Mapping[str, str], *, prefix_ids: bool = False) -> tuple[ReviewGraph, IngestReport]:
    """Read a raw JSONL corpus into a graph. Bad rows are skipped and counted.

    ``schema_map`` maps review fields (user_id, item_id, text, and optionally
    title, rating, review_id) to source keys; dotted keys reach nested objects.
    Rows repeating an earlier (user, item, text) triple are dropped.
    """
    if not schema_map:
        raise EmptySchemaMap("schema map is empty")
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
        fh.close()
    except OSError as exc:
        raise UnreadableInput(f"cannot read {path}: {exc}") from exc
    graph, report = ingest_rows(_read_jsonl(path), schema_map, prefix_ids=prefix_ids)
    log.info("ingested %s: %d rows, %d kept, %d malformed, %d duplicates",
             path, report.rows, report.kept, report.malformed, report.duplicates)
    return graph, report


# -- splits -----------------------------------------------------------------------

def profile_bin(size: int) -> int:
    return min(max(size, 1), 4) - 1


def histogram(bins: Iterable[int]) -> list[float]:
    counts = Counter(bins)
    total = sum(counts.values())
    if not total:
        return [0.0] * len(BIN_LABELS)
    return [counts.get(b, 0) / total for b in range(len(BIN_LABELS))]


def chi2_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Symmetric chi-square distance 0.5 * sum (p - q)^2 / (p + q), in [0, 1]."""
    return 0.5 * sum((a - b) ** 2 / (a + b) for a, b in zip(p, q) if a + b > 0)


def _allocate(total: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` over ``weights``."""
    wsum = sum(weights)
    if total <= 0 or wsum <= 0:
        return [0] * len(weights)
    raw = [total * w / wsum for w in weights]
    out = [math.floor(x) for x in raw]
    for i in sorted(range(len(raw)), key=lambda i: (-(raw[i] - out[i]), i))[: total - sum(out)]:
        out[i] += 1
    return out


@dataclass
class SplitPart:
    graph: ReviewGraph
    sample_review_ids: list[str]
    histogram: list[float] = field(default_factory=list)
    chi2: float = 0.0
    graph_file: Optional[str] = None

    @property
    def users(self) -> list[str]:
        return self.graph.users


@dataclass
class SplitManifest:
    seed: int
    sizes: dict
    splits: dict
    global_histogram: list
    threshold: float = DEFAULT_CHI2_THRESHOLD

    def part(self, split: str) -> SplitPart:
        try:
            return self.splits[split]
        except KeyError:
            raise UnknownSplit(split) from None

    def stratification_report(self) -> dict:
        return {
            "bins": list(BIN_LABELS),
            "global": self.global_histogram,
            "threshold": self.threshold,
            "splits": {name: {"histogram": p.histogram, "chi2": p.chi2}
                       for name, p in self.splits.items()},
        }

    def to_json(self) -> dict:
        return {
            "version": 1,
            "seed": self.seed,
            "sizes": dict(self.sizes),
            "stratification": self.stratification_report(),
            "splits": {
                name: {
                    "graph": p.graph_file,
                    "n_users": len(p.graph.users),
                    "samples": list(p.sample_review_ids),
                }
                for name, p in self.splits.items()
            },
        }


def _normalize_sizes(sizes) -> dict:
    if isinstance(sizes, Mapping):
        out = {name: int(sizes[name]) for name in SPLIT_NAMES}
    else:
        vals = list(sizes)
        if len(vals) != 3:
            raise InfeasibleSizes(f"expected three sizes (train, val, test), got {vals}")
        out = dict(zip(SPLIT_NAMES, (int(v) for v in vals)))
    if any(v < 0 for v in out.values()) or not any(out.values()):
        raise InfeasibleSizes(f"sizes must be non-negative and not all zero: {out}")
    return out


def make_splits(graph: ReviewGraph, sizes, seed: int,
                threshold: float = DEFAULT_CHI2_THRESHOLD) -> SplitManifest:
    """Partition users into train/val/test and pick one target review per sampled user.

    Users are assigned within each profile-size stratum in proportion to the
    requested sizes, so no user appears in two splits. A review qualifies as
    a target only if another user of the same split reviewed its item. Each
    split's samples are drawn per stratum to follow the global profile-size
    histogram; InfeasibleSizes is raised when a split cannot be filled or its
    chi-square distance to the global histogram exceeds ``threshold``.
    """
    sizes = _normalize_sizes(sizes)
    rng = random.Random(seed)
    users = [u for u in graph.users if graph.user_degree(u) > 0]
    if not users:
        raise InfeasibleSizes("graph has no reviews")
    bin_of = {u: profile_bin(graph.user_degree(u)) for u in users}
    global_hist = histogram(bin_of.values())

    weights = [sizes[s] for s in SPLIT_NAMES]
    members: dict[str, list[str]] = {s: [] for s in SPLIT_NAMES}
    for b in range(len(BIN_LABELS)):
        stratum = [u for u in users if bin_of[u] == b]
        rng.shuffle(stratum)
        start = 0
        for name, count in zip(SPLIT_NAMES, _allocate(len(stratum), weights)):
            members[name].extend(stratum[start:start + count])
            start += count

    parts = {}
    for name in SPLIT_NAMES:
        sub = graph.subgraph(members[name]).freeze()
        by_bin: list[list[Review]] = [[] for _ in BIN_LABELS]
        for u in members[name]:
            eligible = [r for r in sub.user_reviews(u)
                        if any(o.user_id != u for o in sub.item_neighbors(r.item_id))]
            if eligible:
                by_bin[bin_of[u]].append(rng.choice(eligible))

        want = sizes[name]
        available = [len(c) for c in by_bin]
        if sum(available) < want:
            raise InfeasibleSizes(
                f"{name}: {want} samples requested but only {sum(available)} users have an in-split neighbor")
        quota = [min(q, a) for q, a in zip(_allocate(want, global_hist), available)]
        while sum(quota) < want:
            # Top up the stratum furthest below its target share.
            b = max((b for b in range(len(quota)) if quota[b] < available[b]),
                    key=lambda b: (global_hist[b] * want - quota[b], -b))
            quota[b] += 1
        chosen = [r for b, cands in enumerate(by_bin) for r in cands[: quota[b]]]
        chosen.sort(key=lambda r: sub.edge_index(r.review_id))
        hist = histogram(bin_of[r.user_id] for r in chosen)
        dist = chi2_distance(hist, global_hist) if chosen else 0.0
        if dist > threshold:
            raise InfeasibleSizes(
                f"{name}: profile-size histogram distance {dist:.4f} exceeds threshold {threshold}")
        parts[name] = SplitPart(sub, [r.review_id for r in chosen], hist, dist)
    return SplitManifest(seed, sizes, parts, global_hist, threshold)


def check_manifest(manifest: SplitManifest) -> list[str]:
    """Exhaustive invariant check; returns a list of violations (empty when valid)."""
    problems = []
    owner: dict[str, str] = {}
    for name, part in manifest.splits.items():
        for u in part.graph.users:
            if u in owner and owner[u] != name:
                problems.append(f"user {u} in both {owner[u]} and {name}")
            owner[u] = name
        for rid in part.sample_review_ids:
            if rid not in part.graph:
                problems.append(f"{name}: sample {rid} missing from split graph")
                continue
            r = part.graph.review(rid)
            if not any(o.user_id != r.user_id for o in part.graph.item_neighbors(r.item_id)):
                problems.append(f"{name}: sample {rid} has no in-split neighbor")
        if len(part.sample_review_ids) != manifest.sizes.get(name, len(part.sample_review_ids)):
            problems.append(f"{name}: {len(part.sample_review_ids)} samples, expected {manifest.sizes[name]}")
    return problems


def save_manifest(manifest: SplitManifest, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in manifest.splits.items():
        part.graph_file = f"graph_{name}.jsonl"
        save_graph(part.graph, out / part.graph_file)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_manifest(path) -> SplitManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UnreadableInput(f"cannot read manifest {path}: {exc}") from exc
    strat = doc.get("stratification", {})
    parts = {}
    for name, rec in doc["splits"].items():
        graph = load_graph(path.parent / rec["graph"])
        s = strat.get("splits", {}).get(name, {})
        parts[name] = SplitPart(graph, list(rec["samples"]), s.get("histogram", []),
                                s.get("chi2", 0.0), rec["graph"])
    return SplitManifest(doc["seed"], doc["sizes"], parts, strat.get("global", []),
                         strat.get("threshold", DEFAULT_CHI2_THRESHOLD))


# -- task samples ------------------------------------------------------------------

def _field(review: Review, name: str):
    value = getattr(review, name)
    return value.strip() if isinstance(value, str) else value


def materialize(task: TaskSpec, manifest: SplitManifest, split: str) -> list[BenchSample]:
    """One sample per target review; reviews lacking the task's fields are dropped."""
    part = manifest.part(split)
    out, dropped = [], 0
    for rid in part.sample_review_ids:
        r = part.graph.review(rid)
        inputs = {f: _field(r, f) for f in task.input_fields}
        target = _field(r, task.target_field)
        if target in (None, "") or not all(inputs.values()):
            dropped += 1
            continue
        out.append(BenchSample(rid, task.id, r.user_id, r.item_id, rid, inputs, target))
    if dropped:
        log.info("task %d/%s: dropped %d samples with empty fields", task.id, split, dropped)
    return out


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    if not xs:
        return 0.0, 0.0
    return statistics.fmean(xs), (statistics.pstdev(xs) if len(xs) > 1 else 0.0)


def task_stats(task: TaskSpec, samples: Sequence[BenchSample], graph: ReviewGraph) -> dict:
    """Per-task summary: word lengths of inputs and outputs, and own-review profile size."""
    inp = _mean_std([word_count(s.input) for s in samples])
    outp = None if task.task_type == ORDINAL else _mean_std([word_count(str(s.target)) for s in samples])
    prof = _mean_std([graph.user_degree(s.user_id) for s in samples])
    return {
        "task": task.name,
        "type": task.task_type,
        "avg_input_length": inp,
        "avg_output_length": outp,
        "avg_profile_size": prof,
        "classes": 5 if task.task_type == ORDINAL else None,
        "samples": len(samples),
    }
