"""Benchmark orchestration: retrieve, prompt, generate, and score each sample.

A run writes append-only ``records.jsonl`` (one line per sample) plus
``report.json`` and ``report.csv``. Re-running the same configuration picks up
where the records file stops.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import os
import re
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from reviewrag.dataset import SplitManifest, load_manifest, materialize
from reviewrag.embedding import HashEmbedder, HttpEmbedder
from reviewrag.errors import EmptyAfterExclusion, InvalidConfig, MismatchedReports
from reviewrag.llm import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    Gateway,
    GenRequest,
    RateLimiter,
    ResponseCache,
    make_backend,
)
from reviewrag.metrics import mae_rmse, parse_rating, text_scores
from reviewrag.prompts import DEFAULT_LENGTH_WORDS, assemble, load_templates
from reviewrag.retrieval import RANKERS, STRATEGIES, RetrievalConfig, query_of, retrieve
from reviewrag.tasks import ORDINAL, RATING_METRICS, get_task

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

LOWER_IS_BETTER = frozenset(RATING_METRICS)
# Column order of the comparison tables: graph-scoped first, then the baselines.
STRATEGY_ORDER = ("pgraphrag", "user_only", "none", "random", "neighbors_only")
STRATEGY_LABELS = {
    "pgraphrag": "Own+Neighbors",
    "user_only": "Own-Only",
    "none": "No-Retrieval",
    "random": "Random-Retrieval",
    "neighbors_only": "Neighbors-Only",
}


@dataclass
class RunConfig:
    task_id: int
    manifest: str
    strategy: str = "pgraphrag"
    ranker: str = "bm25"
    k: int = 4
    model_id: Optional[str] = None
    split: str = "test"
    seed: int = 0
    parallelism: int = 4
    cache_dir: Optional[str] = None
    output_dir: str = "runs"
    backend: str = "echo"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    templates: Optional[str] = None
    length_constraint: int = DEFAULT_LENGTH_WORDS
    limit: Optional[int] = None
    embedder: str = "hash"
    embed_dim: int = 64
    max_attempts: int = 4
    rate_limit: Optional[int] = None  # requests per minute

    def __post_init__(self):
        get_task(self.task_id)
        if self.strategy not in STRATEGIES:
            raise InvalidConfig(f"unknown strategy {self.strategy!r}")
        if self.ranker not in RANKERS:
            raise InvalidConfig(f"unknown ranker {self.ranker!r}")
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.parallelism < 1:
            raise InvalidConfig("parallelism must be >= 1")
        if self.model_id is None:
            self.model_id = self.backend

    @property
    def effective_ranker(self) -> str:
        return self.ranker if self.strategy not in ("none", "random") else "-"

    @property
    def effective_k(self) -> int:
        return 0 if self.strategy == "none" else self.k

    @property
    def run_name(self) -> str:
        name = (f"task{self.task_id}_{self.split}_{self.strategy}_{self.effective_ranker}"
                f"_k{self.effective_k}_{self.model_id}_s{self.seed}")
        return re.sub(r"[^A-Za-z0-9._-]+", "-", name)

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    def retrieval(self) -> RetrievalConfig:
        return RetrievalConfig(self.strategy, self.ranker, self.k, self.seed)

    @classmethod
    def from_mapping(cls, data: dict, base_dir: Optional[Path] = None) -> "RunConfig":
        data = dict(data.get("run", data))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        if "manifest" not in data or "task_id" not in data:
            raise InvalidConfig("config needs at least task_id and manifest")
        if base_dir is not None:
            for key in ("manifest", "cache_dir", "output_dir", "templates"):
                if data.get(key) and not os.path.isabs(data[key]):
                    data[key] = str(Path(base_dir) / data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_mapping(read_config_file(path), base_dir=Path(path).parent)


def read_config_file(path) -> dict:
    """Parse a TOML (or .json) run config; a top-level ``[run]`` table is optional."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    return dict(data.get("run", data))


@dataclass
class RunRecord:
    sample_id: str
    user_id: str
    prompt: str
    retrieved: list
    generation: str
    reference: object
    scores: dict = field(default_factory=dict)
    prediction: Optional[int] = None
    error: Optional[str] = None

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class MetricReport:
    task_id: int
    task: str
    split: str
    strategy: str
    ranker: str
    k: int
    model: str
    n_samples: int
    n_scored: int
    n_errors: int
    parse_failures: int
    metrics: dict

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "MetricReport":
        return cls(**data)

    def csv_row(self) -> dict:
        row = {k: v for k, v in self.to_json().items() if k != "metrics"}
        for name, value in self.metrics.items():
            row[name] = "" if value is None else repr(value)
        return row


# -- run ------------------------------------------------------------------------

def build_gateway(cfg: RunConfig) -> Gateway:
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    limiter = RateLimiter(cfg.rate_limit, 60.0) if cfg.rate_limit else None
    return Gateway(make_backend(cfg.backend), cache=cache, max_attempts=cfg.max_attempts,
                   rate_limiter=limiter)


def build_embedder(cfg: RunConfig):
    if cfg.embedder == "hash":
        return HashEmbedder(dim=cfg.embed_dim, seed=cfg.seed)
    if cfg.embedder == "http":
        base = os.environ.get("REVIEWRAG_EMBED_BASE")
        if not base:
            raise InvalidConfig("REVIEWRAG_EMBED_BASE is not set")
        return HttpEmbedder(base, os.environ.get("REVIEWRAG_EMBED_MODEL", "text-embedding-3-small"),
                            os.environ.get("REVIEWRAG_API_KEY"))
    raise InvalidConfig(f"unknown embedder {cfg.embedder!r}")


def read_records(path: Path) -> dict[str, RunRecord]:
    """Records by sample id; a torn final line from a crash is ignored."""
    out: dict[str, RunRecord] = {}
    if not path.exists():
        return out
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            try:
                rec = RunRecord(**json.loads(line))
            except (ValueError, TypeError):
                log.warning("skipping unreadable record line in %s", path)
                continue
            out[rec.sample_id] = rec
    return out


def _score(task, generation: str, reference) -> tuple[dict, Optional[int]]:
    if task.task_type == ORDINAL:
        pred = parse_rating(generation)
        if pred is None:
            return {}, None
        return {"abs_err": abs(pred - reference), "sq_err": (pred - reference) ** 2}, pred
    return text_scores(generation, reference), None


def aggregate(cfg: RunConfig, records: Sequence[RunRecord]) -> MetricReport:
    """Corpus scores are plain means of the per-sample scores."""
    task = get_task(cfg.task_id)
    ok = [r for r in records if r.error is None]
    failures = 0
    if task.task_type == ORDINAL:
        preds = [r.prediction for r in ok]
        failures = sum(p is None for p in preds)
        try:
            rs = mae_rmse(preds, [r.reference for r in ok])
            metrics = {"mae": rs.mae, "rmse": rs.rmse}
        except EmptyAfterExclusion:
            metrics = {"mae": None, "rmse": None}
        scored = len(ok) - failures
    else:
        metrics = {m: (statistics.fmean(r.scores[m] for r in ok) if ok else None)
                   for m in task.metrics}
        scored = len(ok)
    return MetricReport(
        task_id=task.id, task=task.name, split=cfg.split, strategy=cfg.strategy,
        ranker=cfg.effective_ranker, k=cfg.effective_k, model=cfg.model_id,
        n_samples=len(records), n_scored=scored, n_errors=len(records) - len(ok),
        parse_failures=failures, metrics=metrics,
    )


def write_report(report: MetricReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8")
    row = report.csv_row()
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    (out_dir / "report.csv").write_text(buf.getvalue(), encoding="utf-8")


def load_report(path) -> MetricReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return MetricReport.from_json(json.loads(path.read_text(encoding="utf-8")))


def run(cfg: RunConfig, *, gateway: Optional[Gateway] = None, embedder=None,
        manifest: Optional[SplitManifest] = None) -> MetricReport:
    """Evaluate one (task, strategy, ranker, k, model) cell over a split.

    Every manifest sample ends up in exactly one record: scored, a parse
    failure, or an error. Existing records are reused, not recomputed.
    """
    task = get_task(cfg.task_id)
    manifest = manifest or load_manifest(cfg.manifest)
    part = manifest.part(cfg.split)
    graph = part.graph.freeze()
    template = load_templates(cfg.templates)[task.id]
    gateway = gateway or build_gateway(cfg)
    if embedder is None and cfg.ranker == "dense" and cfg.strategy not in ("none", "random"):
        embedder = build_embedder(cfg)

    ids = part.sample_review_ids[: cfg.limit] if cfg.limit else list(part.sample_review_ids)
    wanted = set(ids)
    samples = [s for s in materialize(task, manifest, cfg.split) if s.sample_id in wanted]
    by_id = {s.sample_id: s for s in samples}

    out_dir = cfg.run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    rec_path = out_dir / "records.jsonl"
    done = read_records(rec_path)
    rcfg = cfg.retrieval()
    global_pool = graph.edges

    torn = rec_path.exists() and rec_path.stat().st_size > 0 and not rec_path.read_bytes().endswith(b"\n")
    with rec_path.open("a", encoding="utf-8") as fh:
        if torn:
            fh.write("\n")

        def emit(rec: RunRecord):
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")
            done[rec.sample_id] = rec

        pending = []
        for sid in ids:
            if sid in done:
                continue
            sample = by_id.get(sid)
            if sample is None:
                r = graph.review(sid)
                emit(RunRecord(sid, r.user_id, "", [], "", None, error="missing_fields"))
                continue
            try:
                query = query_of(task, sample)
                ctx = retrieve(rcfg, graph, sample.user_id, query,
                               target_review_id=sample.target_review_id,
                               global_pool=global_pool, sample_id=sid, embedder=embedder)
                prompt = assemble(template, sample.input, ctx,
                                  length_constraint_words=cfg.length_constraint,
                                  task_type=task.task_type)
            except Exception as exc:
                emit(RunRecord(sid, sample.user_id, "", [], "", sample.target,
                               error=f"{type(exc).__name__}: {exc}"))
                continue
            retrieved = [{"review_id": it.review.review_id, "score": it.score} for it in ctx]
            req = GenRequest(prompt, cfg.temperature, cfg.max_tokens, cfg.model_id)
            pending.append((sample, prompt, retrieved, req))
        fh.flush()

        chunk = max(cfg.parallelism * 8, 1)
        for start in range(0, len(pending), chunk):
            batch = pending[start:start + chunk]
            responses = gateway.generate_batch([b[3] for b in batch], cfg.parallelism)
            for (sample, prompt, retrieved, _), resp in zip(batch, responses):
                if not resp.ok:
                    emit(RunRecord(sample.sample_id, sample.user_id, prompt.text, retrieved, "",
                                   sample.target, error=resp.error))
                    continue
                scores, pred = _score(task, resp.text, sample.target)
                emit(RunRecord(sample.sample_id, sample.user_id, prompt.text, retrieved,
                               resp.text, sample.target, scores, pred))
            fh.flush()

    report = aggregate(cfg, [done[sid] for sid in ids])
    write_report(report, out_dir)
    return report


# -- comparison ----------------------------------------------------------------------

@dataclass
class ComparisonRow:
    task_id: int
    metric: str
    values: dict  # strategy -> value or None
    best: list  # strategies holding the best value

    @property
    def tie(self) -> bool:
        return len(self.best) > 1


@dataclass
class ComparisonTable:
    strategies: list
    rows: list
    split: str
    model: str

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.strategies)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "metric"] + self.strategies + ["best", "tie"])
        for row in self.rows:
            w.writerow([row.task_id, row.metric]
                       + ["" if row.values.get(s) is None else f"{row.values[s]:.4f}" for s in self.strategies]
                       + ["|".join(row.best), int(row.tie)])
        return buf.getvalue()

    def to_text(self) -> str:
        heads = ["Task", "Metric"] + [STRATEGY_LABELS.get(s, s) for s in self.strategies]
        lines = [" | ".join(heads), " | ".join("---" for _ in heads)]
        for row in self.rows:
            cells = []
            for s in self.strategies:
                v = row.values.get(s)
                cell = "-" if v is None else f"{v:.4f}"
                if s in row.best:
                    cell = f"*{cell}*"
                cells.append(cell)
            arrow = " (lower)" if row.metric in LOWER_IS_BETTER else ""
            lines.append(" | ".join([f"Task {row.task_id}", row.metric + arrow] + cells))
        return "\n".join(lines) + "\n"


def compare(reports: Sequence[MetricReport]) -> ComparisonTable:
    """Lay reports out as (task, metric) rows by strategy columns, flagging the best cell."""
    if not reports:
        raise MismatchedReports("nothing to compare")
    splits = {r.split for r in reports}
    models = {r.model for r in reports}
    if len(splits) > 1 or len(models) > 1:
        raise MismatchedReports(f"reports span splits {sorted(splits)} and models {sorted(models)}")
    cells = {}
    for r in reports:
        key = (r.task_id, r.strategy)
        if key in cells:
            raise MismatchedReports(f"two reports for task {r.task_id} strategy {r.strategy}")
        cells[key] = r
    present = {r.strategy for r in reports}
    strategies = [s for s in STRATEGY_ORDER if s in present]
    rows = []
    for tid in sorted({r.task_id for r in reports}):
        metrics = get_task(tid).metrics
        for m in metrics:
            values = {s: (cells[(tid, s)].metrics.get(m) if (tid, s) in cells else None)
                      for s in strategies}
            scored = {s: v for s, v in values.items() if v is not None}
            best = []
            if scored:
                target = (min if m in LOWER_IS_BETTER else max)(scored.values())
                best = [s for s, v in scored.items() if v == target]
            rows.append(ComparisonRow(tid, m, values, best))
    return ComparisonTable(strategies, rows, splits.pop(), models.pop())


# -- validation sweep ----------------------------------------------------------------

def sweep(base: RunConfig, ks: Iterable[int] = (1, 2, 4), rankers: Iterable[str] = ("bm25", "dense"),
          metric: Optional[str] = None, subsample: Optional[int] = None, **run_kwargs):
    """Grid over rankers and k on a split; returns (best config, [(config, report), ...])."""
    task = get_task(base.task_id)
    metric = metric or task.metrics[0]
    if metric not in task.metrics:
        raise InvalidConfig(f"task {task.id} has no metric {metric!r}")
    results = []
    for ranker in rankers:
        for k in ks:
            cfg = dataclasses.replace(base, ranker=ranker, k=k, limit=subsample or base.limit)
            results.append((cfg, run(cfg, **run_kwargs)))
    scored = [(c, r) for c, r in results if r.metrics.get(metric) is not None]
    if not scored:
        raise EmptyAfterExclusion(f"no configuration produced {metric}")
    sign = 1 if metric in LOWER_IS_BETTER else -1
    best = min(scored, key=lambda cr: sign * cr[1].metrics[metric])[0]
    return best, results
