"""Command line entry point: ``reviewrag {graph,data,bench} ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from reviewrag.errors import ReviewRagError


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, ensure_ascii=False))


# -- graph ------------------------------------------------------------------------

def cmd_graph_build(args) -> int:
    from reviewrag.graph import ReviewGraph, graph_stats, iter_reviews, save_graph

    graph = ReviewGraph(iter_reviews(args.input)).freeze()
    save_graph(graph, args.output)
    _print_json(graph_stats(graph))
    return 0


def cmd_graph_stats(args) -> int:
    from reviewrag.graph import graph_stats, load_graph

    _print_json(graph_stats(load_graph(args.graph)))
    return 0


# -- data -----------------------------------------------------------------------

def cmd_data_ingest(args) -> int:
    from reviewrag.dataset import ingest
    from reviewrag.graph import graph_stats, save_graph
    from reviewrag.synth import IDENTITY_SCHEMA

    schema = json.loads(Path(args.map).read_text(encoding="utf-8")) if args.map else IDENTITY_SCHEMA
    graph, report = ingest(args.input, schema, prefix_ids=args.prefix_ids)
    save_graph(graph, args.out)
    _print_json({"ingest": dataclasses.asdict(report), "graph": graph_stats(graph)})
    return 0


def cmd_data_split(args) -> int:
    from reviewrag.dataset import make_splits, save_manifest
    from reviewrag.graph import load_graph

    manifest = make_splits(load_graph(args.graph), _ints(args.sizes), args.seed, args.threshold)
    path = save_manifest(manifest, args.out)
    print(f"wrote {path}")
    _print_json(manifest.stratification_report())
    return 0


def cmd_data_synth(args) -> int:
    from reviewrag.synth import synth_reviews, write_jsonl

    rows = synth_reviews(args.n_reviews, args.seed, profile_dist=_floats(args.profile_dist),
                         mean_item_degree=args.mean_item_degree, language=args.language)
    write_jsonl(rows, args.out)
    print(f"wrote {len(rows)} reviews to {args.out}")
    return 0


def cmd_data_stats(args) -> int:
    from reviewrag.dataset import load_manifest, materialize, task_stats
    from reviewrag.tasks import get_task

    manifest = load_manifest(args.manifest)
    task = get_task(args.task)
    samples = materialize(task, manifest, args.split)
    _print_json(task_stats(task, samples, manifest.part(args.split).graph))
    return 0


# -- bench ------------------------------------------------------------------------

_OVERRIDES = {
    "task": "task_id", "strategy": "strategy", "ranker": "ranker", "k": "k", "split": "split",
    "model": "model_id", "backend": "backend", "temperature": "temperature",
    "max_tokens": "max_tokens", "parallelism": "parallelism", "cache_dir": "cache_dir",
    "output_dir": "output_dir", "seed": "seed", "limit": "limit", "templates": "templates",
    "length_constraint": "length_constraint", "manifest": "manifest",
}


def _load_config(args):
    from reviewrag.bench import RunConfig, read_config_file

    data = {}
    if args.config:
        data = read_config_file(args.config)
        base = Path(args.config).parent
        for key in ("manifest", "cache_dir", "output_dir", "templates"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
    for flag, key in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    return RunConfig.from_mapping(data)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON file whose keys mirror RunConfig")
    p.add_argument("--manifest")
    p.add_argument("--task", type=int)
    p.add_argument("--strategy", choices=["pgraphrag", "neighbors_only", "user_only", "random", "none"])
    p.add_argument("--ranker", choices=["bm25", "dense"])
    p.add_argument("--k", type=int)
    p.add_argument("--split")
    p.add_argument("--model")
    p.add_argument("--backend", choices=["http", "echo", "extractive"])
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--limit", type=int)
    p.add_argument("--templates")
    p.add_argument("--length-constraint", type=int)


def cmd_bench_run(args) -> int:
    from reviewrag.bench import run

    cfg = _load_config(args)
    report = run(cfg)
    _print_json(report.to_json())
    print(f"records and report in {cfg.run_dir}", file=sys.stderr)
    return 0


def cmd_bench_compare(args) -> int:
    from reviewrag.bench import compare, load_report
    from reviewrag.plotting import plot_comparison

    table = compare([load_report(p) for p in args.reports])
    print(table.to_text(), end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.csv").write_text(table.to_csv(), encoding="utf-8")
        (out / "comparison.md").write_text(table.to_text(), encoding="utf-8")
        plot_comparison(table, out / "comparison.png")
        print(f"wrote comparison.csv, comparison.md, comparison.png to {out}", file=sys.stderr)
    return 0


def cmd_bench_sweep(args) -> int:
    from reviewrag.bench import sweep
    from reviewrag.plotting import plot_sweep
    from reviewrag.tasks import get_task

    base = _load_config(args)
    rankers = [r for r in args.rankers.split(",") if r]
    best, results = sweep(base, _ints(args.ks), rankers, args.metric, args.subsample)
    metric = args.metric or get_task(base.task_id).metrics[0]
    _print_json({
        "metric": metric,
        "best": {"ranker": best.ranker, "k": best.k},
        "grid": [{"ranker": c.ranker, "k": c.k, metric: r.metrics.get(metric)} for c, r in results],
    })
    if args.plot:
        plot_sweep(results, metric, args.plot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reviewrag", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    top = parser.add_subparsers(dest="group", required=True)

    g = top.add_parser("graph", help="build and inspect review graphs").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("build", help="validate a review JSONL file into a graph file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_graph_build)
    p = g.add_parser("stats", help="users, items, edges, average degree")
    p.add_argument("graph")
    p.set_defaults(func=cmd_graph_stats)

    d = top.add_parser("data", help="ingest corpora and make splits").add_subparsers(dest="cmd", required=True)
    p = d.add_parser("ingest")
    p.add_argument("--input", required=True)
    p.add_argument("--map", help="JSON object mapping review fields to source keys")
    p.add_argument("--out", required=True)
    p.add_argument("--prefix-ids", action="store_true", help="namespace ids as u:<id> / i:<id>")
    p.set_defaults(func=cmd_data_ingest)
    p = d.add_parser("split")
    p.add_argument("--graph", required=True)
    p.add_argument("--sizes", required=True, help="train,val,test sample counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out", default="splits")
    p.set_defaults(func=cmd_data_split)
    p = d.add_parser("synth")
    p.add_argument("--profile-dist", default="0.9,0.07,0.02,0.01",
                   help="user shares with 1,2,3,4+ reviews")
    p.add_argument("--n-reviews", type=int, default=10000)
    p.add_argument("--mean-item-degree", type=float, default=3.0)
    p.add_argument("--language", choices=["en", "pt"], default="en")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data_synth)
    p = d.add_parser("stats", help="per-task length and profile-size statistics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--task", type=int, required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_data_stats)

    b = top.add_parser("bench", help="run and compare benchmark cells").add_subparsers(dest="cmd", required=True)
    p = b.add_parser("run")
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench_run)
    p = b.add_parser("compare")
    p.add_argument("reports", nargs="+", help="run directories or report.json files")
    p.add_argument("--out", help="directory for comparison.csv/.md/.png")
    p.set_defaults(func=cmd_bench_compare)
    p = b.add_parser("sweep", help="pick ranker and k on the validation split")
    _add_run_flags(p)
    p.add_argument("--ks", default="1,2,4")
    p.add_argument("--rankers", default="bm25,dense")
    p.add_argument("--metric")
    p.add_argument("--subsample", type=int)
    p.add_argument("--plot", help="write a metric-vs-k figure here")
    p.set_defaults(func=cmd_bench_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ReviewRagError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
