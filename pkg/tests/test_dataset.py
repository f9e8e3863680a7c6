import json

import pytest

from reviewrag.dataset import (
    BIN_LABELS, _allocate, check_manifest, chi2_distance, histogram, ingest, ingest_rows,
    load_manifest, make_splits, materialize, profile_bin, save_manifest, task_stats,
)
from reviewrag.errors import EmptySchemaMap, InfeasibleSizes, UnknownSplit, UnreadableInput
from reviewrag.graph import Review, ReviewGraph, graph_stats
from reviewrag.synth import IDENTITY_SCHEMA, synth_reviews, write_jsonl
from reviewrag.tasks import TASKS, get_task

MAP = {"user_id": "reviewer", "item_id": "asin", "text": "body", "title": "summary", "rating": "stars"}


def row(u, i, text, title="t", stars=5):
    return {"reviewer": u, "asin": i, "body": text, "summary": title, "stars": stars}


def test_ingest_well_formed():
    g, rep = ingest_rows([row("u1", "p1", "hello"), row("u2", "p1", "hi")], MAP)
    assert (rep.rows, rep.kept, rep.malformed, rep.duplicates) == (2, 2, 0, 0)
    assert graph_stats(g)["edges"] == 2


def test_ingest_skips_bad_rows():
    rows = [row("u1", "p1", "ok"), row("u1", "p2", ""), {"reviewer": "u3"}, "junk",
            row("u4", "p4", "x", stars=7), row("u5", "p5", "y", stars="3")]
    g, rep = ingest_rows(rows, MAP)
    assert (rep.kept, rep.malformed) == (2, 4)
    assert g.user_reviews("u5")[0].rating == 3


def test_ingest_drops_content_duplicates():
    g, rep = ingest_rows([row("u1", "p1", "same"), row("u1", "p1", "same", title="other")], MAP)
    assert (rep.kept, rep.duplicates) == (1, 1)


def test_ingest_dotted_paths_and_prefix():
    rows = [{"who": {"id": "7"}, "what": "7", "txt": "a"}]
    m = {"user_id": "who.id", "item_id": "what", "text": "txt"}
    g, rep = ingest_rows(rows, m)
    assert rep.malformed == 1  # same id in both namespaces
    g, rep = ingest_rows(rows, m, prefix_ids=True)
    assert g.users == ["u:7"] and g.items == ["i:7"]


def test_ingest_errors(tmp_path):
    with pytest.raises(EmptySchemaMap):
        ingest_rows([], {})
    with pytest.raises(EmptySchemaMap):
        ingest_rows([], {"user_id": "a"})
    with pytest.raises(UnreadableInput):
        ingest(tmp_path / "missing.jsonl", MAP)


def test_ingest_file_with_bad_json(tmp_path):
    path = tmp_path / "raw.jsonl"
    path.write_text(json.dumps(row("u1", "p1", "fine")) + "\n{not json\n\n")
    g, rep = ingest(path, MAP)
    assert (rep.rows, rep.kept, rep.malformed) == (2, 1, 1)


def test_bins_and_histogram():
    assert [profile_bin(n) for n in (1, 2, 3, 4, 9)] == [0, 1, 2, 3, 3]
    assert histogram([0, 0, 1, 3]) == [0.5, 0.25, 0.0, 0.25]
    assert chi2_distance([1, 0], [1, 0]) == 0.0
    assert chi2_distance([1, 0], [0, 1]) == 1.0
    assert _allocate(10, [1, 1, 1]) == [4, 3, 3]
    assert sum(_allocate(7, [0.9, 0.07, 0.02, 0.01])) == 7


def _brute_check(graph, manifest):
    seen = {}
    for name, part in manifest.splits.items():
        for u in part.graph.users:
            assert seen.setdefault(u, name) == name
        for rid in part.sample_review_ids:
            r = next(e for e in part.graph.edges if e.review_id == rid)
            assert any(e.item_id == r.item_id and e.user_id != r.user_id for e in part.graph.edges)
        for e in part.graph.edges:
            assert graph.review(e.review_id) == e
    users_with_samples = [part.graph.review(r).user_id
                          for part in manifest.splits.values() for r in part.sample_review_ids]
    assert len(users_with_samples) == len(set(users_with_samples))


def test_splits_small_example():
    reviews = []
    for j in range(200):
        reviews.append(Review(f"a{j}", f"p{j}", f"ra{j}", "t", "x"))
        reviews.append(Review(f"b{j}", f"p{j}", f"rb{j}", "t", "y"))
    g = ReviewGraph(reviews).freeze()
    m = make_splits(g, (10, 5, 5), seed=1)
    assert check_manifest(m) == []
    _brute_check(g, m)
    assert {k: len(p.sample_review_ids) for k, p in m.splits.items()} == {"train": 10, "val": 5, "test": 5}


def test_splits_infeasible():
    g = ReviewGraph([Review("u1", "p1", "r1", "t", "x")]).freeze()
    with pytest.raises(InfeasibleSizes):
        make_splits(g, (1, 0, 0), seed=0)
    with pytest.raises(InfeasibleSizes):
        make_splits(g, (0, 0, 0), seed=0)


def test_splits_on_synthetic_corpus(synth_graph, synth_manifest):
    assert check_manifest(synth_manifest) == []
    _brute_check(synth_graph, synth_manifest)
    for part in synth_manifest.splits.values():
        assert part.chi2 <= 0.05
    again = make_splits(synth_graph, (400, 60, 60), seed=11)
    assert {k: p.sample_review_ids for k, p in again.splits.items()} == \
        {k: p.sample_review_ids for k, p in synth_manifest.splits.items()}


def test_manifest_round_trip(tmp_path, synth_manifest):
    save_manifest(synth_manifest, tmp_path)
    m = load_manifest(tmp_path)
    for name in ("train", "val", "test"):
        assert m.part(name).sample_review_ids == synth_manifest.part(name).sample_review_ids
        assert m.part(name).graph == synth_manifest.part(name).graph
    assert m.stratification_report()["bins"] == list(BIN_LABELS)
    with pytest.raises(UnknownSplit):
        m.part("dev")


@pytest.mark.parametrize("tid", sorted(TASKS))
def test_materialize_field_mapping(tid, synth_manifest):
    task = get_task(tid)
    samples = materialize(task, synth_manifest, "val")
    assert samples
    g = synth_manifest.part("val").graph
    for s in samples:
        r = g.review(s.target_review_id)
        assert s.target == getattr(r, task.target_field)
        assert all(s.inputs[f] == getattr(r, f) for f in task.input_fields)
        assert task.target_field not in s.inputs


def test_materialize_drops_empty_fields():
    g = ReviewGraph([Review("u1", "p1", "r1", "", "body", 4),
                     Review("u2", "p1", "r2", "title", "body", None)]).freeze()
    m = make_splits(g, (0, 0, 2), seed=0, threshold=1.0)
    assert [s.sample_id for s in materialize(get_task(5), m, "test")] == ["r2"]
    assert [s.sample_id for s in materialize(get_task(1), m, "test")] == ["r2"]
    assert materialize(get_task(9), m, "test") == []


def test_task_stats(synth_manifest):
    task = get_task(1)
    samples = materialize(task, synth_manifest, "test")
    st = task_stats(task, samples, synth_manifest.part("test").graph)
    assert st["samples"] == len(samples) and st["classes"] is None
    assert st["avg_profile_size"][0] >= 1
    assert task_stats(get_task(9), samples, synth_manifest.part("test").graph)["classes"] == 5


def test_synth_deterministic_and_shaped(tmp_path):
    a = synth_reviews(2000, seed=3)
    assert a == synth_reviews(2000, seed=3)
    assert a != synth_reviews(2000, seed=4)
    assert len(a) == 2000
    g, rep = ingest_rows(a, IDENTITY_SCHEMA)
    assert rep.kept == 2000
    hist = histogram(profile_bin(g.user_degree(u)) for u in g.users)
    assert hist[0] > 0.8
    pt = synth_reviews(50, seed=1, language="pt")
    assert pt[0]["text"] != a[0]["text"]
    write_jsonl(a[:3], tmp_path / "x.jsonl")
    assert len((tmp_path / "x.jsonl").read_text().splitlines()) == 3
