import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reviewrag.dataset import ingest_rows, make_splits  # noqa: E402
from reviewrag.synth import IDENTITY_SCHEMA, synth_reviews  # noqa: E402

_ACCEPTANCE: list[tuple[str, bool, str]] = []


class _Criterion:
    def __init__(self):
        self.detail = ""


@contextmanager
def criterion(label: str, max_seconds=None):
    """Time a criterion, enforce its runtime bound, and log one pass/fail line."""
    c = _Criterion()
    start = time.perf_counter()
    try:
        yield c
        elapsed = time.perf_counter() - start
        if max_seconds is not None:
            assert elapsed < max_seconds, f"took {elapsed:.2f}s, limit {max_seconds}s"
    except BaseException as exc:
        if type(exc).__name__ == "Skipped":
            _ACCEPTANCE.append((label, None, str(exc)))
        else:
            _ACCEPTANCE.append((label, False, f"{type(exc).__name__}: {exc}"[:200]))
        raise
    else:
        _ACCEPTANCE.append((label, True, f"{elapsed:.2f}s {c.detail}".strip()))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"[{status}] {label} ({detail})")


@pytest.fixture(scope="session")
def synth_graph():
    graph, _ = ingest_rows(synth_reviews(10_000, seed=7), IDENTITY_SCHEMA)
    return graph.freeze()


@pytest.fixture(scope="session")
def synth_manifest(synth_graph):
    return make_splits(synth_graph, (400, 60, 60), seed=11)
