"""The twelve benchmark tasks: three task types over four review graphs."""

from __future__ import annotations

from dataclasses import dataclass

LONG_GEN = "long_gen"
SHORT_GEN = "short_gen"
ORDINAL = "ordinal"
TASK_TYPES = (LONG_GEN, SHORT_GEN, ORDINAL)

DATASETS = ("user_product", "hotel", "stylized_feedback", "multilingual_product")

TEXT_METRICS = ("rouge1", "rougeL", "meteor")
RATING_METRICS = ("mae", "rmse")


@dataclass(frozen=True)
class TaskSpec:
    id: int
    name: str
    task_type: str
    input_fields: tuple[str, ...]
    target_field: str
    dataset: str

    @property
    def metrics(self) -> tuple[str, ...]:
        return RATING_METRICS if self.task_type == ORDINAL else TEXT_METRICS

    @property
    def language(self) -> str:
        return "pt-BR" if self.dataset == "multilingual_product" else "en"


_NAMES = {
    1: "User Product Review Generation",
    2: "Hotel Experience Generation",
    3: "Stylized Feedback Generation",
    4: "Multi-lingual Review Generation",
    5: "User Product Review Title Generation",
    6: "Hotel Experience Summary Generation",
    7: "Stylized Feedback Title Generation",
    8: "Multi-lingual Review Title Generation",
    9: "User Product Review Ratings",
    10: "Hotel Experience Ratings",
    11: "Stylized Feedback Ratings",
    12: "Multi-lingual Product Ratings",
}


def _catalog() -> dict[int, TaskSpec]:
    shapes = [
        (LONG_GEN, ("title",), "text"),
        (SHORT_GEN, ("text",), "title"),
        (ORDINAL, ("title", "text"), "rating"),
    ]
    out = {}
    for block, (ttype, inputs, target) in enumerate(shapes):
        for d, dataset in enumerate(DATASETS):
            tid = block * 4 + d + 1
            out[tid] = TaskSpec(tid, _NAMES[tid], ttype, inputs, target, dataset)
    return out


TASKS: dict[int, TaskSpec] = _catalog()


def get_task(task_id: int) -> TaskSpec:
    try:
        return TASKS[int(task_id)]
    except (KeyError, ValueError):
        raise KeyError(f"unknown task id {task_id!r}; expected 1..12") from None


@dataclass(frozen=True)
class BenchSample:
    """One evaluation example drawn from a held-out target review."""

    sample_id: str
    task_id: int
    user_id: str
    item_id: str
    target_review_id: str
    inputs: dict
    target: object  # str for generation tasks, int for ratings

    @property
    def input(self) -> str:
        task = get_task(self.task_id)
        return "\n".join(self.inputs.get(f, "") for f in task.input_fields)

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task_id": self.task_id,
            "user_id": self.user_id,
            "item_id": self.item_id,
            "target_review_id": self.target_review_id,
            "inputs": dict(self.inputs),
            "target": self.target,
        }
