from reviewrag.metrics.meteor import meteor
from reviewrag.metrics.rating import RatingScore, mae_rmse, parse_rating
from reviewrag.metrics.rouge import lcs_length, rouge1, rougeL


def text_scores(candidate: str, reference: str) -> dict:
    return {
        "rouge1": rouge1(candidate, reference),
        "rougeL": rougeL(candidate, reference),
        "meteor": meteor(candidate, reference),
    }


__all__ = [
    "meteor",
    "rouge1",
    "rougeL",
    "lcs_length",
    "parse_rating",
    "mae_rmse",
    "RatingScore",
    "text_scores",
]
