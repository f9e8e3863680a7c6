"""Synthetic review corpora with controllable profile-size and item-degree marginals.

The real source corpora cannot be redistributed; this produces stand-ins in
the same raw JSONL shape so the whole pipeline can run offline.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Sequence

# Share of users with 1, 2, 3, and 4+ reviews; sparse like the benchmark graphs.
DEFAULT_PROFILE_DIST = (0.90, 0.07, 0.02, 0.01)
DEFAULT_RATING_DIST = (0.08, 0.06, 0.10, 0.22, 0.54)

_LEXICON = {
    "en": {
        "categories": {
            "kitchen": "blender kettle pan knife toaster mixer lid handle blade jar",
            "audio": "headphones speaker cable bass volume battery bluetooth earbuds sound microphone",
            "garden": "hose shovel planter soil seeds gloves sprinkler rake pot fertilizer",
            "books": "story chapter author plot characters ending novel pages writing series",
            "toys": "puzzle blocks doll game pieces kids colors box figure stickers",
            "hotel": "room staff breakfast pool bed lobby view location shower parking",
        },
        "sentiment": {
            1: "awful broken useless disappointed refund worst cheap waste",
            2: "poor flimsy mediocre annoying returned weak slow unhappy",
            3: "okay decent average fine acceptable mixed ordinary fair",
            4: "good solid nice reliable happy sturdy pleasant useful",
            5: "excellent amazing perfect love fantastic outstanding wonderful superb",
        },
        "filler": "the this it was is and with for my very really quite after before when but also just",
    },
    "pt": {
        "categories": {
            "cozinha": "liquidificador panela faca torradeira batedeira tampa cabo lamina pote chaleira",
            "audio": "fone caixa cabo grave volume bateria bluetooth som microfone alto",
            "jardim": "mangueira pa vaso terra sementes luvas regador ancinho adubo planta",
            "livros": "historia capitulo autor enredo personagens final romance paginas escrita serie",
        },
        "sentiment": {
            1: "horrivel quebrado inutil decepcionado reembolso pessimo barato desperdicio",
            2: "fraco ruim mediocre chato devolvido lento insatisfeito frágil",
            3: "razoavel normal mediano aceitavel comum regular simples ok",
            4: "bom solido legal confiavel satisfeito resistente agradavel util",
            5: "excelente incrivel perfeito amei fantastico otimo maravilhoso sensacional",
        },
        "filler": "o a este isso foi e com para meu muito bem bastante depois antes quando mas tambem",
    },
}


def _words(s: str) -> list[str]:
    return s.split()


def _draw_sizes(rng: random.Random, dist: Sequence[float], total: int, max_extra: int = 4) -> list[int]:
    """Draw per-entity counts from bins {1, 2, 3, 4+} until they sum to ``total``."""
    sizes = []
    remaining = total
    while remaining > 0:
        b = rng.choices(range(4), weights=dist)[0]
        n = b + 1 if b < 3 else 4 + rng.randrange(max_extra + 1)
        n = min(n, remaining)
        sizes.append(n)
        remaining -= n
    return sizes


def _item_degrees(rng: random.Random, total: int, mean_degree: float) -> list[int]:
    # Shifted geometric: 1 + Geom(p), mean 1 + (1 - p) / p.
    p = 1.0 / max(mean_degree, 1.0)
    degrees = []
    remaining = total
    while remaining > 0:
        d = 1
        while rng.random() > p:
            d += 1
        d = min(d, remaining)
        degrees.append(d)
        remaining -= d
    return degrees


def synth_reviews(n_reviews: int, seed: int = 0, *,
                  profile_dist: Sequence[float] = DEFAULT_PROFILE_DIST,
                  mean_item_degree: float = 3.0,
                  rating_dist: Sequence[float] = DEFAULT_RATING_DIST,
                  language: str = "en",
                  text_words: tuple[int, int] = (20, 60)) -> list[dict]:
    if n_reviews < 1:
        raise ValueError("n_reviews must be positive")
    if len(profile_dist) != 4 or min(profile_dist) < 0 or sum(profile_dist) <= 0:
        raise ValueError("profile_dist needs four non-negative weights for sizes 1, 2, 3, 4+")
    lex = _LEXICON[language]
    rng = random.Random(seed)

    user_sizes = _draw_sizes(rng, profile_dist, n_reviews)
    user_slots = [u for u, n in enumerate(user_sizes) for _ in range(n)]
    item_degrees = _item_degrees(rng, n_reviews, mean_item_degree)
    item_slots = [i for i, d in enumerate(item_degrees) for _ in range(d)]
    rng.shuffle(item_slots)

    cats = sorted(lex["categories"])
    item_cat = [rng.choice(cats) for _ in item_degrees]
    item_name = [rng.choice(_words(lex["categories"][c])) for c in item_cat]
    filler = _words(lex["filler"])

    rows = []
    for n, (u, i) in enumerate(zip(user_slots, item_slots)):
        rating = rng.choices(range(1, 6), weights=rating_dist)[0]
        senti = _words(lex["sentiment"][rating])
        nouns = _words(lex["categories"][item_cat[i]])
        length = rng.randint(*text_words)
        text = " ".join(
            rng.choice(senti) if x < 0.25 else rng.choice(nouns) if x < 0.6 else rng.choice(filler)
            for x in (rng.random() for _ in range(length))
        )
        title = " ".join([rng.choice(senti), item_name[i]] + rng.sample(nouns, rng.randint(0, 2)))
        rows.append({
            "user_id": f"U{u:06d}",
            "item_id": f"P{i:06d}",
            "review_id": f"R{n:07d}",
            "title": title,
            "text": text,
            "rating": rating,
        })
    return rows


def write_jsonl(rows, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


IDENTITY_SCHEMA = {f: f for f in ("user_id", "item_id", "review_id", "title", "text", "rating")}
