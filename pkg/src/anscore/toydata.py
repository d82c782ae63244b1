"""Self-contained toy corpus for offline runs, demos, and tests.

Fifty short water-cycle answers are assembled from six canonical claim
sentences, per-claim paraphrase variants, and filler. Because the
canonical sentences dominate the sentence-frequency ranking, the offline
mock extractor recovers exactly those six components, and gold scores are
derived from the very labels the mock labeling rule assigns, so the
ordinal scorer has real signal to find. Everything is a pure function of
the seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .featurize import mock_label_rule
from .ioutil import write_json

TOY_ITEM_ID = "toy1"
TOY_PROMPT = "Explain how water moves between the ocean, the air, and the land."

CANONICAL_CLAIMS = (
    "evaporation moves water from the ocean into the air",
    "water vapor condenses into clouds",
    "rain falls from the clouds onto the land",
    "rivers carry water back to the ocean",
    "the sun provides the energy for the cycle",
    "some water soaks into the ground",
)

# each variant shares at least half of its claim's content words without
# containing the claim verbatim, so the mock rule reads it as partial
PARAPHRASES = (
    (
        "water leaves the ocean by evaporation",
        "evaporation takes water up from the sea",
        "the ocean water goes into the sky by evaporation",
    ),
    (
        "vapor condenses to form clouds",
        "the water vapor turns into clouds",
        "clouds form when vapor condenses",
    ),
    (
        "rain comes down from the clouds",
        "the clouds drop rain onto the fields",
        "rain falls from the sky onto the ground",
    ),
    (
        "rivers bring the water back",
        "the water returns to the ocean in rivers",
        "rivers carry it to the ocean",
    ),
    (
        "the sun gives energy to the cycle",
        "energy from the sun drives the cycle",
        "the cycle runs on energy from the sun",
    ),
    (
        "water soaks down into the soil",
        "some of the water goes into the ground",
        "water seeps into the ground below",
    ),
)

FILLER_TEMPLATES = (
    "we talked about this in class {i}",
    "i remember lesson {i} about weather",
    "my notes from day {i} helped me here",
    "this was question {i} on our quiz",
)

_POINTS = {2: 1.0, 1: 0.5, 0: 0.0}


def _gold_from_points(points: float) -> int:
    if points < 1.25:
        return 0
    if points < 3.75:
        return 1
    return 2


def build_toy_rows(n: int = 50, seed: int = 7) -> list[tuple[str, str, int, int, str]]:
    """Rows of (Id, EssaySet, Score1, Score2, EssayText)."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        level = i % 3  # even coverage of the three score bands
        if level == 0:
            n_direct = int(rng.integers(0, 2))
            n_para_max = 1
        elif level == 1:
            n_direct = int(rng.integers(2, 4))
            n_para_max = 1
        else:
            n_direct = int(rng.integers(4, 7))
            n_para_max = 2
        direct = rng.choice(6, size=n_direct, replace=False).tolist()
        remaining = [j for j in range(6) if j not in direct]
        n_para = int(rng.integers(0, min(n_para_max, len(remaining)) + 1))
        para = rng.choice(len(remaining), size=n_para, replace=False).tolist() if n_para else []
        sentences = [CANONICAL_CLAIMS[j] for j in direct]
        sentences += [PARAPHRASES[remaining[j]][int(rng.integers(3))] for j in para]
        sentences.append(FILLER_TEMPLATES[i % len(FILLER_TEMPLATES)].format(i=i))
        order = rng.permutation(len(sentences))
        text = ". ".join(sentences[j] for j in order) + "."

        labels = [int(mock_label_rule(text, claim)) for claim in CANONICAL_CLAIMS]
        points = sum(_POINTS[v] for v in labels)
        gold = _gold_from_points(points)
        if rng.random() < 0.08:
            gold = int(np.clip(gold + rng.choice([-1, 1]), 0, 2))
        second = gold
        if rng.random() < 0.15:
            second = int(np.clip(gold + rng.choice([-1, 1]), 0, 2))
        rows.append((str(1001 + i), TOY_ITEM_ID, gold, second, text))
    return rows


def write_toy_workspace_inputs(target_dir: str | Path, n: int = 50, seed: int = 7) -> tuple[Path, Path]:
    """Write toy.tsv and toy_items.json; returns their paths."""
    target_dir = Path(target_dir)
    target_dir.mkdir(parents=True, exist_ok=True)
    tsv_path = target_dir / "toy.tsv"
    lines = ["Id\tEssaySet\tScore1\tScore2\tEssayText"]
    for rid, item_id, s1, s2, text in build_toy_rows(n=n, seed=seed):
        lines.append(f'{rid}\t{item_id}\t{s1}\t{s2}\t"{text}"')
    tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    items_path = target_dir / "toy_items.json"
    write_json(
        items_path,
        {
            TOY_ITEM_ID: {
                "score_min": 0,
                "score_max": 2,
                "prompt_text": TOY_PROMPT,
                "parts": [{"name": "main", "cap": 6}],
            }
        },
    )
    return tsv_path, items_path
