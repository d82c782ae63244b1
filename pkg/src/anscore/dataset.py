"""Response corpora: items, responses, splits, and gold scores.

Two on-disk formats are supported:

* the public short-answer TSV (columns ``Id, EssaySet, Score1, Score2,
  EssayText``, tab-delimited, UTF-8), and
* a canonical JSON corpus ``{"item": {...}, "responses": [...]}`` that
  round-trips losslessly.

Score ranges are always declared per item in a config file and never
inferred from data, because a given file may not exhibit every category.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataFormatError, EmptyDatasetError, UndefinedMetricError
from .ioutil import read_json, write_json

SPLITS = ("train", "valid", "test", "unlabeled")


@dataclass(frozen=True)
class PartSpec:
    """One scored part of an item, with its components-per-part cap."""

    name: str
    cap: int = 15

    def __post_init__(self) -> None:
        if self.cap < 1:
            raise ValueError(f"part {self.name!r}: cap must be >= 1, got {self.cap}")


@dataclass(frozen=True)
class Item:
    """An assessment item: identity, parts, and declared score range."""

    id: str
    prompt_text: str = ""
    parts: tuple[PartSpec, ...] = (PartSpec("main"),)
    score_min: int = 0
    score_max: int = 3

    def __post_init__(self) -> None:
        if self.score_min >= self.score_max:
            raise ValueError(
                f"item {self.id!r}: score_min ({self.score_min}) must be < score_max ({self.score_max})"
            )
        if not self.parts:
            raise ValueError(f"item {self.id!r}: at least one part required")

    @property
    def num_categories(self) -> int:
        return self.score_max - self.score_min + 1


@dataclass(frozen=True)
class Response:
    """A single student answer, optionally double-scored."""

    id: str
    item_id: str
    text: str
    gold_score: int | None = None
    second_score: int | None = None
    split: str = "train"

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"response {self.id!r}: unknown split {self.split!r}")
        if self.split == "unlabeled" and self.gold_score is not None:
            raise ValueError(f"response {self.id!r}: unlabeled responses carry no gold score")


@dataclass
class Dataset:
    """An item together with its responses. Read-only after load."""

    item: Item
    responses: list[Response] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for r in self.responses:
            if r.id in seen:
                raise DataFormatError(f"duplicate response id {r.id!r}")
            seen.add(r.id)
            if r.item_id != self.item.id:
                raise DataFormatError(
                    f"response {r.id!r} references item {r.item_id!r}, expected {self.item.id!r}"
                )
            for label, score in (("gold", r.gold_score), ("second", r.second_score)):
                if score is not None and not (self.item.score_min <= score <= self.item.score_max):
                    raise DataFormatError(
                        f"response {r.id!r}: {label} score {score} outside "
                        f"[{self.item.score_min}, {self.item.score_max}]"
                    )

    def subset(self, split: str) -> list[Response]:
        return [r for r in self.responses if r.split == split]

    def by_id(self) -> dict[str, Response]:
        return {r.id: r for r in self.responses}


# ---------------------------------------------------------------------------
# TSV ingestion
# ---------------------------------------------------------------------------

_TSV_COLUMNS = ["Id", "EssaySet", "Score1", "Score2", "EssayText"]


def _strip_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    return text


def load_asap_tsv(path: str | Path, item: Item, split: str = "train") -> Dataset:
    """Load all rows of ``path`` whose EssaySet equals ``item.id``.

    ``gold_score`` is Score1 (scoring convention: rater 1), ``second_score``
    is Score2 and is kept only for human-human agreement. Raises
    DataFormatError naming the offending file line on malformed rows, and
    EmptyDatasetError when no row matches.
    """
    path = Path(path)
    responses: list[Response] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected header {_TSV_COLUMNS}")
        if [h.strip() for h in header[:5]] != _TSV_COLUMNS:
            raise DataFormatError(f"{path}: expected header columns {_TSV_COLUMNS}, got {header[:5]}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise DataFormatError(f"{path}:{lineno}: expected 5 tab-separated fields, got {len(row)}")
            rid, essay_set, s1, s2, text = row
            if essay_set.strip() != item.id:
                continue
            try:
                gold = int(s1)
                second = int(s2)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-integer score ({s1!r}, {s2!r})")
            responses.append(
                Response(
                    id=rid.strip(),
                    item_id=item.id,
                    text=_strip_quotes(text),
                    gold_score=gold,
                    second_score=second,
                    split=split,
                )
            )
    if not responses:
        raise EmptyDatasetError(f"{path}: no rows with EssaySet == {item.id!r}")
    return Dataset(item=item, responses=responses)


def split_train_valid(dataset: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic seeded shuffle; first floor(ratio*n) responses to train.

    The two returned datasets partition the input: their union is the input
    and no response appears in both.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    for r in dataset.responses:
        if r.gold_score is None:
            raise ValueError(f"response {r.id!r} is unlabeled; split requires labeled responses")
    n = len(dataset.responses)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(np.floor(ratio * n))
    train = [replace(dataset.responses[i], split="train") for i in order[:n_train]]
    valid = [replace(dataset.responses[i], split="valid") for i in order[n_train:]]
    return Dataset(dataset.item, train), Dataset(dataset.item, valid)


def human_human_qwk(dataset: Dataset) -> float:
    """Quadratic weighted kappa between the two human score vectors."""
    from .metrics import qwk

    gold, second = [], []
    for r in dataset.responses:
        if r.gold_score is None or r.second_score is None:
            raise UndefinedMetricError(f"response {r.id!r} lacks a double score")
        gold.append(r.gold_score)
        second.append(r.second_score)
    return qwk(gold, second, dataset.item.score_min, dataset.item.score_max)


# ---------------------------------------------------------------------------
# Canonical JSON corpus
# ---------------------------------------------------------------------------


def item_to_dict(item: Item) -> dict:
    return {
        "id": item.id,
        "prompt_text": item.prompt_text,
        "parts": [{"name": p.name, "cap": p.cap} for p in item.parts],
        "score_min": item.score_min,
        "score_max": item.score_max,
    }


def item_from_dict(d: dict) -> Item:
    return Item(
        id=str(d["id"]),
        prompt_text=d.get("prompt_text", ""),
        parts=tuple(PartSpec(p["name"], int(p.get("cap", 15))) for p in d["parts"]),
        score_min=int(d["score_min"]),
        score_max=int(d["score_max"]),
    )


def dataset_to_dict(dataset: Dataset) -> dict:
    return {
        "item": item_to_dict(dataset.item),
        "responses": [
            {
                "id": r.id,
                "item_id": r.item_id,
                "text": r.text,
                "gold_score": r.gold_score,
                "second_score": r.second_score,
                "split": r.split,
            }
            for r in dataset.responses
        ],
    }


def dataset_from_dict(d: dict) -> Dataset:
    item = item_from_dict(d["item"])
    responses = [
        Response(
            id=str(r["id"]),
            item_id=str(r["item_id"]),
            text=r["text"],
            gold_score=r.get("gold_score"),
            second_score=r.get("second_score"),
            split=r.get("split", "train"),
        )
        for r in d["responses"]
    ]
    return Dataset(item=item, responses=responses)


def save_corpus(dataset: Dataset, path: str | Path) -> None:
    write_json(path, dataset_to_dict(dataset))


def load_corpus(path: str | Path) -> Dataset:
    return dataset_from_dict(read_json(path))


def load_item_config(path: str | Path) -> dict[str, Item]:
    """Item config file: JSON map item_id -> {score_min, score_max, parts, prompt_text}."""
    raw = read_json(path)
    items: dict[str, Item] = {}
    for item_id, cfg in raw.items():
        items[item_id] = item_from_dict({"id": item_id, **cfg})
    return items


def merge_datasets(parts: list[Dataset]) -> Dataset:
    """Concatenate datasets of the same item (e.g. the train/valid/test splits)."""
    if not parts:
        raise EmptyDatasetError("nothing to merge")
    item = parts[0].item
    responses: list[Response] = []
    for p in parts:
        if p.item != item:
            raise DataFormatError("cannot merge datasets of different items")
        responses.extend(p.responses)
    return Dataset(item, responses)
