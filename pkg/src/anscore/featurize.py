"""Response featurization against analytic components.

Every (response, component) pair is labeled on a three-valued scale by
repeated stochastic completions, aggregated with the first-to-three rule:
draws are consumed in order until one label value has occurred three
times. Over three categories this needs at least 3 and never more than 7
draws. The per-component labels concatenate into a 3k-bit one-hot
featurization. Raw model output is retained for audit and distillation
but never consumed by scoring.
"""

from __future__ import annotations

import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .dataset import Dataset, Item, Response
from .errors import AggregationError, FeaturizationError, LabelParseError, StalenessError
from .extraction import AnalyticComponent, ComponentSet
from .gateway import ChatGateway, CompletionRequest
from .ioutil import read_json, read_jsonl, write_json, write_jsonl


class FeatureLabel(IntEnum):
    """Ternary paraphrase label for a (response, component) pair."""

    ABSENT = 0
    PARTIAL = 1
    DIRECT = 2


LABEL_VALUES = (0, 1, 2)
MIN_DRAWS = 3
MAX_DRAWS = 7  # pigeonhole: 2+2+2 draws cannot crown a winner, the 7th must
DEFAULT_DRAW_BUDGET = 12  # raw completions per pair, parse failures included

FEATURIZER_SYSTEM = (
    "You judge whether a student response paraphrases a given statement. "
    "Reason step by step, then end with a single line of the exact form LABEL: <0|1|2>."
)
PROMPT_HEADER = "Assessment prompt:"
STATEMENT_HEADER = "Statement:"
RESPONSE_HEADER = "Student response:"
DECIDE_HEADER = "Decide which label applies:"

LABEL_DEFINITIONS = (
    "LABEL 2 if the response contains a direct paraphrase of the statement.",
    "LABEL 1 if the response contains a partial paraphrase of the statement.",
    "LABEL 0 if the response does not contain a paraphrase of the statement.",
)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelDraw:
    """One stochastic labeling draw, raw output retained for audit."""

    response_id: str
    component_id: str
    sample_index: int
    raw_text: str
    parsed_label: FeatureLabel
    prompt_messages: tuple[tuple[str, str], ...] = ()

    def to_record(self, keep_raw: bool = True) -> dict:
        return {
            "response_id": self.response_id,
            "component_id": self.component_id,
            "sample_index": self.sample_index,
            "parsed_label": int(self.parsed_label),
            "raw_text": self.raw_text if keep_raw else "",
            "prompt_messages": [[r, c] for r, c in self.prompt_messages],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabelDraw":
        return cls(
            response_id=rec["response_id"],
            component_id=rec["component_id"],
            sample_index=int(rec["sample_index"]),
            raw_text=rec.get("raw_text", ""),
            parsed_label=FeatureLabel(int(rec["parsed_label"])),
            prompt_messages=tuple((r, c) for r, c in rec.get("prompt_messages", [])),
        )


@dataclass(frozen=True)
class FeatureVector:
    """Per-response label vector plus its 3k-bit one-hot encoding."""

    response_id: str
    labels: tuple[FeatureLabel, ...]
    component_ids: tuple[str, ...] | None = None
    component_set_digest: str | None = None
    overridden: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for v in self.labels:
            if int(v) not in LABEL_VALUES:
                raise ValueError(f"label {v!r} outside {{0,1,2}}")
        if self.component_ids is not None and len(self.component_ids) != len(self.labels):
            raise ValueError("component_ids and labels must align")

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def one_hot(self) -> tuple[int, ...]:
        bits = [0] * (3 * len(self.labels))
        for i, v in enumerate(self.labels):
            bits[3 * i + int(v)] = 1
        return tuple(bits)

    def label_of(self, component_id: str) -> FeatureLabel:
        if self.component_ids is None:
            raise ValueError("feature vector carries no component ids")
        return self.labels[self.component_ids.index(component_id)]


def decode_one_hot(bits: Sequence[int]) -> tuple[FeatureLabel, ...]:
    """Inverse of FeatureVector.one_hot; validates exactly one bit per block."""
    if len(bits) % 3 != 0:
        raise ValueError("one-hot length must be a multiple of 3")
    labels = []
    for i in range(len(bits) // 3):
        block = tuple(bits[3 * i : 3 * i + 3])
        if sum(block) != 1:
            raise ValueError(f"block {i} is not one-hot: {block}")
        labels.append(FeatureLabel(block.index(1)))
    return tuple(labels)


@dataclass
class FeatureMatrix:
    item_id: str
    component_set_digest: str
    rows: dict[str, FeatureVector]

    def __post_init__(self) -> None:
        k = None
        for rid, vec in self.rows.items():
            if vec.component_set_digest not in (None, self.component_set_digest):
                raise StalenessError(f"row {rid!r} built against a different component set")
            if k is None:
                k = vec.k
            elif vec.k != k:
                raise ValueError("rows have differing lengths")

    @property
    def k(self) -> int:
        for vec in self.rows.values():
            return vec.k
        return 0

    def ordered_ids(self) -> list[str]:
        return sorted(self.rows)

    def labels_array(self, response_ids: Sequence[str] | None = None) -> np.ndarray:
        ids = self.ordered_ids() if response_ids is None else list(response_ids)
        return np.array([[int(v) for v in self.rows[r].labels] for r in ids], dtype=np.int64)


# ---------------------------------------------------------------------------
# Prompting and parsing
# ---------------------------------------------------------------------------


def build_label_prompt(
    response: Response,
    component: AnalyticComponent,
    item: Item,
    *,
    model_name: str,
    temperature: float = 0.7,
    sample_index: int = 0,
    max_tokens: int = 1024,
) -> CompletionRequest:
    """Step-by-step labeling prompt ending in a forced 'LABEL: <0|1|2>' line.

    The template depends only on (response text, component text, item
    prompt); repeated draws differ solely in the request's sample_index.
    """
    lines = []
    if item.prompt_text.strip():
        lines += [PROMPT_HEADER, item.prompt_text.strip(), ""]
    lines += [
        STATEMENT_HEADER,
        component.text,
        "",
        RESPONSE_HEADER,
        response.text,
        "",
        DECIDE_HEADER,
        *LABEL_DEFINITIONS,
        "",
        "Reason step by step about what the response says, comparing it with the statement. "
        "Then give your final answer as the last line, in the exact form:",
        "LABEL: <0|1|2>",
    ]
    return CompletionRequest(
        model_name=model_name,
        messages=(("system", FEATURIZER_SYSTEM), ("user", "\n".join(lines))),
        temperature=temperature,
        sample_index=sample_index,
        max_tokens=max_tokens,
    )


_LABEL_RE = re.compile(r"LABEL:\s*(\d+)")


def parse_label(raw_text: str) -> FeatureLabel:
    """Extract the final 'LABEL: x' marker; the last marker wins."""
    matches = _LABEL_RE.findall(raw_text)
    if not matches:
        raise LabelParseError("no LABEL marker in completion")
    value = int(matches[-1])
    if value not in LABEL_VALUES:
        raise LabelParseError(f"final LABEL value {value} outside {{0,1,2}}")
    return FeatureLabel(value)


def aggregate_first_to_three(draws: Iterable[FeatureLabel | int]) -> tuple[FeatureLabel, int]:
    """Consume draws until some label value occurs three times.

    Returns the winning label and the number of draws consumed (always in
    [3, 7] when the stream can deliver). Raises AggregationError if the
    stream ends first.
    """
    counts = {0: 0, 1: 0, 2: 0}
    used = 0
    for draw in draws:
        value = int(draw)
        if value not in counts:
            raise ValueError(f"label {value!r} outside {{0,1,2}}")
        used += 1
        counts[value] += 1
        if counts[value] == 3:
            return FeatureLabel(value), used
    raise AggregationError(f"stream ended after {used} draws with no label at three")


# ---------------------------------------------------------------------------
# Featurization
# ---------------------------------------------------------------------------


def _pair_label_stream(
    response: Response,
    component: AnalyticComponent,
    item: Item,
    gateway: ChatGateway,
    *,
    model_name: str,
    temperature: float,
    draw_budget: int,
    sink: list[LabelDraw] | None,
) -> Iterator[FeatureLabel]:
    """Valid labels for one pair; parse failures burn budget silently."""
    for sample_index in range(draw_budget):
        request = build_label_prompt(
            response,
            component,
            item,
            model_name=model_name,
            temperature=temperature,
            sample_index=sample_index,
        )
        result = gateway.complete(request)
        try:
            label = parse_label(result.text)
        except LabelParseError:
            continue
        if sink is not None:
            sink.append(
                LabelDraw(
                    response_id=response.id,
                    component_id=component.id,
                    sample_index=sample_index,
                    raw_text=result.text,
                    parsed_label=label,
                    prompt_messages=request.messages,
                )
            )
        yield label


def featurize_response(
    response: Response,
    components: ComponentSet,
    gateway: ChatGateway,
    item: Item,
    *,
    model_name: str,
    temperature: float = 0.7,
    draw_budget: int = DEFAULT_DRAW_BUDGET,
    draws_out: list[LabelDraw] | None = None,
) -> FeatureVector:
    """Label the response against every component; draws per pair are
    strictly sequential (first-to-three is order-sensitive)."""
    if len(components) == 0:
        raise ValueError("component set is empty")
    labels: list[FeatureLabel] = []
    for component in components.components:
        sink: list[LabelDraw] = []
        stream = _pair_label_stream(
            response,
            component,
            item,
            gateway,
            model_name=model_name,
            temperature=temperature,
            draw_budget=draw_budget,
            sink=sink,
        )
        try:
            label, used = aggregate_first_to_three(stream)
        except AggregationError as exc:
            raise FeaturizationError(
                f"pair (response {response.id!r}, component {component.id!r}): {exc}"
            )
        labels.append(label)
        if draws_out is not None:
            draws_out.extend(sink[:used])
    return FeatureVector(
        response_id=response.id,
        labels=tuple(labels),
        component_ids=components.ids(),
        component_set_digest=components.digest(),
    )


def featurize_corpus(
    dataset: Dataset,
    components: ComponentSet,
    gateway: ChatGateway,
    *,
    model_name: str,
    temperature: float = 0.7,
    splits: Sequence[str] | None = None,
    draw_budget: int = DEFAULT_DRAW_BUDGET,
    workers: int = 4,
    allow_partial: bool = False,
    collect_draws: bool = True,
) -> tuple[FeatureMatrix, list[LabelDraw]]:
    """Featurize every response (optionally restricted to ``splits``).

    Responses are processed concurrently under the gateway's in-flight
    limit; rows and draws are emitted in deterministic order regardless of
    completion order. With a warm cache this issues zero backend calls.
    """
    digest = components.digest()
    targets = [r for r in dataset.responses if splits is None or r.split in splits]
    rows: dict[str, FeatureVector] = {}
    draws: list[LabelDraw] = []
    failures: list[str] = []

    def work(resp: Response) -> tuple[str, FeatureVector, list[LabelDraw]]:
        out: list[LabelDraw] = []
        vec = featurize_response(
            resp,
            components,
            gateway,
            dataset.item,
            model_name=model_name,
            temperature=temperature,
            draw_budget=draw_budget,
            draws_out=out if collect_draws else None,
        )
        return resp.id, vec, out

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {pool.submit(work, r): r for r in targets}
        for future, resp in futures.items():
            try:
                rid, vec, out = future.result()
            except FeaturizationError as exc:
                failures.append(str(exc))
                continue
            rows[rid] = vec
            draws.extend(out)

    if failures and not allow_partial:
        raise FeaturizationError(
            f"{len(failures)} pair(s) failed; rerun or pass allow_partial. First: {failures[0]}"
        )
    if failures:
        warnings.warn(f"featurization incomplete: {len(failures)} failed pair(s) dropped")

    component_order = {cid: i for i, cid in enumerate(components.ids())}
    draws.sort(key=lambda d: (d.response_id, component_order[d.component_id], d.sample_index))
    return FeatureMatrix(item_id=dataset.item.id, component_set_digest=digest, rows=rows), draws


# ---------------------------------------------------------------------------
# Offline mock labeling rule
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[a-z0-9']+")


def content_words(text: str, min_len: int = 4) -> list[str]:
    return [w for w in _WORD_RE.findall(text.lower()) if len(w) >= min_len]


def mock_label_rule(response_text: str, component_text: str) -> FeatureLabel:
    """Deterministic offline stand-in for the labeling model.

    2 when the component occurs verbatim (case-insensitive substring);
    1 when at least half its content words (length >= 4) appear in the
    response; 0 otherwise. A component with no content words can only
    score via the substring rule.
    """
    if component_text.lower() in response_text.lower():
        return FeatureLabel.DIRECT
    words = content_words(component_text)
    if not words:
        return FeatureLabel.ABSENT
    present = set(content_words(response_text, min_len=1))
    hits = sum(1 for w in words if w in present)
    if hits * 2 >= len(words):
        return FeatureLabel.PARTIAL
    return FeatureLabel.ABSENT


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_feature_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    """Documented layout: labels only; one-hot is recomputed on load."""
    write_json(
        path,
        {
            "item_id": matrix.item_id,
            "component_set_digest": matrix.component_set_digest,
            "rows": [
                {"response_id": rid, "labels": [int(v) for v in matrix.rows[rid].labels]}
                for rid in matrix.ordered_ids()
            ],
        },
    )


def load_feature_matrix(path: str | Path, components: ComponentSet) -> FeatureMatrix:
    raw = read_json(path)
    digest = raw["component_set_digest"]
    if digest != components.digest():
        raise StalenessError(
            f"feature matrix {path} was built against a different component set"
        )
    rows = {
        rec["response_id"]: FeatureVector(
            response_id=rec["response_id"],
            labels=tuple(FeatureLabel(int(v)) for v in rec["labels"]),
            component_ids=components.ids(),
            component_set_digest=digest,
        )
        for rec in raw["rows"]
    }
    return FeatureMatrix(item_id=raw["item_id"], component_set_digest=digest, rows=rows)


def save_draws(draws: Sequence[LabelDraw], path: str | Path, keep_raw: bool = True) -> None:
    write_jsonl(path, (d.to_record(keep_raw=keep_raw) for d in draws))


def load_draws(path: str | Path) -> list[LabelDraw]:
    return [LabelDraw.from_record(rec) for rec in read_jsonl(path)]


# ---------------------------------------------------------------------------
# Distillation export
# ---------------------------------------------------------------------------


def export_distillation_pairs(
    matrices: Sequence[FeatureMatrix],
    draws_by_item: dict[str, Sequence[LabelDraw]],
    n: int,
    seed: int,
    out_path: str | Path,
) -> int:
    """Sample n (response, component) pairs uniformly across items and emit
    every stored draw that agrees with the pair's aggregated label as a
    {prompt_messages, completion_text} supervised record. Returns the
    record count."""
    pool: list[tuple[str, str, str, int]] = []  # (item, response, component, agg label)
    for matrix in matrices:
        for rid in matrix.ordered_ids():
            vec = matrix.rows[rid]
            if vec.component_ids is None:
                raise ValueError("feature rows need component ids for export")
            for cid, label in zip(vec.component_ids, vec.labels):
                pool.append((matrix.item_id, rid, cid, int(label)))
    if n > len(pool):
        raise ValueError(f"requested {n} pairs but only {len(pool)} are available")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pool), size=n, replace=False)

    indexed: dict[tuple[str, str, str], list[LabelDraw]] = {}
    for item_id, draws in draws_by_item.items():
        for d in draws:
            indexed.setdefault((item_id, d.response_id, d.component_id), []).append(d)

    records = []
    for pick in sorted(int(i) for i in chosen):
        item_id, rid, cid, agg = pool[pick]
        for d in indexed.get((item_id, rid, cid), []):
            if int(d.parsed_label) == agg:
                records.append(
                    {
                        "prompt_messages": [[r, c] for r, c in d.prompt_messages],
                        "completion_text": d.raw_text,
                    }
                )
    write_jsonl(out_path, records)
    return len(records)
