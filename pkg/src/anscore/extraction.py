"""Analytic component extraction from response corpora.

Derives a fixed number of short, atomic statements per item part from the
response texts alone (gold scores are never consulted; the prompt builder
accepts only texts). The resulting component set is the feature anchor for
everything downstream, so it carries a content digest that later artifacts
must match.
"""

from __future__ import annotations

import hashlib
import re
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Item
from .errors import ExtractionError, ExtractionParseError
from .gateway import ChatGateway, CompletionRequest
from .ioutil import dumps_canonical, read_json, timestamp_now, write_json

EXTRACTION_SYSTEM = (
    "You identify the distinct claims students make in short answers to an assessment item. "
    "You answer with a numbered list and nothing else."
)

# Section headers are load-bearing: the offline mock backend locates the
# embedded data by these exact strings.
PROMPT_HEADER = "Assessment prompt:"
RESPONSES_HEADER = "Student responses:"
_COUNT_SENTENCE = 'Write exactly {cap} short, atomic statements for part "{part}".'

PARSE_RETRY_LIMIT = 3
DEFAULT_SAMPLE_SIZE = 200
DEFAULT_CHAR_BUDGET = 12000


@dataclass(frozen=True)
class AnalyticComponent:
    """One atomic claim/statement, positioned within an item part."""

    id: str
    item_id: str
    part: str
    index: int
    text: str
    provenance: str = "extracted"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"component {self.id!r}: text must be non-empty")


@dataclass(frozen=True)
class ComponentSet:
    item_id: str
    components: tuple[AnalyticComponent, ...]

    def __post_init__(self) -> None:
        seen_ids = set()
        seen_pos = set()
        for c in self.components:
            if c.id in seen_ids:
                raise ValueError(f"duplicate component id {c.id!r}")
            seen_ids.add(c.id)
            if (c.part, c.index) in seen_pos:
                raise ValueError(f"duplicate (part, index) ({c.part!r}, {c.index})")
            seen_pos.add((c.part, c.index))

    def __len__(self) -> int:
        return len(self.components)

    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.components)

    def by_id(self) -> dict[str, AnalyticComponent]:
        return {c.id: c for c in self.components}

    def digest(self) -> str:
        payload = dumps_canonical(
            {
                "item_id": self.item_id,
                "components": [[c.id, c.part, c.index, c.text] for c in self.components],
            }
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------


def sample_response_texts(
    texts: list[str],
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    char_budget: int = DEFAULT_CHAR_BUDGET,
) -> list[str]:
    """Deterministic sample stratified by response length terciles.

    Sorting by length splits the corpus into short/medium/long thirds;
    evenly spaced picks from each tercile are interleaved until the size
    and character budgets are hit. No RNG: extraction must be replayable.
    """
    if not texts:
        return []
    lengths = np.array([len(t) for t in texts])
    order = np.argsort(lengths, kind="stable")
    terciles = [t for t in np.array_split(order, 3) if len(t)]
    per = max(1, -(-sample_size // len(terciles)))  # ceil division
    picks: list[list[int]] = []
    for terc in terciles:
        take = min(per, len(terc))
        pos = np.linspace(0, len(terc) - 1, take).round().astype(int)
        picks.append([int(terc[p]) for p in dict.fromkeys(pos)])
    sampled: list[str] = []
    used = 0
    for group in zip(*[p + [None] * (max(map(len, picks)) - len(p)) for p in picks]):
        for idx in group:
            if idx is None:
                continue
            t = texts[idx]
            if len(sampled) >= sample_size:
                return sampled
            if sampled and used + len(t) > char_budget:
                return sampled
            sampled.append(t)
            used += len(t)
    return sampled


def build_extraction_prompt(
    item: Item,
    response_texts: list[str],
    part: str,
    cap: int,
    *,
    model_name: str,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    char_budget: int = DEFAULT_CHAR_BUDGET,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    sample_index: int = 0,
) -> CompletionRequest:
    """Prompt asking for exactly ``cap`` atomic statements for ``part``.

    Receives response texts only, never Response records, so gold scores
    cannot leak into extraction.
    """
    if not response_texts:
        raise ValueError("extraction requires at least one response text")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    sampled = sample_response_texts(response_texts, sample_size, char_budget)
    lines = [f"Below are student responses to one assessment item, for part \"{part}\"."]
    if item.prompt_text.strip():
        lines += ["", PROMPT_HEADER, item.prompt_text.strip()]
    lines += [
        "",
        _COUNT_SENTENCE.format(cap=cap, part=part),
        "The statements together should best represent the distinct claims, statements, or "
        "arguments found across the responses. Each statement must express a single claim in "
        "plain language, stay grounded in what the responses actually say, and stand on its own.",
        f"Return only a numbered list: exactly {cap} lines, one statement per line.",
        "",
        RESPONSES_HEADER,
    ]
    for i, text in enumerate(sampled, start=1):
        lines.append(f"[{i}] {' '.join(text.split())}")
    return CompletionRequest(
        model_name=model_name,
        messages=(("system", EXTRACTION_SYSTEM), ("user", "\n".join(lines))),
        temperature=temperature,
        sample_index=sample_index,
        max_tokens=max_tokens,
    )


_ENTRY_RE = re.compile(r"^\s*(?:\d+\s*[.):]\s*|[-*•]\s+)(.*\S)\s*$")


def parse_component_list(text: str, cap: int) -> list[str]:
    """Recover exactly ``cap`` entries from a numbered or bulleted list.

    Lines without a list marker (preamble, commentary) are ignored. Raises
    ExtractionParseError when the entry count differs from ``cap``.
    """
    entries: list[str] = []
    for line in text.splitlines():
        m = _ENTRY_RE.match(line)
        if m:
            entries.append(m.group(1).strip())
    if len(entries) != cap:
        raise ExtractionParseError(f"expected {cap} list entries, parsed {len(entries)}")
    return entries


# ---------------------------------------------------------------------------
# Extraction driver
# ---------------------------------------------------------------------------


def extract_components(
    item: Item,
    response_texts: list[str],
    gateway: ChatGateway,
    *,
    model_name: str,
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    char_budget: int = DEFAULT_CHAR_BUDGET,
    temperature: float = 0.0,
) -> ComponentSet:
    """One gateway call per part (with parse retries); components ordered
    part by part, ids C1..Ck across the whole set."""
    if not response_texts:
        raise ValueError("extraction requires at least one response")
    components: list[AnalyticComponent] = []
    counter = 1
    for part in item.parts:
        texts: list[str] | None = None
        last_err: Exception | None = None
        for attempt in range(PARSE_RETRY_LIMIT):
            request = build_extraction_prompt(
                item,
                response_texts,
                part.name,
                part.cap,
                model_name=model_name,
                sample_size=sample_size,
                char_budget=char_budget,
                temperature=temperature,
                sample_index=attempt,
            )
            result = gateway.complete(request)
            try:
                texts = parse_component_list(result.text, part.cap)
                break
            except ExtractionParseError as exc:
                last_err = exc
        if texts is None:
            raise ExtractionError(
                f"item {item.id!r} part {part.name!r}: no parseable list after "
                f"{PARSE_RETRY_LIMIT} completions ({last_err})"
            )
        for index, text in enumerate(texts):
            components.append(
                AnalyticComponent(
                    id=f"C{counter}",
                    item_id=item.id,
                    part=part.name,
                    index=index,
                    text=text,
                )
            )
            counter += 1
    return ComponentSet(item_id=item.id, components=tuple(components))


def edit_component_set(component_set: ComponentSet, edits: list[dict]) -> ComponentSet:
    """Apply human curation edits: {"op": "remove"|"rewrite"|"add", ...}.

    Remove and rewrite reference existing component ids; add appends to a
    part. Indices are recomputed per part; ids are never reused, so
    provenance chains stay readable. Adding text that duplicates an
    existing component is accepted with a warning (dedup is a human call).
    """
    by_id = {c.id: c for c in component_set.components}
    removed: set[str] = set()
    rewritten: dict[str, str] = {}
    added: list[tuple[str, str]] = []  # (part, text)
    for edit in edits:
        op = edit.get("op")
        if op == "remove":
            cid = edit["id"]
            if cid not in by_id:
                raise KeyError(f"unknown component id {cid!r}")
            removed.add(cid)
        elif op == "rewrite":
            cid = edit["id"]
            if cid not in by_id:
                raise KeyError(f"unknown component id {cid!r}")
            rewritten[cid] = edit["text"]
        elif op == "add":
            added.append((edit.get("part", component_set.components[0].part if component_set.components else "main"), edit["text"]))
        else:
            raise ValueError(f"unknown edit op {op!r}")

    existing_texts = {
        c.text.strip().lower() for c in component_set.components if c.id not in removed
    }
    stamp = timestamp_now()
    surviving: list[AnalyticComponent] = []
    for c in component_set.components:
        if c.id in removed:
            continue
        if c.id in rewritten:
            c = replace(c, text=rewritten[c.id], provenance=f"rewritten {stamp}")
        surviving.append(c)

    next_num = 1 + max(
        (int(m.group(1)) for c in component_set.components if (m := re.fullmatch(r"C(\d+)", c.id))),
        default=0,
    )
    for part, text in added:
        if text.strip().lower() in existing_texts:
            warnings.warn(f"added component duplicates existing text: {text!r}")
        existing_texts.add(text.strip().lower())
        surviving.append(
            AnalyticComponent(
                id=f"C{next_num}",
                item_id=component_set.item_id,
                part=part,
                index=-1,  # recomputed below
                text=text,
                provenance=f"added {stamp}",
            )
        )
        next_num += 1

    # recompute indices per part, preserving list order
    counters: dict[str, int] = {}
    reindexed = []
    for c in surviving:
        idx = counters.get(c.part, 0)
        counters[c.part] = idx + 1
        reindexed.append(replace(c, index=idx))
    return ComponentSet(item_id=component_set.item_id, components=tuple(reindexed))


# ---------------------------------------------------------------------------
# Component store
# ---------------------------------------------------------------------------


def save_component_set(
    component_set: ComponentSet, path, *, backend: str, model_name: str
) -> None:
    write_json(
        path,
        {
            "item_id": component_set.item_id,
            "created_at": timestamp_now(),
            "backend": backend,
            "model_name": model_name,
            "components": [
                {
                    "id": c.id,
                    "part": c.part,
                    "index": c.index,
                    "text": c.text,
                    "provenance": c.provenance,
                }
                for c in component_set.components
            ],
        },
    )


def load_component_set(path) -> ComponentSet:
    raw = read_json(path)
    return ComponentSet(
        item_id=raw["item_id"],
        components=tuple(
            AnalyticComponent(
                id=c["id"],
                item_id=raw["item_id"],
                part=c["part"],
                index=int(c["index"]),
                text=c["text"],
                provenance=c.get("provenance", "extracted"),
            )
            for c in raw["components"]
        ),
    )
