"""Offline stand-in for the completion backend.

Recognizes the package's own extraction and labeling prompts by their
section headers and answers them with pure, replayable text. Labeling
follows ``mock_label_rule``; an optional noise rate perturbs labels as a
deterministic function of (prompt, sample_index) so first-to-three
aggregation sees draw-to-draw diversity without losing replayability.
"""

from __future__ import annotations

import hashlib
import re

from . import extraction, featurize
from .errors import ProtocolError
from .gateway import CompletionRequest


def _user_message(request: CompletionRequest) -> str:
    for role, content in reversed(request.messages):
        if role == "user":
            return content
    raise ProtocolError("mock backend: request has no user message")


def _section(text: str, header: str, stop_headers: tuple[str, ...]) -> str:
    start = text.find(header)
    if start < 0:
        raise ProtocolError(f"mock backend: missing section {header!r}")
    start += len(header)
    end = len(text)
    for stop in stop_headers:
        pos = text.find(stop, start)
        if 0 <= pos < end:
            end = pos
    return text[start:end].strip("\n").strip()


_RESPONSE_LINE_RE = re.compile(r"^\[\d+\]\s?(.*)$")
_NORMALIZE_RE = re.compile(r"[^a-z0-9 ]+")


def _normalize_sentence(s: str) -> str:
    return _NORMALIZE_RE.sub("", s.lower()).strip()


def _split_sentences(text: str) -> list[str]:
    return [p.strip() for p in re.split(r"[.!?]+", text) if p.strip()]


def answer_extraction(request: CompletionRequest) -> str:
    """Return a numbered list of the most frequent distinct sentences
    found across the embedded responses, padded if the corpus is thin."""
    user = _user_message(request)
    cap_match = re.search(r"exactly (\d+) short, atomic statements", user)
    part_match = re.search(r'for part "([^"]*)"', user)
    if not cap_match:
        raise ProtocolError("mock backend: extraction prompt lacks its count sentence")
    cap = int(cap_match.group(1))
    part = part_match.group(1) if part_match else "main"
    block = _section(user, extraction.RESPONSES_HEADER, ())
    counts: dict[str, int] = {}
    surface: dict[str, str] = {}
    for line in block.splitlines():
        m = _RESPONSE_LINE_RE.match(line.strip())
        if not m:
            continue
        for sentence in _split_sentences(m.group(1)):
            key = _normalize_sentence(sentence)
            if not key:
                continue
            counts[key] = counts.get(key, 0) + 1
            surface.setdefault(key, sentence)
    first_seen = {key: i for i, key in enumerate(counts)}
    ranked = sorted(counts, key=lambda s: (-counts[s], first_seen[s]))
    statements = [surface[s] for s in ranked[:cap]]
    while len(statements) < cap:
        statements.append(f"additional point {len(statements) + 1} about {part}")
    return "\n".join(f"{i}. {s}" for i, s in enumerate(statements, start=1))


def answer_labeling(request: CompletionRequest, noise: float = 0.0) -> str:
    user = _user_message(request)
    statement = _section(user, featurize.STATEMENT_HEADER, (featurize.RESPONSE_HEADER,))
    response = _section(user, featurize.RESPONSE_HEADER, (featurize.DECIDE_HEADER,))
    label = int(featurize.mock_label_rule(response, statement))
    if noise > 0.0:
        digest = hashlib.sha256(
            f"{statement}\x1f{response}\x1f{request.sample_index}".encode("utf-8")
        ).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        if u < noise:
            label = (label + 1 + digest[8] % 2) % 3
    return (
        "Comparing the response against the statement: "
        f"the match looks like label {label}.\nLABEL: {label}"
    )


def make_mock_handler(noise: float = 0.0):
    """The default offline handler: routes by prompt section headers."""

    def handler(request: CompletionRequest) -> str:
        user = _user_message(request)
        if featurize.STATEMENT_HEADER in user and featurize.RESPONSE_HEADER in user:
            return answer_labeling(request, noise=noise)
        if extraction.RESPONSES_HEADER in user:
            return answer_extraction(request)
        raise ProtocolError("mock backend: unrecognized prompt shape")

    return handler
