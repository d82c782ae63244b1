"""Faithful score explanations: evidence rows, counterfactuals, overrides.

An explanation is assembled from the very same quantities the scorer
uses: per-component weight contributions that sum exactly to the evidence
value, the threshold band that produced the predicted score, and the
"if instead" counterfactuals obtained by rerunning the actual scorer on
single-label edits. Human overrides replace labels and rescore through
the identical code path, never a parallel one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .errors import StalenessError
from .extraction import ComponentSet
from .featurize import FeatureLabel, FeatureVector
from .ioutil import append_jsonl, read_jsonl, timestamp_now
from .ordinal import OrdinalModel, contribution_table, eta, predict_eta

LABEL_MARKS = {0: "✗", 1: "△", 2: "✓"}  # ✗ △ ✓


@dataclass(frozen=True)
class ExplanationRow:
    component_id: str
    component_text: str
    label: FeatureLabel
    contribution: float
    overridden: bool


@dataclass(frozen=True)
class Counterfactual:
    component_id: str
    alternative_label: FeatureLabel
    new_eta: float
    new_score: int
    score_changed: bool


@dataclass(frozen=True)
class Explanation:
    response_id: str
    predicted_score: int
    eta: float
    thresholds: tuple[float, ...]
    rows: tuple[ExplanationRow, ...]
    counterfactuals: tuple[Counterfactual, ...]


@dataclass(frozen=True)
class OverrideRecord:
    response_id: str
    component_id: str
    old_label: FeatureLabel
    new_label: FeatureLabel
    author: str = ""
    timestamp: str = ""
    note: str = ""

    def __post_init__(self) -> None:
        if int(self.old_label) == int(self.new_label):
            raise ValueError("override must change the label")

    def to_record(self) -> dict:
        return {
            "response_id": self.response_id,
            "component_id": self.component_id,
            "old_label": int(self.old_label),
            "new_label": int(self.new_label),
            "author": self.author,
            "timestamp": self.timestamp,
            "note": self.note,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "OverrideRecord":
        return cls(
            response_id=rec["response_id"],
            component_id=rec["component_id"],
            old_label=FeatureLabel(int(rec["old_label"])),
            new_label=FeatureLabel(int(rec["new_label"])),
            author=rec.get("author", ""),
            timestamp=rec.get("timestamp", ""),
            note=rec.get("note", ""),
        )


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------


def explain(model: OrdinalModel, components: ComponentSet, features: FeatureVector) -> Explanation:
    """Assemble the full explanation for one featurized response.

    Counterfactuals enumerate every single-label edit whose predicted
    score differs from the current one; nothing is precomputed or cached,
    the scorer itself is rerun for each.
    """
    digest = components.digest()
    if model.component_set_digest != digest:
        raise StalenessError("model was trained against a different component set")
    if features.component_set_digest is not None and features.component_set_digest != digest:
        raise StalenessError("features were computed against a different component set")
    if features.k != model.k or features.k != len(components):
        raise StalenessError("component count mismatch between model, features, and set")

    contribs = contribution_table(model, features)
    eta_value = eta(model, features)
    predicted = predict_eta(model, eta_value)

    rows = tuple(
        ExplanationRow(
            component_id=comp.id,
            component_text=comp.text,
            label=FeatureLabel(label),
            contribution=contribution,
            overridden=comp.id in features.overridden,
        )
        for comp, (_, label, contribution) in zip(components.components, contribs)
    )

    counterfactuals = []
    for i, comp in enumerate(components.components):
        current = int(features.labels[i])
        for alternative in (0, 1, 2):
            if alternative == current:
                continue
            new_eta = eta_value - model.weights[i, current] + model.weights[i, alternative]
            new_score = predict_eta(model, float(new_eta))
            if new_score != predicted:
                counterfactuals.append(
                    Counterfactual(
                        component_id=comp.id,
                        alternative_label=FeatureLabel(alternative),
                        new_eta=float(new_eta),
                        new_score=new_score,
                        score_changed=True,
                    )
                )

    return Explanation(
        response_id=features.response_id,
        predicted_score=predicted,
        eta=eta_value,
        thresholds=tuple(float(t) for t in model.thresholds),
        rows=rows,
        counterfactuals=tuple(counterfactuals),
    )


def apply_overrides(features: FeatureVector, overrides: Sequence[OverrideRecord]) -> FeatureVector:
    """Substitute labels per override (last record wins per component).

    Returns a new vector carrying the overridden component ids; the
    original is untouched.
    """
    if not overrides:
        return features
    if features.component_ids is None:
        raise ValueError("feature vector carries no component ids")
    index = {cid: i for i, cid in enumerate(features.component_ids)}
    labels = list(features.labels)
    touched = set(features.overridden)
    for record in overrides:
        if record.component_id not in index:
            raise KeyError(f"unknown component id {record.component_id!r}")
        labels[index[record.component_id]] = record.new_label
        touched.add(record.component_id)
    return replace(features, labels=tuple(labels), overridden=frozenset(touched))


def rescore_with_overrides(
    model: OrdinalModel,
    components: ComponentSet,
    features: FeatureVector,
    overrides: Sequence[OverrideRecord],
) -> Explanation:
    """The what-if path IS the pipeline path: explain after substitution."""
    return explain(model, components, apply_overrides(features, overrides))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_text(explanation: Explanation) -> str:
    """Deterministic human-readable panel: checklist, evidence, threshold
    band, and 'if instead' lines for score-changing single edits."""
    lines = [
        f"response {explanation.response_id}: predicted score {explanation.predicted_score}",
        f"evidence value eta = {explanation.eta:+.4f}",
    ]
    lo = _band_edge(explanation, lower=True)
    hi = _band_edge(explanation, lower=False)
    lines.append(f"score band: {lo} <= eta < {hi}")
    lines.append("components:")
    for row in explanation.rows:
        mark = LABEL_MARKS[int(row.label)]
        suffix = "  [overridden]" if row.overridden else ""
        lines.append(
            f"  [{mark}] {row.component_id} {row.component_text}  ({row.contribution:+.4f}){suffix}"
        )
    for cf in explanation.counterfactuals:
        if cf.score_changed:
            lines.append(
                f"if instead {cf.component_id} were {LABEL_MARKS[int(cf.alternative_label)]} "
                f"(label {int(cf.alternative_label)}), the score would be {cf.new_score} "
                f"(eta = {cf.new_eta:+.4f})"
            )
    return "\n".join(lines) + "\n"


def _band_edge(explanation: Explanation, lower: bool) -> str:
    theta = explanation.thresholds
    # category index relative to the lowest score served by this model
    offset_j = sum(1 for t in theta if t <= explanation.eta)
    if lower:
        return f"{theta[offset_j - 1]:+.4f}" if offset_j >= 1 else "-inf"
    return f"{theta[offset_j]:+.4f}" if offset_j < len(theta) else "+inf"


def explanation_to_dict(explanation: Explanation) -> dict:
    return {
        "response_id": explanation.response_id,
        "predicted_score": explanation.predicted_score,
        "eta": explanation.eta,
        "thresholds": list(explanation.thresholds),
        "rows": [
            {
                "component_id": r.component_id,
                "component_text": r.component_text,
                "label": int(r.label),
                "contribution": r.contribution,
                "overridden": r.overridden,
            }
            for r in explanation.rows
        ],
        "counterfactuals": [
            {
                "component_id": c.component_id,
                "alternative_label": int(c.alternative_label),
                "new_eta": c.new_eta,
                "new_score": c.new_score,
                "score_changed": c.score_changed,
            }
            for c in explanation.counterfactuals
        ],
    }


# ---------------------------------------------------------------------------
# Override log
# ---------------------------------------------------------------------------


class OverrideLog:
    """Append-only override log; effective state is last-wins per
    (response, component). Single writer, many readers."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def append(self, record: OverrideRecord) -> OverrideRecord:
        if not record.timestamp:
            record = replace(record, timestamp=timestamp_now())
        append_jsonl(self.path, [record.to_record()])
        return record

    def all_records(self) -> list[OverrideRecord]:
        if not self.path.exists():
            return []
        return [OverrideRecord.from_record(rec) for rec in read_jsonl(self.path)]

    def for_response(self, response_id: str) -> list[OverrideRecord]:
        """Latest override per component, in first-touched order."""
        latest: dict[str, OverrideRecord] = {}
        for rec in self.all_records():
            if rec.response_id == response_id:
                latest[rec.component_id] = rec
        return list(latest.values())
