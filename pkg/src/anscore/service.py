"""Read-mostly HTTP service over a workspace: items, responses,
explanations, what-if rescoring, and override persistence.

The service serves precomputed artifacts and never calls the completion
backend; inspection stays cheap, offline, and reproducible. Explanations
are computed on demand with the current override log applied, through the
same code path the CLI uses. What-if requests change nothing server-side.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .dataset import Dataset
from .errors import StalenessError
from .explain import OverrideRecord, apply_overrides, explain, explanation_to_dict
from .extraction import ComponentSet
from .featurize import FeatureLabel, FeatureMatrix, FeatureVector
from .ordinal import OrdinalModel, batch_predict
from .workspace import Workspace


@dataclass
class ItemState:
    item_id: str
    dataset: Dataset
    components: ComponentSet | None = None
    matrix: FeatureMatrix | None = None
    model: OrdinalModel | None = None
    predictions: dict[str, int] = field(default_factory=dict)


@dataclass
class Snapshot:
    """Immutable view of the workspace; swapped atomically on reload."""

    items: dict[str, ItemState]
    response_to_item: dict[str, str]

    @classmethod
    def load(cls, ws: Workspace) -> "Snapshot":
        items: dict[str, ItemState] = {}
        response_to_item: dict[str, str] = {}
        for item_id in ws.item_ids_with_corpus():
            state = ItemState(item_id=item_id, dataset=ws.load_dataset(item_id))
            if ws.components_path(item_id).exists():
                state.components = ws.load_components(item_id)
                if ws.features_path(item_id).exists():
                    try:
                        state.matrix = ws.load_matrix(item_id, state.components)
                    except StalenessError:
                        state.matrix = None  # stale features stay unserved
            if ws.model_path(item_id).exists():
                state.model = ws.load_model(item_id)
            if state.model is not None and state.matrix is not None:
                ids = state.matrix.ordered_ids()
                preds = batch_predict(state.model, state.matrix.labels_array(ids))
                state.predictions = dict(zip(ids, (int(p) for p in preds)))
            items[item_id] = state
            for r in state.dataset.responses:
                response_to_item[r.id] = item_id
        return cls(items=items, response_to_item=response_to_item)


def create_app(workspace_root: str | Path) -> FastAPI:
    ws = Workspace(workspace_root)
    app = FastAPI(title="anscore inspection service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.snapshot = Snapshot.load(ws)
    append_lock = threading.Lock()

    def snapshot() -> Snapshot:
        return app.state.snapshot

    def get_item(item_id: str) -> ItemState:
        state = snapshot().items.get(item_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        return state

    def locate_response(response_id: str) -> tuple[ItemState, str]:
        item_id = snapshot().response_to_item.get(response_id)
        if item_id is None:
            raise HTTPException(status_code=404, detail=f"unknown response {response_id!r}")
        return snapshot().items[item_id], item_id

    def scoring_state(response_id: str) -> tuple[ItemState, FeatureVector]:
        state, _ = locate_response(response_id)
        if state.components is None or state.matrix is None or state.model is None:
            raise HTTPException(
                status_code=404,
                detail=f"item {state.item_id!r} lacks components, features, or a model",
            )
        if state.matrix.rows.get(response_id) is None:
            raise HTTPException(status_code=404, detail=f"response {response_id!r} has no feature row")
        return state, state.matrix.rows[response_id]

    def effective_vector(state: ItemState, base: FeatureVector) -> FeatureVector:
        log = ws.override_log(state.item_id)
        try:
            return apply_overrides(base, log.for_response(base.response_id))
        except KeyError as exc:
            raise HTTPException(status_code=409, detail=f"stale override log: {exc}")

    def explanation_payload(state: ItemState, base: FeatureVector, vector: FeatureVector) -> dict:
        try:
            result = explain(state.model, state.components, vector)
        except StalenessError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        gold = next(
            (r.gold_score for r in state.dataset.responses if r.id == base.response_id), None
        )
        payload = explanation_to_dict(result)
        payload["item_id"] = state.item_id
        payload["gold_score"] = gold
        payload["base_labels"] = [
            {"component_id": cid, "label": int(lab)}
            for cid, lab in zip(base.component_ids or (), base.labels)
        ]
        return payload

    @app.get("/api/items")
    def list_items() -> list[dict]:
        out = []
        for item_id in sorted(snapshot().items):
            state = snapshot().items[item_id]
            out.append(
                {
                    "item_id": item_id,
                    "score_min": state.dataset.item.score_min,
                    "score_max": state.dataset.item.score_max,
                    "prompt_text": state.dataset.item.prompt_text,
                    "response_count": len(state.dataset.responses),
                    "component_count": len(state.components) if state.components else 0,
                    "has_features": state.matrix is not None,
                    "has_model": state.model is not None,
                }
            )
        return out

    @app.get("/api/items/{item_id}/responses")
    def list_responses(item_id: str, split: str | None = None, page: int = 1, page_size: int = 20) -> dict:
        state = get_item(item_id)
        if page < 1 or page_size < 1:
            raise HTTPException(status_code=400, detail="page and page_size must be >= 1")
        rows = [r for r in state.dataset.responses if split is None or r.split == split]
        rows.sort(key=lambda r: r.id)
        total = len(rows)
        total_pages = max(1, -(-total // page_size))
        start = (page - 1) * page_size
        return {
            "item_id": item_id,
            "split": split,
            "page": page,
            "page_size": page_size,
            "total": total,
            "total_pages": total_pages,
            "responses": [
                {
                    "response_id": r.id,
                    "split": r.split,
                    "text": r.text,
                    "gold_score": r.gold_score,
                    "predicted_score": state.predictions.get(r.id),
                }
                for r in rows[start : start + page_size]
            ],
        }

    @app.get("/api/responses/{response_id}/explanation")
    def get_explanation(response_id: str) -> dict:
        state, base = scoring_state(response_id)
        return explanation_payload(state, base, effective_vector(state, base))

    @app.post("/api/responses/{response_id}/whatif")
    def whatif(response_id: str, body: dict) -> dict:
        state, base = scoring_state(response_id)
        effective = effective_vector(state, base)
        overrides = body.get("overrides")
        if not isinstance(overrides, list):
            raise HTTPException(status_code=400, detail="body must carry an 'overrides' list")
        records = []
        for entry in overrides:
            record = _validate_override(entry, effective, response_id, author="whatif")
            if record is not None:
                records.append(record)
        return explanation_payload(state, base, apply_overrides(effective, records))

    @app.post("/api/responses/{response_id}/overrides")
    def post_override(response_id: str, body: dict) -> dict:
        state, base = scoring_state(response_id)
        effective = effective_vector(state, base)
        record = _validate_override(
            body, effective, response_id,
            author=str(body.get("author", "")), note=str(body.get("note", "")),
        )
        if record is None:
            raise HTTPException(status_code=400, detail="override does not change the effective label")
        with append_lock:
            ws.override_log(state.item_id).append(record)
        return explanation_payload(state, base, effective_vector(state, base))

    return app


def _validate_override(
    entry: dict, effective: FeatureVector, response_id: str, author: str = "", note: str = ""
) -> OverrideRecord | None:
    """400 on malformed input; None when the label already matches."""
    if not isinstance(entry, dict) or "component_id" not in entry or "label" not in entry:
        raise HTTPException(status_code=400, detail="override needs component_id and label")
    cid = str(entry["component_id"])
    label = entry["label"]
    if not isinstance(label, int) or label not in (0, 1, 2):
        raise HTTPException(status_code=400, detail=f"invalid label {label!r}; must be 0, 1, or 2")
    if effective.component_ids is None or cid not in effective.component_ids:
        raise HTTPException(status_code=400, detail=f"unknown component id {cid!r}")
    current = effective.label_of(cid)
    if int(current) == label:
        return None
    return OverrideRecord(
        response_id=response_id,
        component_id=cid,
        old_label=current,
        new_label=FeatureLabel(label),
        author=author,
        note=note,
    )
