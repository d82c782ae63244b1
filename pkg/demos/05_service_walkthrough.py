"""The inspection HTTP API, driven in-process.

Builds the toy workspace, mounts the service with a test client, and
walks the endpoints the browser frontend uses: item list, paged
responses, the explanation payload, a stateless what-if, and a persisted
override. No port is opened; `anscore serve` exposes the same app over
HTTP.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from anscore.cli import main as anscore
from anscore.service import create_app
from anscore.toydata import write_toy_workspace_inputs

root = Path(tempfile.mkdtemp(prefix="anscore_demo_"))
ws = str(root / "workspace")
tsv, items = write_toy_workspace_inputs(root / "inputs")
for argv in (
    ["ingest", "--workspace", ws, "--items", str(items), "--train-tsv", str(tsv)],
    ["extract", "--workspace", ws, "--item", "toy1", "--backend", "mock"],
    ["featurize", "--workspace", ws, "--item", "toy1", "--backend", "mock"],
    ["train", "--workspace", ws, "--item", "toy1"],
):
    assert anscore(argv) == 0

client = TestClient(create_app(ws))

print("GET /api/items")
items_payload = client.get("/api/items").json()
print(json.dumps(items_payload, indent=2)[:400], "...\n")

print("GET /api/items/toy1/responses?split=valid&page_size=3")
page = client.get("/api/items/toy1/responses", params={"split": "valid", "page_size": 3}).json()
for row in page["responses"]:
    print(f"  {row['response_id']}: gold={row['gold_score']} predicted={row['predicted_score']}")
rid = page["responses"][0]["response_id"]

print(f"\nGET /api/responses/{rid}/explanation")
explanation = client.get(f"/api/responses/{rid}/explanation").json()
print(f"  predicted {explanation['predicted_score']}, eta {explanation['eta']:+.3f}, "
      f"thresholds {[round(t, 3) for t in explanation['thresholds']]}")
for row in explanation["rows"]:
    print(f"  {row['component_id']} label {row['label']} ({row['contribution']:+.3f})")

if explanation["counterfactuals"]:
    cf = explanation["counterfactuals"][0]
    print(f"\nPOST /api/responses/{rid}/whatif  (try {cf['component_id']} -> {cf['alternative_label']})")
    whatif = client.post(
        f"/api/responses/{rid}/whatif",
        json={"overrides": [{"component_id": cf["component_id"], "label": cf["alternative_label"]}]},
    ).json()
    print(f"  what-if score: {whatif['predicted_score']} (listed counterfactual said {cf['new_score']})")

    print(f"\nPOST /api/responses/{rid}/overrides  (persist the same edit)")
    persisted = client.post(
        f"/api/responses/{rid}/overrides",
        json={"component_id": cf["component_id"], "label": cf["alternative_label"],
              "author": "demo", "note": "walkthrough"},
    ).json()
    print(f"  persisted score: {persisted['predicted_score']}")
    fresh = client.get(f"/api/responses/{rid}/explanation").json()
    print(f"  re-GET shows the override: score {fresh['predicted_score']}, "
          f"overridden rows: {[r['component_id'] for r in fresh['rows'] if r['overridden']]}")
