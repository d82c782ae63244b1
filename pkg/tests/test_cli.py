import json
from pathlib import Path

import pytest

from anscore.featurize import load_draws
from anscore.ioutil import read_json, read_jsonl

from conftest import run_cli

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

SCHEMAS = Path(__file__).parent.parent / "src" / "anscore" / "schemas"


def validate(payload, schema_name):
    if jsonschema is None:
        pytest.skip("jsonschema not installed")
    jsonschema.validate(payload, read_json(SCHEMAS / schema_name))


# ---------------------------------------------------------------------------
# Full pipeline (session workspace built in conftest)
# ---------------------------------------------------------------------------


def test_pipeline_artifacts_exist(toy_workspace):
    for path in (
        toy_workspace.corpus_path("toy1"),
        toy_workspace.components_path("toy1"),
        toy_workspace.features_path("toy1"),
        toy_workspace.draws_path("toy1"),
        toy_workspace.model_path("toy1"),
        toy_workspace.report_path("toy1"),
    ):
        assert path.exists(), path


def test_ingest_split_counts(toy_workspace):
    corpus = toy_workspace.load_dataset("toy1")
    assert len(corpus.responses) == 50
    assert len(corpus.subset("train")) == 40
    assert len(corpus.subset("valid")) == 10


def test_component_store_shape(toy_workspace):
    raw = read_json(toy_workspace.components_path("toy1"))
    assert raw["item_id"] == "toy1"
    assert raw["backend"] == "mock"
    assert len(raw["components"]) == 6
    assert {"id", "part", "index", "text", "provenance"} <= set(raw["components"][0])
    assert "created_at" in raw


def test_evaluation_report_schema(toy_workspace):
    report = read_json(toy_workspace.report_path("toy1"))
    validate(report, "evaluation_report.schema.json")
    assert report["item_id"] == "toy1"
    assert report["n_test"] == 10
    assert report["qwk"] > 0.5  # mock featurization carries real signal


def test_draws_used_bounded(toy_workspace):
    per_pair: dict = {}
    for d in load_draws(toy_workspace.draws_path("toy1")):
        key = (d.response_id, d.component_id)
        per_pair[key] = per_pair.get(key, 0) + 1
    assert per_pair and all(3 <= n <= 7 for n in per_pair.values())


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------


def test_explain_renders(toy_workspace, capsys):
    corpus = toy_workspace.load_dataset("toy1")
    rid = corpus.responses[0].id
    assert run_cli("explain", "--workspace", str(toy_workspace.root), "--response", rid) == 0
    out = capsys.readouterr().out
    assert f"response {rid}" in out
    assert out.count("  [") == 6


def test_explain_override_changes_score(toy_workspace, capsys):
    ws = str(toy_workspace.root)
    corpus = toy_workspace.load_dataset("toy1")
    rid = corpus.responses[0].id
    assert run_cli("explain", "--workspace", ws, "--response", rid, "--json") == 0
    base = json.loads(capsys.readouterr().out)
    if not base["counterfactuals"]:
        pytest.skip("response has no score-changing edit")
    cf = base["counterfactuals"][0]
    assert run_cli(
        "explain", "--workspace", ws, "--response", rid, "--json",
        "--override", f"{cf['component_id']}={cf['alternative_label']}",
    ) == 0
    edited = json.loads(capsys.readouterr().out)
    assert edited["predicted_score"] == cf["new_score"]


def test_explain_unknown_response(toy_workspace):
    assert run_cli("explain", "--workspace", str(toy_workspace.root), "--response", "zzz") == 2


def test_explain_bad_override_syntax(toy_workspace):
    corpus = toy_workspace.load_dataset("toy1")
    rid = corpus.responses[0].id
    rc = run_cli("explain", "--workspace", str(toy_workspace.root),
                 "--response", rid, "--override", "C1")
    assert rc == 2


# ---------------------------------------------------------------------------
# error paths
# ---------------------------------------------------------------------------


def test_ingest_missing_file(tmp_path):
    items = tmp_path / "items.json"
    items.write_text('{"q": {"score_min": 0, "score_max": 2, "parts": [{"name": "main"}]}}')
    rc = run_cli("ingest", "--workspace", str(tmp_path / "ws"),
                 "--items", str(items), "--train-tsv", str(tmp_path / "missing.tsv"))
    assert rc == 2


def test_ingest_malformed_row(tmp_path, capsys):
    items = tmp_path / "items.json"
    items.write_text('{"q": {"score_min": 0, "score_max": 2, "parts": [{"name": "main"}]}}')
    tsv = tmp_path / "bad.tsv"
    tsv.write_text("Id\tEssaySet\tScore1\tScore2\tEssayText\n1\tq\tx\t0\ttext\n")
    rc = run_cli("ingest", "--workspace", str(tmp_path / "ws"),
                 "--items", str(items), "--train-tsv", str(tsv))
    assert rc == 2
    assert ":2:" in capsys.readouterr().err  # row-level diagnostic


def test_unknown_item_errors(toy_workspace):
    assert run_cli("extract", "--workspace", str(toy_workspace.root), "--item", "nope") == 2


# ---------------------------------------------------------------------------
# featurize idempotency
# ---------------------------------------------------------------------------


def test_featurize_warm_cache_zero_calls(toy_workspace, capsys):
    ws = str(toy_workspace.root)
    before = toy_workspace.features_path("toy1").read_bytes()
    assert run_cli("featurize", "--workspace", ws, "--item", "toy1", "--backend", "mock") == 0
    out = capsys.readouterr().out
    assert "backend calls: 0" in out
    assert toy_workspace.features_path("toy1").read_bytes() == before


def test_train_deterministic_artifact(toy_workspace):
    ws = str(toy_workspace.root)
    before = toy_workspace.model_path("toy1").read_bytes()
    assert run_cli("train", "--workspace", ws, "--item", "toy1") == 0
    assert toy_workspace.model_path("toy1").read_bytes() == before


# ---------------------------------------------------------------------------
# agreement
# ---------------------------------------------------------------------------


def write_ratings(path, rows, raters=("a", "b", "c", "model")):
    lines = ["unit," + ",".join(raters)]
    for i, row in enumerate(rows):
        lines.append(f"u{i}," + ",".join("" if v is None else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_agreement_perfect(tmp_path, capsys):
    ratings = write_ratings(tmp_path / "r.csv", [[v, v, v, v] for v in (0, 1, 2, 1, 0)])
    out_json = tmp_path / "report.json"
    rc = run_cli("agreement", str(ratings), "--model-rater", "model",
                 "--replicates", "50", "--json", str(out_json))
    assert rc == 0
    report = read_json(out_json)
    assert report["alpha"]["point"] == pytest.approx(1.0)
    assert report["qwk_vs_majority"]["point"] == pytest.approx(1.0)


def test_agreement_reproducible(tmp_path):
    import numpy as np

    rng = np.random.default_rng(0)
    rows = [[int(rng.integers(0, 3)) if rng.random() < 0.9 else None for _ in range(4)]
            for _ in range(30)]
    ratings = write_ratings(tmp_path / "r.csv", rows)
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for out in (out1, out2):
        assert run_cli("agreement", str(ratings), "--model-rater", "model",
                       "--replicates", "100", "--seed", "5", "--json", str(out)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_agreement_weighted(tmp_path):
    ratings = write_ratings(tmp_path / "r.csv", [[v, v, v, v] for v in (0, 1, 2, 1, 0)])
    weights = tmp_path / "w.csv"
    weights.write_text("u0,2.0\nu1,1.0\nu2,1.0\nu3,1.0\nu4,0.5\n")
    assert run_cli("agreement", str(ratings), "--weights", str(weights),
                   "--replicates", "50") == 0


# ---------------------------------------------------------------------------
# export-distill
# ---------------------------------------------------------------------------


def test_export_distill(toy_workspace, tmp_path):
    out = tmp_path / "distill.jsonl"
    assert run_cli("export-distill", "--workspace", str(toy_workspace.root),
                   "-n", "100", "--out", str(out)) == 0
    records = list(read_jsonl(out))
    assert len(records) == 300  # noise-free mock: 3 aligned draws per pair

    # every exported completion must agree with the aggregated label of its
    # pair; join back through the draws store's prompt messages
    from anscore.featurize import parse_label

    components = toy_workspace.load_components("toy1")
    matrix = toy_workspace.load_matrix("toy1", components)
    pair_by_prompt = {}
    for d in load_draws(toy_workspace.draws_path("toy1")):
        pair_by_prompt[tuple(map(tuple, d.prompt_messages))] = (d.response_id, d.component_id)
    index_of = {cid: i for i, cid in enumerate(components.ids())}
    for rec in records:
        assert rec["prompt_messages"][0][0] == "system"
        rid, cid = pair_by_prompt[tuple(tuple(m) for m in rec["prompt_messages"])]
        aggregate = matrix.rows[rid].labels[index_of[cid]]
        assert int(parse_label(rec["completion_text"])) == int(aggregate)


def test_export_distill_too_many(toy_workspace):
    assert run_cli("export-distill", "--workspace", str(toy_workspace.root), "-n", "99999") == 2
