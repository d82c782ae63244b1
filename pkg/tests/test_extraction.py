import numpy as np
import pytest

from anscore.dataset import Item, PartSpec
from anscore.errors import ExtractionError, ExtractionParseError
from anscore.extraction import (
    ComponentSet,
    build_extraction_prompt,
    edit_component_set,
    extract_components,
    load_component_set,
    parse_component_list,
    sample_response_texts,
    save_component_set,
)
from anscore.gateway import ChatGateway, MockBackend
from anscore.mockmodel import make_mock_handler


def make_item(parts=((("main"), 15),), prompt="What do pandas eat?"):
    return Item(
        id="q1",
        prompt_text=prompt,
        parts=tuple(PartSpec(name, cap) for name, cap in parts),
        score_min=0,
        score_max=2,
    )


def corpus_texts(n=40):
    # n distinct single-sentence answers plus a few high-frequency claims
    texts = []
    for i in range(n):
        claims = []
        if i % 2 == 0:
            claims.append("pandas eat bamboo")
        if i % 3 == 0:
            claims.append("koalas eat eucalyptus")
        claims.append(f"student {i} wrote this sentence")
        texts.append(". ".join(claims) + ".")
    return texts


def mock_gateway(tmp_path=None, noise=0.0):
    return ChatGateway(MockBackend(make_mock_handler(noise=noise)), cache_dir=tmp_path)


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------


def test_prompt_states_exact_count():
    request = build_extraction_prompt(make_item(), corpus_texts(), "main", 15, model_name="m")
    user = request.messages[-1][1]
    assert 'Write exactly 15 short, atomic statements for part "main".' in user
    assert "What do pandas eat?" in user
    assert "[1] " in user


def test_prompt_requires_responses():
    with pytest.raises(ValueError):
        build_extraction_prompt(make_item(), [], "main", 15, model_name="m")


def test_prompt_two_parts_distinct():
    item = make_item(parts=(("part_a", 15), ("part_b", 15)))
    a = build_extraction_prompt(item, corpus_texts(), "part_a", 15, model_name="m")
    b = build_extraction_prompt(item, corpus_texts(), "part_b", 15, model_name="m")
    assert a.messages != b.messages


def test_sample_respects_budgets():
    texts = [f"answer number {i} " + "x" * (i % 37) for i in range(500)]
    sampled = sample_response_texts(texts, sample_size=200, char_budget=4000)
    assert len(sampled) <= 200
    assert sum(len(t) for t in sampled) <= 4000 + max(len(t) for t in sampled)
    assert sampled == sample_response_texts(texts, sample_size=200, char_budget=4000)


def test_sample_stratifies_lengths():
    texts = ["s" * 5] * 30 + ["m" * 50] * 30 + ["l" * 500] * 30
    sampled = sample_response_texts(texts, sample_size=9, char_budget=10**6)
    lengths = {len(t) for t in sampled}
    assert lengths == {5, 50, 500}


# ---------------------------------------------------------------------------
# List parsing
# ---------------------------------------------------------------------------


def test_parse_numbered_list():
    text = "1. pandas eat bamboo\n2. koalas eat eucalyptus"
    assert parse_component_list(text, 2) == ["pandas eat bamboo", "koalas eat eucalyptus"]


def test_parse_count_mismatch():
    with pytest.raises(ExtractionParseError):
        parse_component_list("1. pandas eat bamboo\n2. koalas eat eucalyptus", 15)


def test_parse_mixed_markers_and_noise():
    rng = np.random.default_rng(0)
    markers = ["{i}. ", "{i}) ", "{i}: ", "- ", "* ", "• "]
    for _ in range(100):
        entries = [f"claim number {j} about topic {j}" for j in range(int(rng.integers(1, 8)))]
        lines = ["Here is the list you asked for:"]
        for j, entry in enumerate(entries, start=1):
            marker = markers[int(rng.integers(len(markers)))].format(i=j)
            indent = " " * int(rng.integers(0, 4))
            lines.append(f"{indent}{marker}{entry}")
        parsed = parse_component_list("\n".join(lines), len(entries))
        assert parsed == entries


# ---------------------------------------------------------------------------
# Extraction driver
# ---------------------------------------------------------------------------


def test_extract_single_part_cap_15(tmp_path):
    gw = mock_gateway(tmp_path)
    components = extract_components(make_item(), corpus_texts(), gw, model_name="m")
    assert len(components) == 15
    assert [c.index for c in components.components] == list(range(15))
    assert components.components[0].text == "pandas eat bamboo"  # most frequent claim


def test_extract_two_parts_total_30(tmp_path):
    item = make_item(parts=(("part_a", 15), ("part_b", 15)))
    components = extract_components(item, corpus_texts(), mock_gateway(tmp_path), model_name="m")
    assert len(components) == 30
    assert {c.part for c in components.components} == {"part_a", "part_b"}
    assert [c.id for c in components.components] == [f"C{i}" for i in range(1, 31)]


def test_extract_deterministic(tmp_path):
    a = extract_components(make_item(), corpus_texts(), mock_gateway(), model_name="m")
    b = extract_components(make_item(), corpus_texts(), mock_gateway(), model_name="m")
    assert a == b
    assert a.digest() == b.digest()


def test_extract_retries_on_parse_error():
    def flaky(request):
        if request.sample_index == 0:
            return "sorry, I cannot produce a list"
        return "\n".join(f"{i}. statement {i}" for i in range(1, 4))

    gw = ChatGateway(MockBackend(flaky))
    item = make_item(parts=(("main", 3),))
    components = extract_components(item, ["text"], gw, model_name="m")
    assert len(components) == 3


def test_extract_retry_exhaustion():
    gw = ChatGateway(MockBackend(lambda r: "no list here"))
    with pytest.raises(ExtractionError, match="no parseable list"):
        extract_components(make_item(parts=(("main", 3),)), ["text"], gw, model_name="m")


# ---------------------------------------------------------------------------
# Editing
# ---------------------------------------------------------------------------


def base_set(tmp_path):
    return extract_components(
        make_item(parts=(("main", 5),)), corpus_texts(), mock_gateway(tmp_path), model_name="m"
    )


def test_edit_remove_reindexes(tmp_path):
    cs = base_set(tmp_path)
    out = edit_component_set(cs, [{"op": "remove", "id": "C2"}])
    assert len(out) == 4
    assert [c.index for c in out.components] == [0, 1, 2, 3]
    assert "C2" not in out.ids()
    assert out.ids() == ("C1", "C3", "C4", "C5")  # surviving ids stay stable


def test_edit_rewrite_records_provenance(tmp_path):
    cs = base_set(tmp_path)
    out = edit_component_set(cs, [{"op": "rewrite", "id": "C3", "text": "rewritten claim"}])
    assert len(out) == len(cs)
    c3 = out.by_id()["C3"]
    assert c3.text == "rewritten claim"
    assert c3.provenance.startswith("rewritten")


def test_edit_add_duplicate_warns(tmp_path):
    cs = base_set(tmp_path)
    existing = cs.components[0].text
    with pytest.warns(UserWarning, match="duplicates"):
        out = edit_component_set(cs, [{"op": "add", "part": "main", "text": existing}])
    assert len(out) == 6
    assert out.components[-1].id == "C6"


def test_edit_unknown_id(tmp_path):
    cs = base_set(tmp_path)
    with pytest.raises(KeyError):
        edit_component_set(cs, [{"op": "remove", "id": "C99"}])


def test_noop_edit_keeps_digest(tmp_path):
    cs = base_set(tmp_path)
    assert edit_component_set(cs, []).digest() == cs.digest()


def test_component_set_validation():
    from anscore.extraction import AnalyticComponent

    a = AnalyticComponent(id="C1", item_id="q", part="main", index=0, text="x")
    with pytest.raises(ValueError, match="duplicate component id"):
        ComponentSet(item_id="q", components=(a, a))
    with pytest.raises(ValueError):
        AnalyticComponent(id="C1", item_id="q", part="main", index=0, text="  ")


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


def test_store_round_trip(tmp_path):
    cs = base_set(tmp_path)
    path = tmp_path / "components.json"
    save_component_set(cs, path, backend="mock", model_name="m")
    assert load_component_set(path) == cs
    assert load_component_set(path).digest() == cs.digest()
