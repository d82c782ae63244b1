import pytest

from anscore.dataset import (
    Dataset,
    Item,
    PartSpec,
    Response,
    dataset_from_dict,
    dataset_to_dict,
    human_human_qwk,
    load_asap_tsv,
    load_corpus,
    load_item_config,
    save_corpus,
    split_train_valid,
)
from anscore.errors import DataFormatError, EmptyDatasetError, UndefinedMetricError
from anscore.metrics import qwk

HEADER = "Id\tEssaySet\tScore1\tScore2\tEssayText"


def write_tsv(path, rows):
    path.write_text("\n".join([HEADER] + rows) + "\n", encoding="utf-8")
    return path


def toy_item(item_id="5", lo=0, hi=3):
    return Item(id=item_id, prompt_text="", parts=(PartSpec("main", 15),), score_min=lo, score_max=hi)


def make_dataset(n, item=None, offset=0):
    item = item or toy_item()
    responses = [
        Response(id=str(offset + i), item_id=item.id, text=f"answer {i}",
                 gold_score=i % (item.score_max + 1), split="train")
        for i in range(n)
    ]
    return Dataset(item, responses)


# ---------------------------------------------------------------------------
# TSV loading
# ---------------------------------------------------------------------------


def test_load_tsv_basic(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", [
        '1\t5\t2\t3\t"plants need light"',
        "2\t5\t0\t0\tno idea",
        "3\t6\t1\t1\tother item",
    ])
    ds = load_asap_tsv(path, toy_item())
    assert len(ds.responses) == 2
    assert ds.responses[0].text == "plants need light"  # quotes stripped
    assert ds.responses[0].gold_score == 2 and ds.responses[0].second_score == 3
    assert ds.responses[1].text == "no idea"


def test_load_tsv_header_only_is_empty(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", [])
    with pytest.raises(EmptyDatasetError):
        load_asap_tsv(path, toy_item())


def test_load_tsv_unknown_item_is_empty(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", ["1\t5\t2\t3\ttext"])
    with pytest.raises(EmptyDatasetError):
        load_asap_tsv(path, toy_item("9", 0, 2))


def test_load_tsv_bad_score_names_line(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", ["1\t5\t2\t3\tok", "2\t5\tx\t3\tbad"])
    with pytest.raises(DataFormatError, match=":3:"):
        load_asap_tsv(path, toy_item())


def test_load_tsv_bad_column_count_names_line(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", ["1\t5\t2\t3\tok", "2\t5\t1\t1"])
    with pytest.raises(DataFormatError, match=":3:"):
        load_asap_tsv(path, toy_item())


def test_load_tsv_wrong_header(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("a\tb\tc\td\te\n1\t5\t2\t3\tok\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="header"):
        load_asap_tsv(path, toy_item())


def test_load_tsv_out_of_range_score_fails_loudly(tmp_path):
    path = write_tsv(tmp_path / "d.tsv", ["1\t5\t9\t0\ttext"])
    with pytest.raises(DataFormatError, match="outside"):
        load_asap_tsv(path, toy_item())


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def test_split_cardinality_and_partition():
    ds = make_dataset(10)
    train, valid = split_train_valid(ds, 0.8, 7)
    assert len(train.responses) == 8 and len(valid.responses) == 2
    train_ids = {r.id for r in train.responses}
    valid_ids = {r.id for r in valid.responses}
    assert train_ids.isdisjoint(valid_ids)
    assert train_ids | valid_ids == {r.id for r in ds.responses}
    assert all(r.split == "valid" for r in valid.responses)


def test_split_deterministic():
    ds = make_dataset(50)
    a = split_train_valid(ds, 0.8, 3)
    b = split_train_valid(ds, 0.8, 3)
    assert [r.id for r in a[0].responses] == [r.id for r in b[0].responses]
    c = split_train_valid(ds, 0.8, 4)
    assert [r.id for r in a[0].responses] != [r.id for r in c[0].responses]


def test_split_floor_at_scale():
    ds = make_dataset(1672)
    train, valid = split_train_valid(ds, 0.8, 13)
    assert (len(train.responses), len(valid.responses)) == (1337, 335)


def test_split_validation():
    ds = make_dataset(10)
    with pytest.raises(ValueError):
        split_train_valid(ds, 1.0, 0)
    item = toy_item()
    unlabeled = Dataset(item, [Response(id="u1", item_id=item.id, text="t", split="unlabeled")])
    with pytest.raises(ValueError):
        split_train_valid(unlabeled, 0.5, 0)


# ---------------------------------------------------------------------------
# Agreement and round-trips
# ---------------------------------------------------------------------------


def test_human_human_qwk_identity():
    item = toy_item(lo=0, hi=2)
    ds = Dataset(item, [
        Response(id=str(i), item_id=item.id, text="t", gold_score=i % 3, second_score=i % 3)
        for i in range(9)
    ])
    assert human_human_qwk(ds) == 1.0


def test_human_human_qwk_matches_direct_computation():
    item = toy_item(lo=0, hi=2)
    golds = [2, 1, 0, 2, 1]
    seconds = [2, 2, 0, 1, 1]
    ds = Dataset(item, [
        Response(id=str(i), item_id=item.id, text="t", gold_score=g, second_score=s)
        for i, (g, s) in enumerate(zip(golds, seconds))
    ])
    assert human_human_qwk(ds) == pytest.approx(qwk(golds, seconds, 0, 2))


def test_human_human_qwk_missing_second_score():
    item = toy_item()
    ds = Dataset(item, [Response(id="1", item_id=item.id, text="t", gold_score=1)])
    with pytest.raises(UndefinedMetricError):
        human_human_qwk(ds)


def test_corpus_json_round_trip(tmp_path):
    ds = make_dataset(12, toy_item("q", 0, 2))
    path = tmp_path / "corpus.json"
    save_corpus(ds, path)
    assert load_corpus(path) == ds
    assert dataset_from_dict(dataset_to_dict(ds)) == ds


def test_dataset_invariants():
    item = toy_item()
    with pytest.raises(DataFormatError, match="duplicate"):
        Dataset(item, [
            Response(id="1", item_id=item.id, text="a", gold_score=0),
            Response(id="1", item_id=item.id, text="b", gold_score=1),
        ])
    with pytest.raises(DataFormatError, match="references"):
        Dataset(item, [Response(id="1", item_id="other", text="a", gold_score=0)])
    with pytest.raises(DataFormatError, match="outside"):
        Dataset(item, [Response(id="1", item_id=item.id, text="a", gold_score=9)])


def test_item_validation():
    with pytest.raises(ValueError):
        Item(id="x", score_min=2, score_max=2)
    with pytest.raises(ValueError):
        Item(id="x", parts=())
    with pytest.raises(ValueError):
        PartSpec("p", cap=0)


def test_item_config(tmp_path):
    path = tmp_path / "items.json"
    path.write_text(
        '{"7": {"score_min": 0, "score_max": 2, "prompt_text": "p",'
        ' "parts": [{"name": "part_a", "cap": 15}, {"name": "part_b", "cap": 15}]}}',
        encoding="utf-8",
    )
    items = load_item_config(path)
    assert items["7"].parts == (PartSpec("part_a", 15), PartSpec("part_b", 15))
    assert items["7"].num_categories == 3
