import json

import pytest
from hypothesis import given, settings, strategies as st

from gqa import data
from gqa.data import Example, Vocabulary, generate_synthetic, split, tokenize
from gqa.errors import ContractError, IngestionError, ParseError


def _record(rid="r1", answer="Paris", n_docs=2, facts=None):
    context = [[f"Doc {i}", [f"Doc {i} is about Paris.", "It has two sentences."]] for i in range(n_docs)]
    return {
        "_id": rid,
        "question": "Which city is Doc 0 about?",
        "answer": answer,
        "type": "bridge",
        "context": context,
        "supporting_facts": facts if facts is not None else [["Doc 0", 0]],
    }


def _write(tmp_path, records, name="corpus.json"):
    path = tmp_path / name
    path.write_text(json.dumps(records))
    return path


def test_tokenize_detaches_punctuation():
    assert tokenize("The (big) cat, sat.") == ("the", "(", "big", ")", "cat", ",", "sat", ".")
    assert tokenize("U.S. army") == ("u.s", ".", "army")


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=60))
def test_tokenize_is_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


def test_load_yes_answer(tmp_path):
    (ex,) = data.load_hotpot_json(_write(tmp_path, [_record(answer="yes")]))
    assert ex.gold_type == "yes"


def test_load_preserves_document_order(tmp_path):
    (ex,) = data.load_hotpot_json(_write(tmp_path, [_record(n_docs=10)]))
    assert [d.title for d in ex.documents] == [f"Doc {i}" for i in range(10)]
    assert ex.gold_supporting == {(0, 0)}
    assert ex.question[:2] == ("which", "city")


def test_load_large_file_count(tmp_path):
    rec = _record()
    records = [dict(rec, _id=str(i)) for i in range(90400)]
    assert len(data.load_hotpot_json(_write(tmp_path, records))) == 90400


def test_unknown_supporting_title_names_record(tmp_path):
    path = _write(tmp_path, [_record(rid="abc123", facts=[["Nowhere", 0]])])
    with pytest.raises(IngestionError, match="abc123"):
        data.load_hotpot_json(path)


def test_malformed_json_reports_byte_offset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_bytes('[{"_id": "é", '.encode() + b"oops}]")
    with pytest.raises(ParseError, match=r"byte offset 15"):
        data.load_hotpot_json(path)


def test_embeddings_count(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("the 0.1 0.2\ncat 0.3 0.4\nsat 0.5 0.6\n")
    vocab = data.load_pretrained_embeddings(path, 2)
    assert len(vocab) == 5
    assert vocab.embeddings[vocab.pad_index].tolist() == [0.0, 0.0]
    assert vocab.embeddings[vocab.unk_index].tolist() == pytest.approx([0.3, 0.4])
    assert vocab.lookup("dog") == vocab.unk_index


def test_embeddings_dim_100_accepted_and_50_rejected(tmp_path):
    good = tmp_path / "g100.txt"
    good.write_text("".join(f"tok{i} " + " ".join(["0.5"] * 100) + "\n" for i in range(3)))
    assert data.load_pretrained_embeddings(good, 100).dim == 100
    bad = tmp_path / "g50.txt"
    bad.write_text("tok " + " ".join(["0.5"] * 50) + "\n")
    with pytest.raises(ParseError, match="line 1"):
        data.load_pretrained_embeddings(bad, 100)


def test_synthetic_deterministic():
    assert generate_synthetic(10, 30, seed=3) == generate_synthetic(10, 30, seed=3)
    assert generate_synthetic(10, 30, seed=3) != generate_synthetic(10, 30, seed=4)


def test_synthetic_shape():
    corpus = generate_synthetic(32, 40, seed=7)
    assert len(corpus) == 32
    assert all(len(ex.documents) == 4 for ex in corpus)
    assert sum(ex.gold_type != "span" for ex in corpus) == 10


def test_synthetic_answer_in_exactly_one_gold_sentence():
    # exhaustive scan over a generated corpus
    for ex in generate_synthetic(300, 20, seed=11):
        assert len(ex.gold_supporting) == 2
        if ex.gold_type != "span":
            continue
        hits = [
            (d, s) for d, s in ex.gold_supporting if ex.gold_answer in ex.documents[d].sentences[s]
        ]
        assert len(hits) == 1
        assert data.locate_answer(ex) is not None


def test_synthetic_rejects_small_vocab():
    with pytest.raises(ContractError):
        generate_synthetic(1, 19, seed=0)


def test_round_trip(tmp_path):
    corpus = generate_synthetic(12, 30, seed=1)
    path = tmp_path / "syn.json"
    data.save_hotpot_json(corpus, path)
    assert data.load_hotpot_json(path) == corpus


def test_split_90400_examples():
    items = list(range(90400))
    sizes = [len(p) for p in split(items, (0.90, 0.05, 0.05), seed=0)]
    assert sizes == [81360, 4520, 4520]


def test_split_small():
    assert [len(p) for p in split(list(range(20)), (0.9, 0.05, 0.05), seed=0)] == [18, 1, 1]


def test_split_rejects_zero_ratio_and_empty():
    with pytest.raises(ContractError):
        split(list(range(5)), (1.0, 0.0, 0.0))
    with pytest.raises(ContractError):
        split([], (0.8, 0.1, 0.1))
    with pytest.raises(ContractError):
        split(list(range(5)), (0.8, 0.1, 0.2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.integers(0, 1000))
def test_split_is_partition(n, seed):
    parts = split(list(range(n)), (0.8, 0.1, 0.1), seed=seed)
    flat = [x for p in parts for x in p]
    assert sorted(flat) == list(range(n))
    assert split(list(range(n)), (0.8, 0.1, 0.1), seed=seed) == parts


def test_example_rejects_out_of_range_supporting():
    doc = data.Document("t", (("a",),))
    with pytest.raises(ContractError):
        Example("x", ("q",), (doc,), "a", "span", frozenset({(0, 1)}))


def test_random_vocabulary_is_seeded():
    a = Vocabulary.random({"b", "a"}, 4, seed=1)
    b = Vocabulary.random({"a", "b"}, 4, seed=1)
    assert a.tokens == ["a", "b"]
    assert (a.embeddings == b.embeddings).all()
