import json

import pytest

from textmix.data import (
    BOS_TOKEN,
    EOS_TOKEN,
    MASK_TOKEN,
    NUM_SPECIALS,
    PAD_ID,
    PAD_TOKEN,
    SPECIAL_TOKENS,
    UNK_ID,
    UNK_TOKEN,
    TokenSequence,
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_corpus,
    load_labeled_dataset,
    tokenize,
)


def test_special_tokens_fixed_order():
    assert SPECIAL_TOKENS == (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN,
                              MASK_TOKEN)
    assert NUM_SPECIALS == 5
    assert PAD_ID == 0


def test_token_sequence_rejects_negative_ids():
    with pytest.raises(ValueError):
        TokenSequence((5, -1))


def test_token_sequence_length():
    seq = TokenSequence((5, 6, 7))
    assert len(seq) == 3
    assert seq.length == 3


def test_vocabulary_ids_are_stable_and_bijective():
    vocab = Vocabulary(["cat", "dog"])
    assert len(vocab) == 7
    assert vocab.id_of("cat") == 5
    assert vocab.id_of("dog") == 6
    for i in range(len(vocab)):
        assert vocab.id_of(vocab.token_of(i)) == i


def test_vocabulary_unknown_token_maps_to_unk():
    vocab = Vocabulary(["cat"])
    assert vocab.id_of("zebra") == UNK_ID


def test_vocabulary_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(["cat", "cat"])
    with pytest.raises(ValueError):
        Vocabulary([PAD_TOKEN])


def test_build_vocabulary_frequency_order():
    corpus = ["b b b a a c", "a b"]
    vocab = build_vocabulary(corpus, max_size=16)
    # b occurs 4 times, a 3, c 1
    assert vocab.token_of(5) == "b"
    assert vocab.token_of(6) == "a"
    assert vocab.token_of(7) == "c"


def test_build_vocabulary_truncates_to_max_size():
    corpus = [" ".join(f"w{i}" for i in range(100))]
    vocab = build_vocabulary(corpus, max_size=20)
    assert len(vocab) == 20


def test_build_vocabulary_rejects_tiny_max_size():
    with pytest.raises(ValueError):
        build_vocabulary(["a b"], max_size=15)


def test_build_vocabulary_rejects_empty_corpus():
    with pytest.raises(ValueError):
        build_vocabulary(["   ", ""], max_size=100)


def test_vocab_round_trip_through_file(tmp_path):
    vocab = build_vocabulary(["the cat sat on the mat"], max_size=64)
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert len(loaded) == len(vocab)
    assert loaded.sha256() == vocab.sha256()
    assert loaded.token_of(5) == vocab.token_of(5)


def test_vocab_load_rejects_bad_header(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("foo\nbar\nbaz\nqux\nquux\nword\n")
    with pytest.raises(ValueError):
        Vocabulary.load(path)


def test_vocab_load_rejects_truncated_file(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text(f"{PAD_TOKEN}\n{BOS_TOKEN}\n")
    with pytest.raises(ValueError):
        Vocabulary.load(path)


def test_tokenize_maps_oov_to_unk():
    vocab = Vocabulary(["cat", "sat"])
    seq = tokenize("cat zebra sat", vocab)
    assert seq.ids == (vocab.id_of("cat"), UNK_ID, vocab.id_of("sat"))


def test_tokenize_truncates():
    vocab = Vocabulary(["a"])
    seq = tokenize(" ".join(["a"] * 100), vocab, max_len=8)
    assert len(seq) == 8


def test_tokenize_rejects_empty():
    vocab = Vocabulary(["a"])
    with pytest.raises(ValueError):
        tokenize("   ", vocab)


def test_detokenize_skips_specials():
    vocab = Vocabulary(["cat", "sat"])
    seq = TokenSequence((1, 5, 3, 6, 2))  # bos cat unk sat eos
    assert detokenize(seq, vocab) == "cat sat"


def test_tokenize_detokenize_round_trip():
    text = "the cat sat on the mat"
    vocab = build_vocabulary([text], max_size=64)
    assert detokenize(tokenize(text, vocab), vocab) == text


def test_load_corpus_skips_blank_lines(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("one two\n\n  \nthree four\n")
    assert load_corpus(path) == ["one two", "three four"]


def _write_tsv(path, rows):
    path.write_text("".join(f"{text}\t{label}\n" for text, label in rows))


def test_load_tsv_dataset(tmp_path):
    path = tmp_path / "data.tsv"
    _write_tsv(path, [("good film", 1), ("bad film", 0)])
    vocab = build_vocabulary(["good bad film"], max_size=64)
    data = load_labeled_dataset(path, "tsv", "single", vocab)
    assert data.num_classes == 2
    assert data.task_kind == "single"
    assert len(data.examples) == 2
    assert data.examples[0].label == 1


def test_load_tsv_reports_line_numbers(tmp_path):
    path = tmp_path / "data.tsv"
    path.write_text("good film\t1\nno label here\n")
    vocab = build_vocabulary(["good film"], max_size=64)
    with pytest.raises(ValueError, match="line 2"):
        load_labeled_dataset(path, "tsv", "single", vocab)


def test_load_tsv_rejects_bad_label(tmp_path):
    path = tmp_path / "data.tsv"
    path.write_text("good film\tpositive\n")
    vocab = build_vocabulary(["good film"], max_size=64)
    with pytest.raises(ValueError, match="line 1"):
        load_labeled_dataset(path, "tsv", "single", vocab)


def test_load_jsonl_pair_dataset(tmp_path):
    path = tmp_path / "data.jsonl"
    rows = [
        {"premise": "a cat", "hypothesis": "an animal", "label": 0},
        {"premise": "a dog", "hypothesis": "a plant", "label": 2},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    vocab = build_vocabulary(["a cat dog animal plant an"], max_size=64)
    data = load_labeled_dataset(path, "jsonl", "pair", vocab)
    assert data.task_kind == "pair"
    assert data.num_classes == 3
    assert data.examples[0].is_pair


def test_load_jsonl_rejects_malformed_json(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"text": "ok", "label": 0}\nnot json\n')
    vocab = build_vocabulary(["ok"], max_size=64)
    with pytest.raises(ValueError, match="line 2"):
        load_labeled_dataset(path, "jsonl", "single", vocab)


def test_load_rejects_label_out_of_declared_range(tmp_path):
    path = tmp_path / "data.tsv"
    _write_tsv(path, [("good", 5)])
    vocab = build_vocabulary(["good"], max_size=64)
    with pytest.raises(ValueError, match="line 1"):
        load_labeled_dataset(path, "tsv", "single", vocab, num_classes=2)


def test_pair_task_rejects_tsv(tmp_path):
    path = tmp_path / "data.tsv"
    _write_tsv(path, [("good", 1)])
    vocab = build_vocabulary(["good"], max_size=64)
    with pytest.raises(ValueError):
        load_labeled_dataset(path, "tsv", "pair", vocab)
