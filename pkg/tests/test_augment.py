import json
import math
import random

import jsonschema
import pytest
import torch

from textmix.augment import (
    AugmentedExample,
    LabelPolicy,
    SoftLabel,
    augment_dataset,
    interpolate_labels,
    read_augmented_jsonl,
    sharpen,
    teacher_label,
    write_augmented_jsonl,
)
from textmix.classifier import ClassifierConfig, hard_examples_as_soft, train_classifier
from textmix.data import (
    LabeledExample,
    TextDataset,
    TokenSequence,
    UNK_ID,
    build_vocabulary,
    tokenize,
)
from textmix.decoding import DecodeConfig
from textmix.model import InterpolationModel, ModelConfig
from textmix.synthetic import make_polarity_examples
from textmix.training import TrainingConfig, train

torch.set_num_threads(1)


# ---------------------------------------------------------------------- #
# soft labels
# ---------------------------------------------------------------------- #


def test_soft_label_validation():
    SoftLabel((0.5, 0.5))
    with pytest.raises(ValueError):
        SoftLabel((1.0,))
    with pytest.raises(ValueError):
        SoftLabel((0.7, -0.1, 0.4))
    with pytest.raises(ValueError):
        SoftLabel((0.6, 0.6))


def test_soft_label_from_class():
    y = SoftLabel.from_class(2, 4)
    assert y.probs == (0.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        SoftLabel.from_class(4, 4)


def test_soft_label_argmax_tie_breaks_low():
    assert SoftLabel((0.5, 0.5)).argmax() == 0
    assert SoftLabel((0.2, 0.4, 0.4)).argmax() == 1


# ---------------------------------------------------------------------- #
# label interpolation
# ---------------------------------------------------------------------- #


def test_interpolate_labels_weights_first_by_alpha():
    ya = SoftLabel((1.0, 0.0))
    yb = SoftLabel((0.0, 1.0))
    out = interpolate_labels(ya, yb, 0.7)
    assert out.probs[0] == pytest.approx(0.7)
    assert out.probs[1] == pytest.approx(0.3)


def test_interpolate_labels_paper_literal_swaps_weights():
    ya = SoftLabel((1.0, 0.0))
    yb = SoftLabel((0.0, 1.0))
    out = interpolate_labels(ya, yb, 0.7, orientation="paper_literal")
    assert out.probs[0] == pytest.approx(0.3)
    assert out.probs[1] == pytest.approx(0.7)


def test_interpolate_labels_endpoints_exact():
    ya = SoftLabel((0.25, 0.75))
    yb = SoftLabel((0.6, 0.4))
    assert interpolate_labels(ya, yb, 1.0).probs == ya.probs
    assert interpolate_labels(ya, yb, 0.0).probs == yb.probs


def test_interpolate_labels_swap_identity_exact_on_dyadic_grid():
    rng = random.Random(0)
    grid = [k / 16 for k in range(17)]
    for _ in range(200):
        k = rng.randint(2, 6)
        raw_a = [rng.random() for _ in range(k)]
        raw_b = [rng.random() for _ in range(k)]
        ya = SoftLabel(tuple(v / sum(raw_a) for v in raw_a))
        yb = SoftLabel(tuple(v / sum(raw_b) for v in raw_b))
        alpha = rng.choice(grid)
        fwd = interpolate_labels(ya, yb, alpha)
        swp = interpolate_labels(yb, ya, 1.0 - alpha)
        assert fwd.probs == swp.probs


def test_interpolate_labels_stays_on_simplex():
    rng = random.Random(1)
    for _ in range(10_000):
        k = rng.randint(2, 8)
        raw_a = [rng.random() + 1e-9 for _ in range(k)]
        raw_b = [rng.random() + 1e-9 for _ in range(k)]
        ya = SoftLabel(tuple(v / sum(raw_a) for v in raw_a))
        yb = SoftLabel(tuple(v / sum(raw_b) for v in raw_b))
        out = interpolate_labels(ya, yb, rng.random())
        assert all(p >= 0 for p in out.probs)
        assert abs(sum(out.probs) - 1.0) <= 1e-6


def test_interpolate_labels_rejects_mismatched_classes():
    with pytest.raises(ValueError):
        interpolate_labels(SoftLabel((0.5, 0.5)), SoftLabel((0.3, 0.3, 0.4)),
                           0.5)


# ---------------------------------------------------------------------- #
# sharpening
# ---------------------------------------------------------------------- #


def test_sharpen_identity_at_temperature_one():
    y = SoftLabel((0.6, 0.3, 0.1))
    assert sharpen(y, 1.0) is y


def test_sharpen_frozen_value():
    # (0.6^2, 0.4^2) normalized = (0.36, 0.16) / 0.52
    out = sharpen(SoftLabel((0.6, 0.4)), 0.5)
    assert out.probs[0] == pytest.approx(0.6923076923076923, abs=1e-9)
    assert out.probs[1] == pytest.approx(0.3076923076923077, abs=1e-9)


def test_sharpen_low_temperature_approaches_hard_label():
    y = SoftLabel((0.3, 0.45, 0.25))
    out = sharpen(y, 0.01)
    assert out.probs[1] == pytest.approx(1.0, abs=1e-6)
    assert out.probs[0] == pytest.approx(0.0, abs=1e-6)


def test_sharpen_handles_underflow_gracefully():
    y = SoftLabel((1e-300, 1.0 - 1e-300))
    out = sharpen(y, 0.001)
    assert out.probs == (0.0, 1.0)


def test_sharpen_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        sharpen(SoftLabel((0.5, 0.5)), 0.0)


def test_sharpen_preserves_simplex():
    rng = random.Random(2)
    for _ in range(500):
        k = rng.randint(2, 6)
        raw = [rng.random() + 1e-6 for _ in range(k)]
        y = SoftLabel(tuple(v / sum(raw) for v in raw))
        out = sharpen(y, rng.uniform(0.05, 3.0))
        assert abs(sum(out.probs) - 1.0) <= 1e-9
        assert all(p >= 0 for p in out.probs)


def test_teacher_label_frozen_softmax():
    probs = torch.softmax(torch.tensor([2.0, 0.0]), dim=-1)
    label = teacher_label(probs)
    assert label.probs[0] == pytest.approx(0.8807970779778823, abs=1e-6)
    assert label.probs[1] == pytest.approx(0.11920292202211755, abs=1e-6)


def test_label_policy_validation():
    LabelPolicy()
    with pytest.raises(ValueError):
        LabelPolicy(kind="hard")
    with pytest.raises(ValueError):
        LabelPolicy(temperature=0.0)
    with pytest.raises(ValueError):
        LabelPolicy(orientation="reversed")


# ---------------------------------------------------------------------- #
# dataset generation
# ---------------------------------------------------------------------- #


@pytest.fixture(scope="module")
def small_world():
    torch.manual_seed(0)
    labeled = make_polarity_examples(60, seed=3)
    corpus = [text for text, _ in labeled]
    vocab = build_vocabulary(corpus, max_size=128)
    model = InterpolationModel(
        ModelConfig(vocab_size=len(vocab), dim=48, num_heads=2,
                    enc_layers=1, dec_layers=1)
    )
    seqs = [tokenize(t, vocab) for t in corpus]
    train(model, seqs, TrainingConfig(steps=120, batch_size=16, seed=1,
                                      log_every=120))
    examples = tuple(
        LabeledExample(tokenize(text, vocab), label) for text, label in labeled
    )
    data = TextDataset(examples, num_classes=2, task_kind="single")
    return model, vocab, data


AUGMENTED_SCHEMA = {
    "type": "object",
    "properties": {
        "text": {"type": "string"},
        "premise": {"type": "string"},
        "hypothesis": {"type": "string"},
        "soft_label": {
            "type": "array",
            "items": {"type": "number", "minimum": 0.0, "maximum": 1.0},
            "minItems": 2,
        },
        "alpha": {"type": "number", "minimum": 0.0, "maximum": 1.0},
        "source_a": {"type": "integer", "minimum": 0},
        "source_b": {"type": "integer", "minimum": 0},
    },
    "required": ["soft_label", "alpha", "source_a", "source_b"],
    "additionalProperties": False,
}


def test_augment_dataset_size_and_fields(small_world):
    model, vocab, data = small_world
    out = augment_dataset(data, model, LabelPolicy(), size=13, seed=5,
                          decode_config=DecodeConfig(strategy="greedy"))
    assert len(out) == 13
    for ex in out:
        assert isinstance(ex, AugmentedExample)
        assert 0.0 <= ex.alpha <= 1.0
        assert ex.source_a != ex.source_b
        assert 0 <= ex.source_a < len(data.examples)
        assert 0 <= ex.source_b < len(data.examples)
        assert abs(sum(ex.soft_label.probs) - 1.0) <= 1e-6


def test_augment_dataset_reproducible(small_world):
    model, vocab, data = small_world
    cfg = DecodeConfig(strategy="greedy")
    a = augment_dataset(data, model, LabelPolicy(), size=8, seed=9,
                        decode_config=cfg)
    b = augment_dataset(data, model, LabelPolicy(), size=8, seed=9,
                        decode_config=cfg)
    for ea, eb in zip(a, b):
        assert ea.text == eb.text
        assert ea.soft_label.probs == eb.soft_label.probs
        assert ea.alpha == eb.alpha


def test_augment_prefix_stability(small_world):
    """Example i depends only on (seed, i), not on how many are generated."""
    model, vocab, data = small_world
    cfg = DecodeConfig(strategy="greedy")
    short = augment_dataset(data, model, LabelPolicy(), size=4, seed=2,
                            decode_config=cfg)
    long = augment_dataset(data, model, LabelPolicy(), size=10, seed=2,
                           decode_config=cfg)
    for ea, eb in zip(short, long):
        assert ea.text == eb.text
        assert ea.alpha == eb.alpha


def test_augment_labels_follow_alpha(small_world):
    model, vocab, data = small_world
    out = augment_dataset(data, model, LabelPolicy(kind="interpolated"),
                          size=30, seed=7,
                          decode_config=DecodeConfig(strategy="greedy"))
    for ex in out:
        ya = SoftLabel.from_class(data.examples[ex.source_a].label, 2)
        yb = SoftLabel.from_class(data.examples[ex.source_b].label, 2)
        expected = interpolate_labels(ya, yb, ex.alpha)
        assert ex.soft_label.probs == pytest.approx(expected.probs, abs=1e-9)


def test_augment_sharpened_labels_are_sharper(small_world):
    model, vocab, data = small_world
    mixed = augment_dataset(data, model, LabelPolicy(kind="interpolated"),
                            size=20, seed=11,
                            decode_config=DecodeConfig(strategy="greedy"))
    sharp = augment_dataset(data, model,
                            LabelPolicy(kind="sharpened", temperature=0.5),
                            size=20, seed=11,
                            decode_config=DecodeConfig(strategy="greedy"))
    for m, s in zip(mixed, sharp):
        assert max(s.soft_label.probs) >= max(m.soft_label.probs) - 1e-12


def test_augment_teacher_policy_uses_classifier(small_world):
    model, vocab, data = small_world
    torch.manual_seed(0)
    teacher = train_classifier(
        ClassifierConfig(vocab_size=len(vocab), num_classes=2, epochs=5,
                         seed=0),
        hard_examples_as_soft(list(data.examples), 2),
    )
    out = augment_dataset(data, model, LabelPolicy(kind="teacher"), size=6,
                          seed=3, decode_config=DecodeConfig(strategy="greedy"),
                          teacher=teacher)
    for ex in out:
        direct = teacher.predict_proba(ex.text)
        assert ex.soft_label.probs == pytest.approx(
            tuple(float(p) for p in direct), abs=1e-6
        )


def test_augment_teacher_policy_requires_teacher(small_world):
    model, vocab, data = small_world
    with pytest.raises(ValueError):
        augment_dataset(data, model, LabelPolicy(kind="teacher"), size=2,
                        seed=0)


def test_augment_beta_alpha_distribution(small_world):
    model, vocab, data = small_world
    out = augment_dataset(data, model, LabelPolicy(), size=25, seed=13,
                          alpha_distribution="beta", beta_param=2.0,
                          decode_config=DecodeConfig(strategy="greedy"))
    alphas = [ex.alpha for ex in out]
    assert all(0.0 <= a <= 1.0 for a in alphas)
    assert len(set(alphas)) > 10


def test_augment_validates_arguments(small_world):
    model, vocab, data = small_world
    with pytest.raises(ValueError):
        augment_dataset(data, model, LabelPolicy(), size=0, seed=0)
    with pytest.raises(ValueError):
        augment_dataset(data, model, LabelPolicy(), size=2, seed=0,
                        alpha_distribution="gaussian")


# ---------------------------------------------------------------------- #
# JSONL round trip
# ---------------------------------------------------------------------- #


def test_jsonl_schema_and_byte_identical_reruns(small_world, tmp_path):
    model, vocab, data = small_world
    cfg = DecodeConfig(strategy="greedy")
    out = augment_dataset(data, model, LabelPolicy(), size=10, seed=21,
                          decode_config=cfg)
    p1 = tmp_path / "a.jsonl"
    p2 = tmp_path / "b.jsonl"
    write_augmented_jsonl(p1, out, vocab)
    out_again = augment_dataset(data, model, LabelPolicy(), size=10, seed=21,
                                decode_config=cfg)
    write_augmented_jsonl(p2, out_again, vocab)
    assert p1.read_bytes() == p2.read_bytes()

    for line in p1.read_text().splitlines():
        record = json.loads(line)
        jsonschema.validate(record, AUGMENTED_SCHEMA)
        assert "text" in record


def test_jsonl_round_trip_recovers_labels(small_world, tmp_path):
    model, vocab, data = small_world
    out = augment_dataset(data, model, LabelPolicy(), size=6, seed=2,
                          decode_config=DecodeConfig(strategy="greedy"))
    path = tmp_path / "aug.jsonl"
    write_augmented_jsonl(path, out, vocab)
    loaded = read_augmented_jsonl(path, vocab)
    assert len(loaded) == 6
    for (text, label), original in zip(loaded, out):
        assert label.probs == pytest.approx(original.soft_label.probs,
                                            abs=1e-9)


def test_jsonl_read_maps_empty_text_to_unk(tmp_path):
    vocab = build_vocabulary(["some words here"], max_size=64)
    path = tmp_path / "aug.jsonl"
    rows = [
        {"text": "", "soft_label": [0.5, 0.5], "alpha": 0.5,
         "source_a": 0, "source_b": 1},
        {"text": "some words", "soft_label": [1.0, 0.0], "alpha": 0.9,
         "source_a": 1, "source_b": 0},
    ]
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    loaded = read_augmented_jsonl(path, vocab)
    assert loaded[0][0] == TokenSequence((UNK_ID,))
    assert len(loaded[1][0]) == 2


def test_jsonl_read_rejects_bad_rows(tmp_path):
    vocab = build_vocabulary(["word"], max_size=64)
    path = tmp_path / "bad.jsonl"
    path.write_text("this is not json\n")
    with pytest.raises(ValueError, match="line 1"):
        read_augmented_jsonl(path, vocab)
    path.write_text('{"text": "word", "alpha": 0.5}\n')
    with pytest.raises(ValueError, match="line 1"):
        read_augmented_jsonl(path, vocab)


def test_pair_task_augmentation_shares_alpha(small_world, tmp_path):
    model, vocab, data = small_world
    pair_examples = tuple(
        LabeledExample((ex.text, data.examples[(i + 1) % len(data.examples)].text),
                       ex.label)
        for i, ex in enumerate(data.examples[:20])
    )
    pair_data = TextDataset(pair_examples, num_classes=2, task_kind="pair")
    out = augment_dataset(pair_data, model, LabelPolicy(), size=5, seed=1,
                          decode_config=DecodeConfig(strategy="greedy"))
    path = tmp_path / "pairs.jsonl"
    write_augmented_jsonl(path, out, vocab)
    for ex, line in zip(out, path.read_text().splitlines()):
        assert ex.is_pair
        record = json.loads(line)
        jsonschema.validate(record, AUGMENTED_SCHEMA)
        assert "premise" in record and "hypothesis" in record
        assert "text" not in record
    loaded = read_augmented_jsonl(path, vocab)
    assert all(isinstance(t, tuple) for t, _ in loaded)
