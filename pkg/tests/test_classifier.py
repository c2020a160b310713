import math

import pytest
import torch
import torch.nn.functional as F

from textmix.augment import SoftLabel
from textmix.classifier import (
    ClassifierConfig,
    EvalReport,
    TextClassifier,
    evaluate_classifier,
    hard_examples_as_soft,
    soft_cross_entropy,
    train_classifier,
)
from textmix.data import LabeledExample, TokenSequence, build_vocabulary, tokenize
from textmix.synthetic import make_polarity_examples

torch.set_num_threads(1)


def test_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(vocab_size=10, num_classes=1)
    with pytest.raises(ValueError):
        ClassifierConfig(vocab_size=10, num_classes=2, epochs=0)
    with pytest.raises(ValueError):
        ClassifierConfig(vocab_size=10, num_classes=2, learning_rate=0)


def test_soft_cross_entropy_matches_manual():
    logits = torch.tensor([[2.0, 0.0, -1.0], [0.5, 0.5, 0.5]])
    targets = torch.tensor([[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]])
    got = float(soft_cross_entropy(logits, targets))
    logp = F.log_softmax(logits, dim=-1)
    want = float((-(targets * logp).sum(-1)).mean())
    assert got == pytest.approx(want, rel=1e-6)


def test_soft_cross_entropy_hard_label_reduces_to_nll():
    logits = torch.tensor([[1.0, 2.0, 3.0]])
    target = torch.tensor([[0.0, 1.0, 0.0]])
    got = float(soft_cross_entropy(logits, target))
    want = float(F.cross_entropy(logits, torch.tensor([1])))
    assert got == pytest.approx(want, rel=1e-6)


def _world(n=40, seed=0):
    labeled = make_polarity_examples(n, seed=seed)
    vocab = build_vocabulary([t for t, _ in labeled], max_size=128)
    examples = [
        LabeledExample(tokenize(t, vocab), label) for t, label in labeled
    ]
    return vocab, examples


def test_classifier_learns_separable_task():
    vocab, examples = _world(60)
    cfg = ClassifierConfig(vocab_size=len(vocab), num_classes=2, epochs=20,
                           seed=0)
    model = train_classifier(cfg, hard_examples_as_soft(examples, 2))
    report = evaluate_classifier(model, examples)
    assert report.accuracy >= 0.95
    assert report.num_examples == 60
    assert sum(report.per_class_total) == 60


def test_classifier_training_reproducible():
    vocab, examples = _world(20)

    def run():
        cfg = ClassifierConfig(vocab_size=len(vocab), num_classes=2,
                               epochs=3, seed=4)
        model = train_classifier(cfg, hard_examples_as_soft(examples, 2))
        return evaluate_classifier(model, examples).accuracy

    assert run() == run()


def test_classifier_trains_on_soft_labels():
    vocab, examples = _world(30)
    soft = [
        (ex.text, SoftLabel((0.9, 0.1)) if ex.label == 0 else
         SoftLabel((0.1, 0.9)))
        for ex in examples
    ]
    cfg = ClassifierConfig(vocab_size=len(vocab), num_classes=2, epochs=20,
                           seed=1)
    model = train_classifier(cfg, soft)
    report = evaluate_classifier(model, examples)
    assert report.accuracy >= 0.9


def test_classifier_rejects_mismatched_label_width():
    vocab, examples = _world(4)
    cfg = ClassifierConfig(vocab_size=len(vocab), num_classes=3, epochs=1)
    with pytest.raises(ValueError):
        train_classifier(cfg, hard_examples_as_soft(examples, 2))


def test_classifier_rejects_empty_inputs():
    cfg = ClassifierConfig(vocab_size=10, num_classes=2, epochs=1)
    with pytest.raises(ValueError):
        train_classifier(cfg, [])
    torch.manual_seed(0)
    model = TextClassifier(cfg)
    with pytest.raises(ValueError):
        model.predict_proba(TokenSequence(()))
    with pytest.raises(ValueError):
        evaluate_classifier(model, [])


def test_predict_pair_input_concatenates():
    torch.manual_seed(2)
    cfg = ClassifierConfig(vocab_size=20, num_classes=2)
    model = TextClassifier(cfg)
    pair = (TokenSequence((5, 6)), TokenSequence((7, 8)))
    flat = TokenSequence((5, 6, 7, 8))
    got = model.predict_proba(pair)
    want = model.predict_proba(flat)
    assert torch.allclose(got, want, atol=1e-6)


def test_predict_proba_is_distribution():
    torch.manual_seed(3)
    cfg = ClassifierConfig(vocab_size=20, num_classes=4)
    model = TextClassifier(cfg)
    probs = model.predict_proba(TokenSequence((5, 6, 7)))
    assert probs.shape == (4,)
    assert float(probs.sum()) == pytest.approx(1.0, abs=1e-6)
    assert bool((probs >= 0).all())


def test_evaluate_reports_per_class_counts():
    torch.manual_seed(4)
    cfg = ClassifierConfig(vocab_size=20, num_classes=2)
    model = TextClassifier(cfg)
    examples = [
        LabeledExample(TokenSequence((5, 6)), 0),
        LabeledExample(TokenSequence((7,)), 1),
        LabeledExample(TokenSequence((8, 9)), 1),
    ]
    report = evaluate_classifier(model, examples)
    assert isinstance(report, EvalReport)
    assert report.per_class_total == (1, 2)
    assert 0.0 <= report.accuracy <= 1.0
    assert math.isfinite(report.accuracy)
    with pytest.raises(ValueError):
        evaluate_classifier(model, [LabeledExample(TokenSequence((5,)), 3)])
