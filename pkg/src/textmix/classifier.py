"""Small transformer classifier used as augmentation teacher and as the
downstream model in the bundled experiments. Trains on soft labels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .data import PAD_ID, LabeledExample, TokenSequence
from .augment import SoftLabel


@dataclass
class ClassifierConfig:
    vocab_size: int
    num_classes: int
    dim: int = 64
    num_heads: int = 2
    layers: int = 1
    max_len: int = 128
    epochs: int = 30
    batch_size: int = 8
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def _flatten(text) -> TokenSequence:
    """Pair inputs are handled by concatenating the two sides."""
    if isinstance(text, tuple):
        return TokenSequence(text[0].ids + text[1].ids)
    return text


class TextClassifier(nn.Module):
    """Embedding, learned positions, transformer encoder, masked mean
    pooling, linear head."""

    def __init__(self, config: ClassifierConfig, vocab_sha256: str | None = None):
        super().__init__()
        self.config = config
        self.vocab_sha256 = vocab_sha256
        d = config.dim
        self.token_embedding = nn.Embedding(config.vocab_size, d, padding_idx=PAD_ID)
        self.positions = nn.Embedding(config.max_len, d)
        layer = nn.TransformerEncoderLayer(
            d_model=d, nhead=config.num_heads, dim_feedforward=4 * d,
            dropout=0.0, batch_first=True, norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, config.layers,
                                             enable_nested_tensor=False)
        self.head = nn.Linear(d, config.num_classes)

    def forward(self, ids: Tensor, lengths: Tensor) -> Tensor:
        """(B, L) padded ids -> (B, num_classes) logits."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.positions(positions)
        pad = positions.unsqueeze(0) >= lengths.unsqueeze(1)
        h = self.encoder(x, src_key_padding_mask=pad)
        keep = (~pad).unsqueeze(-1).to(h.dtype)
        pooled = (h * keep).sum(1) / lengths.unsqueeze(1).to(h.dtype)
        return self.head(pooled)

    def predict_proba(self, text) -> Tensor:
        """Predictive distribution for one example (token ids or a pair)."""
        seq = _flatten(text)
        if len(seq) == 0:
            raise ValueError("cannot classify an empty sequence")
        ids = torch.tensor([seq.ids[: self.config.max_len]], dtype=torch.long)
        lengths = torch.tensor([ids.shape[1]], dtype=torch.long)
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                return torch.softmax(self.forward(ids, lengths)[0], dim=-1)
        finally:
            if was_training:
                self.train()

    def predict(self, text) -> int:
        probs = self.predict_proba(text)
        # ties resolve to the lowest class index
        return int(torch.argmax(probs))


def _pad_flat(texts: list, max_len: int) -> tuple[Tensor, Tensor]:
    seqs = [_flatten(t) for t in texts]
    if any(len(s) == 0 for s in seqs):
        raise ValueError("cannot classify an empty sequence")
    lens = [min(len(s), max_len) for s in seqs]
    ids = torch.full((len(seqs), max(lens)), PAD_ID, dtype=torch.long)
    for i, s in enumerate(seqs):
        ids[i, : lens[i]] = torch.tensor(s.ids[: lens[i]], dtype=torch.long)
    return ids, torch.tensor(lens, dtype=torch.long)


def soft_cross_entropy(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean over the batch of -sum_c target_c * log softmax(logits)_c."""
    return -(targets * F.log_softmax(logits, dim=-1)).sum(-1).mean()


def train_classifier(
    config: ClassifierConfig,
    examples: list[tuple],
    vocab_sha256: str | None = None,
) -> TextClassifier:
    """Train on (text, SoftLabel) pairs. Hard-labeled data should be wrapped
    with SoftLabel.from_class first."""
    if not examples:
        raise ValueError("training needs at least one example")
    for _, label in examples:
        if label.num_classes != config.num_classes:
            raise ValueError(
                f"label has {label.num_classes} classes, model expects "
                f"{config.num_classes}"
            )
    torch.manual_seed(config.seed)
    model = TextClassifier(config, vocab_sha256)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    generator = torch.Generator()
    generator.manual_seed(config.seed)
    model.train()
    n = len(examples)
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=generator).tolist()
        for start in range(0, n, config.batch_size):
            batch = [examples[i] for i in order[start : start + config.batch_size]]
            ids, lens = _pad_flat([t for t, _ in batch], config.max_len)
            targets = torch.tensor([list(l.probs) for _, l in batch])
            optimizer.zero_grad()
            loss = soft_cross_entropy(model(ids, lens), targets)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise RuntimeError(
                    f"non-finite classifier loss {value} in epoch {epoch + 1}"
                )
            loss.backward()
            optimizer.step()
    model.eval()
    return model


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    num_examples: int
    per_class_correct: tuple[int, ...]
    per_class_total: tuple[int, ...]


def evaluate_classifier(
    model: TextClassifier, examples: list[LabeledExample]
) -> EvalReport:
    if not examples:
        raise ValueError("evaluation needs at least one example")
    k = model.config.num_classes
    correct = [0] * k
    total = [0] * k
    for ex in examples:
        if not 0 <= ex.label < k:
            raise ValueError(f"label {ex.label} out of range for {k} classes")
        pred = model.predict(ex.text)
        total[ex.label] += 1
        if pred == ex.label:
            correct[ex.label] += 1
    return EvalReport(
        accuracy=sum(correct) / len(examples),
        num_examples=len(examples),
        per_class_correct=tuple(correct),
        per_class_total=tuple(total),
    )


def hard_examples_as_soft(
    examples: list[LabeledExample], num_classes: int
) -> list[tuple]:
    return [
        (ex.text, SoftLabel.from_class(ex.label, num_classes)) for ex in examples
    ]
