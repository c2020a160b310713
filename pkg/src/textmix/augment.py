"""Turn a labeled dataset into interpolated synthetic examples.

Each original example is paired with a random partner, mixed at a random
ratio, decoded to text, and given a soft label by one of three policies:
mix the one-hot labels, sharpen that mix toward the dominant class, or ask
a teacher classifier trained on the clean data.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass

import torch

from .data import (
    UNK_ID,
    LabeledExample,
    TextDataset,
    TokenSequence,
)
from .decoding import DecodeConfig, interpolate_text
from .model import InterpolationModel, check_alpha

logger = logging.getLogger(__name__)

_SUM_TOL = 1e-6

LABEL_POLICY_KINDS = ("interpolated", "sharpened", "teacher")
ORIENTATIONS = ("text_aligned", "paper_literal")


@dataclass(frozen=True)
class SoftLabel:
    """A point on the probability simplex."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) < 2:
            raise ValueError("a soft label needs at least two classes")
        if any(p < 0 for p in self.probs):
            raise ValueError(f"negative probability in {self.probs}")
        total = sum(self.probs)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_class(cls, label: int, num_classes: int) -> "SoftLabel":
        if not 0 <= label < num_classes:
            raise ValueError(f"label {label} out of range for {num_classes} classes")
        return cls(tuple(1.0 if i == label else 0.0 for i in range(num_classes)))

    @property
    def num_classes(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        return max(range(len(self.probs)), key=lambda i: (self.probs[i], -i))


def interpolate_labels(
    ya: SoftLabel,
    yb: SoftLabel,
    alpha: float,
    orientation: str = "text_aligned",
) -> SoftLabel:
    """Convex mix of two soft labels.

    "text_aligned" weights the first label by alpha, matching how alpha
    weights the first sentence in the latent mix, so text and label move
    together. "paper_literal" swaps the weights.
    """
    alpha = check_alpha(alpha)
    if orientation not in ORIENTATIONS:
        raise ValueError(f"orientation must be one of {ORIENTATIONS}, "
                         f"got {orientation!r}")
    if ya.num_classes != yb.num_classes:
        raise ValueError(
            f"class count mismatch: {ya.num_classes} vs {yb.num_classes}"
        )
    w = alpha if orientation == "text_aligned" else 1.0 - alpha
    return SoftLabel(
        tuple(w * a + (1.0 - w) * b for a, b in zip(ya.probs, yb.probs))
    )


def sharpen(y: SoftLabel, temperature: float) -> SoftLabel:
    """Power sharpening: p_i^(1/T) renormalized. T=1 is the identity; as T
    approaches 0 the label hardens toward its argmax."""
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    if temperature == 1.0:
        return y
    powered = [p ** (1.0 / temperature) for p in y.probs]
    total = sum(powered)
    if total <= 0 or not all(map(math.isfinite, powered)):
        # numerically degenerate (e.g. extreme 1/T): fall back to hard argmax
        return SoftLabel.from_class(y.argmax(), y.num_classes)
    return SoftLabel(tuple(p / total for p in powered))


def teacher_label(probs: torch.Tensor) -> SoftLabel:
    """Wrap a classifier's predictive distribution as a soft label."""
    values = [float(p) for p in probs]
    total = sum(values)
    if total <= 0:
        raise ValueError("teacher produced a non-normalizable distribution")
    return SoftLabel(tuple(v / total for v in values))


@dataclass(frozen=True)
class LabelPolicy:
    kind: str = "interpolated"
    temperature: float = 0.5  # used by "sharpened"
    orientation: str = "text_aligned"

    def __post_init__(self):
        if self.kind not in LABEL_POLICY_KINDS:
            raise ValueError(
                f"label policy must be one of {LABEL_POLICY_KINDS}, "
                f"got {self.kind!r}"
            )
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, "
                             f"got {self.orientation!r}")


@dataclass(frozen=True)
class AugmentedExample:
    """One generated example: token ids, the soft label, and provenance."""

    text: TokenSequence | tuple[TokenSequence, TokenSequence]
    soft_label: SoftLabel
    alpha: float
    source_a: int
    source_b: int

    @property
    def is_pair(self) -> bool:
        return isinstance(self.text, tuple)


def _example_rng(seed: int, index: int) -> torch.Generator:
    """Independent per-example stream so output i never depends on how many
    examples came before it."""
    digest = hashlib.sha256(f"{seed}/{index}".encode()).digest()
    g = torch.Generator()
    g.manual_seed(int.from_bytes(digest[:8], "big"))
    return g


def _decode_side(
    model: InterpolationModel,
    xa: TokenSequence,
    xb: TokenSequence,
    alpha: float,
    decode_config: DecodeConfig,
    generator: torch.Generator,
) -> TokenSequence:
    result = interpolate_text(model, xa, xb, alpha, decode_config, generator)
    return result.tokens


def augment_dataset(
    data: TextDataset,
    model: InterpolationModel,
    policy: LabelPolicy,
    size: int,
    decode_config: DecodeConfig | None = None,
    alpha_distribution: str = "uniform",
    beta_param: float = 2.0,
    seed: int = 0,
    teacher=None,
) -> list[AugmentedExample]:
    """Generate `size` interpolated examples from a labeled dataset.

    Example i pairs original i (mod n) with a partner drawn from its own
    seeded stream, making reruns byte-for-byte reproducible and independent
    of generation order. Pair tasks mix premise and hypothesis separately
    under one shared alpha. Degenerate outputs (empty text, or an exact copy
    of a source) are kept but counted in the log.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if policy.kind == "teacher" and teacher is None:
        raise ValueError("teacher policy requires a teacher classifier")
    if alpha_distribution not in ("uniform", "beta"):
        raise ValueError(
            f"alpha_distribution must be 'uniform' or 'beta', "
            f"got {alpha_distribution!r}"
        )
    n = len(data.examples)
    if n < 2:
        raise ValueError("augmentation needs at least two source examples")

    out: list[AugmentedExample] = []
    empty_count = 0
    copy_count = 0
    for i in range(size):
        g = _example_rng(seed, i)
        ia = i % n
        ib = int(torch.randint(0, n - 1, (1,), generator=g))
        if ib >= ia:
            ib += 1  # partner is always a different original
        if alpha_distribution == "uniform":
            alpha = float(torch.rand(1, generator=g))
        else:
            alpha = _beta_sample(beta_param, g)
        ex_a, ex_b = data.examples[ia], data.examples[ib]

        if data.task_kind == "pair":
            prem = _decode_side(model, ex_a.text[0], ex_b.text[0], alpha,
                                decode_config or DecodeConfig(), g)
            hyp = _decode_side(model, ex_a.text[1], ex_b.text[1], alpha,
                               decode_config or DecodeConfig(), g)
            text: TokenSequence | tuple = (prem, hyp)
            degenerate_empty = len(prem) == 0 or len(hyp) == 0
            degenerate_copy = (prem, hyp) == ex_a.text or (prem, hyp) == ex_b.text
        else:
            tokens = _decode_side(model, ex_a.text, ex_b.text, alpha,
                                  decode_config or DecodeConfig(), g)
            text = tokens
            degenerate_empty = len(tokens) == 0
            degenerate_copy = tokens in (ex_a.text, ex_b.text)
        if degenerate_empty:
            empty_count += 1
        elif degenerate_copy:
            copy_count += 1

        ya = SoftLabel.from_class(ex_a.label, data.num_classes)
        yb = SoftLabel.from_class(ex_b.label, data.num_classes)
        if policy.kind == "teacher":
            probs = teacher.predict_proba(text)
            label = teacher_label(probs)
        else:
            label = interpolate_labels(ya, yb, alpha, policy.orientation)
            if policy.kind == "sharpened":
                label = sharpen(label, policy.temperature)
        out.append(
            AugmentedExample(
                text=text, soft_label=label, alpha=alpha,
                source_a=ia, source_b=ib,
            )
        )
    if empty_count or copy_count:
        logger.info(
            "augmentation produced %d empty and %d verbatim-copy outputs "
            "out of %d", empty_count, copy_count, size,
        )
    return out


def _beta_sample(b: float, generator: torch.Generator) -> float:
    """Beta(b, b) draw from an explicit generator via the two-gamma ratio,
    with gammas sampled by Marsaglia-Tsang squeeze using the generator."""
    x = _gamma_sample(b, generator)
    y = _gamma_sample(b, generator)
    return x / (x + y)


def _gamma_sample(shape: float, generator: torch.Generator) -> float:
    if shape < 1.0:
        # boost to shape+1 then apply the standard power correction
        u = float(torch.rand(1, generator=generator))
        return _gamma_sample(shape + 1.0, generator) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / (9.0 * d) ** 0.5
    while True:
        x = float(torch.randn(1, generator=generator))
        v = (1.0 + c * x) ** 3
        if v <= 0:
            continue
        u = float(torch.rand(1, generator=generator))
        if u < 1.0 - 0.0331 * x**4:
            return d * v
        if math.log(u) < 0.5 * x**2 + d * (1.0 - v + math.log(v)):
            return d * v


# ---------------------------------------------------------------------- #
# JSONL round trip
# ---------------------------------------------------------------------- #


def write_augmented_jsonl(path, examples: list[AugmentedExample], vocab) -> None:
    """One JSON object per line; keys are sorted so identical runs produce
    identical bytes."""
    from .data import detokenize

    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            record: dict = {
                "soft_label": list(ex.soft_label.probs),
                "alpha": ex.alpha,
                "source_a": ex.source_a,
                "source_b": ex.source_b,
            }
            if ex.is_pair:
                record["premise"] = detokenize(ex.text[0], vocab)
                record["hypothesis"] = detokenize(ex.text[1], vocab)
            else:
                record["text"] = detokenize(ex.text, vocab)
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_augmented_jsonl(path, vocab, max_len: int = 64):
    """Load generated examples back as token sequences with soft labels.
    Empty text fields become a single unknown-token placeholder; the count
    of such rows is logged."""
    from .data import tokenize

    def _tok(text: str) -> TokenSequence:
        if not text.strip():
            return TokenSequence((UNK_ID,))
        return tokenize(text, vocab, max_len=max_len)

    items: list[tuple] = []
    empty = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                label = SoftLabel(tuple(float(p) for p in rec["soft_label"]))
                if "text" in rec:
                    if not rec["text"].strip():
                        empty += 1
                    text = _tok(rec["text"])
                else:
                    if not rec["premise"].strip() or not rec["hypothesis"].strip():
                        empty += 1
                    text = (_tok(rec["premise"]), _tok(rec["hypothesis"]))
            except KeyError as exc:
                raise ValueError(f"line {lineno}: missing field {exc}") from exc
            items.append((text, label))
    if empty:
        logger.info("%d empty generated texts mapped to the unknown token", empty)
    return items


def as_labeled_examples(
    items: list[tuple], num_classes: int
) -> list[tuple[LabeledExample, SoftLabel]]:
    """Pair each loaded item with a hard argmax label for APIs that need one."""
    out = []
    for text, soft in items:
        if soft.num_classes != num_classes:
            raise ValueError(
                f"soft label has {soft.num_classes} classes, expected {num_classes}"
            )
        out.append((LabeledExample(text=text, label=soft.argmax()), soft))
    return out
