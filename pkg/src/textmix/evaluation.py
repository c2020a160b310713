"""Measure interpolation quality and downstream usefulness.

Unigram precision against each source tracks how the generated text moves
between the two endpoints as the mixing ratio changes; rank correlation
turns a sweep into a monotonicity score; the experiment suite compares a
classifier trained with and without generated data in the few-shot regime.
"""
from __future__ import annotations

import csv
import math
import random
from collections import Counter
from dataclasses import dataclass

from .augment import LabelPolicy, augment_dataset
from .classifier import (
    ClassifierConfig,
    evaluate_classifier,
    hard_examples_as_soft,
    train_classifier,
)
from .data import SPECIAL_IDS, UNK_ID, LabeledExample, TextDataset, TokenSequence
from .decoding import DecodeConfig, interpolate_text
from .model import InterpolationModel

SWEEP_COLUMNS = ["alpha", "mean_prec_a", "std_a", "mean_prec_b", "std_b", "n_pairs"]
EXPERIMENT_COLUMNS = ["method", "policy", "shots", "seed", "accuracy"]
SUMMARY_COLUMNS = ["method", "policy", "shots", "mean_accuracy", "std_accuracy",
                   "n_seeds"]


def unigram_precision(hyp: TokenSequence, ref: TokenSequence) -> float:
    """Clipped-count unigram precision of `hyp` against `ref`; special tokens
    are excluded from both sides."""
    hyp_tokens = [t for t in hyp.ids if t not in SPECIAL_IDS]
    if not hyp_tokens:
        raise ValueError("hypothesis has no content tokens")
    ref_counts = Counter(t for t in ref.ids if t not in SPECIAL_IDS)
    hyp_counts = Counter(hyp_tokens)
    matched = sum(min(c, ref_counts[t]) for t, c in hyp_counts.items())
    return matched / len(hyp_tokens)


@dataclass(frozen=True)
class PrecisionCurve:
    """Mean and spread of precision against both sources over a grid of
    mixing ratios, plus how many generations came back empty."""

    alphas: tuple[float, ...]
    mean_prec_a: tuple[float, ...]
    std_a: tuple[float, ...]
    mean_prec_b: tuple[float, ...]
    std_b: tuple[float, ...]
    n_pairs: int
    empty_outputs: int = 0


def _mean_std(values: list[float]) -> tuple[float, float]:
    m = sum(values) / len(values)
    var = sum((v - m) ** 2 for v in values) / len(values)
    return m, math.sqrt(var)


def alpha_sweep(
    model: InterpolationModel,
    pairs: list[tuple[TokenSequence, TokenSequence]],
    alphas: list[float],
    decode_config: DecodeConfig | None = None,
) -> PrecisionCurve:
    """Decode every pair at every ratio and score precision against both
    sources. Empty generations count as precision zero on both sides so the
    pair count stays constant across the grid."""
    if not pairs:
        raise ValueError("sweep needs at least one pair")
    if not alphas:
        raise ValueError("sweep needs at least one mixing ratio")
    decode_config = decode_config or DecodeConfig()
    mean_a, std_a, mean_b, std_b = [], [], [], []
    empty = 0
    for alpha in alphas:
        prec_a, prec_b = [], []
        for xa, xb in pairs:
            result = interpolate_text(model, xa, xb, alpha, decode_config)
            if len(result.tokens) == 0:
                empty += 1
                prec_a.append(0.0)
                prec_b.append(0.0)
                continue
            prec_a.append(unigram_precision(result.tokens, xa))
            prec_b.append(unigram_precision(result.tokens, xb))
        ma, sa = _mean_std(prec_a)
        mb, sb = _mean_std(prec_b)
        mean_a.append(ma)
        std_a.append(sa)
        mean_b.append(mb)
        std_b.append(sb)
    return PrecisionCurve(
        alphas=tuple(alphas),
        mean_prec_a=tuple(mean_a),
        std_a=tuple(std_a),
        mean_prec_b=tuple(mean_b),
        std_b=tuple(std_b),
        n_pairs=len(pairs),
        empty_outputs=empty,
    )


def write_sweep_csv(path, curve: PrecisionCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for i, alpha in enumerate(curve.alphas):
            writer.writerow([
                alpha, curve.mean_prec_a[i], curve.std_a[i],
                curve.mean_prec_b[i], curve.std_b[i], curve.n_pairs,
            ])


def plot_sweep(path, curve: PrecisionCurve) -> None:
    """Precision-vs-ratio figure with one line per source."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(curve.alphas, curve.mean_prec_a, yerr=curve.std_a,
                marker="o", capsize=3, label="vs first source")
    ax.errorbar(curve.alphas, curve.mean_prec_b, yerr=curve.std_b,
                marker="s", capsize=3, label="vs second source")
    ax.set_xlabel("mixing ratio")
    ax.set_ylabel("unigram precision")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------- #
# rank correlation
# ---------------------------------------------------------------------- #


def _average_ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1  # 1-based average rank for the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman_rho(x: list[float], y: list[float]) -> float:
    """Rank correlation with average ranks for ties. A constant series has
    no ordering, so the correlation is reported as 0."""
    if len(x) != len(y):
        raise ValueError("series must have equal length")
    if len(x) < 2:
        raise ValueError("need at least two points")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / math.sqrt(vx * vy)


@dataclass(frozen=True)
class MonotonicityReport:
    rho_a: float  # precision vs first source should rise with the ratio
    rho_b: float  # precision vs second source should fall
    constant_a: bool
    constant_b: bool


def monotonicity_score(curve: PrecisionCurve) -> MonotonicityReport:
    alphas = list(curve.alphas)
    pa = list(curve.mean_prec_a)
    pb = list(curve.mean_prec_b)
    return MonotonicityReport(
        rho_a=spearman_rho(alphas, pa),
        rho_b=spearman_rho(alphas, pb),
        constant_a=len(set(pa)) == 1,
        constant_b=len(set(pb)) == 1,
    )


# ---------------------------------------------------------------------- #
# few-shot experiment suite
# ---------------------------------------------------------------------- #


@dataclass(frozen=True)
class ExperimentRow:
    method: str  # "vanilla" or "augmented"
    policy: str
    shots: int
    seed: int
    accuracy: float


def kshot_subset(
    data: TextDataset, shots: int, seed: int
) -> list[LabeledExample]:
    """Class-balanced sample of `shots` examples per class."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = random.Random(seed)
    by_class: dict[int, list[LabeledExample]] = {}
    for ex in data.examples:
        by_class.setdefault(ex.label, []).append(ex)
    subset: list[LabeledExample] = []
    for label in range(data.num_classes):
        pool = by_class.get(label, [])
        if len(pool) < shots:
            raise ValueError(
                f"class {label} has only {len(pool)} examples, need {shots}"
            )
        subset.extend(rng.sample(pool, shots))
    rng.shuffle(subset)
    return subset


def _generated_as_training(items, num_classes: int) -> list[tuple]:
    out = []
    for ex in items:
        if ex.is_pair:
            prem = ex.text[0] if len(ex.text[0]) else TokenSequence((UNK_ID,))
            hyp = ex.text[1] if len(ex.text[1]) else TokenSequence((UNK_ID,))
            text = (prem, hyp)
        else:
            text = ex.text if len(ex.text) else TokenSequence((UNK_ID,))
        out.append((text, ex.soft_label))
    return out


def run_experiment(
    train_data: TextDataset,
    test_data: TextDataset,
    model: InterpolationModel,
    policy: LabelPolicy,
    shots: int,
    seeds: list[int],
    classifier_config: ClassifierConfig | None = None,
    decode_config: DecodeConfig | None = None,
    augment_multiplier: int = 1,
) -> list[ExperimentRow]:
    """For each seed: draw a balanced few-shot subset, train one classifier
    on it alone and one on it plus generated examples (as many as the subset
    by default), and score both on the held-out test set. The teacher for
    the teacher policy is trained on the clean subset of the same seed."""
    if not seeds:
        raise ValueError("need at least one seed")
    if augment_multiplier < 1:
        raise ValueError("augment_multiplier must be >= 1")
    base_cfg = classifier_config or ClassifierConfig(
        vocab_size=model.config.vocab_size, num_classes=train_data.num_classes
    )
    if base_cfg.num_classes != train_data.num_classes:
        raise ValueError("classifier and dataset class counts differ")
    rows: list[ExperimentRow] = []
    for seed in seeds:
        subset = kshot_subset(train_data, shots, seed)
        subset_soft = hard_examples_as_soft(subset, train_data.num_classes)

        def _cfg(offset: int) -> ClassifierConfig:
            cfg = ClassifierConfig(**vars(base_cfg))
            cfg.seed = seed * 1000 + offset
            return cfg

        vanilla = train_classifier(_cfg(0), subset_soft)
        acc_v = evaluate_classifier(vanilla, list(test_data.examples)).accuracy
        rows.append(ExperimentRow("vanilla", "none", shots, seed, acc_v))

        teacher = None
        if policy.kind == "teacher":
            teacher = train_classifier(_cfg(1), subset_soft)
        subset_data = TextDataset(
            examples=tuple(subset),
            num_classes=train_data.num_classes,
            task_kind=train_data.task_kind,
        )
        generated = augment_dataset(
            subset_data,
            model,
            policy,
            size=len(subset) * augment_multiplier,
            decode_config=decode_config,
            seed=seed,
            teacher=teacher,
        )
        combined = subset_soft + _generated_as_training(
            generated, train_data.num_classes
        )
        augmented = train_classifier(_cfg(2), combined)
        acc_a = evaluate_classifier(augmented, list(test_data.examples)).accuracy
        rows.append(ExperimentRow("augmented", policy.kind, shots, seed, acc_a))
    return rows


def summarize_experiment(rows: list[ExperimentRow]) -> list[dict]:
    """Mean and standard deviation of accuracy per (method, policy, shots)."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row.method, row.policy, row.shots), []).append(
            row.accuracy
        )
    out = []
    for (method, policy, shots), accs in sorted(groups.items()):
        mean, std = _mean_std(accs)
        out.append({
            "method": method,
            "policy": policy,
            "shots": shots,
            "mean_accuracy": mean,
            "std_accuracy": std,
            "n_seeds": len(accs),
        })
    return out


def write_experiment_csv(path, rows: list[ExperimentRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EXPERIMENT_COLUMNS)
        for row in rows:
            writer.writerow([row.method, row.policy, row.shots, row.seed,
                             row.accuracy])


def write_summary_csv(path, summary: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(summary)
