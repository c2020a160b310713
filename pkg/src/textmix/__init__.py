"""Learned text interpolation for mixup-style data augmentation.

Train a sequence-to-sequence model whose decoder conditions on a convex mix
of two sentences' latent representations, then use it to generate soft-labeled
synthetic examples for low-resource text classification.
"""

__version__ = "0.1.0"

from .augment import (
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
from .classifier import (
    ClassifierConfig,
    TextClassifier,
    evaluate_classifier,
    train_classifier,
)
from .data import (
    LabeledExample,
    TextDataset,
    TokenSequence,
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_corpus,
    load_labeled_dataset,
    tokenize,
)
from .decoding import (
    DecodeConfig,
    DecodeResult,
    batch_interpolate,
    interpolate_text,
)
from .evaluation import (
    PrecisionCurve,
    alpha_sweep,
    monotonicity_score,
    run_experiment,
    spearman_rho,
    unigram_precision,
)
from .model import (
    InterpolatedState,
    InterpolationModel,
    ModelConfig,
    convert_length,
    conversion_weights,
    interp_length,
    interpolate_states,
    load_checkpoint,
    save_checkpoint,
)
from .training import TrainingConfig, interpolation_batch_loss, mask_tokens, train

__all__ = [
    "AugmentedExample",
    "ClassifierConfig",
    "DecodeConfig",
    "DecodeResult",
    "InterpolatedState",
    "InterpolationModel",
    "LabelPolicy",
    "LabeledExample",
    "ModelConfig",
    "PrecisionCurve",
    "SoftLabel",
    "TextClassifier",
    "TextDataset",
    "TokenSequence",
    "TrainingConfig",
    "Vocabulary",
    "alpha_sweep",
    "augment_dataset",
    "batch_interpolate",
    "build_vocabulary",
    "convert_length",
    "conversion_weights",
    "detokenize",
    "evaluate_classifier",
    "interp_length",
    "interpolate_labels",
    "interpolate_states",
    "interpolate_text",
    "interpolation_batch_loss",
    "load_checkpoint",
    "load_corpus",
    "load_labeled_dataset",
    "mask_tokens",
    "monotonicity_score",
    "read_augmented_jsonl",
    "run_experiment",
    "save_checkpoint",
    "sharpen",
    "spearman_rho",
    "teacher_label",
    "tokenize",
    "train",
    "train_classifier",
    "unigram_precision",
    "write_augmented_jsonl",
]
