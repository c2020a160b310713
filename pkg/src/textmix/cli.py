"""Command line entry point.

Subcommands: train, interpolate, augment, sweep, experiment, inspect-ckpt.
Every run writes a manifest describing the resolved configuration and the
files it produced, so results can be traced back to their settings.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys

import torch

from . import __version__
from .augment import (
    LabelPolicy,
    augment_dataset,
    write_augmented_jsonl,
)
from .classifier import ClassifierConfig, hard_examples_as_soft, train_classifier
from .config import Settings, parse_config_file
from .data import (
    Vocabulary,
    build_vocabulary,
    detokenize,
    load_corpus,
    load_labeled_dataset,
    tokenize,
)
from .decoding import DecodeConfig, interpolate_text
from .evaluation import (
    alpha_sweep,
    monotonicity_score,
    plot_sweep,
    run_experiment,
    summarize_experiment,
    write_experiment_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .model import (
    InterpolationModel,
    ModelConfig,
    load_checkpoint,
    read_checkpoint_info,
)
from .training import TrainingConfig, train


# ---------------------------------------------------------------------- #
# argument types
# ---------------------------------------------------------------------- #


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a value >= 1, got {value}")
    return value


def _nonneg_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {value}")
    return value


def _positive_float(raw: str) -> float:
    value = _nonneg_float(raw)
    if value == 0:
        raise argparse.ArgumentTypeError("expected a value > 0, got 0")
    return value


def _unit_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {raw!r}")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {value}")
    return value


def _alpha_list(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, "
                                         f"got {raw!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"mixing ratio {v} outside [0, 1]")
    return values


def _int_list(raw: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, "
                                         f"got {raw!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


# ---------------------------------------------------------------------- #
# shared plumbing
# ---------------------------------------------------------------------- #


def _out_path(path: str) -> str:
    root = os.environ.get("TEXTMIX_OUTPUT_ROOT")
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def _settings(args, mapping: dict[str, str]) -> Settings:
    file_values = parse_config_file(args.config) if args.config else {}
    settings = Settings(file_values)
    for attr, key in mapping.items():
        settings.set_flag(key, getattr(args, attr, None))
    return settings


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, command: str, settings: Settings,
                    inputs: dict, outputs: dict, extra: dict | None = None):
    doc = {
        "command": command,
        "version": __version__,
        "config": settings.resolved(),
        "inputs": inputs,
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_model(args) -> tuple[InterpolationModel, Vocabulary]:
    vocab = Vocabulary.load(args.vocab)
    model = load_checkpoint(args.checkpoint, vocab)
    return model, vocab


def _infer_format(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    if str(path).endswith(".jsonl"):
        return "jsonl"
    return "tsv"


_DECODE_MAP = {
    "strategy": "decode.strategy",
    "beam_size": "decode.beam_size",
    "max_decode_length": "decode.max_decode_length",
    "length_penalty": "decode.length_penalty",
    "decode_seed": "decode.seed",
}

_CLASSIFIER_MAP = {
    "classifier_dim": "classifier.dim",
    "classifier_epochs": "classifier.epochs",
    "classifier_batch_size": "classifier.batch_size",
    "classifier_lr": "classifier.learning_rate",
}


def _add_decode_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("decoding")
    group.add_argument("--strategy", choices=("beam", "greedy", "sample"))
    group.add_argument("--beam-size", type=_positive_int)
    group.add_argument("--max-decode-length", type=_positive_int)
    group.add_argument("--length-penalty", type=_nonneg_float)
    group.add_argument("--decode-seed", type=int)


def _add_classifier_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("classifier")
    group.add_argument("--classifier-dim", type=_positive_int)
    group.add_argument("--classifier-epochs", type=_positive_int)
    group.add_argument("--classifier-batch-size", type=_positive_int)
    group.add_argument("--classifier-lr", type=_positive_float)


def _decode_config(settings: Settings) -> DecodeConfig:
    return DecodeConfig(**settings.section("decode"))


def _classifier_config(settings: Settings, vocab_size: int,
                       num_classes: int, seed: int) -> ClassifierConfig:
    return ClassifierConfig(
        vocab_size=vocab_size, num_classes=num_classes, seed=seed,
        **settings.section("classifier"),
    )


def _policy(settings: Settings) -> LabelPolicy:
    return LabelPolicy(
        kind=settings.get("augment.policy"),
        temperature=settings.get("augment.temperature"),
        orientation=settings.get("augment.orientation"),
    )


# ---------------------------------------------------------------------- #
# train
# ---------------------------------------------------------------------- #

_TRAIN_MAP = {
    "vocab_size": "vocab.max_size",
    "dim": "model.dim",
    "heads": "model.num_heads",
    "enc_layers": "model.enc_layers",
    "dec_layers": "model.dec_layers",
    "ffn_dim": "model.ffn_dim",
    "max_len": "model.max_len",
    "dropout": "model.dropout",
    "sigma_init": "model.sigma_init",
    "steps": "training.steps",
    "batch_size": "training.batch_size",
    "lr": "training.learning_rate",
    "p_mask": "training.p_mask",
    "hidden_penalty": "training.hidden_penalty",
    "noise_std": "training.noise_std",
    "alpha_sampling": "training.alpha_sampling",
    "seed": "training.seed",
    "log_every": "training.log_every",
    "checkpoint_every": "training.checkpoint_every",
}


def cmd_train(args) -> int:
    settings = _settings(args, _TRAIN_MAP)
    if args.paper_preset:
        # original recipe; explicit flags still win
        if args.lr is None:
            settings.set_flag("training.learning_rate", 1e-5)
        if args.batch_size is None:
            settings.set_flag("training.batch_size", 8)

    corpus = load_corpus(args.corpus)
    vocab = build_vocabulary(corpus, settings.get("vocab.max_size"))
    max_len = settings.get("model.max_len")
    sequences = [tokenize(text, vocab, max_len=max_len) for text in corpus]

    model_config = ModelConfig(vocab_size=len(vocab), **settings.section("model"))
    model = InterpolationModel(model_config)
    training_config = TrainingConfig(**settings.section("training"))

    out_dir = _out_path(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    vocab_path = os.path.join(out_dir, "vocab.txt")
    ckpt_path = os.path.join(out_dir, "model.pt")
    log_path = os.path.join(out_dir, "training_log.csv")
    manifest_path = os.path.join(out_dir, "manifest.json")

    vocab.save(vocab_path)
    result = train(model, sequences, training_config, vocab=vocab,
                   checkpoint_path=ckpt_path, log_path=log_path)

    _write_manifest(
        manifest_path, "train", settings,
        inputs={"corpus": str(args.corpus), "num_sentences": len(sequences)},
        outputs={
            "checkpoint": ckpt_path,
            "vocab": vocab_path,
            "training_log": log_path,
        },
        extra={
            "vocab_sha256": vocab.sha256(),
            "checkpoint_sha256": _sha256_file(ckpt_path),
            "final_loss": result.final_loss,
            "steps_run": result.steps_run,
        },
    )
    print(f"trained {result.steps_run} steps, final loss {result.final_loss:.4f}")
    print(f"checkpoint: {ckpt_path}")
    print(f"manifest: {manifest_path}")
    return 0


# ---------------------------------------------------------------------- #
# interpolate
# ---------------------------------------------------------------------- #


def cmd_interpolate(args) -> int:
    settings = _settings(args, _DECODE_MAP)
    model, vocab = _load_model(args)
    max_len = model.config.max_len
    xa = tokenize(args.text_a, vocab, max_len=max_len)
    xb = tokenize(args.text_b, vocab, max_len=max_len)
    result = interpolate_text(model, xa, xb, args.alpha,
                              _decode_config(settings))
    text = detokenize(result.tokens, vocab)
    print(text)
    print(f"alpha={result.alpha} logprob={result.total_logprob:.4f} "
          f"ended_with_eos={result.ended_with_eos}")
    if args.out:
        out = _out_path(args.out)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------- #
# augment
# ---------------------------------------------------------------------- #

_AUGMENT_MAP = dict(_DECODE_MAP, **_CLASSIFIER_MAP, **{
    "size": "augment.size",
    "policy": "augment.policy",
    "temperature": "augment.temperature",
    "orientation": "augment.orientation",
    "alpha_dist": "augment.alpha_distribution",
    "beta_param": "augment.beta_param",
    "seed": "augment.seed",
})


def cmd_augment(args) -> int:
    settings = _settings(args, _AUGMENT_MAP)
    model, vocab = _load_model(args)
    fmt = _infer_format(args.data, args.format)
    data = load_labeled_dataset(
        args.data, fmt, args.task, vocab,
        max_len=model.config.max_len, num_classes=args.num_classes,
    )
    size = settings.get("augment.size")
    if size is None:
        size = len(data.examples)
    policy = _policy(settings)
    seed = settings.get("augment.seed")

    teacher = None
    if policy.kind == "teacher":
        cfg = _classifier_config(settings, len(vocab), data.num_classes, seed)
        teacher = train_classifier(
            cfg, hard_examples_as_soft(list(data.examples), data.num_classes),
            vocab_sha256=vocab.sha256(),
        )

    generated = augment_dataset(
        data, model, policy, size,
        decode_config=_decode_config(settings),
        alpha_distribution=settings.get("augment.alpha_distribution"),
        beta_param=settings.get("augment.beta_param"),
        seed=seed,
        teacher=teacher,
    )
    out = _out_path(args.out)
    write_augmented_jsonl(out, generated, vocab)
    manifest_path = out + ".manifest.json"
    _write_manifest(
        manifest_path, "augment", settings,
        inputs={"data": str(args.data), "num_examples": len(data.examples),
                "checkpoint": str(args.checkpoint)},
        outputs={"augmented": out},
        extra={"num_generated": len(generated)},
    )
    print(f"wrote {len(generated)} examples to {out}")
    print(f"manifest: {manifest_path}")
    return 0


# ---------------------------------------------------------------------- #
# sweep
# ---------------------------------------------------------------------- #

_SWEEP_MAP = dict(_DECODE_MAP, **{
    "pairs": "sweep.pairs",
    "alphas": "sweep.alphas",
    "seed": "sweep.seed",
})


def cmd_sweep(args) -> int:
    settings = _settings(args, _SWEEP_MAP)
    model, vocab = _load_model(args)
    texts = load_corpus(args.corpus)
    if len(texts) < 2:
        raise ValueError("sweep needs at least two sentences")
    sequences = [tokenize(t, vocab, max_len=model.config.max_len) for t in texts]
    rng = random.Random(settings.get("sweep.seed"))
    n_pairs = settings.get("sweep.pairs")
    pairs = []
    for _ in range(n_pairs):
        ia = rng.randrange(len(sequences))
        ib = rng.randrange(len(sequences) - 1)
        if ib >= ia:
            ib += 1
        pairs.append((sequences[ia], sequences[ib]))

    curve = alpha_sweep(model, pairs, list(settings.get("sweep.alphas")),
                        _decode_config(settings))
    report = monotonicity_score(curve)

    out_csv = _out_path(args.out_csv)
    out_plot = _out_path(args.out_plot)
    write_sweep_csv(out_csv, curve)
    plot_sweep(out_plot, curve)
    manifest_path = out_csv + ".manifest.json"
    _write_manifest(
        manifest_path, "sweep", settings,
        inputs={"corpus": str(args.corpus), "checkpoint": str(args.checkpoint)},
        outputs={"csv": out_csv, "plot": out_plot},
        extra={"rho_a": report.rho_a, "rho_b": report.rho_b,
               "empty_outputs": curve.empty_outputs},
    )
    print(f"swept {len(curve.alphas)} ratios over {curve.n_pairs} pairs")
    print(f"rank correlation vs first source: {report.rho_a:+.3f}, "
          f"vs second source: {report.rho_b:+.3f}")
    print(f"csv: {out_csv}")
    print(f"plot: {out_plot}")
    return 0


# ---------------------------------------------------------------------- #
# experiment
# ---------------------------------------------------------------------- #

_EXPERIMENT_MAP = dict(_DECODE_MAP, **_CLASSIFIER_MAP, **{
    "shots": "experiment.shots",
    "seeds": "experiment.seeds",
    "augment_multiplier": "experiment.augment_multiplier",
    "policy": "augment.policy",
    "temperature": "augment.temperature",
    "orientation": "augment.orientation",
})


def cmd_experiment(args) -> int:
    settings = _settings(args, _EXPERIMENT_MAP)
    model, vocab = _load_model(args)
    fmt_train = _infer_format(args.train_data, args.format)
    fmt_test = _infer_format(args.test_data, args.format)
    train_set = load_labeled_dataset(
        args.train_data, fmt_train, args.task, vocab,
        max_len=model.config.max_len, num_classes=args.num_classes,
    )
    test_set = load_labeled_dataset(
        args.test_data, fmt_test, args.task, vocab,
        max_len=model.config.max_len, num_classes=train_set.num_classes,
    )
    policy = _policy(settings)
    seeds = list(settings.get("experiment.seeds"))
    shots = settings.get("experiment.shots")
    base_cfg = _classifier_config(settings, len(vocab),
                                  train_set.num_classes, seed=0)
    rows = run_experiment(
        train_set, test_set, model, policy, shots, seeds,
        classifier_config=base_cfg,
        decode_config=_decode_config(settings),
        augment_multiplier=settings.get("experiment.augment_multiplier"),
    )
    summary = summarize_experiment(rows)
    out_csv = _out_path(args.out_csv)
    summary_csv = _out_path(
        args.out_summary or os.path.splitext(args.out_csv)[0] + "_summary.csv"
    )
    write_experiment_csv(out_csv, rows)
    write_summary_csv(summary_csv, summary)
    manifest_path = out_csv + ".manifest.json"
    _write_manifest(
        manifest_path, "experiment", settings,
        inputs={"train_data": str(args.train_data),
                "test_data": str(args.test_data),
                "checkpoint": str(args.checkpoint)},
        outputs={"results": out_csv, "summary": summary_csv},
    )
    for entry in summary:
        print(f"{entry['method']} (policy={entry['policy']}, "
              f"shots={entry['shots']}): "
              f"{entry['mean_accuracy']:.4f} +/- {entry['std_accuracy']:.4f} "
              f"over {entry['n_seeds']} seeds")
    print(f"results: {out_csv}")
    print(f"summary: {summary_csv}")
    return 0


# ---------------------------------------------------------------------- #
# inspect-ckpt
# ---------------------------------------------------------------------- #


def cmd_inspect_ckpt(args) -> int:
    info = read_checkpoint_info(args.checkpoint)
    print(f"format_version: {info['format_version']}")
    print(f"vocab_sha256: {info['vocab_sha256']}")
    for key, value in sorted(info["config"].items()):
        print(f"config.{key}: {value}")
    state = info["state_dict"]
    n_params = sum(t.numel() for t in state.values())
    print(f"parameters: {n_params}")
    sigma = torch.nn.functional.softplus(state["raw_sigma"])
    print(f"conversion_sigma: {float(sigma):.6f}")
    return 0


# ---------------------------------------------------------------------- #
# parser
# ---------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textmix",
        description="learned text interpolation for data augmentation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an interpolation model")
    p.add_argument("--corpus", required=True, help="one sentence per line")
    p.add_argument("--out-dir", default="run",
                   help="directory for checkpoint, vocab, log, manifest")
    p.add_argument("--config", help="key: value config file")
    p.add_argument("--vocab-size", type=_positive_int)
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--heads", type=_positive_int)
    p.add_argument("--enc-layers", type=_positive_int)
    p.add_argument("--dec-layers", type=_positive_int)
    p.add_argument("--ffn-dim", type=_positive_int)
    p.add_argument("--max-len", type=_positive_int)
    p.add_argument("--dropout", type=_unit_float)
    p.add_argument("--sigma-init", type=_positive_float)
    p.add_argument("--steps", type=_positive_int)
    p.add_argument("--batch-size", type=_positive_int)
    p.add_argument("--lr", type=_positive_float)
    p.add_argument("--p-mask", type=_unit_float)
    p.add_argument("--hidden-penalty", type=_nonneg_float)
    p.add_argument("--noise-std", type=_nonneg_float)
    p.add_argument("--alpha-sampling", choices=("per-example", "per-minibatch"))
    p.add_argument("--seed", type=int)
    p.add_argument("--log-every", type=_positive_int)
    p.add_argument("--checkpoint-every", type=_positive_int)
    p.add_argument("--paper-preset", action="store_true",
                   help="use the original recipe (batch 8, lr 1e-5)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("interpolate", help="decode one interpolated sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--text-a", required=True)
    p.add_argument("--text-b", required=True)
    p.add_argument("--alpha", type=_unit_float, required=True)
    p.add_argument("--config")
    p.add_argument("--out", help="also write the generated text to a file")
    _add_decode_flags(p)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("augment", help="generate an augmented dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True, help="labeled dataset (tsv or jsonl)")
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--task", choices=("single", "pair"), default="single")
    p.add_argument("--num-classes", type=_positive_int)
    p.add_argument("--out", required=True, help="output jsonl path")
    p.add_argument("--config")
    p.add_argument("--size", type=_positive_int,
                   help="number of generated examples (default: input size)")
    p.add_argument("--policy",
                   choices=("interpolated", "sharpened", "teacher"))
    p.add_argument("--temperature", type=_positive_float)
    p.add_argument("--orientation", choices=("text_aligned", "paper_literal"))
    p.add_argument("--alpha-dist", choices=("uniform", "beta"))
    p.add_argument("--beta-param", type=_positive_float)
    p.add_argument("--seed", type=int)
    _add_decode_flags(p)
    _add_classifier_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("sweep", help="precision-vs-ratio sweep")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--corpus", required=True, help="one sentence per line")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-plot", required=True)
    p.add_argument("--config")
    p.add_argument("--pairs", type=_positive_int)
    p.add_argument("--alphas", type=_alpha_list,
                   help="comma-separated mixing ratios")
    p.add_argument("--seed", type=int)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("experiment",
                       help="few-shot downstream comparison with and without "
                            "generated data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--format", choices=("tsv", "jsonl"))
    p.add_argument("--task", choices=("single", "pair"), default="single")
    p.add_argument("--num-classes", type=_positive_int)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-summary")
    p.add_argument("--config")
    p.add_argument("--shots", type=_positive_int)
    p.add_argument("--seeds", type=_int_list)
    p.add_argument("--augment-multiplier", type=_positive_int)
    p.add_argument("--policy",
                   choices=("interpolated", "sharpened", "teacher"))
    p.add_argument("--temperature", type=_positive_float)
    p.add_argument("--orientation", choices=("text_aligned", "paper_literal"))
    _add_decode_flags(p)
    _add_classifier_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("inspect-ckpt", help="print checkpoint metadata")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_inspect_ckpt)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    workers = os.environ.get("TEXTMIX_WORKERS")
    if workers:
        try:
            count = int(workers)
            if count < 1:
                raise ValueError
        except ValueError:
            print(f"error: TEXTMIX_WORKERS must be a positive integer, "
                  f"got {workers!r}", file=sys.stderr)
            return 1
        torch.set_num_threads(count)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
