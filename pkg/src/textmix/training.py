"""Training loop and objective.

The objective reconstructs both source sentences from the mixed latent state,
weighting each side's negative log-likelihood by its share of the mix. Word
masking on encoder inputs, a squared-norm penalty on encoder outputs, and
small Gaussian noise before length conversion regularize the latent space.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import torch
from torch import Tensor

from .data import MASK_ID, PAD_ID, TokenSequence, Vocabulary
from .model import (
    InterpolationModel,
    batched_conversion_weights,
    interp_length,
    save_checkpoint,
)

LOG_COLUMNS = ["step", "loss", "recon_a", "recon_b", "penalty", "alpha_mean"]

_ALPHA_MODES = ("per-example", "per-minibatch")


@dataclass
class TrainingConfig:
    steps: int
    batch_size: int = 16
    learning_rate: float = 3e-4
    p_mask: float = 0.1
    hidden_penalty: float = 0.001
    noise_std: float = 0.001
    alpha_sampling: str = "per-example"
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.p_mask < 1.0:
            raise ValueError(f"p_mask must be in [0, 1), got {self.p_mask}")
        if self.hidden_penalty < 0:
            raise ValueError(f"hidden_penalty must be >= 0, got {self.hidden_penalty}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.alpha_sampling not in _ALPHA_MODES:
            raise ValueError(
                f"alpha_sampling must be one of {_ALPHA_MODES}, "
                f"got {self.alpha_sampling!r}"
            )
        if self.log_every < 1:
            raise ValueError(f"log_every must be >= 1, got {self.log_every}")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1 when set")


def paper_training_config(steps: int, **overrides) -> TrainingConfig:
    """Hyperparameters from the original recipe: small batches, slow learning
    rate. The package default is tuned for quick desk-scale runs instead."""
    base = dict(batch_size=8, learning_rate=1e-5)
    base.update(overrides)
    return TrainingConfig(steps=steps, **base)


def mask_tokens(
    ids: Tensor, lengths: Tensor, p_mask: float, generator: torch.Generator | None
) -> Tensor:
    """Replace content positions with the mask id independently with
    probability p_mask. Padding is never masked. p_mask == 0 returns the
    input untouched without consuming randomness."""
    if not 0.0 <= p_mask < 1.0:
        raise ValueError(f"p_mask must be in [0, 1), got {p_mask}")
    if p_mask == 0.0:
        return ids
    draws = torch.rand(ids.shape, generator=generator, device=ids.device)
    valid = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0) < lengths.unsqueeze(1)
    return ids.masked_fill((draws < p_mask) & valid, MASK_ID)


def pad_batch(seqs: list[TokenSequence], device=None) -> tuple[Tensor, Tensor]:
    """Stack variable-length sequences into (B, Lmax) ids plus (B,) lengths."""
    if not seqs:
        raise ValueError("cannot pad an empty batch")
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long, device=device)
    out = torch.full((len(seqs), int(lengths.max())), PAD_ID,
                     dtype=torch.long, device=device)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(s.ids, dtype=torch.long, device=device)
    return out, lengths


@dataclass
class LossParts:
    recon_a: float
    recon_b: float
    penalty: float
    alpha_mean: float
    max_abs_hidden: float


def hidden_norm_penalty(hidden: Tensor, lengths: Tensor, weight: float,
                        num_pairs: int) -> Tensor:
    """(weight / num_pairs) * sum of squared encoder outputs over content
    positions of every encoded sequence in the batch."""
    valid = (
        torch.arange(hidden.shape[1], device=hidden.device).unsqueeze(0)
        < lengths.unsqueeze(1)
    ).unsqueeze(-1)
    return weight * (hidden * valid).pow(2).sum() / num_pairs


def interpolation_batch_loss(
    model: InterpolationModel,
    pairs: list[tuple[TokenSequence, TokenSequence]],
    alphas: Tensor,
    config: TrainingConfig,
    generator: torch.Generator | None = None,
    training: bool = True,
) -> tuple[Tensor, LossParts]:
    """Mixed reconstruction loss over a minibatch of sentence pairs.

    Returns the scalar objective (reconstruction terms plus hidden-norm
    penalty) with gradients attached, and its float components. Masking and
    noise are applied only when `training` is true; both draw from
    `generator` so a fixed seed makes the loss a deterministic function of
    the parameters.
    """
    m = len(pairs)
    if m == 0:
        raise ValueError("empty batch")
    if alphas.shape != (m,):
        raise ValueError(f"alphas must have shape ({m},), got {tuple(alphas.shape)}")
    device = model.raw_sigma.device
    seqs = [p[0] for p in pairs] + [p[1] for p in pairs]
    ids, lengths = pad_batch(seqs, device=device)

    enc_in = ids
    if training and config.p_mask > 0:
        enc_in = mask_tokens(ids, lengths, config.p_mask, generator)
    hidden = model.encode_batch(enc_in, lengths)
    valid = (
        torch.arange(hidden.shape[1], device=device).unsqueeze(0)
        < lengths.unsqueeze(1)
    ).unsqueeze(-1)
    hidden = hidden * valid  # rows past each length carry no signal

    penalty = hidden.new_zeros(())
    if config.hidden_penalty > 0:
        penalty = hidden_norm_penalty(hidden, lengths, config.hidden_penalty, m)

    if training and config.noise_std > 0:
        noise = torch.randn(hidden.shape, generator=generator, device=device,
                            dtype=hidden.dtype)
        hidden = hidden + config.noise_std * noise * valid

    target_lens = torch.tensor(
        [
            interp_length(len(p[0]), len(p[1]), float(alphas[i]))
            for i, p in enumerate(pairs)
        ],
        dtype=torch.long,
        device=device,
    )
    both_targets = torch.cat([target_lens, target_lens])
    weights = batched_conversion_weights(
        lengths, both_targets, model.sigma(),
        max_src_len=hidden.shape[1], max_tgt_len=int(target_lens.max()),
        dtype=hidden.dtype, device=device,
    )
    converted = weights @ hidden  # (2m, Tmax, d)

    a = alphas.to(converted.dtype).view(m, 1, 1)
    mixed = a * converted[:m] + (1.0 - a) * converted[m:]
    memory = torch.cat([mixed, mixed])
    memory_lens = both_targets
    logprobs = model.sequence_logprobs(memory, memory_lens, seqs)

    alpha_w = alphas.to(logprobs.dtype)
    recon_a = -(alpha_w * logprobs[:m]).sum() / m
    recon_b = -((1.0 - alpha_w) * logprobs[m:]).sum() / m
    loss = recon_a + recon_b + penalty

    parts = LossParts(
        recon_a=float(recon_a.detach()),
        recon_b=float(recon_b.detach()),
        penalty=float(penalty.detach()),
        alpha_mean=float(alphas.mean()),
        max_abs_hidden=float(hidden.detach().abs().max()),
    )
    return loss, parts


def sample_alphas(m: int, mode: str, generator: torch.Generator) -> Tensor:
    if mode == "per-minibatch":
        return torch.rand(1, generator=generator).expand(m).clone()
    return torch.rand(m, generator=generator)


def _epoch_pairs(
    n: int, generator: torch.Generator
) -> list[tuple[int, int]]:
    """Pair every sentence index with a uniformly drawn partner: two
    independent shuffles zipped together. Self-pairs are allowed."""
    left = torch.randperm(n, generator=generator).tolist()
    right = torch.randperm(n, generator=generator).tolist()
    return list(zip(left, right))


@dataclass
class TrainResult:
    steps_run: int
    final_loss: float
    log_rows: list[dict] = field(default_factory=list)


def train(
    model: InterpolationModel,
    sequences: list[TokenSequence],
    config: TrainingConfig,
    vocab: Vocabulary | None = None,
    checkpoint_path=None,
    log_path=None,
) -> TrainResult:
    """Adam training with constant learning rate; pairs are redrawn each
    epoch. Writes a CSV log and, when a path is given, a checkpoint at the
    end and every `checkpoint_every` steps (same file, latest wins)."""
    if not sequences:
        raise ValueError("training needs at least one sequence")
    if checkpoint_path is not None and vocab is None:
        raise ValueError("checkpointing requires the vocabulary for hashing")

    generator = torch.Generator()
    generator.manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    model.train()

    rows: list[dict] = []
    log_file = open(log_path, "w", newline="", encoding="utf-8") if log_path else None
    writer = None
    if log_file:
        writer = csv.DictWriter(log_file, fieldnames=LOG_COLUMNS)
        writer.writeheader()

    try:
        step = 0
        last_loss = math.nan
        n = len(sequences)
        while step < config.steps:
            order = _epoch_pairs(n, generator)
            for start in range(0, n, config.batch_size):
                if step >= config.steps:
                    break
                chunk = order[start : start + config.batch_size]
                pairs = [(sequences[i], sequences[j]) for i, j in chunk]
                alphas = sample_alphas(len(pairs), config.alpha_sampling, generator)
                optimizer.zero_grad()
                loss, parts = interpolation_batch_loss(
                    model, pairs, alphas, config, generator, training=True
                )
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise RuntimeError(
                        f"non-finite loss {value} at step {step + 1}; "
                        f"alphas={[round(float(x), 4) for x in alphas]}, "
                        f"max |hidden|={parts.max_abs_hidden:.4g}"
                    )
                loss.backward()
                optimizer.step()
                step += 1
                last_loss = value
                if step % config.log_every == 0 or step == config.steps:
                    row = {
                        "step": step,
                        "loss": value,
                        "recon_a": parts.recon_a,
                        "recon_b": parts.recon_b,
                        "penalty": parts.penalty,
                        "alpha_mean": parts.alpha_mean,
                    }
                    rows.append(row)
                    if writer:
                        writer.writerow(row)
                if (
                    checkpoint_path is not None
                    and config.checkpoint_every is not None
                    and step % config.checkpoint_every == 0
                ):
                    save_checkpoint(checkpoint_path, model, vocab)
    finally:
        if log_file:
            log_file.close()

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model, vocab)
    model.eval()
    return TrainResult(steps_run=step, final_loss=last_loss, log_rows=rows)
