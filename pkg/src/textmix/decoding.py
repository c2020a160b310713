"""Generate text from an interpolated latent state.

Three strategies: beam search (default), greedy, and ancestral sampling.
All scores are summed token log-probabilities including the end-of-sequence
step; generation stops at the end token or at a hard length cap.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .data import BOS_ID, EOS_ID, TokenSequence
from .model import InterpolatedState, InterpolationModel, check_alpha

STRATEGIES = ("beam", "greedy", "sample")


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "beam"
    beam_size: int = 4
    max_decode_length: int | None = None  # defaults to 2 * max(La, Lb) + 2
    length_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_decode_length is not None and self.max_decode_length < 1:
            raise ValueError("max_decode_length must be >= 1 when set")
        if self.length_penalty < 0:
            raise ValueError(
                f"length_penalty must be >= 0, got {self.length_penalty}"
            )


@dataclass(frozen=True)
class DecodeResult:
    """Generated content tokens (end token stripped), their summed
    log-probability including the end step, and provenance."""

    tokens: TokenSequence
    total_logprob: float
    alpha: float
    source_a: TokenSequence
    source_b: TokenSequence
    ended_with_eos: bool
    strategy: str


def _default_cap(la: int, lb: int) -> int:
    return 2 * max(la, lb) + 2


def _cap_for(config: DecodeConfig, la: int, lb: int, model_cap: int) -> int:
    cap = config.max_decode_length
    if cap is None:
        cap = _default_cap(la, lb)
    # the decoder's position table bounds how far any strategy can go
    return min(cap, model_cap - 1)


def _ranking_score(logprob: float, length: int, penalty: float) -> float:
    if penalty > 0.0 and length > 0:
        return logprob / (length**penalty)
    return logprob


def _step_logprobs(
    model: InterpolationModel, state: InterpolatedState, prefixes: torch.Tensor
) -> torch.Tensor:
    """Next-token log-probabilities for a (B, S) batch of prefixes that all
    condition on the same latent state. Returns (B, V)."""
    b = prefixes.shape[0]
    memory = state.vectors.unsqueeze(0).expand(b, -1, -1)
    memory_lens = torch.full((b,), state.target_length, dtype=torch.long,
                             device=prefixes.device)
    logits = model.decode_logits(memory, memory_lens, prefixes)
    return F.log_softmax(logits[:, -1, :], dim=-1)


def greedy_decode(
    model: InterpolationModel, state: InterpolatedState, config: DecodeConfig
) -> tuple[TokenSequence, float, bool]:
    la, lb = state.source_lengths if state.source_lengths else (1, 1)
    cap = _cap_for(config, la, lb, model.config.max_decode_positions)
    prefix = torch.tensor([[BOS_ID]], dtype=torch.long)
    total = 0.0
    tokens: list[int] = []
    ended = False
    with torch.no_grad():
        for _ in range(cap):
            logps = _step_logprobs(model, state, prefix)[0]
            nxt = int(torch.argmax(logps))  # argmax picks the lowest id on ties
            total += float(logps[nxt])
            if nxt == EOS_ID:
                ended = True
                break
            tokens.append(nxt)
            prefix = torch.cat(
                [prefix, torch.tensor([[nxt]], dtype=torch.long)], dim=1
            )
    return TokenSequence(tuple(tokens)), total, ended


def sample_decode(
    model: InterpolationModel,
    state: InterpolatedState,
    config: DecodeConfig,
    generator: torch.Generator,
) -> tuple[TokenSequence, float, bool]:
    la, lb = state.source_lengths if state.source_lengths else (1, 1)
    cap = _cap_for(config, la, lb, model.config.max_decode_positions)
    prefix = torch.tensor([[BOS_ID]], dtype=torch.long)
    total = 0.0
    tokens: list[int] = []
    ended = False
    with torch.no_grad():
        for _ in range(cap):
            logps = _step_logprobs(model, state, prefix)[0]
            nxt = int(torch.multinomial(logps.exp(), 1, generator=generator))
            total += float(logps[nxt])
            if nxt == EOS_ID:
                ended = True
                break
            tokens.append(nxt)
            prefix = torch.cat(
                [prefix, torch.tensor([[nxt]], dtype=torch.long)], dim=1
            )
    return TokenSequence(tuple(tokens)), total, ended


@dataclass(frozen=True)
class _Hypothesis:
    ids: tuple[int, ...]  # without the leading start token
    logprob: float
    ended: bool


def beam_decode(
    model: InterpolationModel, state: InterpolatedState, config: DecodeConfig
) -> tuple[TokenSequence, float, bool]:
    """Standard beam search. Hypotheses that emit the end token retire to a
    finished pool and stop consuming beam slots; ties between equal scores
    prefer the lexicographically smaller token ids."""
    la, lb = state.source_lengths if state.source_lengths else (1, 1)
    cap = _cap_for(config, la, lb, model.config.max_decode_positions)
    width = config.beam_size
    live: list[_Hypothesis] = [_Hypothesis((), 0.0, False)]
    finished: list[_Hypothesis] = []
    with torch.no_grad():
        for _ in range(cap):
            prefix = torch.tensor(
                [(BOS_ID,) + h.ids for h in live], dtype=torch.long
            )
            logps = _step_logprobs(model, state, prefix)  # (n_live, V)
            candidates: list[_Hypothesis] = []
            # 2x width per hypothesis so end-token continuations cannot crowd
            # all live slots out of the candidate pool
            top = torch.topk(logps, k=min(2 * width, logps.shape[1]), dim=-1)
            for i, h in enumerate(live):
                for score, tok in zip(top.values[i].tolist(),
                                      top.indices[i].tolist()):
                    candidates.append(
                        _Hypothesis(h.ids + (tok,), h.logprob + score, tok == EOS_ID)
                    )
            candidates.sort(key=lambda h: (-h.logprob, h.ids))
            live = []
            for h in candidates:
                if h.ended:
                    finished.append(_Hypothesis(h.ids[:-1], h.logprob, True))
                elif len(live) < width:
                    live.append(h)
            if not live:
                break
            if (
                finished
                and config.length_penalty == 0.0
                and max(f.logprob for f in finished)
                >= max(h.logprob for h in live)
            ):
                # step log-probs are <= 0, so no live hypothesis can improve
                break
        if not finished:  # nothing emitted the end token within the cap
            finished = live
    best = min(
        finished,
        key=lambda h: (
            -_ranking_score(h.logprob, len(h.ids), config.length_penalty),
            h.ids,
        ),
    )
    return TokenSequence(best.ids), best.logprob, best.ended


def decode_state(
    model: InterpolationModel,
    state: InterpolatedState,
    config: DecodeConfig,
    generator: torch.Generator | None = None,
) -> tuple[TokenSequence, float, bool]:
    if config.strategy == "greedy":
        return greedy_decode(model, state, config)
    if config.strategy == "sample":
        if generator is None:
            generator = torch.Generator()
            generator.manual_seed(config.seed)
        return sample_decode(model, state, config, generator)
    return beam_decode(model, state, config)


def interpolate_text(
    model: InterpolationModel,
    xa: TokenSequence,
    xb: TokenSequence,
    alpha: float,
    config: DecodeConfig | None = None,
    generator: torch.Generator | None = None,
) -> DecodeResult:
    """Full pipeline for one pair: encode, convert, mix, decode."""
    config = config or DecodeConfig()
    alpha = check_alpha(alpha)
    was_training = model.training
    model.eval()
    try:
        state = model.interpolate_pair(xa, xb, alpha)
        tokens, logprob, ended = decode_state(model, state, config, generator)
    finally:
        if was_training:
            model.train()
    return DecodeResult(
        tokens=tokens,
        total_logprob=logprob,
        alpha=alpha,
        source_a=xa,
        source_b=xb,
        ended_with_eos=ended,
        strategy=config.strategy,
    )


def batch_interpolate(
    model: InterpolationModel,
    items: list[tuple[TokenSequence, TokenSequence, float]],
    config: DecodeConfig | None = None,
    generator: torch.Generator | None = None,
) -> list[DecodeResult]:
    """Decode each (xa, xb, alpha) triple in order; equivalent to mapping
    `interpolate_text` over the list. Errors name the failing index."""
    if not items:
        raise ValueError("batch_interpolate needs at least one triple")
    config = config or DecodeConfig()
    if config.strategy == "sample" and generator is None:
        generator = torch.Generator()
        generator.manual_seed(config.seed)
    out: list[DecodeResult] = []
    for i, (xa, xb, alpha) in enumerate(items):
        try:
            out.append(interpolate_text(model, xa, xb, alpha, config, generator))
        except ValueError as exc:
            raise ValueError(f"item {i}: {exc}") from exc
    return out
