"""The interpolation network.

Two inputs are encoded independently, resampled to a shared interpolated
length with Gaussian location-based attention (trainable spread), mixed
linearly with the mixing ratio alpha, and handed to a causal decoder that
defines the conditional distribution over output sequences.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .data import BOS_ID, EOS_ID, PAD_ID, TokenSequence, Vocabulary

CHECKPOINT_VERSION = 1

# Absorbs float rounding in alpha*La + (1-alpha)*Lb so targets that are exact
# integers in real arithmetic never round up an extra step.
_CEIL_TOL = 1e-9


def check_alpha(alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"mixing ratio must be in [0, 1], got {alpha}")
    return float(alpha)


def interp_length(la: int, lb: int, alpha: float) -> int:
    """Interpolated target length: ceil(alpha*La + (1-alpha)*Lb)."""
    if la < 1 or lb < 1:
        raise ValueError(f"sequence lengths must be >= 1, got ({la}, {lb})")
    alpha = check_alpha(alpha)
    return math.ceil(alpha * la + (1.0 - alpha) * lb - _CEIL_TOL)


def conversion_weights(
    src_len: int,
    tgt_len: int,
    sigma: float | Tensor,
    dtype: torch.dtype = torch.float32,
    device: torch.device | None = None,
) -> Tensor:
    """Row-stochastic (tgt_len, src_len) resampling weights.

    Output row j attends over source positions k with logits
    -(k - (L/L_tgt) * j)^2 / (2 sigma^2); both positions are 1-based.
    """
    if src_len < 1 or tgt_len < 1:
        raise ValueError("conversion needs src_len >= 1 and tgt_len >= 1")
    sigma_t = torch.as_tensor(sigma, dtype=dtype, device=device)
    k = torch.arange(1, src_len + 1, dtype=dtype, device=device)
    j = torch.arange(1, tgt_len + 1, dtype=dtype, device=device).unsqueeze(1)
    ratio = src_len / tgt_len
    logits = -((k - ratio * j) ** 2) / (2.0 * sigma_t**2)
    return torch.softmax(logits, dim=-1)


def convert_length(h: Tensor, tgt_len: int, sigma: float | Tensor) -> Tensor:
    """Resample an (L, d) representation to (tgt_len, d)."""
    if h.ndim != 2 or h.shape[0] < 1:
        raise ValueError(f"expected a nonempty (L, d) matrix, got shape {tuple(h.shape)}")
    w = conversion_weights(h.shape[0], tgt_len, sigma, dtype=h.dtype, device=h.device)
    return w @ h


def batched_conversion_weights(
    src_lens: Tensor,
    tgt_lens: Tensor,
    sigma: Tensor,
    max_src_len: int,
    max_tgt_len: int,
    dtype: torch.dtype,
    device: torch.device | None = None,
) -> Tensor:
    """(B, max_tgt_len, max_src_len) weights; source positions past each row's
    true length get zero weight. Rows past a sequence's target length are
    well-formed but meant to be masked downstream."""
    k = torch.arange(1, max_src_len + 1, dtype=dtype, device=device).view(1, 1, -1)
    j = torch.arange(1, max_tgt_len + 1, dtype=dtype, device=device).view(1, -1, 1)
    ratio = (src_lens.to(dtype) / tgt_lens.to(dtype)).view(-1, 1, 1)
    logits = -((k - ratio * j) ** 2) / (2.0 * sigma**2)
    invalid = k > src_lens.to(dtype).view(-1, 1, 1)
    logits = logits.masked_fill(invalid, float("-inf"))
    return torch.softmax(logits, dim=-1)


@dataclass(frozen=True)
class InterpolatedState:
    """Mixed latent sequence the decoder conditions on."""

    vectors: Tensor  # (target_length, dim)
    alpha: float
    source_lengths: tuple[int, int] | None = None

    @property
    def target_length(self) -> int:
        return self.vectors.shape[0]


def interpolate_states(
    ha_conv: Tensor,
    hb_conv: Tensor,
    alpha: float,
    source_lengths: tuple[int, int] | None = None,
) -> InterpolatedState:
    """Elementwise alpha * Ha + (1 - alpha) * Hb of two equal-shape matrices."""
    alpha = check_alpha(alpha)
    if ha_conv.shape != hb_conv.shape:
        raise ValueError(
            f"shape mismatch: {tuple(ha_conv.shape)} vs {tuple(hb_conv.shape)}"
        )
    mixed = alpha * ha_conv + (1.0 - alpha) * hb_conv
    return InterpolatedState(mixed, alpha, source_lengths)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    dim: int = 128
    num_heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ffn_dim: int | None = None  # defaults to 4 * dim
    max_len: int = 64
    dropout: float = 0.0
    sigma_init: float = 1.0

    @property
    def resolved_ffn_dim(self) -> int:
        return self.ffn_dim if self.ffn_dim is not None else 4 * self.dim

    @property
    def max_decode_positions(self) -> int:
        return 2 * self.max_len + 4


def _softplus_inverse(value: float) -> float:
    return math.log(math.expm1(value))


class InterpolationModel(nn.Module):
    """Encoder, length converter (one trainable spread shared by both inputs),
    latent mixing, and causal decoder over the shared vocabulary."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.dim
        self.token_embedding = nn.Embedding(config.vocab_size, d, padding_idx=PAD_ID)
        self.encoder_positions = nn.Embedding(config.max_len, d)
        self.decoder_positions = nn.Embedding(config.max_decode_positions, d)
        enc_layer = nn.TransformerEncoderLayer(
            d_model=d,
            nhead=config.num_heads,
            dim_feedforward=config.resolved_ffn_dim,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            enc_layer, config.enc_layers, enable_nested_tensor=False
        )
        dec_layer = nn.TransformerDecoderLayer(
            d_model=d,
            nhead=config.num_heads,
            dim_feedforward=config.resolved_ffn_dim,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
            norm_first=True,
        )
        self.decoder = nn.TransformerDecoder(dec_layer, config.dec_layers)
        self.output_projection = nn.Linear(d, config.vocab_size)
        # Spread of the length-conversion attention, stored unconstrained and
        # mapped through softplus so it stays positive under gradient steps.
        self.raw_sigma = nn.Parameter(
            torch.tensor(_softplus_inverse(config.sigma_init))
        )

    def sigma(self) -> Tensor:
        return F.softplus(self.raw_sigma)

    # ------------------------------------------------------------------ #
    # encoding
    # ------------------------------------------------------------------ #

    def _check_ids(self, seq: TokenSequence) -> None:
        if len(seq) == 0:
            raise ValueError("cannot encode an empty sequence")
        if len(seq) > self.config.max_len:
            raise ValueError(
                f"sequence length {len(seq)} exceeds max_len {self.config.max_len}"
            )
        bad = [i for i in seq.ids if i >= self.config.vocab_size]
        if bad:
            raise ValueError(f"token id {bad[0]} out of range for vocab size "
                             f"{self.config.vocab_size}")

    def encode_batch(self, ids: Tensor, lengths: Tensor) -> Tensor:
        """Encode padded (B, L) ids; returns (B, L, dim). Rows at padded
        positions must be masked by the caller before use."""
        positions = torch.arange(ids.shape[1], device=ids.device)
        x = self.token_embedding(ids) + self.encoder_positions(positions)
        pad_mask = positions.unsqueeze(0) >= lengths.unsqueeze(1)
        return self.encoder(x, src_key_padding_mask=pad_mask)

    def encode(self, seq: TokenSequence) -> Tensor:
        """Encode one sequence to its (L, dim) representation."""
        self._check_ids(seq)
        device = self.raw_sigma.device
        ids = torch.tensor([seq.ids], dtype=torch.long, device=device)
        lengths = torch.tensor([len(seq)], dtype=torch.long, device=device)
        return self.encode_batch(ids, lengths)[0]

    # ------------------------------------------------------------------ #
    # decoding scores
    # ------------------------------------------------------------------ #

    def decode_logits(
        self,
        memory: Tensor,
        memory_lens: Tensor,
        tgt_in: Tensor,
        tgt_lens: Tensor | None = None,
    ) -> Tensor:
        """Causal decoder logits: memory (B, T, d), tgt_in (B, S) -> (B, S, V)."""
        b, s = tgt_in.shape
        device = tgt_in.device
        positions = torch.arange(s, device=device)
        y = self.token_embedding(tgt_in) + self.decoder_positions(positions)
        causal = torch.triu(torch.ones(s, s, dtype=torch.bool, device=device), 1)
        mem_positions = torch.arange(memory.shape[1], device=device)
        mem_pad = mem_positions.unsqueeze(0) >= memory_lens.unsqueeze(1)
        tgt_pad = None
        if tgt_lens is not None:
            tgt_pad = positions.unsqueeze(0) >= tgt_lens.unsqueeze(1)
        out = self.decoder(
            y,
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=tgt_pad,
            memory_key_padding_mask=mem_pad,
        )
        return self.output_projection(out)

    def sequence_logprobs(
        self,
        memory: Tensor,
        memory_lens: Tensor,
        targets: list[TokenSequence],
    ) -> Tensor:
        """Per-example log p(y | memory), summed over steps including the
        end-of-sequence factor. Returns a (B,) tensor with gradients."""
        if len(targets) != memory.shape[0]:
            raise ValueError("one target per memory row required")
        device = memory.device
        steps = [len(t) + 1 for t in targets]  # +1 for EOS
        s = max(steps)
        tgt_in = torch.full((len(targets), s), PAD_ID, dtype=torch.long, device=device)
        tgt_out = torch.full_like(tgt_in, PAD_ID)
        for i, t in enumerate(targets):
            tgt_in[i, 0] = BOS_ID
            tgt_in[i, 1 : len(t) + 1] = torch.tensor(t.ids, device=device)
            tgt_out[i, : len(t)] = torch.tensor(t.ids, device=device)
            tgt_out[i, len(t)] = EOS_ID
        step_lens = torch.tensor(steps, dtype=torch.long, device=device)
        logits = self.decode_logits(memory, memory_lens, tgt_in, step_lens)
        logps = F.log_softmax(logits, dim=-1)
        picked = logps.gather(-1, tgt_out.unsqueeze(-1)).squeeze(-1)
        valid = torch.arange(s, device=device).unsqueeze(0) < step_lens.unsqueeze(1)
        return (picked * valid).sum(dim=1)

    # ------------------------------------------------------------------ #
    # single-pair conveniences
    # ------------------------------------------------------------------ #

    def interpolate_pair(
        self, xa: TokenSequence, xb: TokenSequence, alpha: float
    ) -> InterpolatedState:
        """Clean (inference-mode) forward up to the mixed latent state."""
        alpha = check_alpha(alpha)
        ha = self.encode(xa)
        hb = self.encode(xb)
        target = interp_length(len(xa), len(xb), alpha)
        sigma = self.sigma()
        ca = convert_length(ha, target, sigma)
        cb = convert_length(hb, target, sigma)
        return interpolate_states(ca, cb, alpha, (len(xa), len(xb)))

    def decoder_logprob(self, state: InterpolatedState, y: TokenSequence) -> float:
        """log p(y | state) including the end-of-sequence factor."""
        self._check_ids(y)
        with torch.no_grad():
            memory = state.vectors.unsqueeze(0)
            memory_lens = torch.tensor([state.target_length], device=memory.device)
            return float(self.sequence_logprobs(memory, memory_lens, [y])[0])


# ---------------------------------------------------------------------- #
# checkpoints
# ---------------------------------------------------------------------- #


def save_checkpoint(path, model: InterpolationModel, vocab: Vocabulary) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "state_dict": model.state_dict(),
        "vocab_sha256": vocab.sha256(),
    }
    torch.save(payload, path)


def read_checkpoint_info(path) -> dict:
    data = torch.load(path, map_location="cpu", weights_only=True)
    if data.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {data.get('format_version')!r}"
        )
    return data


def load_checkpoint(path, vocab: Vocabulary) -> InterpolationModel:
    data = read_checkpoint_info(path)
    if data["vocab_sha256"] != vocab.sha256():
        raise ValueError(
            "vocabulary hash mismatch: checkpoint was trained with a different "
            "vocabulary"
        )
    config = ModelConfig(**data["config"])
    model = InterpolationModel(config)
    model.load_state_dict(data["state_dict"])
    model.eval()
    return model
