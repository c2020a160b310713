"""Corpus ingestion, vocabulary construction, tokenization, and dataset loading.

Word-level whitespace tokenization is the default; anything fancier (subword
schemes etc.) can be plugged in through the ``splitter`` argument of
:func:`build_vocabulary` and :func:`tokenize`.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
MASK_TOKEN = "<mask>"

# Fixed order; ids 0..4 in every vocabulary.
SPECIAL_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN, MASK_TOKEN)
NUM_SPECIALS = len(SPECIAL_TOKENS)
PAD_ID, BOS_ID, EOS_ID, UNK_ID, MASK_ID = range(NUM_SPECIALS)
SPECIAL_IDS = frozenset(range(NUM_SPECIALS))

DEFAULT_MAX_LEN = 64

Splitter = Callable[[str], list[str]]


def whitespace_split(text: str) -> list[str]:
    return text.split()


@dataclass(frozen=True)
class TokenSequence:
    """A sequence of vocabulary ids. ``length`` counts content tokens; PAD is
    never stored inside a TokenSequence (padding happens at collate time)."""

    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(i < 0 for i in self.ids):
            raise ValueError("token ids must be non-negative")

    @property
    def length(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)


class Vocabulary:
    """Bijective token <-> id mapping with the five special tokens at ids 0..4."""

    def __init__(self, content_tokens: Sequence[str]):
        tokens = list(SPECIAL_TOKENS) + list(content_tokens)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens: list[str] = tokens
        self._token_to_id = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def id_of(self, token: str) -> int:
        """Id for ``token``, falling back to UNK."""
        return self._token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def sha256(self) -> str:
        payload = "\n".join(self.tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if len(lines) < NUM_SPECIALS:
            raise ValueError(f"vocabulary file {path} is truncated")
        if tuple(lines[:NUM_SPECIALS]) != SPECIAL_TOKENS:
            raise ValueError(
                f"vocabulary file {path} does not start with the special tokens "
                f"{SPECIAL_TOKENS}"
            )
        return cls(lines[NUM_SPECIALS:])


def build_vocabulary(
    corpus: Iterable[str],
    max_size: int,
    splitter: Splitter = whitespace_split,
) -> Vocabulary:
    """Build a vocabulary of the ``max_size - 5`` most frequent tokens.

    Frequency ties are broken by first occurrence in the corpus stream, so the
    result is deterministic for a fixed stream.
    """
    if max_size < 16:
        raise ValueError(f"max_size must be >= 16, got {max_size}")
    counts: Counter[str] = Counter()
    for line in corpus:
        counts.update(splitter(line))
    if not counts:
        raise ValueError("empty corpus")
    # dict order is first-occurrence order; a stable sort on -count keeps it
    # for ties.
    ranked = sorted(counts.items(), key=lambda kv: -kv[1])
    content = [tok for tok, _ in ranked[: max_size - NUM_SPECIALS]]
    return Vocabulary(content)


def tokenize(
    text: str,
    vocab: Vocabulary,
    max_len: int = DEFAULT_MAX_LEN,
    splitter: Splitter = whitespace_split,
) -> TokenSequence:
    """Tokenize ``text``; unknown words map to UNK, overlong input is truncated."""
    words = splitter(text)
    if not words:
        raise ValueError("empty input text")
    ids = tuple(vocab.id_of(w) for w in words[:max_len])
    return TokenSequence(ids)


def detokenize(seq: TokenSequence, vocab: Vocabulary) -> str:
    """Join content tokens with spaces, skipping any special ids."""
    return " ".join(vocab.token_of(i) for i in seq.ids if i not in SPECIAL_IDS)


TextOrPair = Union[TokenSequence, tuple[TokenSequence, TokenSequence]]


@dataclass(frozen=True)
class LabeledExample:
    text: TextOrPair
    label: int

    @property
    def is_pair(self) -> bool:
        return isinstance(self.text, tuple)


@dataclass(frozen=True)
class TextDataset:
    examples: tuple[LabeledExample, ...]
    num_classes: int
    task_kind: str  # "single" | "pair"

    def __post_init__(self) -> None:
        if self.task_kind not in ("single", "pair"):
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        if self.num_classes < 2:
            raise ValueError("labeled datasets need num_classes >= 2")

    def __len__(self) -> int:
        return len(self.examples)


def load_corpus(path: str | Path) -> list[str]:
    """Read an unlabeled corpus, one sentence per line; blank lines are skipped."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln for ln in (l.strip() for l in lines) if ln]


def _parse_label(raw, lineno: int, num_classes: int | None) -> int:
    try:
        label = int(raw)
    except (TypeError, ValueError):
        raise ValueError(f"line {lineno}: label {raw!r} is not an integer")
    if label < 0:
        raise ValueError(f"line {lineno}: label {label} is negative")
    if num_classes is not None and label >= num_classes:
        raise ValueError(
            f"line {lineno}: label {label} out of range for "
            f"num_classes={num_classes}"
        )
    return label


def load_labeled_dataset(
    path: str | Path,
    fmt: str,
    task_kind: str,
    vocab: Vocabulary,
    max_len: int = DEFAULT_MAX_LEN,
    num_classes: int | None = None,
    splitter: Splitter = whitespace_split,
) -> TextDataset:
    """Load a labeled dataset from TSV (``text<TAB>label``) or JSONL.

    JSONL records are ``{"text", "label"}`` for single-sentence tasks and
    ``{"premise", "hypothesis", "label"}`` for pair tasks. Example order
    follows file order. ``num_classes`` is inferred from the labels when not
    given; when given, out-of-range labels are an error.
    """
    if fmt not in ("tsv", "jsonl"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt == "tsv" and task_kind == "pair":
        raise ValueError("pair tasks require the jsonl format")

    examples: list[LabeledExample] = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if fmt == "tsv":
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'text<TAB>label'")
            text, label = parts
            seq: TextOrPair = tokenize(text, vocab, max_len, splitter)
            examples.append(
                LabeledExample(seq, _parse_label(label, lineno, num_classes))
            )
        else:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})")
            if "label" not in record:
                raise ValueError(f"line {lineno}: missing field 'label'")
            label = _parse_label(record["label"], lineno, num_classes)
            if task_kind == "pair":
                for key in ("premise", "hypothesis"):
                    if key not in record:
                        raise ValueError(f"line {lineno}: missing field {key!r}")
                pair = (
                    tokenize(record["premise"], vocab, max_len, splitter),
                    tokenize(record["hypothesis"], vocab, max_len, splitter),
                )
                examples.append(LabeledExample(pair, label))
            else:
                if "text" not in record:
                    raise ValueError(f"line {lineno}: missing field 'text'")
                seq = tokenize(record["text"], vocab, max_len, splitter)
                examples.append(LabeledExample(seq, label))

    if not examples:
        raise ValueError(f"no examples in {path}")

    if num_classes is None:
        num_classes = max(max(ex.label for ex in examples) + 1, 2)
    return TextDataset(tuple(examples), num_classes, task_kind)
