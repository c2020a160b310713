"""Templated synthetic sentences for demos, tests, and the bundled experiments.

The grammar is deliberately tiny (about 65 word types) so that a small model
trained for a few minutes on one CPU can fit it well.
"""
from __future__ import annotations

import argparse
import random

DETERMINERS = ["the", "a"]

NOUNS = [
    "cat", "dog", "bird", "horse", "farmer", "teacher", "child", "singer",
    "doctor", "pilot", "river", "garden", "house", "market", "story", "movie",
    "song", "dinner", "journey", "meeting",
]

VERBS = [
    "sees", "likes", "follows", "helps", "finds", "watches", "meets",
    "greets", "joins", "visits", "trusts", "remembers",
]

POSITIVE_ADJECTIVES = [
    "happy", "bright", "kind", "brave", "calm", "clever", "gentle",
    "friendly", "cheerful", "graceful",
]

NEGATIVE_ADJECTIVES = [
    "sad", "gloomy", "rude", "cruel", "tense", "foolish", "harsh",
    "hostile", "dreary", "clumsy",
]

ADVERBS = [
    "quickly", "slowly", "quietly", "loudly", "eagerly", "calmly",
    "rarely", "often",
]

ALL_WORDS = sorted(
    set(DETERMINERS) | set(NOUNS) | set(VERBS) | set(POSITIVE_ADJECTIVES)
    | set(NEGATIVE_ADJECTIVES) | set(ADVERBS) | {"was", "that", "and"}
)


def _noun_phrase(rng: random.Random) -> str:
    return f"{rng.choice(DETERMINERS)} {rng.choice(NOUNS)}"


def _adj_noun_phrase(rng: random.Random, adjectives: list[str]) -> str:
    return f"{rng.choice(DETERMINERS)} {rng.choice(adjectives)} {rng.choice(NOUNS)}"


def make_sentence(rng: random.Random, adjectives: list[str] | None = None) -> str:
    """One sentence; when `adjectives` is given, every adjective slot draws
    from that pool and the chosen template always contains at least one."""
    adj = adjectives if adjectives is not None else (
        POSITIVE_ADJECTIVES + NEGATIVE_ADJECTIVES
    )
    templates = [
        lambda: f"{_noun_phrase(rng)} was {rng.choice(adj)}",
        lambda: (f"{_noun_phrase(rng)} {rng.choice(VERBS)} that "
                 f"{_noun_phrase(rng)} was {rng.choice(adj)}"),
        lambda: f"{_adj_noun_phrase(rng, adj)} {rng.choice(VERBS)} {_noun_phrase(rng)}",
        lambda: f"{_noun_phrase(rng)} {rng.choice(VERBS)} {_adj_noun_phrase(rng, adj)}",
        lambda: f"{_noun_phrase(rng)} was {rng.choice(adj)} and {rng.choice(adj)}",
    ]
    if adjectives is None:
        templates += [
            lambda: f"{_noun_phrase(rng)} {rng.choice(VERBS)} {_noun_phrase(rng)}",
            lambda: (f"{_noun_phrase(rng)} {rng.choice(VERBS)} {_noun_phrase(rng)} "
                     f"{rng.choice(ADVERBS)}"),
            lambda: (f"{rng.choice(ADVERBS)} {_noun_phrase(rng)} "
                     f"{rng.choice(VERBS)} {_noun_phrase(rng)}"),
        ]
    return rng.choice(templates)()


def make_corpus(size: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [make_sentence(rng) for _ in range(size)]


def make_polarity_examples(size: int, seed: int = 0) -> list[tuple[str, int]]:
    """Balanced 2-class sentiment-style data: label 1 sentences use only
    positive adjectives, label 0 only negative ones."""
    rng = random.Random(seed)
    out: list[tuple[str, int]] = []
    for i in range(size):
        label = i % 2
        pool = POSITIVE_ADJECTIVES if label == 1 else NEGATIVE_ADJECTIVES
        out.append((make_sentence(rng, pool), label))
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="generate synthetic corpora for textmix demos"
    )
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument("--size", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--labeled", action="store_true",
        help="write TSV with a binary sentiment label instead of plain text",
    )
    args = parser.parse_args(argv)
    if args.size < 1:
        parser.error(f"--size must be >= 1, got {args.size}")
    with open(args.out, "w", encoding="utf-8") as fh:
        if args.labeled:
            for text, label in make_polarity_examples(args.size, args.seed):
                fh.write(f"{text}\t{label}\n")
        else:
            for line in make_corpus(args.size, args.seed):
                fh.write(line + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
