"""Shared test helpers: compact trace literals and random corpora."""

from __future__ import annotations

import random

from simcamp.traces import Alphabet, InputTrace

ABCD = Alphabet.of("a", "b", "c", "d")
AB = Alphabet.of("a", "b")


def t(text: str, alphabet: Alphabet = ABCD) -> InputTrace:
    """'aab' -> the trace a,a,b (single-character tokens only)."""
    return InputTrace.from_tokens(alphabet, list(text))


def ts(*texts: str, alphabet: Alphabet = ABCD) -> list[InputTrace]:
    return [t(x, alphabet) for x in texts]


def random_traces(
    rng: random.Random,
    target: int,
    alphabet_size: int = 3,
    max_horizon: int = 8,
) -> tuple[Alphabet, list[InputTrace]]:
    """Up to ``target`` distinct random traces (fewer if the space is small)."""
    alphabet = Alphabet(tuple("abcd"[:alphabet_size]))
    seen: set[tuple[int, ...]] = set()
    out: list[InputTrace] = []
    for _ in range(6 * target):
        h = rng.randint(1, max_horizon)
        s = tuple(rng.randrange(alphabet_size) for _ in range(h))
        if s not in seen:
            seen.add(s)
            out.append(InputTrace(alphabet, s))
            if len(out) == target:
                break
    return alphabet, out
