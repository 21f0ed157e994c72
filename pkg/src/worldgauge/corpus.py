"""Plain-text corpus files: one sequence per line, space-separated token names."""

from __future__ import annotations

from typing import Iterable, Sequence

from .automata import Alphabet, TokenSeq


def save_corpus(path, alphabet: Alphabet, sequences: Iterable[Sequence[int]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for seq in sequences:
            fh.write(alphabet.decode(seq) + "\n")
            n += 1
    return n


def load_corpus(path, alphabet: Alphabet) -> list[TokenSeq]:
    out: list[TokenSeq] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(alphabet.encode(line))
    return out
