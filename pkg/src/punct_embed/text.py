"""Tokenisation, punctuation stripping, vocabularies and pretrained vectors."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .tensor import Parameter

PUNCTUATION = frozenset(".,!?;:'\"()[]{}-—…“”‘’")
APOSTROPHES = "'’"
PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


class VectorFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Token:
    surface: str
    is_punctuation: bool

    def __str__(self):
        return self.surface


def is_punctuation(surface: str) -> bool:
    return bool(surface) and all(ch in PUNCTUATION for ch in surface)


def make_token(surface: str) -> Token:
    if not surface:
        raise ValueError("token surface must be nonempty")
    return Token(surface, is_punctuation(surface))


# a letter run, an apostrophe, then more letters: split before the apostrophe
_CLITIC = re.compile(rf"^([^\W\d_]+)([{APOSTROPHES}][^\W\d_]+)$")


def _split_chunk(chunk: str) -> list[str]:
    out: list[str] = []
    word: list[str] = []

    def flush():
        if word:
            out.append("".join(word))
            word.clear()

    for i, ch in enumerate(chunk):
        if ch in APOSTROPHES and word and i + 1 < len(chunk) and chunk[i + 1].isalpha() and word[-1].isalpha():
            # word-internal apostrophe: keep it attached to what follows and let
            # the clitic pass decide
            word.append(ch)
        elif ch in PUNCTUATION:
            flush()
            out.append(ch)
        else:
            word.append(ch)
    flush()

    tokens = []
    for piece in out:
        m = _CLITIC.match(piece)
        tokens.extend(m.groups() if m else (piece,))
    return tokens


def tokenize(text: str) -> list[Token]:
    """Lowercase, split on whitespace, then peel punctuation into single-character tokens.

    ``"Let's eat, grandma!"`` becomes ``let 's eat , grandma !``.
    """
    tokens: list[Token] = []
    for chunk in text.lower().split():
        tokens.extend(make_token(s) for s in _split_chunk(chunk))
    return tokens


def strip_punctuation(tokens: Sequence[Token]) -> list[Token]:
    return [t for t in tokens if not t.is_punctuation]


def truncate(tokens: Sequence, max_len: int = 128) -> list:
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    return list(tokens[:max_len])


def surfaces(tokens: Iterable[Token]) -> list[str]:
    return [t.surface for t in tokens]


@dataclass
class Vocabulary:
    itos: list[str] = field(default_factory=lambda: [PAD, UNK])
    stoi: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.itos[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with the PAD and UNK entries")
        self.stoi = {s: i for i, s in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("vocabulary entries must be unique")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token: str):
        return token in self.stoi

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Iterable) -> list[int]:
        return [self.index(t.surface if isinstance(t, Token) else t) for t in tokens]


def build_vocab(corpus: Iterable[Iterable], min_count: int = 1, labels: Iterable[str] = ()) -> Vocabulary:
    """Frequency-ordered vocabulary (ties broken lexicographically).

    ``labels`` are tree node labels and leaves; any not already present are
    appended in sorted order regardless of ``min_count``.
    """
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    counts: Counter = Counter()
    for tokens in corpus:
        counts.update(t.surface if isinstance(t, Token) else t for t in tokens)
    vocab = Vocabulary()
    for tok, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if n >= min_count and tok not in (PAD, UNK):
            vocab.add(tok)
    for label in sorted(set(labels)):
        vocab.add(label)
    return vocab


@dataclass
class EmbeddingTable:
    vectors: Parameter
    pretrained_mask: np.ndarray
    matched: int = 0
    unmatched: int = 0

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def random_embedding_table(vocab: Vocabulary, dim: int = 100, seed: int = 0) -> EmbeddingTable:
    rng = np.random.default_rng([seed, 1])
    vectors = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    vectors[PAD_ID] = 0.0
    return EmbeddingTable(
        Parameter(vectors, name="embedding"),
        np.zeros(len(vocab), dtype=bool),
        matched=0,
        unmatched=len(vocab) - 1,
    )


def load_pretrained_vectors(path, vocab: Vocabulary, dim: int = 100, seed: int = 0) -> EmbeddingTable:
    """Fill an embedding table from a GloVe-format text file.

    Rows for tokens absent from the file keep a seeded uniform [-0.1, 0.1]
    vector; the PAD row stays zero.
    """
    table = random_embedding_table(vocab, dim, seed)
    vectors, found = table.vectors.data, table.pretrained_mask
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise VectorFileError(f"expected token plus {dim} values, got {len(parts) - 1} values", lineno)
            idx = vocab.stoi.get(parts[0])
            if idx is None or idx == PAD_ID:
                continue
            try:
                vectors[idx] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise VectorFileError(str(exc), lineno) from None
            found[idx] = True
    table.matched = int(found.sum())
    table.unmatched = len(vocab) - 1 - table.matched
    return table
