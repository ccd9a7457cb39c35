"""Dataset files, featurisation and batching."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .model import Batch, ModelConfig, pad_batch
from .text import Token, Vocabulary, build_vocab, strip_punctuation, tokenize, truncate
from .trees import (
    ConstituencyTree,
    TreeParseError,
    flat_fallback_tree,
    lowercase_leaves,
    merge_under_root,
    parse_bracketed,
    traverse,
)

REQUIRED_FIELDS = ("id", "text", "label")


class DatasetError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ":".join(str(p) for p in (path, line) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


@dataclass
class Sample:
    id: str
    text: str
    label: int
    trees: list[str] | None = None
    trees_without: list[str] | None = None

    def to_record(self) -> dict:
        rec = {"id": self.id, "text": self.text, "label": self.label}
        if self.trees:
            rec["trees"] = list(self.trees)
        if self.trees_without:
            rec["trees_without"] = list(self.trees_without)
        return rec


@dataclass
class Dataset:
    samples: list[Sample]
    num_classes: int = 2
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], self.num_classes, dict(self.meta))

    def head(self, n: int | None) -> "Dataset":
        return self if n is None else Dataset(self.samples[:n], self.num_classes, dict(self.meta))


def _parse_trees(value, name: str, path, lineno: int) -> list[str] | None:
    if value is None:
        return None
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DatasetError(f"field {name!r} must be a list of bracketed strings", path, lineno)
    for s in value:
        try:
            parse_bracketed(s)
        except TreeParseError as exc:
            raise DatasetError(f"bad tree in {name!r}: {exc}", path, lineno) from None
    return value or None


def load_dataset(path, num_classes: int | None = None) -> Dataset:
    """Read a JSON-lines dataset.

    An optional first line ``{"meta": {"num_classes": C, ...}}`` declares the
    class count; otherwise ``num_classes`` (default 2) applies.
    """
    path = Path(path)
    samples: list[Sample] = []
    lines: list[int] = []
    meta: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict):
                raise DatasetError("record must be a JSON object", path, lineno)
            if "meta" in rec and not samples and not meta:
                meta = dict(rec["meta"])
                continue
            for name in REQUIRED_FIELDS:
                if name not in rec:
                    raise DatasetError(f"missing required field {name!r}", path, lineno)
            label = rec["label"]
            if isinstance(label, bool) or not isinstance(label, int):
                raise DatasetError(f"label must be an integer, got {label!r}", path, lineno)
            samples.append(
                Sample(
                    id=str(rec["id"]),
                    text=str(rec["text"]),
                    label=label,
                    trees=_parse_trees(rec.get("trees"), "trees", path, lineno),
                    trees_without=_parse_trees(rec.get("trees_without"), "trees_without", path, lineno),
                )
            )
            lines.append(lineno)
    n_classes = int(meta.get("num_classes", num_classes or 2))
    for s, lineno in zip(samples, lines):
        if not 0 <= s.label < n_classes:
            raise DatasetError(f"label {s.label} outside [0, {n_classes})", path, lineno)
    return Dataset(samples, n_classes, meta)


def save_dataset(dataset: Dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": {**dataset.meta, "num_classes": dataset.num_classes}}) + "\n")
        for s in dataset:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")


def import_sst2_tsv(path, prefix: str = "sst2") -> Dataset:
    """Read the GLUE SST-2 layout: a ``sentence<TAB>label`` header then one row per sample."""
    samples = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["sentence", "label"]:
            raise DatasetError("expected a 'sentence\\tlabel' header", path, 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise DatasetError("expected sentence and label columns", path, lineno)
            try:
                label = int(row[1])
            except ValueError:
                raise DatasetError(f"label must be an integer, got {row[1]!r}", path, lineno) from None
            if label not in (0, 1):
                raise DatasetError(f"SST-2 labels are binary, got {label}", path, lineno)
            samples.append(Sample(f"{prefix}-{lineno - 1}", row[0], label))
    return Dataset(samples, 2, {"source": "sst2"})


# ---------------------------------------------------------------------------
# featurisation


@dataclass
class Example:
    id: str
    token_ids: list[int]
    tree_ids: list[int] | None
    label: int
    context: np.ndarray | None = None


def sample_tokens(sample: Sample, config: ModelConfig, strip: bool = False) -> list[Token]:
    tokens = tokenize(sample.text)
    if strip:
        tokens = strip_punctuation(tokens)
    return truncate(tokens, config.max_tokens) if tokens else tokens


def sample_tree(sample: Sample, tokens: Sequence[Token], strip: bool = False, use_gold: bool = True) -> ConstituencyTree:
    strings = sample.trees_without if strip else sample.trees
    if use_gold and strings:
        return merge_under_root([lowercase_leaves(parse_bracketed(s)) for s in strings])
    return flat_fallback_tree(tokens)


def featurize(
    sample: Sample,
    vocab: Vocabulary,
    config: ModelConfig,
    strip: bool = False,
    use_gold: bool = True,
    context: np.ndarray | None = None,
) -> Example:
    tokens = sample_tokens(sample, config, strip)
    if not tokens:
        raise ValueError(f"sample {sample.id!r} has no tokens{' after stripping punctuation' if strip else ''}")
    tree_ids = None
    if config.uses_tree:
        tree = sample_tree(sample, tokens, strip, use_gold)
        tree_ids = vocab.encode(traverse(tree, config.max_tree_nodes))
    return Example(sample.id, vocab.encode(tokens), tree_ids, sample.label, context)


def collate(examples: Sequence[Example]) -> Batch:
    token_ids, token_mask = pad_batch([e.token_ids for e in examples])
    batch = Batch(token_ids, token_mask, labels=np.array([e.label for e in examples]), ids=[e.id for e in examples])
    if examples[0].tree_ids is not None:
        batch.tree_ids, batch.tree_mask = pad_batch([e.tree_ids for e in examples])
    if examples[0].context is not None:
        batch.context = np.stack([e.context for e in examples])
    return batch


def batches(examples: Sequence[Example], batch_size: int, order: Sequence[int] | None = None) -> Iterator[Batch]:
    order = range(len(examples)) if order is None else order
    order = list(order)
    for start in range(0, len(order), batch_size):
        yield collate([examples[i] for i in order[start : start + batch_size]])


def vocab_for(dataset: Iterable[Sample], config: ModelConfig, min_count: int = 1) -> Vocabulary:
    """Vocabulary over training texts, plus every tree label and leaf they can produce."""
    corpus, labels = [], set()
    for s in dataset:
        tokens = sample_tokens(s, config)
        corpus.append(tokens)
        if config.uses_tree:
            for strip in (False, True):
                toks = sample_tokens(s, config, strip) if strip else tokens
                if toks:
                    labels.update(traverse(sample_tree(s, toks, strip), config.max_tree_nodes))
    if config.uses_tree:
        labels.update(("ROOT", "S", "TOK", "PUNCT"))
    return build_vocab(corpus, min_count, labels)


# ---------------------------------------------------------------------------
# id + vector files (embeddings out, external contexts in)


def write_vectors(path, ids: Sequence[str], vectors: np.ndarray):
    vectors = np.asarray(vectors)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"width {vectors.shape[1]}\n")
        for sid, vec in zip(ids, vectors):
            fh.write(sid + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def read_vectors(path) -> tuple[int, dict[str, np.ndarray]]:
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "width" or not header[1].isdigit():
            raise DatasetError("expected a 'width <d>' header line", path, 1)
        width = int(header[1])
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != width + 1:
                raise DatasetError(f"expected id plus {width} values, got {len(parts) - 1}", path, lineno)
            try:
                out[parts[0]] = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DatasetError(str(exc), path, lineno) from None
    return width, out
