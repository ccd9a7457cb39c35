"""Text encoder, tree-traversal encoder, fusion MLP and classifier.

Three variants share this code:

* ``bigru``       text BiGRU, context = outputs at the last real token
* ``bigru_attn``  text BiGRU with attention pooling
* ``proposed``    attention text encoder fused with a BiGRU over the
                  pre-order traversal of the constituency tree
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .layers import AttentionParams, BiGruParams, LinearParams, attention_pool, bigru_forward, linear
from .tensor import Parameter, ShapeError, Tensor, as_tensor, concat, embedding, softmax, tanh
from .text import EmbeddingTable, Vocabulary

VARIANTS = ("bigru", "bigru_attn", "proposed")


@dataclass
class ModelConfig:
    variant: str = "proposed"
    embedding_dim: int = 100
    text_hidden: int = 256
    tree_hidden: int = 128
    fusion_hidden: int = 512
    fusion_out: int = 512
    classifier_hidden: tuple = (512, 128)
    num_classes: int = 2
    max_tokens: int = 128
    max_tree_nodes: int = 256
    external_context_dim: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        self.classifier_hidden = tuple(int(d) for d in self.classifier_hidden)
        dims = [self.embedding_dim, self.text_hidden, self.tree_hidden, self.fusion_hidden, self.fusion_out,
                self.num_classes, self.max_tokens, self.max_tree_nodes, *self.classifier_hidden]
        if any(d < 1 for d in dims):
            raise ValueError("all model dimensions must be positive")
        if self.external_context_dim < 0:
            raise ValueError("external_context_dim must be non-negative")
        if self.external_context_dim and self.variant != "proposed":
            raise ValueError("an external text context is only fused by the proposed variant")

    @property
    def uses_tree(self) -> bool:
        return self.variant == "proposed"

    @property
    def uses_text_encoder(self) -> bool:
        return self.external_context_dim == 0

    @property
    def text_context_dim(self) -> int:
        return self.external_context_dim or 2 * self.text_hidden

    @property
    def classifier_input(self) -> int:
        return self.fusion_out if self.uses_tree else 2 * self.text_hidden

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classifier_hidden"] = list(self.classifier_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelParams:
    embedding: Parameter
    text_bigru: BiGruParams | None = None
    attention: AttentionParams | None = None
    tree_bigru: BiGruParams | None = None
    fusion: list[LinearParams] = field(default_factory=list)
    classifier: list[LinearParams] = field(default_factory=list)

    @classmethod
    def init(cls, config: ModelConfig, table: EmbeddingTable) -> "ModelParams":
        if table.dim != config.embedding_dim:
            raise ShapeError(f"embedding table has dim {table.dim}, config wants {config.embedding_dim}")
        rng = np.random.default_rng(config.seed)
        p = cls(embedding=table.vectors)
        p.embedding.name = "embedding"
        if config.uses_text_encoder:
            p.text_bigru = BiGruParams.init(rng, config.embedding_dim, config.text_hidden, "text")
            if config.variant != "bigru":
                p.attention = AttentionParams.init(rng, 2 * config.text_hidden, "attention")
        if config.uses_tree:
            p.tree_bigru = BiGruParams.init(rng, config.embedding_dim, config.tree_hidden, "tree")
            fused_in = config.text_context_dim + 2 * config.tree_hidden
            p.fusion = [
                LinearParams.init(rng, fused_in, config.fusion_hidden, "fusion.0"),
                LinearParams.init(rng, config.fusion_hidden, config.fusion_out, "fusion.1"),
            ]
        dims = [config.classifier_input, *config.classifier_hidden, config.num_classes]
        p.classifier = [
            LinearParams.init(rng, a, b, f"classifier.{i}") for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
        ]
        return p

    def parameters(self) -> list[Parameter]:
        out = [self.embedding]
        for part in (self.text_bigru, self.attention, self.tree_bigru, *self.fusion, *self.classifier):
            if part is not None:
                out.extend(part.parameters())
        return out

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def parameter_count(config: ModelConfig, vocab_size: int) -> int:
    """Closed-form number of scalar parameters for ``config``."""
    def gru(inp, hid):
        return 3 * (hid * inp + hid * hid + hid)

    def lin(a, b):
        return a * b + b

    n = vocab_size * config.embedding_dim
    if config.uses_text_encoder:
        n += 2 * gru(config.embedding_dim, config.text_hidden)
        if config.variant != "bigru":
            n += 2 * config.text_hidden
    if config.uses_tree:
        n += 2 * gru(config.embedding_dim, config.tree_hidden)
        n += lin(config.text_context_dim + 2 * config.tree_hidden, config.fusion_hidden)
        n += lin(config.fusion_hidden, config.fusion_out)
    dims = [config.classifier_input, *config.classifier_hidden, config.num_classes]
    n += sum(lin(a, b) for a, b in zip(dims[:-1], dims[1:]))
    return n


@dataclass
class EnhancedRepresentation:
    text_context: Tensor
    tree_context: Tensor | None
    fused: Tensor | None

    @property
    def sentence_embedding(self) -> Tensor:
        return self.fused if self.fused is not None else self.text_context


def _batched(ids, mask):
    ids = np.asarray(ids, dtype=np.int64)
    unbatched = ids.ndim == 1
    if unbatched:
        ids = ids[None, :]
    mask = np.ones(ids.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(ids.shape)
    return ids, mask, unbatched


def _last_index(mask: np.ndarray) -> np.ndarray:
    lengths = mask.sum(axis=1)
    if (lengths == 0).any():
        raise ValueError("every sequence needs at least one unmasked position")
    return lengths - 1


def encode_text(params: ModelParams, config: ModelConfig, token_ids, mask=None) -> Tensor:
    """Context vector H' of width ``2 * text_hidden``."""
    ids, mask, unbatched = _batched(token_ids, mask)
    if ids.shape[1] > config.max_tokens:
        raise ValueError(f"{ids.shape[1]} tokens exceeds max_tokens={config.max_tokens}")
    last = _last_index(mask)
    H = bigru_forward(params.text_bigru, embedding(params.embedding, ids), mask)
    if config.variant == "bigru":
        ctx = H[np.arange(len(ids)), last]
    else:
        ctx = attention_pool(params.attention, H, mask)
    return ctx[0] if unbatched else ctx


def encode_tree(params: ModelParams, config: ModelConfig, traversal_ids, mask=None) -> Tensor:
    """Tree context H_T: final forward state concatenated with final backward state."""
    ids, mask, unbatched = _batched(traversal_ids, mask)
    if ids.shape[1] == 0:
        raise ValueError("empty tree traversal")
    if ids.shape[1] > config.max_tree_nodes:
        raise ValueError(f"{ids.shape[1]} nodes exceeds max_tree_nodes={config.max_tree_nodes}")
    last = _last_index(mask)
    H = bigru_forward(params.tree_bigru, embedding(params.embedding, ids), mask)
    h = config.tree_hidden
    fwd = H[np.arange(len(ids)), last, :h]
    bwd = H[:, 0, h:]
    ctx = concat([fwd, bwd], axis=-1)
    return ctx[0] if unbatched else ctx


def fuse(params: ModelParams, text_context, tree_context) -> Tensor:
    """``H_F = tanh(W2 tanh(W1 [H' ; H_T] + b1) + b2)``."""
    text_context, tree_context = as_tensor(text_context), as_tensor(tree_context)
    first, second = params.fusion
    if text_context.shape[:-1] != tree_context.shape[:-1]:
        raise ShapeError(f"cannot fuse contexts of shapes {text_context.shape} and {tree_context.shape}")
    joined = concat([text_context, tree_context], axis=-1)
    if joined.shape[-1] != first.weight.shape[1]:
        raise ShapeError(
            f"fusion expects {first.weight.shape[1]} input features, got {text_context.shape} + {tree_context.shape}"
        )
    o = tanh(linear(first, joined))
    return tanh(linear(second, o))


def classifier_logits(params: ModelParams, sentence_embedding) -> Tensor:
    x = as_tensor(sentence_embedding)
    *hidden, last = params.classifier
    for layer in hidden:
        x = tanh(linear(layer, x))
    return linear(last, x)


def classify(params: ModelParams, sentence_embedding) -> Tensor:
    return softmax(classifier_logits(params, sentence_embedding), axis=-1)


@dataclass
class Batch:
    token_ids: np.ndarray
    token_mask: np.ndarray
    tree_ids: np.ndarray | None = None
    tree_mask: np.ndarray | None = None
    context: np.ndarray | None = None
    labels: np.ndarray | None = None
    ids: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.token_ids)


def represent(params: ModelParams, config: ModelConfig, batch: Batch) -> EnhancedRepresentation:
    if config.uses_text_encoder:
        text_ctx = encode_text(params, config, batch.token_ids, batch.token_mask)
    else:
        if batch.context is None:
            raise ValueError("this model fuses an external text context but the batch carries none")
        if batch.context.shape[-1] != config.external_context_dim:
            raise ShapeError(
                f"external context width {batch.context.shape[-1]} != declared {config.external_context_dim}"
            )
        text_ctx = Tensor(batch.context)
    if not config.uses_tree:
        return EnhancedRepresentation(text_ctx, None, None)
    if batch.tree_ids is None:
        raise ValueError("the proposed variant needs a tree traversal for every sample")
    tree_ctx = encode_tree(params, config, batch.tree_ids, batch.tree_mask)
    return EnhancedRepresentation(text_ctx, tree_ctx, fuse(params, text_ctx, tree_ctx))


def forward_logits(params: ModelParams, config: ModelConfig, batch: Batch):
    rep = represent(params, config, batch)
    return classifier_logits(params, rep.sentence_embedding), rep


def forward(params: ModelParams, config: ModelConfig, batch: Batch):
    """Class probabilities and the intermediate representation for ``batch``."""
    logits, rep = forward_logits(params, config, batch)
    return softmax(logits, axis=-1), rep


@dataclass
class Model:
    """A configured parameter set together with the vocabulary it was trained on."""

    config: ModelConfig
    params: ModelParams
    vocab: Vocabulary

    @classmethod
    def create(cls, config: ModelConfig, vocab: Vocabulary, table: EmbeddingTable) -> "Model":
        return cls(config, ModelParams.init(config, table), vocab)

    def forward(self, batch: Batch):
        return forward(self.params, self.config, batch)

    def predict(self, batch: Batch) -> np.ndarray:
        probs, _ = self.forward(batch)
        return np.argmax(probs.data, axis=-1)

    def embed(self, batch: Batch) -> np.ndarray:
        return represent(self.params, self.config, batch).sentence_embedding.data


def pad_batch(sequences: Sequence[Sequence[int]]):
    if not sequences or any(len(s) == 0 for s in sequences):
        raise ValueError("cannot pad an empty sequence")
    width = max(len(s) for s in sequences)
    ids = np.zeros((len(sequences), width), dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=bool)
    for i, s in enumerate(sequences):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask
