"""Splitting, mini-batch Adam training with cross-entropy, and evaluation."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, Example, batches, featurize, vocab_for
from .model import Model, ModelConfig, forward_logits
from .tensor import Parameter, Tape, log_softmax
from .text import EmbeddingTable, Vocabulary, random_embedding_table

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class SplitSpec:
    k: int = 10
    ratios: tuple = (45, 5, 50)
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.ratios) != 3 or sum(self.ratios) != 100 or min(self.ratios) < 0:
            raise ValueError(f"train/val/test ratios must be three non-negative percentages summing to 100, got {self.ratios}")


def make_splits(n: int, spec: SplitSpec = SplitSpec()) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """``k`` independent seeded shuffles of ``range(n)`` cut at the train/val/test ratios.

    Train and validation sizes are floored; the test set takes the remainder.
    """
    if n < spec.k:
        raise ValueError(f"dataset of {n} samples cannot be split into {spec.k} folds")
    n_train = n * spec.ratios[0] // 100
    n_val = n * spec.ratios[1] // 100
    folds = []
    for fold in range(spec.k):
        perm = np.random.default_rng([spec.seed, fold]).permutation(n)
        folds.append((np.sort(perm[:n_train]), np.sort(perm[n_train : n_train + n_val]), np.sort(perm[n_train + n_val :])))
    return folds


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int | None = 5
    target_accuracy: float | None = None
    min_count: int = 1
    threads: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.eps <= 0:
            raise ValueError("learning_rate, batch_size, max_epochs and eps must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


class Adam:
    def __init__(self, params: Sequence[Parameter], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float

    def line(self) -> str:
        return f"{self.epoch},{self.train_loss:.6f},{self.val_acc:.6f}"


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def lines(self) -> list[str]:
        return ["epoch,train_loss,val_acc"] + [r.line() for r in self.records]

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def featurize_all(dataset: Dataset, model: Model, threads: int = 1, contexts: Mapping[str, np.ndarray] | None = None,
                  **kw) -> list[Example]:
    """Featurize every sample; ``contexts`` maps sample ids to external text contexts when the model fuses one."""
    wants = model.config.external_context_dim > 0
    if wants and contexts is None:
        raise ValueError("this model fuses an external text context; pass one vector per sample id")

    def one(s):
        ctx = None
        if wants:
            if s.id not in contexts:
                raise ValueError(f"no external context for sample {s.id!r}")
            ctx = np.asarray(contexts[s.id], dtype=np.float64)
        return featurize(s, model.vocab, model.config, context=ctx, **kw)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, dataset))
    return [one(s) for s in dataset]


def cross_entropy(logits, labels: np.ndarray):
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    logp = log_softmax(logits, axis=-1)
    picked = logp[np.arange(len(labels)), np.asarray(labels)]
    return -picked.mean()


def _mean_loss(model: Model, examples: Sequence[Example], batch_size: int) -> float:
    total = 0.0
    for batch in batches(examples, batch_size):
        logits, _ = forward_logits(model.params, model.config, batch)
        total += cross_entropy(logits, batch.labels).item() * len(batch)
    return total / len(examples)


def _accuracy(model: Model, examples: Sequence[Example], batch_size: int) -> float:
    correct = 0
    for batch in batches(examples, batch_size):
        correct += int((model.predict(batch) == batch.labels).sum())
    return correct / len(examples)


def evaluate_accuracy(model: Model, dataset: Dataset, batch_size: int = 64, contexts=None) -> float:
    """Fraction of samples whose argmax class (lowest index on ties) equals the label."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return _accuracy(model, featurize_all(dataset, model, contexts=contexts), batch_size)


def build_model(config: ModelConfig, train_set: Dataset, vocab: Vocabulary | None = None,
                table: EmbeddingTable | None = None, min_count: int = 1) -> Model:
    vocab = vocab or vocab_for(train_set, config, min_count)
    table = table or random_embedding_table(vocab, config.embedding_dim, config.seed)
    return Model.create(config, vocab, table)


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_set: Dataset,
    val_set: Dataset | None = None,
    model: Model | None = None,
    contexts: Mapping[str, np.ndarray] | None = None,
) -> tuple[Model, TrainingLog]:
    """Minimise cross-entropy with Adam; returns the best-validation-accuracy parameters.

    Without ``val_set`` the training set doubles as the selection set. The log
    starts with an epoch-0 row measured before any update.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if model_config.num_classes != train_set.num_classes:
        raise ValueError(f"model has {model_config.num_classes} classes, dataset declares {train_set.num_classes}")
    model = model or build_model(model_config, train_set, min_count=train_config.min_count)
    train_ex = featurize_all(train_set, model, train_config.threads, contexts)
    val_ex = featurize_all(val_set, model, train_config.threads, contexts) if val_set is not None and len(val_set) else train_ex

    opt = Adam(model.params.parameters(), train_config.learning_rate, train_config.beta1, train_config.beta2, train_config.eps)
    bs = train_config.batch_size
    history = TrainingLog()
    best_acc = _accuracy(model, val_ex, bs)
    history.records.append(EpochRecord(0, _mean_loss(model, train_ex, bs), best_acc))
    best = [p.data.copy() for p in opt.params]
    stale = 0

    for epoch in range(1, train_config.max_epochs + 1):
        order = np.random.default_rng([train_config.seed, epoch]).permutation(len(train_ex))
        total = 0.0
        for bi, batch in enumerate(batches(train_ex, bs, order)):
            opt.zero_grad()
            with Tape() as tape:
                logits, _ = forward_logits(model.params, model.config, batch)
                loss = cross_entropy(logits, batch.labels)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, batch {bi} (samples {', '.join(batch.ids[:5])}...)"
                )
            tape.backward(loss)
            opt.step()
            total += value * len(batch)
        acc = _accuracy(model, val_ex, bs)
        history.records.append(EpochRecord(epoch, total / len(train_ex), acc))
        log.info("epoch %d loss %.4f val_acc %.4f", epoch, total / len(train_ex), acc)
        if acc > best_acc:
            best_acc, stale = acc, 0
            best = [p.data.copy() for p in opt.params]
            history.best_epoch = epoch
        else:
            stale += 1
        if train_config.target_accuracy is not None and acc >= train_config.target_accuracy:
            break
        if train_config.patience is not None and stale >= train_config.patience:
            break

    for p, data in zip(opt.params, best):
        p.data[...] = data
    return model, history
