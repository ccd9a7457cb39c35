"""Punctuation sensitivity: cosine similarity of embeddings with and without punctuation."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, Example, Sample, batches, collate, featurize
from .model import Model
from .text import make_token

RANDOM_MARKS = (".", ",", "!", "?")
HIST_BINS = 20


def cosine_similarity(a, b) -> float:
    a = np.asarray(getattr(a, "data", a), dtype=np.float64).ravel()
    b = np.asarray(getattr(b, "data", b), dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"vectors differ in length: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def _row_cosines(a: np.ndarray, b: np.ndarray) -> list[float]:
    return [cosine_similarity(x, y) for x, y in zip(a, b)]


@dataclass
class SimilarityReport:
    variant: str
    rows: list[tuple[str, float]] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def similarities(self) -> np.ndarray:
        return np.array([s for _, s in self.rows])

    def histogram(self, bins: int = HIST_BINS):
        counts, edges = np.histogram(self.similarities, bins=bins, range=(-1.0, 1.0))
        return counts, edges

    @property
    def mean(self) -> float:
        return float(self.similarities.mean())

    @property
    def min(self) -> float:
        return float(self.similarities.min())

    @property
    def max(self) -> float:
        return float(self.similarities.max())

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "count": len(self.rows),
            "skipped": len(self.skipped),
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
        }

    def write(self, out_dir, figure: bool = True) -> list[Path]:
        """Write ``similarity.csv``, ``histogram.csv`` and ``summary.csv`` (plus a PNG histogram)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "similarity.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "similarity"])
            w.writerows((sid, repr(sim)) for sid, sim in self.rows)
        counts, edges = self.histogram()
        with open(out / "histogram.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_low", "bin_high", "count"])
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([f"{lo:.2f}", f"{hi:.2f}", int(c)])
        with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "value"])
            w.writerows(self.summary().items())
        paths = [out / "similarity.csv", out / "histogram.csv", out / "summary.csv"]
        if figure:
            from .plotting import plot_similarity_histogram

            paths.append(plot_similarity_histogram(self, out / "histogram.png"))
        return paths


def _embed(model: Model, examples: Sequence[Example], batch_size: int) -> np.ndarray:
    return np.concatenate([model.embed(b) for b in batches(examples, batch_size)])


def punctuation_sensitivity_report(model: Model, dataset: Dataset, batch_size: int = 64) -> SimilarityReport:
    """Embed every text with and without its punctuation on the same model.

    Gold trees are used only when a sample carries trees for both versions;
    otherwise both versions fall back to flat trees so they stay comparable.
    Samples that are empty once stripped are skipped.
    """
    report = SimilarityReport(model.config.variant)
    with_ex, without_ex = [], []
    for s in dataset:
        gold = bool(s.trees and s.trees_without)
        try:
            wo = featurize(s, model.vocab, model.config, strip=True, use_gold=gold)
        except ValueError:
            report.skipped.append(s.id)
            continue
        with_ex.append(featurize(s, model.vocab, model.config, use_gold=gold))
        without_ex.append(wo)
    if not with_ex:
        raise ValueError("no sample survives punctuation stripping")
    sims = _row_cosines(_embed(model, with_ex, batch_size), _embed(model, without_ex, batch_size))
    report.rows = [(e.id, s) for e, s in zip(with_ex, sims)]
    return report


# ---------------------------------------------------------------------------
# case studies


@dataclass
class CasePair:
    id: str
    with_text: str
    without_text: str
    group: str = ""
    trees_with: list[str] | None = None
    trees_without: list[str] | None = None

    def samples(self) -> tuple[Sample, Sample]:
        gold = bool(self.trees_with and self.trees_without)
        return (
            Sample(self.id, self.with_text, 0, self.trees_with if gold else None),
            Sample(self.id, self.without_text, 0, self.trees_without if gold else None),
        )


def _pair(d: Mapping) -> CasePair:
    return CasePair(d["id"], d["with_text"], d["without_text"], d.get("group", ""), d.get("trees_with"), d.get("trees_without"))


def load_case_pairs(path=None, group: str | None = None) -> list[CasePair]:
    """Bundled case-study sentence pairs (or pairs from a JSON file of the same layout)."""
    if path is None:
        text = resources.files("punct_embed").joinpath("fixtures/case_studies.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    rows = doc["pairs"] if isinstance(doc, dict) else doc
    pairs = [_pair(d) for d in rows]
    return [p for p in pairs if group is None or p.group == group]


def figure_pair() -> CasePair:
    text = resources.files("punct_embed").joinpath("fixtures/case_studies.json").read_text(encoding="utf-8")
    return _pair(json.loads(text)["figure"])


@dataclass
class CaseStudyRow:
    id: str
    with_text: str
    without_text: str
    similarity: dict[str, float] = field(default_factory=dict)


def case_study(models: Mapping[str, Model], pairs: Sequence[CasePair]) -> list[CaseStudyRow]:
    """Similarity of each pair's two versions under every model."""
    if not models:
        raise ValueError("case_study needs at least one model")
    rows = [CaseStudyRow(p.id, p.with_text, p.without_text) for p in pairs]
    for name, model in models.items():
        if name != model.config.variant and name.split(":")[0] != model.config.variant:
            raise ValueError(f"model registered as {name!r} is a {model.config.variant!r} checkpoint")
        left, right = [], []
        for p in pairs:
            a, b = p.samples()
            left.append(featurize(a, model.vocab, model.config))
            right.append(featurize(b, model.vocab, model.config))
        sims = _row_cosines(model.embed(collate(left)), model.embed(collate(right)))
        for row, sim in zip(rows, sims):
            row.similarity[name] = sim
    return rows


def write_case_study(rows: Sequence[CaseStudyRow], path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "with", "without", "variant", "similarity"])
        for r in rows:
            for variant, sim in r.similarity.items():
                w.writerow([r.id, r.with_text, r.without_text, variant, repr(sim)])


def randomize_punctuation(text: str, rng: np.random.Generator) -> str:
    """Swap every punctuation character of ``text`` for a uniform draw from ``. , ! ?``."""
    return "".join(
        RANDOM_MARKS[int(rng.integers(len(RANDOM_MARKS)))] if make_token(ch).is_punctuation else ch
        for ch in text
    )
