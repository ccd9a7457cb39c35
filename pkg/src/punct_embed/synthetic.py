"""Seeded generators for SST-2-style review corpora with gold constituency trees.

Sentences are built top-down from a small review grammar, so every sample
carries a bracketed tree for its punctuated text and, by pruning the
punctuation leaves, one for the stripped text. Polarity comes from the
evaluative adjectives and verbs, flipped by negation; after a contrastive
"but" the second clause decides. Punctuation is sprinkled independently of
the label.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset, Sample
from .text import surfaces, tokenize
from .trees import ConstituencyTree as T, prune_punctuation, render_bracketed

POSITIVE = ["wonderful", "gorgeous", "moving", "funny", "brilliant", "charming", "delightful", "touching",
            "clever", "absorbing", "engaging", "thoughtful", "beautiful", "powerful", "witty", "enjoyable",
            "superb", "lovely", "smart", "fresh", "inventive", "heartfelt", "compelling", "graceful"]
NEGATIVE = ["dull", "boring", "tedious", "awful", "clumsy", "bland", "lifeless", "pointless", "silly",
            "predictable", "shallow", "tiresome", "messy", "lame", "forgettable", "stale", "flat", "dreary",
            "painful", "sloppy", "hollow", "pretentious", "annoying", "listless"]
# (third person, base form)
POS_VERBS = [("delights", "delight"), ("charms", "charm"), ("succeeds", "succeed"), ("impresses", "impress"),
             ("soars", "soar"), ("sparkles", "sparkle")]
NEG_VERBS = [("fails", "fail"), ("drags", "drag"), ("disappoints", "disappoint"), ("stumbles", "stumble"),
             ("falters", "falter"), ("bores", "bore")]
NOUNS = ["movie", "film", "story", "plot", "script", "performance", "cast", "comedy", "drama", "thriller",
         "picture", "screenplay", "ending", "director", "soundtrack", "dialogue", "premise", "sequel",
         "romance", "documentary", "character", "acting", "production", "narrative"]
NEUTRAL_ADJ = ["strange", "long", "old", "new", "quiet", "familiar", "french", "small", "animated", "sprawling"]
ADVERBS = ["deeply", "truly", "rather", "often", "quite", "gorgeously", "strangely", "remarkably", "oddly",
           "mostly", "thoroughly", "surprisingly"]
LINK_VERBS = ["is", "feels", "seems", "remains", "looks", "proves"]
NAMES = ["heaven", "moonlight", "grandma", "solaris", "arcadia", "juniper", "marlowe", "hollywood"]
SENTENCE_ADVERBS = ["now", "honestly", "still", "ultimately", "frankly", "sadly", "happily", "overall"]
INTERJECTIONS = ["well", "no", "yes", "oh", "wow"]
HYPHENATED = {1: [("heart", "warming", "NN", "VBG"), ("well", "made", "RB", "VBN"), ("crowd", "pleasing", "NN", "VBG")],
              0: [("mind", "numbing", "NN", "VBG"), ("half", "baked", "RB", "VBN"), ("by", "numbers", "IN", "NNS")]}
SUBORDINATES = [
    ("when", "WRB", [("DT", "the"), ("NN", "plot"), ("VBZ", "kicks"), ("RP", "in")]),
    ("if", "IN", [("PRP", "you"), ("VBP", "go")]),
    ("while", "IN", [("DT", "the"), ("NN", "cast"), ("VBZ", "tries")]),
    ("once", "IN", [("DT", "the"), ("NN", "music"), ("VBZ", "starts")]),
    ("as", "IN", [("DT", "the"), ("NN", "story"), ("VBZ", "unfolds")]),
]


def _leaf(tag: str, word: str) -> T:
    return T(tag, [T(word)])


class _Gen:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def pick(self, items):
        return items[int(self.rng.integers(len(items)))]

    def coin(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def noun_phrase(self) -> T:
        r = self.rng.random()
        if r < 0.15:
            return T("NP", [_leaf("PRP", "it")])
        if r < 0.25:
            name = self.pick(NAMES)
            if self.coin(0.5):
                return T("NP", [_leaf("``", '"'), _leaf("NNP", name), _leaf("''", '"')])
            return T("NP", [_leaf("NNP", name)])
        kids = [_leaf("DT", self.pick(["the", "this", "a"]))]
        if self.coin(0.35):
            kids.append(_leaf("JJ", self.pick(NEUTRAL_ADJ)))
        kids.append(_leaf("NN", self.pick(NOUNS)))
        np_ = T("NP", kids)
        if self.coin(0.15):
            np_ = T("NP", [np_, T("PP", [_leaf("IN", "of"), T("NP", [_leaf("DT", "the"), _leaf("NN", self.pick(NOUNS))])])])
        return np_

    def adjective_phrase(self, polarity: int) -> T:
        if self.coin(0.12):
            a, b, ta, tb = self.pick(HYPHENATED[polarity])
            return T("ADJP", [_leaf(ta, a), _leaf("HYPH", "-"), _leaf(tb, b)])
        word = self.pick(POSITIVE if polarity else NEGATIVE)
        if self.coin(0.4):
            return T("ADJP", [_leaf("RB", self.pick(ADVERBS)), _leaf("JJ", word)])
        if self.coin(0.15):
            # coordination comma is stylistic: writers drop it or use "and"
            other = self.pick(POSITIVE if polarity else NEGATIVE)
            mid = self.rng.random()
            glue = [_leaf(",", ",")] if mid < 0.55 else [_leaf("CC", "and")] if mid < 0.8 else []
            return T("ADJP", [_leaf("JJ", word), *glue, _leaf("JJ", other)])
        return T("ADJP", [_leaf("JJ", word)])

    def clause(self, polarity: int) -> T:
        """A simple S whose polarity is ``polarity`` after any negation."""
        negate = self.coin(0.2)
        surface = 1 - polarity if negate else polarity
        subject = self.noun_phrase()
        if self.coin(0.25):
            third, base = self.pick(POS_VERBS if surface else NEG_VERBS)
            if negate:
                vp = T("VP", [_leaf("VBZ", "does"), _leaf("RB", "not"), T("VP", [_leaf("VB", base)])])
            else:
                vp = T("VP", [_leaf("VBZ", third)])
        else:
            kids = [_leaf("VBZ", self.pick(LINK_VERBS))]
            if negate:
                kids.append(_leaf("RB", "not"))
            kids.append(self.adjective_phrase(surface))
            vp = T("VP", kids)
        if subject.children[0].label == "PRP" and self.coin(0.3) and vp.children[0].children[0].label == "is":
            # it is -> it 's
            vp.children[0] = _leaf("VBZ", "'s")
        return T("S", [subject, vp])

    def sentence(self, polarity: int, final: bool = True) -> T:
        r = self.rng.random()
        if r < 0.25:
            # contrast: the clause after "but" carries the label
            parts = [self.clause(1 - polarity)]
            if self.coin(0.7):
                parts.append(_leaf(",", ","))
            parts += [_leaf("CC", "but"), self.clause(polarity)]
            s = T("S", parts)
        elif r < 0.45:
            pre_kind = self.rng.random()
            if pre_kind < 0.4:
                pre = T("ADVP", [_leaf("RB", self.pick(SENTENCE_ADVERBS))])
            elif pre_kind < 0.7:
                pre = T("INTJ", [_leaf("UH", self.pick(INTERJECTIONS))])
            else:
                word, tag, rest = self.pick(SUBORDINATES)
                pre = T("SBAR", [_leaf(tag, word), T("S", [_leaf(t, w) for t, w in rest])])
            core = self.clause(polarity)
            parts = [pre] + ([_leaf(",", ",")] if self.coin(0.75) else []) + core.children
            s = T("S", parts)
        else:
            s = self.clause(polarity)
        end = self.rng.random() * (0.8 if not final else 1.0)
        if end < 0.6:
            s.children.append(_leaf(".", "."))
        elif end < 0.75:
            s.children.append(_leaf(".", "!"))
        elif end < 0.8:
            s.children.append(_leaf(".", "?"))
        return s


def _detokenize(words: list[str]) -> str:
    out = ""
    quote_open = False
    glue_next = False
    for w in words:
        if w == '"':
            if quote_open:
                out += w
            else:
                out += (" " if out else "") + w
                glue_next = True
            quote_open = not quote_open
            continue
        if w in {",", ".", "!", "?", ";", ":"} or w.startswith("'") or w == "-":
            out += w
            glue_next = w == "-"
            continue
        out += w if (glue_next or not out) else " " + w
        glue_next = False
    return out


def _capitalise(text: str) -> str:
    for i, ch in enumerate(text):
        if ch.isalpha():
            return text[:i] + ch.upper() + text[i + 1 :]
    return text


def review_corpus(n: int, seed: int = 0, prefix: str = "syn", multi_sentence: float = 0.25) -> Dataset:
    """``n`` balanced SST-2-format samples with gold trees for both text versions."""
    gen = _Gen(np.random.default_rng([seed, 7]))
    samples = []
    while len(samples) < n:
        label = len(samples) % 2 if gen.coin(0.5) else 1 - len(samples) % 2
        second = gen.coin(multi_sentence)
        trees = [gen.sentence(label, final=not second)]
        if second:
            trees.append(gen.sentence(label))
        words = [w for t in trees for w in t.leaves()]
        text = " ".join(_capitalise(_detokenize(t.leaves())) for t in trees)
        if surfaces(tokenize(text)) != words:
            continue
        pruned = [p for p in (prune_punctuation(t) for t in trees) if p is not None]
        samples.append(
            Sample(
                id=f"{prefix}-{len(samples)}",
                text=text,
                label=label,
                trees=[render_bracketed(t) for t in trees],
                trees_without=[render_bracketed(t) for t in pruned],
            )
        )
    return Dataset(samples, 2, {"source": "synthetic-review", "seed": seed})


def keyword_corpus(n: int = 32, seed: int = 0) -> Dataset:
    """Tiny corpus whose label is fixed by a single sentiment keyword per text."""
    rng = np.random.default_rng([seed, 11])
    pos, neg = ["good", "great", "fine", "nice"], ["bad", "awful", "poor", "weak"]
    templates = ["the {n} was {k}.", "a {k} {n}!", "what a {k} {n}, honestly.", "this {n} is {k}"]
    nouns = ["movie", "film", "plot", "cast", "script", "ending"]
    samples = []
    for i in range(n):
        label = i % 2
        word = (pos if label else neg)[int(rng.integers(4))]
        text = templates[int(rng.integers(len(templates)))].format(n=nouns[int(rng.integers(len(nouns)))], k=word)
        samples.append(Sample(f"kw-{i}", text, label))
    return Dataset(samples, 2, {"source": "synthetic-keyword", "seed": seed})
