import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import toy_config
from punct_embed.analysis import (
    RANDOM_MARKS,
    CasePair,
    SimilarityReport,
    case_study,
    cosine_similarity,
    figure_pair,
    load_case_pairs,
    punctuation_sensitivity_report,
    randomize_punctuation,
    write_case_study,
)
from punct_embed.data import Dataset, Sample
from punct_embed.synthetic import keyword_corpus, review_corpus
from punct_embed.text import make_token
from punct_embed.training import build_model

vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=12).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)


def test_cosine_trivial_cases():
    assert abs(cosine_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) - 1.0) < 1e-12
    assert abs(cosine_similarity([1.0, 2.0], [-1.0, -2.0]) + 1.0) < 1e-12
    assert abs(cosine_similarity([1.0, 0.0], [0.0, 5.0])) < 1e-12
    assert abs(cosine_similarity([3.0, 4.0], [4.0, 3.0]) - 24 / 25) < 1e-12


def test_cosine_errors():
    with pytest.raises(ValueError, match="zero"):
        cosine_similarity([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="length"):
        cosine_similarity([1.0], [1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(vectors, st.data(), st.floats(1e-3, 1e3))
def test_cosine_symmetric_scale_invariant_bounded(a, data, k):
    b = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=len(a), max_size=len(a)).filter(
        lambda v: np.linalg.norm(v) > 1e-3))
    s = cosine_similarity(a, b)
    assert -1.0 <= s <= 1.0
    assert s == cosine_similarity(b, a)
    assert abs(cosine_similarity(np.multiply(a, k), b) - s) < 1e-9


@pytest.mark.parametrize("variant", ["bigru", "bigru_attn", "proposed"])
def test_no_punctuation_gives_unit_similarity(variant):
    ds = Dataset([Sample(str(i), t, i % 2) for i, t in enumerate(["good movie", "a bad plot", "fine cast here"])], 2)
    model = build_model(toy_config(variant), ds)
    rep = punctuation_sensitivity_report(model, ds)
    assert len(rep.rows) == 3
    assert np.all(np.abs(rep.similarities - 1.0) < 1e-12)


def test_baseline_bigru_changes_with_punctuation():
    ds = keyword_corpus(16)
    rep = punctuation_sensitivity_report(build_model(toy_config("bigru_attn"), ds), ds)
    assert rep.min < 1.0 - 1e-9


def test_report_skips_all_punctuation_samples():
    ds = Dataset([Sample("a", "good!", 1), Sample("b", "?!", 0)], 2)
    rep = punctuation_sensitivity_report(build_model(toy_config("bigru"), ds), ds)
    assert [r[0] for r in rep.rows] == ["a"] and rep.skipped == ["b"]
    with pytest.raises(ValueError):
        punctuation_sensitivity_report(build_model(toy_config("bigru"), ds), ds.subset([1]))


def test_report_uses_gold_trees_when_both_present():
    ds = review_corpus(12, seed=2)
    model = build_model(toy_config("proposed"), ds)
    gold = punctuation_sensitivity_report(model, ds)
    flat = punctuation_sensitivity_report(model, Dataset([Sample(s.id, s.text, s.label) for s in ds], 2))
    assert not np.allclose(gold.similarities, flat.similarities)


def test_histogram_and_files(tmp_path):
    rep = SimilarityReport("bigru", [("a", 1.0), ("b", -1.0), ("c", 0.0), ("d", 0.42), ("e", 0.99)])
    counts, edges = rep.histogram()
    assert counts.sum() == 5 and len(edges) == 21
    assert counts[-1] == 2 and counts[0] == 1
    paths = rep.write(tmp_path)
    assert [p.name for p in paths] == ["similarity.csv", "histogram.csv", "summary.csv", "histogram.png"]
    rows = list(csv.reader(open(tmp_path / "similarity.csv")))
    assert rows[0] == ["id", "similarity"] and rows[4] == ["d", "0.42"]
    hist = list(csv.reader(open(tmp_path / "histogram.csv")))
    assert hist[0] == ["bin_low", "bin_high", "count"] and hist[1] == ["-1.00", "-0.90", "1"]
    assert sum(int(r[2]) for r in hist[1:]) == 5
    summary = dict(list(csv.reader(open(tmp_path / "summary.csv")))[1:])
    assert summary["count"] == "5" and float(summary["min"]) == -1.0
    assert (tmp_path / "histogram.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_files_byte_identical(tmp_path):
    rep = SimilarityReport("bigru", [("a", 0.3), ("b", 0.7)])
    rep.write(tmp_path / "1")
    rep.write(tmp_path / "2")
    for name in ("similarity.csv", "histogram.csv", "summary.csv", "histogram.png"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


def test_meaning_changed_pairs_verbatim():
    pairs = load_case_pairs(group="meaning_changed")
    assert [(p.with_text, p.without_text) for p in pairs] == [
        ("Now, my friends, listen to me.", "Now my friends listen to me"),
        ("Help. wanted.", "Help wanted"),
        ("What? Is this thing called 'love'?", "What is this thing called love"),
        ("No, investments will be made in United States", "No investments will be made in United States"),
        ("If you go, pack your knitting needles.", "If you go pack your knitting needles"),
        ("When the plot kicks in, the film loses credibility.", "When the plot kicks in the film loses credibility"),
    ]


def test_all_pairs_ship_consistent_gold_trees():
    from punct_embed.text import surfaces, tokenize
    from punct_embed.trees import parse_bracketed

    pairs = load_case_pairs() + [figure_pair()]
    assert len(pairs) == 19
    assert {p.group for p in pairs[:18]} == {"meaning_changed", "meaning_preserved", "random_punctuation"}
    for p in pairs:
        for text, trees in ((p.with_text, p.trees_with), (p.without_text, p.trees_without)):
            leaves = [w for t in trees for w in parse_bracketed(t).leaves()]
            assert leaves == surfaces(tokenize(text)), p.id


def test_case_study_identical_strings_and_output(tmp_path):
    ds = keyword_corpus(8)
    models = {v: build_model(toy_config(v), ds) for v in ("bigru_attn", "proposed")}
    pairs = [CasePair("same", "a good film.", "a good film."), CasePair("diff", "a good film.", "a good film")]
    rows = case_study(models, pairs)
    assert all(abs(rows[0].similarity[v] - 1.0) < 1e-12 for v in models)
    assert rows[1].similarity["bigru_attn"] < 1.0
    write_case_study(rows, tmp_path / "cs.csv")
    lines = list(csv.reader(open(tmp_path / "cs.csv")))
    assert lines[0] == ["id", "with", "without", "variant", "similarity"]
    assert lines[1][:4] == ["same", "a good film.", "a good film.", "bigru_attn"]
    assert len(lines) == 5


def test_case_study_rejects_mislabelled_model():
    m = build_model(toy_config("bigru"), keyword_corpus(4))
    with pytest.raises(ValueError):
        case_study({"proposed": m}, load_case_pairs()[:1])
    assert "bigru:seed1" in case_study({"bigru:seed1": m}, load_case_pairs()[:1])[0].similarity


def test_randomize_punctuation_seeded():
    text = "Now, my friends, listen to me."
    a = randomize_punctuation(text, np.random.default_rng(3))
    assert a == randomize_punctuation(text, np.random.default_rng(3))
    assert len(a) == len(text)
    for x, y in zip(text, a):
        if make_token(x).is_punctuation:
            assert y in RANDOM_MARKS
        else:
            assert x == y
    outs = {randomize_punctuation(text, np.random.default_rng(s)) for s in range(10)}
    assert len(outs) > 1
