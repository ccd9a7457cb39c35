import numpy as np
import pytest

from punct_embed.data import Dataset, Sample
from punct_embed.model import ModelConfig

TOY_DIMS = dict(embedding_dim=6, text_hidden=4, tree_hidden=3, fusion_hidden=8, fusion_out=5, classifier_hidden=(6, 4))


def toy_config(variant="proposed", **kw):
    return ModelConfig(variant, **{**TOY_DIMS, **kw})


@pytest.fixture
def tiny_dataset():
    texts = [
        ("a", "What a great film!", 1),
        ("b", "The plot, sadly, is dull.", 0),
        ("c", "It's charming and funny.", 1),
        ("d", "Boring... really boring?", 0),
        ("e", "Well-made, moving drama.", 1),
        ("f", "A clumsy, lifeless mess.", 0),
    ]
    return Dataset([Sample(i, t, y) for i, t, y in texts], 2)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
