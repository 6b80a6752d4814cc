import numpy as np
import pytest

from hornmine.memory import RuleMemory, ScoreParams
from hornmine.relational import build_vocab


@pytest.fixture
def vocab():
    # r0..r9 known (ids 0..9), 8 invented ids (10..17)
    return build_vocab([f"r{i}" for i in range(10)], n_invented=8)


@pytest.fixture
def params():
    return ScoreParams()


@pytest.fixture
def memory(vocab, params):
    return RuleMemory(vocab, params)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
