"""Small fixtures shared across test modules."""

from aem.config import RunConfig
from aem.data import DialoguePair, pairs_to_batch


def tiny_config(**overrides):
    base = dict(hidden_size=4, embed_size=3, vocab_size=7, batch_size=2,
                seed=3, epochs=1)
    base.update(overrides)
    return RunConfig(**base).validate()


def toy_pairs():
    return [DialoguePair([4, 5, 6], [6, 4]), DialoguePair([5, 4], [4, 5, 6])]


def toy_batch():
    return pairs_to_batch(toy_pairs())
