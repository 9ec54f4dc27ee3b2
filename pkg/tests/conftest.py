from __future__ import annotations

import pytest

from querygate.features import FeaturizerConfig
from querygate.model import Hyperparameters, LabeledExample, train
from querygate.simulator import CATEGORY_KEYWORDS, signature_token
from querygate.taxonomy import category_catalog

SMALL_DIM = 2**12


@pytest.fixture(scope="session")
def small_featurizer() -> FeaturizerConfig:
    return FeaturizerConfig(dim=SMALL_DIM)


def signature_training_set(per_category: int = 12) -> list[LabeledExample]:
    """Separable training set keyed on the simulator's signature tokens."""
    examples = []
    for c in category_catalog():
        kws = CATEGORY_KEYWORDS[c.id]
        for i in range(per_category):
            text = f"{signature_token(c)} {kws[i % len(kws)]} n{i}"
            examples.append(LabeledExample(text=text, label=c))
    return examples


@pytest.fixture(scope="session")
def sig_model(small_featurizer):
    """A model that reads the signature token; near-perfect on simulator text."""
    hp = Hyperparameters(learning_rate=0.5, epochs=200, seed=7)
    return train(signature_training_set(), hp, small_featurizer, model_version="sig-v1")
