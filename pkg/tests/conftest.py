import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

torch.set_num_threads(1)

from mmrsum.encoder import Dims
from mmrsum.synth import synth_corpus


@pytest.fixture(scope="session")
def tiny_dims() -> Dims:
    return Dims(emb_dim=8, filters=3, hidden=4)


@pytest.fixture(scope="session")
def small_sets():
    """Five compact sets with some duplication, shared across tests."""
    return synth_corpus(
        seed=11, n_sets=5, docs_per_set=3, sents_per_doc=5,
        planted_per_set=2, duplicate_rate=0.3,
    )
