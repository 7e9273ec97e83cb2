import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fianet.lexicon import (default_spatial_lexicon, refsegrs_category_lexicon,
                            synthetic_category_lexicon)
from fianet.synth import generate_split


@pytest.fixture(scope="session")
def refsegrs_lex():
    return refsegrs_category_lexicon()


@pytest.fixture(scope="session")
def spatial_lex():
    return default_spatial_lexicon()


@pytest.fixture(scope="session")
def synth_lex():
    return synthetic_category_lexicon()


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """8-sample synthetic split reused by the harness tests."""
    root = tmp_path_factory.mktemp("data") / "tiny"
    generate_split(8, seed=7, out_dir=root)
    return root
