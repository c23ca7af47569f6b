import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from helpers import cat_lexicon  # noqa: E402


@pytest.fixture
def cat():
    return cat_lexicon()
