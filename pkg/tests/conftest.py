import os

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("slow-box", deadline=None, max_examples=50)
hypothesis.settings.register_profile("default-local", deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default-local"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
