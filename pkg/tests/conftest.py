import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pedalrl.controllers import load_setting
from pedalrl.episode import EnvParams
from pedalrl.harness import SUBJECTS
from pedalrl.plant import PlantParams, ReferenceTrajectory
from pedalrl.rewards import weights_for_setting


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def make_test_env(setting_id=2, **kwargs):
    setting = load_setting(setting_id)
    defaults = dict(
        plant=PlantParams(),
        reference=ReferenceTrajectory(),
        human=SUBJECTS["subject_1"],
        setting=setting,
        weights=weights_for_setting(setting),
    )
    defaults.update(kwargs)
    return EnvParams(**defaults)


@pytest.fixture
def env():
    return make_test_env()
