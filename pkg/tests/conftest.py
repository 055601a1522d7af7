import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.models.ce_instance import CeInstance
from app.models.dyadic import DyadicRational
from app.services.alpha_generator import AlphaSequence, ExplicitListGenerator
from app.services.ce_density import CeMeasure
from app.services.vlf_measure import VlfMeasure

# alpha = 1/4, 3/8, 7/16
THREE_STEP_ALPHAS = [DyadicRational(1, 2), DyadicRational(3, 3), DyadicRational(7, 4)]

LAB_CONFIG = """\
alpha:
  kind: explicit-list
  values: ["1/4", "3/8", "7/16", "15/32", "31/64"]
ce:
  members:
    - {n: 1, t: 2}
  nonmember: 0
  horizon: 4
  paired: true
experiment:
  max_depth: 8
  seed: 7
  samples: 2000
  eps: "1/2^24"
  trials: 40
  decode_batch: 2
  batch_prefixes: 2
"""


@pytest.fixture
def three_step_alphas():
    return AlphaSequence(ExplicitListGenerator(THREE_STEP_ALPHAS))


@pytest.fixture
def three_step_measure(three_step_alphas):
    return VlfMeasure(three_step_alphas)


@pytest.fixture
def small_instance():
    return CeInstance(members=((1, 2),), nonmember=0, horizon=4)


@pytest.fixture
def paired_measure(small_instance):
    return CeMeasure(small_instance, paired=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "lab.yaml"
    path.write_text(LAB_CONFIG)
    return path
