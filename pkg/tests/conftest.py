from collections import OrderedDict

import numpy as np
import pytest

from testreuse import Workbench
from testreuse.api.bandit import RewardSource
from testreuse.coverage import CoveragePointId, CoverageRow, Universe
from testreuse.data import Config, SuiteSpec

SMALL_LEVELS = (45.0, 50.0, 55.0)


class FixedRewards(RewardSource):
    """
    Rewards looked up in a table; unlisted arms earn nothing.
    """

    def __init__(self, rewards, context=None):
        self.rewards = dict(rewards)
        self.context = context
        self.queries = 0

    def reset(self, seed):
        pass

    def reward(self, test_id):
        self.queries += 1
        return self.rewards.get(test_id, 0.0)


def small_config(**overrides):
    settings = dict(
        k=10,
        gamma=3,
        n=400,
        f=0.2,
        levels=SMALL_LEVELS,
        theta=OrderedDict((l, 8.0) for l in SMALL_LEVELS),
        m=200,
        seeds=2,
        time_budget=5.0,
        thresholds=(50.0,)
    )
    settings.update(overrides)
    return Config(**settings)


def small_spec(**overrides):
    settings = dict(
        name='small',
        seed=7,
        universe_size=400,
        module_size=20,
        trainers=2,
        tests_per_trainer=60,
        bases_per_trainer=20,
        neighborhood_modules=3,
        min_neighborhood=4,
        baseline_budget=400
    )
    settings.update(overrides)
    return SuiteSpec(**settings)


def universe_of(size, module='core'):
    return Universe(CoveragePointId(module, i) for i in range(size))


def row_of(test_id, universe, hits):
    bits = np.zeros(len(universe), dtype=bool)
    bits[list(hits)] = True
    return CoverageRow(test_id, universe, bits)


@pytest.fixture
def workbench():
    return Workbench(small_config())


@pytest.fixture
def default_workbench():
    return Workbench()


@pytest.fixture
def suite(workbench):
    return workbench.harness.gen_synthetic_suite(small_spec())
