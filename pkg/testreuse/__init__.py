"""
Schedules the reuse of prior-processor fuzzing tests on a new processor-under-test.
"""

import functools
from typing import Optional

import numpy as np

from testreuse.api.bandit import Bandit
from testreuse.api.coverage import Coverage
from testreuse.api.harness import Harness
from testreuse.api.minimizer import Minimizer
from testreuse.api.runtime import Runtime
from testreuse.api.trainer import Trainer
from testreuse.base import stable_hash
from testreuse.data import Config


class Workbench:

    def __init__(
        self,
        config=None,  # type: Optional[Config]
        seed=None  # type: Optional[int]
    ):
        # type: (...) -> None
        """
        Ties the configuration to the components that use it.

        :param config:

            Parameters shared by every component; the defaults when omitted.

        :param seed:

            The master seed every random stream is derived from; the configured `seed` when omitted.
        """
        self.config = (config or Config()).validate()
        self.seed = self.config.seed if seed is None else seed

    def rng(self, *key):
        # type: (*object) -> np.random.Generator
        """
        :return: A generator derived from the master seed and `key`, independent of every other key's.
        """
        return np.random.default_rng(np.random.SeedSequence([self.seed] + [stable_hash(k) for k in key]))

    @property
    @functools.lru_cache(maxsize=1)
    def coverage(self):
        return Coverage(self)

    @property
    @functools.lru_cache(maxsize=1)
    def minimizer(self):
        return Minimizer(self)

    @property
    @functools.lru_cache(maxsize=1)
    def bandit(self):
        return Bandit(self)

    @property
    @functools.lru_cache(maxsize=1)
    def trainer(self):
        return Trainer(self)

    @property
    @functools.lru_cache(maxsize=1)
    def runtime(self):
        return Runtime(self)

    @property
    @functools.lru_cache(maxsize=1)
    def harness(self):
        return Harness(self)


@functools.lru_cache()
def workbench(
    config_path: Optional[str]=None,
    seed: Optional[int]=None
) -> Workbench:
    return Workbench(
        config=Config.from_file(config_path) if config_path else None,
        seed=seed
    )
