"""
This module describes the JSON data types used by `testreuse`: tests, trained test lists and models, minimizer
results, configuration and synthetic suite specs.
"""

import math
from collections import OrderedDict
from enum import Enum
from json import loads
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from testreuse.base import JSONArray, JSONObject
from testreuse.errors import ConfigError, StructuralError, SuiteSpecError

SCHEMA_VERSION = 1


def level_key(level):
    # type: (float) -> str
    """
    Formats a coverage context level (a percentage) for use as a JSON object key: 55.0 -> "55", 62.5 -> "62.5".
    """
    return '%g' % level


class TestKind(str, Enum):

    __test__ = False

    VULNERABILITY = 'vulnerability'
    COVERAGE = 'coverage'


class Test(JSONObject):
    """
    A member of a prior-processor corpus, a mutant derived from one, or a test produced by a fuzzer's native seed
    generation.
    """

    __test__ = False

    _keys_attributes = OrderedDict([
        ('id', 'test_id'),
        ('origin', 'origin'),
        ('kind', 'kind'),
        ('payload', 'payload'),
        ('parent', 'parent'),
        ('mutantIndex', 'mutant_index')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        test_id=None,  # type: Optional[str]
        origin=None,  # type: Optional[str]
        kind=TestKind.COVERAGE,  # type: TestKind
        payload=b'',  # type: bytes
        parent=None,  # type: Optional[str]
        mutant_index=None  # type: Optional[int]
    ):
        """
        :param test_id:

            Unique within a corpus.

        :param origin:

            The name of the processor the test was generated on.

        :param kind:

            `TestKind.VULNERABILITY` for tests that trigger known vulnerabilities, `TestKind.COVERAGE` for tests kept
            because they improved coverage.

        :param payload:

            Opaque bytes standing in for the instruction-sequence binary.

        :param parent:

            (optional) For mutants, the id of the test this one was derived from.

        :param mutant_index:

            (optional) For mutants, 1 for the first mutant of `parent`, 2 for the second and so on.
        """
        self.test_id = test_id
        self.origin = origin
        self.kind = TestKind(kind)
        self.payload = payload
        self.parent = parent
        self.mutant_index = mutant_index
        if data is not None:
            self.data = data

    @property
    def data(self):
        d = super().data
        d['payload'] = self.payload.hex()
        return d

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        for k, v in data.items():
            if v is None:
                continue
            if k == 'payload':
                v = bytes.fromhex(v)
            elif k == 'kind':
                v = TestKind(v)
            setattr(self, self._keys_attributes[k], v)

    @property
    def is_mutant(self):
        # type: () -> bool
        return self.parent is not None


class ListEntry(JSONObject):

    _keys_attributes = OrderedDict([
        ('test_id', 'test_id'),
        ('prob', 'prob')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        test_id=None,  # type: Optional[str]
        prob=None  # type: Optional[float]
    ):
        self.test_id = test_id
        self.prob = prob
        if data is not None:
            self.data = data


class TrainedList(JSONObject):
    """
    A trained test list: the vulnerability list, or the coverage list of one coverage context, with the probability
    of selecting each of its tests.
    """

    _keys_attributes = OrderedDict([
        ('context', 'context'),
        ('kind', 'kind'),
        ('entries', 'entries')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        context=None,  # type: Optional[float]
        kind=TestKind.COVERAGE,  # type: TestKind
        entries=None  # type: Optional[Iterable[Union[ListEntry, Tuple[str, float]]]]
    ):
        self.context = context
        self.kind = TestKind(kind)
        self.entries = JSONArray()
        if entries is not None:
            for e in entries:
                if not isinstance(e, ListEntry):
                    e = ListEntry(test_id=e[0], prob=e[1])
                self.entries.append(e)
        if data is not None:
            self.data = data

    @property
    def data(self):
        return super().data

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        for k, v in data.items():
            if v is None:
                continue
            if k == 'entries':
                v = JSONArray(ListEntry(e) for e in v)
            elif k == 'kind':
                v = TestKind(v)
            setattr(self, self._keys_attributes[k], v)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def test_ids(self):
        # type: () -> List[str]
        return [e.test_id for e in self.entries]

    @property
    def probabilities(self):
        # type: () -> List[float]
        return [e.prob for e in self.entries]

    def validate(self, tolerance=1e-9, error=StructuralError):
        """
        Checks the list is a probability distribution: every probability is strictly positive and they sum to 1
        within `tolerance`. An empty list is valid.
        """
        if not self.entries:
            return
        for e in self.entries:
            if not (e.prob > 0):
                raise error(
                    error='probability_mass',
                    description='Test %r in the %s list has a non-positive probability %r.' % (
                        e.test_id, self.kind.value, e.prob
                    )
                )
        total = math.fsum(self.probabilities)
        if abs(total - 1.0) > tolerance:
            raise error(
                error='probability_mass',
                description='Probabilities of the %s list for context %s sum to %r.' % (
                    self.kind.value, self.context, total
                )
            )
        ids = self.test_ids
        if len(set(ids)) != len(ids):
            raise error(
                error='duplicate_test',
                description='A test appears twice in the %s list for context %s.' % (self.kind.value, self.context)
            )


class ModelParams(JSONObject):

    _keys_attributes = OrderedDict([
        ('k', 'k'),
        ('gamma', 'gamma'),
        ('epsilon', 'epsilon'),
        ('n', 'n'),
        ('f', 'f'),
        ('theta', 'theta')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        k=100,  # type: int
        gamma=3,  # type: int
        epsilon=0.2,  # type: float
        n=10000,  # type: int
        f=0.1,  # type: float
        theta=None  # type: Optional[Mapping[float, float]]
    ):
        """
        :param k: The number of arms the adaptive bandit keeps in play.

        :param gamma: The check window: pulls (during training) or executions (during a campaign) before a test is
            evaluated for dropping.

        :param epsilon: The exploration probability of the epsilon-greedy selection.

        :param n: Training steps per coverage context.

        :param f: The tolerance factor of the threshold tuner; lists of (1 - f) * k to (1 + f) * k tests are
            accepted.

        :param theta: The adaptive threshold of each coverage context, as a selection weight in percent.
        """
        self.k = k
        self.gamma = gamma
        self.epsilon = epsilon
        self.n = n
        self.f = f
        self.theta = OrderedDict(sorted((float(c), float(t)) for c, t in (theta or {}).items()))
        if data is not None:
            self.data = data

    @property
    def data(self):
        d = super().data
        d['theta'] = OrderedDict((level_key(c), t) for c, t in self.theta.items())
        return d

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        for k, v in data.items():
            if v is None:
                continue
            if k == 'theta':
                v = OrderedDict(sorted((float(c), float(t)) for c, t in v.items()))
            setattr(self, self._keys_attributes[k], v)


class TestListModel:
    """
    The trained artifact: one vulnerability list plus one coverage list per coverage context.

    The file format is produced by `Trainer.save_model` and read by `Trainer.load_model`.
    """

    __test__ = False

    def __init__(
        self,
        params,  # type: ModelParams
        vulnerability_list=None,  # type: Optional[TrainedList]
        coverage_lists=None  # type: Optional[Mapping[float, TrainedList]]
    ):
        self.params = params
        self.vulnerability_list = vulnerability_list or TrainedList(kind=TestKind.VULNERABILITY)
        self.coverage_lists = OrderedDict(sorted((coverage_lists or {}).items()))

    @property
    def contexts(self):
        # type: () -> List[float]
        """
        :return: The coverage context levels, ascending.
        """
        return list(self.coverage_lists)

    def validate(self, tolerance=1e-9, error=StructuralError):
        self.vulnerability_list.validate(tolerance, error)
        seen = {}
        for level, trained in self.coverage_lists.items():
            trained.validate(tolerance, error)
            for test_id in trained.test_ids:
                if test_id in seen:
                    raise error(
                        error='overlapping_lists',
                        description='Test %r appears in the coverage lists of both %s and %s.' % (
                            test_id, level_key(seen[test_id]), level_key(level)
                        )
                    )
                seen[test_id] = level

    def __eq__(self, other):
        return (
            isinstance(other, TestListModel) and
            self.params == other.params and
            self.vulnerability_list == other.vulnerability_list and
            list(self.coverage_lists.items()) == list(other.coverage_lists.items())
        )

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'TestListModel(contexts=%r, vulnerability_tests=%d, coverage_tests=%r)' % (
            self.contexts, len(self.vulnerability_list), [len(l) for l in self.coverage_lists.values()]
        )


class MinimizeResult(JSONObject):

    EXACT = 'exact'
    GREEDY = 'greedy'
    GREEDY_FALLBACK = 'greedy-fallback'

    _keys_attributes = OrderedDict([
        ('selected', 'selected'),
        ('method', 'method'),
        ('corpusSize', 'corpus_size'),
        ('emptyRows', 'empty_rows'),
        ('elapsed', 'elapsed')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        selected=(),  # type: Iterable[str]
        method=EXACT,  # type: str
        corpus_size=0,  # type: int
        empty_rows=(),  # type: Iterable[str]
        elapsed=None  # type: Optional[float]
    ):
        """
        :param selected: The ids of the tests kept, sorted.

        :param method: "exact", "greedy", or "greedy-fallback" when the exact solver ran out of time and returned its
            best incumbent.

        :param corpus_size: The number of tests the selection was made from.

        :param empty_rows: Tests that reach no coverage point. They are never selected.

        :param elapsed: Solver wall-clock time in seconds.
        """
        self.selected = sorted(selected)
        self.method = method
        self.corpus_size = corpus_size
        self.empty_rows = sorted(empty_rows)
        self.elapsed = elapsed
        if data is not None:
            self.data = data

    @property
    def data(self):
        d = super().data
        d['objective'] = self.objective
        return d

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        for k, v in data.items():
            if v is None or k == 'objective':
                continue
            setattr(self, self._keys_attributes[k], v)

    @property
    def objective(self):
        # type: () -> int
        return len(self.selected)

    @property
    def reduction_rate(self):
        # type: () -> float
        """
        :return: The percentage of the corpus removed.
        """
        if not self.corpus_size:
            return 0.0
        return 100.0 * (self.corpus_size - len(self.selected)) / self.corpus_size


class SpeedupResult(JSONObject):
    """
    Coverage speed of a candidate trace relative to a baseline trace: the ratio of the number of tests each needs to
    first reach `threshold` total coverage. A trace that never reaches the threshold is censored; its budget is used
    in place of the crossing and `censored` is set.
    """

    _keys_attributes = OrderedDict([
        ('threshold', 'threshold'),
        ('ratio', 'ratio'),
        ('testsRef', 'tests_ref'),
        ('testsBase', 'tests_base'),
        ('censored', 'censored')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        threshold=None,  # type: Optional[float]
        ratio=None,  # type: Optional[float]
        tests_ref=None,  # type: Optional[int]
        tests_base=None,  # type: Optional[int]
        censored=False  # type: bool
    ):
        self.threshold = threshold
        self.ratio = ratio
        self.tests_ref = tests_ref
        self.tests_base = tests_base
        self.censored = censored
        if data is not None:
            self.data = data


class CampaignSummary(JSONObject):

    _keys_attributes = OrderedDict([
        ('iterations', 'iterations'),
        ('finalCoverage', 'final_coverage'),
        ('testsToThreshold', 'tests_to_threshold'),
        ('phaseStarts', 'phase_starts'),
        ('droppedTests', 'dropped_tests'),
        ('bugPoints', 'bug_points'),
        ('bugPointsReached', 'bug_points_reached')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        iterations=0,  # type: int
        final_coverage=0.0,  # type: float
        tests_to_threshold=None,  # type: Optional[Mapping[str, Optional[int]]]
        phase_starts=None,  # type: Optional[Mapping[str, int]]
        dropped_tests=0,  # type: int
        bug_points=0,  # type: int
        bug_points_reached=None  # type: Optional[Mapping[str, int]]
    ):
        """
        :param tests_to_threshold: For each threshold (formatted with `level_key`), the iteration at which total
            coverage first reached it, or `None`.

        :param phase_starts: The first iteration of each campaign phase that ran.

        :param bug_points_reached: For each planted bug point reached, the iteration at which it was first covered.
        """
        self.iterations = iterations
        self.final_coverage = final_coverage
        self.tests_to_threshold = tests_to_threshold if tests_to_threshold is not None else OrderedDict()
        self.phase_starts = phase_starts if phase_starts is not None else OrderedDict()
        self.dropped_tests = dropped_tests
        self.bug_points = bug_points
        self.bug_points_reached = bug_points_reached if bug_points_reached is not None else OrderedDict()
        if data is not None:
            self.data = data

    def items(self):
        # `None` crossings are kept
        for k, a in self._keys_attributes.items():
            yield k, getattr(self, a)


class SuiteSpec(JSONObject):
    """
    Sizes and dials of a synthetic benchmark: trainer processors with their corpora, and one processor-under-test.
    A suite is a pure function of its spec, `seed` included.
    """

    _keys_attributes = OrderedDict([
        ('name', 'name'),
        ('seed', 'seed'),
        ('universeSize', 'universe_size'),
        ('moduleSize', 'module_size'),
        ('tierShares', 'tier_shares'),
        ('trainers', 'trainers'),
        ('testsPerTrainer', 'tests_per_trainer'),
        ('basesPerTrainer', 'bases_per_trainer'),
        ('deepBaseRate', 'deep_base_rate'),
        ('duplicateRate', 'duplicate_rate'),
        ('subsetKeep', 'subset_keep'),
        ('vulnerabilityTestsPerTrainer', 'vulnerability_tests_per_trainer'),
        ('bugPointsPerTest', 'bug_points_per_test'),
        ('similarity', 'similarity'),
        ('trainerSimilarity', 'trainer_similarity'),
        ('mutationRate', 'mutation_rate'),
        ('neighborhoodModules', 'neighborhood_modules'),
        ('neighborhoodDecay', 'neighborhood_decay'),
        ('minNeighborhood', 'min_neighborhood'),
        ('baselineBudget', 'baseline_budget')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        name='default',  # type: str
        seed=0,  # type: int
        universe_size=2000,  # type: int
        module_size=40,  # type: int
        tier_shares=(0.35, 0.30, 0.20, 0.15),  # type: Sequence[float]
        trainers=3,  # type: int
        tests_per_trainer=700,  # type: int
        bases_per_trainer=160,  # type: int
        deep_base_rate=0.3,  # type: float
        duplicate_rate=0.0,  # type: float
        subset_keep=0.6,  # type: float
        vulnerability_tests_per_trainer=1,  # type: int
        bug_points_per_test=1,  # type: int
        similarity=0.8,  # type: float
        trainer_similarity=0.9,  # type: float
        mutation_rate=0.15,  # type: float
        neighborhood_modules=6,  # type: int
        neighborhood_decay=0.85,  # type: float
        min_neighborhood=8,  # type: int
        baseline_budget=1200  # type: int
    ):
        """
        :param tier_shares: Fractions of the point universe that are easy, medium, hard and deep. Deep points are
            never hit by corpus tests; only mutants and native tests reach them.

        :param bases_per_trainer: Distinct base tests per trainer; every other corpus test is a duplicate or a subset
            of a base, so a minimized trainer corpus never exceeds this many tests.

        :param deep_base_rate: Fraction of bases that favour hard points over easy and medium ones.

        :param duplicate_rate: Fraction of derived tests that duplicate their base; the others keep a random
            `subset_keep` share of its points.

        :param similarity: Probability that a point of a test's row on the processor-under-test agrees with the row on
            the trainer it originates from, before it is raised to the test's portability (drawn from [0, 2]). 1.0
            gives identical rows.

        :param trainer_similarity: The same dial between a test's origin trainer and the other trainers.

        :param mutation_rate: Fraction of a row's hit points each mutant replaces.

        :param neighborhood_decay: Each successive mutant draws from a neighborhood this much smaller.

        :param baseline_budget: Native tests per trainer in the baseline runs coverage contexts are sampled from.
        """
        self.name = name
        self.seed = seed
        self.universe_size = universe_size
        self.module_size = module_size
        self.tier_shares = list(tier_shares)
        self.trainers = trainers
        self.tests_per_trainer = tests_per_trainer
        self.bases_per_trainer = bases_per_trainer
        self.deep_base_rate = deep_base_rate
        self.duplicate_rate = duplicate_rate
        self.subset_keep = subset_keep
        self.vulnerability_tests_per_trainer = vulnerability_tests_per_trainer
        self.bug_points_per_test = bug_points_per_test
        self.similarity = similarity
        self.trainer_similarity = trainer_similarity
        self.mutation_rate = mutation_rate
        self.neighborhood_modules = neighborhood_modules
        self.neighborhood_decay = neighborhood_decay
        self.min_neighborhood = min_neighborhood
        self.baseline_budget = baseline_budget
        if data is not None:
            self.data = data

    @property
    def data(self):
        return super().data

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        for k, v in data.items():
            if v is None:
                continue
            if k not in self._keys_attributes:
                raise SuiteSpecError(error='unknown_key', description='Unknown suite spec key %r.' % k)
            setattr(self, self._keys_attributes[k], v)

    def validate(self):
        # type: () -> SuiteSpec
        for name in (
            'universe_size', 'module_size', 'trainers', 'tests_per_trainer', 'bases_per_trainer', 'baseline_budget',
            'min_neighborhood', 'neighborhood_modules'
        ):
            if getattr(self, name) < 1:
                raise SuiteSpecError(error='invalid_size', description='Suite spec %s must be positive.' % name)
        if self.bases_per_trainer > self.tests_per_trainer:
            raise SuiteSpecError(
                error='inconsistent_spec',
                description='%d bases per trainer cannot fit in %d tests per trainer.' % (
                    self.bases_per_trainer, self.tests_per_trainer
                )
            )
        if len(self.tier_shares) != 4 or any(s < 0 for s in self.tier_shares) or \
                abs(math.fsum(self.tier_shares) - 1.0) > 1e-9:
            raise SuiteSpecError(
                error='inconsistent_spec', description='tierShares must be four non-negative fractions summing to 1.'
            )
        deep_points = int(round(self.tier_shares[3] * self.universe_size))
        if self.vulnerability_tests_per_trainer * self.trainers * self.bug_points_per_test > deep_points:
            raise SuiteSpecError(
                error='inconsistent_spec',
                description='More bug points requested than there are deep points to plant them in.'
            )
        for name in (
            'deep_base_rate', 'duplicate_rate', 'subset_keep', 'similarity', 'trainer_similarity', 'mutation_rate',
            'neighborhood_decay'
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SuiteSpecError(error='invalid_fraction', description='Suite spec %s must lie in [0, 1].' % name)
        return self


class Config(JSONObject):
    """
    Paths and parameters shared by every `testreuse` command. Loaded from a JSON document; unknown keys are rejected.
    """

    _keys_attributes = OrderedDict([
        ('corpus_dir', 'corpus_dir'),
        ('model_file', 'model_file'),
        ('output_dir', 'output_dir'),
        ('suite', 'suite'),
        ('k', 'k'),
        ('gamma', 'gamma'),
        ('epsilon', 'epsilon'),
        ('n', 'n'),
        ('f', 'f'),
        ('theta', 'theta'),
        ('levels', 'levels'),
        ('m', 'm'),
        ('seed', 'seed'),
        ('seeds', 'seeds'),
        ('jobs', 'jobs'),
        ('thresholds', 'thresholds'),
        ('time_budget', 'time_budget'),
        ('tune', 'tune')
    ])

    def __init__(
        self,
        data=None,  # type: Optional[Union[str, bytes, Dict]]
        corpus_dir=None,  # type: Optional[str]
        model_file=None,  # type: Optional[str]
        output_dir=None,  # type: Optional[str]
        suite=None,  # type: Optional[str]
        k=100,  # type: int
        gamma=3,  # type: int
        epsilon=0.2,  # type: float
        n=10000,  # type: int
        f=0.1,  # type: float
        theta=None,  # type: Optional[Mapping[float, float]]
        levels=(55.0, 60.0, 65.0, 70.0),  # type: Sequence[float]
        m=2000,  # type: int
        seed=0,  # type: int
        seeds=20,  # type: int
        jobs=1,  # type: int
        thresholds=(65.0,),  # type: Sequence[float]
        time_budget=60.0,  # type: float
        tune=False  # type: bool
    ):
        """
        :param suite: Path of a synthetic suite spec; the built-in default suite is used when absent.

        :param theta: Adaptive threshold per coverage context; contexts without one are tuned. Empty by default; the
            presets carry thresholds fitted to real processors.

        :param m: The maximal number of fuzzing iterations of a campaign.

        :param seeds: Replicates per strategy in comparisons.

        :param jobs: Worker processes for comparisons.

        :param thresholds: Total coverage thresholds reported as tests-to-threshold.

        :param time_budget: Seconds the exact minimizer may search before falling back to its incumbent.

        :param tune: Tune every threshold even when `theta` provides one.
        """
        self.corpus_dir = corpus_dir
        self.model_file = model_file
        self.output_dir = output_dir
        self.suite = suite
        self.k = k
        self.gamma = gamma
        self.epsilon = epsilon
        self.n = n
        self.f = f
        self.theta = OrderedDict(sorted((float(c), float(t)) for c, t in (theta or {}).items()))
        self.levels = [float(l) for l in levels]
        self.m = m
        self.seed = seed
        self.seeds = seeds
        self.jobs = jobs
        self.thresholds = [float(t) for t in thresholds]
        self.time_budget = time_budget
        self.tune = tune
        if data is not None:
            self.data = data

    BRANCH_THETA = OrderedDict([(55.0, 1.90), (60.0, 1.50), (65.0, 0.90), (70.0, 1.26)])
    CONDITION_THETA = OrderedDict([(45.0, 14.84), (50.0, 11.82), (55.0, 7.81), (60.0, 4.69), (65.0, 2.86)])

    @classmethod
    def branch_preset(cls):
        # type: () -> Config
        """
        Defaults for branch coverage: contexts every 5% from 55% to 70%.
        """
        return cls(levels=list(cls.BRANCH_THETA), theta=cls.BRANCH_THETA)

    @classmethod
    def condition_preset(cls):
        # type: () -> Config
        """
        Defaults for condition coverage, a finer metric that starts lower: contexts every 5% from 45% to 65%.
        """
        return cls(levels=list(cls.CONDITION_THETA), theta=cls.CONDITION_THETA)

    @classmethod
    def from_file(cls, path):
        # type: (str) -> Config
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(error='unreadable', description='Cannot read config %s: %s' % (path, e))
        try:
            return cls(text).validate()
        except ValueError as e:
            raise ConfigError(error='invalid_json', description='Config %s is not valid JSON: %s' % (path, e))

    @property
    def data(self):
        d = super().data
        d['theta'] = OrderedDict((level_key(c), t) for c, t in self.theta.items())
        return d

    @data.setter
    def data(self, data: Union[str, bytes, Dict]):
        if isinstance(data, bytes):
            data = str(data, 'utf-8')
        if isinstance(data, str):
            data = loads(data, object_hook=OrderedDict)
        if not isinstance(data, dict):
            raise ConfigError(error='invalid_config', description='A config must be a JSON object.')
        for k, v in data.items():
            if k not in self._keys_attributes:
                raise ConfigError(error='unknown_key', description='Unknown config key %r.' % k)
            if v is None:
                continue
            if k == 'theta':
                v = OrderedDict(sorted((float(c), float(t)) for c, t in v.items()))
            elif k in ('levels', 'thresholds'):
                v = [float(l) for l in v]
            setattr(self, self._keys_attributes[k], v)

    def update(self, **overrides):
        # type: (...) -> Config
        """
        Applies command-line overrides. `None` values are ignored.
        """
        for a, v in overrides.items():
            if v is None:
                continue
            if a not in self._keys_attributes.values():
                raise ConfigError(error='unknown_key', description='Unknown config setting %r.' % a)
            setattr(self, a, v)
        return self

    def validate(self):
        # type: () -> Config
        def check(condition, name, rule):
            if not condition:
                raise ConfigError(
                    error='invalid_value', description='Config %s=%r %s.' % (name, getattr(self, name), rule)
                )
        check(isinstance(self.k, int) and self.k >= 1, 'k', 'must be a positive integer')
        check(isinstance(self.gamma, int) and self.gamma >= 1, 'gamma', 'must be a positive integer')
        check(0.0 <= self.epsilon <= 1.0, 'epsilon', 'must lie in [0, 1]')
        check(isinstance(self.n, int) and self.n >= 0, 'n', 'must be a non-negative integer')
        check(0.0 <= self.f < 1.0, 'f', 'must lie in [0, 1)')
        check(isinstance(self.m, int) and self.m >= 0, 'm', 'must be a non-negative integer')
        check(isinstance(self.seeds, int) and self.seeds >= 1, 'seeds', 'must be a positive integer')
        check(isinstance(self.jobs, int) and self.jobs >= 1, 'jobs', 'must be a positive integer')
        check(self.time_budget > 0, 'time_budget', 'must be positive')
        check(all(0.0 <= t <= 100.0 for t in self.theta.values()), 'theta', 'must lie in [0, 100]')
        check(all(0.0 <= t <= 100.0 for t in self.thresholds), 'thresholds', 'must lie in [0, 100]')
        _validate_levels(self.levels, ConfigError)
        return self

    @property
    def params(self):
        # type: () -> ModelParams
        return ModelParams(
            k=self.k,
            gamma=self.gamma,
            epsilon=self.epsilon,
            n=self.n,
            f=self.f,
            theta=OrderedDict((c, t) for c, t in self.theta.items() if c in self.levels)
        )


def _validate_levels(levels, error):
    if not levels:
        raise error(error='invalid_levels', description='At least one coverage context level is required.')
    if any(not 0.0 <= l <= 100.0 for l in levels):
        raise error(error='invalid_levels', description='Coverage context levels must lie in [0, 100].')
    if any(a >= b for a, b in zip(levels, levels[1:])):
        raise error(error='invalid_levels', description='Coverage context levels must be strictly increasing.')
