"""
Synthetic processors, corpora and fuzzers, and the strategy benchmark that runs on them.

A suite is a pure function of its `SuiteSpec`. Every point of the shared coverage universe belongs to a tier:

- easy and medium points are reached by most tests,
- hard points mostly by "deep" corpus tests,
- deep points only by mutants and native tests.

Corpus tests are bases drawn from a broad or a deep hit profile on their origin trainer, or subsets and duplicates of
a base. On any other processor a test's row keeps each bit of its origin row with probability `similarity **
portability`, and draws it like a native test otherwise, so a test with a low portability carries well across
processors. Mutants keep most of the parent's row, swap a share of its points for points of a test-specific
neighborhood that shrinks with each mutant, and exercise the parent's hit profile anew. Mutants of a vulnerability
test always reach its bug points.
"""

import csv
import hashlib
import logging
import math
import os
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from json import dumps
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

import testreuse as testreuse_
from testreuse.api.coverage import decode_text
from testreuse.api.runtime import CampaignReport, FuzzerPort, tests_to_threshold
from testreuse.api.trainer import ContextSnapshot, RewardEnv, RowCache
from testreuse.base import stable_hash
from testreuse.coverage import CoverageMatrix, CoveragePointId, CoverageRow, CoveredSet, Universe
from testreuse.data import Config, SpeedupResult, SuiteSpec, Test, TestKind, TestListModel, level_key
from testreuse.errors import FuzzerError, ParseError, SuiteSpecError

logger = logging.getLogger(__name__)

EASY, MEDIUM, HARD, DEEP = range(4)
TIERS = ('easy', 'medium', 'hard', 'deep')

# hit probability of a point of each tier
PROFILES = OrderedDict([
    ('native', (0.02, 0.003, 0.0004, 0.0002)),
    ('broad', (0.10, 0.02, 0.001, 0.0)),
    ('deep', (0.03, 0.005, 0.008, 0.0)),
    ('narrow', (0.02, 0.002, 0.0, 0.0))
])

PORTABILITY_RANGE = (0.0, 2.0)

PUT = 'put'
NATIVE_PREFIX = 'native-'

SAME_SEQUENCE = 'same_sequence'
RANDOM_SEQUENCE = 'random_sequence'
RANKED_SINGLE = 'ranked_single'
RANKED_AVERAGE = 'ranked_average'
TRAINED_LISTS = 'trained_lists'
BASELINE_SCRATCH = 'baseline_scratch'

STRATEGIES = (SAME_SEQUENCE, RANDOM_SEQUENCE, RANKED_SINGLE, RANKED_AVERAGE, TRAINED_LISTS, BASELINE_SCRATCH)

ALIASES = {
    'same': SAME_SEQUENCE,
    'random': RANDOM_SEQUENCE,
    'ranked': RANKED_AVERAGE,
    'ranked_pp': RANKED_AVERAGE,
    'ranked_single_pp': RANKED_SINGLE,
    'trained': TRAINED_LISTS,
    'baseline': BASELINE_SCRATCH,
    'scratch': BASELINE_SCRATCH
}

ADAPTIVE_CB = 'adaptive_cb'
ORIGINAL_CB = 'original_cb'


def strategy_name(name):
    # type: (str) -> str
    """
    :raises SuiteSpecError: For an unknown strategy.
    """
    key = name.strip().lower().replace('-', '_')
    key = ALIASES.get(key, key)
    if key not in STRATEGIES:
        raise SuiteSpecError(
            error='unknown_strategy', description='Unknown strategy %r; expected one of %s.' % (
                name, ', '.join(STRATEGIES)
            )
        )
    return key


class SyntheticPUT:
    """
    One processor of a suite: a trainer or the processor-under-test. Rows are pure functions of the suite seed, the
    processor and the test.
    """

    def __init__(self, suite, name):
        # type: (Suite, str) -> None
        self.suite = suite
        self.name = name
        self._rows = {}  # type: Dict[str, CoverageRow]

    @property
    def universe(self):
        # type: () -> Universe
        return self.suite.universe

    @property
    def bug_points(self):
        # type: () -> List[CoveragePointId]
        return self.suite.bug_points

    def row(self, test_id):
        # type: (str) -> CoverageRow
        """
        The coverage of a corpus or vulnerability test.
        """
        row = self._rows.get(test_id)
        if row is None:
            row = self._rows[test_id] = CoverageRow(test_id, self.universe, self.suite.row_bits(self.name, test_id))
        return row

    def mutant_row(self, test_id, index, mutant_id=None):
        # type: (str, int, Optional[str]) -> CoverageRow
        """
        The coverage of the `index`-th mutant (from 1) of a test.
        """
        bits = self.suite.mutant_bits(self.name, test_id, index)
        return CoverageRow(mutant_id or '%s~%d' % (test_id, index), self.universe, bits)

    def native_row(self, stream, index, test_id=None):
        # type: (object, int, Optional[str]) -> CoverageRow
        """
        The coverage of the `index`-th test of a native seed-generation stream.
        """
        rng = self.suite.rng('native', self.name, stream, index)
        bits = rng.random(len(self.universe)) < self.suite.probabilities('native')
        return CoverageRow(test_id or '%s%06d' % (NATIVE_PREFIX, index), self.universe, bits)

    def __repr__(self):
        return 'SyntheticPUT(%r)' % self.name


class Suite:
    """
    A synthetic benchmark: trainer processors with their corpora and vulnerability tests, and a processor-under-test.
    """

    def __init__(self, spec):
        # type: (SuiteSpec) -> None
        """
        :raises SuiteSpecError: For an inconsistent spec.
        """
        self.spec = spec.validate()
        self.seed = spec.seed
        n = spec.universe_size
        self.module_count = -(-n // spec.module_size)
        width = max(3, len(str(self.module_count - 1)))
        self.modules = np.arange(n) // spec.module_size
        self.universe = Universe(
            CoveragePointId(('soc', 'm%0*d' % (width, i // spec.module_size)), i % spec.module_size)
            for i in range(n)
        )
        counts = [int(round(s * n)) for s in spec.tier_shares[:3]]
        counts.append(n - sum(counts))
        order = self.rng('tiers').permutation(n)
        self.tiers = np.empty(n, dtype=np.int8)
        start = 0
        for tier, count in enumerate(counts):
            self.tiers[order[start:start + count]] = tier
            start += count
        self._probabilities = {name: np.asarray(p)[self.tiers] for name, p in PROFILES.items()}
        self.trainers = ['p%d' % i for i in range(spec.trainers)]
        self.processors = OrderedDict((p, SyntheticPUT(self, p)) for p in self.trainers + [PUT])
        self.tests = OrderedDict()  # type: OrderedDict[str, Test]
        self.entries = OrderedDict()  # type: OrderedDict[str, OrderedDict]
        self._origin = {}  # type: Dict[str, np.ndarray]
        self._neighborhoods = {}  # type: Dict[str, np.ndarray]
        self._generate()

    def rng(self, *key):
        # type: (*object) -> np.random.Generator
        return np.random.default_rng(np.random.SeedSequence([self.seed] + [stable_hash(k) for k in key]))

    def probabilities(self, profile):
        # type: (str) -> np.ndarray
        return self._probabilities[profile]

    @property
    def put(self):
        # type: () -> SyntheticPUT
        return self.processors[PUT]

    @property
    def bug_points(self):
        # type: () -> List[CoveragePointId]
        return [self.universe[i] for e in self.entries.values() for i in e.get('bugPoints', ())]

    def coverage_ids(self, trainer=None):
        # type: (Optional[str]) -> List[str]
        return [
            t for t, e in self.entries.items()
            if e['kind'] == TestKind.COVERAGE.value and (trainer is None or e['origin'] == trainer)
        ]

    def vulnerability_ids(self):
        # type: () -> List[str]
        return [t for t, e in self.entries.items() if e['kind'] == TestKind.VULNERABILITY.value]

    def bases(self, trainer=None):
        # type: (Optional[str]) -> List[str]
        return [
            t for t in self.coverage_ids(trainer) if self.entries[t]['derivation'] == 'base'
        ]

    def _generate(self):
        spec = self.spec
        rng = self.rng('corpus')
        deep_points = np.flatnonzero(self.tiers == DEEP)
        bug_count = spec.trainers * spec.vulnerability_tests_per_trainer * spec.bug_points_per_test
        bugs = [int(b) for b in self.rng('bugs').choice(deep_points, size=bug_count, replace=False)]
        for i, trainer in enumerate(self.trainers):
            positions = set(int(p) for p in rng.choice(spec.tests_per_trainer, spec.bases_per_trainer, replace=False))
            ids = ['%st%04d' % (trainer, j) for j in range(spec.tests_per_trainer)]
            bases = [ids[j] for j in sorted(positions)]
            for j, test_id in enumerate(ids):
                if j in positions:
                    entry = OrderedDict([
                        ('kind', TestKind.COVERAGE.value),
                        ('origin', trainer),
                        ('derivation', 'base'),
                        ('base', test_id),
                        ('profile', 'deep' if rng.random() < spec.deep_base_rate else 'broad'),
                        ('portability', float(rng.uniform(*PORTABILITY_RANGE)))
                    ])
                else:
                    base = bases[int(rng.integers(len(bases)))]
                    entry = OrderedDict([
                        ('kind', TestKind.COVERAGE.value),
                        ('origin', trainer),
                        ('derivation', 'duplicate' if rng.random() < spec.duplicate_rate else 'subset'),
                        ('base', base),
                        ('profile', None),
                        ('portability', None)
                    ])
                entry['neighborhood'] = [
                    (int(self.rng('neighborhood', test_id).integers(self.module_count)) + k) % self.module_count
                    for k in range(spec.neighborhood_modules)
                ]
                self._add(test_id, entry)
            for test_id in ids:
                entry = self.entries[test_id]
                if entry['derivation'] != 'base':
                    entry['profile'] = self.entries[entry['base']]['profile']
                    entry['portability'] = self.entries[entry['base']]['portability']
            for j in range(spec.vulnerability_tests_per_trainer):
                test_id = '%sv%02d' % (trainer, j)
                k = (i * spec.vulnerability_tests_per_trainer + j) * spec.bug_points_per_test
                points = bugs[k:k + spec.bug_points_per_test]
                self._add(test_id, OrderedDict([
                    ('kind', TestKind.VULNERABILITY.value),
                    ('origin', trainer),
                    ('derivation', 'base'),
                    ('base', test_id),
                    ('profile', 'narrow'),
                    ('portability', float(rng.uniform(*PORTABILITY_RANGE))),
                    ('neighborhood', [int(self.modules[points[0]])]),
                    ('bugPoints', points)
                ]))

    def _add(self, test_id, entry):
        self.entries[test_id] = entry
        self.tests[test_id] = Test(
            test_id=test_id,
            origin=entry['origin'],
            kind=TestKind(entry['kind']),
            payload=hashlib.sha1(('%d:%s' % (self.seed, test_id)).encode('utf-8')).digest()
        )

    def origin_bits(self, test_id):
        # type: (str) -> np.ndarray
        """
        The row of a test on the trainer it originates from.
        """
        bits = self._origin.get(test_id)
        if bits is not None:
            return bits
        entry = self.entries[test_id]
        derivation = entry['derivation']
        if derivation == 'duplicate':
            bits = self.origin_bits(entry['base'])
        elif derivation == 'subset':
            keep = self.rng('subset', test_id).random(len(self.universe)) < self.spec.subset_keep
            bits = self.origin_bits(entry['base']) & keep
        else:
            bits = self.rng('origin', test_id).random(len(self.universe)) < self.probabilities(entry['profile'])
        bits.flags.writeable = False
        self._origin[test_id] = bits
        return bits

    def similarity(self, processor, test_id):
        # type: (str, str) -> float
        """
        The probability that a bit of the test's row on `processor` agrees with its origin row.
        """
        entry = self.entries[test_id]
        if processor == entry['origin']:
            return 1.0
        base = self.spec.similarity if processor == PUT else self.spec.trainer_similarity
        return base ** entry['portability']

    def row_bits(self, processor, test_id):
        # type: (str, str) -> np.ndarray
        origin = self.origin_bits(test_id)
        if processor == self.entries[test_id]['origin']:
            return origin
        rng = self.rng('row', processor, test_id)
        keep = rng.random(len(self.universe)) < self.similarity(processor, test_id)
        native = rng.random(len(self.universe)) < self.probabilities('native')
        return np.where(keep, origin, native)

    def neighborhood(self, test_id):
        # type: (str) -> np.ndarray
        """
        The hard and deep points of the test's neighborhood modules, in the order its mutants reach for them.
        """
        points = self._neighborhoods.get(test_id)
        if points is None:
            modules = self.entries[test_id]['neighborhood']
            candidates = np.flatnonzero(np.isin(self.modules, modules) & (self.tiers >= HARD))
            points = self._neighborhoods[test_id] = self.rng('neighborhood-order', test_id).permutation(candidates)
        return points

    def mutant_bits(self, processor, test_id, index):
        # type: (str, str, int) -> np.ndarray
        entry = self.entries[test_id]
        spec = self.spec
        bits = self.processors[processor].row(test_id).bits.copy()
        rng = self.rng('mutant', processor, test_id, index)
        hits = np.flatnonzero(bits)
        swapped = max(1, int(math.ceil(spec.mutation_rate * hits.size)))
        if hits.size:
            bits[rng.choice(hits, size=min(swapped, hits.size), replace=False)] = False
        hood = self.neighborhood(test_id)
        size = min(hood.size, max(spec.min_neighborhood, int(round(hood.size * spec.neighborhood_decay ** (index - 1)))))
        if size:
            bits[rng.choice(hood[:size], size=min(swapped, size), replace=False)] = True
        if entry['kind'] == TestKind.VULNERABILITY.value:
            bits[entry['bugPoints']] = True
        else:
            s = self.similarity(processor, test_id)
            profile = s * self.probabilities(entry['profile']) + (1 - s) * self.probabilities('native')
            bits |= rng.random(len(self.universe)) < profile
        return bits

    def row(self, processor, test_id):
        # type: (str, str) -> CoverageRow
        return self.processors[processor].row(test_id)

    def baseline_trace(self, trainer, budget=None):
        # type: (str, Optional[int]) -> List[CoveredSet]
        """
        The covered set after each test of a native fuzzing run on a trainer.
        """
        budget = self.spec.baseline_budget if budget is None else budget
        processor = self.processors[trainer]
        covered = CoveredSet(self.universe)
        trace = []
        for j in range(budget):
            covered = covered.merge(processor.native_row('baseline', j))
            trace.append(covered)
        return trace

    def manifest(self):
        # type: () -> OrderedDict
        """
        The ground truth of the suite: tiers, trainers, and how each test was planted.
        """
        tiers = np.bincount(self.tiers, minlength=len(TIERS))
        tests = OrderedDict()
        for test_id, entry in self.entries.items():
            e = OrderedDict(entry)
            if 'bugPoints' in e:
                e['bugPoints'] = [str(self.universe[i]) for i in e['bugPoints']]
            tests[test_id] = e
        return OrderedDict([
            ('spec', self.spec.data),
            ('universe', len(self.universe)),
            ('modules', self.module_count),
            ('tiers', OrderedDict((t, int(c)) for t, c in zip(TIERS, tiers))),
            ('trainers', self.trainers),
            ('put', PUT),
            ('bases', OrderedDict((t, self.bases(t)) for t in self.trainers)),
            ('bugPoints', [str(p) for p in self.bug_points]),
            ('tests', tests)
        ])

    def __repr__(self):
        return 'Suite(%r, %d trainers, %d tests)' % (self.spec.name, len(self.trainers), len(self.tests))


class SimulatedFuzzer(FuzzerPort):
    """
    A fuzzer bound to one synthetic processor. Mutant indices count up per parent and native tests per fuzzer, so a
    fuzzer's behavior is a function of its seed and the calls made to it.
    """

    def __init__(self, put, seed=0):
        # type: (SyntheticPUT, int) -> None
        self.put = put
        self.seed = seed
        self._mutants = {}  # type: Dict[str, int]
        self._natives = 0

    @property
    def universe(self):
        # type: () -> Universe
        return self.put.universe

    @property
    def bug_points(self):
        # type: () -> List[CoveragePointId]
        return self.put.bug_points

    def mutate(self, test):
        # type: (Test) -> Test
        index = self._mutants[test.test_id] = self._mutants.get(test.test_id, 0) + 1
        return Test(
            test_id='%s~%d' % (test.test_id, index),
            origin=test.origin,
            kind=test.kind,
            payload=hashlib.sha1(test.payload + index.to_bytes(4, 'little')).digest(),
            parent=test.test_id,
            mutant_index=index
        )

    def generate_native(self):
        # type: () -> Test
        self._natives += 1
        test_id = '%s%06d' % (NATIVE_PREFIX, self._natives)
        return Test(
            test_id=test_id,
            origin=self.put.name,
            payload=hashlib.sha1(('%d:%s' % (self.seed, test_id)).encode('utf-8')).digest()
        )

    def execute(self, test):
        # type: (Test) -> CoverageRow
        if test.is_mutant:
            return self.put.mutant_row(test.parent, test.mutant_index, test.test_id)
        if test.test_id in self.put.suite.entries:
            return self.put.row(test.test_id)
        if test.test_id.startswith(NATIVE_PREFIX):
            return self.put.native_row(self.seed, int(test.test_id[len(NATIVE_PREFIX):]), test.test_id)
        raise FuzzerError(error='unknown_test', description='%s cannot execute %r.' % (self.put, test.test_id))


@lru_cache(maxsize=2)
def _cached_suite(spec_text):
    # type: (str) -> Suite
    return Suite(SuiteSpec(spec_text))


def _run_replicate(task):
    config_text, spec_text, model_text, strategy, seed, budget, thresholds = task
    workbench = testreuse_.Workbench(Config(config_text))
    model = workbench.trainer.loads_model(model_text) if model_text else None
    return workbench.harness.run_strategy(
        strategy, _cached_suite(spec_text), budget, seed, model=model, thresholds=thresholds
    )


class Harness:

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def load_suite_spec(self, path=None):
        # type: (Optional[str]) -> SuiteSpec
        """
        :param path: A suite spec file; the configured `suite`, or the built-in default suite, when omitted.
        """
        path = path or self.workbench.config.suite
        if path is None:
            return SuiteSpec()
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return SuiteSpec(f.read()).validate()
        except OSError as e:
            raise SuiteSpecError(error='unreadable', description='Cannot read suite spec %s: %s' % (path, e))
        except ValueError as e:
            raise SuiteSpecError(error='invalid_json', description='Suite spec %s is not valid JSON: %s' % (path, e))

    def gen_synthetic_suite(self, spec=None, seed=None):
        # type: (Optional[SuiteSpec], Optional[int]) -> Suite
        """
        :param seed: Replaces the suite spec's seed.

        :raises SuiteSpecError: For an inconsistent spec.
        """
        spec = SuiteSpec((spec or self.load_suite_spec()).data)
        if seed is not None:
            spec.seed = seed
        suite = Suite(spec)
        logger.info(
            'Generated suite %r: %d points, %d trainers, %d coverage tests (%d bases), %d vulnerability tests',
            spec.name, len(suite.universe), len(suite.trainers), len(suite.coverage_ids()), len(suite.bases()),
            len(suite.vulnerability_ids())
        )
        return suite

    def write_suite(self, suite, directory, rcdb=False):
        # type: (Suite, str, bool) -> None
        """
        Writes the spec, the ground-truth manifest (with the effective tests of each configured context) and the corpus
        and vulnerability manifests of a suite, and with `rcdb` the origin row of every test as an RCDB file under
        `rcdb/`.
        """
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, 'suite.json'), 'w', encoding='utf-8', newline='\n') as f:
            f.write(dumps(suite.spec.data, indent=2) + '\n')
        with open(os.path.join(directory, 'manifest.json'), 'w', encoding='utf-8', newline='\n') as f:
            manifest = suite.manifest()
            manifest['effectiveArms'] = self.effective_arms(suite)
            f.write(dumps(manifest, indent=2) + '\n')
        write_manifest(os.path.join(directory, 'corpus.txt'), suite.coverage_ids())
        write_manifest(os.path.join(directory, 'vulnerability.txt'), suite.vulnerability_ids())
        if rcdb:
            coverage = self.workbench.coverage
            rcdb_dir = os.path.join(directory, 'rcdb')
            os.makedirs(rcdb_dir, exist_ok=True)
            for test_id, entry in suite.entries.items():
                row = suite.row(entry['origin'], test_id)
                with open(os.path.join(rcdb_dir, test_id + '.rcdb'), 'w', encoding='utf-8', newline='\n') as f:
                    f.write(coverage.format_coverage_db(row, comment='%s on %s' % (test_id, entry['origin'])))

    def minimized_corpus(self, suite, corpus=None):
        # type: (Suite, Optional[Iterable[str]]) -> List[str]
        """
        Minimizes each trainer's corpus over the rows of its tests on that trainer.

        :param corpus: Restricts the tests considered.
        """
        allowed = None if corpus is None else set(corpus)
        selected = []
        for trainer in suite.trainers:
            ids = [t for t in suite.coverage_ids(trainer) if allowed is None or t in allowed]
            matrix = CoverageMatrix(suite.universe, [suite.row(trainer, t) for t in ids])
            selected.extend(self.workbench.minimizer.minimize_exact(matrix).selected)
        return selected

    def training_envs(self, suite, levels=None):
        # type: (Suite, Optional[Sequence[float]]) -> Tuple[OrderedDict, RewardEnv]
        """
        :return: The reward environment of each context level, sampled from native runs on the trainers, and the
            environment of the vulnerability list, where rewards are standalone coverage.
        """
        levels = self.workbench.config.levels if levels is None else levels
        rows = RowCache(suite.row)
        traces = OrderedDict((t, suite.baseline_trace(t)) for t in suite.trainers)
        snapshots = self.workbench.trainer.snapshot_contexts(traces, levels)
        envs = OrderedDict(
            (level, RewardEnv(snapshot, rows, seed=int(self.workbench.rng('env', level_key(level)).integers(2 ** 63))))
            for level, snapshot in snapshots.items()
        )
        empty = ContextSnapshot(0.0, OrderedDict((t, CoveredSet(suite.universe)) for t in suite.trainers))
        vuln_env = RewardEnv(empty, rows, seed=int(self.workbench.rng('env', 'vulnerability').integers(2 ** 63)))
        return envs, vuln_env

    def effective_arms(self, suite, levels=None):
        # type: (Suite, Optional[Sequence[float]]) -> OrderedDict
        """
        The coverage tests each context can reward: those adding a point to the context's covered set on at least one
        trainer that reached it. Training never lists a test outside its context's set.

        :return: Sorted test ids by level key, in level order.
        """
        envs, _ = self.training_envs(suite, levels)
        effective = OrderedDict()
        for level, env in envs.items():
            snapshot = env.snapshot
            effective[level_key(level)] = sorted(
                t for t in suite.coverage_ids()
                if any(snapshot.per_processor[p].new_points(env.rows[p, t]) for p in snapshot.processors)
            )
        return effective

    def train_suite_model(self, suite, adaptive=True, corpus=None, vuln_tests=None, log=None, tune=None):
        # type: (Suite, bool, Optional[Iterable[str]], Optional[Iterable[str]], Optional[list], Optional[bool]) -> TestListModel
        """
        Minimizes the suite's corpus and trains a model on its trainers.

        :param adaptive: `False` trains the coverage lists with the plain loop.

        :param tune: Tune every context's threshold; the configured `tune` when omitted. Contexts without a configured
            threshold are always tuned.
        """
        config = self.workbench.config
        params = config.params
        if config.tune if tune is None else tune:
            params.theta = OrderedDict()
        envs, vuln_env = self.training_envs(suite)
        vuln_tests = suite.vulnerability_ids() if vuln_tests is None else list(vuln_tests)
        model = self.workbench.trainer.train_model(
            self.minimized_corpus(suite, corpus), vuln_tests, config.levels, params, envs, vuln_env,
            self.workbench.rng('train', ADAPTIVE_CB if adaptive else ORIGINAL_CB), log=log, adaptive=adaptive
        )
        logger.info('Trained %r', model)
        return model

    def sequence(self, strategy, suite, rng=None):
        # type: (str, Suite, Optional[np.random.Generator]) -> List[str]
        """
        The order in which a static reuse strategy executes the corpus.

        `ranked_single` ranks tests by standalone coverage on their origin trainer, `ranked_average` by mean
        standalone coverage over all trainers (all trainers share one universe, so summed hit counts rank the same).
        Ties go to the smaller id.
        """
        strategy = strategy_name(strategy)
        if strategy == SAME_SEQUENCE:
            return suite.coverage_ids(suite.trainers[0])
        ids = suite.coverage_ids()
        if strategy == RANDOM_SEQUENCE:
            return [ids[i] for i in rng.permutation(len(ids))]
        if strategy == RANKED_SINGLE:
            return sorted(ids, key=lambda t: (-suite.row(suite.entries[t]['origin'], t).hits, t))
        if strategy == RANKED_AVERAGE:
            return sorted(ids, key=lambda t: (-sum(suite.row(p, t).hits for p in suite.trainers), t))
        raise SuiteSpecError(error='unknown_strategy', description='%s has no fixed sequence.' % strategy)

    def run_strategy(self, strategy, suite, budget=None, seed=0, model=None, thresholds=None):
        # type: (str, Suite, Optional[int], int, Optional[TestListModel], Optional[Sequence[float]]) -> CampaignReport
        """
        Runs one replicate of a strategy on the suite's processor-under-test.

        :param budget: Iterations; the configured `m` when omitted.

        :param seed: Seeds the fuzzer's native generation and the strategy's own choices.

        :param model: The trained model `trained_lists` campaigns use.
        """
        strategy = strategy_name(strategy)
        budget = self.workbench.config.m if budget is None else budget
        runtime = self.workbench.runtime
        fuzzer = SimulatedFuzzer(suite.put, seed)
        rng = np.random.default_rng(seed)
        if strategy == TRAINED_LISTS:
            if model is None:
                model = self.train_suite_model(suite)
            return runtime.run_campaign(model, fuzzer, suite.tests, rng=rng, m=budget, thresholds=thresholds)
        if strategy == BASELINE_SCRATCH:
            return runtime.run_native(fuzzer, m=budget, thresholds=thresholds)
        return runtime.run_sequence(
            self.sequence(strategy, suite, rng), fuzzer, suite.tests, m=budget, thresholds=thresholds
        )

    def replicate_seed(self, label, replicate):
        # type: (str, int) -> int
        return int(np.random.SeedSequence(
            [self.workbench.seed, stable_hash(label), replicate]
        ).generate_state(1, dtype=np.uint64)[0] >> 1)

    def compare(self, suite, strategies, seeds=None, budget=None, jobs=None, model=None):
        # type: (Suite, Sequence[str], Optional[int], Optional[int], Optional[int], Optional[TestListModel]) -> OrderedDict
        """
        Runs `seeds` replicates of each strategy. A `trained_lists` model is trained once, before the runs.

        :return: The reports of each strategy, by replicate.
        """
        strategies = [strategy_name(s) for s in strategies]
        if TRAINED_LISTS in strategies and model is None:
            model = self.train_suite_model(suite)
        runs = [(s, s, model if s == TRAINED_LISTS else None) for s in strategies]
        return self._fan_out(suite, runs, seeds, budget, jobs)

    def compare_training(self, suite, seeds=None, budget=None, jobs=None):
        # type: (Suite, Optional[int], Optional[int], Optional[int]) -> OrderedDict
        """
        Runs `trained_lists` campaigns with a model trained by the adaptive loop and one trained by the plain loop.
        """
        runs = [
            (ADAPTIVE_CB, TRAINED_LISTS, self.train_suite_model(suite, adaptive=True)),
            (ORIGINAL_CB, TRAINED_LISTS, self.train_suite_model(suite, adaptive=False))
        ]
        return self._fan_out(suite, runs, seeds, budget, jobs)

    def _fan_out(self, suite, runs, seeds, budget, jobs):
        config = self.workbench.config
        seeds = config.seeds if seeds is None else seeds
        budget = config.m if budget is None else budget
        jobs = config.jobs if jobs is None else jobs
        tasks = []
        for label, strategy, model in runs:
            for replicate in range(seeds):
                tasks.append((label, strategy, model, self.replicate_seed(label, replicate)))
        logger.info('Running %d campaigns of %d iterations with %d workers', len(tasks), budget, jobs)
        if jobs > 1:
            config_text = str(config)
            spec_text = str(suite.spec)
            trainer = self.workbench.trainer
            payload = [
                (config_text, spec_text, trainer.dumps_model(model) if model else None, strategy, seed, budget,
                 config.thresholds)
                for _, strategy, model, seed in tasks
            ]
            with ProcessPoolExecutor(max_workers=jobs) as executor:
                reports = list(executor.map(_run_replicate, payload))
        else:
            reports = [
                self.run_strategy(strategy, suite, budget, seed, model=model)
                for _, strategy, model, seed in tasks
            ]
        results = OrderedDict()
        for (label, _, _, _), report in zip(tasks, reports):
            results.setdefault(label, []).append(report)
        return results

    def coverage_speedup(self, trace_ref, trace_base, threshold):
        # type: (Sequence[float], Sequence[float], float) -> SpeedupResult
        """
        :return: How many times fewer tests `trace_ref` needs than `trace_base` to first reach `threshold`. A trace
            that never reaches it counts its length and marks the result censored; with both censored there is no
            ratio.
        """
        ref = tests_to_threshold(trace_ref, threshold)
        base = tests_to_threshold(trace_base, threshold)
        tests_ref = len(trace_ref) if ref is None else ref
        tests_base = len(trace_base) if base is None else base
        ratio = None
        if (ref is not None or base is not None) and tests_ref:
            ratio = tests_base / tests_ref
        return SpeedupResult(
            threshold=threshold, ratio=ratio, tests_ref=tests_ref, tests_base=tests_base,
            censored=ref is None or base is None
        )

    def emit_report(self, traces, thresholds, output_dir, baseline=None):
        # type: (Mapping[str, Sequence[Sequence[float]]], Sequence[float], str, Optional[str]) -> List[OrderedDict]
        """
        Writes one CSV of traces per strategy (replicate, iteration, tot_cov), and a summary of the medians over
        replicates as `summary.csv` and `summary.json`.

        :param traces: The total coverage trace of every replicate, by strategy.

        :param baseline: The strategy speedups are relative to: `baseline_scratch` when present, else the first one.

        :return: The summary rows.
        """
        if not traces:
            raise SuiteSpecError(error='no_traces', description='Nothing to report.')
        os.makedirs(output_dir, exist_ok=True)
        if baseline is None:
            baseline = BASELINE_SCRATCH if BASELINE_SCRATCH in traces else next(iter(traces))
        for name, replicates in traces.items():
            write_traces(os.path.join(output_dir, '%s.csv' % name), replicates)

        def tests_needed(replicates, threshold):
            tests = [tests_to_threshold(t, threshold) for t in replicates]
            return (
                float(np.median([len(t) if n is None else n for t, n in zip(replicates, tests)])),
                sum(1 for n in tests if n is None)
            )

        rows = []
        for name, replicates in traces.items():
            row = OrderedDict([
                ('strategy', name),
                ('replicates', len(replicates)),
                ('final_coverage', float(np.median([t[-1] if len(t) else 0.0 for t in replicates])))
            ])
            for threshold in thresholds:
                key = level_key(threshold)
                tests, censored = tests_needed(replicates, threshold)
                base_tests, base_censored = tests_needed(traces[baseline], threshold)
                speedup = None
                if tests and (censored < len(replicates) or base_censored < len(traces[baseline])):
                    speedup = base_tests / tests
                row['tests_to_%s' % key] = tests
                row['censored_%s' % key] = censored
                row['speedup_%s' % key] = speedup
            rows.append(row)

        with open(os.path.join(output_dir, 'summary.csv'), 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(rows[0].keys())
            for row in rows:
                writer.writerow('' if v is None else repr(v) if isinstance(v, float) else v for v in row.values())
        with open(os.path.join(output_dir, 'summary.json'), 'w', encoding='utf-8', newline='\n') as f:
            f.write(dumps(OrderedDict([
                ('baseline', baseline),
                ('thresholds', list(thresholds)),
                ('strategies', rows)
            ]), indent=2) + '\n')
        for row in rows:
            logger.info('%s', ', '.join('%s=%s' % (k, v) for k, v in row.items()))
        return rows

    def load_traces(self, output_dir):
        # type: (str) -> OrderedDict
        """
        Reads back the per-strategy trace files written by `emit_report`.
        """
        traces = OrderedDict()
        for name in sorted(os.listdir(output_dir)):
            if not name.endswith('.csv') or name == 'summary.csv':
                continue
            replicates = OrderedDict()
            with open(os.path.join(output_dir, name), 'rb') as f:
                reader = csv.DictReader(decode_text(f.read(), name).splitlines())
                for record in reader:
                    try:
                        replicates.setdefault(int(record['replicate']), []).append(float(record['tot_cov']))
                    except (KeyError, TypeError, ValueError):
                        raise ParseError(
                            error='malformed_trace', description='%s: expected replicate and tot_cov values.' % name,
                            line=reader.line_num
                        )
            traces[name[:-len('.csv')]] = list(replicates.values())
        return traces


def write_manifest(path, test_ids):
    # type: (str, Iterable[str]) -> None
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for test_id in test_ids:
            f.write(test_id + '\n')


def read_manifest(path):
    # type: (str) -> List[str]
    with open(path, 'rb') as f:
        text = decode_text(f.read(), path)
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith('#')]


def write_traces(path, replicates):
    # type: (str, Sequence[Sequence[float]]) -> None
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(('replicate', 'iteration', 'tot_cov'))
        for replicate, trace in enumerate(replicates):
            for iteration, tot_cov in enumerate(trace, 1):
                writer.writerow((replicate, iteration, repr(tot_cov)))
