import csv
import hashlib
import logging
from collections import OrderedDict
from json import dumps, loads
from typing import Callable, Dict, Iterable, List, Mapping, MutableSequence, Optional, Sequence, Tuple

import numpy as np

import testreuse as testreuse_
from testreuse.api.bandit import RewardSource, TrainingStep
from testreuse.coverage import CoverageRow, CoveredSet
from testreuse.data import (
    SCHEMA_VERSION, ListEntry, ModelParams, TestKind, TestListModel, TrainedList, level_key
)
from testreuse.errors import ModelFormatError, StructuralError

logger = logging.getLogger(__name__)

THRESHOLD_SEARCH_ITERATIONS = 14
THRESHOLD_RANGE = (0.0, 100.0)
LOAD_TOLERANCE = 1e-6

SWEEP_STEPS = (500, 1000, 2000, 5000, 8000, 10000)


class ContextSnapshot:
    """
    A coverage context: a total coverage level, and for each training processor the covered set of its baseline run
    at the first moment the run reached that level. Processors whose run never reached the level are listed in
    `absent`.
    """

    def __init__(self, level, per_processor, absent=()):
        # type: (float, Mapping[str, CoveredSet], Iterable[str]) -> None
        self.level = level
        self.per_processor = OrderedDict(per_processor)
        self.absent = list(absent)

    @property
    def processors(self):
        # type: () -> List[str]
        return list(self.per_processor)

    def __repr__(self):
        return 'ContextSnapshot(%s, %s)' % (
            level_key(self.level),
            ', '.join('%s=%.2f' % (p, c.total_coverage()) for p, c in self.per_processor.items())
        )


class RowCache:
    """
    Memoizes coverage rows by (processor, test id) so each test runs on each processor once, however many training
    trials ask for it.
    """

    def __init__(self, source):
        # type: (Callable[[str, str], CoverageRow]) -> None
        self.source = source
        self._rows = {}  # type: Dict[Tuple[str, str], CoverageRow]

    def __getitem__(self, key):
        # type: (Tuple[str, str]) -> CoverageRow
        row = self._rows.get(key)
        if row is None:
            row = self._rows[key] = self.source(*key)
        return row

    def __len__(self):
        return len(self._rows)


class RewardEnv(RewardSource):
    """
    The reward of a test under one coverage context: its incremental coverage over the context's covered set on a
    training processor drawn uniformly at random for each query. Percentages are relative to the drawing processor's
    universe.
    """

    def __init__(self, snapshot, rows, seed=0):
        # type: (ContextSnapshot, Mapping[Tuple[str, str], CoverageRow], int) -> None
        """
        :param snapshot: The context.

        :param rows: Coverage rows by (processor, test id), e.g. a `RowCache`.

        :param seed: Seed of the processor draws.
        """
        self.snapshot = snapshot
        self.context = snapshot.level
        self.rows = rows
        self._processors = snapshot.processors
        self.reset(seed)
        if not self._processors:
            logger.warning('No training processor reached context %s; every reward is 0', level_key(self.context))

    def reset(self, seed):
        # type: (int) -> None
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reward(self, test_id):
        # type: (str) -> float
        if not self._processors:
            return 0.0
        processor = self._processors[int(self.rng.integers(len(self._processors)))]
        return self.snapshot.per_processor[processor].incremental_coverage(self.rows[processor, test_id])


class Trainer:

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def snapshot_contexts(
        self,
        baseline_traces,  # type: Mapping[str, Sequence[CoveredSet]]
        levels  # type: Iterable[float]
    ):
        # type: (...) -> OrderedDict
        """
        Samples coverage contexts from baseline fuzzing runs.

        :param baseline_traces:

            For each training processor, the covered set after each test of a baseline run.

        :param levels:

            Total coverage levels in percent.

        :return:

            A `ContextSnapshot` for each level, ascending. Each holds the first covered set of every run at or above
            the level.

        :raises StructuralError: For an empty trace.
        """
        totals = OrderedDict()
        for processor, trace in baseline_traces.items():
            if not trace:
                raise StructuralError(
                    error='empty_trace', description='The baseline trace of %s is empty.' % processor
                )
            totals[processor] = [c.total_coverage() for c in trace]
        snapshots = OrderedDict()
        for level in sorted(levels):
            per_processor, absent = OrderedDict(), []
            for processor, trace in baseline_traces.items():
                crossing = next((i for i, t in enumerate(totals[processor]) if t >= level), None)
                if crossing is None:
                    absent.append(processor)
                else:
                    per_processor[processor] = trace[crossing]
            if absent:
                logger.info('Context %s: not reached by %s', level_key(level), ', '.join(absent))
            snapshots[level] = ContextSnapshot(level, per_processor, absent)
        return snapshots

    def search_threshold(
        self,
        trial,  # type: Callable[[float], int]
        k,  # type: int
        f  # type: float
    ):
        # type: (...) -> Tuple[float, int, bool]
        """
        Binary search of the adaptive threshold over [0, 100]: a threshold is accepted once the list it produces holds
        between (1 - f) * k and (1 + f) * k tests. Fourteen halvings reach a precision of 0.01.

        :param trial: Maps a threshold to the size of the list trained with it.

        :return: The threshold, the number of trials run, and whether it was accepted. Without acceptance the last
            midpoint is returned.
        """
        k_upper, k_lower = (1 + f) * k, (1 - f) * k
        low, high = THRESHOLD_RANGE
        middle = (low + high) / 2
        for i in range(1, THRESHOLD_SEARCH_ITERATIONS + 1):
            middle = (low + high) / 2
            size = trial(middle)
            logger.debug('Threshold trial %d: theta=%.4f -> %d tests', i, middle, size)
            if size > k_upper:
                low = middle
            elif size < k_lower:
                high = middle
            else:
                return middle, i, True
        return middle, THRESHOLD_SEARCH_ITERATIONS, False

    def fine_tune_thresholds(
        self,
        corpus,  # type: Sequence[str]
        levels,  # type: Iterable[float]
        k,  # type: int
        gamma,  # type: int
        n,  # type: int
        f,  # type: float
        envs,  # type: Mapping[float, RewardEnv]
        rng,  # type: np.random.Generator
        epsilon=None  # type: Optional[float]
    ):
        # type: (...) -> OrderedDict
        """
        Tunes the adaptive threshold of every context, highest first, so that each coverage list holds about k tests.
        After a context is tuned, the tests its list takes are removed from the corpus before the next one.

        Every trial of a context trains from the same seeds, so list sizes only vary with the threshold.

        :return: The threshold of each level, ascending.
        """
        bandit = self.workbench.bandit
        pool = list(corpus)
        theta = OrderedDict()
        for level in sorted(levels, reverse=True):
            env = envs[level]
            seed, env_seed = (int(s) for s in rng.integers(2 ** 63, size=2))

            def train(threshold):
                env.reset(env_seed)
                return bandit.adaptive_cb_train(
                    pool, env, k, gamma, threshold, n, np.random.default_rng(seed), epsilon=epsilon
                )

            value, trials, accepted = self.search_threshold(lambda t: len(train(t)[0]), k, f)
            if not accepted:
                logger.warning(
                    'Context %s: no threshold gives %g to %g tests from %d; using %.4f',
                    level_key(level), (1 - f) * k, (1 + f) * k, len(pool), value
                )
            chosen, pool = train(value)
            logger.info(
                'Context %s: theta=%.4f after %d trials, %d tests listed', level_key(level), value, trials, len(chosen)
            )
            theta[level] = value
        return OrderedDict(sorted(theta.items()))

    def train_model(
        self,
        corpus,  # type: Sequence[str]
        vuln_tests,  # type: Sequence[str]
        levels,  # type: Iterable[float]
        params,  # type: ModelParams
        envs,  # type: Mapping[float, RewardEnv]
        vuln_env,  # type: RewardSource
        rng,  # type: np.random.Generator
        log=None,  # type: Optional[MutableSequence[TrainingStep]]
        adaptive=True  # type: bool
    ):
        # type: (...) -> TestListModel
        """
        Trains the coverage lists from the highest context down, removing the tests each list takes from the corpus
        before the next context, then the vulnerability list.

        :param corpus: Minimized coverage tests.

        :param vuln_tests: Vulnerability tests. All of them are listed; none is eliminated.

        :param params: Training parameters. Contexts without a threshold in `params.theta` are tuned first.

        :param envs: The reward environment of each context.

        :param vuln_env: The reward environment of the vulnerability list.

        :param adaptive: `False` trains the coverage lists with the plain loop (no elimination or promotion), each
            from k tests of the remaining corpus.
        """
        bandit = self.workbench.bandit
        levels = sorted(levels)
        theta = OrderedDict(params.theta)
        untuned = [l for l in levels if l not in theta]
        if adaptive and untuned:
            theta.update(self.fine_tune_thresholds(
                corpus, untuned, params.k, params.gamma, params.n, params.f, envs, rng, epsilon=params.epsilon
            ))
        pool = list(corpus)
        coverage_lists = OrderedDict()
        for level in reversed(levels):
            if adaptive:
                trained, pool = bandit.adaptive_cb_train(
                    pool, envs[level], params.k, params.gamma, theta[level], params.n, rng,
                    epsilon=params.epsilon, log=log
                )
            else:
                trained = bandit.original_cb_train(
                    pool, envs[level], params.k, params.n, rng, epsilon=params.epsilon, log=log
                )
                listed = set(trained.test_ids)
                pool = [t for t in pool if t not in listed]
            logger.info('Context %s: %d tests listed', level_key(level), len(trained))
            coverage_lists[level] = trained
        if vuln_tests:
            vulnerability_list = bandit.original_cb_train(
                vuln_tests, vuln_env, len(vuln_tests), params.n, rng,
                epsilon=params.epsilon, kind=TestKind.VULNERABILITY, log=log
            )
            vulnerability_list.context = None
        else:
            vulnerability_list = TrainedList(kind=TestKind.VULNERABILITY)
        model = TestListModel(
            params=ModelParams(
                k=params.k, gamma=params.gamma, epsilon=params.epsilon, n=params.n, f=params.f,
                theta=OrderedDict((l, theta[l]) for l in levels if l in theta)
            ),
            vulnerability_list=vulnerability_list,
            coverage_lists=coverage_lists
        )
        model.validate()
        return model

    def step_sweep(
        self,
        variants,  # type: Mapping[str, Sequence[str]]
        env,  # type: RewardEnv
        k,  # type: int
        gamma,  # type: int
        theta,  # type: float
        rng,  # type: np.random.Generator
        steps=SWEEP_STEPS,  # type: Sequence[int]
        repeats=3  # type: int
    ):
        # type: (...) -> List[Tuple[str, int, int, int]]
        """
        Counts the tests the adaptive loop lists for one context as the number of training steps grows, for several
        corpora (e.g. the full, interesting and minimized corpora).

        :return: (variant, steps, repeat, listed tests) rows.
        """
        bandit = self.workbench.bandit
        rows = []
        for name, corpus in variants.items():
            for repeat in range(repeats):
                seed, env_seed = (int(s) for s in rng.integers(2 ** 63, size=2))
                for n in steps:
                    env.reset(env_seed)
                    trained, _ = bandit.adaptive_cb_train(
                        corpus, env, k, gamma, theta, n, np.random.default_rng(seed)
                    )
                    rows.append((name, n, repeat, len(trained)))
        return rows

    def save_model(self, model, path):
        # type: (TestListModel, str) -> None
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.dumps_model(model))

    def load_model(self, path):
        # type: (str) -> TestListModel
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except (OSError, UnicodeDecodeError) as e:
            raise ModelFormatError(error='unreadable', description='Cannot read model %s: %s' % (path, e))
        return self.loads_model(text)

    def dumps_model(self, model):
        # type: (TestListModel) -> str
        """
        Serializes a model. Contexts are listed highest first; a checksum over the rest of the document is embedded.
        """
        levels = sorted(model.coverage_lists, reverse=True)
        document = OrderedDict([
            ('schema_version', SCHEMA_VERSION),
            ('params', model.params.data),
            ('contexts', [level_key(l) for l in levels]),
            ('vulnerability_list', [e.data for e in model.vulnerability_list]),
            ('coverage_lists', OrderedDict(
                (level_key(l), [e.data for e in model.coverage_lists[l]]) for l in levels
            ))
        ])
        document['checksum'] = checksum(document)
        return dumps(document, indent=2) + '\n'

    def loads_model(self, text):
        # type: (str) -> TestListModel
        """
        :raises ModelFormatError: On a schema mismatch, a checksum failure or lists that are not probability
            distributions.
        """
        try:
            document = loads(text, object_hook=OrderedDict)
        except ValueError as e:
            raise ModelFormatError(error='invalid_json', description='Model is not valid JSON: %s' % e)
        if not isinstance(document, dict) or document.get('schema_version') != SCHEMA_VERSION:
            raise ModelFormatError(
                error='schema_mismatch', description='Expected model schema version %d, found %r.' % (
                    SCHEMA_VERSION, document.get('schema_version') if isinstance(document, dict) else None
                )
            )
        expected = document.pop('checksum', None)
        if expected != checksum(document):
            raise ModelFormatError(error='checksum', description='Model checksum does not match its content.')
        try:
            params = ModelParams(document['params'])
            contexts = [float(c) for c in document['contexts']]
            coverage_lists = OrderedDict(
                (float(level), TrainedList(
                    context=float(level),
                    entries=[ListEntry(e) for e in entries]
                ))
                for level, entries in document['coverage_lists'].items()
            )
            vulnerability_list = TrainedList(
                kind=TestKind.VULNERABILITY, entries=[ListEntry(e) for e in document['vulnerability_list']]
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(error='malformed', description='Malformed model document: %r' % e)
        if sorted(contexts) != sorted(coverage_lists):
            raise ModelFormatError(
                error='malformed', description='Model contexts do not match its coverage lists.'
            )
        model = TestListModel(params, vulnerability_list, coverage_lists)
        model.validate(tolerance=LOAD_TOLERANCE, error=ModelFormatError)
        return model

    def write_training_log(self, steps, path):
        # type: (Iterable[TrainingStep], str) -> None
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(TrainingStep._fields)
            for s in steps:
                writer.writerow((
                    s.step, level_key(s.context) if s.context is not None else '', s.arm, '%.6f' % s.reward, s.action
                ))


def checksum(document):
    # type: (Mapping) -> str
    canonical = dumps(document, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
