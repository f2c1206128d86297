"""
The campaign engine: replays trained test lists on a processor-under-test through a fuzzer, first the vulnerability
list, then the coverage list matching the current total coverage, and finally the fuzzer's native seed generation
once the lists run dry.
"""

import csv
import logging
import math
from abc import ABC, abstractmethod
from collections import OrderedDict, namedtuple
from enum import Enum
from json import dumps
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Sized

import numpy as np

import testreuse as testreuse_
from testreuse.coverage import CoveragePointId, CoverageRow, CoveredSet, Universe
from testreuse.data import CampaignSummary, Test, TestListModel, TrainedList, level_key
from testreuse.errors import FuzzerError, StructuralError

logger = logging.getLogger(__name__)


class Phase(str, Enum):

    VULNERABILITY = 'vulnerability'
    REPLAY = 'replay'
    COVERAGE = 'coverage'
    NATIVE = 'native'


class Decision(str, Enum):

    KEEP = 'keep'
    RESET = 'reset'
    DROP = 'drop'


NATIVE = 'native'
REPLAY = 'replay'
FAIL = 'fail'

CampaignRecord = namedtuple('CampaignRecord', ('iteration', 'tot_cov', 'phase', 'test_id', 'action'))


class FuzzerPort(ABC):
    """
    What the campaign engine needs from a processor fuzzer bound to a processor-under-test.
    """

    @property
    @abstractmethod
    def universe(self):
        # type: () -> Universe
        """
        The coverage points of the processor-under-test.
        """
        pass

    @abstractmethod
    def mutate(self, test):
        # type: (Test) -> Test
        """
        :return: A fresh mutant of `test`.
        """
        pass

    @abstractmethod
    def generate_native(self):
        # type: () -> Test
        """
        :return: A test from the fuzzer's own seed generation.
        """
        pass

    @abstractmethod
    def execute(self, test):
        # type: (Test) -> CoverageRow
        """
        Runs `test` on the processor-under-test.

        :raises FuzzerError: When the execution fails.
        """
        pass

    @property
    def bug_points(self):
        # type: () -> List[CoveragePointId]
        """
        Points standing for known bugs; their first coverage is reported.
        """
        return []


class DropTracker:
    """
    Execution count and summed incremental coverage of a test and its mutants over the current check window.
    """

    __slots__ = ('test_id', 'window_pulls', 'window_reward')

    def __init__(self, test_id, window_pulls=0, window_reward=0.0):
        # type: (str, int, float) -> None
        self.test_id = test_id
        self.window_pulls = window_pulls
        self.window_reward = window_reward

    def __repr__(self):
        return 'DropTracker(%r, %d, %r)' % (self.test_id, self.window_pulls, self.window_reward)


class ActiveList:
    """
    A working copy of a trained list that tests can be dropped from. Sampling follows the trained probabilities,
    rescaled over the tests still in the list.
    """

    def __init__(self, trained):
        # type: (TrainedList) -> None
        self.context = trained.context
        self.kind = trained.kind
        self._weights = OrderedDict((e.test_id, e.prob) for e in trained)  # type: OrderedDict[str, float]

    def sample(self, rng):
        # type: (np.random.Generator) -> str
        if not self._weights:
            raise StructuralError(error='empty_list', description='Cannot sample from an exhausted test list.')
        ids = list(self._weights)
        cumulative = np.cumsum(list(self._weights.values()))
        i = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right'))
        return ids[min(i, len(ids) - 1)]

    def drop(self, test_id):
        # type: (str) -> None
        self._weights.pop(test_id, None)

    @property
    def probabilities(self):
        # type: () -> OrderedDict
        total = math.fsum(self._weights.values())
        return OrderedDict((t, w / total) for t, w in self._weights.items())

    def __contains__(self, test_id):
        return test_id in self._weights

    def __len__(self):
        return len(self._weights)

    def __iter__(self):
        return iter(self._weights)

    def __repr__(self):
        return 'ActiveList(%s, %d tests)' % (
            self.kind.value if self.context is None else level_key(self.context), len(self)
        )


class CampaignState:
    """
    Everything a campaign mutates. `covered` only grows, `phase` only moves forward and `iteration` counts executions
    of the processor-under-test.
    """

    def __init__(
        self,
        model,  # type: TestListModel
        catalog,  # type: Mapping[str, Test]
        universe,  # type: Universe
        rng,  # type: np.random.Generator
        bug_points=()  # type: Iterable[CoveragePointId]
    ):
        self.model = model
        self.catalog = catalog
        self.rng = rng
        self.covered = CoveredSet(universe)
        self.trackers = OrderedDict()  # type: OrderedDict[str, DropTracker]
        self.executions = {}  # type: Dict[str, int]
        self.dropped = set()  # type: Set[str]
        self.phase = Phase.VULNERABILITY
        self.phase_starts = OrderedDict()  # type: OrderedDict[str, int]
        self.vulnerability = ActiveList(model.vulnerability_list)
        self.coverage = OrderedDict((l, ActiveList(t)) for l, t in model.coverage_lists.items())
        self.iteration = 0
        self.records = []  # type: List[CampaignRecord]
        index = universe.index
        self.bug_points = OrderedDict((p, index[p]) for p in bug_points)
        self.bug_points_reached = OrderedDict()  # type: OrderedDict[str, int]

    @property
    def tot_cov(self):
        # type: () -> float
        return self.covered.total_coverage()

    def enter(self, phase):
        # type: (Phase) -> None
        if phase != self.phase:
            logger.info(
                'Iteration %d: %s phase -> %s phase at %.2f%% coverage',
                self.iteration, self.phase.value, phase.value, self.tot_cov
            )
            self.phase = phase

    def record(self, test_id, action):
        # type: (str, str) -> None
        self.phase_starts.setdefault(self.phase.value, self.iteration)
        self.records.append(CampaignRecord(self.iteration, self.tot_cov, self.phase.value, test_id, action))

    def merge(self, row):
        # type: (CoverageRow) -> float
        """
        Merges the coverage of one execution.

        :return: The execution's incremental coverage.
        """
        increment = self.covered.incremental_coverage(row)
        self.covered = self.covered.merge(row)
        for point, column in self.bug_points.items():
            if row.bits[column] and str(point) not in self.bug_points_reached:
                self.bug_points_reached[str(point)] = self.iteration
                logger.info('Iteration %d: bug point %s reached by %s', self.iteration, point, row.test_id)
        return increment


class CampaignReport:

    def __init__(self, records, summary):
        # type: (Sequence[CampaignRecord], CampaignSummary) -> None
        self.records = list(records)
        self.summary = summary

    @property
    def trace(self):
        # type: () -> List[float]
        """
        :return: Total coverage after each iteration.
        """
        return [r.tot_cov for r in self.records]

    def write_csv(self, path):
        # type: (str) -> None
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(CampaignRecord._fields)
            for r in self.records:
                writer.writerow((r.iteration, repr(r.tot_cov), r.phase, r.test_id, r.action))

    def write_summary(self, path):
        # type: (str) -> None
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(dumps(self.summary.data, indent=2) + '\n')

    def __eq__(self, other):
        return isinstance(other, CampaignReport) and self.records == other.records and self.summary == other.summary

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'CampaignReport(%d iterations, %.2f%%)' % (len(self.records), self.summary.final_coverage)


def tests_to_threshold(trace, threshold):
    # type: (Sequence[float], float) -> Optional[int]
    """
    :return: The 1-based iteration at which `trace` first reaches `threshold`, or `None`.
    """
    for i, tot_cov in enumerate(trace, 1):
        if tot_cov >= threshold:
            return i
    return None


class Runtime:

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def drop_test(self, tracker, increment, gamma):
        # type: (DropTracker, float, int) -> Decision
        """
        Accounts one execution of a list test (or a mutant of it). Once the window holds `gamma` executions, the test
        is dropped if the window added no coverage; otherwise the window restarts.

        :raises StructuralError: For a negative increment.
        """
        if increment < 0:
            raise StructuralError(
                error='negative_increment', description='Increment %r of %r is negative.' % (increment, tracker.test_id)
            )
        tracker.window_pulls += 1
        tracker.window_reward += increment
        if tracker.window_pulls < gamma:
            return Decision.KEEP
        if tracker.window_reward == 0:
            return Decision.DROP
        tracker.window_pulls = 0
        tracker.window_reward = 0.0
        return Decision.RESET

    def select_cov_list(self, tot_cov, levels, lists):
        # type: (float, Sequence[float], Sequence[Sized]) -> Optional[int]
        """
        :param levels: Context levels, ascending.

        :param lists: The list of each level.

        :return: The index of the list to draw from: the first level above `tot_cov`, or the next non-empty list
            above it when that one is empty. `None` means native generation.
        """
        for i, level in enumerate(levels):
            if tot_cov < level:
                for j in range(i, len(levels)):
                    if len(lists[j]):
                        return j
                return None
        return None

    def start_campaign(self, model, fuzzer, catalog, rng):
        # type: (TestListModel, FuzzerPort, Mapping[str, Test], np.random.Generator) -> CampaignState
        """
        :raises StructuralError: When a listed test is missing from `catalog`.
        """
        listed = list(model.vulnerability_list.test_ids)
        for trained in model.coverage_lists.values():
            listed.extend(trained.test_ids)
        missing = [t for t in listed if t not in catalog]
        if missing:
            raise StructuralError(
                error='unknown_test', description='%d listed tests are not in the catalog, e.g. %r.' % (
                    len(missing), missing[0]
                )
            )
        return CampaignState(model, catalog, fuzzer.universe, rng, fuzzer.bug_points)

    def fuzz_vul_list(self, state, fuzzer, gamma, m):
        # type: (CampaignState, FuzzerPort, int, int) -> CampaignState
        """
        Fuzzes with the vulnerability list until every test in it is dropped or the budget of `m` iterations is
        spent, then moves the campaign to the coverage phase.
        """
        while len(state.vulnerability) and state.iteration < m:
            test_id = state.vulnerability.sample(state.rng)
            self._fuzz_listed(state, fuzzer, state.vulnerability, test_id, gamma)
        state.enter(Phase.COVERAGE)
        return state

    def fuzz_cov_list(self, state, fuzzer, gamma, m):
        # type: (CampaignState, FuzzerPort, int, int) -> CampaignState
        """
        Fuzzes up to iteration `m` with the coverage list matching the current total coverage, falling back to native
        seed generation once no list applies.
        """
        levels = list(state.coverage)
        lists = [state.coverage[l] for l in levels]
        while state.iteration < m:
            index = None
            if state.phase != Phase.NATIVE:
                index = self.select_cov_list(state.tot_cov, levels, lists)
            if index is None:
                state.enter(Phase.NATIVE)
                self._fuzz_native(state, fuzzer)
            else:
                active = lists[index]
                self._fuzz_listed(state, fuzzer, active, active.sample(state.rng), gamma)
        return state

    def run_campaign(
        self,
        model,  # type: TestListModel
        fuzzer,  # type: FuzzerPort
        catalog,  # type: Mapping[str, Test]
        rng=None,  # type: Optional[np.random.Generator]
        gamma=None,  # type: Optional[int]
        m=None,  # type: Optional[int]
        thresholds=None  # type: Optional[Sequence[float]]
    ):
        # type: (...) -> CampaignReport
        """
        Runs a whole campaign: the vulnerability phase, then the coverage phase, which ends in native generation.

        :param catalog:

            The tests the model's lists refer to, by id.

        :param gamma:

            The check window; the model's when omitted.

        :param m:

            The iteration budget shared by every phase; the configured `m` when omitted.

        :param thresholds:

            Total coverage levels reported as tests-to-threshold; the configured `thresholds` when omitted.
        """
        config = self.workbench.config
        gamma = model.params.gamma if gamma is None else gamma
        m = config.m if m is None else m
        if rng is None:
            rng = self.workbench.rng('campaign')
        state = self.start_campaign(model, fuzzer, catalog, rng)
        self.fuzz_vul_list(state, fuzzer, gamma, m)
        self.fuzz_cov_list(state, fuzzer, gamma, m)
        return self._report(state, config.thresholds if thresholds is None else thresholds)

    def run_native(self, fuzzer, m=None, thresholds=None):
        # type: (FuzzerPort, Optional[int], Optional[Sequence[float]]) -> CampaignReport
        """
        Runs the bare fuzzer for `m` iterations of native seed generation.
        """
        config = self.workbench.config
        m = config.m if m is None else m
        state = CampaignState(TestListModel(self.workbench.config.params), {}, fuzzer.universe, None, fuzzer.bug_points)
        state.phase = Phase.NATIVE
        while state.iteration < m:
            self._fuzz_native(state, fuzzer)
        return self._report(state, config.thresholds if thresholds is None else thresholds)

    def run_sequence(
        self,
        sequence,  # type: Iterable[str]
        fuzzer,  # type: FuzzerPort
        catalog,  # type: Mapping[str, Test]
        m=None,  # type: Optional[int]
        thresholds=None  # type: Optional[Sequence[float]]
    ):
        # type: (...) -> CampaignReport
        """
        Executes prior-processor tests in a fixed order, without mutation, then falls back to native seed generation
        for whatever remains of the `m` iterations.
        """
        config = self.workbench.config
        m = config.m if m is None else m
        state = CampaignState(TestListModel(config.params), catalog, fuzzer.universe, None, fuzzer.bug_points)
        state.phase = Phase.REPLAY
        for test_id in sequence:
            if state.iteration >= m:
                break
            state.iteration += 1
            try:
                row = fuzzer.execute(catalog[test_id])
            except FuzzerError as e:
                logger.warning('Iteration %d: %s failed: %s', state.iteration, test_id, e)
                state.record(test_id, FAIL)
                continue
            state.merge(row)
            state.record(test_id, REPLAY)
        while state.iteration < m:
            state.enter(Phase.NATIVE)
            self._fuzz_native(state, fuzzer)
        return self._report(state, config.thresholds if thresholds is None else thresholds)

    def _fuzz_listed(self, state, fuzzer, active, test_id, gamma):
        # type: (CampaignState, FuzzerPort, ActiveList, str, int) -> None
        state.iteration += 1
        test = state.catalog[test_id]
        executions = state.executions.get(test_id, 0)
        try:
            executed = test if executions == 0 else fuzzer.mutate(test)
            row = fuzzer.execute(executed)
        except FuzzerError as e:
            logger.warning('Iteration %d: %s failed and is dropped: %s', state.iteration, test_id, e)
            active.drop(test_id)
            state.dropped.add(test_id)
            state.record(test_id, FAIL)
            return
        state.executions[test_id] = executions + 1
        increment = state.merge(row)
        tracker = state.trackers.get(test_id)
        if tracker is None:
            tracker = state.trackers[test_id] = DropTracker(test_id)
        decision = self.drop_test(tracker, increment, gamma)
        if decision == Decision.DROP:
            active.drop(test_id)
            state.dropped.add(test_id)
            logger.debug('Iteration %d: dropped %s, %d tests left in %r', state.iteration, test_id, len(active), active)
        state.record(executed.test_id, decision.value)

    def _fuzz_native(self, state, fuzzer):
        # type: (CampaignState, FuzzerPort) -> None
        state.iteration += 1
        try:
            test = fuzzer.generate_native()
            row = fuzzer.execute(test)
        except FuzzerError as e:
            logger.warning('Iteration %d: native test failed: %s', state.iteration, e)
            state.record('', FAIL)
            return
        state.merge(row)
        state.record(test.test_id, NATIVE)

    def _report(self, state, thresholds):
        # type: (CampaignState, Iterable[float]) -> CampaignReport
        trace = [r.tot_cov for r in state.records]
        summary = CampaignSummary(
            iterations=state.iteration,
            final_coverage=state.tot_cov,
            tests_to_threshold=OrderedDict((level_key(t), tests_to_threshold(trace, t)) for t in thresholds),
            phase_starts=state.phase_starts,
            dropped_tests=len(state.dropped),
            bug_points=len(state.bug_points),
            bug_points_reached=state.bug_points_reached
        )
        logger.info(
            'Campaign finished after %d iterations at %.2f%% coverage, %d tests dropped',
            state.iteration, state.tot_cov, len(state.dropped)
        )
        return CampaignReport(state.records, summary)
