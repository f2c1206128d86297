import logging
import time
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import testreuse as testreuse_
from testreuse.coverage import CoverageMatrix
from testreuse.data import MinimizeResult

logger = logging.getLogger(__name__)


def _mask(bits):
    # type: (np.ndarray) -> int
    return int.from_bytes(np.packbits(bits, bitorder='little').tobytes(), 'little')


def _popcount(x):
    # type: (int) -> int
    return bin(x).count('1')


def _bits_of(x):
    # type: (int) -> Iterable[int]
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


class _OutOfTime(Exception):

    pass


class Minimizer:
    """
    Selects the smallest subset of a corpus that reaches every coverage point the whole corpus reaches.

    The exact solver is a branch-and-bound search over the set-cover formulation; the greedy solver is the classic
    largest-marginal-gain heuristic. Both break ties by test id, so results are deterministic.
    """

    def __init__(self, workbench):
        # type: (testreuse_.Workbench) -> None
        self.workbench = workbench

    def minimize_greedy(self, matrix):
        # type: (CoverageMatrix) -> MinimizeResult
        """
        :return: A coverage-equivalent selection whose size is within a factor 1 + ln|universe| of the minimum.
        """
        started = time.monotonic()
        ids, masks, empty = self._masks(matrix)
        target = 0
        for m in masks:
            target |= m
        selected = self._greedy(ids, masks, target)
        result = MinimizeResult(
            selected=selected,
            method=MinimizeResult.GREEDY,
            corpus_size=len(matrix),
            empty_rows=empty,
            elapsed=time.monotonic() - started
        )
        self._log(result)
        return result

    def minimize_exact(
        self,
        matrix,  # type: CoverageMatrix
        time_budget=None  # type: Optional[float]
    ):
        # type: (...) -> MinimizeResult
        """
        Finds a coverage-equivalent selection of minimum size.

        :param matrix:

            The corpus. Tests reaching no point are reported in `empty_rows` and never selected.

        :param time_budget:

            Seconds the search may take; the configured `time_budget` when omitted. When it runs out, the best
            selection found so far is returned with method "greedy-fallback".
        """
        if time_budget is None:
            time_budget = self.workbench.config.time_budget
        started = time.monotonic()
        deadline = started + time_budget
        ids, masks, empty = self._masks(matrix)
        target = 0
        for m in masks:
            target |= m
        # points every test hits are reached by any non-empty selection
        universal = target if len(masks) == len(matrix) else 0
        for m in masks:
            universal &= m
        constrained = target & ~universal
        if not target:
            selected, method = [], MinimizeResult.EXACT
        elif not constrained:
            selected, method = self._greedy(ids, masks, target)[:1], MinimizeResult.EXACT
        else:
            selected, method = self._branch_and_bound(ids, [m & constrained for m in masks], constrained, deadline)
        result = MinimizeResult(
            selected=selected,
            method=method,
            corpus_size=len(matrix),
            empty_rows=empty,
            elapsed=time.monotonic() - started
        )
        self._log(result)
        return result

    def verify_equivalence(self, matrix, selected):
        # type: (CoverageMatrix, Iterable[str]) -> bool
        """
        :return: `True` when the tests in `selected` together hit every point the whole corpus hits.

        :raises StructuralError: For an id that is not in the matrix.
        """
        return bool(np.array_equal(matrix.union(list(selected)), matrix.union()))

    def interesting_tests(self, matrix):
        # type: (CoverageMatrix) -> List[str]
        """
        :return: The tests that reach at least one new point when the corpus is replayed in its ingestion order.
        """
        covered = np.zeros(len(matrix.universe), dtype=bool)
        interesting = []
        for row in matrix:
            if np.any(row.bits & ~covered):
                interesting.append(row.test_id)
                covered |= row.bits
        return interesting

    def _log(self, result):
        logger.info(
            'Minimized %d tests to %d (%.2f%% reduction, %s, %.3fs)',
            result.corpus_size, result.objective, result.reduction_rate, result.method, result.elapsed
        )
        if result.empty_rows:
            logger.info('%d tests reach no coverage point: %s', len(result.empty_rows), ', '.join(result.empty_rows))

    @staticmethod
    def _masks(matrix):
        # type: (CoverageMatrix) -> Tuple[List[str], List[int], List[str]]
        ids, masks, empty = [], [], []
        for row in matrix:
            m = _mask(row.bits)
            if m:
                ids.append(row.test_id)
                masks.append(m)
            else:
                empty.append(row.test_id)
        return ids, masks, empty

    @staticmethod
    def _greedy(ids, masks, target):
        # type: (Sequence[str], Sequence[int], int) -> List[str]
        order = sorted(range(len(ids)), key=lambda i: ids[i])
        remaining = target
        selected = []
        while remaining:
            best, best_gain = None, 0
            for i in order:
                gain = _popcount(masks[i] & remaining)
                if gain > best_gain:
                    best, best_gain = i, gain
            if best is None:
                break
            selected.append(ids[best])
            remaining &= ~masks[best]
        return selected

    def _branch_and_bound(self, ids, masks, target, deadline):
        # type: (List[str], List[int], int, float) -> Tuple[List[str], str]
        incumbent = self._greedy(ids, masks, target)
        candidates = self._reduce(ids, masks)
        logger.debug('Exact search over %d of %d candidate tests', len(candidates), len(ids))
        cand_ids = [ids[i] for i in candidates]
        cand_masks = [masks[i] for i in candidates]
        covering = {}  # type: Dict[int, int]
        for r, m in enumerate(cand_masks):
            for p in _bits_of(m):
                covering[p] = covering.get(p, 0) | (1 << r)

        # rows that are the only way to reach some point
        forced = 0
        for rows in covering.values():
            if _popcount(rows) == 1:
                forced |= rows
        chosen = list(_bits_of(forced))
        uncovered = target
        for r in chosen:
            uncovered &= ~cand_masks[r]

        best = [len(incumbent), None]

        def lower_bound(uncovered):
            max_gain = max(_popcount(m & uncovered) for m in cand_masks)
            if not max_gain:
                return len(cand_masks) + 1
            bound = -(-_popcount(uncovered) // max_gain)
            # points whose covering rows are pairwise disjoint each need their own row
            used, disjoint = 0, 0
            for p in sorted(_bits_of(uncovered), key=lambda p: _popcount(covering[p])):
                if not covering[p] & used:
                    used |= covering[p]
                    disjoint += 1
            return max(bound, disjoint)

        def search(uncovered, chosen):
            # depth-first over an explicit stack; branches are pushed in reverse so the first is explored first
            stack = [(uncovered, tuple(chosen))]
            while stack:
                if time.monotonic() > deadline:
                    raise _OutOfTime()
                uncovered, path = stack.pop()
                if not uncovered:
                    if len(path) < best[0]:
                        best[0], best[1] = len(path), list(path)
                    continue
                if len(path) + lower_bound(uncovered) >= best[0]:
                    continue
                point = min(_bits_of(uncovered), key=lambda p: (_popcount(covering[p]), p))
                branches = sorted(
                    _bits_of(covering[point]),
                    key=lambda r: (-_popcount(cand_masks[r] & uncovered), cand_ids[r])
                )
                for r in reversed(branches):
                    stack.append((uncovered & ~cand_masks[r], path + (r,)))

        try:
            search(uncovered, chosen)
        except _OutOfTime:
            logger.warning('Exact minimization ran out of time; returning the best selection found')
            if best[1] is None:
                return incumbent, MinimizeResult.GREEDY_FALLBACK
            return [cand_ids[r] for r in best[1]], MinimizeResult.GREEDY_FALLBACK
        if best[1] is None:
            return incumbent, MinimizeResult.EXACT
        return [cand_ids[r] for r in best[1]], MinimizeResult.EXACT

    @staticmethod
    def _reduce(ids, masks):
        # type: (Sequence[str], Sequence[int]) -> List[int]
        """
        :return: Indices of the rows worth branching on: identical rows collapse to the smallest id and rows whose
            points are a strict subset of another row's are dropped.
        """
        order = sorted(range(len(ids)), key=lambda i: (-_popcount(masks[i]), ids[i]))
        kept = []  # type: List[int]
        for i in order:
            m = masks[i]
            if not any(m & ~masks[j] == 0 for j in kept):
                kept.append(i)
        return sorted(kept, key=lambda i: ids[i])
